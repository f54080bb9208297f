//! C ABI over the eval3d engine.
//!
//! Every function returns an [`Eval3dStatus`]; on failure a message is kept
//! per thread and read with [`eval3d_last_error`]. Meshes are opaque handles
//! released with [`eval3d_mesh_free`]. Strings returned by the library are
//! released with [`eval3d_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use eval3d::assets::{load_mesh, normalize_mesh, TriMesh};
use eval3d::backends::{JudgeVerdict, QAItem};
use eval3d::camrig::{CameraView, RigSpec};
use eval3d::metrics::{
    aesthetic_elo, score_view, semantic_from_variances, structural_score, text_3d_alignment,
    AlignConfig, PairOutcome,
};
use eval3d::pipeline::{run_eval, RunConfig};
use eval3d::raster::{rasterize, NormalMap, Shading};
use eval3d::Vec3;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eval3dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Mesh = 4,
    Metric = 5,
    Pipeline = 6,
    Panic = 7,
}

/// Opaque mesh handle.
pub struct Eval3dMesh {
    mesh: TriMesh,
}

/// Camera on a turntable around the origin, looking at the origin.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Eval3dCamera {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance: f64,
    pub vfov_deg: f64,
    pub resolution: u32,
    pub near: f64,
    pub far: f64,
}

/// Pairwise judgment: 0 = A wins, 1 = B wins, 2 = tie.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Eval3dOutcome {
    pub model_a: u32,
    pub model_b: u32,
    pub verdict: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(Eval3dStatus, String);

type FfiResult = Result<(), Fail>;

fn fail<T>(status: Eval3dStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult) -> Eval3dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => Eval3dStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            Eval3dStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(Eval3dStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(Eval3dStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(Eval3dStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return fail(Eval3dStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Fail(
            Eval3dStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eval3d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn eval3d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an OBJ or PLY file, centered and scaled to a largest extent of 2.
///
/// # Safety
/// `path` must be a nul-terminated string and `out_mesh` writable.
#[no_mangle]
pub unsafe extern "C" fn eval3d_mesh_load(
    path: *const c_char,
    out_mesh: *mut *mut Eval3dMesh,
) -> Eval3dStatus {
    guard(|| {
        let path = string(path, "path")?;
        let out_mesh = out(out_mesh, "out_mesh")?;
        let mesh = load_mesh(Path::new(path))
            .and_then(normalize_mesh)
            .map_err(|e| Fail(Eval3dStatus::Mesh, format!("{path}: {e}")))?;
        *out_mesh = Box::into_raw(Box::new(Eval3dMesh { mesh }));
        Ok(())
    })
}

/// Builds a mesh from `3 · n_vertices` coordinates and `3 · n_faces` indices.
/// The mesh is used as given, without normalization.
///
/// # Safety
/// The arrays must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn eval3d_mesh_from_arrays(
    vertices: *const f64,
    n_vertices: usize,
    faces: *const u32,
    n_faces: usize,
    out_mesh: *mut *mut Eval3dMesh,
) -> Eval3dStatus {
    guard(|| {
        let v = slice(vertices, n_vertices * 3, "vertices")?;
        let f = slice(faces, n_faces * 3, "faces")?;
        let out_mesh = out(out_mesh, "out_mesh")?;
        let verts = v
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]))
            .collect();
        let faces = f.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let mesh =
            TriMesh::new(verts, faces).map_err(|e| Fail(Eval3dStatus::Mesh, e.to_string()))?;
        *out_mesh = Box::into_raw(Box::new(Eval3dMesh { mesh }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn eval3d_mesh_vertex_count(mesh: *const Eval3dMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.vertex_count())
}

/// # Safety
/// `mesh` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn eval3d_mesh_face_count(mesh: *const Eval3dMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.face_count())
}

/// # Safety
/// `mesh` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn eval3d_mesh_free(mesh: *mut Eval3dMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Renders one view. `depth` receives `resolution²` viewing depths (0 for
/// background) and `normals` `3 · resolution²` camera-space normals. Either
/// output may be null.
///
/// # Safety
/// Non-null outputs must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn eval3d_render(
    mesh: *const Eval3dMesh,
    camera: *const Eval3dCamera,
    smooth: bool,
    depth: *mut f32,
    normals: *mut f32,
) -> Eval3dStatus {
    guard(|| {
        let mesh = &mesh
            .as_ref()
            .ok_or(Fail(Eval3dStatus::NullPointer, "mesh is null".into()))?
            .mesh;
        let cam = *camera
            .as_ref()
            .ok_or(Fail(Eval3dStatus::NullPointer, "camera is null".into()))?;
        let spec = RigSpec {
            n_views: 1,
            elevation: cam.elevation_deg,
            distance: cam.distance,
            vfov: cam.vfov_deg,
            resolution: cam.resolution,
            near: cam.near,
            far: cam.far,
        };
        spec.validate()
            .map_err(|e| Fail(Eval3dStatus::InvalidArgument, e.to_string()))?;
        let view = CameraView::from_spec(0, cam.azimuth_deg, cam.elevation_deg, &spec)
            .map_err(|e| Fail(Eval3dStatus::InvalidArgument, e.to_string()))?;
        let shading = if smooth {
            Shading::Smooth
        } else {
            Shading::Flat
        };
        let b = rasterize(mesh, &view, shading);
        let n = b.face_id.len();
        if !depth.is_null() {
            slice_mut(depth, n, "depth")?.copy_from_slice(&b.depth.data);
        }
        if !normals.is_null() {
            let dst = slice_mut(normals, n * 3, "normals")?;
            for (d, s) in dst.chunks_exact_mut(3).zip(&b.normals.data) {
                d.copy_from_slice(s);
            }
        }
        Ok(())
    })
}

fn normal_map(data: &[f32], n: usize) -> NormalMap {
    NormalMap {
        width: n as u32,
        height: 1,
        data: data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    }
}

/// Geometric consistency of one view: percent of masked pixels whose two
/// normals differ by less than `delta_deg`. Normals are `3 · n_pixels`
/// floats; all-zero normals are invalid.
///
/// # Safety
/// Arrays must hold the stated number of elements; `mask` may be null to
/// use every pixel.
#[no_mangle]
pub unsafe extern "C" fn eval3d_geometric_score(
    analytic: *const f32,
    predicted: *const f32,
    mask: *const u8,
    n_pixels: usize,
    delta_deg: f64,
    out_score: *mut f64,
) -> Eval3dStatus {
    guard(|| {
        let a = slice(analytic, n_pixels * 3, "analytic")?;
        let p = slice(predicted, n_pixels * 3, "predicted")?;
        let mask: Vec<bool> = if mask.is_null() {
            vec![true; n_pixels]
        } else {
            slice(mask, n_pixels, "mask")?
                .iter()
                .map(|&m| m != 0)
                .collect()
        };
        let out_score = out(out_score, "out_score")?;
        if !(delta_deg > 0.0 && delta_deg < 90.0) {
            return fail(
                Eval3dStatus::InvalidArgument,
                format!("delta_deg {delta_deg} outside (0, 90)"),
            );
        }
        let (_, inliers, valid) = score_view(
            &normal_map(a, n_pixels),
            &normal_map(p, n_pixels),
            &mask,
            delta_deg,
        );
        if valid == 0 {
            return fail(Eval3dStatus::Metric, "no valid pixels");
        }
        *out_score = 100.0 * inliers as f64 / valid as f64;
        Ok(())
    })
}

/// Semantic consistency from per-vertex feature variances; NaN entries are
/// excluded vertices.
///
/// # Safety
/// `variances` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn eval3d_semantic_score(
    variances: *const f64,
    n: usize,
    delta: f64,
    out_score: *mut f64,
) -> Eval3dStatus {
    guard(|| {
        let v = slice(variances, n, "variances")?;
        let out_score = out(out_score, "out_score")?;
        let v = v.iter().map(|&x| (!x.is_nan()).then_some(x)).collect();
        let s = semantic_from_variances(v, delta)
            .map_err(|e| Fail(Eval3dStatus::Metric, e.to_string()))?;
        *out_score = s.value;
        Ok(())
    })
}

/// Structural consistency from perceptual distances laid out row-major as
/// `n_inputs × n_targets`.
///
/// # Safety
/// `distances` must hold `n_inputs · n_targets` elements.
#[no_mangle]
pub unsafe extern "C" fn eval3d_structural_score(
    distances: *const f64,
    n_inputs: usize,
    n_targets: usize,
    out_score: *mut f64,
) -> Eval3dStatus {
    guard(|| {
        if n_inputs == 0 || n_targets == 0 {
            return fail(Eval3dStatus::InvalidArgument, "empty distance table");
        }
        let d = slice(distances, n_inputs * n_targets, "distances")?;
        let out_score = out(out_score, "out_score")?;
        if d.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return fail(
                Eval3dStatus::InvalidArgument,
                "distances must lie in [0, 1]",
            );
        }
        let rows: Vec<Vec<f64>> = d.chunks_exact(n_targets).map(<[f64]>::to_vec).collect();
        *out_score = structural_score(&rows).0;
        Ok(())
    })
}

/// Text-3D alignment from a row-major `n_questions × n_views` table of
/// per-view correctness (nonzero = correct).
///
/// # Safety
/// `correct` must hold `n_questions · n_views` elements.
#[no_mangle]
pub unsafe extern "C" fn eval3d_alignment_score(
    correct: *const u8,
    n_questions: usize,
    n_views: usize,
    radius: usize,
    out_score: *mut f64,
) -> Eval3dStatus {
    guard(|| {
        let c = slice(correct, n_questions * n_views, "correct")?;
        let out_score = out(out_score, "out_score")?;
        let cfg = AlignConfig {
            n_views,
            adjacency_radius: radius,
        };
        let qa: Vec<QAItem> = (0..n_questions)
            .map(|j| QAItem {
                question: format!("q{j}"),
                choices: vec!["yes".into(), "no".into()],
                gold: "yes".into(),
            })
            .collect();
        let answers: Vec<Vec<Option<String>>> = c
            .chunks_exact(n_views.max(1))
            .map(|row| {
                row.iter()
                    .map(|&x| Some(if x != 0 { "yes" } else { "no" }.into()))
                    .collect()
            })
            .collect();
        let s = text_3d_alignment(&qa, &answers, &cfg)
            .map_err(|e| Fail(Eval3dStatus::Metric, e.to_string()))?;
        *out_score = s.value;
        Ok(())
    })
}

/// Bradley–Terry ranking of `n_models` models indexed `0..n_models`.
/// `out_normalized` and `out_elo` (either may be null) receive one value per
/// model in index order.
///
/// # Safety
/// `outcomes` must hold `n_outcomes` elements and non-null outputs
/// `n_models`.
#[no_mangle]
pub unsafe extern "C" fn eval3d_elo(
    outcomes: *const Eval3dOutcome,
    n_outcomes: usize,
    n_models: usize,
    out_normalized: *mut f64,
    out_elo: *mut f64,
) -> Eval3dStatus {
    guard(|| {
        let o = slice(outcomes, n_outcomes, "outcomes")?;
        // zero-padded names keep the library's sorted order equal to index order
        let name = |i: u32| format!("{i:010}");
        let mut pairs = Vec::with_capacity(o.len());
        for x in o {
            if x.model_a as usize >= n_models
                || x.model_b as usize >= n_models
                || x.model_a == x.model_b
            {
                return fail(
                    Eval3dStatus::InvalidArgument,
                    format!("bad model pair ({}, {})", x.model_a, x.model_b),
                );
            }
            let verdict = match x.verdict {
                0 => JudgeVerdict::A,
                1 => JudgeVerdict::B,
                2 => JudgeVerdict::Tie,
                v => return fail(Eval3dStatus::InvalidArgument, format!("bad verdict {v}")),
            };
            pairs.push(PairOutcome {
                model_a: name(x.model_a),
                model_b: name(x.model_b),
                verdict,
            });
        }
        let r = aesthetic_elo(&pairs).map_err(|e| Fail(Eval3dStatus::Metric, e.to_string()))?;
        if r.models.len() != n_models {
            return fail(
                Eval3dStatus::Metric,
                format!(
                    "{} of {n_models} models appear in the outcomes",
                    r.models.len()
                ),
            );
        }
        if !out_normalized.is_null() {
            slice_mut(out_normalized, n_models, "out_normalized")?.copy_from_slice(&r.normalized);
        }
        if !out_elo.is_null() {
            slice_mut(out_elo, n_models, "out_elo")?.copy_from_slice(&r.elo);
        }
        Ok(())
    })
}

/// Runs a full evaluation from a JSON run config. Relative paths resolve
/// against `base_dir` (may be null for the working directory). On success
/// `out_report` receives the report JSON, to be freed with
/// [`eval3d_string_free`].
///
/// # Safety
/// String arguments must be nul-terminated; `out_report` writable.
#[no_mangle]
pub unsafe extern "C" fn eval3d_run(
    config_json: *const c_char,
    base_dir: *const c_char,
    out_dir: *const c_char,
    stub_all: bool,
    out_report: *mut *mut c_char,
) -> Eval3dStatus {
    guard(|| {
        let text = string(config_json, "config_json")?;
        let out_dir = string(out_dir, "out_dir")?;
        let out_report = out(out_report, "out_report")?;
        let mut cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Fail(Eval3dStatus::InvalidArgument, format!("config: {e}")))?;
        if !base_dir.is_null() {
            cfg = cfg.with_base(Path::new(string(base_dir, "base_dir")?));
        }
        cfg.apply_overrides(stub_all, None, None);
        let report = run_eval(&cfg, Path::new(out_dir)).map_err(|e| {
            let status = match e {
                eval3d::pipeline::PipelineError::Io(_) => Eval3dStatus::Io,
                eval3d::pipeline::PipelineError::Mesh(..) => Eval3dStatus::Mesh,
                eval3d::pipeline::PipelineError::Config(_) => Eval3dStatus::InvalidArgument,
                _ => Eval3dStatus::Pipeline,
            };
            Fail(status, e.to_string())
        })?;
        let json = serde_json::to_string(&report)
            .map_err(|e| Fail(Eval3dStatus::Pipeline, e.to_string()))?;
        *out_report = CString::new(json).expect("JSON has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn eval3d_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
