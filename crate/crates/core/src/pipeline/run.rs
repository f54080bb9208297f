use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde_json::json;

use super::config::RunConfig;
use super::report::{MeshSummary, RunReport, Slot, Timings, REPORT_VERSION};
use super::PipelineError;
use crate::assets::{load_mesh, normalize_mesh, TriMesh};
use crate::backends::images::{load_png, save_png};
use crate::backends::tensor::{write_tensor, Tensor};
use crate::backends::{invoke, Backend, BackendKind, BackendRequest, BackendResponse};
use crate::camrig::{build_rig, subsample_rig, CameraView, RigFile};
use crate::localize::{
    export_heatmap_mesh, geo_heat_range, jet_color, sem_heat_range, semantic_outliers,
    GeoHeatAccumulator,
};
use crate::metrics::{
    aesthetic_mean, align_depth_auto, depth_to_normal, pool_views, score_view,
    semantic_from_variances, structural_consistency, text_3d_alignment, AngularMap,
    FeatureAccumulator, MetricError, MetricKind, StructView,
};
use crate::raster::export::{normals_png, shaded_png};
use crate::raster::{rasterize_with, view_visibility, RenderBuffers, ShadingNormals, NO_FACE};

/// Files written during a run, relative to the output directory.
struct Artifacts {
    root: PathBuf,
    files: Mutex<Vec<String>>,
}

impl Artifacts {
    fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            files: Mutex::new(Vec::new()),
        }
    }

    /// Absolute path for `rel`, creating its parent and recording it.
    fn path(&self, rel: &str) -> std::io::Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.files.lock().unwrap().push(rel.to_string());
        Ok(p)
    }

    fn json<T: serde::Serialize>(&self, rel: &str, value: &T) -> Result<(), PipelineError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        std::fs::write(self.path(rel)?, s)?;
        Ok(())
    }

    fn png(&self, rel: &str, img: &RgbImage) -> Result<(), String> {
        let p = self.path(rel).map_err(|e| e.to_string())?;
        save_png(img, p).map_err(|e| e.to_string())
    }

    fn tensor(&self, rel: &str, t: &Tensor) -> Result<(), String> {
        let p = self.path(rel).map_err(|e| e.to_string())?;
        write_tensor(t, p).map_err(|e| e.to_string())
    }

    fn into_list(self) -> Vec<String> {
        let mut v = self.files.into_inner().unwrap();
        v.sort();
        v.dedup();
        v
    }
}

/// Source of RGB views.
enum Rgb3 {
    Dir(PathBuf),
    Proxy,
    Missing,
}

impl Rgb3 {
    fn available(&self) -> bool {
        !matches!(self, Rgb3::Missing)
    }
}

fn rgb_file(dir: &Path, id: u32) -> Option<PathBuf> {
    [format!("view_{id}.png"), format!("view_{id:03}.png")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

fn check_rgb_dir(dir: &Path, rig: &[CameraView]) -> Result<(), PipelineError> {
    for v in rig {
        let p = rgb_file(dir, v.id).ok_or_else(|| {
            PipelineError::Config(format!("{}: no view_{}.png", dir.display(), v.id))
        })?;
        let dims = image::image_dimensions(&p)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
        if dims != (v.width, v.height) {
            return Err(PipelineError::Config(format!(
                "{}: {}×{} does not match the rig resolution {}×{}",
                p.display(),
                dims.0,
                dims.1,
                v.width,
                v.height
            )));
        }
    }
    Ok(())
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    mesh: &'a TriMesh,
    normals: ShadingNormals,
    rig: Vec<CameraView>,
    rgb: Rgb3,
    backends: BTreeMap<BackendKind, Box<dyn Backend>>,
    art: Artifacts,
}

impl Ctx<'_> {
    fn render(&self, view: &CameraView) -> RenderBuffers {
        rasterize_with(self.mesh, &self.normals, view, self.cfg.shading)
    }

    /// RGB image of a rig view, or the proxy render when allowed. `buffers`
    /// avoids re-rendering when the caller already has them.
    fn rgb(
        &self,
        view: &CameraView,
        buffers: Option<&RenderBuffers>,
    ) -> Result<Option<RgbImage>, String> {
        match &self.rgb {
            Rgb3::Dir(dir) => {
                let in_rig = self.rig.get(view.id as usize).is_some_and(|r| r == view);
                match (in_rig, rgb_file(dir, view.id)) {
                    (true, Some(p)) => load_png(&p)
                        .map(Some)
                        .map_err(|e| format!("{}: {e}", p.display())),
                    _ if self.cfg.proxy_rgb => Ok(Some(self.proxy(view, buffers))),
                    _ => Ok(None),
                }
            }
            Rgb3::Proxy => Ok(Some(self.proxy(view, buffers))),
            Rgb3::Missing => Ok(None),
        }
    }

    fn proxy(&self, view: &CameraView, buffers: Option<&RenderBuffers>) -> RgbImage {
        match buffers {
            Some(b) => shaded_png(b),
            None => shaded_png(&self.render(view)),
        }
    }

    fn backend(&self, kind: BackendKind) -> Option<&dyn Backend> {
        self.backends.get(&kind).map(|b| b.as_ref())
    }

    /// Views whose per-pixel evidence and summary images are written.
    fn evidence_view(&self, k: usize) -> bool {
        let n = self.rig.len();
        let m = self.cfg.align.n_views.max(1);
        self.cfg.evidence_all_views || !n.is_multiple_of(m) || k.is_multiple_of(n / m)
    }
}

fn failed(stage: &str, e: impl std::fmt::Display) -> Slot {
    Slot::skipped(format!("failed in stage {stage}: {e}"))
}

struct GeoView {
    inliers: usize,
    valid: usize,
    heat: Vec<Option<f64>>,
}

/// Feature samples of one view: `(vertex, features)` pairs.
type ViewSamples = Vec<(usize, Vec<f32>)>;

struct ViewOut {
    geo: Option<Result<GeoView, String>>,
    sem: Option<Result<ViewSamples, String>>,
}

/// Colors an angular-error map: jet over 0–90°, white background.
fn angular_png(map: &AngularMap) -> RgbImage {
    RgbImage::from_fn(map.width, map.height, |x, y| {
        match map.at((y * map.width + x) as usize) {
            Some(a) => Rgb(jet_color(a, 0.0, 90.0)),
            None => Rgb([255, 255, 255]),
        }
    })
}

fn geo_view(
    ctx: &Ctx,
    k: usize,
    view: &CameraView,
    b: &RenderBuffers,
    flags: &[bool],
    depth: &dyn Backend,
) -> Result<GeoView, String> {
    let image = ctx.rgb(view, Some(b))?.unwrap_or_else(|| shaded_png(b));
    let resp = invoke(
        depth,
        &BackendRequest::Depth {
            view: view.clone(),
            image,
            reference_depth: Some(b.depth.clone()),
        },
    )
    .map_err(|e| format!("view {k}: {e}"))?;
    let BackendResponse::Depth {
        depth: pred,
        convention,
    } = resp
    else {
        unreachable!("invoke checks the response kind")
    };
    let mask: Vec<bool> = b.face_id.iter().map(|&f| f != NO_FACE).collect();
    let predicted = match align_depth_auto(&pred, convention, &b.depth, &mask) {
        Ok(a) => depth_to_normal(&a.depth, view, &mask),
        // too little of the asset in view to fit; contributes nothing
        Err(MetricError::TooFewPixels { .. }) => {
            crate::raster::NormalMap::invalid(b.width, b.height)
        }
        Err(e) => return Err(format!("view {k}: {e}")),
    };
    let (map, inliers, valid) = score_view(&b.normals, &predicted, &mask, ctx.cfg.geo.delta_norm);
    if ctx.evidence_view(k) {
        let t = Tensor::f32(vec![map.height as u64, map.width as u64], map.data.clone())
            .expect("map matches its dimensions");
        ctx.art
            .tensor(&format!("evidence/geo/angular_{k:03}.etns"), &t)?;
        ctx.art
            .png(&format!("summary/geo_error_{k:03}.png"), &angular_png(&map))?;
    }
    Ok(GeoView {
        inliers,
        valid,
        heat: GeoHeatAccumulator::samples(ctx.mesh, view, &map, flags),
    })
}

fn sem_view(
    ctx: &Ctx,
    k: usize,
    view: &CameraView,
    b: &RenderBuffers,
    flags: &[bool],
    features: &dyn Backend,
) -> Result<ViewSamples, String> {
    let image = ctx.rgb(view, Some(b))?.ok_or("no RGB view")?;
    let resp = invoke(
        features,
        &BackendRequest::Features {
            view: view.clone(),
            image,
        },
    )
    .map_err(|e| format!("view {k}: {e}"))?;
    let BackendResponse::Features(map) = resp else {
        unreachable!("invoke checks the response kind")
    };
    Ok(FeatureAccumulator::samples(ctx.mesh, view, &map, flags))
}

/// Geometric and semantic consistency in one streaming pass over the rig.
fn view_pass(
    ctx: &Ctx,
    want_geo: bool,
    want_sem: bool,
    slots: &mut BTreeMap<MetricKind, Slot>,
) -> Result<(), PipelineError> {
    let n_vert = ctx.mesh.vertex_count();
    let mut geo_err: Option<String> = None;
    let mut sem_err: Option<String> = None;
    let (mut inliers, mut valid) = (Vec::new(), Vec::new());
    let mut heat = GeoHeatAccumulator::new(n_vert);
    let mut feats: Option<FeatureAccumulator> = None;
    let depth = ctx.backend(BackendKind::Depth);
    let features = ctx.backend(BackendKind::Features);
    let chunk = rayon::current_num_threads().max(1) * 2;

    let indices: Vec<usize> = (0..ctx.rig.len()).collect();
    for block in indices.chunks(chunk) {
        let outs: Vec<ViewOut> = block
            .par_iter()
            .map(|&k| {
                let view = &ctx.rig[k];
                let b = ctx.render(view);
                let flags = view_visibility(ctx.mesh, view, &b);
                if ctx.evidence_view(k) {
                    if let Err(e) = ctx
                        .art
                        .png(&format!("summary/normals_{k:03}.png"), &normals_png(&b))
                    {
                        log::warn!("summary image for view {k}: {e}");
                    }
                }
                ViewOut {
                    geo: (want_geo).then(|| geo_view(ctx, k, view, &b, &flags, depth.unwrap())),
                    sem: (want_sem).then(|| sem_view(ctx, k, view, &b, &flags, features.unwrap())),
                }
            })
            .collect();
        for out in outs {
            match out.geo {
                Some(Ok(g)) if geo_err.is_none() => {
                    inliers.push(g.inliers);
                    valid.push(g.valid);
                    heat.add_samples(&g.heat);
                }
                Some(Err(e)) if geo_err.is_none() => geo_err = Some(e),
                _ => {}
            }
            match out.sem {
                Some(Ok(s)) if sem_err.is_none() => {
                    let acc = feats.get_or_insert_with(|| {
                        FeatureAccumulator::new(n_vert, s.first().map_or(0, |x| x.1.len()))
                    });
                    if acc.channels() == 0 {
                        if let Some(first) = s.first() {
                            *acc = FeatureAccumulator::new(n_vert, first.1.len());
                        }
                    }
                    if let Err(e) = acc.add_samples(&s) {
                        sem_err = Some(e.to_string());
                    }
                }
                Some(Err(e)) if sem_err.is_none() => sem_err = Some(e),
                _ => {}
            }
        }
    }

    let min_vis = ctx.cfg.sem.min_visibility;
    if want_geo {
        let slot = match geo_err {
            Some(e) => failed("geo", e),
            None => match pool_views(&inliers, &valid, ctx.cfg.geo.pooling) {
                Err(e) => failed("geo", e),
                Ok(value) => {
                    let mut details = json!({
                        "delta_norm": ctx.cfg.geo.delta_norm,
                        "pooling": ctx.cfg.geo.pooling,
                        "inliers": inliers.iter().sum::<usize>(),
                        "valid_pixels": valid.iter().sum::<usize>(),
                        "per_view_inliers": inliers,
                        "per_view_valid": valid,
                    });
                    if ctx.cfg.localize.enabled {
                        let h = heat.finish(min_vis);
                        let range = ctx
                            .cfg
                            .localize
                            .geo_range
                            .unwrap_or(geo_heat_range(ctx.cfg.geo.delta_norm));
                        for (name, values) in [("mean", &h.mean), ("max", &h.max)] {
                            let rel = format!("heat/geo_{name}.ply");
                            export_heatmap_mesh(ctx.mesh, values, range, ctx.art.path(&rel)?)
                                .map_err(|e| {
                                    PipelineError::Stage("localize".into(), e.to_string())
                                })?;
                        }
                        let covered: Vec<f64> = h.mean.iter().flatten().copied().collect();
                        details["heat"] = json!({
                            "range": [range.0, range.1],
                            "vertices_with_data": covered.len(),
                            "max_mean_distance": covered.iter().copied().fold(0.0, f64::max),
                        });
                    }
                    Slot::Ok { value, details }
                }
            },
        };
        slots.insert(MetricKind::Geometric, slot);
    }
    if want_sem {
        let slot = match (sem_err, feats) {
            (Some(e), _) => failed("sem", e),
            (None, None) => failed("sem", MetricError::NoVertices(min_vis)),
            (None, Some(acc)) => {
                let variances = acc.variances(min_vis);
                let delta = ctx.cfg.sem.delta_dino;
                match semantic_from_variances(variances, delta) {
                    Err(MetricError::NoVertices(_)) => {
                        failed("sem", MetricError::NoVertices(min_vis))
                    }
                    Err(e) => failed("sem", e),
                    Ok(score) => {
                        let v = &score.evidence.variances;
                        let t = Tensor::f32(
                            vec![v.len() as u64],
                            v.iter().map(|x| x.map_or(-1.0, |x| x as f32)).collect(),
                        )
                        .expect("one entry per vertex");
                        ctx.art
                            .tensor("evidence/sem/variances.etns", &t)
                            .map_err(|e| PipelineError::Stage("sem".into(), e))?;
                        let outliers = semantic_outliers(v, delta).iter().filter(|&&o| o).count();
                        let mut details = json!({
                            "delta_dino": delta,
                            "min_visibility": min_vis,
                            "included_vertices": v.iter().flatten().count(),
                            "outlier_vertices": outliers,
                        });
                        if ctx.cfg.localize.enabled {
                            let range = ctx.cfg.localize.sem_range.unwrap_or(sem_heat_range(delta));
                            export_heatmap_mesh(ctx.mesh, v, range, ctx.art.path("heat/sem.ply")?)
                                .map_err(|e| {
                                    PipelineError::Stage("localize".into(), e.to_string())
                                })?;
                            details["heat_range"] = json!([range.0, range.1]);
                        }
                        Slot::Ok {
                            value: score.value,
                            details,
                        }
                    }
                }
            }
        };
        slots.insert(MetricKind::Semantic, slot);
    }
    Ok(())
}

/// RGB images for a set of views, rendered in parallel.
fn images_for(ctx: &Ctx, views: &[CameraView]) -> Result<Vec<RgbImage>, String> {
    views
        .par_iter()
        .map(|v| {
            ctx.rgb(v, None)?
                .ok_or_else(|| format!("no RGB view for view {}", v.id))
        })
        .collect()
}

fn struct_stage(ctx: &Ctx) -> Slot {
    let (Some(nvs), Some(perc)) = (
        ctx.backend(BackendKind::Nvs),
        ctx.backend(BackendKind::Perceptual),
    ) else {
        return Slot::skipped("no nvs or perceptual backend");
    };
    let sc = &ctx.cfg.structural;
    let elevation = sc.elevation.unwrap_or(ctx.cfg.rig.elevation);
    let mut views = Vec::new();
    for (i, az) in sc.required_azimuths().into_iter().enumerate() {
        let in_rig = ctx.rig.iter().find(|v| {
            (v.azimuth - az).rem_euclid(360.0) < 1e-6 && (v.elevation - elevation).abs() < 1e-9
        });
        let view = match in_rig {
            Some(v) => v.clone(),
            None => match CameraView::from_spec(1000 + i as u32, az, elevation, &ctx.cfg.rig) {
                Ok(v) => v,
                Err(e) => return failed("struct", e),
            },
        };
        views.push(view);
    }
    let images = match images_for(ctx, &views) {
        Ok(i) => i,
        Err(e) => return Slot::skipped(e),
    };
    let sv: Vec<StructView> = views
        .into_iter()
        .zip(images)
        .map(|(view, image)| StructView { view, image })
        .collect();
    match structural_consistency(&sv, nvs, perc, sc) {
        Ok(s) => Slot::Ok {
            value: s.value,
            details: serde_json::to_value(&s.evidence).expect("evidence serializes"),
        },
        Err(e) => failed("struct", e),
    }
}

fn align_stage(ctx: &Ctx) -> Slot {
    let (Some(qagen), Some(vqa)) = (
        ctx.backend(BackendKind::Qagen),
        ctx.backend(BackendKind::Vqa),
    ) else {
        return Slot::skipped("no qagen or vqa backend");
    };
    let subset = match subsample_rig(&ctx.rig, ctx.cfg.align.n_views) {
        Ok(s) => s,
        Err(e) => return failed("align", e),
    };
    let images = match images_for(ctx, &subset) {
        Ok(i) => i,
        Err(e) => return Slot::skipped(e),
    };
    let qa = match invoke(
        qagen,
        &BackendRequest::Qagen {
            prompt: ctx.cfg.prompt.clone(),
        },
    ) {
        Ok(BackendResponse::Qagen(q)) => q,
        Ok(_) => unreachable!("invoke checks the response kind"),
        Err(e) => return failed("align", e),
    };
    let jobs: Vec<(usize, usize)> = (0..qa.len())
        .flat_map(|j| (0..subset.len()).map(move |i| (j, i)))
        .collect();
    let answers: Result<Vec<String>, crate::backends::BackendError> = jobs
        .par_iter()
        .map(|&(j, i)| {
            let req = BackendRequest::Vqa {
                view: subset[i].clone(),
                image: images[i].clone(),
                question: qa[j].question.clone(),
                choices: qa[j].choices.clone(),
            };
            match invoke(vqa, &req)? {
                BackendResponse::Vqa(a) => Ok(a),
                _ => unreachable!("invoke checks the response kind"),
            }
        })
        .collect();
    let answers = match answers {
        Ok(a) => a,
        Err(e) => return failed("align", e),
    };
    let matrix: Vec<Vec<Option<String>>> = answers
        .chunks(subset.len().max(1))
        .map(|row| row.iter().cloned().map(Some).collect())
        .collect();
    match text_3d_alignment(&qa, &matrix, &ctx.cfg.align) {
        Ok(s) => Slot::Ok {
            value: s.value,
            details: json!({
                "questions": qa,
                "view_ids": subset.iter().map(|v| v.id).collect::<Vec<_>>(),
                "correct": s.evidence.correct,
                "passed": s.evidence.passed,
            }),
        },
        Err(e) => failed("align", e),
    }
}

fn aes_stage(ctx: &Ctx) -> Slot {
    let Some(aes) = ctx.backend(BackendKind::Aesthetic) else {
        return Slot::skipped("no aesthetic backend");
    };
    let subset = match subsample_rig(&ctx.rig, ctx.cfg.aes.n_views) {
        Ok(s) => s,
        Err(e) => return failed("aes", e),
    };
    let images = match images_for(ctx, &subset) {
        Ok(i) => i,
        Err(e) => return Slot::skipped(e),
    };
    let raw: Result<Vec<f64>, crate::backends::BackendError> = subset
        .par_iter()
        .zip(images.into_par_iter())
        .map(|(v, image)| {
            match invoke(
                aes,
                &BackendRequest::Aesthetic {
                    view: v.clone(),
                    image,
                    prompt: ctx.cfg.prompt.clone(),
                },
            )? {
                BackendResponse::Aesthetic(s) => Ok(s),
                _ => unreachable!("invoke checks the response kind"),
            }
        })
        .collect();
    let raw = match raw {
        Ok(r) => r,
        Err(e) => return failed("aes", e),
    };
    match aesthetic_mean(&raw, &ctx.cfg.aes.calibration) {
        Ok(s) => Slot::Ok {
            value: s.value,
            details: json!({
                "raw": s.evidence,
                "calibration": ctx.cfg.aes.calibration,
                "view_ids": subset.iter().map(|v| v.id).collect::<Vec<_>>(),
            }),
        },
        Err(e) => failed("aes", e),
    }
}

/// Runs every requested metric and writes `report.json` plus evidence into
/// `out_dir`. Metric failures become skipped slots; only setup problems
/// (config, mesh, output directory) are returned as errors.
pub fn run_eval(cfg: &RunConfig, out_dir: &Path) -> Result<RunReport, PipelineError> {
    let start = Instant::now();
    let mut timings = Timings::default();
    let mut lap = Instant::now();
    let mut stage = |name: &str, timings: &mut Timings| {
        timings
            .stages
            .insert(name.to_string(), lap.elapsed().as_secs_f64());
        lap = Instant::now();
    };

    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mesh_path = cfg.resolve(&cfg.mesh);
    let mesh = normalize_mesh(
        load_mesh(&mesh_path)
            .map_err(|e| PipelineError::Mesh(mesh_path.display().to_string(), e))?,
    )
    .map_err(|e| PipelineError::Mesh(mesh_path.display().to_string(), e))?;
    let rig = build_rig(&cfg.rig).map_err(|e| PipelineError::Config(e.to_string()))?;
    let rgb = match &cfg.rgb_dir {
        Some(d) => {
            let dir = cfg.resolve(d);
            check_rgb_dir(&dir, &rig)?;
            Rgb3::Dir(dir)
        }
        None if cfg.proxy_rgb => Rgb3::Proxy,
        None => Rgb3::Missing,
    };
    let jobs = out_dir.join("jobs");
    let backends: BTreeMap<BackendKind, Box<dyn Backend>> = cfg
        .backends
        .iter()
        .map(|(k, spec)| (*k, spec.build(*k, &cfg.prompt, &jobs)))
        .collect();
    let ctx = Ctx {
        cfg,
        mesh: &mesh,
        normals: ShadingNormals::of(&mesh),
        rig,
        rgb,
        backends,
        art: Artifacts::new(out_dir),
    };
    ctx.art.json("rig.json", &RigFile::from_rig(&ctx.rig))?;
    if let Ok(Some(img)) = ctx.rgb(&ctx.rig[0], None) {
        ctx.art
            .png("summary/canonical_rgb.png", &img)
            .map_err(|e| PipelineError::Stage("summary".into(), e))?;
    }
    stage("setup", &mut timings);

    let wanted = |m: MetricKind| cfg.metrics.contains(&m);
    let mut slots: BTreeMap<MetricKind, Slot> = MetricKind::ALL
        .into_iter()
        .map(|m| (m, Slot::skipped("not requested")))
        .collect();
    let rgb_ok = ctx.rgb.available();

    let mut want_geo = false;
    if wanted(MetricKind::Geometric) {
        if ctx.backend(BackendKind::Depth).is_some() {
            want_geo = true;
        } else {
            slots.insert(MetricKind::Geometric, Slot::skipped("no depth backend"));
        }
    }
    let mut want_sem = false;
    if wanted(MetricKind::Semantic) {
        if ctx.backend(BackendKind::Features).is_none() {
            slots.insert(MetricKind::Semantic, Slot::skipped("no features backend"));
        } else if !rgb_ok {
            slots.insert(MetricKind::Semantic, Slot::skipped("no RGB views"));
        } else {
            want_sem = true;
        }
    }
    if want_geo || want_sem {
        view_pass(&ctx, want_geo, want_sem, &mut slots)?;
        stage("views", &mut timings);
    }
    for (metric, run) in [
        (MetricKind::Structural, struct_stage as fn(&Ctx) -> Slot),
        (MetricKind::Alignment, align_stage),
        (MetricKind::Aesthetic, aes_stage),
    ] {
        if !wanted(metric) {
            continue;
        }
        let slot = if rgb_ok {
            run(&ctx)
        } else {
            Slot::skipped("no RGB views")
        };
        slots.insert(metric, slot);
        stage(metric.name(), &mut timings);
    }

    let backends_used = ctx
        .backends
        .iter()
        .map(|(k, b)| (k.name().to_string(), b.identity()))
        .collect();
    ctx.art.path("report.json")?;
    let mut report = RunReport {
        version: REPORT_VERSION,
        prompt: cfg.prompt.clone(),
        mesh: MeshSummary {
            path: cfg.mesh.display().to_string(),
            vertices: mesh.vertex_count(),
            faces: mesh.face_count(),
        },
        config: cfg.clone(),
        metrics: slots,
        backends: backends_used,
        artifacts: ctx.art.into_list(),
        timings,
    };
    report.timings.total_s = start.elapsed().as_secs_f64();
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    std::fs::write(out_dir.join("report.json"), s)?;
    Ok(report)
}
