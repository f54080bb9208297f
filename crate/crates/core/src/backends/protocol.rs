//! Job-directory protocol.
//!
//! ```text
//! job-<uuid>/
//!   request.json     written by the engine
//!   inputs/          PNG images and ETNS tensors referenced by request.json
//!   outputs/         ETNS tensors written by the backend
//!   response.json    written by the backend
//!   stderr.log       backend stderr, captured by the engine
//! ```
//!
//! All paths inside the JSON documents are relative to the job directory.
//! The field-by-field schema is documented in `docs/protocol.md`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::images::{image_to_tensor, load_png, save_png, tensor_to_image};
use super::tensor::{read_tensor, write_tensor, Tensor};
use super::{
    BackendError, BackendKind, BackendRequest, BackendResponse, DepthConvention, FeatureMap,
    JudgeVerdict, QAItem,
};
use crate::camrig::{relative_pose, CameraRecord};
use crate::raster::DepthMap;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestFile {
    pub protocol_version: u32,
    pub kind: BackendKind,
    pub inputs: BTreeMap<String, String>,
    pub params: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseFile {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub values: Value,
    /// Adapter provenance, echoed into run reports when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<Value>,
}

fn depth_to_tensor(d: &DepthMap) -> Tensor {
    Tensor::f32(vec![d.height as u64, d.width as u64], d.data.clone())
        .expect("depth map matches its dimensions")
}

fn tensor_to_depth(t: &Tensor) -> Result<DepthMap, BackendError> {
    match (t.dims.as_slice(), t.as_f32()) {
        (&[h, w], Some(data)) => Ok(DepthMap {
            width: w as u32,
            height: h as u32,
            data: data.to_vec(),
        }),
        _ => Err(BackendError::Contract(format!(
            "shape contract violated: expected H×W f32 depth, got {:?}",
            t.dims
        ))),
    }
}

fn tensor_to_features(t: &Tensor) -> Result<FeatureMap, BackendError> {
    match (t.dims.as_slice(), t.as_f32()) {
        (&[c, h, w], Some(data)) if h == w => Ok(FeatureMap {
            channels: c as usize,
            size: h as usize,
            data: data.to_vec(),
        }),
        _ => Err(BackendError::Contract(format!(
            "shape contract violated: expected C×256×256, got {:?}",
            t.dims
        ))),
    }
}

fn features_to_tensor(f: &FeatureMap) -> Tensor {
    Tensor::f32(
        vec![f.channels as u64, f.size as u64, f.size as u64],
        f.data.clone(),
    )
    .expect("feature map matches its dimensions")
}

fn param<T: serde::de::DeserializeOwned>(params: &Value, key: &str) -> Result<T, BackendError> {
    let v = params
        .get(key)
        .ok_or_else(|| BackendError::MissingInput(format!("params.{key}")))?;
    Ok(serde_json::from_value(v.clone())?)
}

/// Writes `request.json` and its inputs into `dir` (which must exist).
pub fn write_request(dir: &Path, req: &BackendRequest) -> Result<(), BackendError> {
    let inputs_dir = dir.join("inputs");
    std::fs::create_dir_all(&inputs_dir)?;
    std::fs::create_dir_all(dir.join("outputs"))?;
    let mut inputs = BTreeMap::new();
    let mut png = |name: &str, img: &super::RgbImage| -> Result<(), BackendError> {
        let rel = format!("inputs/{name}.png");
        save_png(img, dir.join(&rel))?;
        inputs.insert(name.to_string(), rel);
        Ok(())
    };
    let params = match req {
        BackendRequest::Depth {
            view,
            image,
            reference_depth,
        } => {
            png("image", image)?;
            if let Some(d) = reference_depth {
                let rel = "inputs/reference_depth.etns".to_string();
                write_tensor(&depth_to_tensor(d), dir.join(&rel))?;
                inputs.insert("reference_depth".into(), rel);
            }
            json!({ "view": CameraRecord::from(view) })
        }
        BackendRequest::Features { view, image } => {
            png("image", image)?;
            json!({ "view": CameraRecord::from(view), "feature_size": super::FEATURE_SIZE })
        }
        BackendRequest::Nvs {
            source_view,
            target_view,
            source,
            reference,
        } => {
            png("source", source)?;
            if let Some(r) = reference {
                png("reference", r)?;
            }
            let (da, de, dr) = relative_pose(source_view, target_view);
            json!({
                "source_view": CameraRecord::from(source_view),
                "target_view": CameraRecord::from(target_view),
                "relative_pose": { "d_azimuth": da, "d_elevation": de, "d_radius": dr },
            })
        }
        BackendRequest::Perceptual { a, b } => {
            png("a", a)?;
            png("b", b)?;
            json!({})
        }
        BackendRequest::Qagen { prompt } => json!({ "prompt": prompt }),
        BackendRequest::Vqa {
            view,
            image,
            question,
            choices,
        } => {
            png("image", image)?;
            json!({ "view": CameraRecord::from(view), "question": question, "choices": choices })
        }
        BackendRequest::Aesthetic {
            view,
            image,
            prompt,
        } => {
            png("image", image)?;
            json!({ "view": CameraRecord::from(view), "prompt": prompt })
        }
        BackendRequest::Judge {
            prompt,
            model_a,
            model_b,
            image_a,
            image_b,
        } => {
            png("image_a", image_a)?;
            png("image_b", image_b)?;
            json!({ "prompt": prompt, "model_a": model_a, "model_b": model_b })
        }
    };
    let file = RequestFile {
        protocol_version: PROTOCOL_VERSION,
        kind: req.kind(),
        inputs,
        params,
    };
    std::fs::write(dir.join("request.json"), serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

/// Parses `request.json` and loads the referenced inputs.
pub fn read_request(dir: &Path) -> Result<BackendRequest, BackendError> {
    let file: RequestFile = serde_json::from_slice(&std::fs::read(dir.join("request.json"))?)?;
    if file.protocol_version != PROTOCOL_VERSION {
        return Err(BackendError::Contract(format!(
            "unsupported protocol version {}",
            file.protocol_version
        )));
    }
    let input = |name: &str| {
        file.inputs
            .get(name)
            .map(|rel| dir.join(rel))
            .ok_or_else(|| BackendError::MissingInput(name.to_string()))
    };
    let image =
        |name: &str| -> Result<super::RgbImage, BackendError> { Ok(load_png(input(name)?)?) };
    let view = |key: &str| -> Result<crate::camrig::CameraView, BackendError> {
        let rec: CameraRecord = param(&file.params, key)?;
        rec.to_view()
            .map_err(|e| BackendError::Contract(format!("bad camera {key}: {e}")))
    };
    let p = &file.params;
    Ok(match file.kind {
        BackendKind::Depth => BackendRequest::Depth {
            view: view("view")?,
            image: image("image")?,
            reference_depth: match file.inputs.get("reference_depth") {
                Some(rel) => Some(tensor_to_depth(&read_tensor(dir.join(rel))?)?),
                None => None,
            },
        },
        BackendKind::Features => BackendRequest::Features {
            view: view("view")?,
            image: image("image")?,
        },
        BackendKind::Nvs => BackendRequest::Nvs {
            source_view: view("source_view")?,
            target_view: view("target_view")?,
            source: image("source")?,
            reference: match file.inputs.contains_key("reference") {
                true => Some(image("reference")?),
                false => None,
            },
        },
        BackendKind::Perceptual => BackendRequest::Perceptual {
            a: image("a")?,
            b: image("b")?,
        },
        BackendKind::Qagen => BackendRequest::Qagen {
            prompt: param(p, "prompt")?,
        },
        BackendKind::Vqa => BackendRequest::Vqa {
            view: view("view")?,
            image: image("image")?,
            question: param(p, "question")?,
            choices: param(p, "choices")?,
        },
        BackendKind::Aesthetic => BackendRequest::Aesthetic {
            view: view("view")?,
            image: image("image")?,
            prompt: param(p, "prompt")?,
        },
        BackendKind::Judge => BackendRequest::Judge {
            prompt: param(p, "prompt")?,
            model_a: param(p, "model_a")?,
            model_b: param(p, "model_b")?,
            image_a: image("image_a")?,
            image_b: image("image_b")?,
        },
    })
}

/// Writes `response.json` (and output tensors) for a finished job.
pub fn write_response(
    dir: &Path,
    result: &Result<BackendResponse, BackendError>,
    manifest: Option<Value>,
) -> Result<(), BackendError> {
    std::fs::create_dir_all(dir.join("outputs"))?;
    let mut outputs = BTreeMap::new();
    let mut tensor = |name: &str, t: &Tensor| -> Result<(), BackendError> {
        let rel = format!("outputs/{name}.etns");
        write_tensor(t, dir.join(&rel))?;
        outputs.insert(name.to_string(), rel);
        Ok(())
    };
    let file = match result {
        Err(e) => ResponseFile {
            status: Status::Error,
            message: Some(e.to_string()),
            outputs: BTreeMap::new(),
            values: json!({}),
            manifest,
        },
        Ok(resp) => {
            let values = match resp {
                BackendResponse::Depth { depth, convention } => {
                    tensor("depth", &depth_to_tensor(depth))?;
                    json!({ "depth_convention": convention })
                }
                BackendResponse::Features(f) => {
                    tensor("features", &features_to_tensor(f))?;
                    json!({ "channels": f.channels })
                }
                BackendResponse::Nvs(img) => {
                    tensor("image", &image_to_tensor(img))?;
                    json!({})
                }
                BackendResponse::Perceptual(d) => json!({ "distance": d }),
                BackendResponse::Qagen(items) => json!({ "items": items }),
                BackendResponse::Vqa(a) => json!({ "answer": a }),
                BackendResponse::Aesthetic(s) => json!({ "score": s }),
                BackendResponse::Judge(v) => json!({ "winner": v }),
            };
            ResponseFile {
                status: Status::Ok,
                message: None,
                outputs,
                values,
                manifest,
            }
        }
    };
    std::fs::write(dir.join("response.json"), serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

/// Parses `response.json` for a request of `kind`.
pub fn read_response(
    dir: &Path,
    kind: BackendKind,
) -> Result<(BackendResponse, Option<Value>), BackendError> {
    let path = dir.join("response.json");
    if !path.exists() {
        return Err(BackendError::MissingOutput("response.json".into()));
    }
    let file: ResponseFile = serde_json::from_slice(&std::fs::read(path)?)?;
    if file.status == Status::Error {
        return Err(BackendError::Remote(
            file.message.unwrap_or_else(|| "unspecified error".into()),
        ));
    }
    let output = |name: &str| -> Result<Tensor, BackendError> {
        let rel = file
            .outputs
            .get(name)
            .ok_or_else(|| BackendError::MissingOutput(name.to_string()))?;
        let full = dir.join(rel);
        if !full.exists() {
            return Err(BackendError::MissingOutput(rel.clone()));
        }
        Ok(read_tensor(full)?)
    };
    let v = &file.values;
    let missing = |k: &str| BackendError::MissingOutput(format!("values.{k}"));
    let resp = match kind {
        BackendKind::Depth => BackendResponse::Depth {
            depth: tensor_to_depth(&output("depth")?)?,
            convention: match v.get("depth_convention") {
                Some(c) => serde_json::from_value(c.clone())?,
                None => DepthConvention::Depth,
            },
        },
        BackendKind::Features => {
            let f = tensor_to_features(&output("features")?)?;
            if let Some(c) = v.get("channels").and_then(Value::as_u64) {
                if c as usize != f.channels {
                    return Err(BackendError::Contract(format!(
                        "declared {c} channels but tensor has {}",
                        f.channels
                    )));
                }
            }
            BackendResponse::Features(f)
        }
        BackendKind::Nvs => BackendResponse::Nvs(
            tensor_to_image(&output("image")?)
                .map_err(|e| BackendError::Contract(format!("shape contract violated: {e}")))?,
        ),
        BackendKind::Perceptual => BackendResponse::Perceptual(
            v.get("distance")
                .and_then(Value::as_f64)
                .ok_or_else(|| missing("distance"))?,
        ),
        BackendKind::Qagen => {
            let items: Vec<QAItem> =
                serde_json::from_value(v.get("items").cloned().ok_or_else(|| missing("items"))?)?;
            BackendResponse::Qagen(items)
        }
        BackendKind::Vqa => BackendResponse::Vqa(
            v.get("answer")
                .and_then(Value::as_str)
                .ok_or_else(|| missing("answer"))?
                .to_string(),
        ),
        BackendKind::Aesthetic => BackendResponse::Aesthetic(
            v.get("score")
                .and_then(Value::as_f64)
                .ok_or_else(|| missing("score"))?,
        ),
        BackendKind::Judge => {
            let w: JudgeVerdict =
                serde_json::from_value(v.get("winner").cloned().ok_or_else(|| missing("winner"))?)?;
            BackendResponse::Judge(w)
        }
    };
    Ok((resp, file.manifest))
}

/// Backend side of the protocol: reads the job, answers it with `backend`,
/// writes the response. Returns the process exit code to use.
pub fn serve_job(dir: &Path, backend: &dyn super::Backend) -> i32 {
    let result = read_request(dir).and_then(|req| super::invoke(backend, &req));
    let manifest = json!({ "backend": backend.identity() });
    let code = if result.is_ok() { 0 } else { 1 };
    if let Err(e) = write_response(dir, &result, Some(manifest)) {
        eprintln!("failed to write response: {e}");
        return 1;
    }
    if let Err(e) = &result {
        eprintln!("{e}");
    }
    code
}
