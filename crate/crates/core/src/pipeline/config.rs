use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::backends::process::{timeout_from_env, ProcessBackend, ProcessSpec};
use crate::backends::stubs::{build_stub, StubOptions};
use crate::backends::{Backend, BackendKind};
use crate::camrig::RigSpec;
use crate::metrics::{
    AestheticCalibration, AlignConfig, GeoConfig, MetricKind, SemConfig, StructConfig,
};
use crate::raster::Shading;

/// Where a backend kind is served from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// In-process deterministic stub.
    Stub(StubOptions),
    /// Sidecar executable; the job directory is appended as its last argument.
    Command(Vec<String>),
}

impl BackendSpec {
    pub fn build(&self, kind: BackendKind, prompt: &str, jobs_dir: &Path) -> Box<dyn Backend> {
        match self {
            BackendSpec::Stub(opts) => build_stub(kind, opts, prompt),
            BackendSpec::Command(cmd) => Box::new(ProcessBackend::new(
                kind,
                ProcessSpec {
                    command: cmd.clone(),
                    workdir: jobs_dir.to_path_buf(),
                    timeout: timeout_from_env(),
                },
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AesConfig {
    pub calibration: AestheticCalibration,
    /// Number of evenly spaced views scored; must divide the rig size.
    pub n_views: usize,
}

impl Default for AesConfig {
    fn default() -> Self {
        Self {
            calibration: AestheticCalibration::default(),
            n_views: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    pub enabled: bool,
    /// Geometric heat range; defaults from the inlier threshold.
    pub geo_range: Option<(f64, f64)>,
    /// Semantic heat range; defaults from the variance threshold.
    pub sem_range: Option<(f64, f64)>,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            geo_range: None,
            sem_range: None,
        }
    }
}

/// Everything a single evaluation needs. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: PathBuf,
    /// Directory of `view_<id>.png` RGB renders matching the rig.
    pub rgb_dir: Option<PathBuf>,
    pub prompt: String,
    pub rig: RigSpec,
    pub shading: Shading,
    pub metrics: Vec<MetricKind>,
    pub geo: GeoConfig,
    pub sem: SemConfig,
    #[serde(rename = "struct")]
    pub structural: StructConfig,
    pub align: AlignConfig,
    pub aes: AesConfig,
    pub localize: LocalizeConfig,
    pub backends: BTreeMap<BackendKind, BackendSpec>,
    /// Stand in grey shaded renders for missing RGB views.
    pub proxy_rgb: bool,
    /// Write angular-error tensors for every rig view, not only the
    /// alignment subset.
    pub evidence_all_views: bool,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    #[serde(skip)]
    pub base: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: PathBuf::new(),
            rgb_dir: None,
            prompt: String::new(),
            rig: RigSpec::default(),
            shading: Shading::Smooth,
            metrics: MetricKind::ALL.to_vec(),
            geo: GeoConfig::default(),
            sem: SemConfig::default(),
            structural: StructConfig::default(),
            align: AlignConfig::default(),
            aes: AesConfig::default(),
            localize: LocalizeConfig::default(),
            backends: BTreeMap::new(),
            proxy_rgb: false,
            evidence_all_views: false,
            out_dir: None,
            seed: 0,
            base: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg.with_base(path.parent().unwrap_or(Path::new("."))))
    }

    /// Base directory against which relative paths resolve. Kept separate
    /// from the stored paths so the config echo is location independent.
    pub fn with_base(mut self, base: &Path) -> Self {
        self.base = Some(base.to_path_buf());
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Applies command-line overrides. `stub_all` fills every unconfigured
    /// backend with its default stub and enables proxy RGB.
    pub fn apply_overrides(
        &mut self,
        stub_all: bool,
        views: Option<usize>,
        metrics: Option<Vec<MetricKind>>,
    ) {
        if stub_all {
            for kind in BackendKind::ALL {
                if kind != BackendKind::Judge {
                    self.backends
                        .entry(kind)
                        .or_insert_with(|| BackendSpec::Stub(StubOptions::default()));
                }
            }
            self.proxy_rgb = true;
        }
        if let Some(n) = views {
            self.rig.n_views = n;
        }
        if let Some(m) = metrics {
            self.metrics = m;
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.mesh.as_os_str().is_empty() {
            return bad("no mesh path".into());
        }
        self.rig
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.metrics.contains(&MetricKind::Geometric) {
            self.geo
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if self.metrics.contains(&MetricKind::Semantic) {
            self.sem
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if self.metrics.contains(&MetricKind::Structural) {
            self.structural
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if self.metrics.contains(&MetricKind::Alignment) {
            self.align
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            if !self.rig.n_views.is_multiple_of(self.align.n_views) {
                return bad(format!(
                    "align.n_views {} does not divide the rig size {}",
                    self.align.n_views, self.rig.n_views
                ));
            }
        }
        if self.metrics.contains(&MetricKind::Aesthetic)
            && (self.aes.n_views == 0 || !self.rig.n_views.is_multiple_of(self.aes.n_views))
        {
            return bad(format!(
                "aes.n_views {} does not divide the rig size {}",
                self.aes.n_views, self.rig.n_views
            ));
        }
        Ok(())
    }
}
