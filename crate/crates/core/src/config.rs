//! Run configuration: one JSON document layered over a named preset.
//!
//! A user document is deep-merged into the preset's serialised defaults; any
//! key the preset does not define is rejected with its dotted path. Seeds of
//! individual stages are derived from the global seed at resolution time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::BenchConfig;
use crate::classify::{ClassifierConfig, ClassifierKind, PatchSource};
use crate::denoiser::{DiscriminatorConfig, GeneratorConfig, TrainConfig};
use crate::qecmodel::{CoherenceParams, TimingParams};
use crate::simcam::{LabelSource, LatticeGeometry, OpticsConfig, DEFAULT_MAX_FRAME_PX};
use crate::{seed, Error, Result};

/// Environment variables that may replace path fields (and nothing else).
pub const ENV_DATA_DIR: &str = "READOUT_DATA_DIR";
pub const ENV_CHECKPOINT_DIR: &str = "READOUT_CHECKPOINT_DIR";
pub const ENV_REPORT_DIR: &str = "READOUT_REPORT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[serde(rename = "desk-5um")]
    Desk5um,
    #[serde(rename = "desk-9um")]
    Desk9um,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk5um => "desk-5um",
            Preset::Desk9um => "desk-9um",
            Preset::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Preset::Desk5um, Preset::Desk9um, Preset::Custom]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("preset", format!("unknown preset {s:?}")))
    }
}

/// Artifact directories; relative paths resolve against the output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            checkpoint_dir: "checkpoints".into(),
            report_dir: "reports".into(),
        }
    }
}

impl Paths {
    pub fn resolve(&self, root: &Path) -> Paths {
        let join = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                root.join(p)
            }
        };
        Paths {
            data_dir: join(&self.data_dir),
            checkpoint_dir: join(&self.checkpoint_dir),
            report_dir: join(&self.report_dir),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Long-path exposures; the short path sees `duration * attenuation`.
    pub durations_ms: Vec<f64>,
    pub shots_per_duration: usize,
    pub p_bright: f64,
    pub label_source: LabelSource,
}

/// One (classifier, input) combination evaluated by the duration sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kind: ClassifierKind,
    pub source: PatchSource,
}

impl MethodSpec {
    pub const fn new(kind: ClassifierKind, source: PatchSource) -> Self {
        Self { kind, source }
    }

    /// `kind/source`, e.g. `fnn/denoised`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.kind.name(), self.source.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub methods: Vec<MethodSpec>,
    /// Method whose infidelity is the denominator of the reported reduction.
    pub baseline: MethodSpec,
    /// Method whose infidelity feeds the QEC sweep as `p_meas`.
    pub qec_method: MethodSpec,
    /// Denoiser inference batch size.
    pub denoise_batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostSelectConfig {
    pub taus: Vec<f64>,
    pub method: MethodSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchConfig {
    /// Target lattices as `[rows, cols]`.
    pub grids: Vec<[usize; 2]>,
    pub frames_per_grid: usize,
    pub max_frame_px: usize,
    /// Source duration; `None` picks the shortest.
    pub duration_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QecConfig {
    pub distances: Vec<usize>,
    pub rounds: usize,
    pub shots: usize,
    pub coherence: CoherenceParams,
    /// Idle time per round on top of the short-path exposure, in seconds.
    pub overhead_s: f64,
    pub p_meas_model: PMeasModel,
    /// Duration samples for the `fit` model, spread evenly over the swept range.
    pub grid_points: usize,
    pub timing: TimingParams,
}

/// How the measurement error per duration is taken from the sweep report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMeasModel {
    /// The measured infidelities as they are.
    Measured,
    /// An `a*exp(-b*t) + c` least-squares fit, sampled on an even grid.
    /// Falls back to the measured points when fewer than three exist.
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub batch_sizes: Vec<usize>,
    pub instances: Vec<usize>,
    pub parallel_batch: usize,
    pub scaling_grids: Vec<[usize; 2]>,
    pub scaling_frames: usize,
    pub run: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub paths: Paths,
    pub geometry: LatticeGeometry,
    pub optics: OpticsConfig,
    pub data: DataConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TrainConfig,
    pub classifier: ClassifierConfig,
    pub sweep: SweepConfig,
    pub postselect: PostSelectConfig,
    pub stitch: StitchConfig,
    pub qec: QecConfig,
    pub bench: BenchSettings,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let geometry = match preset {
            Preset::Desk9um => LatticeGeometry::desk_9um(),
            _ => LatticeGeometry::desk_5um(),
        };
        let optics = match preset {
            Preset::Desk9um => OpticsConfig::desk_9um(),
            _ => OpticsConfig::desk_5um(),
        };
        use ClassifierKind::*;
        use PatchSource::*;
        Self {
            preset,
            seed: 2024,
            paths: Paths::default(),
            geometry,
            optics,
            data: DataConfig {
                durations_ms: vec![30.0, 40.0, 50.0, 60.0, 100.0, 150.0],
                shots_per_duration: 800,
                p_bright: 0.5,
                label_source: LabelSource::Truth,
            },
            generator: GeneratorConfig::with_width(0.25),
            discriminator: DiscriminatorConfig::with_width(0.25),
            train: TrainConfig {
                epochs: 10,
                early_stop_patience: 0,
                ..TrainConfig::default()
            },
            classifier: ClassifierConfig {
                shared: true,
                ..ClassifierConfig::default()
            },
            sweep: SweepConfig {
                methods: vec![
                    MethodSpec::new(Threshold, RawShort),
                    MethodSpec::new(MatchedFilter, RawShort),
                    MethodSpec::new(Fnn, RawShort),
                    MethodSpec::new(Threshold, Denoised),
                    MethodSpec::new(Fnn, Denoised),
                    MethodSpec::new(Threshold, Long),
                ],
                baseline: MethodSpec::new(Threshold, RawShort),
                qec_method: MethodSpec::new(Fnn, Denoised),
                denoise_batch: 64,
            },
            postselect: PostSelectConfig {
                taus: vec![0.5, 0.9, 0.99, 0.999],
                method: MethodSpec::new(Fnn, Denoised),
            },
            stitch: StitchConfig {
                grids: vec![[4, 4], [8, 8], [16, 16]],
                frames_per_grid: 64,
                max_frame_px: DEFAULT_MAX_FRAME_PX,
                duration_ms: None,
            },
            qec: QecConfig {
                distances: vec![3, 5],
                rounds: 20,
                shots: 10_000,
                coherence: CoherenceParams { t1: 0.1, t2: 0.1 },
                overhead_s: 5e-3,
                p_meas_model: PMeasModel::Measured,
                grid_points: 13,
                timing: TimingParams::default(),
            },
            bench: BenchSettings {
                batch_sizes: vec![1, 8, 32],
                instances: vec![1, 2, 4],
                parallel_batch: 1,
                scaling_grids: vec![[4, 4], [8, 8], [16, 16]],
                scaling_frames: 8,
                run: BenchConfig::default(),
            },
        }
        .with_seed(2024)
    }

    /// Merges `overrides` over the preset named in it (default desk-5um),
    /// then derives stage seeds. Keys unknown to the preset are rejected.
    pub fn from_json(overrides: &Value) -> Result<Self> {
        let preset = match overrides.get("preset") {
            None => Preset::Desk5um,
            Some(Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::config("preset", "must be a string")),
        };
        let mut base = serde_json::to_value(Self::preset(preset))?;
        merge(&mut base, overrides, "")?;
        let cfg: RunConfig =
            serde_json::from_value(base).map_err(|e| Error::config("config", e.to_string()))?;
        let global = cfg.seed;
        Ok(cfg.with_seed(global))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&value)
    }

    /// Sets the global seed and re-derives every stage seed from it.
    pub fn with_seed(mut self, global: u64) -> Self {
        self.seed = global;
        self.train.seed = seed::derive(global, 2);
        self.classifier.train.seed = seed::derive(global, 3);
        self.bench.run.seed = seed::derive(global, 5);
        self
    }

    pub fn data_seed(&self) -> u64 {
        seed::derive(self.seed, 1)
    }

    pub fn qec_seed(&self) -> u64 {
        seed::derive(self.seed, 4)
    }

    pub fn stitch_seed(&self) -> u64 {
        seed::derive(self.seed, 6)
    }

    /// Replaces path fields from the environment when the variables are set.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get(ENV_DATA_DIR) {
            self.paths.data_dir = v.into();
        }
        if let Some(v) = get(ENV_CHECKPOINT_DIR) {
            self.paths.checkpoint_dir = v.into();
        }
        if let Some(v) = get(ENV_REPORT_DIR) {
            self.paths.report_dir = v.into();
        }
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        crate::simcam::sha256_hex(&[&bytes])
    }
}

fn merge(base: &mut Value, over: &Value, path: &str) -> Result<()> {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let child = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &child)?,
                    None => return Err(Error::config(child, "unknown field")),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

/// One violated constraint, addressed by dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn field_error(default_field: &str, e: Error) -> FieldError {
    match e {
        Error::Config { field, message } => FieldError { field, message },
        Error::Probability { name, value } => FieldError {
            field: name,
            message: format!("{value} is not a probability"),
        },
        other => FieldError {
            field: default_field.into(),
            message: other.to_string(),
        },
    }
}

/// Every statically checkable constraint; never touches data.
pub fn validate_config(cfg: &RunConfig) -> Vec<FieldError> {
    let mut errs = Vec::new();
    let mut check = |field: &str, r: Result<()>| {
        if let Err(e) = r {
            errs.push(field_error(field, e));
        }
    };
    let fail = |field: &str, message: &str| -> Result<()> { Err(Error::config(field, message)) };

    check("geometry", cfg.geometry.validate());
    check("optics", cfg.optics.validate());
    check("generator", cfg.generator.validate());
    check("discriminator", cfg.discriminator.validate());
    check("train", cfg.train.validate());
    check("classifier", cfg.classifier.validate());
    check("qec.timing", cfg.qec.timing.validate());
    check("qec.coherence.t2", cfg.qec.coherence.validate());
    check("bench.run", cfg.bench.run.validate());

    let d = &cfg.data;
    if d.durations_ms.is_empty() {
        check(
            "data.durations_ms",
            fail("data.durations_ms", "must not be empty"),
        );
    }
    if d.durations_ms.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        check(
            "data.durations_ms",
            fail("data.durations_ms", "every duration must be > 0"),
        );
    }
    if d.durations_ms.windows(2).any(|w| w[1] <= w[0]) {
        check(
            "data.durations_ms",
            fail("data.durations_ms", "must be strictly increasing"),
        );
    }
    if d.shots_per_duration < 10 {
        check(
            "data.shots_per_duration",
            fail(
                "data.shots_per_duration",
                "need >= 10 shots to populate every split",
            ),
        );
    }
    if !(0.0..=1.0).contains(&d.p_bright) {
        check("data.p_bright", fail("data.p_bright", "must lie in [0, 1]"));
    }

    if cfg.sweep.methods.is_empty() {
        check("sweep.methods", fail("sweep.methods", "must not be empty"));
    }
    for (name, m) in [
        ("sweep.baseline", cfg.sweep.baseline),
        ("sweep.qec_method", cfg.sweep.qec_method),
    ] {
        if !cfg.sweep.methods.contains(&m) {
            check(
                name,
                fail(
                    name,
                    &format!("{} is not listed in sweep.methods", m.label()),
                ),
            );
        }
    }
    if cfg.sweep.denoise_batch == 0 {
        check(
            "sweep.denoise_batch",
            fail("sweep.denoise_batch", "must be >= 1"),
        );
    }

    if cfg.postselect.taus.is_empty() || cfg.postselect.taus.iter().any(|t| !(0.5..1.0).contains(t))
    {
        check(
            "postselect.taus",
            fail("postselect.taus", "need at least one tau, each in [0.5, 1)"),
        );
    }

    let g = &cfg.geometry;
    for grid in cfg.stitch.grids.iter().chain(&cfg.bench.scaling_grids) {
        if grid[0] < g.rows || grid[1] < g.cols {
            check(
                "stitch.grids",
                fail(
                    "stitch.grids",
                    &format!("{grid:?} is smaller than the source lattice"),
                ),
            );
        }
    }
    if cfg.stitch.frames_per_grid == 0 || cfg.bench.scaling_frames == 0 {
        check(
            "stitch.frames_per_grid",
            fail("stitch.frames_per_grid", "must be >= 1"),
        );
    }
    if let Some(t) = cfg.stitch.duration_ms {
        if !d.durations_ms.iter().any(|&x| (x - t).abs() < 1e-9) {
            check(
                "stitch.duration_ms",
                fail("stitch.duration_ms", "must be one of data.durations_ms"),
            );
        }
    }

    let q = &cfg.qec;
    if q.distances.is_empty() || q.distances.iter().any(|&k| k < 3 || k % 2 == 0) {
        check(
            "qec.distances",
            fail("qec.distances", "distances must be odd and >= 3"),
        );
    }
    if q.rounds == 0 || q.shots == 0 {
        check(
            "qec.rounds",
            fail("qec.rounds", "rounds and shots must be >= 1"),
        );
    }
    if !(q.overhead_s >= 0.0 && q.overhead_s.is_finite()) {
        check(
            "qec.overhead_s",
            fail("qec.overhead_s", "must be finite and >= 0"),
        );
    }
    if q.grid_points < 2 {
        check(
            "qec.grid_points",
            fail("qec.grid_points", "need at least two grid points"),
        );
    }

    let b = &cfg.bench;
    if b.batch_sizes.contains(&0) || b.instances.contains(&0) || b.parallel_batch == 0 {
        check(
            "bench",
            fail("bench", "batch sizes and instance counts must be >= 1"),
        );
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn fields(cfg: &RunConfig) -> Vec<String> {
        validate_config(cfg).into_iter().map(|e| e.field).collect()
    }

    #[test]
    fn presets_validate() {
        for p in [Preset::Desk5um, Preset::Desk9um, Preset::Custom] {
            assert!(validate_config(&RunConfig::preset(p)).is_empty(), "{p:?}");
        }
    }

    #[test]
    fn zero_attenuation_is_reported() {
        let mut cfg = RunConfig::preset(Preset::Desk5um);
        cfg.optics.attenuation = 0.0;
        assert_eq!(fields(&cfg), ["optics.attenuation"]);
    }

    #[test]
    fn cp_bound_is_named() {
        let mut cfg = RunConfig::preset(Preset::Desk5um);
        cfg.qec.coherence = CoherenceParams { t1: 0.1, t2: 0.3 };
        let errs = validate_config(&cfg);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].field, "qec.coherence.t2");
        assert!(errs[0].message.contains("2*T1"), "{}", errs[0].message);
    }

    #[test]
    fn several_errors_are_collected() {
        let mut cfg = RunConfig::preset(Preset::Desk5um);
        cfg.data.p_bright = 1.5;
        cfg.qec.distances = vec![4];
        cfg.postselect.taus = vec![0.2];
        assert_eq!(
            fields(&cfg),
            ["data.p_bright", "postselect.taus", "qec.distances"]
        );
    }

    #[test]
    fn merge_overrides_nested_fields_only() {
        let cfg = RunConfig::from_json(&json!({"seed": 7, "optics": {"read_noise": 5.0}})).unwrap();
        assert_eq!(cfg.optics.read_noise, 5.0);
        assert_eq!(cfg.optics.bright_rate, OpticsConfig::desk_5um().bright_rate);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.seed, seed::derive(7, 2));
    }

    #[test]
    fn preset_selects_defaults() {
        let cfg = RunConfig::from_json(&json!({"preset": "desk-9um"})).unwrap();
        assert_eq!(cfg.geometry, LatticeGeometry::desk_9um());
        assert!(RunConfig::from_json(&json!({"preset": "lab"})).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        match RunConfig::from_json(&json!({"optics": {"brightness": 1.0}})) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "optics.brightness"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn env_overrides_paths_only() {
        let mut cfg = RunConfig::preset(Preset::Desk5um);
        cfg.apply_env(|k| (k == ENV_REPORT_DIR).then(|| "/tmp/r".to_string()));
        assert_eq!(cfg.paths.report_dir, PathBuf::from("/tmp/r"));
        assert_eq!(cfg.paths.data_dir, PathBuf::from("data"));
        let resolved = cfg.paths.resolve(Path::new("/out"));
        assert_eq!(resolved.data_dir, PathBuf::from("/out/data"));
        assert_eq!(resolved.report_dir, PathBuf::from("/tmp/r"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::preset(Preset::Desk5um);
        let b = a.clone().with_seed(99);
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
