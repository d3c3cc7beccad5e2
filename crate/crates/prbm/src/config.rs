//! Flat `key = value` experiment configuration.
//!
//! Values resolve in three layers: built-in defaults, then the config file,
//! then command-line flags. Lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use prbm_core::trainer::NegativePhase;
use prbm_core::{ConstraintSpec, TrainConfig};

use crate::error::{Error, Result};

pub struct KeySpec {
    pub name: &'static str,
    /// `None` marks a key with no default.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

macro_rules! keys {
    ($($name:literal = $default:expr, $help:literal;)*) => {
        pub const KEYS: &[KeySpec] = &[$(KeySpec { name: $name, default: $default, help: $help }),*];
    };
}

keys! {
    "mode" = None, "train | eval | sample | sweep | topology-info";
    "experiment_id" = Some("experiment"), "label written to every result row and used in output file names";
    "train_data" = None, "training set: IDX image file or CSV matrix";
    "test_data" = None, "test set: IDX image file or CSV matrix";
    "model" = None, "PRBM-MODL file to evaluate, sample from, or use instead of training in a sweep";
    "output_dir" = Some("out"), "directory for models, CSV results and images";
    "num_hidden" = Some("500"), "hidden units (chimera masks fix this to the graph's hidden side)";
    "k" = Some("15"), "Gibbs sweeps per update";
    "learning_rate" = Some("0.01"), "SGD step size";
    "batch_size" = Some("100"), "examples per update";
    "num_chains" = Some("100"), "persistent chains";
    "epochs" = Some("10"), "passes over the training set";
    "init_weight_std" = Some("0.01"), "std of the initial weights";
    "negative_phase" = Some("simulated_physical"), "simulated_physical | plain_gibbs | exact_enumeration";
    "sigma_w" = Some("0"), "weight-noise stds (list)";
    "sigma_b" = Some("0"), "bias-noise stds (list)";
    "cap" = Some("inf"), "parameter magnitude caps (list)";
    "mask" = Some("dense"), "masks (list): dense | random_drop:P | chimera | file:PATH";
    "seeds" = Some("0"), "seeds (list); each grid cell runs once per seed";
    "noise_phase" = Some("both"), "where grid noise applies: train | eval | both";
    "noise_draws" = Some("5"), "noise instantiations averaged by noisy evaluation";
    "nll_method" = Some("auto"), "auto | exact | ais";
    "ais_betas" = Some("10000"), "AIS inverse temperatures";
    "ais_particles" = Some("100"), "AIS particles";
    "ais_base" = Some("data"), "AIS base visible biases: data | zeros";
    "chimera" = Some("14,14,4"), "chimera graph rows, cols, shore size";
    "mapping" = Some("identity"), "pixel to unit layout: identity | pixel_blocks | extended_pixel_blocks | file:PATH";
    "image_width" = Some("0"), "image width for rendering; 0 infers a square";
    "image_height" = Some("0"), "image height for rendering; 0 infers a square";
    "samples" = Some("16"), "chains rendered by sample";
    "sample_steps" = Some("100000"), "Gibbs sweeps before rendering";
    "sample_columns" = Some("4"), "tiles per row in sample images";
    "emit_samples" = Some("false"), "sweep: also write a sample image per cell";
    "export" = Some("false"), "topology-info: also write the chimera mask and mapping files";
    "workers" = Some("0"), "parallel sweep cells; 0 uses every core";
}

pub fn key_spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

/// Closest known key by edit distance.
pub fn nearest_key(name: &str) -> &'static str {
    KEYS.iter()
        .min_by_key(|k| strsim::levenshtein(name, k.name))
        .map(|k| k.name)
        .unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    Sample,
    Sweep,
    TopologyInfo,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
            Mode::Sample => "sample",
            Mode::Sweep => "sweep",
            Mode::TopologyInfo => "topology-info",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Mode::Train),
            "eval" => Ok(Mode::Eval),
            "sample" => Ok(Mode::Sample),
            "sweep" => Ok(Mode::Sweep),
            "topology-info" | "topology_info" => Ok(Mode::TopologyInfo),
            _ => Err("expected train, eval, sample, sweep or topology-info".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisePhase {
    Train,
    Eval,
    Both,
}

impl NoisePhase {
    pub fn in_training(&self) -> bool {
        matches!(self, NoisePhase::Train | NoisePhase::Both)
    }

    pub fn in_evaluation(&self) -> bool {
        matches!(self, NoisePhase::Eval | NoisePhase::Both)
    }
}

impl FromStr for NoisePhase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(NoisePhase::Train),
            "eval" => Ok(NoisePhase::Eval),
            "both" => Ok(NoisePhase::Both),
            _ => Err("expected train, eval or both".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    Dense,
    RandomDrop(f64),
    Chimera,
    File(PathBuf),
}

impl FromStr for MaskSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "dense" {
            return Ok(MaskSpec::Dense);
        }
        if s == "chimera" {
            return Ok(MaskSpec::Chimera);
        }
        if let Some(p) = s.strip_prefix("random_drop:") {
            let p: f64 = p.parse().map_err(|_| format!("`{p}` is not a probability"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("drop probability {p} is outside [0, 1]"));
            }
            return Ok(MaskSpec::RandomDrop(p));
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(MaskSpec::File(path.into()));
        }
        Err("expected dense, random_drop:P, chimera or file:PATH".into())
    }
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskSpec::Dense => f.write_str("dense"),
            MaskSpec::RandomDrop(p) => write!(f, "random_drop:{p}"),
            MaskSpec::Chimera => f.write_str("chimera"),
            MaskSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MappingSpec {
    Identity,
    PixelBlocks,
    ExtendedPixelBlocks,
    File(PathBuf),
}

impl FromStr for MappingSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(MappingSpec::Identity),
            "pixel_blocks" => Ok(MappingSpec::PixelBlocks),
            "extended_pixel_blocks" => Ok(MappingSpec::ExtendedPixelBlocks),
            _ => match s.strip_prefix("file:") {
                Some(path) => Ok(MappingSpec::File(path.into())),
                None => Err("expected identity, pixel_blocks, extended_pixel_blocks or file:PATH".into()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Exact,
    Ais,
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(MethodChoice::Auto),
            "exact" => Ok(MethodChoice::Exact),
            "ais" => Ok(MethodChoice::Ais),
            _ => Err("expected auto, exact or ais".into()),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub mode: Mode,
    pub experiment_id: String,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Seed and constraint are filled per grid cell.
    pub train: TrainConfig,
    pub sigma_w: Vec<f64>,
    pub sigma_b: Vec<f64>,
    pub cap: Vec<f64>,
    pub masks: Vec<MaskSpec>,
    pub seeds: Vec<u64>,
    pub noise_phase: NoisePhase,
    pub noise_draws: usize,
    pub nll_method: MethodChoice,
    pub ais_betas: usize,
    pub ais_particles: usize,
    pub ais_data_base: bool,
    pub chimera: (usize, usize, usize),
    pub mapping: MappingSpec,
    pub image_width: usize,
    pub image_height: usize,
    pub samples: usize,
    pub sample_steps: usize,
    pub sample_columns: usize,
    pub emit_samples: bool,
    pub export: bool,
    pub workers: usize,
    /// Every key with its effective value, in registry order.
    pub resolved: Vec<(String, String)>,
}

/// Raw values keyed by name, with the line each came from (0 for flags).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigEntries {
    values: BTreeMap<String, (String, usize)>,
}

impl ConfigEntries {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if key_spec(key).is_none() {
                return Err(Error::UnknownKey {
                    key: key.into(),
                    line: line_no,
                    suggestion: Some(nearest_key(key).into()),
                });
            }
            if let Some((_, first)) = out.values.get(key) {
                return Err(Error::Syntax {
                    line: line_no,
                    message: format!("`{key}` already set on line {first}"),
                });
            }
            out.values.insert(key.into(), (value.trim().into(), line_no));
        }
        Ok(out)
    }

    /// Sets or replaces a value, as a command-line flag does.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if key_spec(key).is_none() {
            return Err(Error::UnknownKey {
                key: key.into(),
                line: 0,
                suggestion: Some(nearest_key(key).into()),
            });
        }
        self.values.insert(key.into(), (value.into(), 0));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    /// Later layers win.
    pub fn merge(mut self, overrides: ConfigEntries) -> Self {
        self.values.extend(overrides.values);
        self
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentPlan> {
    ExperimentPlan::from_entries(&ConfigEntries::parse(text)?)
}

fn scalar<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| Error::value(key, raw, e.to_string()))
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::value(key, raw, "list is empty"));
    }
    Ok(items)
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::value(key, raw, "expected true or false")),
    }
}

impl ExperimentPlan {
    pub fn from_entries(entries: &ConfigEntries) -> Result<Self> {
        let raw = |key: &str| -> Option<String> {
            entries
                .get(key)
                .map(str::to_owned)
                .or_else(|| key_spec(key).and_then(|k| k.default).map(str::to_owned))
        };
        let req = |key: &str| raw(key).ok_or_else(|| Error::MissingKey(key.into()));
        let path = |key: &str| raw(key).filter(|s| !s.is_empty()).map(PathBuf::from);

        let mode: Mode = scalar("mode", &req("mode")?)?;
        let seeds: Vec<u64> = list("seeds", &req("seeds")?)?;
        for (i, s) in seeds.iter().enumerate() {
            if seeds[..i].contains(s) {
                return Err(Error::value("seeds", req("seeds")?, format!("seed {s} appears twice")));
            }
        }
        let positive = |key: &str| -> Result<usize> {
            let v: usize = scalar(key, &req(key)?)?;
            if v == 0 {
                return Err(Error::value(key, "0", "must be positive"));
            }
            Ok(v)
        };
        let negative_phase: NegativePhase = scalar("negative_phase", &req("negative_phase")?)?;
        let train = TrainConfig {
            num_hidden: positive("num_hidden")?,
            k: positive("k")?,
            learning_rate: scalar("learning_rate", &req("learning_rate")?)?,
            batch_size: positive("batch_size")?,
            num_chains: positive("num_chains")?,
            epochs: positive("epochs")?,
            seed: seeds[0],
            init_weight_std: scalar("init_weight_std", &req("init_weight_std")?)?,
            constraint: ConstraintSpec::unconstrained(),
            negative_phase,
        };
        train.validate()?;

        let sigma_w: Vec<f64> = list("sigma_w", &req("sigma_w")?)?;
        let sigma_b: Vec<f64> = list("sigma_b", &req("sigma_b")?)?;
        let cap: Vec<f64> = list("cap", &req("cap")?)?;
        for (key, values) in [("sigma_w", &sigma_w), ("sigma_b", &sigma_b)] {
            if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::value(key, v.to_string(), "must be finite and non-negative"));
            }
        }
        if let Some(v) = cap.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::value("cap", v.to_string(), "must be positive (inf disables)"));
        }

        let chimera: Vec<usize> = list("chimera", &req("chimera")?)?;
        let chimera = match chimera[..] {
            [m, n, l] if m > 0 && n > 0 && l > 0 => (m, n, l),
            _ => return Err(Error::value("chimera", req("chimera")?, "expected three positive integers M, N, L")),
        };

        let plan = ExperimentPlan {
            mode,
            experiment_id: req("experiment_id")?,
            train_data: path("train_data"),
            test_data: path("test_data"),
            model: path("model"),
            output_dir: PathBuf::from(req("output_dir")?),
            train,
            sigma_w,
            sigma_b,
            cap,
            masks: list("mask", &req("mask")?)?,
            seeds,
            noise_phase: scalar("noise_phase", &req("noise_phase")?)?,
            noise_draws: positive("noise_draws")?,
            nll_method: scalar("nll_method", &req("nll_method")?)?,
            ais_betas: scalar("ais_betas", &req("ais_betas")?)?,
            ais_particles: positive("ais_particles")?,
            ais_data_base: match req("ais_base")?.as_str() {
                "data" => true,
                "zeros" => false,
                other => return Err(Error::value("ais_base", other, "expected data or zeros")),
            },
            chimera,
            mapping: scalar("mapping", &req("mapping")?)?,
            image_width: scalar("image_width", &req("image_width")?)?,
            image_height: scalar("image_height", &req("image_height")?)?,
            samples: positive("samples")?,
            sample_steps: scalar("sample_steps", &req("sample_steps")?)?,
            sample_columns: positive("sample_columns")?,
            emit_samples: flag("emit_samples", &req("emit_samples")?)?,
            export: flag("export", &req("export")?)?,
            workers: scalar("workers", &req("workers")?)?,
            resolved: KEYS
                .iter()
                .map(|k| (k.name.to_string(), raw(k.name).unwrap_or_default()))
                .collect(),
        };
        if plan.ais_betas < 2 {
            return Err(Error::value("ais_betas", plan.ais_betas.to_string(), "needs at least 2"));
        }
        plan.check_required()?;
        Ok(plan)
    }

    fn check_required(&self) -> Result<()> {
        let need = |present: bool, key: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::MissingKey(format!("{key} (required by {})", self.mode.as_str())))
            }
        };
        match self.mode {
            Mode::Train => need(self.train_data.is_some(), "train_data"),
            Mode::Eval => {
                need(self.model.is_some(), "model")?;
                need(self.test_data.is_some(), "test_data")
            }
            Mode::Sample => need(self.model.is_some(), "model"),
            Mode::Sweep => {
                need(self.train_data.is_some() || self.model.is_some(), "train_data")?;
                need(self.test_data.is_some(), "test_data")
            }
            Mode::TopologyInfo => Ok(()),
        }
    }

    /// Number of grid cells including seeds.
    pub fn num_cells(&self) -> usize {
        self.sigma_w.len() * self.sigma_b.len() * self.cap.len() * self.masks.len() * self.seeds.len()
    }

    /// `# key = value` lines describing the full resolved configuration.
    pub fn metadata_header(&self) -> String {
        self.resolved
            .iter()
            .map(|(k, v)| format!("# {k} = {v}\n"))
            .collect()
    }
}
