//! Run configuration read from a `key = value` file with `[section]` headers.
//!
//! ```text
//! [dataset]
//! generator = two_moons_views    # or: path = data/
//! n = 400
//! noise = 0.1
//! label_fraction = 0.1           # mask labels before training
//! test_count = 200               # holdout size for sweep
//! standardize = false
//!
//! [kernel.default]
//! family = gaussian              # gaussian | linear | polynomial
//! bandwidth = 0.5                # gaussian only; median heuristic if absent
//!
//! [kernel.moons_b]
//! family = polynomial
//! degree = 2
//! offset = 1
//!
//! [manifold]
//! k = 20
//! m = auto
//!
//! [objective]
//! gamma_a = 1e-3
//! gamma_i = 1e-2
//!
//! [run]
//! method = mHesLS
//! seed = 0
//! out = runs/demo
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ini::Ini;
use mhr::dataset::{GeneratorKind, GeneratorSpec};
use mhr::kernels::{KernelFamily, KernelSpec};
use mhr::manifold::ManifoldSpec;
use mhr::solvers::{KernelSpecs, ObjectiveConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Path(PathBuf),
    Generator {
        kind: GeneratorKind,
        n: usize,
        noise: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    /// Labels kept before training; `None` uses the labels as given.
    pub label_fraction: Option<f64>,
    /// Holdout size for `sweep`; `None` holds out half.
    pub test_count: Option<usize>,
    pub standardize: bool,
    pub kernels: KernelSpecs,
    pub manifold: ManifoldSpec,
    pub objective: ObjectiveConfig,
    pub methods: Vec<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub workers: Option<usize>,
    pub grid_exp: (i32, i32),
    pub tune_fraction: f64,
    pub validation_share: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSource::Generator {
                kind: GeneratorKind::TwoMoonsViews,
                n: 400,
                noise: 0.1,
            },
            label_fraction: None,
            test_count: None,
            standardize: false,
            kernels: KernelSpecs::default(),
            manifold: ManifoldSpec::default(),
            objective: ObjectiveConfig::default(),
            methods: vec!["mHesLS".into()],
            out: PathBuf::from("mhr-out"),
            seed: 0,
            fractions: vec![0.1, 0.2, 0.3, 0.5, 0.7, 0.9],
            repeats: 10,
            workers: None,
            grid_exp: (-10, 10),
            tune_fraction: 0.1,
            validation_share: 0.25,
        }
    }
}

fn parse<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("config: [{section}] {key} = {value:?} is not a valid value"))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!(
            "config: [{section}] {key} = {value:?} is not a boolean"
        )),
    }
}

pub fn parse_list<T: std::str::FromStr>(what: &str, value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| format!("config: {what}: cannot parse {s:?}"))
        })
        .collect()
}

/// `a..b` with both ends included.
pub fn parse_range(value: &str) -> Result<(i32, i32), String> {
    let (lo, hi) = value
        .split_once("..")
        .ok_or_else(|| format!("config: grid range {value:?} must look like -10..10"))?;
    let lo: i32 = lo
        .trim()
        .parse()
        .map_err(|_| format!("config: bad grid start {lo:?}"))?;
    let hi: i32 = hi
        .trim()
        .parse()
        .map_err(|_| format!("config: bad grid end {hi:?}"))?;
    if lo > hi {
        return Err(format!("config: empty grid range {value:?}"));
    }
    Ok((lo, hi))
}

fn unknown(section: &str, key: &str) -> String {
    format!("config: unknown key {key:?} in [{section}]")
}

#[derive(Default)]
struct KernelKeys {
    family: Option<String>,
    bandwidth: Option<f64>,
    degree: Option<u32>,
    offset: Option<f64>,
    trace_normalize: bool,
}

impl KernelKeys {
    fn build(self, section: &str) -> Result<KernelSpec, String> {
        let family = match self.family.as_deref().unwrap_or("gaussian") {
            "gaussian" | "rbf" => {
                if self.degree.is_some() || self.offset.is_some() {
                    return Err(format!(
                        "config: [{section}] degree/offset only apply to polynomial kernels"
                    ));
                }
                KernelFamily::GaussianRbf {
                    bandwidth: self.bandwidth,
                }
            }
            "linear" => KernelFamily::Linear,
            "polynomial" => KernelFamily::Polynomial {
                degree: self.degree.unwrap_or(2),
                offset: self.offset.unwrap_or(1.0),
            },
            other => {
                return Err(format!(
                    "config: [{section}] unknown kernel family {other:?}"
                ))
            }
        };
        if self.bandwidth.is_some() && !matches!(family, KernelFamily::GaussianRbf { .. }) {
            return Err(format!(
                "config: [{section}] bandwidth only applies to gaussian kernels"
            ));
        }
        let spec = KernelSpec {
            family,
            trace_normalize: self.trace_normalize,
        };
        spec.validate()
            .map_err(|e| format!("config: [{section}] {e}"))?;
        Ok(spec)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config: {}: {e}", path.display()))?;
        let mut config = Self::parse(&text)?;
        // Relative dataset paths are taken from the config file's directory.
        if let DatasetSource::Path(p) = &mut config.dataset {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let ini = Ini::load_from_str(text).map_err(|e| format!("config: {e}"))?;
        let mut config = RunConfig::default();
        let mut path = None;
        let mut generator = None;
        let (mut n, mut noise) = (400usize, 0.1f64);
        let mut kernels: BTreeMap<String, KernelKeys> = BTreeMap::new();

        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(format!("config: key {key:?} appears before any section"));
                }
                continue;
            };
            for (key, value) in props.iter() {
                let value = value.trim();
                match section {
                    "dataset" => match key {
                        "path" => path = Some(PathBuf::from(value)),
                        "generator" => {
                            generator = Some(
                                value
                                    .parse::<GeneratorKind>()
                                    .map_err(|e| format!("config: {e}"))?,
                            )
                        }
                        "n" => n = parse(section, key, value)?,
                        "noise" => noise = parse(section, key, value)?,
                        "label_fraction" => {
                            config.label_fraction = Some(parse(section, key, value)?)
                        }
                        "test_count" => config.test_count = Some(parse(section, key, value)?),
                        "standardize" => config.standardize = parse_bool(section, key, value)?,
                        _ => return Err(unknown(section, key)),
                    },
                    s if s.starts_with("kernel.") => {
                        let entry = kernels.entry(s["kernel.".len()..].to_string()).or_default();
                        match key {
                            "family" => entry.family = Some(value.to_string()),
                            "bandwidth" => entry.bandwidth = Some(parse(section, key, value)?),
                            "degree" => entry.degree = Some(parse(section, key, value)?),
                            "offset" => entry.offset = Some(parse(section, key, value)?),
                            "trace_normalize" => {
                                entry.trace_normalize = parse_bool(section, key, value)?
                            }
                            _ => return Err(unknown(section, key)),
                        }
                    }
                    "manifold" => match key {
                        "k" => config.manifold.k = Some(parse(section, key, value)?),
                        "m" => {
                            config.manifold.m = if value == "auto" {
                                None
                            } else {
                                Some(parse(section, key, value)?)
                            }
                        }
                        "threshold" => config.manifold.threshold = parse(section, key, value)?,
                        "bandwidth" => {
                            config.manifold.bandwidth = Some(parse(section, key, value)?)
                        }
                        _ => return Err(unknown(section, key)),
                    },
                    "objective" => {
                        let o = &mut config.objective;
                        match key {
                            "gamma_a" => o.gamma_a = parse(section, key, value)?,
                            "gamma_i" => o.gamma_i = parse(section, key, value)?,
                            "gamma_theta" => o.gamma_theta = parse(section, key, value)?,
                            "gamma_beta" => o.gamma_beta = parse(section, key, value)?,
                            "mu" => o.mu = parse(section, key, value)?,
                            "max_inner_iters" => o.max_inner_iters = parse(section, key, value)?,
                            "max_outer_rounds" => o.max_outer_rounds = parse(section, key, value)?,
                            "tol_inner" => o.tol_inner = parse(section, key, value)?,
                            "tol_outer" => o.tol_outer = parse(section, key, value)?,
                            _ => return Err(unknown(section, key)),
                        }
                    }
                    "run" => match key {
                        "method" | "methods" => config.methods = parse_list("run.method", value)?,
                        "out" => config.out = PathBuf::from(value),
                        "seed" => config.seed = parse(section, key, value)?,
                        "fractions" => config.fractions = parse_list("run.fractions", value)?,
                        "repeats" => config.repeats = parse(section, key, value)?,
                        "workers" => config.workers = Some(parse(section, key, value)?),
                        "grid_exp" => config.grid_exp = parse_range(value)?,
                        "tune_fraction" => config.tune_fraction = parse(section, key, value)?,
                        "validation_share" => config.validation_share = parse(section, key, value)?,
                        _ => return Err(unknown(section, key)),
                    },
                    other => return Err(format!("config: unknown section [{other}]")),
                }
            }
        }

        config.dataset = match (path, generator) {
            (Some(_), Some(_)) => {
                return Err("config: [dataset] takes either path or generator, not both".into())
            }
            (Some(p), None) => DatasetSource::Path(p),
            (None, kind) => DatasetSource::Generator {
                kind: kind.unwrap_or(GeneratorKind::TwoMoonsViews),
                n,
                noise,
            },
        };
        if let Some(default) = kernels.remove("default") {
            config.kernels.default = default.build("kernel.default")?;
        }
        for (view, keys) in kernels {
            let spec = keys.build(&format!("kernel.{view}"))?;
            config.kernels.per_view.insert(view, spec);
        }
        config
            .objective
            .validate()
            .map_err(|e| format!("config: {e}"))?;
        if config.methods.is_empty() {
            return Err("config: [run] method is empty".into());
        }
        Ok(config)
    }

    pub fn generator_spec(&self) -> Option<GeneratorSpec> {
        match &self.dataset {
            DatasetSource::Generator { kind, n, noise } => Some(GeneratorSpec {
                kind: kind.clone(),
                n: *n,
                noise: *noise,
                seed: self.seed,
            }),
            DatasetSource::Path(_) => None,
        }
    }
}
