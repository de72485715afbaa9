//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [experiment]
//! kind = excitation
//! hypothesis = ccqi
//! n0 = 10000
//! epsilon = 0.2
//! lambda = 1.0
//! t = 0.693147
//!
//! [simulation]
//! seed = 7
//! ```
//!
//! Sections: `experiment`, `simulation`, `stats`, `fringes`, `output`. Every
//! section is optional; which ones a subcommand needs is checked when it runs.
//! Unknown sections, unknown keys and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ccqi_core::fringes::FringeGeometry;
use ccqi_core::montecarlo::SimConfig;
use ccqi_core::{
    DecayParams, ExcitationParams, Experiment, ExperimentParams, Hypothesis, PhotonParams,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown key `{key}` in [{section}]{hint}")]
    UnknownKey {
        line: usize,
        section: &'static str,
        key: String,
        hint: String,
    },

    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },

    #[error("missing required key `{key}` in [{section}]")]
    Missing {
        section: &'static str,
        key: &'static str,
    },

    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.to_string(),
        }
    }
}

/// Maps a core validation error onto the offending config key.
fn core_error(fallback: &str, err: ccqi_core::Error) -> ConfigError {
    match &err {
        ccqi_core::Error::Domain { name, .. } => ConfigError::invalid(name, &err),
        _ => ConfigError::invalid(fallback, &err),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FringePattern {
    /// Superposition survives: two-source interference.
    #[default]
    Coherent,
    /// Superposition suppressed: intensities add.
    Incoherent,
    /// Sum of the four classical single-site exposures.
    Calibration,
}

impl FromStr for FringePattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coherent" => Ok(FringePattern::Coherent),
            "incoherent" => Ok(FringePattern::Incoherent),
            "calibration" => Ok(FringePattern::Calibration),
            other => Err(format!(
                "unknown pattern `{other}` (expected coherent, incoherent or calibration)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsConfig {
    pub alpha: Option<f64>,
    pub power: Option<f64>,
    pub h0: Hypothesis,
    pub h1: Hypothesis,
    pub background: Option<Vec<f64>>,
    pub visibility: Option<f64>,
    pub counts: Option<Vec<u64>>,
    pub replicates: u64,
    pub power_replicates: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            power: None,
            h0: Hypothesis::Pos,
            h1: Hypothesis::Ccqi,
            background: None,
            visibility: None,
            counts: None,
            replicates: 100_000,
            power_replicates: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeConfig {
    pub geometry: FringeGeometry,
    pub pattern: FringePattern,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputConfig {
    pub format: OutputFormat,
    pub path: Option<PathBuf>,
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub experiment: Option<ExperimentParams>,
    pub hypothesis: Option<Hypothesis>,
    pub sim: SimConfig,
    pub stats: StatsConfig,
    pub fringes: Option<FringeConfig>,
    pub output: OutputConfig,
}

const SECTIONS: [&str; 5] = ["experiment", "simulation", "stats", "fringes", "output"];

const EXPERIMENT_COMMON: &[&str] = &["kind", "hypothesis", "n0"];
const EXCITATION_KEYS: &[&str] = &["epsilon", "lambda", "t"];
const DECAY_KEYS: &[&str] = &["lambda", "lambda_prime", "t1", "t2", "t3", "mu"];
const PHOTON_KEYS: &[&str] = &["d", "u"];
const SIMULATION_KEYS: &[&str] = &["seed", "chunk_size", "workers"];
const STATS_KEYS: &[&str] = &[
    "alpha",
    "power",
    "h0",
    "h1",
    "background",
    "visibility",
    "counts",
    "replicates",
    "power_replicates",
];
const FRINGE_KEYS: &[&str] = &[
    "source_separation",
    "wavelength",
    "screen_distance",
    "x_min",
    "x_max",
    "n_points",
    "pattern",
];
const OUTPUT_KEYS: &[&str] = &["format", "path"];

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key-value pairs of one section.
#[derive(Debug)]
struct Section {
    name: &'static str,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn check_keys(&self, allowed: &[&[&str]], hint: &str) -> Result<(), ConfigError> {
        for (key, entry) in &self.entries {
            if !allowed.iter().any(|set| set.contains(&key.as_str())) {
                return Err(ConfigError::UnknownKey {
                    line: entry.line,
                    section: self.name,
                    key: key.clone(),
                    hint: hint.to_string(),
                });
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| ConfigError::invalid(key, e)))
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or(ConfigError::Missing {
            section: self.name,
            key,
        })
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim()
                            .parse::<T>()
                            .map_err(|e| ConfigError::invalid(key, e))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("malformed section header `{content}`"),
            })?;
            let name = name.trim();
            let Some(&known) = SECTIONS.iter().find(|s| **s == name) else {
                return Err(ConfigError::Parse {
                    line,
                    message: format!(
                        "unknown section [{name}] (expected one of {})",
                        SECTIONS.join(", ")
                    ),
                });
            };
            if sections.iter().any(|s| s.name == known) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("section [{known}] appears twice"),
                });
            }
            sections.push(Section {
                name: known,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                message: "empty key or value".into(),
            });
        }
        let Some(section) = sections.last_mut() else {
            return Err(ConfigError::Parse {
                line,
                message: format!("key `{key}` appears before any [section] header"),
            });
        };
        if section.entries.contains_key(key) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}` in [{}]", section.name),
            });
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(sections)
}

fn parse_experiment(s: &Section) -> Result<(ExperimentParams, Option<Hypothesis>), ConfigError> {
    let kind: Experiment = s.require("kind")?;
    let specific = match kind {
        Experiment::Excitation => EXCITATION_KEYS,
        Experiment::Decay => DECAY_KEYS,
        Experiment::Photon => PHOTON_KEYS,
    };
    s.check_keys(
        &[EXPERIMENT_COMMON, specific],
        &format!(
            " (allowed for kind = {kind}: {}, {})",
            EXPERIMENT_COMMON.join(", "),
            specific.join(", ")
        ),
    )?;
    let hypothesis: Option<Hypothesis> = s.get("hypothesis")?;
    let n0: u64 = s.require("n0")?;
    let params = match kind {
        Experiment::Excitation => ExperimentParams::Excitation(
            ExcitationParams::new(
                n0,
                s.require("epsilon")?,
                s.require("lambda")?,
                s.require("t")?,
            )
            .map_err(|e| core_error("experiment", e))?,
        ),
        Experiment::Decay => {
            let lambda: f64 = s.require("lambda")?;
            let mut p = DecayParams::new(
                n0,
                lambda,
                s.require("t1")?,
                s.require("t2")?,
                s.require("t3")?,
            )
            .map_err(|e| core_error("experiment", e))?;
            if let Some(lp) = s.get::<f64>("lambda_prime")? {
                p = p
                    .with_lambda_prime(lp)
                    .map_err(|e| core_error("lambda_prime", e))?;
            }
            if let Some(mu) = s.get::<f64>("mu")? {
                p = p
                    .with_purity(mu)
                    .and_then(DecayParams::fold_purity)
                    .map_err(|e| core_error("mu", e))?;
            }
            ExperimentParams::Decay(p)
        }
        Experiment::Photon => ExperimentParams::Photon(
            PhotonParams::new(n0, s.require("d")?, s.require("u")?)
                .map_err(|e| core_error("experiment", e))?,
        ),
    };
    if hypothesis == Some(Hypothesis::ModifiedRate) && kind != Experiment::Decay {
        return Err(ConfigError::invalid(
            "hypothesis",
            format!("modified-rate applies only to kind = decay, not {kind}"),
        ));
    }
    Ok((params, hypothesis))
}

fn parse_simulation(s: &Section) -> Result<SimConfig, ConfigError> {
    s.check_keys(&[SIMULATION_KEYS], "")?;
    let mut sim = SimConfig::new(s.get("seed")?.unwrap_or(0));
    if let Some(chunk) = s.get::<u64>("chunk_size")? {
        sim = sim
            .with_chunk_size(chunk)
            .map_err(|e| core_error("chunk_size", e))?;
    }
    if let Some(workers) = s.get::<usize>("workers")? {
        sim = sim.with_workers(workers);
    }
    Ok(sim)
}

fn parse_stats(s: &Section) -> Result<StatsConfig, ConfigError> {
    s.check_keys(&[STATS_KEYS], "")?;
    let defaults = StatsConfig::default();
    let open_unit = |key: &str| -> Result<Option<f64>, ConfigError> {
        match s.get::<f64>(key)? {
            Some(v) if !(v > 0.0 && v < 1.0) => Err(ConfigError::invalid(
                key,
                format!("{v} violates constraint 0 < value < 1"),
            )),
            other => Ok(other),
        }
    };
    let stats = StatsConfig {
        alpha: open_unit("alpha")?,
        power: open_unit("power")?,
        h0: s.get("h0")?.unwrap_or(defaults.h0),
        h1: s.get("h1")?.unwrap_or(defaults.h1),
        background: s.list("background")?,
        visibility: s.get("visibility")?,
        counts: s.list("counts")?,
        replicates: s.get("replicates")?.unwrap_or(defaults.replicates),
        power_replicates: s
            .get("power_replicates")?
            .unwrap_or(defaults.power_replicates),
    };
    if let Some(v) = stats.visibility {
        if !(0.0..=1.0).contains(&v) {
            return Err(ConfigError::invalid(
                "visibility",
                format!("{v} violates constraint 0 <= value <= 1"),
            ));
        }
    }
    if stats.replicates == 0 || stats.power_replicates == 0 {
        return Err(ConfigError::invalid(
            "replicates",
            "replicate counts must be >= 1",
        ));
    }
    Ok(stats)
}

fn parse_fringes(s: &Section) -> Result<FringeConfig, ConfigError> {
    s.check_keys(&[FRINGE_KEYS], "")?;
    let geometry = FringeGeometry::new(
        s.require("source_separation")?,
        s.require("wavelength")?,
        s.require("screen_distance")?,
        s.require("x_min")?,
        s.require("x_max")?,
        s.require("n_points")?,
    )
    .map_err(|e| core_error("fringes", e))?;
    Ok(FringeConfig {
        geometry,
        pattern: s.get("pattern")?.unwrap_or_default(),
    })
}

fn parse_output(s: &Section) -> Result<OutputConfig, ConfigError> {
    s.check_keys(&[OUTPUT_KEYS], "")?;
    Ok(OutputConfig {
        format: s.get("format")?.unwrap_or_default(),
        path: s.raw("path").map(PathBuf::from),
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    for section in split_sections(text)? {
        match section.name {
            "experiment" => {
                let (params, hypothesis) = parse_experiment(&section)?;
                config.experiment = Some(params);
                config.hypothesis = hypothesis;
            }
            "simulation" => config.sim = parse_simulation(&section)?,
            "stats" => config.stats = parse_stats(&section)?,
            "fringes" => config.fringes = Some(parse_fringes(&section)?),
            "output" => config.output = parse_output(&section)?,
            _ => unreachable!("section names are checked while splitting"),
        }
    }
    Ok(config)
}
