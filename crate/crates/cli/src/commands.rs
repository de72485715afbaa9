use ccqi_core::fringes::{self, FringeProfile};
use ccqi_core::sectors::{self, DensityMatrix, SectorSpace, StateVector};
use ccqi_core::stats::{self, CategoryLayout, CategoryModel, Counts, TestSettings};
use ccqi_core::{
    predict_decay, predict_excitation, predict_photon, simulate_decay, simulate_excitation,
    simulate_photon, ExperimentParams, Hypothesis,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde_json::json;

use crate::config::{ConfigError, FringePattern, OutputFormat, RunConfig};
use crate::output::{csv_row, float_row, int_row, json_f64, labelled, pretty, profile_csv};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Closed-form count table for one hypothesis.
    Predict,
    /// Monte Carlo tallies with the matching prediction and z-scores.
    Simulate,
    /// Screen intensity profile.
    Fringes,
    /// Likelihood-ratio test report.
    Discriminate,
    /// Minimum sample size.
    Plan,
    /// Cat state versus superselected mixture.
    SectorsDemo,
}

fn experiment(config: &RunConfig) -> Result<ExperimentParams, CliError> {
    config.experiment.ok_or_else(|| {
        ConfigError::Missing {
            section: "experiment",
            key: "kind",
        }
        .into()
    })
}

fn hypothesis(config: &RunConfig) -> Result<Hypothesis, CliError> {
    config.hypothesis.ok_or_else(|| {
        ConfigError::Missing {
            section: "experiment",
            key: "hypothesis",
        }
        .into()
    })
}

fn labels(params: &ExperimentParams) -> &'static [&'static str] {
    match params {
        ExperimentParams::Photon(_) => CategoryLayout::Photon.labels(),
        _ => CategoryLayout::Atom.labels(),
    }
}

fn prediction(params: &ExperimentParams, h: Hypothesis) -> ccqi_core::Result<Vec<f64>> {
    Ok(match params {
        ExperimentParams::Excitation(p) => predict_excitation(p, h)?.to_array().to_vec(),
        ExperimentParams::Decay(p) => predict_decay(p, h)?.to_array().to_vec(),
        ExperimentParams::Photon(p) => predict_photon(p, h)?.to_array().to_vec(),
    })
}

fn simulation(
    params: &ExperimentParams,
    h: Hypothesis,
    config: &RunConfig,
) -> ccqi_core::Result<Vec<u64>> {
    Ok(match params {
        ExperimentParams::Excitation(p) => {
            simulate_excitation(p, h, &config.sim)?.to_array().to_vec()
        }
        ExperimentParams::Decay(p) => simulate_decay(p, h, &config.sim)?.to_array().to_vec(),
        ExperimentParams::Photon(p) => simulate_photon(p, h, &config.sim)?.to_array().to_vec(),
    })
}

/// Binomial z-score of one category; 0 when both variance and deviation vanish.
pub fn z_score(observed: u64, expected: f64, n0: u64) -> f64 {
    let deviation = observed as f64 - expected;
    if n0 == 0 {
        return 0.0;
    }
    let p = expected / n0 as f64;
    let variance = n0 as f64 * p * (1.0 - p);
    if variance <= 0.0 {
        if deviation.abs() <= 1e-9 * (n0 as f64) {
            0.0
        } else {
            deviation.signum() * f64::INFINITY
        }
    } else {
        deviation / variance.sqrt()
    }
}

fn predict(config: &RunConfig) -> Result<String, CliError> {
    let params = experiment(config)?;
    let h = hypothesis(config)?;
    let table = prediction(&params, h)?;
    let labels = labels(&params);
    Ok(match config.output.format {
        OutputFormat::Csv => csv_row(labels.iter()) + &float_row(&table),
        OutputFormat::Json => pretty(&json!({
            "experiment": params.experiment().name(),
            "hypothesis": h.name(),
            "n0": params.n0(),
            "prediction": labelled(labels, &table, json_f64),
        })),
    })
}

fn simulate(config: &RunConfig) -> Result<String, CliError> {
    let params = experiment(config)?;
    let h = hypothesis(config)?;
    let expected = prediction(&params, h)?;
    let counts = simulation(&params, h, config)?;
    let z: Vec<f64> = counts
        .iter()
        .zip(&expected)
        .map(|(&c, &e)| z_score(c, e, params.n0()))
        .collect();
    let labels = labels(&params);
    Ok(match config.output.format {
        // Rows: simulated tallies, prediction, z-scores.
        OutputFormat::Csv => {
            csv_row(labels.iter()) + &int_row(&counts) + &float_row(&expected) + &float_row(&z)
        }
        OutputFormat::Json => pretty(&json!({
            "experiment": params.experiment().name(),
            "hypothesis": h.name(),
            "n0": params.n0(),
            "seed": config.sim.seed,
            "chunk_size": config.sim.chunk_size,
            "counts": labelled(labels, &counts, |c| json!(c)),
            "prediction": labelled(labels, &expected, json_f64),
            "z_scores": labelled(labels, &z, json_f64),
        })),
    })
}

fn fringe_profile(config: &RunConfig) -> Result<(FringePattern, FringeProfile), CliError> {
    let Some(f) = &config.fringes else {
        return Err(ConfigError::Missing {
            section: "fringes",
            key: "source_separation",
        }
        .into());
    };
    let profile = match f.pattern {
        FringePattern::Coherent => fringes::coherent_pattern(&f.geometry)?,
        FringePattern::Incoherent => fringes::incoherent_pattern(&f.geometry),
        FringePattern::Calibration => {
            FringeProfile::sum(&fringes::calibration_patterns(&f.geometry))
                .expect("calibration exposures share one grid")
        }
    };
    Ok((f.pattern, profile))
}

fn fringe_command(config: &RunConfig) -> Result<String, CliError> {
    let (pattern, profile) = fringe_profile(config)?;
    Ok(match config.output.format {
        OutputFormat::Csv => profile_csv(&profile),
        OutputFormat::Json => pretty(&json!({
            "pattern": format!("{pattern:?}").to_lowercase(),
            "position": profile.positions.iter().map(|&v| json_f64(v)).collect::<Vec<_>>(),
            "intensity": profile.intensity.iter().map(|&v| json_f64(v)).collect::<Vec<_>>(),
        })),
    })
}

fn models(
    config: &RunConfig,
    params: &ExperimentParams,
) -> Result<(CategoryModel, CategoryModel), CliError> {
    let s = &config.stats;
    let background = s.background.as_deref();
    // Imperfections describe the apparatus, so they apply to both models.
    let h0 = stats::build_model(params, s.h0, background, s.visibility)?;
    let h1 = stats::build_model(params, s.h1, background, s.visibility)?;
    Ok((h0, h1))
}

fn settings(config: &RunConfig) -> TestSettings {
    TestSettings {
        null_replicates: config.stats.replicates,
        power_replicates: config.stats.power_replicates,
        sim: config.sim,
    }
}

/// Plans with `alpha` when given. Zero-cell designs do not depend on it.
fn plan_sample_size(
    config: &RunConfig,
    h0: &CategoryModel,
    h1: &CategoryModel,
    power: f64,
) -> Result<stats::SampleSizePlan, CliError> {
    let zero_cell = stats::zero_cell_mass(h0, h1) > 0.0;
    let alpha = match (config.stats.alpha, zero_cell) {
        (Some(a), _) => a,
        // Any level works: a forbidden click has p = 0.
        (None, true) => 0.5,
        (None, false) => {
            return Err(ConfigError::Missing {
                section: "stats",
                key: "alpha",
            }
            .into())
        }
    };
    Ok(stats::min_sample_size(
        h0,
        h1,
        alpha,
        power,
        &settings(config),
    )?)
}

fn discriminate(config: &RunConfig) -> Result<String, CliError> {
    let params = experiment(config)?;
    let alpha = config.stats.alpha.ok_or(ConfigError::Missing {
        section: "stats",
        key: "alpha",
    })?;
    let (h0, h1) = models(config, &params)?;
    let counts = match &config.stats.counts {
        Some(values) => {
            Counts::new(h0.layout(), values.clone()).map_err(|e| ConfigError::Invalid {
                key: "counts".into(),
                message: e.to_string(),
            })?
        }
        None => {
            // No data supplied: draw a data set under the configured hypothesis.
            let h = hypothesis(config)?;
            Counts::new(h0.layout(), simulation(&params, h, config)?)?
        }
    };
    let mut report = stats::discriminate(&counts, &h0, &h1, alpha, &settings(config))?;
    if let Some(power) = config.stats.power {
        report.min_n0 = Some(plan_sample_size(config, &h0, &h1, power)?.min_n0);
    }
    let mut value = serde_json::to_value(&report).expect("report serialises");
    value["h0"] = json!(config.stats.h0.name());
    value["h1"] = json!(config.stats.h1.name());
    value["alpha"] = json_f64(alpha);
    value["counts"] = labelled(h0.layout().labels(), counts.values(), |c| json!(c));
    Ok(pretty(&value))
}

fn plan(config: &RunConfig) -> Result<String, CliError> {
    let params = experiment(config)?;
    let power = config.stats.power.ok_or(ConfigError::Missing {
        section: "stats",
        key: "power",
    })?;
    let (h0, h1) = models(config, &params)?;
    let plan = plan_sample_size(config, &h0, &h1, power)?;
    let p_zero = stats::zero_cell_mass(&h0, &h1);
    let mut value = json!({
        "experiment": params.experiment().name(),
        "h0": config.stats.h0.name(),
        "h1": config.stats.h1.name(),
        "alpha": config.stats.alpha.map(json_f64),
        "power": json_f64(power),
        "min_n0": plan.min_n0,
        "method": serde_json::to_value(plan.method).expect("method serialises"),
        "achieved_power": json_f64(plan.power),
        "zero_cell_probability": json_f64(p_zero),
    });
    if p_zero > 0.0 {
        let check = stats::min_sample_size_simulated(&h0, &h1, 0.5, power, &settings(config))?;
        value["simulated_min_n0"] = json!(check.min_n0);
    }
    Ok(pretty(&value))
}

fn matrix_dump(m: &DMatrix<Complex64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| {
                let z = m[(i, j)];
                format!("{:>8}{:+.4}i", format!("{:.4}", z.re), z.im)
            })
            .collect();
        out.push_str("  ");
        out.push_str(&row.join("  "));
        out.push('\n');
    }
    out
}

fn sectors_demo() -> Result<String, CliError> {
    let space = SectorSpace::new(vec![1, 1])?;
    let cat = StateVector::normalized(space, DVector::from_element(2, Complex64::new(1.0, 0.0)))?;
    let rho = DensityMatrix::pure(&cat);
    let mixed = sectors::superselect(&rho);
    let mut out = String::new();
    out.push_str("sector_dims = [1, 1]\n");
    out.push_str("state = (|0> + |1>) / sqrt(2), one basis vector per sector\n\n");
    out.push_str("rho = |psi><psi| (coherent superposition)\n");
    out.push_str(&matrix_dump(rho.matrix()));
    out.push_str(&format!("purity = {:.6}\n\n", sectors::purity(&rho)));
    out.push_str("superselect(rho) (incoherent mixture)\n");
    out.push_str(&matrix_dump(mixed.matrix()));
    out.push_str(&format!("purity = {:.6}\n", sectors::purity(&mixed)));
    Ok(out)
}

/// Executes one subcommand and returns the artifact text.
pub fn run(command: Command, config: &RunConfig) -> Result<String, CliError> {
    match command {
        Command::Predict => predict(config),
        Command::Simulate => simulate(config),
        Command::Fringes => fringe_command(config),
        Command::Discriminate => discriminate(config),
        Command::Plan => plan(config),
        Command::SectorsDemo => sectors_demo(),
    }
}
