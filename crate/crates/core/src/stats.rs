//! Telling the hypotheses apart from count data.
//!
//! Count tables become multinomial category models. Two models are compared by
//! their log-likelihood ratio, with the null distribution obtained by exact
//! parametric simulation: the superposition models contain structural zero
//! cells (no clicks at counter b), where chi-square asymptotics do not hold.
//!
//! When the null model forbids a category that the alternative populates, a
//! single count there rejects the null outright and the required sample size
//! has the closed form `ceil(ln(1 - power) / ln(1 - p_zero))`, where `p_zero`
//! is the alternative's probability mass on the forbidden categories.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CountTable, ExperimentParams, Hypothesis, PhotonCountTable};
use crate::montecarlo::{collect_events, tally_events, SimConfig};
use crate::predict::{predict_decay, predict_excitation, predict_photon};

/// Largest sample size the planner will propose.
pub const MAX_SAMPLE_SIZE: u64 = 1_000_000_000;

/// Models whose probabilities all agree to within this are indistinguishable.
pub const DEGENERATE_TOL: f64 = 1e-12;

const NULL_STREAM: u64 = 0x6e75_6c6c;
const ALT_STREAM: u64 = 0x0061_6c74;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryLayout {
    /// `na1, na2, nb1, nb2`.
    Atom,
    /// `counter1, counter2, lost`.
    Photon,
}

impl CategoryLayout {
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            CategoryLayout::Atom => &CountTable::<u64>::LABELS,
            CategoryLayout::Photon => &PhotonCountTable::<u64>::LABELS,
        }
    }

    pub fn num_categories(self) -> usize {
        self.labels().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            CategoryLayout::Atom => "atom",
            CategoryLayout::Photon => "photon",
        }
    }
}

/// Observed integer tallies in a known category layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    layout: CategoryLayout,
    values: Vec<u64>,
}

impl Counts {
    pub fn new(layout: CategoryLayout, values: Vec<u64>) -> Result<Self> {
        if values.len() != layout.num_categories() {
            return Err(Error::DimensionMismatch {
                context: "stats: counts",
                expected: layout.num_categories(),
                found: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> CategoryLayout {
        self.layout
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn total(&self) -> u64 {
        self.values.iter().sum()
    }
}

impl From<CountTable<u64>> for Counts {
    fn from(t: CountTable<u64>) -> Self {
        Self {
            layout: CategoryLayout::Atom,
            values: t.to_array().to_vec(),
        }
    }
}

impl From<PhotonCountTable<u64>> for Counts {
    fn from(t: PhotonCountTable<u64>) -> Self {
        Self {
            layout: CategoryLayout::Photon,
            values: t.to_array().to_vec(),
        }
    }
}

/// Per-category probabilities of a single detected particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryModel {
    layout: CategoryLayout,
    probabilities: Vec<f64>,
}

impl CategoryModel {
    pub fn new(layout: CategoryLayout, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != layout.num_categories() {
            return Err(Error::DimensionMismatch {
                context: "stats: model",
                expected: layout.num_categories(),
                found: probabilities.len(),
            });
        }
        if let Some(&p) = probabilities
            .iter()
            .find(|p| !(**p >= 0.0 && p.is_finite()))
        {
            return Err(Error::domain("probability", p, "finite and >= 0"));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(
                "probability sum",
                sum,
                "equal to 1 within 1e-12",
            ));
        }
        Ok(Self {
            layout,
            probabilities,
        })
    }

    pub fn layout(&self) -> CategoryLayout {
        self.layout
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    fn max_difference(&self, other: &CategoryModel) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn same_layout(&self, other: &CategoryModel) -> Result<()> {
        if self.layout == other.layout {
            Ok(())
        } else {
            Err(Error::CategoryMismatch {
                counts: other.layout.name(),
                model: self.layout.name(),
            })
        }
    }
}

fn predicted_fractions(params: &ExperimentParams, h: Hypothesis) -> Result<Vec<f64>> {
    Ok(match params.with_n0(1) {
        ExperimentParams::Excitation(p) => predict_excitation(&p, h)?.to_array().to_vec(),
        ExperimentParams::Decay(p) => predict_decay(&p, h)?.to_array().to_vec(),
        ExperimentParams::Photon(p) => predict_photon(&p, h)?.to_array().to_vec(),
    })
}

/// Category model of a hypothesis, optionally degraded by imperfect visibility
/// and dark counts.
///
/// With `visibility = Some(v)` the table of `h` is mixed with the CCQI table
/// as `v * h + (1 - v) * CCQI`. `background` adds a per-category dark-count
/// probability (its sum at most 1) before renormalisation.
pub fn build_model(
    params: &ExperimentParams,
    h: Hypothesis,
    background: Option<&[f64]>,
    visibility: Option<f64>,
) -> Result<CategoryModel> {
    let layout = match params {
        ExperimentParams::Photon(_) => CategoryLayout::Photon,
        _ => CategoryLayout::Atom,
    };
    let mut probs = predicted_fractions(params, h)?;
    if let Some(v) = visibility {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain("visibility", v, "0 <= value <= 1"));
        }
        let collapsed = predicted_fractions(params, Hypothesis::Ccqi)?;
        for (p, c) in probs.iter_mut().zip(collapsed) {
            *p = v * *p + (1.0 - v) * c;
        }
    }
    // Closed forms can undershoot zero by a few ulps.
    for p in probs.iter_mut() {
        *p = p.max(0.0);
    }
    if let Some(bg) = background {
        if bg.len() != layout.num_categories() {
            return Err(Error::DimensionMismatch {
                context: "stats: background",
                expected: layout.num_categories(),
                found: bg.len(),
            });
        }
        if let Some(&b) = bg.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(Error::domain("background", b, "finite and >= 0"));
        }
        let total: f64 = bg.iter().sum();
        if total > 1.0 {
            return Err(Error::domain("background", total, "sum <= 1"));
        }
        for (p, b) in probs.iter_mut().zip(bg) {
            *p += b;
        }
    }
    let sum: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= sum;
    }
    CategoryModel::new(layout, probs)
}

/// `sum_k n_k ln p_k`, omitting the multinomial coefficient.
///
/// Returns `-inf` when a category with zero probability has counts.
pub fn log_likelihood(counts: &Counts, model: &CategoryModel) -> Result<f64> {
    if counts.layout != model.layout {
        return Err(Error::CategoryMismatch {
            counts: counts.layout.name(),
            model: model.layout.name(),
        });
    }
    let mut total = 0.0;
    for (&n, &p) in counts.values.iter().zip(&model.probabilities) {
        if n == 0 {
            continue;
        }
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += n as f64 * p.ln();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "favor_H0")]
    FavorH0,
    #[serde(rename = "favor_H1")]
    FavorH1,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::FavorH0 => "favor_H0",
            Decision::FavorH1 => "favor_H1",
            Decision::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationReport {
    /// `ln L(H1) - ln L(H0)`; infinite when one model forbids an observed category.
    /// Infinities serialise as the strings `"inf"` and `"-inf"`.
    #[serde(with = "extended_float")]
    pub log_likelihood_ratio: f64,
    pub p_value_h0: f64,
    pub decision: Decision,
    pub min_n0: Option<u64>,
}

mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// Replicate counts for the parametric-simulation test and the power planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestSettings {
    /// Null-distribution replicates per p-value or critical region.
    pub null_replicates: u64,
    /// Alternative replicates per power estimate.
    pub power_replicates: u64,
    pub sim: SimConfig,
}

impl Default for TestSettings {
    fn default() -> Self {
        Self {
            null_replicates: 100_000,
            power_replicates: 10_000,
            sim: SimConfig::default(),
        }
    }
}

impl TestSettings {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            sim: SimConfig::new(seed),
            ..Self::default()
        }
    }
}

/// Multinomial draw by sequential conditional binomials.
fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64], out: &mut [u64]) {
    let mut remaining = n;
    let mut mass = 1.0;
    let last = probs.len() - 1;
    for (k, &p) in probs.iter().enumerate() {
        if k == last {
            out[k] = remaining;
            break;
        }
        if remaining == 0 {
            out[k] = 0;
            continue;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = if q == 0.0 {
            0
        } else if q == 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q)
                .expect("probability clamped to [0, 1]")
                .sample(rng)
        };
        out[k] = draw;
        remaining -= draw;
        mass -= p;
    }
}

/// Likelihood-ratio statistic with the zero cells of both models made explicit.
struct RatioStatistic {
    weights: Vec<f64>,
    null_forbids: Vec<bool>,
    alt_forbids: Vec<bool>,
}

impl RatioStatistic {
    fn new(h0: &CategoryModel, h1: &CategoryModel) -> Self {
        let mut weights = Vec::new();
        let mut null_forbids = Vec::new();
        let mut alt_forbids = Vec::new();
        for (&p0, &p1) in h0.probabilities.iter().zip(&h1.probabilities) {
            null_forbids.push(p0 == 0.0);
            alt_forbids.push(p0 > 0.0 && p1 == 0.0);
            weights.push(if p0 > 0.0 && p1 > 0.0 {
                p1.ln() - p0.ln()
            } else {
                0.0
            });
        }
        Self {
            weights,
            null_forbids,
            alt_forbids,
        }
    }

    fn eval(&self, counts: &[u64]) -> f64 {
        let hits = |mask: &[bool]| counts.iter().zip(mask).any(|(&n, &m)| m && n > 0);
        if hits(&self.null_forbids) {
            return f64::INFINITY;
        }
        if hits(&self.alt_forbids) {
            return f64::NEG_INFINITY;
        }
        counts
            .iter()
            .zip(&self.weights)
            .map(|(&n, w)| n as f64 * w)
            .sum()
    }
}

fn tie_tolerance(stat: f64) -> f64 {
    1e-9 * stat.abs().max(1.0)
}

/// Sorted null distribution of the statistic at sample size `n`.
fn null_distribution(
    stat: &RatioStatistic,
    h0: &CategoryModel,
    n: u64,
    settings: &TestSettings,
) -> Vec<f64> {
    let probs = &h0.probabilities;
    let mut values = collect_events(
        settings.null_replicates,
        &settings.sim.derive(NULL_STREAM),
        |rng| {
            let mut buf = [0u64; 4];
            let buf = &mut buf[..probs.len()];
            sample_multinomial(rng, n, probs, buf);
            stat.eval(buf)
        },
    );
    values.sort_by(f64::total_cmp);
    values
}

/// Parametric-simulation p-value `(1 + #{null >= observed}) / (R + 1)`.
fn p_value(sorted_null: &[f64], observed: f64) -> f64 {
    let threshold = observed - tie_tolerance(observed);
    let below = sorted_null.partition_point(|&v| v < threshold);
    let exceed = sorted_null.len() - below;
    (1 + exceed) as f64 / (sorted_null.len() + 1) as f64
}

fn check_unit_open(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "0 < value < 1"))
    }
}

fn check_distinct(h0: &CategoryModel, h1: &CategoryModel) -> Result<()> {
    h0.same_layout(h1)?;
    let max_difference = h0.max_difference(h1);
    if max_difference <= DEGENERATE_TOL {
        return Err(Error::DegenerateComparison { max_difference });
    }
    Ok(())
}

/// Likelihood-ratio test of `h0` against `h1` at significance `alpha`.
///
/// A count in a category `h0` forbids rejects it with `p = 0`. Otherwise the
/// p-value comes from `settings.null_replicates` multinomial draws under `h0`.
/// `min_n0` is left empty; see [`min_sample_size`].
pub fn discriminate(
    counts: &Counts,
    h0: &CategoryModel,
    h1: &CategoryModel,
    alpha: f64,
    settings: &TestSettings,
) -> Result<DiscriminationReport> {
    check_unit_open("alpha", alpha)?;
    check_distinct(h0, h1)?;
    let ll0 = log_likelihood(counts, h0)?;
    let ll1 = log_likelihood(counts, h1)?;
    if ll0 == f64::NEG_INFINITY && ll1 == f64::NEG_INFINITY {
        return Err(Error::ImpossibleCounts);
    }
    let log_likelihood_ratio = ll1 - ll0;
    let p_value_h0 = if ll0 == f64::NEG_INFINITY {
        0.0
    } else if ll1 == f64::NEG_INFINITY {
        1.0
    } else {
        let stat = RatioStatistic::new(h0, h1);
        let null = null_distribution(&stat, h0, counts.total(), settings);
        p_value(&null, stat.eval(&counts.values))
    };
    let decision = if p_value_h0 < alpha {
        Decision::FavorH1
    } else if log_likelihood_ratio <= 0.0 {
        Decision::FavorH0
    } else {
        Decision::Inconclusive
    };
    Ok(DiscriminationReport {
        log_likelihood_ratio,
        p_value_h0,
        decision,
        min_n0: None,
    })
}

/// Probability mass `h1` places on categories `h0` forbids.
pub fn zero_cell_mass(h0: &CategoryModel, h1: &CategoryModel) -> f64 {
    h0.probabilities
        .iter()
        .zip(&h1.probabilities)
        .filter(|(p0, _)| **p0 == 0.0)
        .map(|(_, p1)| p1)
        .sum()
}

/// Fraction of `h1` data sets of size `n0` for which [`discriminate`] rejects `h0`.
pub fn rejection_rate(
    h0: &CategoryModel,
    h1: &CategoryModel,
    alpha: f64,
    n0: u64,
    settings: &TestSettings,
) -> Result<f64> {
    check_unit_open("alpha", alpha)?;
    check_distinct(h0, h1)?;
    let stat = RatioStatistic::new(h0, h1);
    let null = null_distribution(&stat, h0, n0, settings);
    let probs = &h1.probabilities;
    let [kept, rejected] = tally_events::<2, _>(
        settings.power_replicates,
        &settings.sim.derive(ALT_STREAM),
        |rng| {
            let mut buf = [0u64; 4];
            let buf = &mut buf[..probs.len()];
            sample_multinomial(rng, n0, probs, buf);
            let s = stat.eval(buf);
            usize::from(s == f64::INFINITY || p_value(&null, s) < alpha)
        },
    );
    Ok(rejected as f64 / (kept + rejected) as f64)
}

/// Fraction of `h1` data sets of size `n0` with at least one count in a
/// category `h0` forbids.
pub fn zero_cell_detection_rate(
    h0: &CategoryModel,
    h1: &CategoryModel,
    n0: u64,
    settings: &TestSettings,
) -> Result<f64> {
    h0.same_layout(h1)?;
    let forbidden: Vec<bool> = h0.probabilities.iter().map(|&p| p == 0.0).collect();
    let probs = &h1.probabilities;
    let [missed, detected] = tally_events::<2, _>(
        settings.power_replicates,
        &settings.sim.derive(ALT_STREAM),
        |rng| {
            let mut buf = [0u64; 4];
            let buf = &mut buf[..probs.len()];
            sample_multinomial(rng, n0, probs, buf);
            usize::from(buf.iter().zip(&forbidden).any(|(&n, &f)| f && n > 0))
        },
    );
    Ok(detected as f64 / (missed + detected) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMethod {
    ClosedForm,
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan {
    pub min_n0: u64,
    pub method: PlanMethod,
    /// Power at `min_n0`: exact for the closed form, estimated otherwise.
    pub power: f64,
}

/// Smallest `n` with `1 - (1 - p_zero)^n >= power`.
pub fn zero_cell_sample_size(p_zero: f64, power: f64) -> Result<u64> {
    check_unit_open("power", power)?;
    if !(p_zero > 0.0 && p_zero <= 1.0) {
        return Err(Error::domain("p_zero", p_zero, "0 < value <= 1"));
    }
    let detect = |n: u64| 1.0 - (n as f64 * (-p_zero).ln_1p()).exp();
    let estimate = ((1.0 - power).ln() / (-p_zero).ln_1p()).ceil();
    if estimate.is_nan() || estimate > MAX_SAMPLE_SIZE as f64 {
        return Err(Error::ResourceLimit {
            cap: MAX_SAMPLE_SIZE,
        });
    }
    // Guard against rounding at exact integer boundaries.
    let mut n = (estimate as u64).max(1);
    while n > 1 && detect(n - 1) >= power {
        n -= 1;
    }
    while detect(n) < power {
        n += 1;
    }
    if n > MAX_SAMPLE_SIZE {
        return Err(Error::ResourceLimit {
            cap: MAX_SAMPLE_SIZE,
        });
    }
    Ok(n)
}

/// Doubling then bisection for the smallest `n` whose estimated power reaches `target`.
fn search_sample_size(
    target: f64,
    mut power_at: impl FnMut(u64) -> Result<f64>,
) -> Result<(u64, f64)> {
    let mut lo = 0u64;
    let mut hi = 1u64;
    let mut hi_power = power_at(hi)?;
    while hi_power < target {
        if hi == MAX_SAMPLE_SIZE {
            return Err(Error::ResourceLimit {
                cap: MAX_SAMPLE_SIZE,
            });
        }
        lo = hi;
        hi = (hi * 2).min(MAX_SAMPLE_SIZE);
        hi_power = power_at(hi)?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = power_at(mid)?;
        if p >= target {
            hi = mid;
            hi_power = p;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_power))
}

fn check_plan_inputs(
    h0: &CategoryModel,
    h1: &CategoryModel,
    alpha: f64,
    power: f64,
    settings: &TestSettings,
) -> Result<()> {
    check_unit_open("alpha", alpha)?;
    check_unit_open("power", power)?;
    check_distinct(h0, h1)?;
    if settings.power_replicates == 0 {
        return Err(Error::domain("power_replicates", 0.0, ">= 1"));
    }
    Ok(())
}

/// Smallest `n0` at which the test rejects `h0` with probability at least
/// `power` when data follow `h1`.
///
/// Zero-cell designs (the null forbids a category the alternative populates)
/// use the closed form, with detection meaning at least one forbidden count;
/// `alpha` then plays no role. Otherwise power is estimated by simulation.
pub fn min_sample_size(
    h0: &CategoryModel,
    h1: &CategoryModel,
    alpha: f64,
    power: f64,
    settings: &TestSettings,
) -> Result<SampleSizePlan> {
    check_plan_inputs(h0, h1, alpha, power, settings)?;
    let p_zero = zero_cell_mass(h0, h1);
    if p_zero > 0.0 {
        let min_n0 = zero_cell_sample_size(p_zero, power)?;
        return Ok(SampleSizePlan {
            min_n0,
            method: PlanMethod::ClosedForm,
            power: 1.0 - (min_n0 as f64 * (-p_zero).ln_1p()).exp(),
        });
    }
    likelihood_ratio_plan(h0, h1, alpha, power, settings)
}

/// Like [`min_sample_size`] but always by Monte Carlo power estimation; for
/// zero-cell designs this cross-checks the closed form.
pub fn min_sample_size_simulated(
    h0: &CategoryModel,
    h1: &CategoryModel,
    alpha: f64,
    power: f64,
    settings: &TestSettings,
) -> Result<SampleSizePlan> {
    check_plan_inputs(h0, h1, alpha, power, settings)?;
    if zero_cell_mass(h0, h1) > 0.0 {
        let (min_n0, achieved) =
            search_sample_size(power, |n| zero_cell_detection_rate(h0, h1, n, settings))?;
        return Ok(SampleSizePlan {
            min_n0,
            method: PlanMethod::Simulation,
            power: achieved,
        });
    }
    likelihood_ratio_plan(h0, h1, alpha, power, settings)
}

fn likelihood_ratio_plan(
    h0: &CategoryModel,
    h1: &CategoryModel,
    alpha: f64,
    power: f64,
    settings: &TestSettings,
) -> Result<SampleSizePlan> {
    // The smallest attainable p-value is 1 / (R + 1).
    if alpha * (settings.null_replicates + 1) as f64 <= 1.0 {
        return Err(Error::domain(
            "alpha",
            alpha,
            "alpha * (null_replicates + 1) > 1 so that rejection is attainable",
        ));
    }
    let (min_n0, achieved) =
        search_sample_size(power, |n| rejection_rate(h0, h1, alpha, n, settings))?;
    Ok(SampleSizePlan {
        min_n0,
        method: PlanMethod::Simulation,
        power: achieved,
    })
}
