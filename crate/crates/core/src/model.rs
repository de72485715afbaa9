//! Apparatus parameters, count tables, hypotheses and the exponential decay law.
//!
//! Rates and times are plain floating-point numbers; callers choose a consistent
//! unit system. Every parameter record validates its fields on construction, so
//! the rest of the crate can assume in-range values.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three quantitative experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Ground-state atoms pass a photon cavity in each interferometer arm.
    Excitation,
    /// Excited atoms may decay before, inside, or after the interferometer.
    Decay,
    /// Photons split and recombined by down/up-conversion in one arm.
    Photon,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Excitation => "excitation",
            Experiment::Decay => "decay",
            Experiment::Photon => "photon",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "excitation" => Ok(Experiment::Excitation),
            "decay" => Ok(Experiment::Decay),
            "photon" => Ok(Experiment::Photon),
            other => Err(format!(
                "unknown experiment `{other}` (expected excitation, decay or photon)"
            )),
        }
    }
}

/// Which physical law governs the particle while it is inside the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Superposition survives absorption/emission; perfect constructive interference.
    #[serde(rename = "PoS")]
    Pos,
    /// Absorption/emission collapses the particle onto a single arm.
    #[serde(rename = "CCQI")]
    Ccqi,
    /// Superposition survives but the decay rate inside the interferometer is `lambda_prime`.
    /// Only meaningful for the decay experiment.
    ModifiedRate,
}

impl Hypothesis {
    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::Pos => "PoS",
            Hypothesis::Ccqi => "CCQI",
            Hypothesis::ModifiedRate => "ModifiedRate",
        }
    }

    pub(crate) fn require_binary(self, experiment: Experiment) -> Result<()> {
        match self {
            Hypothesis::Pos | Hypothesis::Ccqi => Ok(()),
            Hypothesis::ModifiedRate => Err(Error::UnsupportedHypothesis {
                hypothesis: self,
                experiment,
            }),
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Hypothesis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "pos" => Ok(Hypothesis::Pos),
            "ccqi" => Ok(Hypothesis::Ccqi),
            "modified-rate" | "modifiedrate" => Ok(Hypothesis::ModifiedRate),
            other => Err(format!(
                "unknown hypothesis `{other}` (expected pos, ccqi or modified-rate)"
            )),
        }
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::domain(name, value, "0 <= value <= 1"))
    }
}

fn check_non_negative(name: &'static str, value: f64) -> Result<f64> {
    // NaN fails the comparison and is rejected too.
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::domain(name, value, "finite and >= 0"))
    }
}

/// Fraction of excited atoms still excited after `dt`: `exp(-lambda * dt)`.
pub fn survival_fraction(lambda: f64, dt: f64) -> Result<f64> {
    check_non_negative("lambda", lambda)?;
    check_non_negative("dt", dt)?;
    Ok((-lambda * dt).exp())
}

/// Extra flight time that mimics a source whose excited fraction is `mu`.
///
/// Returns `-ln(mu) / lambda`, so that `survival_fraction(lambda, offset) == mu`.
pub fn purity_time_offset(mu: f64, lambda: f64) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::domain("mu", mu, "0 < mu <= 1"));
    }
    check_non_negative("lambda", lambda)?;
    if mu == 1.0 {
        return Ok(0.0);
    }
    if lambda == 0.0 {
        return Err(Error::domain(
            "lambda",
            lambda,
            "lambda > 0 when mu < 1 (no finite offset exists)",
        ));
    }
    Ok(-mu.ln() / lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationParams {
    n0: u64,
    epsilon: f64,
    lambda: f64,
    t: f64,
}

impl ExcitationParams {
    /// `epsilon` is the excitation probability per cavity, `t` the cavity-to-counter time.
    pub fn new(n0: u64, epsilon: f64, lambda: f64, t: f64) -> Result<Self> {
        Ok(Self {
            n0,
            epsilon: check_probability("epsilon", epsilon)?,
            lambda: check_non_negative("lambda", lambda)?,
            t: check_non_negative("t", t)?,
        })
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Probability that an excited atom is still excited at the counter.
    pub fn survival(&self) -> f64 {
        (-self.lambda * self.t).exp()
    }

    pub fn with_n0(self, n0: u64) -> Self {
        Self { n0, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    n0: u64,
    lambda: f64,
    lambda_prime: f64,
    t1: f64,
    t2: f64,
    t3: f64,
    mu: f64,
}

impl DecayParams {
    /// Pure source (`mu = 1`) with the in-superposition rate equal to `lambda`.
    ///
    /// `t1`, `t2`, `t3` are the flight times before, inside and after the interferometer.
    pub fn new(n0: u64, lambda: f64, t1: f64, t2: f64, t3: f64) -> Result<Self> {
        let lambda = check_non_negative("lambda", lambda)?;
        Ok(Self {
            n0,
            lambda,
            lambda_prime: lambda,
            t1: check_non_negative("t1", t1)?,
            t2: check_non_negative("t2", t2)?,
            t3: check_non_negative("t3", t3)?,
            mu: 1.0,
        })
    }

    /// Decay rate used inside the interferometer by [`Hypothesis::ModifiedRate`].
    pub fn with_lambda_prime(self, lambda_prime: f64) -> Result<Self> {
        Ok(Self {
            lambda_prime: check_non_negative("lambda_prime", lambda_prime)?,
            ..self
        })
    }

    /// Fraction of atoms that leave the source excited.
    pub fn with_purity(self, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::domain("mu", mu, "0 < mu <= 1"));
        }
        Ok(Self { mu, ..self })
    }

    /// Folds the source purity into the pre-interferometer time: `t1` grows by
    /// [`purity_time_offset`] and `mu` becomes 1.
    ///
    /// Predictors and the simulator read `t1` as given, so impure sources must be
    /// folded first.
    pub fn fold_purity(self) -> Result<Self> {
        let offset = purity_time_offset(self.mu, self.lambda)?;
        Ok(Self {
            t1: self.t1 + offset,
            mu: 1.0,
            ..self
        })
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn lambda_prime(&self) -> f64 {
        self.lambda_prime
    }
    pub fn t1(&self) -> f64 {
        self.t1
    }
    pub fn t2(&self) -> f64 {
        self.t2
    }
    pub fn t3(&self) -> f64 {
        self.t3
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Total flight time `t1 + t2 + t3`.
    pub fn total_time(&self) -> f64 {
        self.t1 + self.t2 + self.t3
    }

    pub fn with_n0(self, n0: u64) -> Self {
        Self { n0, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonParams {
    n0: u64,
    d: f64,
    u: f64,
}

impl PhotonParams {
    /// `d` is the down-converted fraction, `u` the up-converted fraction of the pairs.
    pub fn new(n0: u64, d: f64, u: f64) -> Result<Self> {
        Ok(Self {
            n0,
            d: check_probability("d", d)?,
            u: check_probability("u", u)?,
        })
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn u(&self) -> f64 {
        self.u
    }

    /// Fraction of the device-arm flux that is split and recombined.
    pub fn recombined(&self) -> f64 {
        self.u * self.d
    }

    pub fn with_n0(self, n0: u64) -> Self {
        Self { n0, ..self }
    }
}

/// Parameters of exactly one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExperimentParams {
    Excitation(ExcitationParams),
    Decay(DecayParams),
    Photon(PhotonParams),
}

impl ExperimentParams {
    pub fn experiment(&self) -> Experiment {
        match self {
            ExperimentParams::Excitation(_) => Experiment::Excitation,
            ExperimentParams::Decay(_) => Experiment::Decay,
            ExperimentParams::Photon(_) => Experiment::Photon,
        }
    }

    pub fn n0(&self) -> u64 {
        match self {
            ExperimentParams::Excitation(p) => p.n0(),
            ExperimentParams::Decay(p) => p.n0(),
            ExperimentParams::Photon(p) => p.n0(),
        }
    }

    pub fn with_n0(self, n0: u64) -> Self {
        match self {
            ExperimentParams::Excitation(p) => ExperimentParams::Excitation(p.with_n0(n0)),
            ExperimentParams::Decay(p) => ExperimentParams::Decay(p.with_n0(n0)),
            ExperimentParams::Photon(p) => ExperimentParams::Photon(p.with_n0(n0)),
        }
    }
}

/// Atom tallies at the two counters.
///
/// `a`/`b` name the counter, `1` the ground state and `2` the excited state.
/// `T = f64` for predictions, `T = u64` for simulated tallies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CountTable<T> {
    pub na1: T,
    pub na2: T,
    pub nb1: T,
    pub nb2: T,
}

impl<T: Copy + Add<Output = T>> CountTable<T> {
    pub fn total(&self) -> T {
        self.na1 + self.na2 + self.nb1 + self.nb2
    }

    /// Counter b tallies, ground plus excited.
    pub fn counter_b(&self) -> T {
        self.nb1 + self.nb2
    }
}

impl<T: Copy> CountTable<T> {
    pub const LABELS: [&'static str; 4] = ["na1", "na2", "nb1", "nb2"];

    pub fn to_array(&self) -> [T; 4] {
        [self.na1, self.na2, self.nb1, self.nb2]
    }

    pub fn from_array([na1, na2, nb1, nb2]: [T; 4]) -> Self {
        Self { na1, na2, nb1, nb2 }
    }
}

/// Photon tallies at the interferometer exits plus photons deflected out of the device arm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhotonCountTable<T> {
    pub counter1: T,
    pub counter2: T,
    pub lost: T,
}

impl<T: Copy + Add<Output = T>> PhotonCountTable<T> {
    pub fn total(&self) -> T {
        self.counter1 + self.counter2 + self.lost
    }
}

impl<T: Copy> PhotonCountTable<T> {
    pub const LABELS: [&'static str; 3] = ["counter1", "counter2", "lost"];

    pub fn to_array(&self) -> [T; 3] {
        [self.counter1, self.counter2, self.lost]
    }

    pub fn from_array([counter1, counter2, lost]: [T; 3]) -> Self {
        Self {
            counter1,
            counter2,
            lost,
        }
    }
}
