//! Photographic-plate patterns for the two-site annihilation experiment.
//!
//! Two equal-amplitude point sources a distance `s` apart illuminate a screen at
//! distance `L`. Intensities are in units of a single source, so a coherent pair
//! ranges over `[0, 4]`, an incoherent pair is flat at 2 and each classical
//! calibration exposure is flat at 1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum ratio `screen_distance / source_separation` for the small-angle form.
pub const FAR_FIELD_RATIO: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeGeometry {
    source_separation: f64,
    wavelength: f64,
    screen_distance: f64,
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl FringeGeometry {
    pub fn new(
        source_separation: f64,
        wavelength: f64,
        screen_distance: f64,
        x_min: f64,
        x_max: f64,
        n_points: usize,
    ) -> Result<Self> {
        for (name, v) in [
            ("source_separation", source_separation),
            ("wavelength", wavelength),
            ("screen_distance", screen_distance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Geometry(format!(
                    "`{name}` = {v} must be finite and > 0"
                )));
            }
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::Geometry(format!(
                "screen window [{x_min}, {x_max}] must satisfy x_min < x_max"
            )));
        }
        if n_points < 2 {
            return Err(Error::Geometry(format!(
                "`n_points` = {n_points} must be >= 2"
            )));
        }
        Ok(Self {
            source_separation,
            wavelength,
            screen_distance,
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn source_separation(&self) -> f64 {
        self.source_separation
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn screen_distance(&self) -> f64 {
        self.screen_distance
    }
    pub fn window(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn is_far_field(&self) -> bool {
        self.screen_distance >= FAR_FIELD_RATIO * self.source_separation
    }

    /// Screen distance between adjacent maxima, `wavelength * L / s`.
    pub fn fringe_period(&self) -> f64 {
        self.wavelength * self.screen_distance / self.source_separation
    }

    /// Evenly spaced sample positions, both window ends included.
    pub fn positions(&self) -> Vec<f64> {
        let step = (self.x_max - self.x_min) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| {
                if i + 1 == self.n_points {
                    self.x_max
                } else {
                    self.x_min + step * i as f64
                }
            })
            .collect()
    }

    /// Half the phase difference between the two paths at screen position `x`.
    fn half_phase(&self, x: f64) -> f64 {
        PI * self.source_separation * x / (self.wavelength * self.screen_distance)
    }

    /// Coherent two-source intensity `4 cos^2(pi s x / (lambda L))` at one position.
    pub fn coherent_intensity(&self, x: f64) -> f64 {
        4.0 * self.half_phase(x).cos().powi(2)
    }

    /// Sign of d(intensity)/dx; zero at extrema.
    fn slope_sign(&self, x: f64) -> f64 {
        -(2.0 * self.half_phase(x)).sin()
    }

    fn require_far_field(&self) -> Result<()> {
        if self.is_far_field() {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "far-field condition violated: screen_distance {} < {} * source_separation {}",
                self.screen_distance, FAR_FIELD_RATIO, self.source_separation
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeProfile {
    pub positions: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl FringeProfile {
    fn from_fn(g: &FringeGeometry, f: impl Fn(f64) -> f64) -> Self {
        let positions = g.positions();
        let intensity = positions.iter().map(|&x| f(x)).collect();
        Self {
            positions,
            intensity,
        }
    }

    /// Window average by the trapezoidal rule; exact for whole fringe periods
    /// once there are more than two samples per period.
    pub fn mean_intensity(&self) -> f64 {
        let n = self.intensity.len();
        if n < 2 {
            return self.intensity.first().copied().unwrap_or(0.0);
        }
        let width = self.positions[n - 1] - self.positions[0];
        let area: f64 = self
            .positions
            .windows(2)
            .zip(self.intensity.windows(2))
            .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
            .sum();
        area / width
    }

    /// Pointwise sum of profiles sampled on the same positions.
    pub fn sum(profiles: &[FringeProfile]) -> Option<FringeProfile> {
        let first = profiles.first()?;
        let mut intensity = vec![0.0; first.intensity.len()];
        for p in profiles {
            if p.positions != first.positions {
                return None;
            }
            for (acc, v) in intensity.iter_mut().zip(&p.intensity) {
                *acc += v;
            }
        }
        Some(FringeProfile {
            positions: first.positions.clone(),
            intensity,
        })
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.intensity.iter_mut().for_each(|v| *v *= factor);
        self
    }
}

/// Pattern when the two annihilations remain in superposition.
pub fn coherent_pattern(g: &FringeGeometry) -> Result<FringeProfile> {
    g.require_far_field()?;
    Ok(FringeProfile::from_fn(g, |x| g.coherent_intensity(x)))
}

/// Pattern when annihilation suppresses superposition: the two intensities add.
pub fn incoherent_pattern(g: &FringeGeometry) -> FringeProfile {
    FringeProfile::from_fn(g, |_| 2.0)
}

/// The four classical runs with each beam splitter removed or replaced by a
/// mirror. Every run annihilates at a single site, so each exposure is one
/// flat single-source profile; together each site is exposed twice.
pub fn calibration_patterns(g: &FringeGeometry) -> [FringeProfile; 4] {
    std::array::from_fn(|_| FringeProfile::from_fn(g, |_| 1.0))
}

/// Positions of the coherent-pattern maxima inside the window, located by
/// bisection on the sign of the intensity slope.
pub fn locate_maxima(g: &FringeGeometry) -> Result<Vec<f64>> {
    g.require_far_field()?;
    let xs = g.positions();
    let mut maxima = Vec::new();
    for w in xs.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        // A maximum is a slope change from rising to falling.
        if !(g.slope_sign(lo) > 0.0 && g.slope_sign(hi) <= 0.0) {
            continue;
        }
        if g.slope_sign(hi) == 0.0 && g.coherent_intensity(hi) > 2.0 {
            maxima.push(hi);
            continue;
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g.slope_sign(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        if g.coherent_intensity(x) > 2.0 {
            maxima.push(x);
        }
    }
    // A maximum on the very first sample has no rising neighbour inside the window.
    if g.slope_sign(xs[0]) == 0.0 && g.coherent_intensity(xs[0]) > 2.0 {
        maxima.insert(0, xs[0]);
    }
    maxima.dedup();
    Ok(maxima)
}
