//! Fixed inputs shared by the benchmarks.

use ccqi_core::sectors::{DensityMatrix, SectorSpace, StateVector};
use ccqi_core::{DecayParams, ExcitationParams, PhotonParams};
use nalgebra::DVector;
use num_complex::Complex64;

pub fn excitation(n0: u64) -> ExcitationParams {
    ExcitationParams::new(n0, 0.2, 1.0, std::f64::consts::LN_2).expect("valid fixture")
}

pub fn decay(n0: u64) -> DecayParams {
    DecayParams::new(n0, 1.0, 0.5, 0.3, 0.2).expect("valid fixture")
}

pub fn photon(n0: u64) -> PhotonParams {
    PhotonParams::new(n0, 0.9, 0.8).expect("valid fixture")
}

/// Pure state spread evenly over `sectors` sectors of dimension `dim` each.
pub fn spread_state(sectors: usize, dim: usize) -> DensityMatrix {
    let space = SectorSpace::new(vec![dim; sectors]).expect("valid fixture");
    let n = sectors * dim;
    let amplitudes = DVector::from_fn(n, |i, _| Complex64::new(1.0 + i as f64, 0.5 * i as f64));
    let psi = StateVector::normalized(space, amplitudes).expect("non-zero amplitudes");
    DensityMatrix::pure(&psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid() {
        assert_eq!(excitation(10).n0(), 10);
        assert_eq!(decay(10).n0(), 10);
        assert_eq!(photon(10).n0(), 10);
        assert!((spread_state(4, 4).trace().re - 1.0).abs() < 1e-12);
    }
}
