//! Finite-dimensional superselection-sector algebra.
//!
//! A [`SectorSpace`] is an orthogonal sum of sectors `H_0 (+) H_1 (+) ...`, laid
//! out as consecutive basis blocks. Physical observables must be block diagonal
//! in this grading. Consequently, cross-sector coherences in a density matrix
//! cannot be observed, and [`superselect`] removes them without changing any
//! physical expectation value.
//!
//! Sector labels are abstract indices. Dense matrices are used throughout;
//! tolerances are calibrated for spaces up to dimension 64.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for Hermiticity, block structure and normalisation.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Lowest eigenvalue accepted as positive semidefinite.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorSpace {
    sector_dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl SectorSpace {
    pub fn new(sector_dims: Vec<usize>) -> Result<Self> {
        if sector_dims.is_empty() {
            return Err(Error::Sector("a space needs at least one sector".into()));
        }
        if let Some(i) = sector_dims.iter().position(|&d| d == 0) {
            return Err(Error::Sector(format!("sector {i} has dimension 0")));
        }
        let mut offsets = Vec::with_capacity(sector_dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &sector_dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(Self {
            sector_dims,
            offsets,
        })
    }

    pub fn sector_dims(&self) -> &[usize] {
        &self.sector_dims
    }

    pub fn num_sectors(&self) -> usize {
        self.sector_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Basis indices spanned by sector `sector`.
    pub fn sector_range(&self, sector: usize) -> Range<usize> {
        self.offsets[sector]..self.offsets[sector + 1]
    }

    /// Sector containing basis index `index`.
    pub fn sector_of(&self, index: usize) -> usize {
        self.offsets.partition_point(|&o| o <= index) - 1
    }

    /// The superselecting observable, `diag(label of each basis vector)`.
    pub fn label_operator(&self) -> DMatrix<Complex64> {
        let n = self.total_dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(self.sector_of(i) as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    fn check_square(&self, context: &'static str, m: &DMatrix<Complex64>) -> Result<()> {
        let n = self.total_dim();
        for found in [m.nrows(), m.ncols()] {
            if found != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    found,
                });
            }
        }
        Ok(())
    }
}

fn is_hermitian(m: &DMatrix<Complex64>, tol: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (i..n).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
}

/// Largest entry magnitude in blocks coupling distinct sectors.
fn max_cross_sector(space: &SectorSpace, m: &DMatrix<Complex64>) -> f64 {
    let n = space.total_dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let si = space.sector_of(i);
        for j in 0..n {
            if space.sector_of(j) != si {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// A Hermitian operator on a graded space. Whether it respects the grading is
/// checked separately by [`is_valid_observable`].
#[derive(Debug, Clone, PartialEq)]
pub struct SectorObservable {
    space: SectorSpace,
    matrix: DMatrix<Complex64>,
}

impl SectorObservable {
    pub fn new(space: SectorSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        space.check_square("sectors: observable", &matrix)?;
        if !is_hermitian(&matrix, STRUCTURE_TOL) {
            return Err(Error::Sector("observable is not Hermitian".into()));
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: SectorSpace) -> Self {
        let n = space.total_dim();
        Self {
            space,
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn space(&self) -> &SectorSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Image `A |psi>`.
    pub fn apply(&self, psi: &StateVector) -> Result<DVector<Complex64>> {
        if psi.space != self.space {
            return Err(Error::Sector(
                "state and observable live on different spaces".into(),
            ));
        }
        Ok(&self.matrix * &psi.amplitudes)
    }
}

/// True iff the observable does not couple distinct sectors, i.e. it commutes
/// with the sector label operator.
pub fn is_valid_observable(a: &SectorObservable) -> bool {
    max_cross_sector(&a.space, &a.matrix) <= STRUCTURE_TOL
}

/// Normalised pure state. Cross-sector superpositions are allowed here: they are
/// legal vectors, just unobservable as coherent superpositions.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: SectorSpace,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn new(space: SectorSpace, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                context: "sectors: state",
                expected: space.total_dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STRUCTURE_TOL {
            return Err(Error::Sector(format!("state norm {norm} is not 1")));
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalises `amplitudes` before construction.
    pub fn normalized(space: SectorSpace, amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Sector("cannot normalise a zero vector".into()));
        }
        Self::new(space, amplitudes.unscale(norm))
    }

    pub fn basis(space: SectorSpace, index: usize) -> Result<Self> {
        let n = space.total_dim();
        if index >= n {
            return Err(Error::DimensionMismatch {
                context: "sectors: basis index",
                expected: n,
                found: index,
            });
        }
        let mut v = DVector::zeros(n);
        v[index] = Complex64::new(1.0, 0.0);
        Self::new(space, v)
    }

    pub fn space(&self) -> &SectorSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    /// The single sector carrying all the weight, if there is one.
    pub fn support_sector(&self) -> Option<usize> {
        (0..self.space.num_sectors()).find(|&s| {
            let inside = self.space.sector_range(s);
            self.amplitudes
                .iter()
                .enumerate()
                .all(|(i, a)| inside.contains(&i) || a.norm() <= STRUCTURE_TOL)
        })
    }
}

/// `<psi| A |phi>` for states in two distinct sectors.
///
/// For a valid observable this vanishes: observables cannot connect sectors.
pub fn sector_matrix_element(
    a: &SectorObservable,
    psi: &StateVector,
    phi: &StateVector,
) -> Result<Complex64> {
    if !is_valid_observable(a) {
        return Err(Error::Sector(
            "observable couples distinct superselection sectors".into(),
        ));
    }
    if psi.space != a.space || phi.space != a.space {
        return Err(Error::Sector(
            "states and observable live on different spaces".into(),
        ));
    }
    let (Some(left), Some(right)) = (psi.support_sector(), phi.support_sector()) else {
        return Err(Error::Sector(
            "state is not supported in a single sector".into(),
        ));
    };
    if left == right {
        return Err(Error::Sector(format!(
            "both states lie in sector {left}; a cross-sector pair is required"
        )));
    }
    Ok(psi.amplitudes.dotc(&(&a.matrix * &phi.amplitudes)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: SectorSpace,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positive semidefiniteness.
    pub fn new(space: SectorSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        space.check_square("sectors: density matrix", &matrix)?;
        if !is_hermitian(&matrix, STRUCTURE_TOL) {
            return Err(Error::Sector("density matrix is not Hermitian".into()));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > STRUCTURE_TOL || trace.im.abs() > STRUCTURE_TOL {
            return Err(Error::Sector(format!(
                "density matrix trace {trace} is not 1"
            )));
        }
        let lowest = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if lowest < -EIGEN_TOL {
            return Err(Error::Sector(format!(
                "density matrix has negative eigenvalue {lowest:e}"
            )));
        }
        Ok(Self { space, matrix })
    }

    /// `|psi><psi|`.
    pub fn pure(psi: &StateVector) -> Self {
        let a = &psi.amplitudes;
        Self {
            space: psi.space.clone(),
            matrix: a * a.adjoint(),
        }
    }

    /// `sum_i p_i |psi_i><psi_i|`; weights must be non-negative and sum to 1.
    pub fn mixture(components: &[(f64, StateVector)]) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::Sector("an ensemble needs at least one state".into()));
        };
        let space = first.space.clone();
        let n = space.total_dim();
        let mut matrix = DMatrix::zeros(n, n);
        let mut total = 0.0;
        for (p, psi) in components {
            if *p < 0.0 || psi.space != space {
                return Err(Error::Sector(
                    "ensemble weights must be >= 0 and states share one space".into(),
                ));
            }
            total += p;
            matrix += Self::pure(psi).matrix * Complex64::new(*p, 0.0);
        }
        if (total - 1.0).abs() > STRUCTURE_TOL {
            return Err(Error::Sector(format!(
                "ensemble weights sum to {total}, not 1"
            )));
        }
        Self::new(space, matrix)
    }

    /// `I / n`.
    pub fn maximally_mixed(space: SectorSpace) -> Self {
        let n = space.total_dim();
        let matrix = DMatrix::identity(n, n) * Complex64::new(1.0 / n as f64, 0.0);
        Self { space, matrix }
    }

    pub fn space(&self) -> &SectorSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// True when no coherence connects distinct sectors.
    pub fn is_block_diagonal(&self) -> bool {
        max_cross_sector(&self.space, &self.matrix) <= STRUCTURE_TOL
    }

    /// `tr(A rho)`.
    pub fn expectation(&self, a: &SectorObservable) -> Result<Complex64> {
        if a.space != self.space {
            return Err(Error::Sector(
                "state and observable live on different spaces".into(),
            ));
        }
        Ok((&a.matrix * &self.matrix).trace())
    }
}

/// Drops every coherence between distinct sectors, turning a cross-sector
/// superposition into the corresponding incoherent mixture.
pub fn superselect(rho: &DensityMatrix) -> DensityMatrix {
    let space = &rho.space;
    let n = space.total_dim();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if space.sector_of(i) == space.sector_of(j) {
            rho.matrix[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    DensityMatrix {
        space: space.clone(),
        matrix,
    }
}

/// `tr(rho^2)`: 1 for pure states, `1/n` for the maximal mixture.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // For Hermitian rho, tr(rho^2) = sum |rho_ij|^2.
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}
