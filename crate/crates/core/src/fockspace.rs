//! Truncated Fock-space and qubit operator algebra.
//!
//! Composite spaces are always ordered (qubit, oscillator A, oscillator B),
//! and the flat index of a product basis state is row-major in that order,
//! matching `nalgebra`'s Kronecker product.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;

/// Truncation used for states built from an amplitude `alpha`.
///
/// `ceil(|α|² + 6|α| + 10)` keeps the coherent tail below ~1e-10.
pub fn default_truncation(alpha_abs: f64) -> usize {
    (alpha_abs * alpha_abs + 6.0 * alpha_abs + 10.0).ceil() as usize
}

/// Returns `true` when `dim` is large enough for a coherent-class state of
/// amplitude `alpha_abs`.
pub fn truncation_adequate(alpha_abs: f64, dim: usize) -> bool {
    alpha_abs * alpha_abs + 6.0 * alpha_abs + 10.0 <= dim as f64
}

/// Dense square operator on a (possibly composite) truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dims: Vec<usize>,
    entries: DMatrix<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wraps a dense matrix. `dims` must multiply to the matrix size.
    pub fn new(dims: Vec<usize>, entries: DMatrix<C64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidDimension { dim: entries.nrows(), reason: "operator must be square" });
        }
        let dim = entries.nrows();
        if dim == 0 {
            return Err(Error::InvalidDimension { dim, reason: "operator dimension must be at least 1" });
        }
        let total: usize = dims.iter().product();
        if dims.is_empty() || total != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: total });
        }
        let hermitian = max_antihermitian_part(&entries) < HERMITIAN_TOL;
        Ok(Self { dims, entries, hermitian })
    }

    /// Single-subsystem operator.
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        let dim = entries.nrows();
        Self::new(vec![dim], entries)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension { dim, reason: "identity needs dim >= 1" });
        }
        Self::from_matrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let dim = dims.iter().product();
        Self::new(dims, DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    /// Set when `max |M − M†| < 1e-12`.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        self.with_entries(self.entries.adjoint())
    }

    pub fn scale(&self, factor: C64) -> Self {
        self.with_entries(&self.entries * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.with_entries(&self.entries * &other.entries - &other.entries * &self.entries)
    }

    /// Matrix-vector product on raw amplitudes.
    pub fn apply(&self, amplitudes: &DVector<C64>) -> Result<DVector<C64>> {
        if amplitudes.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: amplitudes.len() });
        }
        Ok(&self.entries * amplitudes)
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    fn with_entries(&self, entries: DMatrix<C64>) -> Self {
        let hermitian = max_antihermitian_part(&entries) < HERMITIAN_TOL;
        Self { dims: self.dims.clone(), entries, hermitian }
    }
}

fn max_antihermitian_part(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending. The matrix is symmetrised first.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        self.with_entries(&self.entries + &rhs.entries)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        self.with_entries(&self.entries - &rhs.entries)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        self.with_entries(&self.entries * &rhs.entries)
    }
}

/// Ladder operator with `M[n−1, n] = √n`.
pub fn annihilation_op(dim: usize) -> Result<OperatorMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, reason: "annihilation operator needs dim >= 2" });
    }
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    OperatorMatrix::from_matrix(m)
}

pub fn creation_op(dim: usize) -> Result<OperatorMatrix> {
    Ok(annihilation_op(dim)?.adjoint())
}

/// `diag(0, 1, …, dim−1)`.
pub fn number_op(dim: usize) -> Result<OperatorMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension { dim, reason: "number operator needs dim >= 1" });
    }
    let diag = DVector::from_iterator(dim, (0..dim).map(|n| C64::new(n as f64, 0.0)));
    OperatorMatrix::from_matrix(DMatrix::from_diagonal(&diag))
}

/// `(σx, σz)`; σz = diag(+1, −1) with +1 on the first charge state.
pub fn pauli_ops() -> (OperatorMatrix, OperatorMatrix) {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let sx = DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]);
    let sz = DMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]);
    (
        OperatorMatrix::from_matrix(sx).expect("2x2"),
        OperatorMatrix::from_matrix(sz).expect("2x2"),
    )
}

pub fn sigma_y() -> OperatorMatrix {
    let i = C64::new(0.0, 1.0);
    let zero = C64::new(0.0, 0.0);
    OperatorMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[zero, -i, i, zero])).expect("2x2")
}

/// Kronecker product `A ⊗ B`; subsystem dims are concatenated.
pub fn tensor(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    let entries = a.entries.kronecker(&b.entries);
    OperatorMatrix { dims, hermitian: a.hermitian && b.hermitian, entries }
}

/// Tensor product of a list of factors, left to right.
pub fn tensor_all(factors: &[&OperatorMatrix]) -> OperatorMatrix {
    let (first, rest) = factors.split_first().expect("at least one factor");
    rest.iter().fold((*first).clone(), |acc, f| tensor(&acc, f))
}

/// Normalized pure state over a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails on a (near) zero vector.
    pub fn new(dims: Vec<usize>, amplitudes: DVector<C64>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || total != amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: total, found: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { dims, amplitudes: amplitudes.unscale(norm) })
    }

    /// Single-mode state from raw coefficients, normalized.
    pub fn single_mode(amplitudes: Vec<C64>) -> Result<Self> {
        let dim = amplitudes.len();
        Self::new(vec![dim], DVector::from_vec(amplitudes))
    }

    /// Accepts already-normalized amplitudes, checking the norm within 1e-10.
    pub fn from_normalized(dims: Vec<usize>, amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        let total: usize = dims.iter().product();
        if dims.is_empty() || total != amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: total, found: amplitudes.len() });
        }
        Ok(Self { dims, amplitudes })
    }

    /// Basis state `|index⟩` in a space with the given dims.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let total: usize = dims.iter().product();
        if index >= total {
            return Err(Error::InvalidDimension { dim: total, reason: "basis index out of range" });
        }
        let mut amps = DVector::zeros(total);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { dims, amplitudes: amps })
    }

    /// Qubit charge state `|+z⟩`.
    pub fn plus_z() -> Self {
        Self::basis(vec![2], 0).expect("2-dim basis")
    }

    /// Qubit `|+x⟩ = (|+z⟩ + |−z⟩)/√2`.
    pub fn plus_x() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { dims: vec![2], amplitudes: DVector::from_vec(vec![h, h]) }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn to_vec(&self) -> Vec<C64> {
        self.amplitudes.iter().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap_sqr(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// `|self⟩ ⊗ |other⟩`.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, amplitudes: self.amplitudes.kronecker(&other.amplitudes) }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// Hermitian, unit-trace state matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Checks Hermiticity (1e-10) and unit trace (1e-8).
    ///
    /// Positivity is checked separately by [`DensityMatrix::validate`], which
    /// needs an eigen-decomposition.
    pub fn new(dims: Vec<usize>, entries: DMatrix<C64>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if !entries.is_square() || dims.is_empty() || entries.nrows() != total {
            return Err(Error::DimensionMismatch { expected: total, found: entries.nrows() });
        }
        if max_antihermitian_part(&entries) > 1e-10 {
            return Err(Error::invalid("rho", "density matrix is not Hermitian"));
        }
        let tr = entries.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(Error::invalid("rho", format!("trace {tr} differs from 1")));
        }
        Ok(Self { dims, entries })
    }

    pub(crate) fn from_raw(dims: Vec<usize>, entries: DMatrix<C64>) -> Self {
        Self { dims, entries }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let a = &state.amplitudes;
        Self { dims: state.dims.clone(), entries: a * a.adjoint() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries)[0]
    }

    /// Full invariant check including `min eigenvalue ≥ −1e-8`.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.dims.clone(), self.entries.clone())?;
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::invalid("rho", format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }
}

/// Either a pure or a mixed state.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn dims(&self) -> &[usize] {
        match self {
            QuantumState::Pure(s) => s.dims(),
            QuantumState::Mixed(r) => r.dims(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(s) => s.to_density(),
            QuantumState::Mixed(r) => r.clone(),
        }
    }

    /// Diagonal of the state in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            QuantumState::Pure(s) => s.probabilities(),
            QuantumState::Mixed(r) => r.diagonal(),
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            QuantumState::Pure(_) => 1.0,
            QuantumState::Mixed(r) => r.purity(),
        }
    }
}

impl From<StateVector> for QuantumState {
    fn from(s: StateVector) -> Self {
        QuantumState::Pure(s)
    }
}

impl From<DensityMatrix> for QuantumState {
    fn from(r: DensityMatrix) -> Self {
        QuantumState::Mixed(r)
    }
}

impl Expectation for QuantumState {
    fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        match self {
            QuantumState::Pure(s) => s.expectation(op),
            QuantumState::Mixed(r) => r.expectation(op),
        }
    }
}

/// States that can be measured against an operator.
pub trait Expectation {
    /// `⟨ψ|M|ψ⟩` or `Tr(ρM)`.
    fn expectation(&self, op: &OperatorMatrix) -> Result<C64>;
}

impl Expectation for StateVector {
    fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        let applied = op.apply(&self.amplitudes)?;
        Ok(self.amplitudes.dotc(&applied))
    }
}

impl Expectation for DensityMatrix {
    fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.dim() });
        }
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.entries[(i, j)] * op.entries[(j, i)];
            }
        }
        Ok(acc)
    }
}

pub fn expectation<S: Expectation + ?Sized>(state: &S, op: &OperatorMatrix) -> Result<C64> {
    state.expectation(op)
}

/// `⟨M²⟩ − ⟨M⟩²` for a Hermitian observable.
pub fn variance<S: Expectation + ?Sized>(state: &S, op: &OperatorMatrix) -> Result<f64> {
    let mean = state.expectation(op)?.re;
    let sq = state.expectation(&(op * op))?.re;
    Ok(sq - mean * mean)
}
