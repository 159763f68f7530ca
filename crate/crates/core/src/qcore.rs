//! Complex linear-algebra substrate for the five-level dot.
//!
//! The basis order is fixed everywhere: `|0>`, `|1>` (heavy-hole spin down/up),
//! `|a>` (ancillary light-hole level), `|e1>`, `|e2>` (electron states).

use nalgebra::{Matrix2, Matrix5, SMatrix, SymmetricEigen, Vector2, Vector5};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Op5 = Matrix5<C64>;
pub type Ket5 = Vector5<C64>;
pub type Op2 = Matrix2<C64>;
pub type Ket2 = Vector2<C64>;

pub const DIM: usize = 5;

/// Basis indices.
pub mod basis {
    pub const ZERO: usize = 0;
    pub const ONE: usize = 1;
    pub const ANC: usize = 2;
    pub const E1: usize = 3;
    pub const E2: usize = 4;
}

pub const NORM_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
pub const EIGEN_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest absolute entry.
pub fn max_abs<const R: usize, const C: usize>(m: &SMatrix<C64, R, C>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_deviation(m: &Op5) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &Op5) -> [f64; DIM] {
    let h = (m + m.adjoint()) * cr(0.5);
    let eig = SymmetricEigen::new(h);
    let mut out = [0.0; DIM];
    for (o, v) in out.iter_mut().zip(eig.eigenvalues.iter()) {
        *o = *v;
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Pure state of the five-level system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateVector(Ket5);

impl StateVector {
    /// Wraps raw amplitudes without normalizing.
    pub fn from_amplitudes(amps: [C64; DIM]) -> Self {
        Self(Ket5::from_column_slice(&amps))
    }

    pub fn from_ket(k: Ket5) -> Self {
        Self(k)
    }

    pub fn basis(i: usize) -> Self {
        let mut k = Ket5::zeros();
        k[i] = cr(1.0);
        Self(k)
    }

    pub fn ket(&self) -> &Ket5 {
        &self.0
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.0[i]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    /// `|<self|other>|^2`
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn populations(&self) -> [f64; DIM] {
        std::array::from_fn(|i| self.0[i].norm_sqr())
    }

    pub fn normalize(&self) -> Result<StateVector> {
        normalize(self)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(self.0 * self.0.adjoint())
    }
}

pub fn normalize(s: &StateVector) -> Result<StateVector> {
    let n = s.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateState);
    }
    Ok(StateVector(s.0 / cr(n)))
}

/// Places a qubit state `alpha|0> + beta|1>` into the five-level space.
pub fn embed_qubit(alpha: C64, beta: C64) -> Result<StateVector> {
    let norm_sq = alpha.norm_sqr() + beta.norm_sqr();
    if (norm_sq - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sq });
    }
    Ok(StateVector::from_amplitudes([alpha, beta, cr(0.0), cr(0.0), cr(0.0)]))
}

/// Five-level density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Op5);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: Op5) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let herm = hermiticity_deviation(&m);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("hermiticity deviation {herm:e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min_eig = hermitian_eigenvalues(&m)[0];
        if min_eig < -EIGEN_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self(m))
    }

    /// No validation; used for intermediate integrator states.
    pub fn from_matrix_unchecked(m: Op5) -> Self {
        Self(m)
    }

    pub fn pure(s: &StateVector) -> Self {
        s.to_density()
    }

    /// Diagonal (incoherent) mixture; `pops` must sum to one.
    pub fn diagonal(pops: [f64; DIM]) -> Result<Self> {
        let mut m = Op5::zeros();
        for (i, p) in pops.iter().enumerate() {
            m[(i, i)] = cr(*p);
        }
        Self::new(m)
    }

    /// Embeds a 2x2 qubit density block.
    pub fn from_qubit_block(block: &Op2) -> Result<Self> {
        let mut m = Op5::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(block);
        Self::new(m)
    }

    pub fn matrix(&self) -> &Op5 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn population(&self, i: usize) -> f64 {
        self.0[(i, i)].re
    }

    pub fn populations(&self) -> [f64; DIM] {
        std::array::from_fn(|i| self.0[(i, i)].re)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.0)[0]
    }

    /// `<psi|rho|psi>`
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        psi.ket().dotc(&(self.0 * psi.ket())).re
    }
}

/// Qubit block of `rho` (not renormalized) and the population outside it.
pub fn project_qubit(rho: &DensityMatrix) -> (Op2, f64) {
    let block: Op2 = rho.matrix().fixed_view::<2, 2>(0, 0).into_owned();
    let leakage = 1.0 - (block[(0, 0)].re + block[(1, 1)].re);
    (block, leakage)
}

/// Unitary on span{|0>, |1>}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitGate(Op2);

impl QubitGate {
    pub fn new(m: Op2) -> Result<Self> {
        let deviation = unitarity_deviation(&m);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Op2) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Op2::identity())
    }

    pub fn matrix(&self) -> &Op2 {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self * rhs` (rhs acts first).
    pub fn then_after(&self, rhs: &QubitGate) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn apply(&self, v: &Ket2) -> Ket2 {
        self.0 * v
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.0)
    }

    /// Max elementwise distance after removing the best global phase.
    pub fn distance_up_to_phase(&self, other: &QubitGate) -> f64 {
        let tr = (self.0.adjoint() * other.0).trace();
        let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { cr(1.0) };
        max_abs(&(self.0 * phase - other.0))
    }
}

pub fn unitarity_deviation<const D: usize>(m: &SMatrix<C64, D, D>) -> f64 {
    max_abs(&(m.adjoint() * m - SMatrix::<C64, D, D>::identity()))
}

pub fn pauli_x() -> Op2 {
    Op2::new(cr(0.0), cr(1.0), cr(1.0), cr(0.0))
}

pub fn pauli_y() -> Op2 {
    Op2::new(cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0))
}

pub fn pauli_z() -> Op2 {
    Op2::new(cr(1.0), cr(0.0), cr(0.0), cr(-1.0))
}

/// `|to><from|`
pub fn ket_bra(to: usize, from: usize) -> Op5 {
    let mut m = Op5::zeros();
    m[(to, from)] = cr(1.0);
    m
}

// Pade(13) coefficients and the matching scaling threshold.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm<const D: usize>(m: &SMatrix<C64, D, D>) -> f64 {
    (0..D)
        .map(|j| (0..D).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a * x = b` by Gaussian elimination with partial pivoting.
fn solve<const D: usize>(mut a: SMatrix<C64, D, D>, mut b: SMatrix<C64, D, D>) -> SMatrix<C64, D, D> {
    for k in 0..D {
        let p = (k..D)
            .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
            .unwrap_or(k);
        if p != k {
            a.swap_rows(p, k);
            b.swap_rows(p, k);
        }
        let pivot = a[(k, k)];
        for i in (k + 1)..D {
            let f = a[(i, k)] / pivot;
            if f == cr(0.0) {
                continue;
            }
            for j in k..D {
                let akj = a[(k, j)];
                a[(i, j)] -= f * akj;
            }
            for j in 0..D {
                let bkj = b[(k, j)];
                b[(i, j)] -= f * bkj;
            }
        }
    }
    for k in (0..D).rev() {
        let pivot = a[(k, k)];
        for j in 0..D {
            let mut s = b[(k, j)];
            for i in (k + 1)..D {
                s -= a[(k, i)] * b[(i, j)];
            }
            b[(k, j)] = s / pivot;
        }
    }
    b
}

/// `exp(scale * m)` by scaling and squaring with a degree-13 Pade approximant.
pub fn expm<const D: usize>(m: &SMatrix<C64, D, D>, scale: f64) -> Result<SMatrix<C64, D, D>> {
    if !scale.is_finite() || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let a = m * cr(scale);
    let norm = one_norm(&a);
    let id = SMatrix::<C64, D, D>::identity();
    if norm == 0.0 {
        return Ok(id);
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * cr(0.5f64.powi(squarings));
    let b = PADE13.map(cr);
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner = a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9]) + a6 * b[7] + a4 * b[5] + a2 * b[3] + id * b[1];
    let u = a * u_inner;
    let v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8]) + a6 * b[6] + a4 * b[4] + a2 * b[2] + id * b[0];
    let mut r = solve(v - u, v + u);
    for _ in 0..squarings {
        r = r * r;
    }
    Ok(r)
}

/// `exp(scale * m)` for a 5x5 generator.
pub fn dense_expm(m: &Op5, scale: f64) -> Result<Op5> {
    expm(m, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close<const R: usize, const C: usize>(a: &SMatrix<C64, R, C>, b: &SMatrix<C64, R, C>, tol: f64) {
        let d = max_abs(&(a - b));
        assert!(d < tol, "deviation {d:e} >= {tol:e}\n{a}\n{b}");
    }

    #[test]
    fn normalize_examples() {
        let s = StateVector::from_amplitudes([cr(2.0), cr(0.0), cr(0.0), cr(0.0), cr(0.0)]);
        assert_eq!(normalize(&s).unwrap(), StateVector::basis(0));

        let s = StateVector::from_amplitudes([cr(1.0), cr(1.0), cr(0.0), cr(0.0), cr(0.0)]);
        let n = normalize(&s).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((n.amplitude(0).re - h).abs() < 1e-15);
        assert!((n.amplitude(1).re - h).abs() < 1e-15);

        let z = StateVector::from_amplitudes([cr(0.0); DIM]);
        assert_eq!(normalize(&z), Err(Error::DegenerateState));
    }

    #[test]
    fn embed_qubit_examples() {
        assert_eq!(embed_qubit(cr(1.0), cr(0.0)).unwrap(), StateVector::basis(0));
        assert_eq!(embed_qubit(cr(0.0), cr(1.0)).unwrap(), StateVector::basis(1));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = embed_qubit(cr(h), c(0.0, h)).unwrap();
        assert_eq!(s.amplitude(1), c(0.0, h));
        assert!(matches!(
            embed_qubit(cr(1.0), cr(1.0)),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn project_qubit_examples() {
        let (b, leak) = project_qubit(&StateVector::basis(0).to_density());
        assert_eq!(b[(0, 0)], cr(1.0));
        assert_eq!(leak, 0.0);

        let (b, leak) = project_qubit(&StateVector::basis(basis::ANC).to_density());
        assert_eq!(max_abs(&b), 0.0);
        assert_eq!(leak, 1.0);

        let rho = DensityMatrix::diagonal([0.5, 0.0, 0.0, 0.5, 0.0]).unwrap();
        let (b, leak) = project_qubit(&rho);
        assert_eq!(b[(0, 0)], cr(0.5));
        assert!((b.trace().re + leak - 1.0).abs() < 1e-12);
        assert_eq!(leak, 0.5);
    }

    #[test]
    fn density_validation() {
        let mut m = Op5::zeros();
        m[(0, 0)] = cr(0.7);
        assert!(DensityMatrix::new(m).is_err());
        m[(1, 1)] = cr(0.3);
        m[(0, 1)] = c(0.1, 0.1);
        assert!(DensityMatrix::new(m).is_err(), "not Hermitian");
        m[(1, 0)] = c(0.1, -0.1);
        assert!(DensityMatrix::new(m).is_ok());
        let bad = DensityMatrix::diagonal([1.2, -0.2, 0.0, 0.0, 0.0]);
        assert!(bad.is_err());
    }

    #[test]
    fn gate_validation() {
        assert!(QubitGate::new(pauli_y()).is_ok());
        assert!(QubitGate::new(Op2::identity() * cr(2.0)).is_err());
    }

    #[test]
    fn expm_zero_and_diagonal() {
        assert_eq!(dense_expm(&Op5::zeros(), 3.0).unwrap(), Op5::identity());
        let d = [0.3, -1.2, 2.5, 0.0, 7.0];
        let mut m = Op5::zeros();
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = c(0.0, -x);
        }
        let t = 1.3;
        let e = dense_expm(&m, t).unwrap();
        let mut want = Op5::zeros();
        for (i, x) in d.iter().enumerate() {
            want[(i, i)] = C64::from_polar(1.0, -x * t);
        }
        assert_close(&e, &want, 1e-13);
    }

    #[test]
    fn expm_sigma_x_block() {
        // exp(-i t sx) = cos t I - i sin t sx on the (0, e1) block
        let mut m = Op5::zeros();
        m[(0, 3)] = c(0.0, -1.0);
        m[(3, 0)] = c(0.0, -1.0);
        for &t in &[0.1, 1.0, 2.7, 9.5] {
            let e = dense_expm(&m, t).unwrap();
            let mut want = Op5::identity();
            want[(0, 0)] = cr(t.cos());
            want[(3, 3)] = cr(t.cos());
            want[(0, 3)] = c(0.0, -t.sin());
            want[(3, 0)] = c(0.0, -t.sin());
            assert_close(&e, &want, 1e-12);
        }
    }

    #[test]
    fn expm_two_by_two() {
        let e = expm(&(pauli_y() * c(0.0, -1.0)), 0.4).unwrap();
        let want = Op2::new(cr(0.4f64.cos()), cr(-0.4f64.sin()), cr(0.4f64.sin()), cr(0.4f64.cos()));
        assert_close(&e, &want, 1e-14);
    }

    #[test]
    fn expm_rejects_non_finite() {
        let mut m = Op5::zeros();
        m[(1, 2)] = cr(f64::NAN);
        assert_eq!(dense_expm(&m, 1.0), Err(Error::NonFinite));
        assert_eq!(dense_expm(&Op5::identity(), f64::INFINITY), Err(Error::NonFinite));
    }

    #[test]
    fn expm_non_normal_against_closed_form() {
        // Jordan-like block: exp([[a, 1], [0, a]]) = e^a [[1, 1], [0, 1]]
        let a = c(0.3, -2.0);
        let m = Op2::new(a, cr(1.0), cr(0.0), a);
        let e = expm(&m, 4.0).unwrap();
        let ea = (a * 4.0).exp();
        let want = Op2::new(ea, ea * 4.0, cr(0.0), ea);
        assert_close(&e, &want, 1e-12 * ea.norm() * 4.0);
    }
}
