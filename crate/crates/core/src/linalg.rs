//! Complex 3-dimensional linear algebra for qutrit states and operators.
//!
//! Everything here is fixed-size and stack allocated. The eigensolver is a
//! cyclic complex Jacobi iteration, which converges quadratically and is
//! accurate to a few ulps for 3x3 Hermitian input.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for `sum |c_k|^2 = 1` on state vectors.
pub const NORM_TOL: f64 = 1e-12;
/// Entrywise tolerance for the Hermitian flag on generic operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Frobenius tolerance for `M^dagger M = I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Hermiticity and trace tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Lowest admissible eigenvalue of a density matrix.
pub const DENSITY_EIG_FLOOR: f64 = -1e-9;
/// Eigenvalues below this are treated as exact zeros when taking square roots
/// of positive semidefinite matrices.
pub const PSD_SQRT_CLIP: f64 = 1e-13;

const JACOBI_MAX_SWEEPS: usize = 64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A vector in the qutrit Hilbert space, components ordered |1>, |2>, |3>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CVec3(pub [C64; 3]);

impl CVec3 {
    pub fn new(a: C64, b: C64, c: C64) -> Self {
        CVec3([a, b, c])
    }

    pub fn real(a: f64, b: f64, c: f64) -> Self {
        CVec3([C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0)])
    }

    /// Basis state |k>, with `k` in 1..=3.
    pub fn basis(k: usize) -> Self {
        assert!((1..=3).contains(&k), "basis index {k} outside 1..=3");
        let mut v = [ZERO; 3];
        v[k - 1] = ONE;
        CVec3(v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::DegenerateRay);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        CVec3(self.0.map(|z| z * s))
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &CVec3) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|self><other|`.
    pub fn outer(&self, other: &CVec3) -> CMat3 {
        let mut m = CMat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i] * other.0[j].conj();
            }
        }
        m
    }
}

impl Index<usize> for CVec3 {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

/// A 3x3 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CMat3(pub [[C64; 3]; 3]);

impl CMat3 {
    pub fn zeros() -> Self {
        CMat3([[ZERO; 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag([1.0, 1.0, 1.0])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = Self::zeros();
        for (k, &x) in d.iter().enumerate() {
            m.0[k][k] = C64::new(x, 0.0);
        }
        m
    }

    pub fn from_real(rows: [[f64; 3]; 3]) -> Self {
        CMat3(rows.map(|r| r.map(|x| C64::new(x, 0.0))))
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat3(self.0.map(|r| r.map(|z| z * s)))
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn apply(&self, v: &CVec3) -> CVec3 {
        let mut out = [ZERO; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| self.0[i][j] * v.0[j]).sum();
        }
        CVec3(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise modulus of `M - M^dagger`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= HERMITIAN_TOL
    }

    pub fn is_unitary(&self) -> bool {
        frobenius_distance(&(self.adjoint() * *self), &CMat3::identity()) <= UNITARY_TOL
    }

    /// `U M U^dagger`.
    pub fn conjugate_by(&self, u: &CMat3) -> CMat3 {
        *u * *self * u.adjoint()
    }

    pub fn commutator(&self, other: &CMat3) -> CMat3 {
        *self * *other - *other * *self
    }

    /// Largest modulus among the off-diagonal entries.
    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    worst = worst.max(self.0[i][j].norm());
                }
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for CMat3 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for CMat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Mul for CMat3 {
    type Output = CMat3;
    fn mul(self, rhs: CMat3) -> CMat3 {
        let mut m = CMat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        m
    }
}

impl Add for CMat3 {
    type Output = CMat3;
    fn add(self, rhs: CMat3) -> CMat3 {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] += rhs.0[i][j];
            }
        }
        m
    }
}

impl Sub for CMat3 {
    type Output = CMat3;
    fn sub(self, rhs: CMat3) -> CMat3 {
        self + (-rhs)
    }
}

impl Neg for CMat3 {
    type Output = CMat3;
    fn neg(self) -> CMat3 {
        CMat3(self.0.map(|r| r.map(|z| -z)))
    }
}

impl fmt::Display for CMat3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.0 {
            let cells: Vec<String> = row
                .iter()
                .map(|z| format!("{:+.6}{:+.6}i", z.re, z.im))
                .collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

pub fn frobenius_distance(a: &CMat3, b: &CMat3) -> f64 {
    (*a - *b).frobenius_norm()
}

/// `|v><v| / <v|v>`.
pub fn projector_from_ray(v: &CVec3) -> Result<CMat3> {
    let n = v.norm_sqr();
    if n == 0.0 {
        return Err(Error::DegenerateRay);
    }
    Ok(v.outer(v).scale_real(1.0 / n))
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone, Copy)]
pub struct Eigen {
    /// Descending.
    pub values: [f64; 3],
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: [CVec3; 3],
}

impl Eigen {
    pub fn reconstruct(&self) -> CMat3 {
        self.map_values(|x| x)
    }

    /// `sum_k f(lambda_k) |u_k><u_k|`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMat3 {
        let mut m = CMat3::zeros();
        for k in 0..3 {
            m = m + self.vectors[k].outer(&self.vectors[k]).scale_real(f(self.values[k]));
        }
        m
    }
}

/// Cyclic Jacobi diagonalization of a 3x3 Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq`, then applies
/// the real symmetric Jacobi rotation to the (p, q) block.
pub fn hermitian_eig(m: &CMat3) -> Result<Eigen> {
    let deviation = m.hermitian_deviation();
    if deviation > DENSITY_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    // Symmetrize so roundoff asymmetry does not leak into the rotations.
    let mut a = (*m + m.adjoint()).scale_real(0.5);
    let mut v = CMat3::identity();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.0[i][j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a.0[p][q];
            let r = apq.norm();
            if r <= 1e-300 {
                continue;
            }
            let phase = apq / r;
            let app = a.0[p][p].re;
            let aqq = a.0[q][q].re;
            let theta = (aqq - app) / (2.0 * r);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let cs = 1.0 / (t * t + 1.0).sqrt();
            let sn = t * cs;
            // J = D G with D = diag(.., 1 at p, conj(phase) at q, ..) and G the
            // real rotation; a' = J^dagger a J has a'_pq = 0.
            let mut j = CMat3::identity();
            j.0[p][p] = C64::new(cs, 0.0);
            j.0[p][q] = C64::new(sn, 0.0);
            j.0[q][p] = -phase.conj() * sn;
            j.0[q][q] = phase.conj() * cs;
            a = j.adjoint() * a * j;
            v = v * j;
        }
    }

    let mut order = [0usize, 1, 2];
    let diag = [a.0[0][0].re, a.0[1][1].re, a.0[2][2].re];
    order.sort_by(|&x, &y| diag[y].total_cmp(&diag[x]));
    let values = order.map(|k| diag[k]);
    let vectors = order.map(|k| CVec3([v.0[0][k], v.0[1][k], v.0[2][k]]));
    Ok(Eigen { values, vectors })
}

/// Square root of a positive semidefinite Hermitian matrix; eigenvalues
/// below [`PSD_SQRT_CLIP`] are taken as zero.
pub fn psd_sqrt(m: &CMat3) -> Result<CMat3> {
    let eig = hermitian_eig(m)?;
    Ok(eig.map_values(|x| if x < PSD_SQRT_CLIP { 0.0 } else { x.sqrt() }))
}

/// A validated qutrit density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMat3", into = "CMat3")]
pub struct DensityMatrix(CMat3);

impl DensityMatrix {
    pub fn new(m: CMat3) -> Result<Self> {
        let dev = m.hermitian_deviation();
        if dev > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix {
                reason: format!("not Hermitian (deviation {dev:.3e})"),
            });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix {
                reason: format!("trace {:.12}{:+.3e}i != 1", tr.re, tr.im),
            });
        }
        let eig = hermitian_eig(&m)?;
        if eig.values[2] < DENSITY_EIG_FLOOR {
            return Err(Error::InvalidDensityMatrix {
                reason: format!("negative eigenvalue {:.3e}", eig.values[2]),
            });
        }
        Ok(DensityMatrix(m))
    }

    pub fn pure(psi: &CVec3) -> Result<Self> {
        let psi = psi.normalized().map_err(|_| Error::InvalidDensityMatrix {
            reason: "zero state vector".into(),
        })?;
        Self::new(psi.outer(&psi))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(CMat3::diag([1.0 / 3.0; 3]))
    }

    pub fn basis(k: usize) -> Self {
        let b = CVec3::basis(k);
        DensityMatrix(b.outer(&b))
    }

    pub fn matrix(&self) -> &CMat3 {
        &self.0
    }

    /// `<k|rho|k>` for basis index `k` in 1..=3.
    pub fn population(&self, k: usize) -> f64 {
        self.0 .0[k - 1][k - 1].re
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// `U rho U^dagger`, unchecked; unitary conjugation preserves validity.
    pub fn evolve(&self, u: &CMat3) -> DensityMatrix {
        DensityMatrix(self.0.conjugate_by(u))
    }

    /// `(1 - p) rho + p I/3`.
    pub fn depolarize(&self, p: f64) -> DensityMatrix {
        let mixed = CMat3::diag([p / 3.0; 3]);
        DensityMatrix(self.0.scale_real(1.0 - p) + mixed)
    }

    /// Wrap a matrix already known to be a density matrix up to roundoff.
    pub(crate) fn from_trusted(m: CMat3) -> DensityMatrix {
        DensityMatrix(m)
    }
}

impl TryFrom<CMat3> for DensityMatrix {
    type Error = Error;
    fn try_from(m: CMat3) -> Result<Self> {
        DensityMatrix::new(m)
    }
}

impl From<DensityMatrix> for CMat3 {
    fn from(d: DensityMatrix) -> CMat3 {
        d.0
    }
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2`.
pub fn fidelity(rho: &DensityMatrix, target: &DensityMatrix) -> Result<f64> {
    // Validity is guaranteed by the type; re-check catches trusted wrappers.
    DensityMatrix::new(rho.0)?;
    DensityMatrix::new(target.0)?;
    let s = psd_sqrt(&target.0)?;
    let inner = s * rho.0 * s;
    let eig = hermitian_eig(&inner)?;
    let tr: f64 = eig
        .values
        .iter()
        .map(|&x| if x < PSD_SQRT_CLIP { 0.0 } else { x.sqrt() })
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Haar-ish random pure state from complex Gaussian components.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R) -> CVec3 {
    loop {
        let v = CVec3([0, 1, 2].map(|_| gaussian_complex(rng)));
        if let Ok(n) = v.normalized() {
            return n;
        }
    }
}

/// Random full-rank density matrix `G G^dagger / Tr` with Ginibre `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    let mut g = CMat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            g.0[i][j] = gaussian_complex(rng);
        }
    }
    let m = g * g.adjoint();
    let tr = m.trace().re;
    let mut rho = m.scale_real(1.0 / tr);
    // Exact Hermiticity.
    rho = (rho + rho.adjoint()).scale_real(0.5);
    DensityMatrix(rho)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R) -> CMat3 {
    let mut g = CMat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            g.0[i][j] = gaussian_complex(rng);
        }
    }
    (g + g.adjoint()).scale_real(0.5)
}

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    // Box-Muller; two uniforms give one complex normal.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    C64::new(r * t.cos(), r * t.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &CMat3, b: &CMat3, tol: f64) -> bool {
        frobenius_distance(a, b) < tol
    }

    #[test]
    fn projector_basis_ray() {
        let p = projector_from_ray(&CVec3::real(1.0, 0.0, 0.0)).unwrap();
        assert!(close(&p, &CMat3::diag([1.0, 0.0, 0.0]), 1e-15));
    }

    #[test]
    fn projector_symmetric_ray() {
        let p = projector_from_ray(&CVec3::real(1.0, 1.0, 1.0)).unwrap();
        let third = CMat3::from_real([[1.0 / 3.0; 3]; 3]);
        assert!(close(&p, &third, 1e-15));
    }

    #[test]
    fn projector_direct_substitution() {
        let p = projector_from_ray(&CVec3::real(0.0, 1.0, -1.0)).unwrap();
        let want = CMat3::from_real([[0.0, 0.0, 0.0], [0.0, 0.5, -0.5], [0.0, -0.5, 0.5]]);
        assert!(close(&p, &want, 1e-15));
    }

    #[test]
    fn projector_rejects_zero() {
        assert!(matches!(
            projector_from_ray(&CVec3::real(0.0, 0.0, 0.0)),
            Err(Error::DegenerateRay)
        ));
    }

    #[test]
    fn projector_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let v = random_pure_state(&mut rng).scale(c(3.7, 0.0));
            let s = gaussian_complex(&mut rng);
            let p = projector_from_ray(&v).unwrap();
            let ps = projector_from_ray(&v.scale(s)).unwrap();
            assert!(close(&p, &ps, 1e-12));
            assert!(close(&(p * p), &p, 1e-12));
            assert!(p.is_hermitian());
            assert!((p.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_of_diagonal() {
        let e = hermitian_eig(&CMat3::diag([1.0, 3.0, 2.0])).unwrap();
        assert_eq!(e.values, [3.0, 2.0, 1.0]);
        assert!((e.vectors[0][1].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[1][2].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[2][0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_of_rank_one_projector() {
        let m = CMat3::from_real([[1.0 / 3.0; 3]; 3]);
        let e = hermitian_eig(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!(e.values[1].abs() < 1e-12 && e.values[2].abs() < 1e-12);
        let top = e.vectors[0];
        let ones = CVec3::real(1.0, 1.0, 1.0).normalized().unwrap();
        assert!((top.inner(&ones).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = CMat3::identity();
        m.0[0][1] = c(1.0, 0.0);
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let h = random_hermitian(&mut rng);
            let e = hermitian_eig(&h).unwrap();
            assert!(frobenius_distance(&h, &e.reconstruct()) < 1e-9);
            for a in 0..3 {
                for b in 0..3 {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((e.vectors[a].inner(&e.vectors[b]) - c(want, 0.0)).norm() < 1e-9);
                }
            }
            assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
        }
    }

    #[test]
    fn eig_handles_degenerate_spectrum() {
        let e = hermitian_eig(&CMat3::identity()).unwrap();
        assert_eq!(e.values, [1.0, 1.0, 1.0]);
        let m = CMat3::from_real([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 3.0]]);
        let e = hermitian_eig(&m).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);
        assert!((e.values[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density_matrix(&mut rng);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-10);
        let one = DensityMatrix::basis(1);
        let two = DensityMatrix::basis(2);
        assert!(fidelity(&one, &two).unwrap().abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed();
        assert!((fidelity(&mixed, &one).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rank_one_target_matches_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let rho = random_density_matrix(&mut rng);
            let psi = random_pure_state(&mut rng);
            let target = DensityMatrix::pure(&psi).unwrap();
            let overlap = psi.inner(&rho.matrix().apply(&psi)).re;
            let f = fidelity(&rho, &target).unwrap();
            assert!((f - overlap).abs() < 1e-10, "{f} vs {overlap}");
            let f_rev = fidelity(&target, &rho).unwrap();
            assert!((f_rev - overlap).abs() < 1e-10, "{f_rev} vs {overlap}");
        }
    }

    #[test]
    fn fidelity_symmetric_for_commuting_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let b: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            let ra = DensityMatrix::new(CMat3::diag(a.map(|x| x / sa))).unwrap();
            let rb = DensityMatrix::new(CMat3::diag(b.map(|x| x / sb))).unwrap();
            let f1 = fidelity(&ra, &rb).unwrap();
            let f2 = fidelity(&rb, &ra).unwrap();
            let classical: f64 = (0..3).map(|k| (a[k] / sa * b[k] / sb).sqrt()).sum();
            assert!((f1 - f2).abs() < 1e-10);
            assert!((f1 - classical * classical).abs() < 1e-10);
        }
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(CMat3::diag([0.5, 0.5, 0.1])).is_err());
        assert!(DensityMatrix::new(CMat3::diag([1.2, -0.2, 0.0])).is_err());
        let mut m = CMat3::diag([0.5, 0.5, 0.0]);
        m.0[0][1] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(CMat3::diag([0.2, 0.3, 0.5])).is_ok());
    }

    #[test]
    fn mat_ops_examples() {
        assert_eq!(CMat3::identity().trace(), c(3.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = random_hermitian(&mut rng);
        m.0[0][2] = c(0.3, -2.0);
        assert_eq!(m.adjoint().adjoint(), m);
        let d = frobenius_distance(&CMat3::identity(), &CMat3::identity().scale_real(2.0));
        assert!((d - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(frobenius_distance(&m, &m), 0.0);
    }

    #[test]
    fn normalization_flag() {
        assert!(CVec3::real(1.0, 0.0, 0.0).is_normalized());
        assert!(!CVec3::real(1.0, 1.0, 0.0).is_normalized());
        assert!(CVec3::real(1.0, 1.0, 0.0).normalized().unwrap().is_normalized());
    }
}
