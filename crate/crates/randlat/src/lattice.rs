//! Unimodular lattices, their bases, and affine translates.
//!
//! A lattice is `B Z^d` for a basis matrix `B` whose *columns* generate it;
//! unimodularity means `|det B - 1| <= 1e-9`, so covolumes are all 1 and
//! region volumes can be compared to point counts directly. Reduction (LLL)
//! is computed lazily, once per lattice, and every geometric operation that
//! needs a well-conditioned basis goes through it.

use crate::enumerate::{self, EnumError};
use crate::mat::{self, Matrix};
use serde::{Deserialize, Serialize};
use std::ops::ControlFlow;
use std::sync::OnceLock;
use thiserror::Error;

/// Tolerance for `|det B - 1|` at lattice construction.
pub const DET_TOL: f64 = 1e-9;
/// Tolerance for entrywise integrality when comparing lattices.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Default Lovasz parameter for lazy reduction.
pub const LLL_DELTA: f64 = 0.999;
/// Norm ratios beyond this are treated as numerically singular.
const CONDITION_CAP: f64 = 1e12;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("basis determinant {det} is not within {tol:e} of 1")]
    NotUnimodular { det: f64, tol: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("delta must lie in (0.25, 1.0], got {0}")]
    InvalidDelta(f64),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// A point of `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Vector {
        Vector(coords)
    }

    pub fn zero(d: usize) -> Vector {
        Vector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        mat::norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        mat::norm_sq(&self.0)
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        mat::dot(&self.0, &other.0)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

/// A unimodular basis: square, `d >= 2`, `|det - 1| <= DET_TOL`.
///
/// The determinant condition pins the orientation as well as the covolume;
/// reduction keeps it by flipping one column sign when a swap sequence
/// would otherwise land on determinant -1.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    m: Matrix,
}

impl Basis {
    pub fn new(m: Matrix) -> Result<Basis, LatticeError> {
        if m.dim() < 2 {
            return Err(LatticeError::DimensionTooSmall(m.dim()));
        }
        let det = m.det();
        if !(det - 1.0).abs().is_finite() || (det - 1.0).abs() > DET_TOL {
            return Err(LatticeError::NotUnimodular { det, tol: DET_TOL });
        }
        Ok(Basis { m })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector(self.m.col(j).to_vec())
    }

    /// Rows of the basis matrix — the row-major wire format.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.m.to_rows()
    }
}

/// Gram-Schmidt data for the columns of a basis: `mu[i][j]` (j < i) and the
/// squared norms of the orthogonalized columns.
struct GramSchmidt {
    mu: Vec<Vec<f64>>,
    bstar_sq: Vec<f64>,
}

fn gram_schmidt(cols: &[Vec<f64>]) -> Result<GramSchmidt, LatticeError> {
    let d = cols.len();
    let max_norm = cols.iter().map(|c| mat::norm(c)).fold(f64::MIN_POSITIVE, f64::max);
    let mut bstar: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut mu = vec![vec![0.0; d]; d];
    let mut bstar_sq = vec![0.0; d];
    for i in 0..d {
        let mut v = cols[i].clone();
        for j in 0..i {
            let m = mat::dot(&cols[i], &bstar[j]) / bstar_sq[j];
            mu[i][j] = m;
            for (vk, bk) in v.iter_mut().zip(&bstar[j]) {
                *vk -= m * bk;
            }
        }
        bstar_sq[i] = mat::norm_sq(&v);
        if bstar_sq[i].sqrt() < max_norm / CONDITION_CAP {
            return Err(LatticeError::NumericalFailure(format!(
                "Gram-Schmidt pivot {} degenerated (condition beyond {:.0e})",
                i, CONDITION_CAP
            )));
        }
        bstar.push(v);
    }
    Ok(GramSchmidt { mu, bstar_sq })
}

/// LLL-reduce a unimodular basis with Lovasz parameter `delta`.
///
/// The output generates the same lattice (the change of basis is integral
/// with determinant +1), is size-reduced (`|mu_ij| <= 1/2`), and satisfies
/// the Lovasz condition for `delta`.
pub fn lll_reduce(basis: &Basis, delta: f64) -> Result<Basis, LatticeError> {
    if !(delta > 0.25 && delta <= 1.0) {
        return Err(LatticeError::InvalidDelta(delta));
    }
    let d = basis.dim();
    let mut b: Vec<Vec<f64>> = (0..d).map(|j| basis.matrix().col(j).to_vec()).collect();
    let max_steps = 10_000 * d * d;
    let mut steps = 0;
    let mut k = 1;
    while k < d {
        steps += 1;
        if steps > max_steps {
            return Err(LatticeError::NumericalFailure(
                "LLL failed to converge".to_string(),
            ));
        }
        let gs = gram_schmidt(&b)?;
        let mut mu_k = gs.mu[k].clone();
        // Size-reduce column k against columns k-1 .. 0.
        for j in (0..k).rev() {
            let q = mu_k[j].round();
            if q != 0.0 {
                let (head, tail) = b.split_at_mut(k);
                let bj = &head[j];
                for (vk, vj) in tail[0].iter_mut().zip(bj) {
                    *vk -= q * vj;
                }
                for i in 0..j {
                    mu_k[i] -= q * gs.mu[j][i];
                }
                mu_k[j] -= q;
            }
        }
        // Lovasz test with the updated mu_{k,k-1}; the bstar norms are
        // unchanged by size reduction.
        let lhs = gs.bstar_sq[k] + mu_k[k - 1] * mu_k[k - 1] * gs.bstar_sq[k - 1];
        if lhs >= delta * gs.bstar_sq[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            k = k.max(2) - 1;
        }
    }
    // Keep orientation: swaps may have flipped the sign of the determinant,
    // and a negated column generates the same lattice.
    let mut m = Matrix::from_cols(&b);
    if m.det() < 0.0 {
        for v in m.col_mut(0) {
            *v = -*v;
        }
    }
    Basis::new(m).map_err(|e| match e {
        LatticeError::NotUnimodular { det, .. } => LatticeError::NumericalFailure(format!(
            "determinant drifted to {} during reduction",
            det
        )),
        other => other,
    })
}

#[derive(Clone, Debug)]
struct Reduced {
    basis: Basis,
    gram: Matrix,
}

/// A unimodular lattice `B Z^d`, with a lazily computed LLL-reduced basis.
#[derive(Clone, Debug)]
pub struct UnimodularLattice {
    basis: Basis,
    reduced: OnceLock<Result<Reduced, LatticeError>>,
}

impl UnimodularLattice {
    pub fn new(basis: Basis) -> UnimodularLattice {
        UnimodularLattice { basis, reduced: OnceLock::new() }
    }

    /// Build a lattice from a basis matrix (columns generate).
    pub fn from_matrix(m: Matrix) -> Result<UnimodularLattice, LatticeError> {
        Ok(UnimodularLattice::new(Basis::new(m)?))
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    fn reduced(&self) -> Result<&Reduced, LatticeError> {
        self.reduced
            .get_or_init(|| {
                let basis = lll_reduce(&self.basis, LLL_DELTA)?;
                let m = basis.matrix();
                let gram = m.transpose().mul(m);
                Ok(Reduced { basis, gram })
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    /// The lazily computed LLL-reduced basis (delta = 0.999).
    pub fn reduced_basis(&self) -> Result<&Basis, LatticeError> {
        Ok(&self.reduced()?.basis)
    }

    /// Gram matrix of the reduced basis.
    pub fn gram(&self) -> Result<&Matrix, LatticeError> {
        Ok(&self.reduced()?.gram)
    }

    /// The dual lattice, generated by the inverse-transpose basis: the set
    /// of `w` with integer inner products against every lattice vector.
    pub fn dual(&self) -> Result<UnimodularLattice, LatticeError> {
        let inv = self
            .basis
            .matrix()
            .inverse()
            .ok_or_else(|| LatticeError::NumericalFailure("basis not invertible".to_string()))?;
        UnimodularLattice::from_matrix(inv.transpose())
    }

    /// A shortest nonzero lattice vector. Ties within 1e-9 of the minimal
    /// norm are broken by canonical sign (first coordinate larger than
    /// 1e-12 in absolute value is made positive) and then lexicographically
    /// by coordinate.
    pub fn shortest_vector(&self) -> Result<Vector, LatticeError> {
        let reduced = self.reduced_basis()?;
        let m = reduced.matrix();
        let (_, r) = m
            .qr()
            .ok_or_else(|| LatticeError::NumericalFailure("QR degenerated".to_string()))?;
        let best_sq = enumerate::shortest_nonzero_norm_sq_upper(&r)
            .ok_or_else(|| LatticeError::NumericalFailure("SVP on invalid factor".to_string()))?;
        let radius = best_sq.sqrt() + 1e-9;
        let d = self.dim();
        let mut best: Option<Vec<f64>> = None;
        let walk = enumerate::for_each_lattice_point(m, &vec![0.0; d], radius, |x, p| {
            if x.iter().all(|&c| c == 0) {
                return ControlFlow::Continue(());
            }
            if mat::norm_sq(p) <= (best_sq.sqrt() + 1e-9).powi(2) {
                let cand = canonical_sign(p);
                match &best {
                    Some(cur) if !lex_less(&cand, cur) => {}
                    _ => best = Some(cand),
                }
            }
            ControlFlow::Continue(())
        });
        map_enum_err(walk)?;
        best.map(Vector).ok_or_else(|| {
            LatticeError::NumericalFailure("shortest vector search found nothing".to_string())
        })
    }

    /// Whether two lattices are equal as point sets: the change of basis
    /// `B2^{-1} B1` must be integral within 1e-6 with determinant +-1.
    pub fn lattice_eq(&self, other: &UnimodularLattice) -> Result<bool, LatticeError> {
        if self.dim() != other.dim() {
            return Err(LatticeError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let inv = other
            .basis
            .matrix()
            .inverse()
            .ok_or_else(|| LatticeError::NumericalFailure("basis not invertible".to_string()))?;
        let u = inv.mul(self.basis.matrix());
        let d = self.dim();
        let mut rounded = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let v = u.get(i, j);
                let r = v.round();
                if (v - r).abs() > INTEGRALITY_TOL {
                    return Ok(false);
                }
                rounded.set(i, j, r);
            }
        }
        Ok((rounded.det().abs() - 1.0).abs() < 0.5)
    }
}

pub(crate) fn map_enum_err<T>(r: Result<T, EnumError>) -> Result<T, LatticeError> {
    r.map_err(|e| match e {
        EnumError::Degenerate => {
            LatticeError::NumericalFailure("enumeration basis degenerated".to_string())
        }
        EnumError::RangeTooLarge => {
            LatticeError::NumericalFailure("enumeration range exploded".to_string())
        }
    })
}

fn canonical_sign(p: &[f64]) -> Vec<f64> {
    for &c in p {
        if c.abs() > 1e-12 {
            if c < 0.0 {
                return p.iter().map(|v| -v).collect();
            }
            break;
        }
    }
    p.to_vec()
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// An affine unimodular lattice `B Z^d + x`, with the offset reduced into
/// the fundamental parallelepiped of the basis at construction.
#[derive(Clone, Debug)]
pub struct AffineUnimodularLattice {
    lattice: UnimodularLattice,
    offset: Vector,
}

impl AffineUnimodularLattice {
    /// Reduce `offset` modulo the lattice (coordinates of `B^{-1} x` taken
    /// to their fractional parts in `[0, 1)`) and attach it.
    pub fn new(
        lattice: UnimodularLattice,
        offset: Vector,
    ) -> Result<AffineUnimodularLattice, LatticeError> {
        if lattice.dim() != offset.dim() {
            return Err(LatticeError::DimensionMismatch {
                left: lattice.dim(),
                right: offset.dim(),
            });
        }
        let inv = lattice
            .basis()
            .matrix()
            .inverse()
            .ok_or_else(|| LatticeError::NumericalFailure("basis not invertible".to_string()))?;
        let u = inv.mul_vec(offset.coords());
        let frac: Vec<f64> = u.iter().map(|v| v - v.floor()).collect();
        let reduced = lattice.basis().matrix().mul_vec(&frac);
        Ok(AffineUnimodularLattice { lattice, offset: Vector(reduced) })
    }

    pub fn lattice(&self) -> &UnimodularLattice {
        &self.lattice
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn z_lattice(d: usize) -> UnimodularLattice {
        UnimodularLattice::from_matrix(Matrix::identity(d)).unwrap()
    }

    #[test]
    fn rejects_non_unimodular_basis() {
        let m = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        match UnimodularLattice::from_matrix(m) {
            Err(LatticeError::NotUnimodular { det, .. }) => assert_abs_diff_eq!(det, 2.0),
            other => panic!("expected NotUnimodular, got {:?}", other),
        }
    }

    #[test]
    fn rejects_dimension_one() {
        let m = Matrix::from_rows(&[vec![1.0]]);
        assert!(matches!(
            UnimodularLattice::from_matrix(m),
            Err(LatticeError::DimensionTooSmall(1))
        ));
    }

    #[test]
    fn accepts_determinant_within_tolerance() {
        let m = Matrix::from_rows(&[vec![1.0 + 5e-10, 0.0], vec![0.0, 1.0]]);
        assert!(UnimodularLattice::from_matrix(m).is_ok());
    }

    #[test]
    fn dual_of_dual_is_identity_and_dual_pairing_is_integral() {
        let m = Matrix::from_rows(&[
            vec![1.0, 0.7, -0.3],
            vec![0.0, 1.0, 0.4],
            vec![0.0, 0.0, 1.0],
        ]);
        let l = UnimodularLattice::from_matrix(m.clone()).unwrap();
        let dual = l.dual().unwrap();
        // D^T B = I.
        let prod = dual.basis().matrix().transpose().mul(&m);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod.get(i, j), want, epsilon = 1e-9);
            }
        }
        let again = dual.dual().unwrap();
        assert!(again.lattice_eq(&l).unwrap());
    }

    #[test]
    fn lll_reduces_skewed_basis_and_preserves_lattice() {
        // Highly sheared basis of Z^2.
        let m = Matrix::from_rows(&[vec![1.0, 7.0], vec![3.0, 22.0]]);
        assert_abs_diff_eq!(m.det(), 1.0, epsilon = 1e-12);
        let basis = Basis::new(m).unwrap();
        let reduced = lll_reduce(&basis, 0.999).unwrap();
        // Change of basis is integral with determinant +-1.
        let u = reduced.matrix().inverse().unwrap().mul(basis.matrix());
        for i in 0..2 {
            for j in 0..2 {
                let v = u.get(i, j);
                assert!((v - v.round()).abs() < 1e-9, "non-integer change of basis {}", v);
            }
        }
        assert_abs_diff_eq!(u.det().abs(), 1.0, epsilon = 1e-9);
        // Size reduction holds: both columns are short.
        let c0 = mat::norm(reduced.matrix().col(0));
        let c1 = mat::norm(reduced.matrix().col(1));
        assert!(c0 <= 2.0 && c1 <= 2.0, "columns not reduced: {} {}", c0, c1);
    }

    #[test]
    fn lll_rejects_bad_delta() {
        let basis = Basis::new(Matrix::identity(2)).unwrap();
        assert!(matches!(lll_reduce(&basis, 0.25), Err(LatticeError::InvalidDelta(_))));
        assert!(matches!(lll_reduce(&basis, 1.5), Err(LatticeError::InvalidDelta(_))));
    }

    #[test]
    fn shortest_vector_on_z2_and_diagonal() {
        let sv = z_lattice(2).shortest_vector().unwrap();
        // Both (0,1) and (1,0) have norm 1; canonical sign plus
        // lexicographic order picks (0,1).
        assert_eq!(sv.coords(), &[0.0, 1.0]);

        let m = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        let l = UnimodularLattice::from_matrix(m).unwrap();
        let sv = l.shortest_vector().unwrap();
        assert_eq!(sv.coords(), &[0.0, 0.5]);
    }

    #[test]
    fn shortest_vector_matches_grid_scan_on_random_lattices() {
        use crate::sampling::{sample_x2_exact, RngState};
        for t in 0..100 {
            let mut rng = RngState { master_seed: 9001, stream_index: t }.rng();
            let l = sample_x2_exact(&mut rng).unwrap();
            let sv = l.shortest_vector().unwrap();
            // Independent scan over a generous coefficient box using the
            // raw (unreduced) basis.
            let b = l.basis().matrix();
            let dual_t = b.inverse().unwrap();
            let bound: f64 = (0..2)
                .map(|i| {
                    let row: Vec<f64> = (0..2).map(|j| dual_t.get(i, j)).collect();
                    mat::norm(&row) * (sv.norm() + 1e-6)
                })
                .fold(0.0, f64::max);
            let k = bound.ceil() as i64 + 1;
            let mut best = f64::INFINITY;
            for c0 in -k..=k {
                for c1 in -k..=k {
                    if c0 == 0 && c1 == 0 {
                        continue;
                    }
                    let p = b.mul_vec(&[c0 as f64, c1 as f64]);
                    best = best.min(mat::norm(&p));
                }
            }
            assert_abs_diff_eq!(sv.norm(), best, epsilon = 1e-9);
        }
    }

    #[test]
    fn lattice_eq_is_base_change_invariant() {
        let l1 = z_lattice(2);
        let rot = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let l2 = UnimodularLattice::from_matrix(rot).unwrap();
        assert!(l1.lattice_eq(&l2).unwrap());

        // A genuine rotation by 0.3 radians is a different point set.
        let (s, c) = (0.3_f64.sin(), 0.3_f64.cos());
        let r = Matrix::from_rows(&[vec![c, -s], vec![s, c]]);
        let l3 = UnimodularLattice::from_matrix(r).unwrap();
        assert!(!l1.lattice_eq(&l3).unwrap());
    }

    #[test]
    fn lattice_eq_dimension_mismatch_errors() {
        let l2 = z_lattice(2);
        let l3 = z_lattice(3);
        assert!(matches!(
            l2.lattice_eq(&l3),
            Err(LatticeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn affine_offset_reduction() {
        let l = z_lattice(2);
        let a = AffineUnimodularLattice::new(l, Vector::new(vec![1.5, -0.25])).unwrap();
        assert_abs_diff_eq!(a.offset().coords()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.offset().coords()[1], 0.75, epsilon = 1e-12);

        // Skewed basis: reduction happens in basis coordinates.
        let m = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        let l = UnimodularLattice::from_matrix(m).unwrap();
        let a = AffineUnimodularLattice::new(l, Vector::new(vec![2.3, 0.6])).unwrap();
        assert_abs_diff_eq!(a.offset().coords()[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(a.offset().coords()[1], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn affine_offset_reduction_is_idempotent() {
        let m = Matrix::from_rows(&[vec![1.0, 0.4], vec![0.0, 1.0]]);
        let l = UnimodularLattice::from_matrix(m).unwrap();
        let a = AffineUnimodularLattice::new(l.clone(), Vector::new(vec![3.7, -1.2])).unwrap();
        let b = AffineUnimodularLattice::new(l, a.offset().clone()).unwrap();
        for (x, y) in a.offset().coords().iter().zip(b.offset().coords()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn gram_is_symmetric_positive_with_unit_determinant() {
        let m = Matrix::from_rows(&[vec![1.0, 0.9], vec![0.0, 1.0]]);
        let l = UnimodularLattice::from_matrix(m).unwrap();
        let g = l.gram().unwrap();
        assert_abs_diff_eq!(g.get(0, 1), g.get(1, 0), epsilon = 1e-12);
        assert_abs_diff_eq!(g.det(), 1.0, epsilon = 1e-9);
        assert!(g.get(0, 0) > 0.0 && g.get(1, 1) > 0.0);
    }

    #[test]
    fn numerical_failure_on_singular_input_reduction() {
        // det = 1 but catastrophically conditioned: reduction must either
        // succeed or report a numerical failure, never panic.
        let m = Matrix::from_rows(&[vec![1e13, 0.0], vec![0.0, 1e-13]]);
        let l = UnimodularLattice::from_matrix(m).unwrap();
        match l.reduced_basis() {
            Ok(b) => assert_abs_diff_eq!(b.matrix().det(), 1.0, epsilon = 1e-6),
            Err(LatticeError::NumericalFailure(_)) => {}
            Err(other) => panic!("unexpected error {:?}", other),
        }
    }
}
