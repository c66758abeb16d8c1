//! Depth-first lattice point enumeration (Fincke-Pohst).
//!
//! Given a basis `B` (columns) and a target ball `|Bx - c| <= radius`, the
//! walk factors `B = QR` and bounds the integer coordinates one level at a
//! time, deepest coordinate last: with `R` upper triangular the distance
//! splits as `sum_k (R[k][k] x_k - s_k)^2` where `s_k` depends only on the
//! coordinates already fixed above level `k`. These are internal building
//! blocks; the public counting API wraps them with volume guards and region
//! filtering.

use crate::mat::{self, Matrix};
use std::ops::ControlFlow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum EnumError {
    /// The basis is numerically rank-deficient.
    Degenerate,
    /// A single coordinate range exceeded the sanity cap; the caller's
    /// volume guard should have rejected the query first.
    RangeTooLarge,
}

/// Per-coordinate iteration cap. A single level spanning more than this
/// many integers means the query escaped the predicted-count guard.
const LEVEL_SPAN_CAP: f64 = 5e7;

/// Relative fuzz applied to the squared radius so that boundary points are
/// kept despite floating-point noise. Callers add their own geometric slack
/// (1e-9 by convention) on top of the radius itself.
const RADIUS_EPS: f64 = 1e-12;

/// Visit every lattice point `Bx` with `|Bx - center| <= radius`.
///
/// The visitor receives the integer coordinates and the ambient point and
/// can stop the walk early with `ControlFlow::Break`. Returns `Ok(true)` if
/// the walk ran to completion, `Ok(false)` if the visitor broke early.
pub(crate) fn for_each_lattice_point<F>(
    basis: &Matrix,
    center: &[f64],
    radius: f64,
    visit: F,
) -> Result<bool, EnumError>
where
    F: FnMut(&[i64], &[f64]) -> ControlFlow<()>,
{
    let (q, r) = basis.qr().ok_or(EnumError::Degenerate)?;
    let target = q.transpose().mul_vec(center);
    walk_r_factor(basis, &r, &target, radius, visit)
}

/// The DFS itself, on a precomputed upper-triangular factor `r` with the
/// target already rotated into the `Q` frame.
fn walk_r_factor<F>(
    basis: &Matrix,
    r: &Matrix,
    target: &[f64],
    radius: f64,
    mut visit: F,
) -> Result<bool, EnumError>
where
    F: FnMut(&[i64], &[f64]) -> ControlFlow<()>,
{
    let d = basis.dim();
    if radius < 0.0 {
        return Ok(true);
    }
    let radius_sq = radius * radius * (1.0 + RADIUS_EPS);
    let mut x = vec![0i64; d];
    let mut lo = vec![0i64; d];
    let mut hi = vec![0i64; d];
    let mut resid = vec![0.0f64; d]; // s_k for the active path
    let mut used = vec![0.0f64; d + 1]; // used[k] = error mass from levels > k
    let mut point = vec![0.0f64; d];

    // Enter level k given used[k]; returns false if the level is infeasible.
    macro_rules! enter {
        ($k:expr, $lo:expr, $hi:expr, $resid:expr, $used:expr, $x:expr) => {{
            let k = $k;
            let mut s = target[k];
            for j in (k + 1)..d {
                s -= r.get(k, j) * $x[j] as f64;
            }
            $resid[k] = s;
            let rkk = r.get(k, k);
            let room = radius_sq - $used[k + 1];
            if room < 0.0 {
                false
            } else {
                let rho = room.sqrt();
                let lo_f = ((s - rho) / rkk).ceil();
                let hi_f = ((s + rho) / rkk).floor();
                if hi_f < lo_f {
                    // Empty range is fine; mark as exhausted.
                    $lo[k] = 0;
                    $hi[k] = -1;
                    $x[k] = 0;
                    true
                } else if hi_f - lo_f > LEVEL_SPAN_CAP || lo_f.abs() > 9e15 || hi_f.abs() > 9e15 {
                    return Err(EnumError::RangeTooLarge);
                } else {
                    $lo[k] = lo_f as i64;
                    $hi[k] = hi_f as i64;
                    $x[k] = $lo[k];
                    true
                }
            }
        }};
    }

    let mut k = d - 1;
    used[d] = 0.0;
    if !enter!(k, lo, hi, resid, used, x) {
        return Ok(true);
    }
    loop {
        if x[k] > hi[k] {
            // Level exhausted: pop.
            if k == d - 1 {
                return Ok(true);
            }
            k += 1;
            x[k] += 1;
            continue;
        }
        let e = r.get(k, k) * x[k] as f64 - resid[k];
        let acc = used[k + 1] + e * e;
        if acc > radius_sq {
            x[k] += 1;
            continue;
        }
        if k == 0 {
            for (i, p) in point.iter_mut().enumerate() {
                *p = 0.0;
                for (j, &xj) in x.iter().enumerate() {
                    *p += basis.get(i, j) * xj as f64;
                }
            }
            if let ControlFlow::Break(()) = visit(&x, &point) {
                return Ok(false);
            }
            x[0] += 1;
        } else {
            used[k] = acc;
            let next = k - 1;
            if enter!(next, lo, hi, resid, used, x) {
                k = next;
            } else {
                x[k] += 1;
            }
        }
    }
}

/// Squared norm of a shortest nonzero vector of the lattice spanned by the
/// columns of an upper-triangular matrix with positive diagonal, found by
/// branch-and-bound with a shrinking radius. `None` if the input is not
/// upper triangular with positive diagonal.
pub(crate) fn shortest_nonzero_norm_sq_upper(r: &Matrix) -> Option<f64> {
    let d = r.dim();
    for i in 0..d {
        if r.get(i, i) <= 0.0 {
            return None;
        }
        for j in 0..i {
            if r.get(i, j) != 0.0 {
                return None;
            }
        }
    }
    // Any column is a lattice vector, so the shortest column norm is an
    // upper bound for the search radius.
    let mut best = (0..d).map(|j| mat::norm_sq(r.col(j))).fold(f64::INFINITY, f64::min);
    let mut x = vec![0i64; d];
    svp_descend(r, d - 1, 0.0, &mut x, &mut best);
    Some(best)
}

fn svp_descend(r: &Matrix, k: usize, used: f64, x: &mut [i64], best: &mut f64) {
    let d = r.dim();
    let mut s = 0.0;
    for j in (k + 1)..d {
        s -= r.get(k, j) * x[j] as f64;
    }
    let rkk = r.get(k, k);
    // (rkk*x - s)^2 is a parabola in x, so scanning outward from the
    // continuous minimizer on each side and stopping at the first miss
    // covers the whole feasible range; visiting near-minimizers first also
    // shrinks the radius early.
    let base = (s / rkk).round() as i64;
    for dir in [1i64, -1i64] {
        let mut xv = if dir == 1 { base } else { base - 1 };
        loop {
            let e = rkk * xv as f64 - s;
            let acc = used + e * e;
            if acc > *best * (1.0 + RADIUS_EPS) {
                break;
            }
            x[k] = xv;
            if k == 0 {
                if x.iter().any(|&c| c != 0) && acc < *best {
                    *best = acc;
                }
            } else {
                svp_descend(r, k - 1, acc, x, best);
            }
            xv += dir;
        }
    }
    x[k] = 0;
}
