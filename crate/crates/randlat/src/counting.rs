//! Exact lattice-point counting in bounded regions.
//!
//! The central quantity of every experiment downstream is `#(Λ ∩ A)` for a
//! unimodular (or affine unimodular) lattice `Λ` and a bounded region `A`.
//! Counting is exact: points inside the region's bounding ball are
//! enumerated by a Fincke–Pohst depth-first walk over integer coefficients
//! of the LLL-reduced basis, then filtered through the region's membership
//! predicate. A 1e−9 slack is added to the enumeration radius so boundary
//! points survive floating-point noise; membership itself uses closed sets,
//! and since boundaries have measure zero this convention never affects a
//! probabilistic statement.
//!
//! [`brute_force_count`] is the independent oracle: an exhaustive scan over
//! a coefficient box on the *raw* basis, with an explicit coverage check
//! that the box provably contains every candidate. It shares no enumeration
//! code with [`count_region`], which is exactly what makes the
//! oracle-equivalence tests meaningful.
//!
//! Very thin boxes defeat ball-based enumeration (the bounding ball is huge
//! compared to the box). For aspect ratios above 4 the count is taken in a
//! volume-preserving rescaled frame where the box becomes a cube; the
//! rescaled basis is still unimodular, so the same machinery applies, and
//! membership is still decided in the original frame.

use crate::enumerate::{for_each_lattice_point, EnumError};
use crate::estimators::unit_ball_volume;
use crate::lattice::{AffineUnimodularLattice, LatticeError, UnimodularLattice, Vector};
use crate::mat::{self, Matrix};
use crate::regions::Region;
use std::ops::ControlFlow;
use thiserror::Error;

/// Cap on the heuristic point-count prediction before enumeration starts.
const MAX_PREDICTED_POINTS: f64 = 1e8;
/// Cap on the number of coefficient vectors a brute-force scan may visit.
const MAX_BRUTE_FORCE_CELLS: f64 = 1e8;
/// Box side ratio beyond which counting switches to the rescaled frame.
const THIN_BOX_ASPECT: f64 = 4.0;
/// Slack added to enumeration radii so boundary points are never missed.
const RADIUS_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, Error)]
pub enum CountError {
    #[error("lattice dimension {lattice} does not match region dimension {region}")]
    DimensionMismatch { lattice: usize, region: usize },
    #[error("enumeration would visit ~{predicted:.3e} points (cap 1e8)")]
    Overflow { predicted: f64 },
    #[error("coefficient bound {given} does not cover the region (need at least {required})")]
    Coverage { required: i64, given: i64 },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Knobs for a counting call.
#[derive(Clone, Copy, Debug, Default)]
pub struct CountOptions {
    /// Keep the enumerated points in the result (off by default: hole
    /// probability runs need only the count).
    pub retain_points: bool,
    /// Stop at the first point found; the returned count is then 1 if the
    /// region is inhabited and 0 otherwise. This is the fast path for
    /// emptiness tests.
    pub early_exit_empty: bool,
    /// Skip the zero vector (detected exactly, by all-zero coefficients).
    /// Point statistics over unimodular lattices are stated for `Λ \ {0}`.
    /// Ignored in the affine setting, where no point is distinguished: the
    /// coefficient origin is an artifact of the offset representative.
    pub exclude_zero: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountResult {
    pub count: u64,
    /// Present when `retain_points` was set.
    pub points: Option<Vec<Vector>>,
}

/// All lattice points within `radius` (plus 1e−9 slack) of `center`, each
/// exactly once, in enumeration order.
pub fn enumerate_in_ball(
    l: &UnimodularLattice,
    center: &[f64],
    radius: f64,
) -> Result<Vec<Vector>, CountError> {
    if center.len() != l.dim() {
        return Err(CountError::DimensionMismatch { lattice: l.dim(), region: center.len() });
    }
    assert!(radius >= 0.0 && radius.is_finite(), "radius must be a nonnegative real");
    let reduced = l.reduced_basis()?.matrix().clone();
    guard_overflow(&reduced, radius)?;
    let mut points = Vec::new();
    map_err(for_each_lattice_point(&reduced, center, radius + RADIUS_SLACK, |_, p| {
        points.push(Vector::new(p.to_vec()));
        ControlFlow::Continue(())
    }))?;
    Ok(points)
}

/// `#(Λ ∩ R)`, exactly.
pub fn count_region(
    l: &UnimodularLattice,
    region: &Region,
    opts: &CountOptions,
) -> Result<CountResult, CountError> {
    count_impl(l, None, region, opts)
}

/// `#((Λ + x) ∩ R)`, exactly. Candidates are enumerated as lattice points
/// near `center − x` and shifted back by `x` before the membership test.
pub fn count_region_affine(
    l: &AffineUnimodularLattice,
    region: &Region,
    opts: &CountOptions,
) -> Result<CountResult, CountError> {
    count_impl(l.lattice(), Some(l.offset().coords()), region, opts)
}

fn count_impl(
    l: &UnimodularLattice,
    offset: Option<&[f64]>,
    region: &Region,
    opts: &CountOptions,
) -> Result<CountResult, CountError> {
    let d = l.dim();
    if region.dim() != d {
        return Err(CountError::DimensionMismatch { lattice: d, region: region.dim() });
    }
    if let Region::Box { lo, hi } = region {
        let aspect = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| b - a)
            .fold((f64::INFINITY, 0.0f64), |(mn, mx), s| (mn.min(s), mx.max(s)));
        if aspect.1 / aspect.0 > THIN_BOX_ASPECT {
            return count_rescaled_box(l, offset, region, lo, hi, opts);
        }
    }
    let (center, radius) = region.bounding_ball();
    let zero = vec![0.0; d];
    let off = offset.unwrap_or(&zero);
    let enum_center: Vec<f64> = center.iter().zip(off).map(|(c, x)| c - x).collect();
    let reduced = l.reduced_basis()?.matrix().clone();
    guard_overflow(&reduced, radius)?;
    let exclude_zero = opts.exclude_zero && offset.is_none();
    let mut count = 0u64;
    let mut points = opts.retain_points.then(Vec::new);
    let mut shifted = vec![0.0; d];
    map_err(for_each_lattice_point(&reduced, &enum_center, radius + RADIUS_SLACK, |coeffs, p| {
        if exclude_zero && coeffs.iter().all(|&c| c == 0) {
            return ControlFlow::Continue(());
        }
        for (s, (a, x)) in shifted.iter_mut().zip(p.iter().zip(off)) {
            *s = a + x;
        }
        if region.contains(&shifted) {
            count += 1;
            if let Some(ps) = points.as_mut() {
                ps.push(Vector::new(shifted.clone()));
            }
            if opts.early_exit_empty {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }))?;
    Ok(CountResult { count, points })
}

/// Thin-box fast path: rescale each axis by `t_i = (∏ sides)^{1/d} / side_i`
/// (a determinant-one diagonal map), count the rescaled lattice inside the
/// rescaled box — now a cube with a small bounding ball — and test
/// membership back in the original frame.
fn count_rescaled_box(
    l: &UnimodularLattice,
    offset: Option<&[f64]>,
    region: &Region,
    lo: &[f64],
    hi: &[f64],
    opts: &CountOptions,
) -> Result<CountResult, CountError> {
    let d = l.dim();
    let sides: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
    let geo = sides.iter().product::<f64>().powf(1.0 / d as f64);
    let t: Vec<f64> = sides.iter().map(|s| geo / s).collect();

    let mut scaled = l.basis().matrix().clone();
    for i in 0..d {
        for j in 0..d {
            scaled.set(i, j, scaled.get(i, j) * t[i]);
        }
    }
    let scaled_lattice = UnimodularLattice::from_matrix(scaled)?;

    let zero = vec![0.0; d];
    let off = offset.unwrap_or(&zero);
    // Center of the rescaled box image of the (offset-shifted) original box.
    let enum_center: Vec<f64> =
        (0..d).map(|k| (0.5 * (lo[k] + hi[k]) - off[k]) * t[k]).collect();
    let radius = 0.5 * geo * (d as f64).sqrt();
    let reduced = scaled_lattice.reduced_basis()?.matrix().clone();
    guard_overflow(&reduced, radius)?;

    let exclude_zero = opts.exclude_zero && offset.is_none();
    let mut count = 0u64;
    let mut points = opts.retain_points.then(Vec::new);
    let mut original = vec![0.0; d];
    map_err(for_each_lattice_point(&reduced, &enum_center, radius + RADIUS_SLACK, |coeffs, p| {
        if exclude_zero && coeffs.iter().all(|&c| c == 0) {
            return ControlFlow::Continue(());
        }
        for k in 0..d {
            original[k] = p[k] / t[k] + off[k];
        }
        if region.contains(&original) {
            count += 1;
            if let Some(ps) = points.as_mut() {
                ps.push(Vector::new(original.clone()));
            }
            if opts.early_exit_empty {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }))?;
    Ok(CountResult { count, points })
}

/// Independent counting oracle: scan every integer coefficient vector in
/// `[−coeff_bound, coeff_bound]^d` against the *raw* basis and test region
/// membership directly. Fails with [`CountError::Coverage`] unless the box
/// provably contains all candidates: any lattice point `Bn` in the bounding
/// ball `B(c, r)` satisfies `|n_i| ≤ ‖row_i(B^{-1})‖ (‖c‖ + r)`.
pub fn brute_force_count(
    l: &UnimodularLattice,
    region: &Region,
    coeff_bound: i64,
    opts: &CountOptions,
) -> Result<CountResult, CountError> {
    brute_force_impl(l, None, region, coeff_bound, opts)
}

/// Affine variant of [`brute_force_count`].
pub fn brute_force_count_affine(
    l: &AffineUnimodularLattice,
    region: &Region,
    coeff_bound: i64,
    opts: &CountOptions,
) -> Result<CountResult, CountError> {
    brute_force_impl(l.lattice(), Some(l.offset().coords()), region, coeff_bound, opts)
}

fn brute_force_impl(
    l: &UnimodularLattice,
    offset: Option<&[f64]>,
    region: &Region,
    coeff_bound: i64,
    opts: &CountOptions,
) -> Result<CountResult, CountError> {
    let d = l.dim();
    if region.dim() != d {
        return Err(CountError::DimensionMismatch { lattice: d, region: region.dim() });
    }
    assert!(coeff_bound >= 0, "coefficient bound must be nonnegative");
    let basis = l.basis().matrix();
    let inverse = basis
        .inverse()
        .ok_or_else(|| LatticeError::NumericalFailure("basis not invertible".to_string()))?;

    let (center, radius) = region.bounding_ball();
    let zero = vec![0.0; d];
    let off = offset.unwrap_or(&zero);
    let shifted_center_norm =
        center.iter().zip(off).map(|(c, x)| (c - x) * (c - x)).sum::<f64>().sqrt();
    let reach = shifted_center_norm + radius + RADIUS_SLACK;
    let required = inverse
        .to_rows()
        .iter()
        .map(|row| mat::norm(row) * reach)
        .fold(0.0f64, f64::max);
    let required = (required + 1e-9).floor() as i64;
    if coeff_bound < required {
        return Err(CountError::Coverage { required, given: coeff_bound });
    }

    let span = 2.0 * coeff_bound as f64 + 1.0;
    let cells = span.powi(d as i32);
    if cells > MAX_BRUTE_FORCE_CELLS {
        return Err(CountError::Overflow { predicted: cells });
    }

    let exclude_zero = opts.exclude_zero && offset.is_none();
    let mut count = 0u64;
    let mut points = opts.retain_points.then(Vec::new);
    let mut coeffs = vec![-coeff_bound; d];
    let mut point = vec![0.0; d];
    'scan: loop {
        if !(exclude_zero && coeffs.iter().all(|&c| c == 0)) {
            for i in 0..d {
                point[i] =
                    (0..d).map(|j| basis.get(i, j) * coeffs[j] as f64).sum::<f64>() + off[i];
            }
            if region.contains(&point) {
                count += 1;
                if let Some(ps) = points.as_mut() {
                    ps.push(Vector::new(point.clone()));
                }
                if opts.early_exit_empty {
                    break 'scan;
                }
            }
        }
        // Odometer increment over [−K, K]^d.
        let mut k = 0;
        loop {
            if k == d {
                break 'scan;
            }
            coeffs[k] += 1;
            if coeffs[k] <= coeff_bound {
                break;
            }
            coeffs[k] = -coeff_bound;
            k += 1;
        }
    }
    Ok(CountResult { count, points })
}

/// Heuristic pre-enumeration size check: a unimodular lattice has about
/// `N_d (r + ρ)^d` points in a radius-`r` ball, with covering radius
/// `ρ ≤ ½ Σ_j ‖b_j‖` over the reduced basis.
fn guard_overflow(reduced: &Matrix, radius: f64) -> Result<(), CountError> {
    let d = reduced.dim();
    let slack: f64 = 0.5 * (0..d).map(|j| mat::norm(reduced.col(j))).sum::<f64>();
    let predicted = unit_ball_volume(d) * (radius + slack).powi(d as i32);
    if predicted > MAX_PREDICTED_POINTS {
        return Err(CountError::Overflow { predicted });
    }
    Ok(())
}

fn map_err<T>(r: Result<T, EnumError>) -> Result<T, CountError> {
    r.map_err(|e| match e {
        EnumError::Degenerate => CountError::Lattice(LatticeError::NumericalFailure(
            "enumeration basis degenerated".to_string(),
        )),
        EnumError::RangeTooLarge => CountError::Overflow { predicted: f64::INFINITY },
    })
}
