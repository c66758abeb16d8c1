//! Bounded measurable test sets with exact volumes.
//!
//! Point-count statistics compare empirical counts to Lebesgue measures, so
//! every [`Region`] carries an exact volume: `N_d r^d` for balls, side
//! products for boxes, shell differences for annuli, sums for disjoint
//! unions, and a declared value for opaque predicates (which are never
//! integrated numerically). Membership uses the closed set — boundaries are
//! measure zero, so the choice is irrelevant to every probabilistic
//! statement and is fixed only for determinism.
//!
//! [`RadialSet`] models subsets of the positive half-line used for length
//! spectra; `lift_radial` turns `S ⊂ R^+` into the rotation-invariant body
//! `{v : ‖v‖ ∈ S}`, whose volume is `Σ_i N_d (b_i^d − a_i^d)` — the
//! `d N_d ∫_S r^{d-1} dr` integral in closed form.

use crate::estimators::unit_ball_volume;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Points thrown at a union's bounding box to certify pairwise disjointness.
const DISJOINT_CHECK_POINTS: u64 = 10_000;
/// Points for the Monte Carlo fallback of [`intersection_volume`].
const INTERSECTION_MC_POINTS: u64 = 1_000_000;
/// Fixed seed for the internal Monte Carlo checks, so construction and
/// intersection volumes are deterministic.
const INTERNAL_MC_SEED: u64 = 0x7261_646c_6174_3031;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("invalid region: {0}")]
    Invalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("union members are not pairwise disjoint (overlap witnessed at {0:?})")]
    NotDisjoint(Vec<f64>),
    #[error("cannot parse region: {0}")]
    Parse(String),
}

/// An opaque membership test with declared volume and bounding ball.
#[derive(Clone)]
pub struct PredicateRegion {
    dim: usize,
    volume: f64,
    bounding_center: Vec<f64>,
    bounding_radius: f64,
    test: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
}

impl fmt::Debug for PredicateRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredicateRegion")
            .field("dim", &self.dim)
            .field("volume", &self.volume)
            .field("bounding_center", &self.bounding_center)
            .field("bounding_radius", &self.bounding_radius)
            .finish_non_exhaustive()
    }
}

/// A bounded measurable subset of `R^d` with exact volume, membership
/// predicate, and bounding ball.
#[derive(Clone, Debug)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
    DisjointUnion(Vec<Region>),
    Predicate(PredicateRegion),
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Region, RegionError> {
        check_coords(&center)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(RegionError::Invalid(format!("ball radius {} must be positive", radius)));
        }
        Ok(Region::Ball { center, radius })
    }

    /// Ball centered at the origin with the given volume.
    pub fn ball_with_volume(d: usize, volume: f64) -> Result<Region, RegionError> {
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(RegionError::Invalid(format!("volume {} must be positive", volume)));
        }
        let radius = (volume / unit_ball_volume(d)).powf(1.0 / d as f64);
        Region::ball(vec![0.0; d], radius)
    }

    pub fn box_corners(lo: Vec<f64>, hi: Vec<f64>) -> Result<Region, RegionError> {
        check_coords(&lo)?;
        check_coords(&hi)?;
        if lo.len() != hi.len() {
            return Err(RegionError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(RegionError::Invalid(
                "box corners must satisfy lo < hi componentwise".to_string(),
            ));
        }
        Ok(Region::Box { lo, hi })
    }

    /// Cube centered at the origin with the given volume.
    pub fn cube_with_volume(d: usize, volume: f64) -> Result<Region, RegionError> {
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(RegionError::Invalid(format!("volume {} must be positive", volume)));
        }
        let s = volume.powf(1.0 / d as f64) / 2.0;
        Region::box_corners(vec![-s; d], vec![s; d])
    }

    pub fn annulus(center: Vec<f64>, r_in: f64, r_out: f64) -> Result<Region, RegionError> {
        check_coords(&center)?;
        if !(r_in > 0.0 && r_in.is_finite()) {
            return Err(RegionError::Invalid(format!(
                "inner radius {} must be positive (a zero inner radius is a ball)",
                r_in
            )));
        }
        if !(r_out > r_in && r_out.is_finite()) {
            return Err(RegionError::Invalid(format!(
                "annulus radii must satisfy 0 < r_in < r_out, got {} .. {}",
                r_in, r_out
            )));
        }
        Ok(Region::Annulus { center, r_in, r_out })
    }

    /// Origin-centered annulus of the given volume with `r_in = r_out/2`.
    pub fn annulus_with_volume(d: usize, volume: f64) -> Result<Region, RegionError> {
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(RegionError::Invalid(format!("volume {} must be positive", volume)));
        }
        // N_d (r^d - (r/2)^d) = volume.
        let shell = 1.0 - 0.5f64.powi(d as i32);
        let r_out = (volume / (unit_ball_volume(d) * shell)).powf(1.0 / d as f64);
        Region::annulus(vec![0.0; d], r_out / 2.0, r_out)
    }

    /// Union of pairwise disjoint members. Disjointness is certified by a
    /// deterministic Monte Carlo overlap test: 10^4 points uniform in the
    /// union's bounding box, zero points inside two members required.
    pub fn disjoint_union(members: Vec<Region>) -> Result<Region, RegionError> {
        if members.is_empty() {
            return Err(RegionError::Invalid("union needs at least one member".to_string()));
        }
        let d = members[0].dim();
        for m in &members {
            if m.dim() != d {
                return Err(RegionError::DimensionMismatch { expected: d, got: m.dim() });
            }
        }
        if members.len() > 1 {
            let union = Region::DisjointUnion(members.clone());
            let (blo, bhi) = union.bounding_box();
            let mut rng = ChaCha8Rng::seed_from_u64(INTERNAL_MC_SEED);
            let mut point = vec![0.0; d];
            for _ in 0..DISJOINT_CHECK_POINTS {
                for k in 0..d {
                    point[k] = blo[k] + rng.gen::<f64>() * (bhi[k] - blo[k]);
                }
                let hits = members.iter().filter(|m| m.contains(&point)).count();
                if hits >= 2 {
                    return Err(RegionError::NotDisjoint(point));
                }
            }
        }
        Ok(Region::DisjointUnion(members))
    }

    pub fn predicate(
        volume: f64,
        bounding_center: Vec<f64>,
        bounding_radius: f64,
        test: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    ) -> Result<Region, RegionError> {
        check_coords(&bounding_center)?;
        if !(volume >= 0.0 && volume.is_finite()) {
            return Err(RegionError::Invalid(format!("volume {} must be nonnegative", volume)));
        }
        if !(bounding_radius >= 0.0 && bounding_radius.is_finite()) {
            return Err(RegionError::Invalid(format!(
                "bounding radius {} must be nonnegative",
                bounding_radius
            )));
        }
        Ok(Region::Predicate(PredicateRegion {
            dim: bounding_center.len(),
            volume,
            bounding_center,
            bounding_radius,
            test,
        }))
    }

    /// The empty region in dimension `d` (volume zero, contains nothing).
    pub fn empty(d: usize) -> Region {
        Region::Predicate(PredicateRegion {
            dim: d,
            volume: 0.0,
            bounding_center: vec![0.0; d],
            bounding_radius: 0.0,
            test: Arc::new(|_| false),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box { lo, .. } => lo.len(),
            Region::Annulus { center, .. } => center.len(),
            Region::DisjointUnion(members) => members[0].dim(),
            Region::Predicate(p) => p.dim,
        }
    }

    /// Exact Lebesgue measure.
    pub fn volume(&self) -> f64 {
        match self {
            Region::Ball { center, radius } => {
                unit_ball_volume(center.len()) * radius.powi(center.len() as i32)
            }
            Region::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Region::Annulus { center, r_in, r_out } => {
                let d = center.len() as i32;
                unit_ball_volume(center.len()) * (r_out.powi(d) - r_in.powi(d))
            }
            Region::DisjointUnion(members) => members.iter().map(Region::volume).sum(),
            Region::Predicate(p) => p.volume,
        }
    }

    /// Closed-set membership. The caller must match dimensions.
    pub fn contains(&self, v: &[f64]) -> bool {
        debug_assert_eq!(v.len(), self.dim());
        match self {
            Region::Ball { center, radius } => dist_sq(v, center) <= radius * radius,
            Region::Box { lo, hi } => {
                v.iter().zip(lo).all(|(x, a)| x >= a) && v.iter().zip(hi).all(|(x, b)| x <= b)
            }
            Region::Annulus { center, r_in, r_out } => {
                let d2 = dist_sq(v, center);
                r_in * r_in <= d2 && d2 <= r_out * r_out
            }
            Region::DisjointUnion(members) => members.iter().any(|m| m.contains(v)),
            Region::Predicate(p) => {
                dist_sq(v, &p.bounding_center) <= p.bounding_radius * p.bounding_radius
                    && (p.test)(v)
            }
        }
    }

    /// A ball containing the region: tight for balls, annuli, and boxes;
    /// for unions, the pairwise enclosing-ball merge of the member balls.
    pub fn bounding_ball(&self) -> (Vec<f64>, f64) {
        match self {
            Region::Ball { center, radius } => (center.clone(), *radius),
            Region::Box { lo, hi } => {
                let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                let r_sq: f64 = lo.iter().zip(hi).map(|(a, b)| 0.25 * (b - a) * (b - a)).sum();
                (center, r_sq.sqrt())
            }
            Region::Annulus { center, r_out, .. } => (center.clone(), *r_out),
            Region::DisjointUnion(members) => {
                let mut acc = members[0].bounding_ball();
                for m in &members[1..] {
                    acc = merge_balls(&acc, &m.bounding_ball());
                }
                acc
            }
            Region::Predicate(p) => (p.bounding_center.clone(), p.bounding_radius),
        }
    }

    /// Axis-aligned bounding box (derived from the bounding ball for
    /// non-box shapes).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::DisjointUnion(members) => {
                let (mut lo, mut hi) = members[0].bounding_box();
                for m in &members[1..] {
                    let (mlo, mhi) = m.bounding_box();
                    for k in 0..lo.len() {
                        lo[k] = lo[k].min(mlo[k]);
                        hi[k] = hi[k].max(mhi[k]);
                    }
                }
                (lo, hi)
            }
            _ => {
                let (c, r) = self.bounding_ball();
                (c.iter().map(|x| x - r).collect(), c.iter().map(|x| x + r).collect())
            }
        }
    }

    /// JSON description. Predicate regions serialize as an opaque stub
    /// (volume only) and cannot be parsed back.
    pub fn to_json(&self) -> Value {
        match self {
            Region::Ball { center, radius } => {
                json!({"type": "ball", "center": center, "radius": radius})
            }
            Region::Box { lo, hi } => json!({"type": "box", "lo": lo, "hi": hi}),
            Region::Annulus { center, r_in, r_out } => {
                json!({"type": "annulus", "center": center, "r_in": r_in, "r_out": r_out})
            }
            Region::DisjointUnion(members) => {
                json!({"type": "union", "members": members.iter().map(Region::to_json).collect::<Vec<_>>()})
            }
            Region::Predicate(p) => json!({"type": "predicate", "volume": p.volume}),
        }
    }

    /// Parse a JSON region description in ambient dimension `d`. The
    /// `radial` type parses a list of intervals and lifts it through
    /// [`lift_radial`].
    pub fn from_json(value: &Value, d: usize) -> Result<Region, RegionError> {
        let kind = value
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| RegionError::Parse("missing \"type\" field".to_string()))?;
        let coords = |field: &str| -> Result<Vec<f64>, RegionError> {
            let arr = value
                .get(field)
                .and_then(Value::as_array)
                .ok_or_else(|| RegionError::Parse(format!("missing array field \"{}\"", field)))?;
            let v: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
            let v = v.ok_or_else(|| RegionError::Parse(format!("non-numeric entry in \"{}\"", field)))?;
            if v.len() != d {
                return Err(RegionError::DimensionMismatch { expected: d, got: v.len() });
            }
            Ok(v)
        };
        let scalar = |field: &str| -> Result<f64, RegionError> {
            value
                .get(field)
                .and_then(Value::as_f64)
                .ok_or_else(|| RegionError::Parse(format!("missing numeric field \"{}\"", field)))
        };
        match kind {
            "ball" => Region::ball(coords("center")?, scalar("radius")?),
            "box" => Region::box_corners(coords("lo")?, coords("hi")?),
            "annulus" => Region::annulus(coords("center")?, scalar("r_in")?, scalar("r_out")?),
            "union" => {
                let members = value
                    .get("members")
                    .and_then(Value::as_array)
                    .ok_or_else(|| RegionError::Parse("missing \"members\" array".to_string()))?;
                let parsed: Result<Vec<Region>, RegionError> =
                    members.iter().map(|m| Region::from_json(m, d)).collect();
                Region::disjoint_union(parsed?)
            }
            "radial" => {
                let arr = value
                    .get("intervals")
                    .and_then(Value::as_array)
                    .ok_or_else(|| RegionError::Parse("missing \"intervals\" array".to_string()))?;
                let mut intervals = Vec::new();
                for pair in arr {
                    let p = pair
                        .as_array()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| RegionError::Parse("interval must be [a, b]".to_string()))?;
                    let a = p[0].as_f64().ok_or_else(|| RegionError::Parse("bad interval".into()))?;
                    let b = p[1].as_f64().ok_or_else(|| RegionError::Parse("bad interval".into()))?;
                    intervals.push((a, b));
                }
                lift_radial(&RadialSet::new(intervals)?, d)
            }
            other => Err(RegionError::Parse(format!("unknown region type \"{}\"", other))),
        }
    }
}

fn check_coords(v: &[f64]) -> Result<(), RegionError> {
    if v.is_empty() {
        return Err(RegionError::Invalid("empty coordinate vector".to_string()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(RegionError::Invalid("non-finite coordinate".to_string()));
    }
    Ok(())
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest ball enclosing two balls.
fn merge_balls(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> (Vec<f64>, f64) {
    let d = dist_sq(&a.0, &b.0).sqrt();
    if d + b.1 <= a.1 {
        return a.clone();
    }
    if d + a.1 <= b.1 {
        return b.clone();
    }
    let r = 0.5 * (d + a.1 + b.1);
    // Center sits on the segment, at distance r - a.1 past a's center.
    let t = (r - a.1) / d;
    let center = a.0.iter().zip(&b.0).map(|(x, y)| x + t * (y - x)).collect();
    (center, r)
}

/// A finite union of intervals in `R^+`, strictly separated and sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSet {
    intervals: Vec<(f64, f64)>,
}

impl RadialSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<RadialSet, RegionError> {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b) {
                return Err(RegionError::Invalid(format!(
                    "radial interval [{}, {}] must satisfy 0 <= a < b",
                    a, b
                )));
            }
        }
        for w in intervals.windows(2) {
            if w[0].1 >= w[1].0 {
                return Err(RegionError::Invalid(format!(
                    "radial intervals [{}, {}] and [{}, {}] are not disjoint",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(RadialSet { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.intervals.last().map_or(0.0, |&(_, b)| b)
    }

    /// Whether `r` lies in the set (closed intervals).
    pub fn contains(&self, r: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= r && r <= b)
    }
}

/// The `d`-dimensional measure `Σ_i N_d (b_i^d − a_i^d)` of the lift — the
/// closed form of `d N_d ∫_S r^{d-1} dr`.
pub fn radial_volume(s: &RadialSet, d: usize) -> f64 {
    let nd = unit_ball_volume(d);
    s.intervals.iter().map(|&(a, b)| nd * (b.powi(d as i32) - a.powi(d as i32))).sum()
}

/// Lift `S ⊂ R^+` to `{v ∈ R^d : ‖v‖ ∈ S}`: a union of origin-centered
/// annuli, with an interval starting at 0 degenerating to a ball. The empty
/// set lifts to the empty region.
pub fn lift_radial(s: &RadialSet, d: usize) -> Result<Region, RegionError> {
    if s.is_empty() {
        return Ok(Region::empty(d));
    }
    let members: Result<Vec<Region>, RegionError> = s
        .intervals
        .iter()
        .map(|&(a, b)| {
            if a == 0.0 {
                Region::ball(vec![0.0; d], b)
            } else {
                Region::annulus(vec![0.0; d], a, b)
            }
        })
        .collect();
    let mut members = members?;
    if members.len() == 1 {
        Ok(members.pop().expect("nonempty"))
    } else {
        // Strictly separated intervals lift to disjoint shells; the
        // constructor's overlap check runs anyway.
        Region::disjoint_union(members)
    }
}

/// `|A ∩ B|`: closed forms for box pairs and ball pairs (d ≤ 3), Monte
/// Carlo with 10^6 deterministic points otherwise. Returns 0 when the
/// bounding boxes do not meet.
pub fn intersection_volume(a: &Region, b: &Region) -> f64 {
    assert_eq!(a.dim(), b.dim(), "intersection of mismatched dimensions");
    match (a, b) {
        (Region::Box { lo: alo, hi: ahi }, Region::Box { lo: blo, hi: bhi }) => {
            let mut v = 1.0;
            for k in 0..alo.len() {
                let side = (ahi[k].min(bhi[k]) - alo[k].max(blo[k])).max(0.0);
                v *= side;
            }
            v
        }
        (Region::Ball { center: ca, radius: ra }, Region::Ball { center: cb, radius: rb })
            if ca.len() <= 3 =>
        {
            ball_ball_volume(ca, *ra, cb, *rb)
        }
        _ => monte_carlo_intersection(a, b),
    }
}

fn ball_ball_volume(ca: &[f64], ra: f64, cb: &[f64], rb: f64) -> f64 {
    let d = dist_sq(ca, cb).sqrt();
    let dim = ca.len();
    if d >= ra + rb {
        return 0.0;
    }
    if d <= (ra - rb).abs() {
        let r = ra.min(rb);
        return unit_ball_volume(dim) * r.powi(dim as i32);
    }
    match dim {
        1 => (ra + rb - d).min(2.0 * ra.min(rb)),
        2 => {
            // Lens area of two overlapping disks.
            let alpha = ((d * d + ra * ra - rb * rb) / (2.0 * d * ra)).clamp(-1.0, 1.0).acos();
            let beta = ((d * d + rb * rb - ra * ra) / (2.0 * d * rb)).clamp(-1.0, 1.0).acos();
            ra * ra * (alpha - alpha.sin() * alpha.cos())
                + rb * rb * (beta - beta.sin() * beta.cos())
        }
        3 => {
            // Two spherical caps.
            let h1 = (ra - (d * d + ra * ra - rb * rb) / (2.0 * d)).max(0.0);
            let h2 = (rb - (d * d + rb * rb - ra * ra) / (2.0 * d)).max(0.0);
            std::f64::consts::PI / 3.0
                * (h1 * h1 * (3.0 * ra - h1) + h2 * h2 * (3.0 * rb - h2))
        }
        _ => unreachable!("guarded by caller"),
    }
}

fn monte_carlo_intersection(a: &Region, b: &Region) -> f64 {
    let (alo, ahi) = a.bounding_box();
    let (blo, bhi) = b.bounding_box();
    let d = alo.len();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    let mut box_vol = 1.0;
    for k in 0..d {
        lo[k] = alo[k].max(blo[k]);
        hi[k] = ahi[k].min(bhi[k]);
        if lo[k] >= hi[k] {
            return 0.0;
        }
        box_vol *= hi[k] - lo[k];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(INTERNAL_MC_SEED ^ 0x5f5f);
    let mut hits = 0u64;
    let mut point = vec![0.0; d];
    for _ in 0..INTERSECTION_MC_POINTS {
        for k in 0..d {
            point[k] = lo[k] + rng.gen::<f64>() * (hi[k] - lo[k]);
        }
        if a.contains(&point) && b.contains(&point) {
            hits += 1;
        }
    }
    box_vol * hits as f64 / INTERSECTION_MC_POINTS as f64
}
