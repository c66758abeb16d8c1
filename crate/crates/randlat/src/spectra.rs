//! Length spectra of dual lattices, and the spectrum of a random flat torus.
//!
//! The flat torus `R^d/Λ` has Laplace eigenvalues `4π²‖v‖²` over the
//! vectors `v` of the dual lattice `Λ* = B^{-T} Z^d`, so questions about
//! "which frequencies does a random torus carry" are questions about dual
//! vector lengths. Two facts make the machinery from the rest of the crate
//! apply directly:
//!
//! * duality preserves unimodularity (`det B^{-T} = 1/det B`), and
//! * the invariant measure is itself duality-invariant — `g ↦ (g^T)^{-1}`
//!   is an automorphism of the matrix group fixing the integer subgroup —
//!   so the dual of a random unimodular lattice is again one.
//!
//! A set `S` of radial intervals pulls back to the spherical-shell region
//! `A_S = {x : ‖x‖ ∈ S}`, and "the torus has no eigenvalue with frequency
//! in S" is the event that the dual lattice has no nonzero point in `A_S`.
//! Its probability therefore obeys the regular-lattice hole bound
//! `C_d/|A_S|`, checked here by [`verify_spectrum_bound`].

use crate::counting::{enumerate_in_ball, count_region, CountError, CountOptions};
use crate::estimators::{
    estimate_hole_prob, hole_probability_bound, BoundReport, EstimatorError, Setting, TrialSpec,
};
use crate::lattice::{LatticeError, UnimodularLattice};
use crate::regions::{lift_radial, radial_volume, RadialSet, RegionError};
use crate::sampling::SamplerSpec;
use std::time::Duration;
use thiserror::Error;

#[derive(Clone, Debug, Error)]
pub enum SpectraError {
    #[error("cutoff must be finite and nonnegative, got {0}")]
    InvalidCutoff(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// The low end of a torus spectrum: all nonzero dual-lattice vector
/// lengths up to a cutoff, sorted ascending (with multiplicity — dual
/// vectors come in `±` pairs, so counts are always even).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSample {
    pub dim: usize,
    pub cutoff: f64,
    pub lengths: Vec<f64>,
}

impl SpectrumSample {
    /// Number of dual vectors found (with multiplicity).
    pub fn multiplicity(&self) -> usize {
        self.lengths.len()
    }

    /// The corresponding Laplace eigenvalues `4π²ℓ²` of the flat torus.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let c = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        self.lengths.iter().map(|l| c * l * l).collect()
    }
}

/// All nonzero dual-lattice vector lengths `≤ cutoff` (closed, with the
/// crate-wide 1e-9 boundary tolerance), sorted ascending.
pub fn spectrum_up_to(
    l: &UnimodularLattice,
    cutoff: f64,
) -> Result<SpectrumSample, SpectraError> {
    if !cutoff.is_finite() || cutoff < 0.0 {
        return Err(SpectraError::InvalidCutoff(cutoff));
    }
    let dual = l.dual()?;
    let origin = vec![0.0; l.dim()];
    let mut lengths: Vec<f64> = enumerate_in_ball(&dual, &origin, cutoff)?
        .into_iter()
        .map(|v| v.norm())
        // Puncture out the zero vector (produced exactly, since all its
        // coefficients are zero); no nonzero vector of a unimodular
        // lattice comes anywhere near this threshold.
        .filter(|&r| r > 1e-12)
        .collect();
    lengths.sort_by(f64::total_cmp);
    Ok(SpectrumSample { dim: l.dim(), cutoff, lengths })
}

/// Whether the torus spectrum avoids `S` entirely: true iff no nonzero
/// dual vector has length in any interval of `S`. An empty `S` is avoided
/// vacuously.
pub fn spectrum_hole(l: &UnimodularLattice, s: &RadialSet) -> Result<bool, SpectraError> {
    if s.is_empty() {
        return Ok(true);
    }
    let dual = l.dual()?;
    let region = lift_radial(s, l.dim())?;
    let opts = CountOptions { exclude_zero: true, early_exit_empty: true, ..CountOptions::default() };
    Ok(count_region(&dual, &region, &opts)?.count == 0)
}

/// Estimate `P[spectrum avoids S]` over `n` random lattices and judge it
/// against the theoretical bound `C_d/|A_S|`.
///
/// Because the invariant measure is duality-invariant, the probability
/// that a random *dual* lattice misses `A_S` equals the probability that
/// a random lattice does — the same reduction the bound's proof makes. So
/// this delegates to the plain regular-lattice hole estimator, and agrees
/// with it per-seed, trial for trial. (Sampling duals explicitly gives the
/// same answer up to noise; a test below checks that empirically rather
/// than assuming it.)
pub fn verify_spectrum_bound(
    sampler: &SamplerSpec,
    s: &RadialSet,
    n: u64,
    seed: u64,
    budget: Option<Duration>,
) -> Result<BoundReport, SpectraError> {
    let d = sampler.d;
    let region = lift_radial(s, d)?;
    let spec = TrialSpec { sampler: *sampler, setting: Setting::Regular, budget };
    let empirical = estimate_hole_prob(&spec, &region, n, seed)?;
    let bound = hole_probability_bound(radial_volume(s, d), d, Setting::Regular);
    Ok(BoundReport::new(empirical, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::rogers_constant;
    use crate::mat::Matrix;
    use crate::sampling::{sample_lattice, RngState};
    use crate::stats;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn z2() -> UnimodularLattice {
        UnimodularLattice::from_matrix(Matrix::identity(2)).unwrap()
    }

    fn rectangular() -> UnimodularLattice {
        // Columns (2, 0) and (0, 1/2); dual basis columns (1/2, 0), (0, 2).
        UnimodularLattice::from_matrix(Matrix::from_cols(&[vec![2.0, 0.0], vec![0.0, 0.5]]))
            .unwrap()
    }

    #[test]
    fn z2_spectrum_up_to_one_and_a_half() {
        // Z² is self-dual: four vectors of length 1, four of length √2.
        let s = spectrum_up_to(&z2(), 1.5).unwrap();
        assert_eq!(s.multiplicity(), 8);
        for l in &s.lengths[..4] {
            assert_abs_diff_eq!(*l, 1.0, epsilon = 1e-12);
        }
        for l in &s.lengths[4..] {
            assert_abs_diff_eq!(*l, 2f64.sqrt(), epsilon = 1e-12);
        }
        assert!(s.lengths.windows(2).all(|w| w[0] <= w[1]), "not sorted");
        assert_abs_diff_eq!(s.eigenvalues()[0], 4.0 * PI * PI, epsilon = 1e-9);
    }

    #[test]
    fn rectangular_spectrum_sees_the_short_dual_vector() {
        let s = spectrum_up_to(&rectangular(), 0.6).unwrap();
        assert_eq!(s.lengths.len(), 2);
        assert_abs_diff_eq!(s.lengths[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lengths[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cutoff_validation() {
        assert!(matches!(spectrum_up_to(&z2(), -1.0), Err(SpectraError::InvalidCutoff(_))));
        assert!(matches!(spectrum_up_to(&z2(), f64::NAN), Err(SpectraError::InvalidCutoff(_))));
        let empty = spectrum_up_to(&z2(), 0.0).unwrap();
        assert!(empty.lengths.is_empty());
    }

    #[test]
    fn multiplicities_are_even() {
        // Dual vectors come in ± pairs.
        let mut rng = RngState { master_seed: 0x5bec, stream_index: 0 }.rng();
        for _ in 0..50 {
            let l = sample_lattice(&SamplerSpec::exact2(), &mut rng).unwrap();
            let s = spectrum_up_to(&l, 1.8).unwrap();
            assert_eq!(s.multiplicity() % 2, 0);
        }
    }

    #[test]
    fn mean_multiplicity_grows_like_ball_volume() {
        // E[#{nonzero dual vectors of length ≤ r}] = πr² for a random
        // 2-d lattice, since the dual is again invariant-distributed.
        let r = 5.0;
        let mut rng = RngState { master_seed: 0x9f07, stream_index: 0 }.rng();
        let counts: Vec<f64> = (0..300)
            .map(|_| {
                let l = sample_lattice(&SamplerSpec::exact2(), &mut rng).unwrap();
                spectrum_up_to(&l, r).unwrap().multiplicity() as f64
            })
            .collect();
        let (mean, se) = stats::mean_and_se(&counts);
        let target = PI * r * r;
        assert!(
            (mean - target).abs() <= 4.0 * se,
            "mean multiplicity {} vs πr² = {} (4se {})",
            mean,
            target,
            4.0 * se
        );
    }

    #[test]
    fn z2_holes() {
        // Z² dual lengths are √(m²+n²): 1, √2, 2, √5, … — nothing lies in
        // (1.05, 1.35), and 1 lies in (0.9, 1.1).
        let gap = RadialSet::new(vec![(1.05, 1.35)]).unwrap();
        assert!(spectrum_hole(&z2(), &gap).unwrap());
        let hit = RadialSet::new(vec![(0.9, 1.1)]).unwrap();
        assert!(!spectrum_hole(&z2(), &hit).unwrap());
        let empty = RadialSet::new(vec![]).unwrap();
        assert!(spectrum_hole(&z2(), &empty).unwrap());
    }

    #[test]
    fn hole_agrees_with_spectrum_scan() {
        let s = RadialSet::new(vec![(0.3, 0.8), (1.2, 1.6)]).unwrap();
        let mut rng = RngState { master_seed: 0x401e, stream_index: 0 }.rng();
        for _ in 0..100 {
            let l = sample_lattice(&SamplerSpec::exact2(), &mut rng).unwrap();
            let spectrum = spectrum_up_to(&l, s.max_radius()).unwrap();
            let scan_hole = !spectrum.lengths.iter().any(|&r| s.contains(r));
            assert_eq!(spectrum_hole(&l, &s).unwrap(), scan_hole);
        }
    }

    #[test]
    fn verify_matches_regular_hole_estimator_exactly() {
        // Same seeds must give the identical empirical frequency as the
        // plain regular-setting hole estimator on the lifted region.
        let s = RadialSet::new(vec![(0.5, 1.0)]).unwrap();
        let sampler = SamplerSpec::exact2();
        let n = 1_000u64;
        let seed = 0xd0d0;
        let report = verify_spectrum_bound(&sampler, &s, n, seed, None).unwrap();
        let spec = TrialSpec::new(sampler, Setting::Regular);
        let direct =
            estimate_hole_prob(&spec, &lift_radial(&s, 2).unwrap(), n, seed).unwrap();
        assert_eq!(report.empirical, direct);
        let volume = PI * (1.0 - 0.25);
        assert_abs_diff_eq!(report.bound, rogers_constant(2) / volume, epsilon = 1e-12);
        assert_abs_diff_eq!(
            report.slack,
            report.bound - report.empirical.estimate,
            epsilon = 1e-15
        );
    }

    #[test]
    fn duality_invariance_holds_empirically() {
        // The bound verifier leans on the dual of an invariant draw being
        // invariant-distributed; check it rather than assume it. Replay
        // the verifier's exact streams through spectrum_hole — which works
        // on each draw's dual — and compare hole frequencies. Each trial
        // difference is mean-zero under invariance; 2000 paired trials put
        // 0.05 beyond three worst-case standard errors.
        let s = RadialSet::new(vec![(0.5, 1.0)]).unwrap();
        let sampler = SamplerSpec::exact2();
        let n = 2_000u64;
        let seed = 0xd1a1;
        let report = verify_spectrum_bound(&sampler, &s, n, seed, None).unwrap();
        let mut dual_holes = 0u64;
        for t in 0..n {
            let mut rng = RngState { master_seed: seed, stream_index: t }.rng();
            let l = sample_lattice(&sampler, &mut rng).unwrap();
            if spectrum_hole(&l, &s).unwrap() {
                dual_holes += 1;
            }
        }
        let dual_rate = dual_holes as f64 / n as f64;
        assert!(
            (dual_rate - report.empirical.estimate).abs() < 0.05,
            "dual-side hole rate {} vs direct {}",
            dual_rate,
            report.empirical.estimate
        );
    }
}
