//! Random unimodular and affine unimodular lattices.
//!
//! This crate samples lattices from the invariant probability measures on
//! the space of unimodular lattices in dimension `d` (and its affine
//! extension), counts lattice points in bounded regions exactly, and
//! estimates the statistics that those measures pin down:
//!
//! * the mean and variance identities for affine point counts — both equal
//!   the region volume,
//! * the second-moment / pair-moment identities `|A||B| + |A ∩ B|`,
//! * hole-probability bounds: `1/(1+|A|)` in the affine setting and
//!   `C_d/|A|` for nonzero vectors of a random unimodular lattice,
//! * the analogous bound for the spectrum of a random flat torus, phrased
//!   through dual-lattice vector lengths.
//!
//! Modules follow the pipeline: [`lattice`] defines bases and lattices with
//! LLL reduction, [`sampling`] draws them from the invariant measures,
//! [`regions`] describes the sets we count in, [`counting`] enumerates
//! lattice points exactly, [`estimators`] turns per-trial counts into
//! statistics with error bars, and [`spectra`] applies the machinery to
//! dual-lattice length spectra.

pub mod counting;
pub mod estimators;
pub mod lattice;
pub mod mat;
pub mod regions;
pub mod sampling;
pub mod spectra;
pub mod stats;

mod enumerate;

pub use counting::{
    brute_force_count, brute_force_count_affine, count_region, count_region_affine,
    enumerate_in_ball, CountError, CountOptions, CountResult,
};
pub use estimators::{
    chebyshev_bound, estimate_hole_prob, estimate_mean, estimate_pair_moment, estimate_variance,
    hole_probability_bound, rogers_constant, unit_ball_volume, zeta, BoundReport, EstimateResult,
    EstimatorError, Setting, TrialSpec,
};
pub use lattice::{
    lll_reduce, AffineUnimodularLattice, Basis, LatticeError, UnimodularLattice, Vector,
};
pub use mat::Matrix;
pub use regions::{
    intersection_volume, lift_radial, radial_volume, RadialSet, Region, RegionError,
};
pub use sampling::{
    sample_affine, sample_lattice, sample_rotation, sample_torsion_affine, sample_x2_exact,
    sample_xd_hecke, sample_xd_siegel, sample_xd_siegel_with, RngState, SamplerMethod,
    SamplerSpec, SamplingError, SiegelOptions,
};
pub use spectra::{spectrum_hole, spectrum_up_to, verify_spectrum_bound, SpectraError, SpectrumSample};
