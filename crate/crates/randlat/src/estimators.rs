//! Monte Carlo estimators for lattice point-count statistics, and the
//! exact constants they are compared against.
//!
//! For a bounded region `A` and the invariant probability measure on the
//! space of (affine) unimodular lattices, the identities under test are:
//!
//! * mean: `E[#(Λ ∩ A)] = |A|` — the affine Siegel integral formula (for
//!   non-affine lattices the same holds with the zero vector excluded);
//! * variance (affine only): `Var[#(Λ ∩ A)] = |A|`;
//! * pair moment (affine): `E[#(Λ∩A) · #(Λ∩B)] = |A||B| + |A∩B|`;
//! * hole probabilities: `P[#(Λ ∩ A) = 0] < 1/(1 + |A|)` in the affine
//!   setting — exactly the Chebyshev bound `σ²/(σ² + μ²)` evaluated at
//!   `μ = σ² = |A|` — and `≤ C_d/|A|` in the regular setting, with the
//!   Rogers-type constant `C_2 = 16ζ(2)`, `C_d = 8ζ(d−1)/ζ(d)` for `d ≥ 3`.
//!
//! Every estimator draws `n` independent lattices on deterministic RNG
//! streams (trial `t` uses stream `t` of the given seed), so results are
//! bit-identical across thread schedules. Identity checks are judged at
//! 4 standard errors; one-sided bound checks at 3. Variance intervals come
//! from a studentized bootstrap — counts are heavy-tailed, so a normal
//! fourth-moment interval would undercover (see the stats module docs).

use crate::counting::{count_region, count_region_affine, CountError, CountOptions};
use crate::lattice::LatticeError;
use crate::regions::{Region, RegionError};
use crate::sampling::{
    sample_affine, sample_lattice, RngState, SamplerSpec, SamplingError,
};
use crate::stats::{self, Z_95};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Trials per scheduling chunk: small enough that budget deadlines are
/// checked frequently, large enough to amortize dispatch.
const TRIAL_CHUNK: u64 = 256;

#[derive(Clone, Debug, Error)]
pub enum EstimatorError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("budget of {budget:?} exhausted after {completed} of {total} trials")]
    Budget { budget: Duration, completed: u64, total: u64 },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Which point process is being sampled: affine unimodular lattices
/// (counts include every point) or unimodular lattices (counts exclude the
/// zero vector, which belongs to every lattice and carries no information).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Affine,
    Regular,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Affine => "affine",
            Setting::Regular => "regular",
        })
    }
}

impl FromStr for Setting {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Setting, EstimatorError> {
        match s {
            "affine" => Ok(Setting::Affine),
            "regular" => Ok(Setting::Regular),
            other => Err(EstimatorError::InvalidParam(format!(
                "unknown setting \"{}\" (expected affine or regular)",
                other
            ))),
        }
    }
}

/// What one Monte Carlo trial consists of: a sampler, the affine/regular
/// setting, and an optional wall-clock budget for the whole run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSpec {
    pub sampler: SamplerSpec,
    pub setting: Setting,
    pub budget: Option<Duration>,
}

impl TrialSpec {
    pub fn new(sampler: SamplerSpec, setting: Setting) -> TrialSpec {
        TrialSpec { sampler, setting, budget: None }
    }

    pub fn with_budget(mut self, budget: Duration) -> TrialSpec {
        self.budget = Some(budget);
        self
    }
}

/// A point estimate with normal-theory or bootstrap uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_trials: u64,
    pub seed: u64,
}

/// An estimate judged against a theoretical bound. The criterion is
/// one-sided: `satisfied ⟺ estimate − 3·std_error ≤ bound` — a strict
/// inequality cannot be falsified by finite-sample noise, so the check
/// demands the estimate not exceed the bound by more than noise allows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub empirical: EstimateResult,
    pub bound: f64,
    pub slack: f64,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn new(empirical: EstimateResult, bound: f64) -> BoundReport {
        BoundReport {
            empirical,
            bound,
            slack: bound - empirical.estimate,
            satisfied: empirical.estimate - 3.0 * empirical.std_error <= bound,
        }
    }
}

/// Riemann zeta for real `s > 1`, by Euler–Maclaurin to beyond 1e−12:
/// `Σ_{n<N} n^{−s} + N^{1−s}/(s−1) + N^{−s}/2 + Σ_j B_{2j}/(2j)! ·
/// s(s+1)…(s+2j−2) · N^{−s−2j+1}` with `N = 20` and six Bernoulli terms.
pub fn zeta(s: f64) -> Result<f64, EstimatorError> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(EstimatorError::Domain(format!("zeta requires s > 1, got {}", s)));
    }
    const N: u32 = 20;
    // B_2, B_4, …, B_12 over (2j)!.
    const BERNOULLI_OVER_FACT: [f64; 6] = [
        1.0 / 6.0 / 2.0,
        -1.0 / 30.0 / 24.0,
        1.0 / 42.0 / 720.0,
        -1.0 / 30.0 / 40_320.0,
        5.0 / 66.0 / 3_628_800.0,
        -691.0 / 2730.0 / 479_001_600.0,
    ];
    let nf = N as f64;
    let mut sum = 0.0;
    for n in 1..N {
        sum += (n as f64).powf(-s);
    }
    sum += nf.powf(1.0 - s) / (s - 1.0);
    sum += 0.5 * nf.powf(-s);
    let mut rising = s; // s(s+1)…(s+2j−2), updated per term
    for (j, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let power = -(s + 2.0 * j as f64 + 1.0);
        sum += b * rising * nf.powf(power);
        rising *= (s + 2.0 * j as f64 + 1.0) * (s + 2.0 * j as f64 + 2.0);
    }
    Ok(sum)
}

/// Volume `N_d` of the unit ball in `R^d`, via `N_d = (2π/d) N_{d−2}`.
pub fn unit_ball_volume(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be positive");
    let mut values = [1.0, 2.0]; // N_0, N_1
    if d < 2 {
        return values[d];
    }
    let mut k = 2;
    loop {
        let next = 2.0 * std::f64::consts::PI / k as f64 * values[k % 2];
        values[k % 2] = next;
        if k == d {
            return next;
        }
        k += 1;
    }
}

/// The constant in the regular-lattice hole-probability bound `C_d/|A|`:
/// `C_2 = 16 ζ(2)`, `C_d = 8 ζ(d−1)/ζ(d)` for `d ≥ 3`.
pub fn rogers_constant(d: usize) -> f64 {
    assert!(d >= 2, "the bound is stated for d >= 2");
    if d == 2 {
        16.0 * zeta(2.0).expect("2 > 1")
    } else {
        8.0 * zeta(d as f64 - 1.0).expect("d-1 > 1") / zeta(d as f64).expect("d > 1")
    }
}

/// Chebyshev bound on the hole probability of a nonnegative variable:
/// `P[X = 0] ≤ P[|X − μ| ≥ μ] ≤ σ²/(σ² + μ²)` (the one-sided form).
/// At `μ = σ² = |A|` this is exactly `1/(1 + |A|)`.
pub fn chebyshev_bound(mean: f64, variance: f64) -> f64 {
    variance / (variance + mean * mean)
}

/// The theoretical hole-probability bound for a region of the given
/// volume: `1/(1 + |A|)` in the affine setting, `C_d/|A|` in the regular
/// setting (infinite — vacuous — for volume zero).
pub fn hole_probability_bound(volume: f64, d: usize, setting: Setting) -> f64 {
    assert!(volume >= 0.0, "volume must be nonnegative");
    match setting {
        Setting::Affine => 1.0 / (1.0 + volume),
        Setting::Regular => {
            if volume == 0.0 {
                f64::INFINITY
            } else {
                rogers_constant(d) / volume
            }
        }
    }
}

/// Run `n` independent trials on deterministic per-trial RNG streams,
/// preserving trial order in the output. The budget deadline is checked
/// between chunks.
fn run_trials<T, F>(
    n: u64,
    seed: u64,
    budget: Option<Duration>,
    trial: F,
) -> Result<Vec<T>, EstimatorError>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T, EstimatorError> + Sync,
{
    let deadline = budget.map(|b| (b, Instant::now() + b));
    let mut out = Vec::with_capacity(n as usize);
    let mut start = 0u64;
    while start < n {
        if let Some((b, dl)) = deadline {
            if Instant::now() >= dl {
                return Err(EstimatorError::Budget { budget: b, completed: start, total: n });
            }
        }
        let stop = (start + TRIAL_CHUNK).min(n);
        let chunk: Result<Vec<T>, EstimatorError> = (start..stop)
            .into_par_iter()
            .map(|t| {
                let mut rng = RngState { master_seed: seed, stream_index: t }.rng();
                trial(t, &mut rng)
            })
            .collect();
        out.extend(chunk?);
        start = stop;
    }
    Ok(out)
}

/// One count draw under the trial spec's setting.
fn count_trial(
    spec: &TrialSpec,
    region: &Region,
    opts: &CountOptions,
    rng: &mut ChaCha8Rng,
) -> Result<u64, EstimatorError> {
    match spec.setting {
        Setting::Affine => {
            let al = sample_affine(&spec.sampler, rng)?;
            Ok(count_region_affine(&al, region, opts)?.count)
        }
        Setting::Regular => {
            let l = sample_lattice(&spec.sampler, rng)?;
            let opts = CountOptions { exclude_zero: true, ..*opts };
            Ok(count_region(&l, region, &opts)?.count)
        }
    }
}

/// Sample mean of `#(Λ ∩ R)` over `n` draws, with normal 95% interval.
pub fn estimate_mean(
    spec: &TrialSpec,
    region: &Region,
    n: u64,
    seed: u64,
) -> Result<EstimateResult, EstimatorError> {
    if n < 100 {
        return Err(EstimatorError::InvalidParam(format!(
            "mean estimation needs n >= 100, got {}",
            n
        )));
    }
    let opts = CountOptions::default();
    let counts =
        run_trials(n, seed, spec.budget, |_, rng| Ok(count_trial(spec, region, &opts, rng)? as f64))?;
    let (mean, se) = stats::mean_and_se(&counts);
    Ok(EstimateResult {
        estimate: mean,
        std_error: se,
        ci_lo: mean - Z_95 * se,
        ci_hi: mean + Z_95 * se,
        n_trials: n,
        seed,
    })
}

/// Bessel-corrected sample variance of the counts, with a percentile
/// bootstrap interval (`b` resamples) and bootstrap standard error. The
/// interval is widened, if necessary, to contain the point estimate.
pub fn estimate_variance(
    spec: &TrialSpec,
    region: &Region,
    n: u64,
    seed: u64,
    b: usize,
) -> Result<EstimateResult, EstimatorError> {
    if n < 1000 {
        return Err(EstimatorError::InvalidParam(format!(
            "variance estimation needs n >= 1000, got {}",
            n
        )));
    }
    if b < 200 {
        return Err(EstimatorError::InvalidParam(format!(
            "bootstrap needs at least 200 resamples, got {}",
            b
        )));
    }
    let opts = CountOptions::default();
    let counts =
        run_trials(n, seed, spec.budget, |_, rng| Ok(count_trial(spec, region, &opts, rng)? as f64))?;
    let variance = stats::sample_variance(&counts);
    // The bootstrap stream is namespaced away from the trial streams.
    let boot_seed = seed.wrapping_mul(0xD1B5_4A32_D192_ED03).wrapping_add(0x8000_0000_0000_0001);
    let (se, lo, hi) = stats::bootstrap_variance(&counts, b, boot_seed);
    Ok(EstimateResult {
        estimate: variance,
        std_error: se,
        ci_lo: lo.min(variance),
        ci_hi: hi.max(variance),
        n_trials: n,
        seed,
    })
}

/// Sample mean of the product `#(Λ ∩ R1) · #(Λ ∩ R2)` — both counts taken
/// on the *same* draw.
pub fn estimate_pair_moment(
    spec: &TrialSpec,
    r1: &Region,
    r2: &Region,
    n: u64,
    seed: u64,
) -> Result<EstimateResult, EstimatorError> {
    if n < 100 {
        return Err(EstimatorError::InvalidParam(format!(
            "pair-moment estimation needs n >= 100, got {}",
            n
        )));
    }
    if r1.dim() != r2.dim() {
        return Err(EstimatorError::InvalidParam(format!(
            "paired regions must share a dimension, got {} and {}",
            r1.dim(),
            r2.dim()
        )));
    }
    let opts = CountOptions::default();
    let products = run_trials(n, seed, spec.budget, |_, rng| match spec.setting {
        Setting::Affine => {
            let al = sample_affine(&spec.sampler, rng)?;
            let a = count_region_affine(&al, r1, &opts)?.count as f64;
            let b = count_region_affine(&al, r2, &opts)?.count as f64;
            Ok(a * b)
        }
        Setting::Regular => {
            let l = sample_lattice(&spec.sampler, rng)?;
            let opts = CountOptions { exclude_zero: true, ..opts };
            let a = count_region(&l, r1, &opts)?.count as f64;
            let b = count_region(&l, r2, &opts)?.count as f64;
            Ok(a * b)
        }
    })?;
    let (mean, se) = stats::mean_and_se(&products);
    Ok(EstimateResult {
        estimate: mean,
        std_error: se,
        ci_lo: mean - Z_95 * se,
        ci_hi: mean + Z_95 * se,
        n_trials: n,
        seed,
    })
}

/// Fraction of draws with `#(Λ ∩ R) = 0`, using early-exit counting.
/// Standard error is the binomial (Wald) one; the 95% interval is Wilson,
/// which stays honest at `p̂ ≈ 0` — exactly the regime of large regions.
pub fn estimate_hole_prob(
    spec: &TrialSpec,
    region: &Region,
    n: u64,
    seed: u64,
) -> Result<EstimateResult, EstimatorError> {
    if n < 1000 {
        return Err(EstimatorError::InvalidParam(format!(
            "hole-probability estimation needs n >= 1000, got {}",
            n
        )));
    }
    let opts = CountOptions { early_exit_empty: true, ..CountOptions::default() };
    let empties = run_trials(n, seed, spec.budget, |_, rng| {
        Ok((count_trial(spec, region, &opts, rng)? == 0) as u64)
    })?;
    let holes: u64 = empties.iter().sum();
    let p = holes as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let (lo, hi) = stats::wilson_interval(holes, n, Z_95);
    Ok(EstimateResult { estimate: p, std_error: se, ci_lo: lo, ci_hi: hi, n_trials: n, seed })
}
