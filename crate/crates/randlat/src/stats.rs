//! Small statistical toolbox shared by the estimators and the test suite.
//!
//! Everything here is elementary and deterministic given its inputs: sample
//! moments with standard errors, a studentized bootstrap for the variance,
//! the Wilson score interval for proportions, and the two-sample
//! Kolmogorov–Smirnov statistic used to compare samplers.
//!
//! The variance interval deserves a word. Lattice-point counts are heavy
//! tailed: a lattice whose shortest vector has length ε packs ≈ 1/ε points
//! of a fixed region onto one line, and such lattices have measure ≈ ε², so
//! the count's third moment already diverges logarithmically in d = 2. The
//! sample variance is still unbiased, but its sampling distribution is
//! strongly right-skewed — the typical sample lands below the truth and
//! rare spiked samples make up the difference. A plain percentile bootstrap
//! inherits that skew and undercovers from below, because a sample that
//! happened to miss the spikes also produces resamples without spikes: both
//! the point estimate and the naive interval width shrink together. The
//! studentized (bootstrap-t) interval corrects for this by bootstrapping
//! the *ratio* (v* − v)/se*, where se* is the delta-method standard error
//! recomputed on each resample. Resamples that miss the spikes get a small
//! se* and hence a large negative ratio, so the left tail of the ratio
//! distribution stretches exactly when the data warn that the estimate may
//! sit far below the truth — and the interval's upper arm grows to match.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Sample mean and its standard error `s/√n` (Bessel-corrected `s`).
/// Returns `(mean, 0.0)` for `n < 2`.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Bessel-corrected sample variance; 0 for `n < 2`.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

/// Studentized (bootstrap-t) 95% interval for the sample variance: `b`
/// resamples with replacement, each studentized by its own delta-method
/// standard error (see the module docs for why plain percentiles
/// undercover here). The interval is
/// `[v − t_{0.975}·se, v − t_{0.025}·se]` with `t_q` the bootstrap
/// quantiles of `(v* − v)/se*` and `se` the delta-method standard error of
/// the full sample; the lower limit is clamped at zero.
///
/// The reported standard error is the larger of the replicate standard
/// deviation and the replicate interquantile width `(q97.5 − q2.5)/3.92`.
/// The two agree on a normal bootstrap distribution; under the skew
/// described in the module docs the plain standard deviation is an
/// unreliable width measure, and the quantile version is the standard
/// robust scale.
///
/// Returns `(std_error, ci_lo, ci_hi)`.
pub fn bootstrap_variance(xs: &[f64], b: usize, seed: u64) -> (f64, f64, f64) {
    assert!(xs.len() >= 2, "bootstrap needs at least two observations");
    assert!(b >= 2, "bootstrap needs at least two resamples");
    let n = xs.len();
    let (_, m2, m4) = central_moments(xs);
    let v = m2 * n as f64 / (n - 1) as f64;
    let se_hat = variance_plugin_se(n, m2, m4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vars = Vec::with_capacity(b);
    let mut ts = Vec::with_capacity(b);
    let mut resample = vec![0.0; n];
    for _ in 0..b {
        for slot in resample.iter_mut() {
            *slot = xs[rng.gen_range(0..n)];
        }
        let (_, r2, r4) = central_moments(&resample);
        let v_star = r2 * n as f64 / (n - 1) as f64;
        vars.push(v_star);
        let se_star = variance_plugin_se(n, r2, r4);
        if se_star > 0.0 {
            ts.push((v_star - v) / se_star);
        }
    }
    let (mean_v, _) = mean_and_se(&vars);
    let sd = (vars.iter().map(|x| (x - mean_v) * (x - mean_v)).sum::<f64>() / (b - 1) as f64)
        .sqrt();
    vars.sort_by(f64::total_cmp);
    let quantile_width = (vars[percentile_index(b, 0.975)] - vars[percentile_index(b, 0.025)])
        / (2.0 * Z_95);

    // Constant resamples carry no studentized information and were dropped;
    // if nothing is left the data were essentially constant too, and the
    // degenerate interval is honest.
    ts.sort_by(f64::total_cmp);
    let (lo, hi) = if ts.is_empty() {
        (v, v)
    } else {
        let t_lo = ts[percentile_index(ts.len(), 0.025)];
        let t_hi = ts[percentile_index(ts.len(), 0.975)];
        ((v - t_hi * se_hat).max(0.0), v - t_lo * se_hat)
    };
    (sd.max(quantile_width), lo, hi)
}

/// Mean and the biased (divide-by-n) second and fourth central moments.
fn central_moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &x in xs {
        let d2 = (x - mean) * (x - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m4 / n)
}

/// Delta-method standard error of the Bessel-corrected sample variance,
/// `Var(s²) ≈ (m4 − s⁴·(n−3)/(n−1)) / n`, from plug-in sample moments.
fn variance_plugin_se(n: usize, m2: f64, m4: f64) -> f64 {
    let nf = n as f64;
    let s2 = m2 * nf / (nf - 1.0);
    ((m4 - s2 * s2 * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0).sqrt()
}

fn percentile_index(b: usize, q: f64) -> usize {
    ((q.clamp(0.0, 1.0) * (b - 1) as f64).round() as usize).min(b - 1)
}

/// Standard normal CDF by the Abramowitz–Stegun 26.2.17 polynomial
/// (absolute error < 7.5e-8 — ample for picking bootstrap percentiles).
pub fn standard_normal_cdf(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.231_641_9 * z);
    let poly = t
        * (0.319_381_530
            + t * (-0.356_563_782
                + t * (1.781_477_937 + t * (-1.821_255_978 + t * 1.330_274_429))));
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper = phi * poly;
    if x >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

/// Standard normal quantile by Acklam's rational approximation
/// (relative error < 1.2e-9 over (0, 1)).
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0, 1), got {}", p);
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p > 1.0 - P_LOW {
        -standard_normal_quantile(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0, "Wilson interval needs at least one trial");
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // At the boundaries the analytic endpoints are exactly 0 and 1;
    // cancellation in center − half would otherwise leave ±1e-18 dust.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Two-sample Kolmogorov–Smirnov statistic: the supremum distance between
/// the two empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS needs nonempty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Advance past ties together so the CDFs are compared at each
        // distinct value with all equal points absorbed.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Pearson chi-square statistic for observed counts against expected counts.
pub fn chi_square_stat(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            assert!(e > 0.0, "expected counts must be positive");
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_and_se_basics() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5, epsilon = 1e-12);
        // s^2 = (2.25 + 0.25 + 0.25 + 2.25)/3 = 5/3; se = sqrt(5/12).
        assert_abs_diff_eq!(se, (5.0f64 / 12.0).sqrt(), epsilon = 1e-12);
        let (m, se) = mean_and_se(&[7.0]);
        assert_eq!((m, se), (7.0, 0.0));
    }

    #[test]
    fn sample_variance_matches_hand_computation() {
        assert_abs_diff_eq!(sample_variance(&[1.0, 2.0, 3.0, 4.0]), 5.0 / 3.0, epsilon = 1e-12);
        assert_eq!(sample_variance(&[5.0]), 0.0);
        assert_eq!(sample_variance(&[2.0, 2.0, 2.0]), 0.0);
    }

    #[test]
    fn bootstrap_variance_brackets_truth_on_gaussian_data() {
        // N(0, 9) sample: the 95% interval should contain 9 and the SE
        // should be near the asymptotic sd(s^2) ≈ σ² √(2/(n−1)).
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 4000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                // Box-Muller.
                let u1: f64 = rng.gen::<f64>().max(1e-12);
                let u2: f64 = rng.gen();
                3.0 * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let v = sample_variance(&xs);
        let (se, lo, hi) = bootstrap_variance(&xs, 1000, 7);
        assert!(lo <= 9.0 && 9.0 <= hi, "CI [{}, {}] misses 9", lo, hi);
        assert!(lo <= v && v <= hi, "CI [{}, {}] misses estimate {}", lo, hi, v);
        let asymptotic = 9.0 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!(
            (se - asymptotic).abs() < 0.5 * asymptotic,
            "bootstrap se {} far from asymptotic {}",
            se,
            asymptotic
        );
    }

    #[test]
    fn normal_cdf_and_quantile_match_tabulated_values() {
        // Φ at textbook points.
        assert_abs_diff_eq!(standard_normal_cdf(0.0), 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(standard_normal_cdf(1.0), 0.841_344_746, epsilon = 1e-7);
        assert_abs_diff_eq!(standard_normal_cdf(-1.0), 0.158_655_254, epsilon = 1e-7);
        assert_abs_diff_eq!(standard_normal_cdf(1.96), 0.975_002_105, epsilon = 1e-7);
        assert_abs_diff_eq!(standard_normal_cdf(3.0), 0.998_650_102, epsilon = 1e-7);
        // Quantile at textbook points, and as the inverse of the CDF.
        assert_abs_diff_eq!(standard_normal_quantile(0.5), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(standard_normal_quantile(0.975), Z_95, epsilon = 1e-7);
        assert_abs_diff_eq!(standard_normal_quantile(0.025), -Z_95, epsilon = 1e-7);
        for &p in &[0.001, 0.01, 0.1, 0.3, 0.7, 0.9, 0.99, 0.999] {
            let z = standard_normal_quantile(p);
            assert_abs_diff_eq!(standard_normal_cdf(z), p, epsilon = 2e-7);
        }
    }

    #[test]
    #[should_panic(expected = "quantile needs p in (0, 1)")]
    fn quantile_rejects_boundary() {
        standard_normal_quantile(1.0);
    }

    #[test]
    fn studentized_interval_shifts_upward_on_right_skewed_data() {
        // Exponential-like data: the sampling distribution of s² is
        // right-skewed, so the studentized upper arm must be longer than
        // the lower one, and the interval must still cover the truth
        // (Exp(1) has σ² = 1).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> =
            (0..4000).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
        let v = sample_variance(&xs);
        let (_, lo, hi) = bootstrap_variance(&xs, 1000, 11);
        assert!(lo <= 1.0 && 1.0 <= hi, "CI [{}, {}] misses 1", lo, hi);
        assert!(
            hi - v > v - lo,
            "upper arm {} not longer than lower arm {}",
            hi - v,
            v - lo
        );
    }

    #[test]
    fn bootstrap_is_deterministic_in_seed() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(bootstrap_variance(&xs, 200, 5), bootstrap_variance(&xs, 200, 5));
        assert_ne!(bootstrap_variance(&xs, 200, 5), bootstrap_variance(&xs, 200, 6));
    }

    #[test]
    fn wilson_interval_known_values() {
        // p̂ = 0.5, n = 100, z = 1.96: the classical score interval.
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert_abs_diff_eq!(lo, 0.404, epsilon = 2e-3);
        assert_abs_diff_eq!(hi, 0.596, epsilon = 2e-3);
        // Degenerate p̂ = 0 still gives a positive upper bound.
        let (lo, hi) = wilson_interval(0, 100, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        // And p̂ = 1 mirrors it.
        let (lo, hi) = wilson_interval(100, 100, Z_95);
        assert!(lo > 0.95 && lo < 1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn ks_statistic_hand_examples() {
        // Identical samples: distance zero.
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        // Fully separated samples: distance one.
        assert_eq!(ks_statistic(&[0.0, 0.1], &[5.0, 6.0]), 1.0);
        // Hand-checked: a = {1, 3}, b = {2, 4}; after x = 1 the CDF gap is
        // 1/2, after 2 it is 0, after 3 it is 1/2.
        assert_abs_diff_eq!(ks_statistic(&[1.0, 3.0], &[2.0, 4.0]), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ks_statistic_small_for_same_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        // 0.001-level two-sample critical value at n = m = 5000 is about
        // 1.95 √(2/5000) ≈ 0.039.
        assert!(ks_statistic(&a, &b) < 0.039);
        // A location shift of 0.2 on U(0,1) must be detected.
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        assert!(ks_statistic(&shifted, &b) > 0.15);
    }

    #[test]
    fn chi_square_hand_example() {
        // Observed (10, 20, 30) vs expected (20, 20, 20):
        // 100/20 + 0 + 100/20 = 10.
        assert_abs_diff_eq!(
            chi_square_stat(&[10, 20, 30], &[20.0, 20.0, 20.0]),
            10.0,
            epsilon = 1e-12
        );
    }
}
