//! Samplers for Haar-random unimodular and affine unimodular lattices.
//!
//! Three constructions, cross-validated against each other:
//!
//! * **exact2** (`d = 2`): the classical fundamental-domain sampler. The
//!   shape of a 2-d unimodular lattice is a point `τ = x + iy` of the
//!   modular fundamental domain `{|x| ≤ 1/2, |τ| ≥ 1}`, carrying the
//!   hyperbolic measure `(3/π) y^{−2} dx dy`. We sample the strip
//!   `{|x| ≤ 1/2, y ≥ √3/2}` with the exact density — `y = (√3/2)/u` for
//!   `u` uniform turns `u`'s Lebesgue measure into `(√3/2) y^{−2} dy` — and
//!   reject the part below the unit circle (acceptance `π√3/6 ≈ 0.907`).
//!   A uniform rotation then restores the full Haar measure from the shape.
//!
//! * **siegel** (`2 ≤ d ≤ 4`): Iwasawa-coordinate rejection. Haar measure
//!   on upper-triangular unimodular matrices (positive diagonal `a`,
//!   unipotent part `n`) has density `∏_{k} exp(−λ_k s_k)` in the log-ratio
//!   coordinates `s_k = log(a_{k+1}/a_k)` with `λ_k = k(d−k)` — each pair
//!   `i < j` contributes a factor `a_j/a_i`, and `s_k` separates exactly
//!   `k(d−k)` such pairs. (For `d = 2` this is the `y^{−2} dy` density
//!   above, since `s = log y`.) We propose from the Siegel box
//!   `s_k ≥ log(√3/2)`, `|n_{ij}| ≤ 1/2` by drawing shifted exponentials,
//!   and accept when the basis is HKZ-reduced: every diagonal entry of the
//!   R-factor equals the shortest nonzero norm of the trailing projected
//!   block. A generic lattice has exactly `2^{d−1}` ordered HKZ bases of
//!   determinant `+1` (independent sign flips of the basis vectors, half of
//!   which preserve orientation), a *constant* multiplicity — so restricting
//!   the exact density to the HKZ domain samples Haar exactly. HKZ also
//!   forces `a_{k+1}/a_k ≥ √3/2` and `|n_{ij}| ≤ 1/2`, so the proposal box
//!   never clips the accepted domain. In `d = 2` the acceptance condition
//!   reduces to `x² + y² ≥ 1`, making this sampler distribution-identical
//!   to exact2 — the cross-validation below checks precisely that.
//!
//! * **hecke** (any `d`, prime `p`): a discrete approximation. The index-`p`
//!   sublattices of `Z^d` are the kernels of the surjections `Z^d → Z/p`;
//!   rescaled by `p^{−1/d}` and averaged, they equidistribute toward Haar
//!   measure as `p → ∞` (Hecke-operator equidistribution), with a bias that
//!   decreases in `p`. Each sublattice is drawn with equal probability
//!   `1/(1 + p + … + p^{d−1})` via its Hermite-normal-form basis, and a
//!   uniform rotation removes directional artifacts of finite `p`.
//!
//! Affine lattices add a translation `B·u`, `u` uniform on `[0,1)^d` —
//! uniform on the torus `R^d/Λ`, which together with a Haar lattice gives
//! the invariant probability measure on the affine space.

use crate::lattice::{AffineUnimodularLattice, LatticeError, UnimodularLattice, Vector};
use crate::enumerate::shortest_nonzero_norm_sq_upper;
use crate::mat::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Rejection attempts before a sampler reports a stall. Acceptance rates
/// are bounded well away from zero, so hitting this signals a bug.
const MAX_REJECTION_ATTEMPTS: u64 = 1_000_000;
/// Height of the Siegel strip: `log(√3/2)` bounds the log-ratios from below.
fn log_siegel_floor() -> f64 {
    (3f64.sqrt() / 2.0).ln()
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("sampler {method} does not support dimension {d}")]
    UnsupportedDimension { method: SamplerMethod, d: usize },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("rejection sampler stalled after {attempts} attempts")]
    RejectionStall { attempts: u64 },
    #[error("invalid sampler spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Deterministic RNG stream addressing: a master seed plus a stream index.
/// Trial `t` of an experiment uses stream `t`, so results are identical
/// however trials are scheduled across threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngState {
    /// The stream's generator. The 256-bit key is expanded from
    /// `master_seed + stream_index · φ64` by splitmix64 steps, so nearby
    /// streams are statistically unrelated.
    pub fn rng(&self) -> ChaCha8Rng {
        let state = self
            .master_seed
            .wrapping_add(self.stream_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut key = [0u8; 32];
        let mut s = state;
        for chunk in key.chunks_exact_mut(8) {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Exact2,
    Siegel,
    Hecke,
}

impl fmt::Display for SamplerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMethod::Exact2 => "exact2",
            SamplerMethod::Siegel => "siegel",
            SamplerMethod::Hecke => "hecke",
        })
    }
}

impl FromStr for SamplerMethod {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<SamplerMethod, SamplingError> {
        match s {
            "exact2" => Ok(SamplerMethod::Exact2),
            "siegel" => Ok(SamplerMethod::Siegel),
            "hecke" => Ok(SamplerMethod::Hecke),
            other => Err(SamplingError::InvalidSpec(format!(
                "unknown sampler \"{}\" (expected exact2, siegel, or hecke)",
                other
            ))),
        }
    }
}

/// A validated sampler configuration, the unit the estimators consume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub method: SamplerMethod,
    pub d: usize,
    /// Required by the hecke method; at least 101 so the discretization
    /// bias stays below the statistical resolution of the test suite.
    #[serde(default)]
    pub hecke_prime: Option<u64>,
    /// Replace each draw by its dual lattice. Haar measure is invariant
    /// under dualization (transpose-inverse is a measure-preserving
    /// involution of the space), so this changes nothing in law for exact
    /// samplers — but it is the natural way to phrase length-spectrum
    /// statistics, which live on the dual.
    #[serde(default)]
    pub dualize: bool,
    /// Diagnostic switch: skip the Siegel acceptance test and return the
    /// raw proposal. The output is deliberately *not* Haar-distributed;
    /// the verification suite uses this to demonstrate its own sensitivity.
    #[serde(default)]
    pub siegel_skip_rejection: bool,
}

impl SamplerSpec {
    pub fn exact2() -> SamplerSpec {
        SamplerSpec {
            method: SamplerMethod::Exact2,
            d: 2,
            hecke_prime: None,
            dualize: false,
            siegel_skip_rejection: false,
        }
    }

    pub fn siegel(d: usize) -> SamplerSpec {
        SamplerSpec {
            method: SamplerMethod::Siegel,
            d,
            hecke_prime: None,
            dualize: false,
            siegel_skip_rejection: false,
        }
    }

    pub fn hecke(d: usize, p: u64) -> SamplerSpec {
        SamplerSpec {
            method: SamplerMethod::Hecke,
            d,
            hecke_prime: Some(p),
            dualize: false,
            siegel_skip_rejection: false,
        }
    }

    /// The same spec with the dual-lattice flag set.
    pub fn dualized(&self) -> SamplerSpec {
        SamplerSpec { dualize: true, ..*self }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        match self.method {
            SamplerMethod::Exact2 => {
                if self.d != 2 {
                    return Err(SamplingError::UnsupportedDimension {
                        method: self.method,
                        d: self.d,
                    });
                }
            }
            SamplerMethod::Siegel => {
                if !(2..=4).contains(&self.d) {
                    return Err(SamplingError::UnsupportedDimension {
                        method: self.method,
                        d: self.d,
                    });
                }
            }
            SamplerMethod::Hecke => {
                if self.d < 2 {
                    return Err(SamplingError::UnsupportedDimension {
                        method: self.method,
                        d: self.d,
                    });
                }
                let p = self.hecke_prime.ok_or_else(|| {
                    SamplingError::InvalidSpec("hecke method needs hecke_prime".to_string())
                })?;
                if !is_prime(p) {
                    return Err(SamplingError::NotPrime(p));
                }
                if p < 101 {
                    return Err(SamplingError::InvalidSpec(format!(
                        "hecke prime {} below the bias threshold 101",
                        p
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Haar-distributed rotation in `SO(d)`: QR of a standard Gaussian matrix
/// with the R-diagonal normalized positive (which makes Q Haar on `O(d)`),
/// then the last column negated if needed to land in `SO(d)`.
pub fn sample_rotation(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    assert!(d >= 2, "rotations need d >= 2");
    for _ in 0..100 {
        let mut g = Matrix::zeros(d);
        for j in 0..d {
            for i in 0..d {
                g.set(i, j, rng.sample(StandardNormal));
            }
        }
        if let Some((mut q, _r)) = g.qr() {
            if q.det() < 0.0 {
                for i in 0..d {
                    let v = q.get(i, d - 1);
                    q.set(i, d - 1, -v);
                }
            }
            return q;
        }
        // A numerically singular Gaussian draw has probability zero;
        // redraw.
    }
    unreachable!("Gaussian matrices are almost surely nonsingular");
}

/// Draw `(x, y)` from the modular fundamental domain with the hyperbolic
/// measure, reporting how many proposals the rejection loop consumed.
fn sample_x2_fundamental(rng: &mut ChaCha8Rng) -> (f64, f64, u64) {
    let scale = 3f64.sqrt() / 2.0;
    for attempt in 1..=MAX_REJECTION_ATTEMPTS {
        // u uniform on (0, 1] maps to y = (√3/2)/u with density
        // (√3/2) y^{-2} on y ≥ √3/2.
        let u = 1.0 - rng.gen::<f64>();
        let y = scale / u;
        let x = rng.gen::<f64>() - 0.5;
        if x * x + y * y >= 1.0 {
            return (x, y, attempt);
        }
    }
    unreachable!("acceptance probability is π√3/6 ≈ 0.91");
}

/// Exact Haar sample in dimension 2 via the fundamental domain.
pub fn sample_x2_exact(rng: &mut ChaCha8Rng) -> Result<UnimodularLattice, SamplingError> {
    let (x, y, _) = sample_x2_fundamental(rng);
    let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
    let sqrt_y = y.sqrt();
    let shape = Matrix::from_cols(&[vec![1.0 / sqrt_y, 0.0], vec![x / sqrt_y, sqrt_y]]);
    let (sin, cos) = theta.sin_cos();
    let rot = Matrix::from_cols(&[vec![cos, sin], vec![-sin, cos]]);
    Ok(UnimodularLattice::from_matrix(rot.mul(&shape))?)
}

/// Options for the Siegel sampler. `skip_rejection` returns raw proposals
/// (see [`SamplerSpec::siegel_skip_rejection`]).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SiegelOptions {
    pub skip_rejection: bool,
}

/// Haar sample in dimensions 2–4 by Iwasawa-coordinate rejection.
pub fn sample_xd_siegel(
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<UnimodularLattice, SamplingError> {
    sample_xd_siegel_with(d, rng, &SiegelOptions::default())
}

/// [`sample_xd_siegel`] with explicit options.
pub fn sample_xd_siegel_with(
    d: usize,
    rng: &mut ChaCha8Rng,
    opts: &SiegelOptions,
) -> Result<UnimodularLattice, SamplingError> {
    if !(2..=4).contains(&d) {
        return Err(SamplingError::UnsupportedDimension { method: SamplerMethod::Siegel, d });
    }
    // Haar density ∏_{i<j} (a_j/a_i) d×(flat measure): the log-ratio s_k
    // separates k·(d−k) of the (i, j) pairs, giving independent
    // exp(−λ_k s_k) factors.
    let rates: Vec<f64> = (1..d).map(|k| (k * (d - k)) as f64).collect();
    let floor = log_siegel_floor();
    for attempt in 1..=MAX_REJECTION_ATTEMPTS {
        let mut log_a = vec![0.0; d];
        for k in 1..d {
            let exp = Exp::new(rates[k - 1]).expect("positive rate");
            log_a[k] = log_a[k - 1] + floor + rng.sample(exp);
        }
        let mean = log_a.iter().sum::<f64>() / d as f64;
        let a: Vec<f64> = log_a.iter().map(|l| (l - mean).exp()).collect();
        let mut r = Matrix::zeros(d);
        for i in 0..d {
            r.set(i, i, a[i]);
            for j in (i + 1)..d {
                r.set(i, j, a[i] * (rng.gen::<f64>() - 0.5));
            }
        }
        if opts.skip_rejection || is_hkz_reduced(&r) {
            let q = sample_rotation(d, rng);
            return Ok(UnimodularLattice::from_matrix(q.mul(&r))?);
        }
        let _ = attempt;
    }
    Err(SamplingError::RejectionStall { attempts: MAX_REJECTION_ATTEMPTS })
}

/// HKZ test on an upper-triangular basis with positive diagonal: at every
/// level `k`, the diagonal entry must be (within 1e−9) the shortest nonzero
/// norm of the lattice spanned by the trailing block — i.e. each basis
/// vector is a shortest vector of its projected tail. Size reduction holds
/// by construction of the proposal (`|n_{ij}| ≤ 1/2`).
fn is_hkz_reduced(r: &Matrix) -> bool {
    let d = r.dim();
    for k in 0..d.saturating_sub(1) {
        let m = d - k;
        let mut block = Matrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                block.set(i, j, r.get(k + i, k + j));
            }
        }
        match shortest_nonzero_norm_sq_upper(&block) {
            Some(min_sq) => {
                if r.get(k, k) > min_sq.sqrt() + 1e-9 {
                    return false;
                }
            }
            None => return false,
        }
    }
    true
}

/// Hecke-point sample: a uniformly random index-`p` sublattice of `Z^d`,
/// rescaled to determinant one and uniformly rotated. Approximately Haar,
/// with bias decreasing in `p`. Requires `p` prime (any size — callers
/// wanting the quality guarantee should go through [`SamplerSpec`], which
/// enforces `p ≥ 101`).
pub fn sample_xd_hecke(
    d: usize,
    p: u64,
    rng: &mut ChaCha8Rng,
) -> Result<UnimodularLattice, SamplingError> {
    let h = sample_hecke_hnf(d, p, rng)?;
    let scale = (p as f64).powf(-1.0 / d as f64);
    let mut m = Matrix::zeros(d);
    for (i, row) in h.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            m.set(i, j, e as f64 * scale);
        }
    }
    let q = sample_rotation(d, rng);
    Ok(UnimodularLattice::from_matrix(q.mul(&m))?)
}

/// A uniformly random index-`p` sublattice of `Z^d`, as the row-major
/// integer matrix of its Hermite-normal-form basis (columns generate).
///
/// The sublattices of index `p` are exactly the kernels of surjections
/// `Z^d → Z/p`, `x ↦ x_j − Σ_{k<j} c_k x_k mod p`, pivoted at the last
/// coordinate `j` on which the map depends. The kernel with pivot `j` has
/// the lower-triangular basis with `H_{jj} = p`, `H_{jk} = c_k` for
/// `k < j`, and unit diagonal elsewhere; there are `p^{j−1}` of them, so
/// the pivot is drawn with weight `p^{j−1}` and the row entries uniformly.
pub fn sample_hecke_hnf(
    d: usize,
    p: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<i64>>, SamplingError> {
    if d < 2 {
        return Err(SamplingError::UnsupportedDimension { method: SamplerMethod::Hecke, d });
    }
    if !is_prime(p) {
        return Err(SamplingError::NotPrime(p));
    }
    // Cumulative pivot weights 1, p, p², … in exact integer arithmetic.
    let mut cumulative = Vec::with_capacity(d);
    let mut weight: u128 = 1;
    let mut total: u128 = 0;
    for j in 0..d {
        total = total.checked_add(weight).ok_or_else(|| {
            SamplingError::InvalidSpec(format!("hecke weights overflow for p={}, d={}", p, d))
        })?;
        cumulative.push(total);
        if j + 1 < d {
            weight = weight.checked_mul(p as u128).ok_or_else(|| {
                SamplingError::InvalidSpec(format!("hecke weights overflow for p={}, d={}", p, d))
            })?;
        }
    }
    let draw = ((rng.gen::<u64>() as u128) << 64 | rng.gen::<u64>() as u128) % total;
    let pivot = cumulative.iter().position(|&c| draw < c).expect("draw < total");

    let mut h = vec![vec![0i64; d]; d];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1;
    }
    h[pivot][pivot] = p as i64;
    for k in 0..pivot {
        h[pivot][k] = rng.gen_range(0..p) as i64;
    }
    Ok(h)
}

/// Dispatch on a validated [`SamplerSpec`], honoring its flags.
pub fn sample_lattice(
    spec: &SamplerSpec,
    rng: &mut ChaCha8Rng,
) -> Result<UnimodularLattice, SamplingError> {
    spec.validate()?;
    let lattice = match spec.method {
        SamplerMethod::Exact2 => sample_x2_exact(rng)?,
        SamplerMethod::Siegel => sample_xd_siegel_with(
            spec.d,
            rng,
            &SiegelOptions { skip_rejection: spec.siegel_skip_rejection },
        )?,
        SamplerMethod::Hecke => {
            sample_xd_hecke(spec.d, spec.hecke_prime.expect("validated"), rng)?
        }
    };
    if spec.dualize {
        Ok(lattice.dual()?)
    } else {
        Ok(lattice)
    }
}

/// Invariant-measure sample of an affine unimodular lattice: a lattice drawn
/// per `spec` plus an offset uniform on its fundamental parallelepiped.
pub fn sample_affine(
    spec: &SamplerSpec,
    rng: &mut ChaCha8Rng,
) -> Result<AffineUnimodularLattice, SamplingError> {
    let lattice = sample_lattice(spec, rng)?;
    let u: Vec<f64> = (0..spec.d).map(|_| rng.gen::<f64>()).collect();
    let offset = lattice.basis().matrix().mul_vec(&u);
    Ok(AffineUnimodularLattice::new(lattice, Vector::new(offset))?)
}

/// Affine lattice whose offset is primitive `q`-torsion on the torus:
/// `x = B·(k/q)` with `k` uniform on `{0, …, q−1}^d` subject to
/// `gcd(k_1, …, k_d, q) = 1`. One of the discrete invariant measures on
/// the affine space; exploratory rather than part of the verified suite.
pub fn sample_torsion_affine(
    spec: &SamplerSpec,
    q: u64,
    rng: &mut ChaCha8Rng,
) -> Result<AffineUnimodularLattice, SamplingError> {
    if q < 2 {
        return Err(SamplingError::InvalidSpec(format!("torsion order {} must be >= 2", q)));
    }
    let lattice = sample_lattice(spec, rng)?;
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let k: Vec<u64> = (0..spec.d).map(|_| rng.gen_range(0..q)).collect();
        let mut g = q;
        for &ki in &k {
            g = gcd(g, ki);
        }
        if g == 1 {
            let u: Vec<f64> = k.iter().map(|&ki| ki as f64 / q as f64).collect();
            let offset = lattice.basis().matrix().mul_vec(&u);
            return Ok(AffineUnimodularLattice::new(lattice, Vector::new(offset))?);
        }
    }
    Err(SamplingError::RejectionStall { attempts: MAX_REJECTION_ATTEMPTS })
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Deterministic Miller–Rabin, exact for all `u64` with this witness set.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == small {
            return true;
        }
        if n % small == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}
