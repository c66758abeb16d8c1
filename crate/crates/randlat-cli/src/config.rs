//! Experiment configurations: JSON files with full defaults, overridable
//! field by field from the command line (flags win over the file).

use anyhow::{bail, Context, Result};
use randlat::{SamplerMethod, SamplerSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

/// Configuration for the `verify` suite. Every field has a default, so an
/// empty JSON object (or no file at all) runs the standard full suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Master seed; every check derives its own stream from it.
    pub seed: u64,
    /// Trials per d = 2 check (means, moments, holes, spectra).
    pub d2_trials: u64,
    /// Trials per d = 3 check.
    pub d3_trials: u64,
    /// Trials per variance check. Higher than `d2_trials` by default:
    /// counts are heavy-tailed, and the sample variance only sees its
    /// rare-spike mass reliably once runs are this long (see the stats
    /// module docs); the checks stay well inside their time budget.
    pub variance_trials: u64,
    /// Draws per sampler in the cross-validation KS checks.
    pub ks_trials: u64,
    /// Random (lattice, region) instances in the counting-oracle check.
    pub oracle_instances: u64,
    /// Bootstrap resamples for variance intervals.
    pub bootstrap_b: usize,
    /// Sampler for d = 2 checks: "exact2", "siegel", or "hecke".
    pub d2_sampler: String,
    /// Sampler for d = 3 checks: "siegel" or "hecke".
    pub d3_sampler: String,
    /// Prime for the hecke sampler, where selected.
    pub hecke_prime: u64,
    /// Negative-control hook: disable the Siegel sampler's rejection step.
    /// The proposals alone are *not* invariant-measure distributed, so the
    /// variance identity must fail — used to prove the suite has teeth.
    pub corrupt_siegel_skip_rejection: bool,
    /// Wall-clock budget per check in seconds; a check exceeding it is
    /// marked unsatisfied (skipped) rather than blocking the suite.
    pub check_budget_secs: u64,
    /// Subset of phases to run (`None` = all). Valid names are in
    /// [`VerifyConfig::PHASES`].
    pub phases: Option<Vec<String>>,
}

impl Default for VerifyConfig {
    fn default() -> VerifyConfig {
        VerifyConfig {
            seed: 42,
            d2_trials: 100_000,
            d3_trials: 10_000,
            variance_trials: 250_000,
            ks_trials: 10_000,
            oracle_instances: 100,
            bootstrap_b: 1000,
            d2_sampler: "exact2".into(),
            d3_sampler: "siegel".into(),
            hecke_prime: 10_007,
            corrupt_siegel_skip_rejection: false,
            check_budget_secs: 600,
            phases: None,
        }
    }
}

impl VerifyConfig {
    pub const PHASES: [&'static str; 11] = [
        "mean",
        "variance",
        "second_moment",
        "pair",
        "holes_affine",
        "mean_d3",
        "holes_affine_d3",
        "holes_regular",
        "spectrum",
        "ks",
        "oracle",
    ];

    pub fn validate(&self) -> Result<()> {
        if let Some(phases) = &self.phases {
            for p in phases {
                if !Self::PHASES.contains(&p.as_str()) {
                    bail!(
                        "unknown phase \"{}\" (valid: {})",
                        p,
                        Self::PHASES.join(", ")
                    );
                }
            }
        }
        self.sampler_spec(2)?;
        self.sampler_spec(3)?;
        Ok(())
    }

    pub fn phase_enabled(&self, name: &str) -> bool {
        match &self.phases {
            None => true,
            Some(list) => list.iter().any(|p| p == name),
        }
    }

    /// The sampler spec used for checks in dimension `d` (2 or 3).
    pub fn sampler_spec(&self, d: usize) -> Result<SamplerSpec> {
        let name = if d == 2 { &self.d2_sampler } else { &self.d3_sampler };
        let mut spec = build_sampler(name, d, self.hecke_prime)?;
        spec.siegel_skip_rejection = self.corrupt_siegel_skip_rejection;
        spec.validate()
            .with_context(|| format!("sampler \"{}\" is not usable in d = {}", name, d))?;
        Ok(spec)
    }
}

/// Configuration for `sweep`: hole probabilities across a volume grid for
/// one region family, normalized so the theoretical limit is visible.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub d: usize,
    /// "affine" or "regular".
    pub setting: String,
    pub sampler: String,
    pub hecke_prime: u64,
    /// "ball", "thinbox", or "annulus".
    pub family: String,
    /// Volume grid, ascending and nonempty.
    pub volumes: Vec<f64>,
    /// Family shape knob: box aspect ratio for "thinbox" (≥ 1), inner/outer
    /// radius ratio in [0, 1) for "annulus"; ignored for "ball".
    pub shape_param: f64,
    pub trials: u64,
}

impl Default for SweepConfig {
    fn default() -> SweepConfig {
        SweepConfig {
            seed: 42,
            d: 2,
            setting: "affine".into(),
            sampler: "exact2".into(),
            hecke_prime: 10_007,
            family: "ball".into(),
            volumes: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
            shape_param: 0.0,
            trials: 100_000,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.volumes.is_empty() {
            bail!("sweep needs a nonempty ascending volume grid");
        }
        if self.volumes.windows(2).any(|w| w[0] >= w[1]) || self.volumes[0] <= 0.0 {
            bail!("sweep volumes must be positive and strictly ascending");
        }
        match self.family.as_str() {
            "ball" => {}
            "thinbox" => {
                if self.shape_param < 1.0 {
                    bail!("thinbox aspect (shape_param) must be ≥ 1");
                }
            }
            "annulus" => {
                if !(0.0..1.0).contains(&self.shape_param) {
                    bail!("annulus radius ratio (shape_param) must be in [0, 1)");
                }
            }
            other => bail!("unknown sweep family \"{}\" (ball, thinbox, annulus)", other),
        }
        if !matches!(self.setting.as_str(), "affine" | "regular") {
            bail!("setting must be \"affine\" or \"regular\", got \"{}\"", self.setting);
        }
        self.sampler_spec()?;
        Ok(())
    }

    pub fn sampler_spec(&self) -> Result<SamplerSpec> {
        let spec = build_sampler(&self.sampler, self.d, self.hecke_prime)?;
        spec.validate().context("sampler")?;
        Ok(spec)
    }
}

/// Configuration for `spectra`: one bound check on a radial set.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraConfig {
    pub seed: u64,
    pub d: usize,
    pub sampler: String,
    pub hecke_prime: u64,
    /// Radial intervals as pairs `[[a, b], ...]`.
    pub radial: Vec<(f64, f64)>,
    pub trials: u64,
}

impl Default for SpectraConfig {
    fn default() -> SpectraConfig {
        SpectraConfig {
            seed: 42,
            d: 2,
            sampler: "exact2".into(),
            hecke_prime: 10_007,
            radial: vec![(0.1, 3.0)],
            trials: 100_000,
        }
    }
}

impl SpectraConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler_spec()?;
        Ok(())
    }

    pub fn sampler_spec(&self) -> Result<SamplerSpec> {
        let spec = build_sampler(&self.sampler, self.d, self.hecke_prime)?;
        spec.validate().context("sampler")?;
        Ok(spec)
    }
}

/// Configuration for `sample`: dump lattice draws as JSON lines.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub seed: u64,
    pub d: usize,
    pub sampler: String,
    pub hecke_prime: u64,
    /// Draw affine lattices (with reduced offsets) instead of linear ones.
    pub affine: bool,
    /// Number of samples; must be ≥ 1.
    pub count: u64,
}

impl Default for SampleConfig {
    fn default() -> SampleConfig {
        SampleConfig {
            seed: 42,
            d: 2,
            sampler: "exact2".into(),
            hecke_prime: 10_007,
            affine: false,
            count: 1,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            bail!("sample count must be ≥ 1");
        }
        self.sampler_spec()?;
        Ok(())
    }

    pub fn sampler_spec(&self) -> Result<SamplerSpec> {
        let spec = build_sampler(&self.sampler, self.d, self.hecke_prime)?;
        spec.validate().context("sampler")?;
        Ok(spec)
    }
}

/// Build a sampler spec from its CLI name. The hecke prime is attached
/// only where relevant.
pub fn build_sampler(name: &str, d: usize, hecke_prime: u64) -> Result<SamplerSpec> {
    let method = SamplerMethod::from_str(name)
        .map_err(|e| anyhow::anyhow!("unknown sampler \"{}\": {}", name, e))?;
    Ok(match method {
        // Keep the *requested* dimension so validation can reject a
        // mismatch instead of silently sampling in d = 2.
        SamplerMethod::Exact2 => SamplerSpec { d, ..SamplerSpec::exact2() },
        SamplerMethod::Siegel => SamplerSpec::siegel(d),
        SamplerMethod::Hecke => SamplerSpec::hecke(d, hecke_prime),
    })
}

/// Load a config of any type from a JSON file, or defaults when no path is
/// given.
pub fn load<T>(path: Option<&Path>) -> Result<T>
where
    T: Default + for<'de> Deserialize<'de>,
{
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        VerifyConfig::default().validate().unwrap();
        SweepConfig::default().validate().unwrap();
        SpectraConfig::default().validate().unwrap();
        SampleConfig::default().validate().unwrap();
    }

    #[test]
    fn verify_config_round_trips_through_json() {
        let cfg = VerifyConfig {
            d2_trials: 5000,
            phases: Some(vec!["mean".into(), "variance".into()]),
            ..VerifyConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: VerifyConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.d2_trials, 5000);
        assert!(back.phase_enabled("mean"));
        assert!(!back.phase_enabled("oracle"));
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: VerifyConfig = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.d2_trials, 100_000);
        assert_eq!(cfg.d2_sampler, "exact2");
    }

    #[test]
    fn bad_configs_are_rejected() {
        let cfg = VerifyConfig { d2_sampler: "sobol".into(), ..VerifyConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = VerifyConfig {
            phases: Some(vec!["warmup".into()]),
            ..VerifyConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SweepConfig { volumes: vec![], ..SweepConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SweepConfig { volumes: vec![5.0, 2.0], ..SweepConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SweepConfig { family: "pentagon".into(), ..SweepConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SampleConfig { count: 0, ..SampleConfig::default() };
        assert!(cfg.validate().is_err());
        // Siegel beyond its supported dimensions.
        let cfg = SampleConfig { d: 5, sampler: "siegel".into(), ..SampleConfig::default() };
        assert!(cfg.validate().is_err());
        // Unknown fields are config errors, not silent typos.
        assert!(serde_json::from_str::<VerifyConfig>(r#"{"sede": 7}"#).is_err());
    }
}
