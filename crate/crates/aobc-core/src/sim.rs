//! Seeded Monte Carlo estimation of the expected ages.
//!
//! Two regimes: [`run_instance`] holds one realization fixed and averages the
//! age process over traffic randomness; [`run_spatial_average`] additionally
//! averages over sampled realizations. Both are deterministic functions of
//! the master seed: every trial and every realization draws from its own
//! derived stream, and results are merged in label order, so the estimates
//! are bit-identical no matter how the work is scheduled.

use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::age::AgeLedger;
use crate::channel::{Mode, NetworkParams, SlotSimulator};
use crate::geometry::{truncation_window_radius, Realization};
use crate::{Error, Real, Result};

/// Stream-label namespaces. The first label of every derivation path states
/// what the stream is for, so geometry draws can never collide with traffic
/// draws under any indexing scheme.
pub mod labels {
    /// Sampling a spatial realization.
    pub const GEOMETRY: u64 = 1;
    /// Slot-level traffic (coins and fades) of one trial.
    pub const TRAFFIC: u64 = 2;
    /// Forward delay measurements.
    pub const DELAY: u64 = 3;
    /// Per-grid-point master seeds of a parameter sweep.
    pub const SWEEP_POINT: u64 = 4;
}

/// Everything one estimation run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<F> {
    pub params: NetworkParams<F>,
    pub mode: Mode,
    pub slots_per_trial: u64,
    pub warmup_slots: u64,
    pub trials: u32,
    /// Number of sampled realizations; only [`run_spatial_average`] reads it.
    pub realizations: u32,
    pub master_seed: u64,
    /// Relative tail mass of mean interference the truncated interferer
    /// window is allowed to discard.
    pub truncation_rel_tol: F,
}

/// Warmup policy: ages start fresh, so the bias of the time average decays
/// within a few mean cover times. With an analytic mean delay (typically an
/// upper bound) at hand, discard 20 of them; always at least 10^4 slots,
/// never more than 10^6.
pub fn default_warmup<F: Real>(analytic_mean_delay: Option<F>) -> u64 {
    const FLOOR: u64 = 10_000;
    const CAP: u64 = 1_000_000;
    match analytic_mean_delay {
        None => FLOOR,
        Some(d) => {
            let want = (d.widen() * 20.0).ceil();
            if !want.is_finite() || want >= CAP as f64 {
                CAP
            } else {
                (want as u64).clamp(FLOOR, CAP)
            }
        }
    }
}

impl<F: Real> SimConfig<F> {
    /// Defaults: 250000 slots per trial with a [`default_warmup`] warmup,
    /// 30 trials, 100 realizations, seed 1, interference window truncated
    /// at 0.5%.
    pub fn new(params: NetworkParams<F>, mode: Mode) -> Self {
        SimConfig {
            params,
            mode,
            slots_per_trial: 250_000,
            warmup_slots: default_warmup::<F>(None),
            trials: 30,
            realizations: 100,
            master_seed: 1,
            truncation_rel_tol: F::lit(0.005),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.slots_per_trial <= self.warmup_slots {
            return Err(Error::invalid(
                "slots_per_trial",
                format!(
                    "{} slots leave no measured slot after a {}-slot warmup",
                    self.slots_per_trial, self.warmup_slots
                ),
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "at least one trial is required"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid(
                "realizations",
                "at least one realization is required",
            ));
        }
        if !(self.truncation_rel_tol > F::zero() && self.truncation_rel_tol < F::one()) {
            return Err(Error::invalid(
                "truncation_rel_tol",
                "must lie in (0, 1)",
            ));
        }
        Ok(())
    }

    /// Interferer window radius implied by the truncation tolerance.
    pub fn window_radius(&self) -> Result<F> {
        truncation_window_radius(
            self.params.lambda,
            self.params.p,
            self.params.beta,
            self.params.r,
            self.truncation_rel_tol,
        )
    }
}

/// Outcome of one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult<F> {
    /// Grand mean of the age estimate, in slots.
    pub mean_age: F,
    /// 95% half-width from the normal approximation over the entries of
    /// `per_trial_means`.
    pub ci_half_width: F,
    /// One mean per trial ([`run_instance`]) or per realization
    /// ([`run_spatial_average`]), in label order.
    pub per_trial_means: Vec<F>,
    pub realization_count: u32,
    /// Wall time; the only field that is not a deterministic function of the
    /// config.
    pub elapsed: Duration,
}

impl<F: Real> SimResult<F> {
    fn from_means(means: Vec<f64>, realization_count: u32, elapsed: Duration) -> Self {
        let n = means.len();
        let mean = means.iter().sum::<f64>() / n as f64;
        let ci = if n < 2 {
            0.0
        } else {
            let var =
                means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n as f64 - 1.0);
            1.96 * (var / n as f64).sqrt()
        };
        SimResult {
            mean_age: F::lit(mean),
            ci_half_width: F::lit(ci),
            per_trial_means: means.into_iter().map(F::lit).collect(),
            realization_count,
            elapsed,
        }
    }
}

// ============================================================================
// Stream derivation
// ============================================================================

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic 64-bit seed for a label path under a master seed. Distinct
/// paths yield independent-looking seeds; the same path always yields the
/// same seed. Collisions are those of a 64-bit mix, negligible at the label
/// counts a sweep produces.
pub fn derive_seed(master_seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(master_seed);
    for &label in path {
        h = splitmix64(h ^ splitmix64(label.wrapping_add(0xa076_1d64_78bd_642f)));
    }
    h
}

/// Deterministic substream for a label path under a master seed: the
/// [`derive_seed`] value expanded into a full generator key.
pub fn derive_stream(master_seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = derive_seed(master_seed, path);
    for chunk in key.chunks_exact_mut(8) {
        s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
        chunk.copy_from_slice(&splitmix64(s).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

// ============================================================================
// Estimators
// ============================================================================

/// Post-warmup time average of the peak age for one trial.
fn trial_mean<F: Real>(
    realization: &Realization<F>,
    config: &SimConfig<F>,
    realization_label: u64,
    trial: u64,
) -> Result<f64> {
    let mut rng = derive_stream(
        config.master_seed,
        &[labels::TRAFFIC, realization_label, trial],
    );
    let mut sim = SlotSimulator::new(realization, config.mode, &config.params)?;
    let mut ledger = AgeLedger::new(sim.node_count(), config.mode);
    let mut sum = 0u64;
    for slot in 1..=config.slots_per_trial {
        let outcome = sim.step(&mut rng);
        ledger.step(outcome)?;
        if slot > config.warmup_slots {
            sum += ledger.peak_age();
        }
    }
    Ok(sum as f64 / (config.slots_per_trial - config.warmup_slots) as f64)
}

fn instance_means<F: Real>(
    realization: &Realization<F>,
    config: &SimConfig<F>,
    realization_label: u64,
) -> Result<Vec<f64>> {
    (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| trial_mean(realization, config, realization_label, trial))
        .collect()
}

/// Estimates the expected age of one fixed realization: the time average of
/// the worst node age over post-warmup slots, averaged across trials, with a
/// 95% confidence interval over the per-trial means.
pub fn run_instance<F: Real>(
    realization: &Realization<F>,
    config: &SimConfig<F>,
) -> Result<SimResult<F>> {
    config.validate()?;
    let start = Instant::now();
    let means = instance_means(realization, config, 0)?;
    Ok(SimResult::from_means(means, 1, start.elapsed()))
}

/// Estimates the spatially averaged expected age: realizations are sampled
/// from the configured point processes, each is estimated as in
/// [`run_instance`], and the confidence interval is taken across realization
/// means, where the dominant variance lives.
pub fn run_spatial_average<F: Real>(config: &SimConfig<F>) -> Result<SimResult<F>> {
    config.validate()?;
    let start = Instant::now();
    let window = config.window_radius()?;
    let means: Vec<f64> = (0..config.realizations as u64)
        .into_par_iter()
        .map(|ri| {
            let mut geo_rng = derive_stream(config.master_seed, &[labels::GEOMETRY, ri]);
            let realization =
                Realization::sample(config.params.lambda, config.params.r, window, &mut geo_rng)?;
            let trial_means = instance_means(&realization, config, ri)?;
            Ok(trial_means.iter().sum::<f64>() / trial_means.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(SimResult::from_means(
        means,
        config.realizations,
        start.elapsed(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use rand::Rng;

    fn default_params() -> NetworkParams<f64> {
        NetworkParams::new(0.01, 5.0, 0.2, 4.0, 10.0).unwrap()
    }

    fn quick_config(mode: Mode) -> SimConfig<f64> {
        let mut config = SimConfig::new(default_params(), mode);
        config.slots_per_trial = 20_000;
        config.warmup_slots = 2_000;
        config.trials = 8;
        config.realizations = 4;
        config
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut config = quick_config(Mode::Broadcast);
        config.warmup_slots = config.slots_per_trial;
        assert!(config.validate().is_err());
        let mut config = quick_config(Mode::Broadcast);
        config.trials = 0;
        assert!(config.validate().is_err());
        let mut config = quick_config(Mode::Broadcast);
        config.truncation_rel_tol = 1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn warmup_policy_clamps_to_its_bounds() {
        assert_eq!(default_warmup::<f64>(None), 10_000);
        assert_eq!(default_warmup::<f64>(Some(57.6)), 10_000);
        assert_eq!(default_warmup::<f64>(Some(2_000.0)), 40_000);
        assert_eq!(default_warmup::<f64>(Some(1e9)), 1_000_000);
        assert_eq!(default_warmup::<f64>(Some(f64::INFINITY)), 1_000_000);
    }

    #[test]
    fn derived_streams_repeat_and_separate() {
        let mut a = derive_stream(7, &[labels::TRAFFIC, 0, 3]);
        let mut b = derive_stream(7, &[labels::TRAFFIC, 0, 3]);
        let mut c = derive_stream(7, &[labels::TRAFFIC, 0, 4]);
        let mut same = true;
        let mut diff = false;
        for _ in 0..100 {
            let x: u64 = a.random();
            same &= x == b.random::<u64>();
            diff |= x != c.random::<u64>();
        }
        assert!(same);
        assert!(diff);
    }

    #[test]
    fn sibling_streams_look_uncorrelated() {
        // Pearson correlation of uniform draws from adjacent trial labels.
        let n = 20_000;
        let mut a = derive_stream(11, &[labels::TRAFFIC, 0, 0]);
        let mut b = derive_stream(11, &[labels::TRAFFIC, 0, 1]);
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x: f64 = a.random();
            let y: f64 = b.random();
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx / nf * (sy / nf);
        let vx = sxx / nf - (sx / nf) * (sx / nf);
        let vy = syy / nf - (sy / nf) * (sy / nf);
        let corr = cov / (vx * vy).sqrt();
        // Null distribution is ~N(0, 1/n): 4 sigma = 4/sqrt(n).
        assert!(corr.abs() < 4.0 / nf.sqrt(), "corr = {corr}");
    }

    #[test]
    fn empty_node_set_has_zero_age() {
        let real = Realization::new(vec![], vec![], 10.0, 20.0).unwrap();
        let config = quick_config(Mode::Broadcast);
        let result = run_instance(&real, &config).unwrap();
        assert_eq!(result.mean_age, 0.0);
        assert_eq!(result.ci_half_width, 0.0);
    }

    #[test]
    fn single_node_matches_geometric_mean_age() {
        // Lone node, no interference: reception is a p-coin, stationary mean
        // age 1/p.
        let real = Realization::new(vec![Point::new(3.0, 4.0)], vec![], 10.0, 20.0).unwrap();
        let config = quick_config(Mode::Broadcast);
        let result = run_instance(&real, &config).unwrap();
        let expected = 1.0 / config.params.p;
        assert!(
            (result.mean_age - expected).abs() < 3.0 * result.ci_half_width.max(0.02),
            "mean {} vs {} (ci {})",
            result.mean_age,
            expected,
            result.ci_half_width
        );
        assert_eq!(result.per_trial_means.len(), config.trials as usize);
        assert_eq!(result.realization_count, 1);
    }

    #[test]
    fn results_are_bit_identical_across_thread_counts() {
        let real = Realization::new(
            vec![Point::new(2.0, 1.0), Point::new(-4.0, 3.0)],
            vec![Point::new(12.0, 5.0)],
            10.0,
            20.0,
        )
        .unwrap();
        let mut config = quick_config(Mode::Broadcast);
        config.slots_per_trial = 5_000;
        config.warmup_slots = 500;

        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_instance(&real, &config))
            .unwrap();
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_instance(&real, &config))
            .unwrap();
        assert_eq!(single.mean_age.to_bits(), multi.mean_age.to_bits());
        assert_eq!(single.per_trial_means, multi.per_trial_means);
    }

    #[test]
    fn extending_the_trial_count_keeps_earlier_trials() {
        // Each trial draws from its own stream, so trial k's mean cannot
        // depend on how many trials run around it.
        let real = Realization::new(vec![Point::new(3.0, 4.0)], vec![], 10.0, 20.0).unwrap();
        let mut config = quick_config(Mode::Broadcast);
        config.slots_per_trial = 2_000;
        config.warmup_slots = 100;
        config.trials = 3;
        let short = run_instance(&real, &config).unwrap();
        config.trials = 6;
        let long = run_instance(&real, &config).unwrap();
        assert_eq!(short.per_trial_means, long.per_trial_means[..3]);
    }

    #[test]
    fn spatial_average_with_zero_intensity_is_zero() {
        let params = NetworkParams::new(0.0, 5.0, 0.2, 4.0, 10.0).unwrap();
        let mut config = quick_config(Mode::Collection);
        config.params = params;
        config.slots_per_trial = 1_000;
        config.warmup_slots = 100;
        let result = run_spatial_average(&config).unwrap();
        assert_eq!(result.mean_age, 0.0);
    }

    #[test]
    fn spatial_average_reports_per_realization_means() {
        let mut config = quick_config(Mode::Broadcast);
        config.slots_per_trial = 2_000;
        config.warmup_slots = 200;
        config.trials = 2;
        config.realizations = 3;
        let result = run_spatial_average(&config).unwrap();
        assert_eq!(result.per_trial_means.len(), 3);
        assert_eq!(result.realization_count, 3);
        assert!(result.mean_age >= 0.0);
    }

    #[test]
    fn warmup_changes_little_on_stationary_instance() {
        let real = Realization::new(vec![Point::new(3.0, 4.0)], vec![], 10.0, 20.0).unwrap();
        let mut config = quick_config(Mode::Broadcast);
        config.trials = 10;
        let base = run_instance(&real, &config).unwrap();
        config.warmup_slots *= 2;
        let doubled = run_instance(&real, &config).unwrap();
        let gap = (base.mean_age - doubled.mean_age).abs();
        assert!(
            gap < base.ci_half_width.max(doubled.ci_half_width),
            "gap {gap} exceeds ci {} / {}",
            base.ci_half_width,
            doubled.ci_half_width
        );
    }

    #[test]
    fn ci_is_zero_for_single_trial() {
        let real = Realization::new(vec![Point::new(3.0, 4.0)], vec![], 10.0, 20.0).unwrap();
        let mut config = quick_config(Mode::Broadcast);
        config.trials = 1;
        config.slots_per_trial = 1_000;
        config.warmup_slots = 0;
        let result = run_instance(&real, &config).unwrap();
        assert_eq!(result.ci_half_width, 0.0);
    }

    #[test]
    fn two_node_instance_matches_exact_cover_time() {
        let real = Realization::new(
            vec![Point::new(2.0, 1.0), Point::new(-4.0, 3.0)],
            vec![Point::new(12.0, 5.0)],
            10.0,
            20.0,
        )
        .unwrap();
        let params = default_params();
        let mut config = SimConfig::new(params.clone(), Mode::Broadcast);
        config.slots_per_trial = 100_000;
        config.warmup_slots = 10_000;
        config.trials = 16;
        let result = run_instance(&real, &config).unwrap();
        let exact = crate::analytics::exact_eaob(&real, &params, 1e-10).unwrap();
        let sigma = result.ci_half_width / 1.96;
        assert!(
            (result.mean_age - exact).abs() < 4.0 * sigma,
            "mc {} vs exact {exact} (sigma {sigma})",
            result.mean_age
        );
    }

    #[test]
    fn f32_instantiation_runs() {
        let real: Realization<f32> =
            Realization::new(vec![Point::new(3.0f32, 4.0)], vec![], 10.0, 20.0).unwrap();
        let params = NetworkParams::new(0.01f32, 5.0, 0.2, 4.0, 10.0).unwrap();
        let mut config = SimConfig::new(params, Mode::Broadcast);
        config.slots_per_trial = 2_000;
        config.warmup_slots = 200;
        config.trials = 2;
        let result = run_instance(&real, &config).unwrap();
        assert!(result.mean_age > 0.0f32);
    }
}
