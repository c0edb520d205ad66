//! Closed-form model of how signal and noise bits survive the pooler
//! stages, with a Monte Carlo simulation for validation.
//!
//! An input vector of `n` bits with `n_b` ones passes through synapse
//! connectivity (each column samples `s` bits), the permanence filter
//! (a fraction `m` of sampled bits survives) and the overlap stage.
//! The expected surviving counts are
//!
//! ```text
//! E[X_SCM] = s * n_b / n          E[X_NCM] = s * w / n
//! E[X_SPM] = m * E[X_SCM]         E[X_NPM] = m * E[X_NCM]
//! E[X_NB]  = (s / n) * (w_b + n_b * (1 - w / n))
//! ```
//!
//! where `w` input positions are rewritten by noise and `w_b` of them
//! are ones. Match probabilities place these real-valued expectations
//! inside binomial coefficients; coefficients are therefore evaluated
//! through the gamma function, entirely in the log domain so that
//! inputs as large as n = 32160 stay representable.
//!
//! The match-probability sum is evaluated in two forms. The primary
//! one follows the factorized form literally: the summand C(n_b, k)
//! does not couple to the second coefficient, so the sum factors out.
//! A coupled variant - the hypergeometric reading C(n_b, k) *
//! C(n - n_b, E - k) / C(n, E) - is also provided; tiny-instance
//! enumeration decides which one tracks simulated matching, and any
//! discrepancy is reported rather than silently corrected.

use crate::rng::{SubsetSampler, Xoshiro256pp};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseModelError {
    #[error("{field} must be positive")]
    ZeroField { field: &'static str },
    #[error("n_b = {n_b} exceeds n = {n}")]
    SignalExceedsInput { n_b: usize, n: usize },
    #[error("w = {w} exceeds n = {n}")]
    NoiseExceedsInput { w: usize, n: usize },
    #[error("w_b = {w_b} exceeds w = {w}")]
    NoiseOnesExceedNoise { w_b: usize, w: usize },
    #[error("o_m = {o_m} exceeds s = {s}")]
    MinOverlapExceedsSynapses { o_m: usize, s: usize },
    #[error("m must lie in (0, 1], got {0}")]
    ReductionRatioOutOfRange(f64),
    #[error("generalized binomial undefined for a = {a}, b = {b}")]
    BinomialDomain { a: f64, b: f64 },
    #[error("{quantity} = {value} exceeds {bound} = {limit}; the binomial C({bound}, {quantity}) is undefined")]
    ExpectationOutOfDomain {
        quantity: &'static str,
        value: f64,
        bound: &'static str,
        limit: f64,
    },
    #[error("noise match probability is zero; the impact ratio is infinite")]
    NoiseMatchZero,
    #[error("monte carlo needs at least 1000 trials, got {0}")]
    TooFewTrials(u64),
}

/// The symbols of the propagation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationParams {
    /// Input vector size in bits.
    pub n: usize,
    /// Ones in the signal vector.
    pub n_b: usize,
    /// Synapses per column.
    pub s: usize,
    /// Number of columns.
    pub c: usize,
    /// Permanence-filter survival ratio, in (0, 1].
    pub m: f64,
    /// Overlap match threshold.
    pub o_m: usize,
    /// Noise bits rewritten in the input vector.
    pub w: usize,
    /// Ones among the rewritten bits.
    pub w_b: usize,
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), NoiseModelError> {
        for (field, v) in [("n", self.n), ("s", self.s), ("c", self.c)] {
            if v == 0 {
                return Err(NoiseModelError::ZeroField { field });
            }
        }
        if self.n_b > self.n {
            return Err(NoiseModelError::SignalExceedsInput {
                n_b: self.n_b,
                n: self.n,
            });
        }
        if self.w > self.n {
            return Err(NoiseModelError::NoiseExceedsInput {
                w: self.w,
                n: self.n,
            });
        }
        if self.w_b > self.w {
            return Err(NoiseModelError::NoiseOnesExceedNoise {
                w_b: self.w_b,
                w: self.w,
            });
        }
        if self.o_m > self.s {
            return Err(NoiseModelError::MinOverlapExceedsSynapses {
                o_m: self.o_m,
                s: self.s,
            });
        }
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(NoiseModelError::ReductionRatioOutOfRange(self.m));
        }
        Ok(())
    }
}

/// Expected surviving bit counts at each mapping stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationExpectations {
    pub e_scm: f64,
    pub e_spm: f64,
    pub e_ncm: f64,
    pub e_npm: f64,
    pub e_nb: f64,
}

/// Exact closed-form evaluation of the five stage expectations.
pub fn propagation_expectations(
    p: &PropagationParams,
) -> Result<PropagationExpectations, NoiseModelError> {
    p.validate()?;
    let (n, n_b, s, w, w_b) = (
        p.n as f64,
        p.n_b as f64,
        p.s as f64,
        p.w as f64,
        p.w_b as f64,
    );
    // Operation order is chosen so the no-noise case collapses
    // exactly: w = 0 makes e_nb bit-identical to e_scm.
    let e_scm = s * n_b / n;
    let e_spm = p.m * e_scm;
    let e_ncm = s * w / n;
    let e_npm = p.m * e_ncm;
    let e_nb = w_b * s / n + (1.0 - w / n) * (s * n_b / n);
    Ok(PropagationExpectations {
        e_scm,
        e_spm,
        e_ncm,
        e_npm,
        e_nb,
    })
}

/// ln Gamma via the Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection for the left half-plane.
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// ln C(a, b) = ln G(a+1) - ln G(b+1) - ln G(a-b+1) for real a, b >= 0
/// with b <= a. Equals the log of the exact binomial coefficient at
/// integer arguments.
pub fn log_generalized_binomial(a: f64, b: f64) -> Result<f64, NoiseModelError> {
    if !(a >= 0.0) || !(b >= 0.0) || b > a {
        return Err(NoiseModelError::BinomialDomain { a, b });
    }
    Ok(ln_gamma(a + 1.0) - ln_gamma(b + 1.0) - ln_gamma(a - b + 1.0))
}

/// A probability clamped to [0, 1]; clamping is surfaced, never silent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampedProbability {
    /// Value after clamping to [0, 1].
    pub value: f64,
    /// Natural log of the unclamped value; -inf when the sum is empty.
    pub ln_raw: f64,
    pub clamped: bool,
}

impl ClampedProbability {
    fn zero() -> Self {
        Self {
            value: 0.0,
            ln_raw: f64::NEG_INFINITY,
            clamped: false,
        }
    }

    fn from_ln(ln_raw: f64) -> Self {
        let raw = ln_raw.exp();
        if raw > 1.0 {
            Self {
                value: 1.0,
                ln_raw,
                clamped: true,
            }
        } else {
            Self {
                value: raw,
                ln_raw,
                clamped: false,
            }
        }
    }
}

// ln sum_{k = o_m}^{min(s, n_b)} C(n_b, k), via log-sum-exp.
// None when the sum is empty.
fn ln_binomial_tail_sum(n_b: usize, o_m: usize, s: usize) -> Option<f64> {
    let hi = s.min(n_b);
    if o_m > hi {
        return None;
    }
    let terms: Vec<f64> = (o_m..=hi)
        .map(|k| {
            log_generalized_binomial(n_b as f64, k as f64)
                .expect("k <= n_b keeps the coefficient in domain")
        })
        .collect();
    Some(log_sum_exp(&terms))
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|&t| (t - max).exp()).sum::<f64>().ln()
}

// The literal factorized form: [sum_k C(n_b, k)] * C(n - n_b, e) / C(n, e).
fn match_probability_literal(
    p: &PropagationParams,
    e: f64,
    quantity: &'static str,
) -> Result<ClampedProbability, NoiseModelError> {
    p.validate()?;
    let free = (p.n - p.n_b) as f64;
    if e > free {
        return Err(NoiseModelError::ExpectationOutOfDomain {
            quantity,
            value: e,
            bound: "n - n_b",
            limit: free,
        });
    }
    let Some(ln_sum) = ln_binomial_tail_sum(p.n_b, p.o_m, p.s) else {
        return Ok(ClampedProbability::zero());
    };
    let ln_p =
        ln_sum + log_generalized_binomial(free, e)? - log_generalized_binomial(p.n as f64, e)?;
    Ok(ClampedProbability::from_ln(ln_p))
}

// Coupled (hypergeometric-style) form:
// sum_k C(n_b, k) * C(n - n_b, e - k) / C(n, e).
fn match_probability_coupled_form(
    p: &PropagationParams,
    e: f64,
    quantity: &'static str,
) -> Result<ClampedProbability, NoiseModelError> {
    p.validate()?;
    let n = p.n as f64;
    if e > n {
        return Err(NoiseModelError::ExpectationOutOfDomain {
            quantity,
            value: e,
            bound: "n",
            limit: n,
        });
    }
    let free = (p.n - p.n_b) as f64;
    let ln_denominator = log_generalized_binomial(n, e)?;
    let mut terms = Vec::new();
    for k in p.o_m..=p.s.min(p.n_b) {
        let rest = e - k as f64;
        if rest < 0.0 || rest > free {
            continue;
        }
        let t = log_generalized_binomial(p.n_b as f64, k as f64)?
            + log_generalized_binomial(free, rest)?
            - ln_denominator;
        terms.push(t);
    }
    if terms.is_empty() {
        return Ok(ClampedProbability::zero());
    }
    Ok(ClampedProbability::from_ln(log_sum_exp(&terms)))
}

/// Probability that a random signal vector matches a column's synapse
/// pattern (overlap >= o_m), literal form with E[X_SPM].
pub fn match_probability_signal(
    p: &PropagationParams,
) -> Result<ClampedProbability, NoiseModelError> {
    let e = propagation_expectations(p)?.e_spm;
    match_probability_literal(p, e, "E[X_SPM]")
}

/// Same with the noisy-overlap expectation E[X_NB].
pub fn match_probability_noise(
    p: &PropagationParams,
) -> Result<ClampedProbability, NoiseModelError> {
    let e = propagation_expectations(p)?.e_nb;
    match_probability_literal(p, e, "E[X_NB]")
}

/// Coupled variant of [`match_probability_signal`].
pub fn match_probability_signal_coupled(
    p: &PropagationParams,
) -> Result<ClampedProbability, NoiseModelError> {
    let e = propagation_expectations(p)?.e_spm;
    match_probability_coupled_form(p, e, "E[X_SPM]")
}

/// Coupled variant of [`match_probability_noise`].
pub fn match_probability_noise_coupled(
    p: &PropagationParams,
) -> Result<ClampedProbability, NoiseModelError> {
    let e = propagation_expectations(p)?.e_nb;
    match_probability_coupled_form(p, e, "E[X_NB]")
}

/// Tail of the coupled form at an explicit draw count; the exact match
/// probability when `draws` is the integer number of surviving
/// synapses.
pub fn hypergeometric_tail(
    p: &PropagationParams,
    draws: f64,
) -> Result<ClampedProbability, NoiseModelError> {
    match_probability_coupled_form(p, draws, "draws")
}

/// ln of the signal/noise match-probability ratio, in its factorial
/// form. The summed C(n_b, k) factor cancels between numerator and
/// denominator.
pub fn noise_impact_ratio_ln(p: &PropagationParams) -> Result<f64, NoiseModelError> {
    let e = propagation_expectations(p)?;
    let p_noise = match_probability_noise(p)?;
    // Also validates the signal-side domain before evaluating.
    let _p_signal = match_probability_signal(p)?;
    if p_noise.ln_raw == f64::NEG_INFINITY {
        return Err(NoiseModelError::NoiseMatchZero);
    }
    let n = p.n as f64;
    let n_b = p.n_b as f64;
    // Grouped as paired differences so the no-noise case (equal
    // expectations) cancels exactly.
    Ok(
        (ln_gamma(n - n_b - e.e_nb + 1.0) - ln_gamma(n - n_b - e.e_spm + 1.0))
            + (ln_gamma(n - e.e_spm + 1.0) - ln_gamma(n - e.e_nb + 1.0)),
    )
}

/// Degree of matching ambiguity caused by noise: the ratio of the
/// signal to the noise match probability.
pub fn noise_impact_ratio(p: &PropagationParams) -> Result<f64, NoiseModelError> {
    Ok(noise_impact_ratio_ln(p)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimates of the five stage expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloPropagation {
    pub scm: Estimate,
    pub spm: Estimate,
    pub ncm: Estimate,
    pub npm: Estimate,
    pub nb: Estimate,
    pub trials: u64,
}

impl MonteCarloPropagation {
    pub fn estimates(&self) -> [(&'static str, Estimate); 5] {
        [
            ("scm", self.scm),
            ("spm", self.spm),
            ("ncm", self.ncm),
            ("npm", self.npm),
            ("nb", self.nb),
        ]
    }
}

#[derive(Default, Clone, Copy)]
struct TrialSums {
    sum: [u64; 5],
    sumsq: [u64; 5],
}

impl TrialSums {
    fn add(mut self, counts: [u64; 5]) -> Self {
        for i in 0..5 {
            self.sum[i] += counts[i];
            self.sumsq[i] += counts[i] * counts[i];
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        for i in 0..5 {
            self.sum[i] += other.sum[i];
            self.sumsq[i] += other.sumsq[i];
        }
        self
    }
}

struct TrialScratch {
    input_sampler: SubsetSampler,
    noise_sampler: SubsetSampler,
    signal_mask: Vec<u8>,
    noise_mask: Vec<u8>,
    // 1 where a rewritten position was set to one.
    one_mask: Vec<u8>,
}

impl TrialScratch {
    fn new(p: &PropagationParams) -> Self {
        Self {
            input_sampler: SubsetSampler::new(p.n),
            noise_sampler: SubsetSampler::new(p.w.max(1)),
            signal_mask: vec![0; p.n],
            noise_mask: vec![0; p.n],
            one_mask: vec![0; p.n],
        }
    }
}

fn run_trial(
    p: &PropagationParams,
    rng: &mut Xoshiro256pp,
    scratch: &mut TrialScratch,
) -> [u64; 5] {
    let signal = scratch.input_sampler.sample(rng, p.n_b);
    let connectivity = scratch.input_sampler.sample(rng, p.s);
    let noise_positions = scratch.input_sampler.sample(rng, p.w);
    let noise_one_picks = scratch.noise_sampler.sample(rng, p.w_b);

    for &i in &signal {
        scratch.signal_mask[i as usize] = 1;
    }
    for &i in &noise_positions {
        scratch.noise_mask[i as usize] = 1;
    }
    for &j in &noise_one_picks {
        scratch.one_mask[noise_positions[j as usize] as usize] = 1;
    }

    let mut counts = [0u64; 5];
    for &idx in &connectivity {
        let survives = rng.bernoulli(p.m);
        let i = idx as usize;
        let sig = scratch.signal_mask[i] as u64;
        let noise = scratch.noise_mask[i] as u64;
        let noisy = if noise == 1 {
            scratch.one_mask[i] as u64
        } else {
            sig
        };
        counts[0] += sig;
        counts[1] += sig * survives as u64;
        counts[2] += noise;
        counts[3] += noise * survives as u64;
        counts[4] += noisy;
    }

    for &i in &signal {
        scratch.signal_mask[i as usize] = 0;
    }
    for &i in &noise_positions {
        scratch.noise_mask[i as usize] = 0;
        scratch.one_mask[i as usize] = 0;
    }
    counts
}

/// Simulates the stage mappings trial by trial: a random signal with
/// `n_b` ones, a random `s`-subset connectivity, Bernoulli(m)
/// permanence retention and `w` rewritten positions carrying `w_b`
/// ones. Trials use per-trial seed substreams and integer accumulation,
/// so estimates are identical for any degree of parallelism.
pub fn monte_carlo_propagation(
    p: &PropagationParams,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloPropagation, NoiseModelError> {
    p.validate()?;
    if trials < 1000 {
        return Err(NoiseModelError::TooFewTrials(trials));
    }
    let sums = (0..trials)
        .into_par_iter()
        .fold(
            || (TrialSums::default(), None::<TrialScratch>),
            |(acc, scratch), trial| {
                let mut scratch = scratch.unwrap_or_else(|| TrialScratch::new(p));
                let mut rng = Xoshiro256pp::from_seed_stream(seed, trial);
                let counts = run_trial(p, &mut rng, &mut scratch);
                (acc.add(counts), Some(scratch))
            },
        )
        .map(|(acc, _)| acc)
        .reduce(TrialSums::default, TrialSums::merge);

    let estimate = |i: usize| {
        let n = trials as f64;
        let mean = sums.sum[i] as f64 / n;
        let var = (sums.sumsq[i] as f64 / n - mean * mean) * n / (n - 1.0);
        Estimate {
            mean,
            std_error: (var.max(0.0) / n).sqrt(),
        }
    };
    Ok(MonteCarloPropagation {
        scm: estimate(0),
        spm: estimate(1),
        ncm: estimate(2),
        npm: estimate(3),
        nb: estimate(4),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(
        n: usize,
        n_b: usize,
        s: usize,
        m: f64,
        o_m: usize,
        w: usize,
        w_b: usize,
    ) -> PropagationParams {
        PropagationParams {
            n,
            n_b,
            s,
            c: 2048,
            m,
            o_m,
            w,
            w_b,
        }
    }

    /// Independent ln Gamma: Stirling series after shifting the
    /// argument above 10 by downward recursion.
    fn ln_gamma_stirling(mut x: f64) -> f64 {
        assert!(x > 0.0);
        let mut shift = 0.0;
        while x < 10.0 {
            shift -= x.ln();
            x += 1.0;
        }
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let series = inv / 12.0 - inv * inv2 / 360.0 + inv * inv2 * inv2 / 1260.0
            - inv * inv2 * inv2 * inv2 / 1680.0;
        shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
    }

    #[test]
    fn ln_gamma_matches_stirling_oracle() {
        for x in [0.5, 1.0, 1.5, 2.0, 3.2, 7.7, 10.5, 11.7, 100.0, 32161.0] {
            let got = ln_gamma(x);
            let want = ln_gamma_stirling(x);
            let rel = ((got - want) / want.abs().max(1.0)).abs();
            assert!(rel < 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn generalized_binomial_small_cases() {
        assert!(log_generalized_binomial(5.0, 0.0).unwrap().abs() < 1e-12);
        assert!((log_generalized_binomial(5.0, 2.0).unwrap() - f64::ln(10.0)).abs() < 1e-12);
    }

    #[test]
    fn generalized_binomial_matches_exact_integer_coefficients() {
        // Exact C(n, k) via u128 against the gamma route.
        for n in 1..=30u32 {
            let mut exact: u128 = 1;
            for k in 0..=n {
                if k > 0 {
                    exact = exact * (n - k + 1) as u128 / k as u128;
                }
                let got = log_generalized_binomial(n as f64, k as f64).unwrap();
                let want = (exact as f64).ln();
                assert!(
                    (got - want).abs() < 1e-10 * want.abs().max(1.0),
                    "C({n},{k})"
                );
            }
        }
    }

    #[test]
    fn generalized_binomial_real_arguments_match_oracle() {
        let got = log_generalized_binomial(10.5, 3.2).unwrap();
        let want = ln_gamma_stirling(11.5) - ln_gamma_stirling(4.2) - ln_gamma_stirling(8.3);
        assert!(((got - want) / want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn generalized_binomial_domain_errors() {
        assert_eq!(
            log_generalized_binomial(3.0, 4.0),
            Err(NoiseModelError::BinomialDomain { a: 3.0, b: 4.0 })
        );
        assert!(log_generalized_binomial(-1.0, 0.0).is_err());
        assert!(log_generalized_binomial(2.0, -0.5).is_err());
    }

    #[test]
    fn expectations_reference_point() {
        let e = propagation_expectations(&params(1920, 192, 64, 1.0, 8, 0, 0)).unwrap();
        assert_eq!(e.e_scm, 6.4);
        assert_eq!(e.e_spm, 6.4);
        assert_eq!(e.e_ncm, 0.0);
        assert_eq!(e.e_npm, 0.0);
        assert_eq!(e.e_nb, 6.4);
    }

    #[test]
    fn no_noise_collapses_exactly() {
        for (n, n_b, s) in [(256, 13, 16), (1920, 192, 64), (777, 33, 21)] {
            let e = propagation_expectations(&params(n, n_b, s, 1.0, 0, 0, 0)).unwrap();
            assert_eq!(e.e_nb, e.e_scm);
            assert_eq!(e.e_spm, e.e_scm);
        }
    }

    #[test]
    fn params_validation_errors() {
        assert!(matches!(
            params(8, 9, 4, 1.0, 0, 0, 0).validate(),
            Err(NoiseModelError::SignalExceedsInput { .. })
        ));
        assert!(matches!(
            params(8, 4, 4, 1.0, 0, 9, 0).validate(),
            Err(NoiseModelError::NoiseExceedsInput { .. })
        ));
        assert!(matches!(
            params(8, 4, 4, 1.0, 0, 2, 3).validate(),
            Err(NoiseModelError::NoiseOnesExceedNoise { .. })
        ));
        assert!(matches!(
            params(8, 4, 4, 1.0, 5, 0, 0).validate(),
            Err(NoiseModelError::MinOverlapExceedsSynapses { .. })
        ));
        assert!(matches!(
            params(8, 4, 4, 1.5, 0, 0, 0).validate(),
            Err(NoiseModelError::ReductionRatioOutOfRange(_))
        ));
    }

    #[test]
    fn empty_sum_gives_zero_probability() {
        // o_m above s is rejected by validation; o_m above n_b leaves
        // an empty sum.
        let p = params(16, 2, 8, 1.0, 5, 0, 0);
        let prob = match_probability_signal(&p).unwrap();
        assert_eq!(prob.value, 0.0);
        assert!(!prob.clamped);
        assert_eq!(prob.ln_raw, f64::NEG_INFINITY);
    }

    #[test]
    fn all_ones_signal_violates_binomial_domain() {
        // n_b = n forces E[X_SPM] > n - n_b = 0; the stated
        // precondition rejects it, naming the constraint.
        let p = params(8, 8, 4, 1.0, 0, 0, 0);
        assert!(matches!(
            match_probability_signal(&p),
            Err(NoiseModelError::ExpectationOutOfDomain {
                bound: "n - n_b",
                ..
            })
        ));
    }

    /// Exhaustive enumeration of connectivity (and survival) choices:
    /// the fraction of choices whose surviving synapses overlap the
    /// signal in at least o_m positions. Signal fixed to the first n_b
    /// bits, valid by symmetry.
    fn enumerate_match_probability(p: &PropagationParams) -> f64 {
        let surviving = (p.s as f64 * p.m).round() as usize;
        assert_eq!(
            surviving as f64,
            p.s as f64 * p.m,
            "s*m must be integer here"
        );
        let sig_mask: u32 = (1u32 << p.n_b) - 1;
        let mut matched = 0u64;
        let mut total = 0u64;
        for conn in 0..(1u32 << p.n) {
            if conn.count_ones() as usize != p.s {
                continue;
            }
            let conn_bits: Vec<u32> = (0..p.n as u32).filter(|b| conn >> b & 1 == 1).collect();
            for survive in 0..(1u32 << p.s) {
                if survive.count_ones() as usize != surviving {
                    continue;
                }
                let mut kept: u32 = 0;
                for (j, &b) in conn_bits.iter().enumerate() {
                    if survive >> j & 1 == 1 {
                        kept |= 1 << b;
                    }
                }
                total += 1;
                if (kept & sig_mask).count_ones() as usize >= p.o_m {
                    matched += 1;
                }
            }
        }
        matched as f64 / total as f64
    }

    #[test]
    fn tiny_instance_enumeration_and_both_evaluators() {
        // The instance n=8, n_b=3, s=4, m=1, o_m=2. The enumeration
        // oracle over all C(8,4) connectivity choices is the ground
        // truth for simulated matching; the literal formula saturates
        // and clamps, which is reported, not hidden.
        let p = params(8, 3, 4, 1.0, 2, 0, 0);
        let enumerated = enumerate_match_probability(&p);
        assert!((enumerated - 0.5).abs() < 1e-12);

        let literal = match_probability_signal(&p).unwrap();
        assert!(
            literal.clamped,
            "literal formula exceeds 1 on this instance"
        );
        assert_eq!(literal.value, 1.0);

        // The hypergeometric tail at the true surviving-draw count
        // matches the enumeration exactly.
        let hyp = hypergeometric_tail(&p, 4.0).unwrap();
        assert!(
            (hyp.value - enumerated).abs() < 1e-9,
            "{} vs {enumerated}",
            hyp.value
        );

        // The coupled variant evaluated at E[X_SPM] = 1.5 is neither.
        let coupled = match_probability_signal_coupled(&p).unwrap();
        assert!(coupled.value >= 0.0 && coupled.value <= 1.0);
    }

    #[test]
    fn hypergeometric_tail_matches_enumeration_with_survival() {
        // m = 0.5 with s = 4: surviving draws = 2.
        let p = params(8, 4, 4, 0.5, 1, 0, 0);
        let enumerated = enumerate_match_probability(&p);
        let hyp = hypergeometric_tail(&p, 2.0).unwrap();
        assert!(
            (hyp.value - enumerated).abs() < 1e-9,
            "{} vs {enumerated}",
            hyp.value
        );
    }

    #[test]
    fn noise_probability_collapses_without_noise() {
        let p = params(1920, 192, 64, 1.0, 8, 0, 0);
        let sig = match_probability_signal(&p).unwrap();
        let noise = match_probability_noise(&p).unwrap();
        assert_eq!(sig, noise);
    }

    #[test]
    fn impact_ratio_is_one_without_noise() {
        let p = params(1920, 192, 64, 1.0, 8, 0, 0);
        assert_eq!(noise_impact_ratio(&p).unwrap(), 1.0);
    }

    #[test]
    fn impact_ratio_matches_probability_quotient() {
        let p = params(1920, 192, 64, 0.8, 20, 250, 125);
        let ln_ratio = noise_impact_ratio_ln(&p).unwrap();
        let sig = match_probability_signal(&p).unwrap();
        let noise = match_probability_noise(&p).unwrap();
        let ln_quotient = sig.ln_raw - noise.ln_raw;
        assert!(
            (ln_ratio - ln_quotient).abs() < 1e-9 * ln_ratio.abs().max(1.0),
            "{ln_ratio} vs {ln_quotient}"
        );
    }

    #[test]
    fn impact_ratio_is_monotone_in_noise_ones() {
        let mut prev = None;
        for w_b in [0usize, 50, 100, 150, 200] {
            let p = params(1920, 192, 64, 1.0, 8, 250, w_b);
            let r = noise_impact_ratio(&p).unwrap();
            if let Some(prev) = prev {
                assert!(r > prev, "ratio not increasing at w_b={w_b}");
            }
            prev = Some(r);
        }
    }

    #[test]
    fn impact_ratio_rejects_zero_noise_probability() {
        // o_m beyond n_b empties both sums; the noise probability is 0.
        let p = params(16, 2, 8, 1.0, 5, 2, 1);
        assert_eq!(noise_impact_ratio(&p), Err(NoiseModelError::NoiseMatchZero));
    }

    #[test]
    fn monte_carlo_smoke_against_closed_forms() {
        let p = params(1920, 192, 64, 1.0, 8, 0, 0);
        let mc = monte_carlo_propagation(&p, 20_000, 99).unwrap();
        assert!(
            (mc.scm.mean - 6.4).abs() / 6.4 < 0.02,
            "scm {}",
            mc.scm.mean
        );
        assert_eq!(mc.ncm.mean, 0.0);
        assert_eq!(mc.ncm.std_error, 0.0);
        assert_eq!(mc.nb.mean, mc.scm.mean);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_thread_independent() {
        let p = params(256, 26, 16, 0.5, 2, 33, 16);
        let a = monte_carlo_propagation(&p, 2000, 7).unwrap();
        let b = monte_carlo_propagation(&p, 2000, 7).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| monte_carlo_propagation(&p, 2000, 7).unwrap());
        assert_eq!(a, single);
    }

    #[test]
    fn monte_carlo_rejects_too_few_trials() {
        let p = params(64, 6, 8, 1.0, 2, 0, 0);
        assert_eq!(
            monte_carlo_propagation(&p, 999, 1),
            Err(NoiseModelError::TooFewTrials(999))
        );
    }

    #[test]
    fn probabilities_stay_in_unit_interval() {
        let mut rng = crate::rng::Xoshiro256pp::from_seed(1);
        for _ in 0..200 {
            let n = 8 + rng.next_below(256) as usize;
            let n_b = rng.next_below(n as u64 / 2 + 1) as usize;
            let s = 1 + rng.next_below(16.min(n as u64 / 2).max(1)) as usize;
            let o_m = rng.next_below(s as u64 + 1) as usize;
            let w = rng.next_below(n as u64 / 2 + 1) as usize;
            let w_b = rng.next_below(w as u64 + 1) as usize;
            let m = 0.25 + 0.75 * rng.next_f64();
            let p = params(n, n_b, s, m, o_m, w, w_b);
            for result in [
                match_probability_signal(&p),
                match_probability_noise(&p),
                match_probability_signal_coupled(&p),
                match_probability_noise_coupled(&p),
            ] {
                if let Ok(prob) = result {
                    assert!((0.0..=1.0).contains(&prob.value));
                    if prob.clamped {
                        assert!(prob.ln_raw > 0.0);
                    }
                }
            }
        }
    }
}
