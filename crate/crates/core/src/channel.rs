//! Per-link channel model: `y = h·x + w` with `w ~ N(0, σ²)`.
//!
//! Two knowledge scenarios are supported. In [`FadingMode::KnownCsi`] the
//! receiver knows the fading envelope `h` of the link. In
//! [`FadingMode::KnownStats`] it only knows that `h` is Rayleigh distributed
//! with `E[h²] = σ_h²`, and the likelihood is the fading-marginalised density.

use std::f64::consts::{PI, SQRT_2};
use std::ops::Neg;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this value of `a·|y|` the Mills-ratio complement switches to its
/// asymptotic series.
const MILLS_ASYMPTOTIC_FROM: f64 = 26.0;

/// Antipodal transmit symbol with unit energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Minus,
    Plus,
}

impl Symbol {
    pub fn value(self) -> f64 {
        match self {
            Symbol::Minus => -1.0,
            Symbol::Plus => 1.0,
        }
    }

    /// `sgn(v)` with the tie `sgn(0) = +1`.
    pub fn from_sign(v: f64) -> Symbol {
        if v >= 0.0 {
            Symbol::Plus
        } else {
            Symbol::Minus
        }
    }

    pub fn is_plus(self) -> bool {
        self == Symbol::Plus
    }

    /// Bit used by the κ/ζ encodings: `z = (x + 1) / 2`.
    pub fn bit(self) -> usize {
        self.is_plus() as usize
    }

    pub fn from_bit(bit: bool) -> Symbol {
        if bit {
            Symbol::Plus
        } else {
            Symbol::Minus
        }
    }
}

impl Neg for Symbol {
    type Output = Symbol;

    fn neg(self) -> Symbol {
        match self {
            Symbol::Minus => Symbol::Plus,
            Symbol::Plus => Symbol::Minus,
        }
    }
}

impl TryFrom<i64> for Symbol {
    type Error = Error;

    fn try_from(v: i64) -> Result<Symbol> {
        match v {
            -1 => Ok(Symbol::Minus),
            1 => Ok(Symbol::Plus),
            other => Err(Error::InvalidSymbol(other)),
        }
    }
}

/// A received sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FadingMode {
    /// The receiver knows the fading envelope `h ≥ 0`.
    KnownCsi { h: f64 },
    /// The receiver knows only the Rayleigh scale `σ_h² = E[h²]`.
    KnownStats { sigma_h_sq: f64 },
}

/// Noise variance plus what the receiver knows about the fading of one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    noise_variance: f64,
    mode: FadingMode,
}

impl ChannelSpec {
    pub fn new(noise_variance: f64, mode: FadingMode) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidChannel(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        match mode {
            FadingMode::KnownCsi { h } if !(h >= 0.0 && h.is_finite()) => Err(
                Error::InvalidChannel(format!("fading envelope must be >= 0, got {h}")),
            ),
            FadingMode::KnownStats { sigma_h_sq } if !(sigma_h_sq > 0.0 && sigma_h_sq.is_finite()) => {
                Err(Error::InvalidChannel(format!(
                    "Rayleigh scale must be positive, got {sigma_h_sq}"
                )))
            }
            _ => Ok(ChannelSpec { noise_variance, mode }),
        }
    }

    pub fn known_csi(h: f64, noise_variance: f64) -> Result<Self> {
        Self::new(noise_variance, FadingMode::KnownCsi { h })
    }

    pub fn known_stats(sigma_h_sq: f64, noise_variance: f64) -> Result<Self> {
        Self::new(noise_variance, FadingMode::KnownStats { sigma_h_sq })
    }

    /// Known-statistics link with `σ_h² = 1` and the given average SNR.
    pub fn stats_with_snr(snr: f64) -> Result<Self> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::InvalidChannel(format!("SNR must be positive, got {snr}")));
        }
        Self::known_stats(1.0, 1.0 / snr)
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn mode(&self) -> FadingMode {
        self.mode
    }

    pub fn is_known_csi(&self) -> bool {
        matches!(self.mode, FadingMode::KnownCsi { .. })
    }

    /// `h²/σ²` with known CSI, `σ_h²/σ²` with known statistics.
    pub fn snr(&self) -> f64 {
        match self.mode {
            FadingMode::KnownCsi { h } => h * h / self.noise_variance,
            FadingMode::KnownStats { sigma_h_sq } => sigma_h_sq / self.noise_variance,
        }
    }

    pub fn stats_params(&self) -> Option<StatsLikelihoodParams> {
        match self.mode {
            FadingMode::KnownStats { sigma_h_sq } => {
                Some(StatsLikelihoodParams::new(self.noise_variance, sigma_h_sq))
            }
            FadingMode::KnownCsi { .. } => None,
        }
    }

    /// Weight applied to this link by maximal-ratio combining: `h` with
    /// known CSI, the average power `σ_h²` otherwise.
    pub fn mrc_weight(&self) -> f64 {
        match self.mode {
            FadingMode::KnownCsi { h } => h,
            FadingMode::KnownStats { sigma_h_sq } => sigma_h_sq,
        }
    }

    /// `f(y | x)` for this link.
    pub fn likelihood(&self, y: f64, x: Symbol) -> f64 {
        match self.mode {
            FadingMode::KnownCsi { h } => likelihood_csi(y, h, x, self.noise_variance),
            FadingMode::KnownStats { sigma_h_sq } => likelihood_stats(
                y,
                x,
                &StatsLikelihoodParams::new(self.noise_variance, sigma_h_sq),
            ),
        }
    }

    /// `log f(y|+1) − log f(y|−1)`.
    pub fn llr(&self, y: f64) -> f64 {
        self.llr_fn().eval(y)
    }

    /// Precomputed LLR evaluator for hot loops.
    pub fn llr_fn(&self) -> LinkLlr {
        match self.mode {
            FadingMode::KnownCsi { h } => LinkLlr::Linear { scale: 2.0 * h / self.noise_variance },
            FadingMode::KnownStats { sigma_h_sq } => LinkLlr::Rayleigh {
                a: StatsLikelihoodParams::new(self.noise_variance, sigma_h_sq).a,
            },
        }
    }

    /// Probability that `sgn(y) ≠ x` on this link alone.
    pub fn sign_error_probability(&self) -> f64 {
        ber_first_hop(self)
    }
}

/// Link LLR with its constants folded in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinkLlr {
    Linear { scale: f64 },
    Rayleigh { a: f64 },
}

impl LinkLlr {
    #[inline]
    pub fn eval(self, y: f64) -> f64 {
        match self {
            LinkLlr::Linear { scale } => scale * y,
            LinkLlr::Rayleigh { a } => rayleigh_llr(a * y),
        }
    }
}

/// Constants of the fading-marginalised likelihood under Rayleigh fading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsLikelihoodParams {
    /// `a = σ_h / (σ √(2σ² + σ_h²))`.
    pub a: f64,
    /// Prefactor `√(2/π) σ³ a² / σ_h²`.
    pub normalizer: f64,
    pub noise_variance: f64,
}

impl StatsLikelihoodParams {
    pub fn new(noise_variance: f64, sigma_h_sq: f64) -> Self {
        let sigma = noise_variance.sqrt();
        let a = sigma_h_sq.sqrt() / (sigma * (2.0 * noise_variance + sigma_h_sq).sqrt());
        let normalizer = (2.0 / PI).sqrt() * sigma.powi(3) * a * a / sigma_h_sq;
        StatsLikelihoodParams { a, normalizer, noise_variance }
    }
}

/// `Q(z) = 1 − Φ(z)`.
pub fn q_function(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// `1 − t·Φ(−t)/φ(t)` for `t ≥ 0`; decays like `1/t²`.
fn mills_complement(t: f64) -> f64 {
    if t <= MILLS_ASYMPTOTIC_FROM {
        1.0 - t * q_function(t) / normal_pdf(t)
    } else {
        let u = 1.0 / (t * t);
        u * (1.0 - u * (3.0 - u * (15.0 - u * (105.0 - u * 945.0))))
    }
}

/// LLR of the Rayleigh-marginalised likelihood as a function of `t = a·y`.
/// Odd in `t`.
fn rayleigh_llr(t: f64) -> f64 {
    let s = t.abs();
    if s == 0.0 {
        return 0.0;
    }
    let d = mills_complement(s);
    let v = if s <= MILLS_ASYMPTOTIC_FROM {
        (s / (normal_pdf(s) * d)).ln_1p()
    } else {
        // φ(s)·d underflows relative to s here.
        s.ln() + 0.5 * s * s + LN_SQRT_2PI - d.ln()
    };
    v.copysign(t)
}

/// Draws a Rayleigh envelope with `E[h²] = σ_h²`.
pub fn sample_fading<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> Result<f64> {
    match spec.mode {
        FadingMode::KnownStats { sigma_h_sq } => Ok(rayleigh(sigma_h_sq, rng)),
        FadingMode::KnownCsi { .. } => Err(Error::FadingNotRandom),
    }
}

#[inline]
pub(crate) fn rayleigh<R: Rng + ?Sized>(sigma_h_sq: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    (sigma_h_sq * e).sqrt()
}

/// Draws `y = h·x + w`. With known statistics a fresh `h` is drawn first,
/// which samples the marginalised density exactly.
pub fn sample_observation<R: Rng + ?Sized>(x: Symbol, spec: &ChannelSpec, rng: &mut R) -> Observation {
    Observation { value: sample_value(x, spec, rng) }
}

#[inline]
pub(crate) fn sample_value<R: Rng + ?Sized>(x: Symbol, spec: &ChannelSpec, rng: &mut R) -> f64 {
    let h = match spec.mode {
        FadingMode::KnownCsi { h } => h,
        FadingMode::KnownStats { sigma_h_sq } => rayleigh(sigma_h_sq, rng),
    };
    let w: f64 = rng.sample(StandardNormal);
    h * x.value() + spec.noise_variance.sqrt() * w
}

/// Gaussian likelihood of `y` given known fading `h` and symbol `x`.
pub fn likelihood_csi(y: f64, h: f64, x: Symbol, sigma_sq: f64) -> f64 {
    let d = y - h * x.value();
    (-d * d / (2.0 * sigma_sq)).exp() / (2.0 * PI * sigma_sq).sqrt()
}

/// Rayleigh-marginalised likelihood `f(y | x)`.
pub fn likelihood_stats(y: f64, x: Symbol, params: &StatsLikelihoodParams) -> f64 {
    let base = -y * y / (2.0 * params.noise_variance);
    let s = params.a * x.value() * y;
    // e^base · (1 + s·Φ(s)/φ(s)); for s > 0 split as (1 − s·Q/φ) + s/φ
    let mut bracket = base.exp() * mills_complement(s.abs());
    if s > 0.0 {
        bracket += SQRT_2PI * s * (base + 0.5 * s * s).exp();
    }
    params.normalizer * bracket
}

/// `log L̃ = 2yh/σ²`.
pub fn llr_csi(y: f64, h: f64, sigma_sq: f64) -> f64 {
    2.0 * y * h / sigma_sq
}

/// LLR of the Rayleigh-marginalised likelihood, stable for large `|a·y|`.
pub fn llr_stats(y: f64, params: &StatsLikelihoodParams) -> f64 {
    rayleigh_llr(params.a * y)
}

/// Error probability of the sign detector on a single link:
/// `Q(√γ)` with known CSI, `½(1 − √((γ/2)/(γ/2 + 1)))` under Rayleigh fading.
pub fn ber_first_hop(spec: &ChannelSpec) -> f64 {
    let gamma = spec.snr();
    match spec.mode {
        FadingMode::KnownCsi { .. } => q_function(gamma.sqrt()),
        FadingMode::KnownStats { .. } => {
            let half = 0.5 * gamma;
            let ratio = half / (half + 1.0);
            // 1 − √r written as (1 − r)/(1 + √r) to keep precision at high SNR
            0.5 * (1.0 / (half + 1.0)) / (1.0 + ratio.sqrt())
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(close(q_function(1.0), 0.158_655_253_931_457, 1e-12));
        assert!(close(q_function(-1.0), 0.841_344_746_068_543, 1e-12));
        // tail keeps relative accuracy
        assert!(((q_function(10.0) - 7.619_853_024_160_527e-24) / 7.6e-24).abs() < 1e-10);
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelSpec::known_csi(1.0, 0.0).is_err());
        assert!(ChannelSpec::known_csi(-0.1, 1.0).is_err());
        assert!(ChannelSpec::known_stats(0.0, 1.0).is_err());
        let c = ChannelSpec::known_csi(2.0, 0.5).unwrap();
        assert_eq!(c.snr(), 8.0);
        let s = ChannelSpec::known_stats(2.0, 0.5).unwrap();
        assert_eq!(s.snr(), 4.0);
    }

    #[test]
    fn sample_fading_rejects_known_csi() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = ChannelSpec::known_csi(1.0, 1.0).unwrap();
        assert!(matches!(sample_fading(&c, &mut rng), Err(Error::FadingNotRandom)));
    }

    #[test]
    fn rayleigh_second_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (scale, lo, hi) in [(1.0, 0.99, 1.01), (4.0, 3.96, 4.04)] {
            let spec = ChannelSpec::known_stats(scale, 1.0).unwrap();
            let n = 1_000_000;
            let mut acc = 0.0;
            for _ in 0..n {
                let h = sample_fading(&spec, &mut rng).unwrap();
                assert!(h >= 0.0);
                acc += h * h;
            }
            let m = acc / n as f64;
            assert!(m > lo && m < hi, "mean h² = {m}");
        }
    }

    #[test]
    fn zero_noise_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ChannelSpec::known_csi(1.0, 1e-20).unwrap();
        let y = sample_observation(Symbol::Plus, &spec, &mut rng).value;
        assert!(close(y, 1.0, 1e-8));
    }

    #[test]
    fn stats_sign_error_matches_closed_form() {
        // γ = 1 → ½(1 − √(1/3)) = 0.211325
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = ChannelSpec::known_stats(1.0, 1.0).unwrap();
        let n = 1_000_000;
        let neg = (0..n)
            .filter(|_| sample_observation(Symbol::Plus, &spec, &mut rng).value < 0.0)
            .count();
        let p = neg as f64 / n as f64;
        assert!(close(p, 0.211_324_865, 0.002), "{p}");
        assert!(close(ber_first_hop(&spec), 0.211_324_865_405_187, 1e-12));
    }

    #[test]
    fn csi_likelihood_values() {
        assert!(close(likelihood_csi(0.0, 1.0, Symbol::Plus, 1.0), 0.241_970_724_519_143, 1e-12));
        let peak = likelihood_csi(1.3, 1.3, Symbol::Plus, 0.7);
        assert!(close(peak, 1.0 / (2.0 * PI * 0.7).sqrt(), 1e-14));
        for y in [-2.0, -0.3, 0.0, 1.1] {
            assert_eq!(
                likelihood_csi(y, 0.8, Symbol::Plus, 0.5),
                likelihood_csi(-y, 0.8, Symbol::Minus, 0.5)
            );
        }
    }

    fn stats(noise: f64, sigma_h_sq: f64) -> StatsLikelihoodParams {
        StatsLikelihoodParams::new(noise, sigma_h_sq)
    }

    #[test]
    fn stats_likelihood_matches_fading_average() {
        // f(y|x) = ∫ p(h) N(y; hx, σ²) dh by a midpoint rule over h
        let (noise, s) = (0.6, 1.4);
        let p = stats(noise, s);
        for y in [-3.0, -0.7, 0.0, 0.4, 2.2, 5.0] {
            for x in [Symbol::Plus, Symbol::Minus] {
                let dh = 1e-4;
                let direct: f64 = (0..200_000)
                    .map(|i| {
                        let h = (i as f64 + 0.5) * dh;
                        2.0 * h / s * (-h * h / s).exp() * likelihood_csi(y, h, x, noise) * dh
                    })
                    .sum();
                assert!(close(likelihood_stats(y, x, &p), direct, 1e-9), "{y} {x:?}");
            }
        }
    }

    #[test]
    fn stats_likelihood_normalises() {
        for (noise, s) in [(1.0, 2.0), (0.5, 1.0), (0.1, 1.0)] {
            let p = stats(noise, s);
            let sigma = f64::sqrt(noise);
            let h = 1e-3 * sigma;
            let n = 40_000;
            let total: f64 = (-n..n).map(|i| likelihood_stats((i as f64 + 0.5) * h, Symbol::Plus, &p) * h).sum();
            assert!(close(total, 1.0, 1e-6), "{total}");
        }
        // γ = 2: the mass below zero is the sign-error probability
        let p = stats(1.0, 2.0);
        let h = 1e-3;
        let below: f64 = (0..60_000).map(|i| likelihood_stats(-(i as f64 + 0.5) * h, Symbol::Plus, &p) * h).sum();
        assert!(close(below, 0.146447, 1e-6), "{below}");
    }

    #[test]
    fn stats_llr_consistent_with_likelihood() {
        let p = stats(0.5, 1.0);
        for y in [0.5, -0.5, 2.0, -2.0, 10.0, -10.0] {
            let lhs = llr_stats(y, &p).exp() * likelihood_stats(y, Symbol::Minus, &p);
            let rhs = likelihood_stats(y, Symbol::Plus, &p);
            assert!(((lhs - rhs) / rhs).abs() < 1e-9, "{y}: {lhs} vs {rhs}");
            assert_eq!(likelihood_stats(y, Symbol::Plus, &p), likelihood_stats(-y, Symbol::Minus, &p));
        }
    }

    #[test]
    fn llr_csi_values() {
        assert_eq!(llr_csi(0.0, 1.0, 1.0), 0.0);
        assert_eq!(llr_csi(1.0, 1.0, 1.0), 2.0);
        assert_eq!(llr_csi(3.7, 0.0, 1.0), 0.0);
    }

    #[test]
    fn llr_stats_is_odd_and_finite() {
        let p = StatsLikelihoodParams::new(0.5, 1.0);
        assert_eq!(llr_stats(0.0, &p), 0.0);
        for y in [1e-6, 0.1, 1.0, 5.0, 30.0, 36.0, 37.0, 100.0, 1e4, 1e150] {
            let l = llr_stats(y, &p);
            assert!(l.is_finite() && l > 0.0, "y={y} llr={l}");
            assert_eq!(llr_stats(-y, &p), -l);
        }
    }

    #[test]
    fn llr_stats_continuous_across_asymptotic_switch() {
        let below = rayleigh_llr(MILLS_ASYMPTOTIC_FROM);
        let above = rayleigh_llr(MILLS_ASYMPTOTIC_FROM * (1.0 + 1e-12));
        assert!(((below - above) / below).abs() < 1e-9, "{below} {above}");
    }

    #[test]
    fn llr_stats_monotone() {
        let p = StatsLikelihoodParams::new(1.0, 2.0);
        let mut prev = f64::NEG_INFINITY;
        for i in -4000..=4000 {
            let l = llr_stats(i as f64 * 0.02, &p);
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn first_hop_limits() {
        let tiny = ChannelSpec::known_stats(1e-12, 1.0).unwrap();
        assert!(close(ber_first_hop(&tiny), 0.5, 1e-6));
        let g2 = ChannelSpec::known_stats(2.0, 1.0).unwrap();
        assert!(close(ber_first_hop(&g2), 0.146_446_609_406_726, 1e-12));
        let c = ChannelSpec::known_csi(1.0, 1.0).unwrap();
        assert!(close(ber_first_hop(&c), 0.158_655_253_931_457, 1e-12));
    }

    #[test]
    fn symbol_conversions() {
        assert_eq!(Symbol::try_from(1).unwrap(), Symbol::Plus);
        assert_eq!(Symbol::try_from(-1).unwrap(), Symbol::Minus);
        assert!(Symbol::try_from(0).is_err());
        assert_eq!(Symbol::from_sign(0.0), Symbol::Plus);
        assert_eq!(-Symbol::Plus, Symbol::Minus);
    }
}
