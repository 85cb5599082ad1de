//! Channel synthesis: Nakagami-m envelopes with uniform phase, 3GPP UMi
//! path loss, thermal noise floor, and the second-order moments the Bayesian
//! estimators consume.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::{CMat, CVec};

/// How the Nakagami spread parameter is derived from the large-scale gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerConvention {
    /// Omega = m_bar * zeta. Mean power E[|a|^2] grows with the shape.
    #[default]
    SpreadScaledByShape,
    /// Omega = zeta, the usual E[|a|^2] = zeta normalization.
    Conventional,
}

/// Nakagami-m fading parameters for one link.
#[derive(Debug, Clone, Copy)]
pub struct FadingParams<T: Real> {
    shape: T,
    large_scale: T,
    spread: T,
}

impl<T: Real> FadingParams<T> {
    /// Build from shape `m_bar >= 0.5` and linear large-scale gain `zeta`.
    pub fn new(shape: T, large_scale: T, convention: PowerConvention) -> Result<Self> {
        if shape < T::of(0.5) {
            return Err(Error::Config(format!("Nakagami shape must be >= 0.5, got {shape}")));
        }
        if large_scale <= T::zero() {
            return Err(Error::Config("large-scale gain must be positive".into()));
        }
        let spread = match convention {
            PowerConvention::SpreadScaledByShape => shape * large_scale,
            PowerConvention::Conventional => large_scale,
        };
        Ok(Self { shape, large_scale, spread })
    }

    pub fn shape(&self) -> T {
        self.shape
    }

    pub fn large_scale(&self) -> T {
        self.large_scale
    }

    /// Spread parameter Omega = E[|a|^2].
    pub fn spread(&self) -> T {
        self.spread
    }
}

/// Link distances and radio parameters of one scenario.
#[derive(Debug, Clone)]
pub struct LinkGeometry<T: Real> {
    /// Source-to-reader distance [m].
    pub d_direct: T,
    /// Source-to-tag distance per tag [m].
    pub d_forward: Vec<T>,
    /// Tag-to-reader distance per tag [m].
    pub d_back: Vec<T>,
    /// Carrier frequency [Hz].
    pub carrier_hz: T,
    /// Bandwidth [Hz].
    pub bandwidth_hz: T,
    /// Receiver noise figure [dB].
    pub noise_figure_db: T,
}

impl<T: Real> LinkGeometry<T> {
    pub fn num_tags(&self) -> usize {
        self.d_forward.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_forward.len() != self.d_back.len() {
            return Err(Error::Config("d_forward and d_back must have equal length".into()));
        }
        let all_positive = self.d_direct > T::zero()
            && self.carrier_hz > T::zero()
            && self.bandwidth_hz > T::zero()
            && self.d_forward.iter().all(|d| *d > T::zero())
            && self.d_back.iter().all(|d| *d > T::zero());
        if !all_positive {
            return Err(Error::Config("distances, carrier and bandwidth must be positive".into()));
        }
        Ok(())
    }
}

/// Nakagami shapes per link class.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FadingShapes<T: Real> {
    pub direct: T,
    pub forward: T,
    pub backscatter: T,
}

impl<T: Real> FadingShapes<T> {
    pub fn uniform(m_bar: T) -> Self {
        Self { direct: m_bar, forward: m_bar, backscatter: m_bar }
    }
}

/// Per-link fading parameters derived from geometry, shapes, and convention.
#[derive(Debug, Clone)]
pub struct ChannelStats<T: Real> {
    pub direct: FadingParams<T>,
    pub forward: Vec<FadingParams<T>>,
    pub backscatter: Vec<FadingParams<T>>,
}

impl<T: Real> ChannelStats<T> {
    pub fn from_geometry(
        geometry: &LinkGeometry<T>,
        shapes: &FadingShapes<T>,
        convention: PowerConvention,
    ) -> Result<Self> {
        geometry.validate()?;
        let fc = geometry.carrier_hz;
        let direct = FadingParams::new(shapes.direct, umi_pathloss(geometry.d_direct, fc)?, convention)?;
        let forward = geometry
            .d_forward
            .iter()
            .map(|d| FadingParams::new(shapes.forward, umi_pathloss(*d, fc)?, convention))
            .collect::<Result<Vec<_>>>()?;
        let backscatter = geometry
            .d_back
            .iter()
            .map(|d| FadingParams::new(shapes.backscatter, umi_pathloss(*d, fc)?, convention))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { direct, forward, backscatter })
    }

    pub fn num_tags(&self) -> usize {
        self.forward.len()
    }
}

/// One fading realization of the whole network.
#[derive(Debug, Clone)]
pub struct ChannelSet<T: Real> {
    /// Direct channel h0 (M).
    pub direct: CVec<T>,
    /// Forward scalars f_k (K).
    pub forward: CVec<T>,
    /// Backscatter vectors g_k as columns (M x K).
    pub backscatter: CMat<T>,
    /// Cascaded channels h_k = f_k g_k as columns (M x K).
    pub cascaded: CMat<T>,
    /// Stacked matrix [h0, sqrt(alpha) h_1, ..., sqrt(alpha) h_K] (M x (K+1)).
    pub stacked: CMat<T>,
    /// Tag reflection coefficient.
    pub alpha: T,
}

impl<T: Real> ChannelSet<T> {
    pub fn num_antennas(&self) -> usize {
        self.direct.len()
    }

    pub fn num_tags(&self) -> usize {
        self.forward.len()
    }
}

/// 3GPP UMi path loss, linear power gain:
/// `PL_dB = 22.7 + 36.7 log10(d_m) + 26 log10(fc_GHz)`.
pub fn umi_pathloss<T: Real>(distance_m: T, carrier_hz: T) -> Result<T> {
    if distance_m <= T::zero() {
        return Err(Error::Config("distance must be positive".into()));
    }
    if carrier_hz <= T::zero() {
        return Err(Error::Config("carrier frequency must be positive".into()));
    }
    let fc_ghz = carrier_hz / T::of(1e9);
    let pl_db = T::of(22.7) + T::of(36.7) * distance_m.log10() + T::of(26.0) * fc_ghz.log10();
    Ok(T::of(10.0).powf(-pl_db / T::of(10.0)))
}

/// Thermal noise power over `bandwidth_hz` with the given noise figure.
#[derive(Debug, Clone, Copy)]
pub struct NoiseVariance<T: Real> {
    pub dbm: T,
    pub linear_mw: T,
}

/// `sigma^2_dBm = -174 + 10 log10(B) + Nf`.
pub fn noise_variance<T: Real>(bandwidth_hz: T, noise_figure_db: T) -> Result<NoiseVariance<T>> {
    if bandwidth_hz <= T::zero() {
        return Err(Error::Config("bandwidth must be positive".into()));
    }
    let dbm = T::of(-174.0) + T::of(10.0) * bandwidth_hz.log10() + noise_figure_db;
    Ok(NoiseVariance { dbm, linear_mw: T::of(10.0).powf(dbm / T::of(10.0)) })
}

/// One complex fading coefficient: Nakagami envelope (`|a|^2` is
/// Gamma(m_bar, Omega/m_bar), so E[|a|^2] = Omega) and uniform phase.
pub fn nakagami_complex_sample<T: Real, R: Rng + ?Sized>(
    params: &FadingParams<T>,
    rng: &mut R,
) -> Complex<T> {
    let power = T::gamma_sample(rng, params.shape, params.spread / params.shape);
    let phase = T::uniform_sample(rng, -T::PI(), T::PI());
    Complex::from_polar(power.sqrt(), phase)
}

/// Draw one full channel realization. Antennas are i.i.d. per link
/// (co-located reader array); cascaded column k is `f_k * g_k` and the
/// stacked matrix carries `sqrt(alpha)` on the cascaded columns.
pub fn gen_channels<T: Real, R: Rng + ?Sized>(
    stats: &ChannelStats<T>,
    alpha: T,
    num_antennas: usize,
    rng: &mut R,
) -> Result<ChannelSet<T>> {
    if num_antennas == 0 {
        return Err(Error::Config("need at least one antenna".into()));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Config(format!("alpha must be in (0,1), got {alpha}")));
    }
    if stats.forward.len() != stats.backscatter.len() {
        return Err(Error::Config("per-tag stats must have equal length".into()));
    }
    let k = stats.num_tags();
    let m = num_antennas;
    let zero = Complex::new(T::zero(), T::zero());

    let direct = Array1::from_iter((0..m).map(|_| nakagami_complex_sample(&stats.direct, rng)));
    let forward =
        Array1::from_iter(stats.forward.iter().map(|p| nakagami_complex_sample(p, rng)));
    let mut backscatter = Array2::from_elem((m, k), zero);
    for (col, p) in stats.backscatter.iter().enumerate() {
        for row in 0..m {
            backscatter[(row, col)] = nakagami_complex_sample(p, rng);
        }
    }

    let mut cascaded = Array2::from_elem((m, k), zero);
    for col in 0..k {
        for row in 0..m {
            cascaded[(row, col)] = forward[col] * backscatter[(row, col)];
        }
    }
    let sqrt_alpha = Complex::new(alpha.sqrt(), T::zero());
    let mut stacked = Array2::from_elem((m, k + 1), zero);
    for row in 0..m {
        stacked[(row, 0)] = direct[row];
        for col in 0..k {
            stacked[(row, col + 1)] = sqrt_alpha * cascaded[(row, col)];
        }
    }
    Ok(ChannelSet { direct, forward, backscatter, cascaded, stacked, alpha })
}

/// Second-order channel moments.
#[derive(Debug, Clone)]
pub struct BetaMoments<T: Real> {
    /// beta_0 = E[|h_{m,0}|^2].
    pub direct: T,
    /// beta_k = E[|f_k g_{m,k}|^2] per tag.
    pub cascaded: Vec<T>,
}

/// Closed-form second moments. The gamma-function ratio in the Nakagami
/// moment collapses via Gamma(m+1)/Gamma(m) = m, so beta_0 = Omega_h and
/// beta_k = Omega_f Omega_g; co-located antennas make them antenna
/// independent.
pub fn beta_moments<T: Real>(stats: &ChannelStats<T>) -> BetaMoments<T> {
    let gamma_ratio = |shape: T| shape; // Gamma(m+1)/Gamma(m)
    let moment = |p: &FadingParams<T>| gamma_ratio(p.shape()) * p.spread() / p.shape();
    let direct = moment(&stats.direct);
    let cascaded = stats
        .forward
        .iter()
        .zip(stats.backscatter.iter())
        .map(|(f, g)| moment(f) * moment(g))
        .collect();
    BetaMoments { direct, cascaded }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn params(shape: f64, spread_target: f64) -> FadingParams<f64> {
        // conventional convention so spread == large_scale == target
        FadingParams::new(shape, spread_target, PowerConvention::Conventional).unwrap()
    }

    #[test]
    fn umi_pathloss_reference_point() {
        let zeta = umi_pathloss(10.0_f64, 3.0e9).unwrap();
        let pl_db = -10.0 * zeta.log10();
        assert!((pl_db - 71.8046).abs() < 1e-3, "PL {pl_db}");
        assert!((zeta - 6.603e-8).abs() / 6.603e-8 < 1e-3, "zeta {zeta:e}");
    }

    #[test]
    fn umi_pathloss_slope_and_monotonicity() {
        let a = umi_pathloss(10.0_f64, 3.0e9).unwrap();
        let b = umi_pathloss(20.0_f64, 3.0e9).unwrap();
        let drop_db = 10.0 * (a / b).log10();
        assert!((drop_db - 36.7 * 2.0f64.log10()).abs() < 1e-9);

        let mut last = f64::INFINITY;
        for d in [1.0, 2.0, 5.0, 10.0, 50.0, 200.0] {
            let z = umi_pathloss(d, 3.0e9).unwrap();
            assert!(z < last);
            last = z;
        }
    }

    #[test]
    fn umi_pathloss_deterministic() {
        let a = umi_pathloss(12.34_f64, 2.6e9).unwrap();
        let b = umi_pathloss(12.34_f64, 2.6e9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn noise_floor_reference_points() {
        let n = noise_variance(10.0e6_f64, 20.0).unwrap();
        assert!((n.dbm - -84.0).abs() < 1e-9);
        let base = noise_variance(1.0_f64, 0.0).unwrap();
        assert!((base.dbm - -174.0).abs() < 1e-9);
        let wide = noise_variance(20.0e6_f64, 20.0).unwrap();
        assert!((wide.dbm - n.dbm - 10.0 * 2.0f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn nakagami_power_matches_spread() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let p = params(3.0, 1.0);
        let n = 1_000_000;
        let mean_power: f64 =
            (0..n).map(|_| nakagami_complex_sample(&p, &mut rng).norm_sqr()).sum::<f64>()
                / n as f64;
        assert!((mean_power - 1.0).abs() < 0.01, "mean power {mean_power}");
    }

    #[test]
    fn nakagami_mean_is_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let p = params(3.0, 1.0);
        let n = 200_000;
        let mut acc = Complex::new(0.0, 0.0);
        for _ in 0..n {
            acc += nakagami_complex_sample(&p, &mut rng);
        }
        let mean = acc / n as f64;
        assert!(mean.norm() < 0.01, "mean {mean}");
    }

    #[test]
    fn nakagami_power_convention_and_shapes() {
        // E[|a|^2] = Omega within Monte-Carlo confidence for several shapes
        for (seed, shape) in [(1u64, 0.5f64), (2, 1.0), (3, 3.0), (4, 10.0)] {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let zeta = 0.7;
            let p = FadingParams::new(shape, zeta, PowerConvention::SpreadScaledByShape).unwrap();
            assert!((p.spread() - shape * zeta).abs() < 1e-15);
            let n = 400_000;
            let mean: f64 =
                (0..n).map(|_| nakagami_complex_sample(&p, &mut rng).norm_sqr()).sum::<f64>()
                    / n as f64;
            let rel = (mean - p.spread()).abs() / p.spread();
            assert!(rel < 0.02, "shape {shape}: rel err {rel}");
        }
    }

    #[test]
    fn rayleigh_special_case() {
        // m = 1: |a|^2 exponential; check the variance/mean ratio of the power
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let p = params(1.0, 2.0);
        let n = 500_000;
        let powers: Vec<f64> =
            (0..n).map(|_| nakagami_complex_sample(&p, &mut rng).norm_sqr()).collect();
        let mean = powers.iter().sum::<f64>() / n as f64;
        let var = powers.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.02);
        // exponential: var = mean^2
        assert!((var / (mean * mean) - 1.0).abs() < 0.02, "ratio {}", var / (mean * mean));
    }

    #[test]
    fn phase_is_uniform() {
        // chi-square over 36 bins at the 1% level (df = 35 -> 57.34)
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let p = params(3.0, 1.0);
        let n = 100_000;
        let bins = 36;
        let mut counts = vec![0usize; bins];
        for _ in 0..n {
            let phase = nakagami_complex_sample(&p, &mut rng).arg();
            let idx = (((phase + std::f64::consts::PI) / (2.0 * std::f64::consts::PI))
                * bins as f64)
                .floor() as usize;
            counts[idx.min(bins - 1)] += 1;
        }
        let expected = n as f64 / bins as f64;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 57.34, "chi2 {chi2}");
    }

    fn demo_stats(k: usize) -> ChannelStats<f64> {
        let geometry = LinkGeometry {
            d_direct: 10.0,
            d_forward: vec![6.0; k],
            d_back: vec![6.0; k],
            carrier_hz: 3.0e9,
            bandwidth_hz: 10.0e6,
            noise_figure_db: 20.0,
        };
        ChannelStats::from_geometry(
            &geometry,
            &FadingShapes::uniform(3.0),
            PowerConvention::SpreadScaledByShape,
        )
        .unwrap()
    }

    #[test]
    fn gen_channels_structure() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let stats = demo_stats(3);
        let ch = gen_channels(&stats, 0.6, 4, &mut rng).unwrap();
        assert_eq!(ch.num_antennas(), 4);
        assert_eq!(ch.num_tags(), 3);
        let sqrt_alpha = 0.6f64.sqrt();
        for row in 0..4 {
            assert_eq!(ch.stacked[(row, 0)], ch.direct[row]);
            for col in 0..3 {
                let prod = ch.forward[col] * ch.backscatter[(row, col)];
                assert!((ch.cascaded[(row, col)] - prod).norm() < 1e-12);
                let scaled = ch.cascaded[(row, col)] * sqrt_alpha;
                assert!((ch.stacked[(row, col + 1)] - scaled).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gen_channels_zero_tags() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let stats = demo_stats(0);
        let ch = gen_channels(&stats, 0.6, 4, &mut rng).unwrap();
        assert_eq!(ch.stacked.ncols(), 1);
        assert_eq!(ch.num_tags(), 0);
    }

    #[test]
    fn gen_channels_rejects_bad_alpha() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let stats = demo_stats(1);
        assert!(gen_channels(&stats, 0.0, 4, &mut rng).is_err());
        assert!(gen_channels(&stats, 1.0, 4, &mut rng).is_err());
    }

    #[test]
    fn beta_moment_identities() {
        // beta_0 = Omega_h for any shape; unit spreads give beta_k = 1
        for shape in [0.5, 1.0, 3.0, 7.5] {
            let p = FadingParams::new(shape, 0.37, PowerConvention::Conventional).unwrap();
            let stats = ChannelStats {
                direct: p,
                forward: vec![params(3.0, 1.0)],
                backscatter: vec![params(3.0, 1.0)],
            };
            let beta = beta_moments(&stats);
            assert!((beta.direct - p.spread()).abs() < 1e-15);
            assert!((beta.cascaded[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn beta_matches_empirical_second_moments() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let stats = demo_stats(2);
        let beta = beta_moments(&stats);
        let trials = 100_000;
        let m = 2;
        let mut acc_direct = 0.0;
        let mut acc_cascaded = vec![0.0; 2];
        for _ in 0..trials {
            let ch = gen_channels(&stats, 0.6, m, &mut rng).unwrap();
            acc_direct += ch.direct.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
            for k in 0..2 {
                acc_cascaded[k] +=
                    ch.cascaded.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
            }
        }
        let rel_direct = (acc_direct / trials as f64 - beta.direct).abs() / beta.direct;
        assert!(rel_direct < 0.02, "direct rel err {rel_direct}");
        for k in 0..2 {
            let rel =
                (acc_cascaded[k] / trials as f64 - beta.cascaded[k]).abs() / beta.cascaded[k];
            assert!(rel < 0.02, "cascaded {k} rel err {rel}");
        }
    }
}
