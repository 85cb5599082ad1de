//! Experiment harness: scenario configuration with presets for the standard
//! evaluation settings, a seeded parallel Monte-Carlo runner, and CSV /
//! manifest emission. Runs are fully reproducible: a (config, seed) pair
//! produces byte-identical CSV regardless of worker count.

use ndarray::Array1;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    ls_estimate, lmmse_stacked_estimate, mmse_estimate, multiuser_ls_estimate,
    scaled_ls_estimate, silent_estimate, EstimatorKind, SilentMethod,
};
use crate::fading::{
    beta_moments, gen_channels, noise_variance, BetaMoments, ChannelStats, FadingShapes,
    LinkGeometry, PowerConvention,
};
use crate::metrics::{aggregate, normalized_mse, trial_nmse, ChannelKind, MseRecord, CSV_HEADER};
use crate::pilots::{
    default_tau, dft_pilot, hadamard_pilot_with_tau, modified_zc_pilot, PilotDesign, PilotMatrix,
};
use crate::scalar::Real;
use crate::sysmodel::{
    multiuser_stacked, synth_multiuser_rx, synth_silent_rx, synth_timespread_rx, SourcePilot,
};
use crate::CVec;

/// Which training protocols to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    TimeSpread,
    Silent,
    Both,
}

/// Link distances and radio parameters; the forward distance is drawn
/// uniformly per tag from `d_forward_range` using the scenario seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub d_direct: f64,
    pub d_forward_range: (f64, f64),
    pub d_back: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

/// Multi-user extension parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MultiUserConfig {
    /// Number of users N.
    pub num_users: usize,
    /// Sub-slot length tau' (one orthogonal source symbol per user).
    pub sub_len: usize,
    /// Number of sub-slots Q (>= K+1).
    pub num_slots: usize,
    /// Exponent on the reflection factor in the per-user stacked channel
    /// (1.0 carries alpha on the cascaded columns, 0.5 carries sqrt(alpha)).
    #[serde(default = "default_alpha_exponent")]
    pub alpha_exponent: f64,
}

fn default_alpha_exponent() -> f64 {
    1.0
}

/// One pilot-design variant of a design sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DesignVariant {
    pub design: PilotDesign,
    pub tau: Option<usize>,
}

/// Full scenario description. All defaults follow the standard evaluation
/// setting: 3 GHz carrier, 10 MHz bandwidth, 20 dB noise figure, m = 3
/// Nakagami fading on every link, 10 m direct / U(5,7) m forward / 6 m
/// backscatter distances, M = 10 antennas, alpha = 0.6.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_tags: usize,
    #[serde(default = "default_antennas")]
    pub num_antennas: usize,
    #[serde(default = "default_design")]
    pub pilot_design: PilotDesign,
    /// Training length; `None` picks the smallest feasible value for the
    /// design.
    #[serde(default)]
    pub tau: Option<usize>,
    #[serde(default = "default_power_sweep")]
    pub power_sweep_dbm: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_shapes")]
    pub shapes: FadingShapes<f64>,
    #[serde(default = "default_geometry")]
    pub geometry: GeometryConfig,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[serde(default)]
    pub multiuser: Option<MultiUserConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Use the conventional normalization E[|a|^2] = zeta instead of the
    /// shape-scaled spread.
    #[serde(default)]
    pub conventional_power_normalization: bool,
    /// Sweep over tag counts (at most one sweep may be set).
    #[serde(default)]
    pub k_sweep: Option<Vec<usize>>,
    /// Sweep over training lengths.
    #[serde(default)]
    pub tau_sweep: Option<Vec<usize>>,
    /// Sweep over pilot designs.
    #[serde(default)]
    pub design_sweep: Option<Vec<DesignVariant>>,
}

fn default_antennas() -> usize {
    10
}

fn default_design() -> PilotDesign {
    PilotDesign::Hadamard
}

fn default_power_sweep() -> Vec<f64> {
    // 0 to 30 dBm in ten steps of 10/3 dB
    (0..10).map(|i| i as f64 * 10.0 / 3.0).collect()
}

fn default_alpha() -> f64 {
    0.6
}

fn default_shapes() -> FadingShapes<f64> {
    FadingShapes::uniform(3.0)
}

fn default_geometry() -> GeometryConfig {
    GeometryConfig {
        d_direct: 10.0,
        d_forward_range: (5.0, 7.0),
        d_back: 6.0,
        carrier_hz: 3.0e9,
        bandwidth_hz: 10.0e6,
        noise_figure_db: 20.0,
    }
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![
        EstimatorKind::Ls,
        EstimatorKind::ScaledLs,
        EstimatorKind::Mmse,
        EstimatorKind::Lmmse,
        EstimatorKind::SilentLs,
        EstimatorKind::SilentLmmse,
    ]
}

fn default_protocol() -> Protocol {
    Protocol::Both
}

fn default_trials() -> usize {
    10_000
}

fn default_seed() -> u64 {
    42
}

impl ScenarioConfig {
    /// Base configuration: one K, every estimator, standard defaults.
    pub fn with_defaults(num_tags: usize) -> Self {
        Self {
            num_tags,
            num_antennas: default_antennas(),
            pilot_design: default_design(),
            tau: None,
            power_sweep_dbm: default_power_sweep(),
            alpha: default_alpha(),
            shapes: default_shapes(),
            geometry: default_geometry(),
            estimators: default_estimators(),
            protocol: default_protocol(),
            multiuser: None,
            trials: default_trials(),
            seed: default_seed(),
            conventional_power_normalization: false,
            k_sweep: None,
            tau_sweep: None,
            design_sweep: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.num_antennas == 0 {
            return Err(Error::Config("need at least one antenna".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.power_sweep_dbm.is_empty() {
            return Err(Error::Config("power sweep must be non-empty".into()));
        }
        if self.power_sweep_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("power values must be finite".into()));
        }
        if self.estimators.is_empty() && self.multiuser.is_none() {
            return Err(Error::Config("no estimators selected".into()));
        }
        let sweeps = [
            self.k_sweep.is_some(),
            self.tau_sweep.is_some(),
            self.design_sweep.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if sweeps > 1 {
            return Err(Error::Config("at most one sweep (K, tau, design) may be set".into()));
        }
        let (lo, hi) = self.geometry.d_forward_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config("invalid forward-distance range".into()));
        }
        if let Some(mu) = &self.multiuser {
            if mu.num_users == 0 || mu.sub_len < mu.num_users {
                return Err(Error::Infeasible(format!(
                    "multi-user needs tau' >= N >= 1 (N = {}, tau' = {})",
                    mu.num_users, mu.sub_len
                )));
            }
            if mu.num_slots < self.num_tags + 1 {
                return Err(Error::Infeasible(format!(
                    "multi-user needs Q >= K+1 (Q = {}, K = {})",
                    mu.num_slots, self.num_tags
                )));
            }
        }
        // feasibility of every variant
        for v in self.variants()? {
            if v.tau < v.num_tags + 1 {
                return Err(Error::Infeasible(format!(
                    "tau = {} < K+1 = {} for design {}",
                    v.tau,
                    v.num_tags + 1,
                    v.design
                )));
            }
        }
        Ok(())
    }

    /// Expand the sweep (if any) into concrete (K, tau, design) variants.
    pub fn variants(&self) -> Result<Vec<Variant>> {
        let base_tau = |design: PilotDesign, k: usize, tau: Option<usize>| {
            tau.unwrap_or_else(|| default_tau(design, k))
        };
        if let Some(ks) = &self.k_sweep {
            if ks.is_empty() {
                return Err(Error::Config("empty K sweep".into()));
            }
            return Ok(ks
                .iter()
                .map(|&k| Variant {
                    num_tags: k,
                    tau: base_tau(self.pilot_design, k, self.tau),
                    design: self.pilot_design,
                })
                .collect());
        }
        if let Some(taus) = &self.tau_sweep {
            if taus.is_empty() {
                return Err(Error::Config("empty tau sweep".into()));
            }
            return Ok(taus
                .iter()
                .map(|&tau| Variant { num_tags: self.num_tags, tau, design: self.pilot_design })
                .collect());
        }
        if let Some(designs) = &self.design_sweep {
            if designs.is_empty() {
                return Err(Error::Config("empty design sweep".into()));
            }
            return Ok(designs
                .iter()
                .map(|d| Variant {
                    num_tags: self.num_tags,
                    tau: base_tau(d.design, self.num_tags, d.tau),
                    design: d.design,
                })
                .collect());
        }
        Ok(vec![Variant {
            num_tags: self.num_tags,
            tau: base_tau(self.pilot_design, self.num_tags, self.tau),
            design: self.pilot_design,
        }])
    }

    fn power_convention(&self) -> PowerConvention {
        if self.conventional_power_normalization {
            PowerConvention::Conventional
        } else {
            PowerConvention::SpreadScaledByShape
        }
    }
}

/// One concrete (K, tau, design) combination of a scenario.
#[derive(Debug, Clone, Copy)]
pub struct Variant {
    pub num_tags: usize,
    pub tau: usize,
    pub design: PilotDesign,
}

/// Named presets for the standard evaluation settings.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    match name {
        // tau = 8, K = 7: main NMSE-vs-power comparison
        "fig3" => Ok(ScenarioConfig::with_defaults(7)),
        // tau = 16, K in {7, 15}: tag-count independence
        "fig4" => {
            let mut c = ScenarioConfig::with_defaults(7);
            c.tau = Some(16);
            c.k_sweep = Some(vec![7, 15]);
            c.estimators = vec![EstimatorKind::Ls, EstimatorKind::Mmse];
            c.protocol = Protocol::TimeSpread;
            Ok(c)
        }
        // K = 31, tau in {32, 64}: training-length scaling
        "fig5" => {
            let mut c = ScenarioConfig::with_defaults(31);
            c.tau_sweep = Some(vec![32, 64]);
            c.estimators = vec![EstimatorKind::Ls, EstimatorKind::Mmse];
            c.protocol = Protocol::TimeSpread;
            Ok(c)
        }
        // tau = 64, p = 20 dBm, K sweep: performance-gap model
        "fig6" => {
            let mut c = ScenarioConfig::with_defaults(0);
            c.tau = Some(64);
            c.power_sweep_dbm = vec![20.0];
            c.k_sweep = Some(vec![0, 1, 3, 7, 15, 31, 63]);
            c.estimators = vec![EstimatorKind::Ls, EstimatorKind::SilentLs];
            Ok(c)
        }
        // K = 31: Hadamard tau = 32 vs modified ZC tau = 33
        "fig7" => {
            let mut c = ScenarioConfig::with_defaults(31);
            c.design_sweep = Some(vec![
                DesignVariant { design: PilotDesign::Hadamard, tau: Some(32) },
                DesignVariant { design: PilotDesign::ModifiedZc, tau: Some(33) },
            ]);
            c.estimators = vec![EstimatorKind::Ls, EstimatorKind::Mmse];
            c.protocol = Protocol::TimeSpread;
            Ok(c)
        }
        // tau = 16, K = 7, alpha = 0.8: reflection-coefficient sensitivity
        "fig8" => {
            let mut c = ScenarioConfig::with_defaults(7);
            c.tau = Some(16);
            c.alpha = 0.8;
            Ok(c)
        }
        // N = 2 users, K = 3, tau' = 2, Q = 4
        "multiuser-demo" => {
            let mut c = ScenarioConfig::with_defaults(3);
            c.tau = Some(4);
            c.estimators = vec![];
            c.protocol = Protocol::TimeSpread;
            c.multiuser = Some(MultiUserConfig {
                num_users: 2,
                sub_len: 2,
                num_slots: 4,
                alpha_exponent: 1.0,
            });
            Ok(c)
        }
        other => Err(Error::Config(format!("unknown preset '{other}'"))),
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 7] =
    ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "multiuser-demo"];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent per-trial seed from the master seed and the
/// (sweep-point, trial) coordinates via two splitmix64 mixing rounds.
pub fn derive_trial_seed(master: u64, power_index: u64, trial_index: u64) -> u64 {
    let a = splitmix64(master ^ splitmix64(power_index.wrapping_mul(0xA24B_AED4_963E_E407)));
    splitmix64(a ^ splitmix64(trial_index.wrapping_mul(0x9FB2_1C65_1E98_DF25)))
}

const GEOMETRY_STREAM: u64 = u64::MAX;

/// Run metadata written next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ScenarioConfig,
    pub seed_rule: String,
    pub version: String,
    pub created_unix: u64,
}

/// Pretty-printed JSON form of a run manifest.
pub fn manifest_json(manifest: &RunManifest) -> Result<String> {
    serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse(format!("manifest: {e}")))
}

/// Output of [`run_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub records: Vec<MseRecord>,
    pub csv: String,
    pub manifest: RunManifest,
}

/// Per-trial output: one (direct, cascaded) NMSE pair per estimator, in the
/// order of the scenario's estimator list.
type TrialNmse = Vec<(f64, Option<f64>)>;

struct VariantContext {
    variant: Variant,
    pilots: PilotMatrix<f64>,
    stats: ChannelStats<f64>,
    betas: BetaMoments<f64>,
}

fn build_pilots(design: PilotDesign, num_tags: usize, tau: usize) -> Result<PilotMatrix<f64>> {
    match design {
        PilotDesign::Hadamard => hadamard_pilot_with_tau(num_tags, tau),
        PilotDesign::ModifiedZc => modified_zc_pilot(num_tags, tau),
        PilotDesign::Dft => dft_pilot(num_tags, tau),
        PilotDesign::Custom => {
            Err(Error::Config("custom designs must be loaded from CSV".into()))
        }
    }
}

fn variant_context(config: &ScenarioConfig, variant: Variant) -> Result<VariantContext> {
    // Forward distances come from a dedicated seed stream; sweeping K keeps
    // the first tags' geometry stable because draws are prefix-nested.
    let mut geo_rng =
        ChaCha12Rng::seed_from_u64(derive_trial_seed(config.seed, GEOMETRY_STREAM, 0));
    let (lo, hi) = config.geometry.d_forward_range;
    let d_forward: Vec<f64> = (0..variant.num_tags)
        .map(|_| if hi > lo { f64::uniform_sample(&mut geo_rng, lo, hi) } else { lo })
        .collect();
    let geometry = LinkGeometry {
        d_direct: config.geometry.d_direct,
        d_forward,
        d_back: vec![config.geometry.d_back; variant.num_tags],
        carrier_hz: config.geometry.carrier_hz,
        bandwidth_hz: config.geometry.bandwidth_hz,
        noise_figure_db: config.geometry.noise_figure_db,
    };
    let stats = ChannelStats::from_geometry(&geometry, &config.shapes, config.power_convention())?;
    let betas = beta_moments(&stats);
    let pilots = build_pilots(variant.design, variant.num_tags, variant.tau)?;
    Ok(VariantContext { variant, pilots, stats, betas })
}

fn active_estimators(config: &ScenarioConfig) -> Vec<EstimatorKind> {
    config
        .estimators
        .iter()
        .copied()
        .filter(|e| match config.protocol {
            Protocol::Both => true,
            Protocol::TimeSpread => !e.is_silent(),
            Protocol::Silent => e.is_silent(),
        })
        .collect()
}

fn run_single_trial(
    ctx: &VariantContext,
    config: &ScenarioConfig,
    estimators: &[EstimatorKind],
    p_mw: f64,
    sigma2: f64,
    trial_seed: u64,
) -> Result<TrialNmse> {
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
    let channels =
        gen_channels(&ctx.stats, config.alpha, config.num_antennas, &mut rng)?;

    let needs_timespread = estimators.iter().any(|e| !e.is_silent());
    let needs_silent = estimators.iter().any(|e| e.is_silent());

    let rx = if needs_timespread {
        let source = SourcePilot::ones(ctx.variant.tau, p_mw)?;
        Some(synth_timespread_rx(&channels, &ctx.pilots, &source, sigma2, &mut rng)?)
    } else {
        None
    };
    let silent_rx = if needs_silent {
        Some(synth_silent_rx(&channels, ctx.variant.tau, p_mw, sigma2, &mut rng)?)
    } else {
        None
    };

    let mut ls_cache = None;
    let mut out = Vec::with_capacity(estimators.len());
    for kind in estimators {
        let estimate = match kind {
            EstimatorKind::Ls | EstimatorKind::ScaledLs => {
                let rx = rx.as_ref().expect("time-spread RX present");
                if ls_cache.is_none() {
                    ls_cache = Some(ls_estimate(&rx.source_projected, &ctx.pilots, p_mw)?);
                }
                let ls = ls_cache.as_ref().unwrap();
                if *kind == EstimatorKind::Ls {
                    ls.clone()
                } else {
                    scaled_ls_estimate(ls, &ctx.pilots, p_mw, sigma2)?
                }
            }
            EstimatorKind::Mmse => {
                let rx = rx.as_ref().expect("time-spread RX present");
                mmse_estimate(&rx.despread, &ctx.betas, p_mw, config.alpha, rx.despread_noise_var)?
            }
            EstimatorKind::Lmmse => {
                let rx = rx.as_ref().expect("time-spread RX present");
                lmmse_stacked_estimate(
                    &rx.despread,
                    &ctx.betas,
                    p_mw,
                    config.alpha,
                    rx.despread_noise_var,
                )?
            }
            EstimatorKind::SilentLs | EstimatorKind::SilentLmmse => {
                let srx = silent_rx.as_ref().expect("silent RX present");
                let method = if *kind == EstimatorKind::SilentLs {
                    SilentMethod::Ls
                } else {
                    SilentMethod::Lmmse
                };
                silent_estimate(srx, p_mw, &ctx.betas, config.alpha, method)?
            }
        };
        out.push(trial_nmse(&channels, &estimate)?);
    }
    Ok(out)
}

fn run_multiuser_trial(
    ctx: &VariantContext,
    config: &ScenarioConfig,
    mu: &MultiUserConfig,
    user_pilots: &[CVec<f64>],
    p_mw: f64,
    sigma2: f64,
    trial_seed: u64,
) -> Result<(f64, Option<f64>)> {
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
    let channel_sets: Vec<_> = (0..mu.num_users)
        .map(|_| gen_channels(&ctx.stats, config.alpha, config.num_antennas, &mut rng))
        .collect::<Result<_>>()?;
    let stacks: Vec<_> =
        channel_sets.iter().map(|ch| multiuser_stacked(ch, mu.alpha_exponent)).collect();
    let rx = synth_multiuser_rx(&stacks, user_pilots, &ctx.pilots, p_mw, sigma2, &mut rng)?;

    let k = ctx.variant.num_tags;
    let inv_alpha = Complex::new(config.alpha.powf(-mu.alpha_exponent), 0.0);
    let mut direct_acc = 0.0;
    let mut cascaded_acc = 0.0;
    for (n, ch) in channel_sets.iter().enumerate() {
        let est = multiuser_ls_estimate(&rx.projected[n], &ctx.pilots, p_mw, mu.sub_len)?;
        direct_acc += normalized_mse(&ch.direct, &est.stacked_est.column(0).to_owned())?;
        for col in 1..=k {
            let scaled = est.stacked_est.column(col).mapv(|z| z * inv_alpha);
            cascaded_acc += normalized_mse(&ch.cascaded.column(col - 1).to_owned(), &scaled)?;
        }
    }
    let n_users = mu.num_users as f64;
    let direct = direct_acc / n_users;
    let cascaded =
        if k == 0 { None } else { Some(cascaded_acc / (n_users * k as f64)) };
    Ok((direct, cascaded))
}

fn dft_user_pilots(num_users: usize, sub_len: usize) -> Vec<CVec<f64>> {
    let norm = (sub_len as f64).sqrt().recip();
    (0..num_users)
        .map(|u| {
            Array1::from_iter((0..sub_len).map(|j| {
                Complex::from_polar(
                    norm,
                    -2.0 * std::f64::consts::PI * ((u * j) % sub_len) as f64 / sub_len as f64,
                )
            }))
        })
        .collect()
}

fn push_records(
    records: &mut Vec<MseRecord>,
    per_trial: &[(f64, Option<f64>)],
    estimator: EstimatorKind,
    config: &ScenarioConfig,
    variant: Variant,
    power_dbm: f64,
    tau_report: usize,
) -> Result<()> {
    let direct: Vec<f64> = per_trial.iter().map(|(d, _)| *d).collect();
    let (nmse, stderr) = aggregate(&direct)?;
    records.push(MseRecord {
        estimator,
        channel_kind: ChannelKind::Direct,
        power_dbm,
        nmse,
        stderr,
        trials: per_trial.len(),
        tau: tau_report,
        num_tags: variant.num_tags,
        num_antennas: config.num_antennas,
        design: variant.design,
        seed: config.seed,
    });
    let cascaded: Vec<f64> = per_trial.iter().filter_map(|(_, c)| *c).collect();
    if !cascaded.is_empty() {
        let (nmse, stderr) = aggregate(&cascaded)?;
        records.push(MseRecord {
            estimator,
            channel_kind: ChannelKind::Cascaded,
            power_dbm,
            nmse,
            stderr,
            trials: cascaded.len(),
            tau: tau_report,
            num_tags: variant.num_tags,
            num_antennas: config.num_antennas,
            design: variant.design,
            seed: config.seed,
        });
    }
    Ok(())
}

/// Convert dBm to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Execute a scenario: for every sweep variant and power point, run the
/// trials in parallel (each on its own derived seed), aggregate NMSE per
/// estimator and channel kind, and render the CSV table.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    let noise = noise_variance(config.geometry.bandwidth_hz, config.geometry.noise_figure_db)?;
    let sigma2 = noise.linear_mw;
    let variants = config.variants()?;
    let estimators = active_estimators(config);
    if estimators.is_empty() && config.multiuser.is_none() {
        return Err(Error::Config("protocol selection leaves no estimators".into()));
    }
    let n_powers = config.power_sweep_dbm.len();

    let mut records = Vec::new();
    for (v_idx, &variant) in variants.iter().enumerate() {
        let ctx = variant_context(config, variant)?;
        let user_pilots = config
            .multiuser
            .as_ref()
            .map(|mu| dft_user_pilots(mu.num_users, mu.sub_len));
        for (p_idx, &power_dbm) in config.power_sweep_dbm.iter().enumerate() {
            let p_mw = dbm_to_mw(power_dbm);
            let combo = (v_idx * n_powers + p_idx) as u64;

            if !estimators.is_empty() {
                let per_trial: Vec<TrialNmse> = (0..config.trials)
                    .into_par_iter()
                    .map(|t| {
                        run_single_trial(
                            &ctx,
                            config,
                            &estimators,
                            p_mw,
                            sigma2,
                            derive_trial_seed(config.seed, combo, t as u64),
                        )
                    })
                    .collect::<Result<_>>()?;
                for (e_idx, &kind) in estimators.iter().enumerate() {
                    let series: Vec<(f64, Option<f64>)> =
                        per_trial.iter().map(|t| t[e_idx]).collect();
                    push_records(
                        &mut records,
                        &series,
                        kind,
                        config,
                        variant,
                        power_dbm,
                        variant.tau,
                    )?;
                }
            }

            if let (Some(mu), Some(users)) = (&config.multiuser, &user_pilots) {
                let per_trial: Vec<(f64, Option<f64>)> = (0..config.trials)
                    .into_par_iter()
                    .map(|t| {
                        run_multiuser_trial(
                            &ctx,
                            config,
                            mu,
                            users,
                            p_mw,
                            sigma2,
                            derive_trial_seed(config.seed, combo, t as u64),
                        )
                    })
                    .collect::<Result<_>>()?;
                // total training duration tau' * Q
                push_records(
                    &mut records,
                    &per_trial,
                    EstimatorKind::Ls,
                    config,
                    variant,
                    power_dbm,
                    mu.sub_len * mu.num_slots,
                )?;
            }
        }
    }

    let mut csv = String::with_capacity(64 * (records.len() + 1));
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for r in &records {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
    }
    let manifest = RunManifest {
        config: config.clone(),
        seed_rule: "trial_seed = splitmix64(splitmix64(master ^ mix(variant*P+power)) ^ mix(trial))"
            .into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    Ok(ScenarioResult { records, csv, manifest })
}
