//! Wireless delay and emulator-accuracy model for one decision step.
//!
//! Every function here is pure. Delays are in seconds, sizes in bits,
//! bandwidths in Hz and powers in watts. The only composition point is
//! [`step_system`], which turns a joint placement/retention decision into
//! per-UE delays, perplexities and the global reward.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// How task complexity scales the emulator perplexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityScaling {
    /// `(c + iota) / c`: perplexity inflates for easy tasks, tends to 1 for hard ones.
    Perplexity,
    /// `iota / (c + iota)`: the accuracy-style factor that shrinks as complexity grows.
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub num_ues: usize,
    pub tasks_per_ue: usize,
    pub foundation_model_bits: f64,
    pub uplink_bandwidth_total: f64,
    pub downlink_bandwidth_total: f64,
    pub downlink_power_total: f64,
    pub noise_psd: f64,
    pub path_loss_exponent: f64,
    pub retention_min: f64,
    pub retention_max: f64,
    pub complexity_weight: f64,
    pub complexity_range: (f64, f64),
    pub complexity_scaling: ComplexityScaling,
    pub accuracy_poly: (f64, f64, f64),
    pub reward_weight_perplexity: f64,
    pub reward_weight_delay: f64,
    pub data_size_range_bits: (f64, f64),
    pub uplink_power_range: (f64, f64),
    pub ue_distance_range: (f64, f64),
    pub fading_samples_per_task: usize,
    pub retention_match_tolerance: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_ues: 8,
            tasks_per_ue: 50,
            // 10.8 GB
            foundation_model_bits: 8.64e10,
            uplink_bandwidth_total: 1e5,
            downlink_bandwidth_total: 1e6,
            downlink_power_total: 60.0,
            noise_psd: 4e-21,
            path_loss_exponent: 2.0,
            retention_min: 0.2,
            retention_max: 0.8,
            complexity_weight: 10.0,
            complexity_range: (1.0, 10.0),
            complexity_scaling: ComplexityScaling::Perplexity,
            accuracy_poly: (25.2, -43.1, 31.9),
            reward_weight_perplexity: -0.1,
            reward_weight_delay: -0.001,
            // 300 to 500 MB
            data_size_range_bits: (2.4e9, 4.0e9),
            uplink_power_range: (0.2, 1.0),
            ue_distance_range: (100.0, 500.0),
            fading_samples_per_task: 100,
            retention_match_tolerance: 0.01,
        }
    }
}

fn positive_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")))
    }
}

impl SystemConfig {
    pub fn with_ues(num_ues: usize) -> Self {
        Self { num_ues, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ues == 0 {
            return Err(Error::Config("num_ues must be positive".into()));
        }
        if self.tasks_per_ue == 0 {
            return Err(Error::Config("tasks_per_ue must be positive".into()));
        }
        if self.fading_samples_per_task == 0 {
            return Err(Error::Config("fading_samples_per_task must be positive".into()));
        }
        for (name, v) in [
            ("foundation_model_bits", self.foundation_model_bits),
            ("uplink_bandwidth_total", self.uplink_bandwidth_total),
            ("downlink_bandwidth_total", self.downlink_bandwidth_total),
            ("downlink_power_total", self.downlink_power_total),
            ("noise_psd", self.noise_psd),
            ("path_loss_exponent", self.path_loss_exponent),
            ("complexity_weight", self.complexity_weight),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if !(self.retention_min > 0.0 && self.retention_min < self.retention_max && self.retention_max <= 1.0) {
            return Err(Error::Config(format!(
                "retention bounds must satisfy 0 < min < max <= 1, got ({}, {})",
                self.retention_min, self.retention_max
            )));
        }
        if !(self.reward_weight_perplexity < 0.0) {
            return Err(Error::Config("reward_weight_perplexity must be negative".into()));
        }
        if !(self.reward_weight_delay < 0.0) {
            return Err(Error::Config("reward_weight_delay must be negative".into()));
        }
        if !(self.retention_match_tolerance >= 0.0) {
            return Err(Error::Config("retention_match_tolerance must be nonnegative".into()));
        }
        positive_range("complexity_range", self.complexity_range)?;
        positive_range("data_size_range_bits", self.data_size_range_bits)?;
        positive_range("uplink_power_range", self.uplink_power_range)?;
        positive_range("ue_distance_range", self.ue_distance_range)?;
        Ok(())
    }
}

/// One UE's current task: what it has to tune on and how well it can transmit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskDraw {
    pub complexity: f64,
    pub data_size_bits: f64,
    pub avg_channel_gain: f64,
    pub uplink_power: f64,
}

/// Placement bits (1 = server, 0 = local) and proposed retentions for every UE.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDecision {
    pub placement: Vec<u8>,
    pub retention: Vec<f64>,
}

impl JointDecision {
    pub fn new(placement: Vec<u8>, retention: Vec<f64>) -> Self {
        Self { placement, retention }
    }

    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        check_len("decision placement", config.num_ues, self.placement.len())?;
        check_len("decision retention", config.num_ues, self.retention.len())?;
        if let Some(bad) = self.placement.iter().find(|&&z| z > 1) {
            return Err(Error::InvalidArgument(format!("placement bit {bad} not in {{0,1}}")));
        }
        for &e in &self.retention {
            if !(e >= config.retention_min && e <= config.retention_max) {
                return Err(Error::InvalidArgument(format!(
                    "retention {e} outside [{}, {}]",
                    config.retention_min, config.retention_max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub per_ue_delay_s: Vec<f64>,
    pub upload_delay_s: Vec<f64>,
    pub download_delay_s: Vec<f64>,
    pub system_delay_s: f64,
    pub per_ue_perplexity: Vec<f64>,
    pub switch_indicators: Vec<u8>,
    /// Retention actually in use after snapping near-matches to the cache.
    pub effective_retention: Vec<f64>,
    /// FDMA share handed to each UE; zero for UEs not using that link.
    pub uplink_bandwidth_hz: Vec<f64>,
    pub downlink_bandwidth_hz: Vec<f64>,
    pub downlink_power_w: Vec<f64>,
    pub reward: f64,
}

impl StepOutcome {
    pub fn mean_perplexity(&self) -> f64 {
        self.per_ue_perplexity.iter().sum::<f64>() / self.per_ue_perplexity.len() as f64
    }

    pub fn switch_count(&self) -> usize {
        self.switch_indicators.iter().filter(|&&i| i == 1).count()
    }
}

/// Average channel gain over one task: path loss times the mean of
/// `num_samples` unit-mean exponential (Rayleigh power) fading draws.
pub fn draw_channel_gain<R: Rng + ?Sized>(
    distance_m: f64,
    exponent: f64,
    num_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {distance_m}")));
    }
    if num_samples == 0 {
        return Err(Error::InvalidArgument("need at least one fading sample".into()));
    }
    let fading: f64 = (0..num_samples).map(|_| rng.sample::<f64, _>(Exp1)).sum::<f64>() / num_samples as f64;
    Ok(distance_m.powf(-exponent) * fading)
}

pub fn uplink_bandwidth(total_hz: f64, server_count: usize) -> Result<f64> {
    if server_count == 0 {
        return Err(Error::Contract("uplink share requested with no uploading UE".into()));
    }
    Ok(total_hz / server_count as f64)
}

/// Shannon rate `W log2(1 + p h / (sigma^2 W))`. Also used for the downlink.
pub fn uplink_rate(bandwidth_hz: f64, power_w: f64, gain: f64, noise_psd: f64) -> Result<f64> {
    for (name, v) in [("bandwidth", bandwidth_hz), ("power", power_w), ("gain", gain), ("noise_psd", noise_psd)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    let snr = power_w * gain / (noise_psd * bandwidth_hz);
    Ok(bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2)
}

pub fn upload_delay(data_bits: f64, rate_bps: f64, placement_bit: u8) -> Result<f64> {
    if !(rate_bps > 0.0) {
        return Err(Error::InvalidArgument(format!("upload rate must be positive, got {rate_bps}")));
    }
    Ok(data_bits / rate_bps * f64::from(placement_bit))
}

/// 0 when a cached emulator is within `tolerance` of the proposal, 1 otherwise
/// (including the cold-start case of an empty cache).
pub fn switch_indicator(cached: Option<f64>, proposed: f64, tolerance: f64) -> u8 {
    match cached {
        Some(c) if (c - proposed).abs() <= tolerance => 0,
        _ => 1,
    }
}

/// Equal split of downlink bandwidth and power among downloading UEs.
pub fn downlink_shares(total_bw_hz: f64, total_power_w: f64, downloader_count: usize) -> Result<(f64, f64)> {
    if downloader_count == 0 {
        return Err(Error::Contract("downlink share requested with no downloading UE".into()));
    }
    let k = downloader_count as f64;
    Ok((total_bw_hz / k, total_power_w / k))
}

pub fn download_delay(
    retention: f64,
    foundation_bits: f64,
    downlink_rate_bps: f64,
    indicator: u8,
    placement_bit: u8,
) -> Result<f64> {
    if !(downlink_rate_bps > 0.0) {
        return Err(Error::InvalidArgument(format!("download rate must be positive, got {downlink_rate_bps}")));
    }
    Ok(retention * foundation_bits / downlink_rate_bps * f64::from(indicator) * f64::from(1 - placement_bit.min(1)))
}

pub fn user_delay(upload_s: f64, download_s: f64, placement_bit: u8, indicator: u8) -> f64 {
    let z = f64::from(placement_bit);
    upload_s * z + download_s * f64::from(indicator) * (1.0 - z)
}

/// Fitted perplexity of an emulator keeping a fraction `retention` of the layers.
pub fn emulator_accuracy(retention: f64, coeffs: (f64, f64, f64)) -> Result<f64> {
    if !(retention > 0.0 && retention <= 1.0) {
        return Err(Error::InvalidArgument(format!("retention {retention} outside (0, 1]")));
    }
    let (a, b, c0) = coeffs;
    Ok(a * retention * retention + b * retention + c0)
}

pub fn complexity_factor(complexity: f64, iota: f64, scaling: ComplexityScaling) -> Result<f64> {
    if !(complexity > 0.0) {
        return Err(Error::InvalidArgument(format!("complexity must be positive, got {complexity}")));
    }
    if !(iota > 0.0) {
        return Err(Error::InvalidArgument(format!("complexity weight must be positive, got {iota}")));
    }
    Ok(match scaling {
        ComplexityScaling::Perplexity => (complexity + iota) / complexity,
        ComplexityScaling::Accuracy => iota / (complexity + iota),
    })
}

/// Perplexity of one task: the server tunes the full model, a local UE its emulator.
pub fn task_perplexity(
    retention: f64,
    placement_bit: u8,
    complexity: f64,
    iota: f64,
    coeffs: (f64, f64, f64),
) -> Result<f64> {
    task_perplexity_scaled(retention, placement_bit, complexity, iota, coeffs, ComplexityScaling::Perplexity)
}

pub fn task_perplexity_scaled(
    retention: f64,
    placement_bit: u8,
    complexity: f64,
    iota: f64,
    coeffs: (f64, f64, f64),
    scaling: ComplexityScaling,
) -> Result<f64> {
    let factor = complexity_factor(complexity, iota, scaling)?;
    let e = if placement_bit == 1 { 1.0 } else { retention };
    Ok(emulator_accuracy(e, coeffs)? * factor)
}

pub fn global_reward(config: &SystemConfig, mean_perplexity: f64, system_delay_s: f64) -> f64 {
    config.reward_weight_perplexity * mean_perplexity + config.reward_weight_delay * system_delay_s
}

/// Runs one decision step for the whole fleet and returns the outcome
/// together with the post-step emulator caches.
pub fn step_system(
    config: &SystemConfig,
    caches: &[Option<f64>],
    tasks: &[TaskDraw],
    decision: &JointDecision,
) -> Result<(StepOutcome, Vec<Option<f64>>)> {
    let n = config.num_ues;
    check_len("caches", n, caches.len())?;
    check_len("tasks", n, tasks.len())?;
    decision.validate(config)?;

    let mut indicators = vec![0u8; n];
    let mut effective = decision.retention.clone();
    for i in 0..n {
        if decision.placement[i] == 0 {
            indicators[i] = switch_indicator(caches[i], decision.retention[i], config.retention_match_tolerance);
            if indicators[i] == 0 {
                // reuse: snap to the cached emulator
                effective[i] = caches[i].expect("reuse implies a cached emulator");
            }
        }
    }

    let uploaders = decision.placement.iter().filter(|&&z| z == 1).count();
    let downloaders = (0..n).filter(|&i| decision.placement[i] == 0 && indicators[i] == 1).count();

    let up_bw = if uploaders > 0 { uplink_bandwidth(config.uplink_bandwidth_total, uploaders)? } else { 0.0 };
    let (down_bw, down_pw) = if downloaders > 0 {
        downlink_shares(config.downlink_bandwidth_total, config.downlink_power_total, downloaders)?
    } else {
        (0.0, 0.0)
    };

    let mut out = StepOutcome {
        per_ue_delay_s: vec![0.0; n],
        upload_delay_s: vec![0.0; n],
        download_delay_s: vec![0.0; n],
        system_delay_s: 0.0,
        per_ue_perplexity: vec![0.0; n],
        switch_indicators: indicators.clone(),
        effective_retention: effective.clone(),
        uplink_bandwidth_hz: vec![0.0; n],
        downlink_bandwidth_hz: vec![0.0; n],
        downlink_power_w: vec![0.0; n],
        reward: 0.0,
    };
    let mut next_caches = caches.to_vec();

    for i in 0..n {
        let task = &tasks[i];
        let z = decision.placement[i];
        let ind = indicators[i];
        if z == 1 {
            let rate = uplink_rate(up_bw, task.uplink_power, task.avg_channel_gain, config.noise_psd)?;
            out.upload_delay_s[i] = upload_delay(task.data_size_bits, rate, z)?;
            out.uplink_bandwidth_hz[i] = up_bw;
        } else if ind == 1 {
            let rate = uplink_rate(down_bw, down_pw, task.avg_channel_gain, config.noise_psd)?;
            out.download_delay_s[i] = download_delay(effective[i], config.foundation_model_bits, rate, ind, z)?;
            out.downlink_bandwidth_hz[i] = down_bw;
            out.downlink_power_w[i] = down_pw;
            next_caches[i] = Some(effective[i]);
        }
        out.per_ue_delay_s[i] = user_delay(out.upload_delay_s[i], out.download_delay_s[i], z, ind);
        out.per_ue_perplexity[i] = task_perplexity_scaled(
            effective[i],
            z,
            task.complexity,
            config.complexity_weight,
            config.accuracy_poly,
            config.complexity_scaling,
        )?;
    }

    out.system_delay_s = out.per_ue_delay_s.iter().copied().fold(0.0, f64::max);
    out.reward = global_reward(config, out.mean_perplexity(), out.system_delay_s);
    Ok((out, next_caches))
}
