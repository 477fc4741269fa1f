//! Monte Carlo pulse-train engine and the photon-counting estimators.
//!
//! Per pulse: sample the source, route each delivered signal photon to the
//! translated channel with probability `|nu(L)|^2` (binomial routing is
//! exact for number-diagonal observables of the passive map; the
//! cross-check against the full mode map lives in the test suite), add
//! Poisson channel backgrounds, split each measured channel onto two
//! threshold detectors, and tally singles, doubles and triples against the
//! herald.
//!
//! Pulses are processed in fixed-size blocks, each drawing from its own
//! counter-indexed random stream, so the tallies are identical whether the
//! blocks run sequentially or in parallel and merge in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::DetectorSpec;
use crate::error::{Result, SimError};
use crate::sampling;
use crate::source::{emit_pulse, SourceSpec};

/// Pulses per random-stream block. Fixed so that a given (seed, run) pair
/// produces identical tallies under any scheduling.
const BLOCK_PULSES: u64 = 1 << 16;

/// Mean background photons per pulse reaching each measured channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mean_683: f64,
    pub mean_659: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            mean_683: 0.0,
            mean_659: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_683 < 0.0 || self.mean_659 < 0.0 {
            return Err(SimError::InvalidParameter(
                "noise means must be non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

/// The two measured channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    /// Untranslated input channel.
    C683,
    /// Translated output channel.
    C659,
}

/// Click tallies for one measured channel against the herald (detector C).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelTallies {
    pub singles_a: u64,
    pub singles_b: u64,
    /// Pulses where A or B clicked.
    pub channel_singles: u64,
    pub doubles_ac: u64,
    pub doubles_bc: u64,
    /// Pulses where (A or B) and C clicked.
    pub doubles_channel_c: u64,
    pub triples_abc: u64,
}

impl ChannelTallies {
    fn merge(&mut self, other: &ChannelTallies) {
        self.singles_a += other.singles_a;
        self.singles_b += other.singles_b;
        self.channel_singles += other.channel_singles;
        self.doubles_ac += other.doubles_ac;
        self.doubles_bc += other.doubles_bc;
        self.doubles_channel_c += other.doubles_channel_c;
        self.triples_abc += other.triples_abc;
    }
}

/// Full tally set for a pulse train.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PulseTrainResult {
    pub n_pulses: u64,
    /// Herald (C) singles.
    pub herald_singles: u64,
    pub c683: ChannelTallies,
    pub c659: ChannelTallies,
}

impl PulseTrainResult {
    pub fn channel(&self, ch: Channel) -> &ChannelTallies {
        match ch {
            Channel::C683 => &self.c683,
            Channel::C659 => &self.c659,
        }
    }

    /// Tallies form a merge monoid; estimators are computed after merging.
    pub fn merge(&self, other: &PulseTrainResult) -> PulseTrainResult {
        let mut out = *self;
        out.n_pulses += other.n_pulses;
        out.herald_singles += other.herald_singles;
        out.c683.merge(&other.c683);
        out.c659.merge(&other.c659);
        out
    }

    /// Structural count ordering that every run must satisfy.
    pub fn check_invariants(&self) -> Result<()> {
        for t in [&self.c683, &self.c659] {
            let ok = t.triples_abc <= t.doubles_ac.min(t.doubles_bc)
                && t.doubles_ac.max(t.doubles_bc) <= self.herald_singles
                && t.doubles_channel_c <= self.herald_singles
                && self.herald_singles <= self.n_pulses
                && t.singles_a.max(t.singles_b) <= t.channel_singles
                && t.channel_singles <= self.n_pulses;
            if !ok {
                return Err(SimError::InvalidParameter(
                    "tally ordering invariant violated".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Everything one pulse train needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub source: SourceSpec,
    /// Single-photon translation probability `|nu(L)|^2`.
    pub translation_efficiency: f64,
    pub detector_683: DetectorSpec,
    pub detector_659: DetectorSpec,
    pub noise: NoiseSpec,
    /// Splitting ratio toward detector A in each measured channel. The
    /// estimator of Eq-type `N_ABC N_C / (N_AC N_BC)` is split-independent
    /// in expectation; 0.5 matches the physical beamsplitters.
    pub split_683: f64,
    pub split_659: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.noise.validate()?;
        self.detector_683.validate()?;
        self.detector_659.validate()?;
        for (name, v) in [
            ("translation_efficiency", self.translation_efficiency),
            ("split_683", self.split_683),
            ("split_659", self.split_659),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::InvalidProbability { name, value: v });
            }
        }
        Ok(())
    }
}

fn detect_channel<R: Rng>(
    n_photons: u32,
    det: &DetectorSpec,
    split: f64,
    herald: bool,
    tallies: &mut ChannelTallies,
    rng: &mut R,
) {
    let n_a = sampling::binomial(n_photons, split, rng);
    let n_b = n_photons - n_a;
    let click_a = rng.gen::<f64>() < det.click_probability(n_a);
    let click_b = rng.gen::<f64>() < det.click_probability(n_b);
    tallies.singles_a += click_a as u64;
    tallies.singles_b += click_b as u64;
    tallies.channel_singles += (click_a || click_b) as u64;
    if herald {
        tallies.doubles_ac += click_a as u64;
        tallies.doubles_bc += click_b as u64;
        tallies.doubles_channel_c += (click_a || click_b) as u64;
        tallies.triples_abc += (click_a && click_b) as u64;
    }
}

fn run_block(cfg: &TrainConfig, pulses: u64, seed: u64, stream: u64) -> PulseTrainResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = PulseTrainResult {
        n_pulses: pulses,
        ..Default::default()
    };
    for _ in 0..pulses {
        let pulse = emit_pulse(&cfg.source, &mut rng);
        let translated = sampling::binomial(pulse.signal_n, cfg.translation_efficiency, &mut rng);
        let kept = pulse.signal_n - translated;
        let n683 = kept + sampling::poisson(cfg.noise.mean_683, &mut rng);
        let n659 = translated + sampling::poisson(cfg.noise.mean_659, &mut rng);
        out.herald_singles += pulse.herald_click as u64;
        detect_channel(
            n683,
            &cfg.detector_683,
            cfg.split_683,
            pulse.herald_click,
            &mut out.c683,
            &mut rng,
        );
        detect_channel(
            n659,
            &cfg.detector_659,
            cfg.split_659,
            pulse.herald_click,
            &mut out.c659,
            &mut rng,
        );
    }
    out
}

fn block_layout(n_pulses: u64) -> impl Iterator<Item = (u64, u64)> {
    let full = n_pulses / BLOCK_PULSES;
    let rem = n_pulses % BLOCK_PULSES;
    (0..full)
        .map(|i| (i, BLOCK_PULSES))
        .chain((rem > 0).then_some((full, rem)))
}

/// Runs a pulse train sequentially. Identical tallies to the parallel path.
pub fn run_pulse_train_seq(cfg: &TrainConfig, n_pulses: u64, seed: u64) -> Result<PulseTrainResult> {
    cfg.validate()?;
    let mut total = PulseTrainResult::default();
    for (block, pulses) in block_layout(n_pulses) {
        total = total.merge(&run_block(cfg, pulses, seed, block));
    }
    Ok(total)
}

/// Runs a pulse train, distributing blocks across the rayon pool when the
/// `parallel` feature is enabled.
pub fn run_pulse_train(cfg: &TrainConfig, n_pulses: u64, seed: u64) -> Result<PulseTrainResult> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cfg.validate()?;
        let blocks: Vec<(u64, u64)> = block_layout(n_pulses).collect();
        let total = blocks
            .par_iter()
            .map(|&(block, pulses)| run_block(cfg, pulses, seed, block))
            .reduce(PulseTrainResult::default, |a, b| a.merge(&b));
        Ok(total)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_pulse_train_seq(cfg, n_pulses, seed)
    }
}

/// Heralded second-order coherence from the raw tallies:
/// `g2 = N_ABC N_C / (N_AC N_BC)` for the chosen channel.
pub fn g2_from_counts(result: &PulseTrainResult, channel: Channel) -> Result<f64> {
    let t = result.channel(channel);
    if t.doubles_ac == 0 || t.doubles_bc == 0 {
        return Err(SimError::InsufficientStatistics(
            "zero herald-coincidence counts in a split arm",
        ));
    }
    Ok(t.triples_abc as f64 * result.herald_singles as f64
        / (t.doubles_ac as f64 * t.doubles_bc as f64))
}

/// Expected accidental coincidences for independent streams:
/// `N_i N_s / N_p`.
pub fn accidental_rate(n_i: u64, n_s: u64, n_p: u64) -> f64 {
    assert!(n_p > 0, "accidental rate needs at least one pulse");
    n_i as f64 * n_s as f64 / n_p as f64
}

/// Coincidence-to-accidental ratio of a channel against the herald.
pub fn car(result: &PulseTrainResult, channel: Channel) -> Result<f64> {
    let t = result.channel(channel);
    let acc = accidental_rate(result.herald_singles, t.channel_singles, result.n_pulses);
    if acc <= 0.0 {
        return Err(SimError::InsufficientStatistics(
            "zero accidental-coincidence expectation",
        ));
    }
    Ok(t.doubles_channel_c as f64 / acc)
}

/// Depletion efficiency of the untranslated channel:
/// `1 - (rate_on - noise) / rate_off`.
///
/// `noise_rate_683` is the background singles rate per pulse measured with
/// the source blocked and pumps on. The detector efficiency cancels between
/// the two runs, so the estimate does not compare detectors; the sweep test
/// pins that cancellation.
pub fn depletion_efficiency(
    on: &PulseTrainResult,
    off: &PulseTrainResult,
    noise_rate_683: f64,
) -> Result<f64> {
    if on.n_pulses == 0 || off.n_pulses == 0 {
        return Err(SimError::InsufficientStatistics("empty pulse train"));
    }
    let rate_on = on.c683.channel_singles as f64 / on.n_pulses as f64;
    let rate_off = off.c683.channel_singles as f64 / off.n_pulses as f64;
    if rate_off <= 0.0 {
        return Err(SimError::InsufficientStatistics(
            "zero pumps-off rate in the 683 channel",
        ));
    }
    Ok(1.0 - (rate_on - noise_rate_683) / rate_off)
}

/// Creation efficiency of the translated channel: the pumps-on excess in
/// the 659 channel, minus its pump-borne background, normalized to the
/// pumps-off 683 rate and corrected by the 659/683 detector-efficiency
/// ratio.
pub fn creation_efficiency(
    on: &PulseTrainResult,
    off: &PulseTrainResult,
    detector_ratio: f64,
    noise_rate_659: f64,
) -> Result<f64> {
    if on.n_pulses == 0 || off.n_pulses == 0 {
        return Err(SimError::InsufficientStatistics("empty pulse train"));
    }
    if !(detector_ratio > 0.0) {
        return Err(SimError::InvalidParameter(
            "detector efficiency ratio must be positive".to_string(),
        ));
    }
    let on_659 = on.c659.channel_singles as f64 / on.n_pulses as f64;
    let off_659 = off.c659.channel_singles as f64 / off.n_pulses as f64;
    let off_683 = off.c683.channel_singles as f64 / off.n_pulses as f64;
    if off_683 <= 0.0 {
        return Err(SimError::InsufficientStatistics(
            "zero pumps-off rate in the 683 channel",
        ));
    }
    Ok((on_659 - off_659 - noise_rate_659) / (off_683 * detector_ratio))
}

/// Mean and scatter of an estimator over repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Estimate {
    pub value: f64,
    /// Standard error of the mean over runs.
    pub std_error: f64,
    /// Sample standard deviation over runs (the run-to-run scatter itself;
    /// reported alongside the standard error since quoted error bars are
    /// sometimes one, sometimes the other).
    pub std_dev: f64,
    pub n_runs: usize,
}

impl G2Estimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(SimError::InsufficientStatistics("no runs"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        Ok(G2Estimate {
            value: mean,
            std_error: std_dev / n.sqrt(),
            std_dev,
            n_runs: samples.len(),
        })
    }
}

/// Per-run results for the repeated-run protocol. Run `r` draws from the
/// stream family `(r << 32) | block`, so runs are independent and the
/// whole family is reproducible from one seed.
pub fn run_series(
    cfg: &TrainConfig,
    n_runs: usize,
    pulses_per_run: u64,
    seed: u64,
) -> Result<Vec<PulseTrainResult>> {
    cfg.validate()?;
    let run_one = |r: usize| -> PulseTrainResult {
        let base = (r as u64) << 32;
        let mut total = PulseTrainResult::default();
        for (block, pulses) in block_layout(pulses_per_run) {
            total = total.merge(&run_block(cfg, pulses, seed, base | block));
        }
        total
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok((0..n_runs).into_par_iter().map(run_one).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..n_runs).map(run_one).collect())
    }
}

/// Per-pulse click streams, kept for shuffle controls.
#[derive(Debug, Clone)]
pub struct ClickStreams {
    pub herald: Vec<bool>,
    pub channel_683: Vec<bool>,
    pub channel_659: Vec<bool>,
}

/// Sequential train that records the per-pulse channel and herald clicks.
pub fn run_click_streams(cfg: &TrainConfig, n_pulses: u64, seed: u64) -> Result<ClickStreams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX); // distinct from tally streams
    let n = n_pulses as usize;
    let mut out = ClickStreams {
        herald: Vec::with_capacity(n),
        channel_683: Vec::with_capacity(n),
        channel_659: Vec::with_capacity(n),
    };
    let mut t683 = ChannelTallies::default();
    let mut t659 = ChannelTallies::default();
    for _ in 0..n {
        let pulse = emit_pulse(&cfg.source, &mut rng);
        let translated = sampling::binomial(pulse.signal_n, cfg.translation_efficiency, &mut rng);
        let kept = pulse.signal_n - translated;
        let n683 = kept + sampling::poisson(cfg.noise.mean_683, &mut rng);
        let n659 = translated + sampling::poisson(cfg.noise.mean_659, &mut rng);
        let before_683 = t683.channel_singles;
        detect_channel(
            n683,
            &cfg.detector_683,
            cfg.split_683,
            false,
            &mut t683,
            &mut rng,
        );
        let before_659 = t659.channel_singles;
        detect_channel(
            n659,
            &cfg.detector_659,
            cfg.split_659,
            false,
            &mut t659,
            &mut rng,
        );
        out.herald.push(pulse.herald_click);
        out.channel_683.push(t683.channel_singles > before_683);
        out.channel_659.push(t659.channel_singles > before_659);
    }
    Ok(out)
}

/// Coincidences and CAR after randomly permuting the herald stream against
/// the channel stream; decorrelated data must come out at CAR = 1.
pub fn shuffled_car(herald: &[bool], channel: &[bool], shuffle_seed: u64) -> Result<f64> {
    if herald.len() != channel.len() || herald.is_empty() {
        return Err(SimError::InsufficientStatistics(
            "click streams empty or mismatched",
        ));
    }
    let mut perm: Vec<u32> = (0..herald.len() as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    // Fisher-Yates
    for i in (1..perm.len()).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let n_i = herald.iter().filter(|&&h| h).count() as u64;
    let n_s = channel.iter().filter(|&&c| c).count() as u64;
    let mut coinc = 0u64;
    for (i, &c) in channel.iter().enumerate() {
        if c && herald[perm[i] as usize] {
            coinc += 1;
        }
    }
    let acc = accidental_rate(n_i, n_s, herald.len() as u64);
    if acc <= 0.0 {
        return Err(SimError::InsufficientStatistics(
            "zero accidental expectation after shuffle",
        ));
    }
    Ok(coinc as f64 / acc)
}
