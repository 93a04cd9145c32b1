//! Monte-Carlo NMSE/BER sweeps, complexity and energy models, and output.

mod complexity;
mod report;

pub use complexity::{energy_saved, flops, EnergyBudget, FlopScheme};
pub use report::{csv_string, emit, git_describe, plot_series, read_csv, write_csv, Manifest, Series, CSV_HEADER};

use crate::error::{config_err, Error, Result};
use crate::linalg::{norm_sqr_arr, C64};
use crate::nn::ModelParams;
use crate::phy::{demap_qpsk, initial_feature, ref8_baseline};
use crate::pipeline::{infer_single_shot, infer_with, Mode, Payload, RxFrame, Simulator};
use crate::rng::{stream, Stream};
use ndarray::ArrayView1;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Sensing, LoS refinement and reconstruction.
    Proposed,
    /// Reconstruction from the front-end feature only.
    Ablation,
    /// Uncompressed superimposed feedback with iterative cancellation.
    Ref8,
    /// Reconstruction from the first-pass estimate, no data cancellation.
    SingleShot,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Ablation => "ablation",
            Scheme::Ref8 => "ref8",
            Scheme::SingleShot => "single-shot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_grid_db: Vec<f64>,
    pub rho_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    /// Frames are simulated until this many bit errors are seen...
    pub min_bit_errors: u64,
    /// ...and at least this many frames were run,
    pub min_frames: u64,
    /// unless this cap is reached first (the point is then flagged).
    pub max_frames: u64,
    pub seed: u64,
    /// Frames per parallel batch; stop rules are checked between batches.
    pub chunk: u64,
    /// Wall time is left at zero unless set, so outputs stay reproducible.
    pub record_wall_time: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_grid_db: vec![5.0, 10.0, 15.0, 20.0],
            rho_grid: vec![0.15],
            beta_grid: vec![0.7],
            schemes: vec![Scheme::Proposed, Scheme::Ablation, Scheme::Ref8],
            min_bit_errors: 1000,
            min_frames: 200,
            // about 2 million bits at M = 512
            max_frames: 1954,
            seed: 7,
            chunk: 64,
            record_wall_time: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() || self.rho_grid.is_empty() || self.beta_grid.is_empty() {
            return Err(config_err("sweep grids must be non-empty"));
        }
        if self.schemes.is_empty() {
            return Err(config_err("sweep.schemes must be non-empty"));
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return Err(config_err("sweep.snr_grid_db contains NaN"));
        }
        if self.rho_grid.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(config_err("sweep.rho_grid values must lie in (0, 1]"));
        }
        if self.beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(config_err("sweep.beta_grid values must lie in [0, 1]"));
        }
        if self.min_bit_errors == 0 {
            return Err(config_err("sweep.min_bit_errors must be >= 1"));
        }
        if self.max_frames == 0 || self.min_frames > self.max_frames {
            return Err(config_err("sweep needs 1 <= max_frames and min_frames <= max_frames"));
        }
        if self.chunk == 0 {
            return Err(config_err("sweep.chunk must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub rho: f64,
    pub beta: f64,
    /// Mean over frames of the per-frame normalized squared error.
    pub nmse: f64,
    pub ber: f64,
    pub frames: u64,
    pub bit_errors: u64,
    /// Fraction of frames whose sensed state matched the truth (proposed only).
    pub sensing_accuracy: Option<f64>,
    pub wall_seconds: f64,
}

impl MetricRecord {
    pub fn label(&self) -> String {
        format!("{}@snr={},rho={},beta={}", self.scheme.as_str(), self.snr_db, self.rho, self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<MetricRecord>,
    pub min_bit_errors: u64,
    pub sweep_seed: u64,
}

impl SweepResult {
    pub fn capped_records(&self) -> impl Iterator<Item = &MetricRecord> {
        self.records.iter().filter(|r| r.bit_errors < self.min_bit_errors)
    }

    pub fn find(&self, scheme: Scheme, snr_db: f64, rho: f64, beta: f64) -> Option<&MetricRecord> {
        self.records.iter().find(|r| r.scheme == scheme && r.snr_db == snr_db && r.rho == rho && r.beta == beta)
    }
}

/// `||h - h_est||^2 / ||h||^2`.
pub fn nmse(h_true: ArrayView1<C64>, h_est: ArrayView1<C64>) -> Result<f64> {
    if h_true.len() != h_est.len() {
        return Err(Error::Shape { what: "h_est".into(), expected: vec![h_true.len()], found: vec![h_est.len()] });
    }
    let den = norm_sqr_arr(&h_true.to_owned());
    if den == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let num: f64 = h_true.iter().zip(h_est.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FrameStats {
    nmse: f64,
    bit_errors: u64,
    sensed_correctly: Option<bool>,
}

fn bit_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

/// Simulates sweep frame `index` for one scheme and operating point. The
/// frame content depends only on the sweep seed, `index` and `beta`, so all
/// schemes, SNRs and `rho` values see the same channels, data and noise.
fn eval_frame(
    sim: &Simulator,
    params: &ModelParams,
    sweep_seed: u64,
    index: u64,
    scheme: Scheme,
    (snr_db, rho, beta): (f64, f64, f64),
) -> Result<FrameStats> {
    let mut rng = stream(sweep_seed, Stream::Sweep, index);
    let los = rng.random::<f64>() < beta;
    let draw = sim.draw(los, &mut rng);
    if scheme == Scheme::Ref8 {
        let frame = sim.transmit(&draw, snr_db, rho, Payload::Uncompressed)?;
        let (h_est, d_soft) =
            ref8_baseline(frame.y.view(), frame.g_hat.view(), &frame.link, sim.q8()?, sim.cfg.link.ref8_iters)?;
        let bits = demap_qpsk(d_soft.as_slice().expect("contiguous"));
        return Ok(FrameStats {
            nmse: nmse(frame.target.view(), h_est.view())?,
            bit_errors: bit_errors(&bits, &draw.bits),
            sensed_correctly: None,
        });
    }
    let frame = sim.transmit(&draw, snr_db, rho, Payload::Compressed)?;
    let rx = RxFrame::of(&frame, &sim.q);
    let feature = initial_feature(rx.y, rx.g_hat, rx.link, rx.q)?;
    let out = match scheme {
        Scheme::Proposed => infer_with(rx, params, Mode::Sensed, Some(&feature))?,
        Scheme::Ablation => infer_with(rx, params, Mode::Ablation, Some(&feature))?,
        Scheme::SingleShot => infer_single_shot(rx, params, &feature)?,
        Scheme::Ref8 => unreachable!("handled above"),
    };
    Ok(FrameStats {
        nmse: nmse(frame.target.view(), out.h_hat.view())?,
        bit_errors: bit_errors(&out.d_bits, &draw.bits),
        sensed_correctly: (scheme == Scheme::Proposed).then_some(out.chi == los),
    })
}

fn run_point(
    sim: &Simulator,
    params: &ModelParams,
    sweep: &SweepConfig,
    scheme: Scheme,
    point: (f64, f64, f64),
) -> Result<MetricRecord> {
    let clock = Instant::now();
    let bits_per_frame = 2 * sim.cfg.link.m as u64;
    let (mut frames, mut errors, mut nmse_sum, mut hits) = (0u64, 0u64, 0.0f64, 0u64);
    while frames < sweep.max_frames && (errors < sweep.min_bit_errors || frames < sweep.min_frames) {
        let take = sweep.chunk.min(sweep.max_frames - frames);
        let stats: Vec<FrameStats> = (frames..frames + take)
            .into_par_iter()
            .map(|k| eval_frame(sim, params, sweep.seed, k, scheme, point))
            .collect::<Result<_>>()?;
        for s in stats {
            nmse_sum += s.nmse;
            errors += s.bit_errors;
            hits += s.sensed_correctly.unwrap_or(false) as u64;
        }
        frames += take;
    }
    let (snr_db, rho, beta) = point;
    Ok(MetricRecord {
        scheme,
        snr_db,
        rho,
        beta,
        nmse: nmse_sum / frames as f64,
        ber: errors as f64 / (frames * bits_per_frame) as f64,
        frames,
        bit_errors: errors,
        sensing_accuracy: (scheme == Scheme::Proposed).then(|| hits as f64 / frames as f64),
        wall_seconds: if sweep.record_wall_time { clock.elapsed().as_secs_f64() } else { 0.0 },
    })
}

/// Runs every (rho, beta, SNR, scheme) point in that nesting order.
pub fn run_sweep(sim: &Simulator, params: &ModelParams, sweep: &SweepConfig) -> Result<SweepResult> {
    sweep.validate()?;
    if sweep.schemes.contains(&Scheme::Proposed) {
        params.sennet()?;
        params.aidnet()?;
    }
    if sweep.schemes.contains(&Scheme::Ref8) {
        sim.q8()?;
    }
    let mut records = Vec::new();
    for &rho in &sweep.rho_grid {
        for &beta in &sweep.beta_grid {
            for &snr in &sweep.snr_grid_db {
                for &scheme in &sweep.schemes {
                    records.push(run_point(sim, params, sweep, scheme, (snr, rho, beta))?);
                }
            }
        }
    }
    Ok(SweepResult { records, min_bit_errors: sweep.min_bit_errors, sweep_seed: sweep.seed })
}
