//! Shared fixture: one model trained at the default scale, cached on disk
//! under the cargo target temp directory keyed by configuration hash and seed.
#![allow(dead_code)]

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;
use uavfeed::bench::{MetricRecord, Scheme, SweepConfig};
use uavfeed::config::{ExperimentConfig, Role, Split};
use uavfeed::nn::ModelParams;
use uavfeed::pipeline::{train_all, Datasets, Simulator};

#[derive(Serialize, Deserialize)]
pub struct TrainRecord {
    pub sennet_train_seconds: f64,
    pub total_train_seconds: f64,
    pub datagen_seconds: f64,
}

pub struct Fixture {
    pub cfg: ExperimentConfig,
    pub sim: Simulator,
    pub params: ModelParams,
    pub record: TrainRecord,
}

pub fn desk_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

pub fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = desk_config();
        let dir = cfg.run_dir(&PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance"));
        std::fs::create_dir_all(&dir).unwrap();
        let (model, rec) = (dir.join("model.bin"), dir.join("train_record.json"));
        if let (Ok(params), Ok(text)) = (ModelParams::load(&model, Some(cfg.dims())), std::fs::read_to_string(&rec)) {
            let sim = Simulator::from_params(&cfg, &params).unwrap();
            return Fixture { cfg, sim, params, record: serde_json::from_str(&text).unwrap() };
        }
        let sim = Simulator::new(&cfg).unwrap();
        let clock = Instant::now();
        let data = Datasets::build(&sim, &Role::ALL, &[Split::Train, Split::Val]).unwrap();
        let datagen_seconds = clock.elapsed().as_secs_f64();
        let trained = train_all(&sim, &data).unwrap();
        let secs = |role: Role| trained.logs.iter().find(|(r, _)| *r == role).unwrap().1.last().unwrap().wall_seconds;
        let record = TrainRecord {
            sennet_train_seconds: secs(Role::Sennet),
            total_train_seconds: Role::ALL.iter().map(|&r| secs(r)).sum(),
            datagen_seconds,
        };
        trained.deployed.save(&model).unwrap();
        std::fs::write(&rec, serde_json::to_string_pretty(&record).unwrap()).unwrap();
        Fixture { cfg, sim, params: trained.deployed, record }
    })
}

pub fn sweep(snr: &[f64], rho: &[f64], beta: &[f64], schemes: &[Scheme], min_errors: u64, min_frames: u64) -> SweepConfig {
    SweepConfig {
        snr_grid_db: snr.to_vec(),
        rho_grid: rho.to_vec(),
        beta_grid: beta.to_vec(),
        schemes: schemes.to_vec(),
        min_bit_errors: min_errors,
        min_frames,
        max_frames: 200_000,
        ..SweepConfig::default()
    }
}

pub fn get<'a>(rs: &'a [MetricRecord], scheme: Scheme, snr: f64, rho: f64, beta: f64) -> &'a MetricRecord {
    rs.iter()
        .find(|r| r.scheme == scheme && r.snr_db == snr && r.rho == rho && r.beta == beta)
        .expect("record present")
}

pub fn print_records(rs: &[MetricRecord]) {
    for r in rs {
        eprintln!(
            "  {:<12} snr={:>4} rho={:<4} beta={:<4} nmse={:.4e} ber={:.4e} frames={} errors={}",
            r.scheme.as_str(),
            r.snr_db,
            r.rho,
            r.beta,
            r.nmse,
            r.ber,
            r.frames,
            r.bit_errors
        );
    }
}
