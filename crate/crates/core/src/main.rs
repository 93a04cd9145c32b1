use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use uavfeed::bench::{emit, energy_saved, flops, nmse, run_sweep, FlopScheme};
use uavfeed::config::{ExperimentConfig, Role, Split};
use uavfeed::nn::{evaluate, ModelParams};
use uavfeed::pipeline::{infer, sensing_accuracy, train_all, write_train_logs, Datasets, Payload, RxFrame, Simulator};
use uavfeed::rng::{stream, Stream};
use uavfeed::Result;

#[derive(Parser)]
#[command(name = "uavfeed", version, about = "Sensing-assisted superimposed CSI feedback simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Parent of the per-experiment run directories.
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the train/val/test datasets of all three networks.
    GenData(RunArgs),
    /// Train the networks on previously generated datasets.
    Train(RunArgs),
    /// Run the receiver on one simulated frame and print a JSON report.
    Infer {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        frame: u64,
        #[arg(long, default_value_t = 10.0)]
        snr: f64,
        /// Force the channel state instead of drawing it.
        #[arg(long)]
        los: Option<bool>,
    },
    /// Run the NMSE/BER sweep of the configuration's `[sweep]` table.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        /// Model container (defaults to the run directory's model.bin).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Print per-frame receiver FLOPs of every scheme.
    Flops {
        #[arg(long = "N")]
        n: u64,
        #[arg(long = "M")]
        m: u64,
        #[arg(long = "La")]
        la: u64,
    },
    /// Print the uplink energy budget with and without superposition.
    Energy {
        #[arg(long = "N")]
        n: u64,
        #[arg(long = "M")]
        m: u64,
        #[arg(long = "Eu")]
        e_u: f64,
        #[arg(long = "Tsym")]
        t_sym: f64,
    },
}

fn load(run: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&run.config)?;
    let dir = cfg.run_dir(&run.runs);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    Ok((cfg, dir))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn gen_data(run: &RunArgs) -> Result<()> {
    let (cfg, dir) = load(run)?;
    let sim = Simulator::new(&cfg)?;
    let data_dir = dir.join("datasets");
    for role in Role::ALL {
        for split in Split::ALL {
            let d = sim.build_dataset(role, split)?;
            d.save(&data_dir)?;
            eprintln!("{}: {} samples, LoS fraction {:.3}", uavfeed::dataset::Dataset::file_name(role, split), d.len(), d.los_fraction());
        }
    }
    println!("{}", data_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    config_hash: String,
    seed: u64,
    best_epochs: Vec<(Role, usize)>,
    sennet_val_accuracy: f64,
    sennet_test_accuracy: f64,
    aidnet_test_mse: f64,
    recnet_test_mse: f64,
}

fn train_cmd(run: &RunArgs) -> Result<()> {
    let (cfg, dir) = load(run)?;
    let sim = Simulator::new(&cfg)?;
    let data = Datasets::load(&dir.join("datasets"), &Role::ALL, &Split::ALL)?;
    let trained = train_all(&sim, &data)?;
    trained.deployed.save(&dir.join("model.bin"))?;
    trained.last_epoch.save(&dir.join("model.final.bin"))?;
    write_train_logs(&dir, &trained.logs)?;
    let m = &trained.deployed;
    let st = data.get(Role::Sennet, Split::Test)?;
    let at = data.get(Role::Aidnet, Split::Test)?;
    let rt = data.get(Role::Recnet, Split::Test)?;
    let rx = uavfeed::pipeline::route_through_aidnet(m.aidnet()?, &rt.x, &rt.los);
    let summary = TrainSummary {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        best_epochs: trained.best_epochs.clone(),
        sennet_val_accuracy: trained.sennet_val_accuracy,
        sennet_test_accuracy: sensing_accuracy(m.sennet()?, st),
        aidnet_test_mse: evaluate(m.aidnet()?, at.x.view(), at.y.view()),
        recnet_test_mse: evaluate(&m.recnet, rx.view(), rt.y.view()),
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    print_json(&summary)
}

fn model_path(dir: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| dir.join("model.bin"))
}

#[derive(Serialize)]
struct InferReport {
    frame: u64,
    los: bool,
    chi: bool,
    branch: uavfeed::pipeline::Branch,
    nmse: f64,
    bit_errors: usize,
    bits: usize,
    timings: uavfeed::pipeline::StageTimings,
}

fn infer_cmd(run: &RunArgs, frame_idx: u64, snr: f64, los: Option<bool>) -> Result<()> {
    let (cfg, dir) = load(run)?;
    let params = ModelParams::load(&model_path(&dir, None), Some(cfg.dims()))?;
    let sim = Simulator::from_params(&cfg, &params)?;
    let mut rng = stream(cfg.sweep.seed, Stream::Sweep, frame_idx);
    let los = los.unwrap_or_else(|| rand::Rng::random::<f64>(&mut rng) < cfg.datasets.recnet.beta);
    let draw = sim.draw(los, &mut rng);
    let frame = sim.transmit(&draw, snr, cfg.link.rho, Payload::Compressed)?;
    let out = infer(RxFrame::of(&frame, &sim.q), &params)?;
    print_json(&InferReport {
        frame: frame_idx,
        los,
        chi: out.chi,
        branch: out.branch,
        nmse: nmse(frame.target.view(), out.h_hat.view())?,
        bit_errors: out.d_bits.iter().zip(&draw.bits).filter(|(a, b)| a != b).count(),
        bits: draw.bits.len(),
        timings: out.timings,
    })
}

fn sweep_cmd(run: &RunArgs, out: &Path, model: Option<PathBuf>) -> Result<()> {
    let (cfg, dir) = load(run)?;
    let params = ModelParams::load(&model_path(&dir, model), Some(cfg.dims()))?;
    let sim = Simulator::from_params(&cfg, &params)?;
    let result = run_sweep(&sim, &params, &cfg.sweep)?;
    emit(out, "sweep", &result, &cfg.hash(), cfg.seed)?;
    for r in &result.records {
        eprintln!("{:<12} snr={:>5} rho={:<5} beta={:<4} nmse={:.4e} ber={:.4e} frames={}", r.scheme.as_str(), r.snr_db, r.rho, r.beta, r.nmse, r.ber, r.frames);
    }
    Ok(())
}

#[derive(Serialize)]
struct FlopRow {
    scheme: FlopScheme,
    flops: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenData(r) => gen_data(&r),
        Cmd::Train(r) => train_cmd(&r),
        Cmd::Infer { run, frame, snr, los } => infer_cmd(&run, frame, snr, los),
        Cmd::Sweep { run, out, model } => sweep_cmd(&run, &out, model),
        Cmd::Flops { n, m, la } => {
            print_json(&FlopScheme::ALL.map(|scheme| FlopRow { scheme, flops: flops(scheme, n, m, la) }))
        }
        Cmd::Energy { n, m, e_u, t_sym } => print_json(&energy_saved(n, e_u, t_sym, m)),
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
