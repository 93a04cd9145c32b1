//! End-to-end acceptance checks, one test per criterion.
//!
//! Criteria 5 to 9 share one model trained at the default (desk) scale; only
//! the first run pays for dataset generation and training.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::SeedableRng;
use std::time::Instant;
use uavfeed::bench::{csv_string, energy_saved, flops, run_sweep, FlopScheme, MetricRecord, Scheme, SweepConfig};
use uavfeed::channel::ChannelConfig;
use uavfeed::config::{DatasetSpec, ExperimentConfig, LinkConfig, Role, Split};
use uavfeed::linalg::C64;
use uavfeed::nn::{Mlp, SenNet, Trainable};
use uavfeed::phy::{
    cancel_csi, cancel_data, compress, demap_qpsk, despread, detect_data, initial_feature, modulate_qpsk,
    reestimate_csi, spread, superimpose, LinkParams, SpreadingMatrix,
};
use uavfeed::pipeline::{sensing_accuracy, train_all, Datasets, Payload, Simulator};
use uavfeed::rng::{cn, SimRng};

mod common;

use common::{desk_config, fixture, get, print_records, sweep};

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_flop_formulas() {
    assert_eq!(flops(FlopScheme::Ref8, 64, 512, 5), 63_234_432.0);
    assert_eq!(flops(FlopScheme::Ref9, 64, 512, 5), 14_286_848.0);
    let proposed = flops(FlopScheme::Proposed, 64, 512, 5);
    assert!((proposed - 6_634_507.0).abs() <= 10.0, "proposed = {proposed}");
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_2_energy_model() {
    let e = energy_saved(64, 1.0, 1.0, 512);
    assert_eq!(e.saved, 64.0);
    assert_eq!(e.saved / e.non_superimposed, 1.0 / 9.0);
    let e = energy_saved(64, 0.25, 2.0e-6, 512);
    assert_eq!(e.saved, 64.0 * 0.25 * 2.0e-6);
    assert_eq!(e.saved / e.non_superimposed, 1.0 / 9.0);
}

// ---------------------------------------------------------------- 3

fn rand_vec(rng: &mut SimRng, n: usize) -> Array1<C64> {
    (0..n).map(|_| cn(rng, 1.0)).collect()
}

fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[test]
fn criterion_3_algebraic_oracles() {
    let mut runner = TestRunner::new(PtConfig { cases: 48, failure_persistence: None, ..PtConfig::default() });

    // Q^T Q = M I for every Walsh family, and despreading inverts spreading.
    runner
        .run(&(1u32..=10, any::<u64>()), |(log_m, seed)| {
            let m = 1usize << log_m;
            let mut rng = SimRng::seed_from_u64(seed);
            let n = 1 + (seed as usize % m);
            let q = SpreadingMatrix::walsh(m, n).unwrap();
            let g = q.gram();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(g[i * n + j], if i == j { m as i64 } else { 0 });
                }
            }
            let z = rand_vec(&mut rng, n);
            let s = spread(z.view(), &q);
            let y = Array2::from_shape_fn((1, m), |(_, k)| s[k]);
            let v = despread(y.view(), &q);
            for k in 0..n {
                prop_assert!((v[[0, k]] * (n as f64).sqrt() - z[k]).norm() <= 1e-12 * (1.0 + z[k].norm()));
            }
            Ok(())
        })
        .unwrap();

    // Cancelling the exact CSI or the exact data leaves exactly the other term.
    runner
        .run(&(any::<u64>(), 0.01f64..0.99), |(seed, rho)| {
            let mut rng = SimRng::seed_from_u64(seed);
            let (n, m, nr) = (16, 128, 8);
            let q = SpreadingMatrix::walsh(m, n).unwrap();
            let link = LinkParams::new(rho, 1.0, 0.0, Default::default()).unwrap();
            let z = rand_vec(&mut rng, n);
            let g = rand_vec(&mut rng, nr);
            let bits: Vec<u8> = (0..2 * m).map(|k| ((seed >> (k % 64)) & 1) as u8 ^ (k % 3 == 0) as u8).collect();
            let d = modulate_qpsk(&bits).unwrap();
            let csi_part = superimpose(spread(z.view(), &q).view(), Array1::zeros(m).view(), rho, 1.0).unwrap();
            let data_part = superimpose(Array1::zeros(m).view(), d.view(), rho, 1.0).unwrap();
            let outer = |x: &Array1<C64>| Array2::from_shape_fn((nr, m), |(r, k)| g[r] * x[k]);
            let y = &outer(&csi_part) + &outer(&data_part);
            let r_data = cancel_csi(y.view(), g.view(), z.view(), &link, &q);
            let r_csi = cancel_data(y.view(), g.view(), d.view(), &link);
            let scale = max_abs(&y);
            prop_assert!(max_abs(&(&r_data - &outer(&data_part))) <= 1e-12 * scale);
            prop_assert!(max_abs(&(&r_csi - &outer(&csi_part))) <= 1e-12 * scale);
            Ok(())
        })
        .unwrap();

    // Noise-free end to end at desk dimensions with the true link vector:
    // cancelling the true CSI gives error-free data, cancelling the true data
    // recovers z to 1e-9, and the receiver chain does the same whenever its
    // first-pass decisions are error-free.
    let cfg = ExperimentConfig { link: LinkConfig { perfect_g: true, ..LinkConfig::default() }, ..desk_config() };
    let sim = Simulator::new(&cfg).unwrap();
    let mut runner = TestRunner::new(PtConfig { cases: 24, failure_persistence: None, ..PtConfig::default() });
    let clean_first_pass = std::sync::atomic::AtomicUsize::new(0);
    runner
        .run(&(any::<u64>(), any::<bool>(), 0.05f64..0.5), |(seed, los, rho)| {
            let draw = sim.draw(los, &mut SimRng::seed_from_u64(seed));
            let f = sim.transmit(&draw, f64::INFINITY, rho, Payload::Compressed).unwrap();
            let (y, g) = (f.y.view(), f.g_hat.view());
            let zmax = |a: &Array1<C64>| (a - &f.code).iter().map(|c| c.norm()).fold(0.0, f64::max);

            let d = detect_data(y, g, f.code.view(), &f.link, &sim.q).unwrap();
            prop_assert_eq!(demap_qpsk(d.as_slice().unwrap()), draw.bits.clone());
            let z = reestimate_csi(y, g, f.d.view(), &f.link, &sim.q).unwrap();
            prop_assert!(zmax(&z) <= 1e-9, "z recovery error {}", zmax(&z));

            let feat = initial_feature(y, g, &f.link, &sim.q).unwrap();
            if demap_qpsk(feat.d_init.as_slice().unwrap()) == draw.bits {
                clean_first_pass.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                prop_assert!(zmax(&feat.z_hat) <= 1e-9, "z recovery error {}", zmax(&feat.z_hat));
                let d = detect_data(y, g, feat.z_hat.view(), &f.link, &sim.q).unwrap();
                prop_assert_eq!(demap_qpsk(d.as_slice().unwrap()), draw.bits.clone());
            }
            let (z, z_norm) = compress(draw.g2u.h.view(), &sim.phi).unwrap();
            prop_assert!((&z.mapv(|c| c * z_norm) - &draw.g2u.h.dot(&sim.phi.phi)).iter().all(|c| c.norm() <= 1e-9));
            Ok(())
        })
        .unwrap();
    assert!(clean_first_pass.into_inner() > 0);
}

// ---------------------------------------------------------------- 4

/// Worst relative error `||a - n|| / max(||a||, ||n||)` per parameter tensor,
/// over up to `per_tensor` sampled coordinates (central differences, h = 1e-5).
fn gradient_check<M: Trainable>(model: &M, x: &Array2<f64>, y: &Array2<f64>, per_tensor: usize, rng: &mut SimRng) -> f64 {
    use rand::Rng;
    let (_, grads) = model.loss_grad(x.view(), y.view());
    let h = 1e-5;
    let loss = |m: &M| uavfeed::nn::models::mse(&m.predict(x.view()), y.view());
    let mut worst = 0.0f64;
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    for (t, &len) in sizes.iter().enumerate() {
        let coords: Vec<usize> =
            if len <= per_tensor { (0..len).collect() } else { (0..per_tensor).map(|_| rng.random_range(0..len)).collect() };
        let (mut diff, mut an, mut nn) = (0.0, 0.0, 0.0);
        for &i in &coords {
            let mut plus = model.clone();
            plus.params_mut()[t][i] += h;
            let mut minus = model.clone();
            minus.params_mut()[t][i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let analytic = grads[t][i];
            diff += (analytic - numeric).powi(2);
            an += analytic * analytic;
            nn += numeric * numeric;
        }
        let scale = an.sqrt().max(nn.sqrt());
        if scale > 0.0 {
            worst = worst.max(diff.sqrt() / scale);
        }
    }
    worst
}

fn random_matrix(rng: &mut SimRng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    use rand::Rng;
    Array2::from_shape_fn((rows, cols), |_| scale * (2.0 * rng.random::<f64>() - 1.0))
}

#[test]
fn criterion_4_gradient_checks() {
    use rand::Rng;
    let (n, la) = (64, 5);
    let mut rng = SimRng::seed_from_u64(404);
    let mut report = Vec::new();
    for point in 0..10 {
        let batch = 3;
        let mut sen = SenNet::init(la, n, &mut rng).unwrap();
        // non-zero conv bias so the ReLU sees both signs
        sen.conv.bias = 0.1 * (2.0 * rng.random::<f64>() - 1.0);
        let x = random_matrix(&mut rng, batch, la * 2 * n, 1.0);
        let y = Array2::from_shape_fn((batch, 1), |(i, _)| ((i + point) % 2) as f64);
        let e_sen = gradient_check(&sen, &x, &y, 40, &mut rng);

        let aid = Mlp::aidnet(n, &mut rng);
        let x = random_matrix(&mut rng, batch, 2 * n, 1.0);
        let y = random_matrix(&mut rng, batch, 2 * n, 1.0);
        let e_aid = gradient_check(&aid, &x, &y, 40, &mut rng);

        let rec = Mlp::recnet(n, la, &mut rng);
        let x = random_matrix(&mut rng, batch, 2 * n, 1.0);
        let y = random_matrix(&mut rng, batch, 2 * la * n, 0.3);
        let e_rec = gradient_check(&rec, &x, &y, 40, &mut rng);
        report.push((e_sen, e_aid, e_rec));
    }
    eprintln!("relative gradient errors (sennet, aidnet, recnet): {report:?}");
    for (i, (a, b, c)) in report.iter().enumerate() {
        assert!(*a < 1e-4 && *b < 1e-4 && *c < 1e-4, "point {i}: {a:e} {b:e} {c:e}");
    }
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_sensing_accuracy() {
    let f = fixture();
    let spec = f.cfg.datasets.get(Role::Sennet);
    assert_eq!((spec.n_train, spec.n_val), (100_000, 10_000));
    assert!(spec.gen_snr_db.is_infinite());
    assert_eq!(f.cfg.channel.kfactor_db, 20.0);
    let val = f.sim.build_dataset(Role::Sennet, Split::Val).unwrap();
    let acc = sensing_accuracy(f.params.sennet().unwrap(), &val);
    eprintln!("sennet validation accuracy {acc:.4}, training {:.0} s", f.record.sennet_train_seconds);
    assert!(acc > 0.95, "accuracy {acc}");
    assert!(f.record.sennet_train_seconds <= 30.0 * 60.0);
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_nmse_trends() {
    let f = fixture();
    let snrs = [5.0, 10.0, 15.0, 20.0];
    let cfg = sweep(&snrs, &[0.15], &[0.7], &[Scheme::Proposed, Scheme::Ablation, Scheme::Ref8], 1, 2000);
    let clock = Instant::now();
    let res = run_sweep(&f.sim, &f.params, &cfg).unwrap();
    let sweep_seconds = clock.elapsed().as_secs_f64();
    print_records(&res.records);
    for &s in &snrs {
        let p = get(&res.records, Scheme::Proposed, s, 0.15, 0.7);
        let a = get(&res.records, Scheme::Ablation, s, 0.15, 0.7);
        let r = get(&res.records, Scheme::Ref8, s, 0.15, 0.7);
        assert!(p.frames >= 2000 && a.frames >= 2000 && r.frames >= 2000);
        assert!(p.nmse < a.nmse && a.nmse < r.nmse, "snr {s}: {} {} {}", p.nmse, a.nmse, r.nmse);
    }
    assert!(get(&res.records, Scheme::Proposed, 10.0, 0.15, 0.7).nmse <= 1e-1);
    let total = f.record.datagen_seconds + f.record.total_train_seconds + sweep_seconds;
    eprintln!("pipeline wall time {total:.0} s (sweep {sweep_seconds:.0} s)");
    assert!(total <= 2.0 * 3600.0);
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_7_ber_trends() {
    let f = fixture();
    let cfg = sweep(&[10.0], &[0.15], &[0.7], &[Scheme::Proposed, Scheme::Ablation, Scheme::Ref8], 1000, 200);
    let res = run_sweep(&f.sim, &f.params, &cfg).unwrap();
    print_records(&res.records);
    let p = get(&res.records, Scheme::Proposed, 10.0, 0.15, 0.7);
    let a = get(&res.records, Scheme::Ablation, 10.0, 0.15, 0.7);
    let r = get(&res.records, Scheme::Ref8, 10.0, 0.15, 0.7);
    for x in [p, a, r] {
        assert!(x.bit_errors >= 1000, "{} stopped at {} errors", x.scheme.as_str(), x.bit_errors);
    }
    assert!(p.ber < a.ber, "{} vs {}", p.ber, a.ber);
    assert!(p.ber < r.ber, "{} vs {}", p.ber, r.ber);
    assert!(p.ber <= 1e-2);
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_8_parameter_robustness() {
    let f = fixture();
    let rhos = [0.10, 0.15, 0.20];
    let res = run_sweep(&f.sim, &f.params, &sweep(&[10.0], &rhos, &[0.7], &[Scheme::Proposed], 1000, 2000)).unwrap();
    print_records(&res.records);
    let by_rho: Vec<&MetricRecord> = rhos.iter().map(|&r| get(&res.records, Scheme::Proposed, 10.0, r, 0.7)).collect();
    let mut failures = Vec::new();
    for w in by_rho.windows(2) {
        if w[1].nmse >= w[0].nmse {
            failures.push(format!("NMSE not decreasing in rho: {} -> {}", w[0].nmse, w[1].nmse));
        }
        if w[1].ber <= w[0].ber {
            failures.push(format!("BER not increasing in rho: {} -> {}", w[0].ber, w[1].ber));
        }
    }
    let betas = [0.6, 0.7, 0.8];
    let res = run_sweep(&f.sim, &f.params, &sweep(&[10.0], &[0.15], &betas, &[Scheme::Proposed], 1, 2000)).unwrap();
    print_records(&res.records);
    let by_beta: Vec<&MetricRecord> = betas.iter().map(|&b| get(&res.records, Scheme::Proposed, 10.0, 0.15, b)).collect();
    for w in by_beta.windows(2) {
        if w[1].nmse >= w[0].nmse {
            failures.push(format!("NMSE not decreasing in beta: {} -> {}", w[0].nmse, w[1].nmse));
        }
    }
    assert!(by_rho.iter().chain(&by_beta).all(|r| r.frames >= 2000));
    assert!(failures.is_empty(), "{}", failures.join("; "));
}

// ---------------------------------------------------------------- 9

fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed: 99,
        channel: ChannelConfig { n: 8, la: 3, l: 4, k: 6, ..ChannelConfig::default() },
        link: LinkConfig { m: 64, pilot_len: 8, ..LinkConfig::default() },
        ..ExperimentConfig::default()
    };
    cfg.datasets.sennet = DatasetSpec { n_train: 300, n_val: 60, n_test: 60, ..DatasetSpec::defaults(Role::Sennet) };
    cfg.datasets.aidnet = DatasetSpec { n_train: 200, n_val: 40, n_test: 40, ..DatasetSpec::defaults(Role::Aidnet) };
    cfg.datasets.recnet = DatasetSpec { n_train: 200, n_val: 40, n_test: 40, ..DatasetSpec::defaults(Role::Recnet) };
    cfg.train.epochs_sennet = 3;
    cfg.train.epochs_aidnet = 3;
    cfg.train.epochs_recnet = 3;
    cfg.sweep = SweepConfig {
        snr_grid_db: vec![0.0, 10.0],
        rho_grid: vec![0.1, 0.2],
        beta_grid: vec![0.7],
        schemes: vec![Scheme::Proposed, Scheme::Ablation, Scheme::Ref8, Scheme::SingleShot],
        min_bit_errors: 50,
        min_frames: 20,
        max_frames: 300,
        chunk: 7,
        ..SweepConfig::default()
    };
    cfg
}

fn full_run_csv(cfg: &ExperimentConfig) -> String {
    let sim = Simulator::new(cfg).unwrap();
    let data = Datasets::build(&sim, &Role::ALL, &[Split::Train, Split::Val]).unwrap();
    let params = train_all(&sim, &data).unwrap().deployed;
    csv_string(&run_sweep(&sim, &params, &cfg.sweep).unwrap().records).unwrap()
}

#[test]
fn criterion_9_determinism() {
    let cfg = tiny_config();
    let a = full_run_csv(&cfg);
    let b = full_run_csv(&cfg);
    assert_eq!(a.lines().count(), 1 + 2 * 2 * 4);
    assert_eq!(a.as_bytes(), b.as_bytes());

    let f = fixture();
    let small = sweep(&[10.0], &[0.15], &[0.7], &[Scheme::Proposed, Scheme::Ablation, Scheme::Ref8], 1, 100);
    let small = SweepConfig { max_frames: 100, ..small };
    let x = csv_string(&run_sweep(&f.sim, &f.params, &small).unwrap().records).unwrap();
    let y = csv_string(&run_sweep(&f.sim, &f.params, &small).unwrap().records).unwrap();
    assert_eq!(x.as_bytes(), y.as_bytes());
}
