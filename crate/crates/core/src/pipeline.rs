//! Frame simulation, dataset generation, offline training of the three
//! networks and the online branching receiver.

use crate::channel::{ls_estimate_u2g, reshape_for_sensing, ChannelModel, G2uChannel, U2gChannel};
use crate::config::{ExperimentConfig, Role, Split};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{from_real, norm_sqr_arr, to_real, C64};
use crate::nn::{hard_decision, predict_chunked, train, EpochLog, Mlp, ModelParams, SenNet, Trainable};
use crate::phy::{
    compress, demap_qpsk, detect_data, initial_feature, modulate_qpsk, random_bits, receive, spread, superimpose,
    CompressionMatrix, InitialFeature, LinkParams, SpreadingMatrix,
};
use crate::rng::{split_offset, stream, SimRng, Stream};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Random content of one frame, shared by every scheme and operating point.
#[derive(Debug, Clone)]
pub struct FrameDraw {
    pub los: bool,
    pub g2u: G2uChannel,
    pub u2g: U2gChannel,
    pub bits: Vec<u8>,
    /// Seeds the receiver noise and the LS estimation error.
    pub noise_seed: u64,
}

/// What the UAV superimposes on its data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// `z = h Phi / z_norm` spread over `N` codes.
    Compressed,
    /// Unit-power `h` spread over `La N` codes.
    Uncompressed,
}

/// One transmitted and received frame.
#[derive(Debug, Clone)]
pub struct Frame {
    pub link: LinkParams,
    pub payload: Payload,
    /// Spread code symbols (`z` or the unit-power `h`).
    pub code: Array1<C64>,
    pub z_norm: f64,
    /// Channel in the units the receiver estimates: `h / z_norm` or unit-power `h`.
    pub target: Array1<C64>,
    pub d: Array1<C64>,
    pub x: Array1<C64>,
    pub y: Array2<C64>,
    /// LS estimate of the U2G taps.
    pub g_taps_hat: Array2<C64>,
    /// Link vector used by the receiver (LS dominant tap, or the true one).
    pub g_hat: Array1<C64>,
}

/// Channel model plus the shared matrices of one experiment.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub cfg: ExperimentConfig,
    pub model: ChannelModel,
    pub phi: CompressionMatrix,
    pub q: SpreadingMatrix,
    q8: Option<SpreadingMatrix>,
}

impl Simulator {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let phi = CompressionMatrix::generate(cfg.channel.la_n(), cfg.channel.n, cfg.link.phi_seed)?;
        Self::with_phi(cfg, phi)
    }

    /// Uses a compression matrix loaded from a model container.
    pub fn with_phi(cfg: &ExperimentConfig, phi: CompressionMatrix) -> Result<Self> {
        cfg.validate()?;
        let (n, la_n, m) = (cfg.channel.n, cfg.channel.la_n(), cfg.link.m);
        if phi.phi.dim() != (la_n, n) {
            return Err(Error::Shape { what: "phi".into(), expected: vec![la_n, n], found: phi.phi.shape().to_vec() });
        }
        Ok(Self {
            cfg: cfg.clone(),
            model: ChannelModel::new(&cfg.channel)?,
            phi,
            q: SpreadingMatrix::walsh(m, n)?,
            q8: SpreadingMatrix::walsh(m, la_n).ok(),
        })
    }

    pub fn from_params(cfg: &ExperimentConfig, params: &ModelParams) -> Result<Self> {
        if params.dims != cfg.dims() {
            let (a, b) = (cfg.dims(), params.dims);
            return Err(Error::Shape {
                what: "model container (N, La, M)".into(),
                expected: vec![a.n, a.la, a.m],
                found: vec![b.n, b.la, b.m],
            });
        }
        Self::with_phi(cfg, params.phi.clone())
    }

    /// Spreading matrix of the uncompressed baseline.
    pub fn q8(&self) -> Result<&SpreadingMatrix> {
        self.q8.as_ref().ok_or_else(|| {
            crate::error::config_err(format!(
                "uncompressed baseline needs M >= La N ({} < {})",
                self.cfg.link.m,
                self.cfg.channel.la_n()
            ))
        })
    }

    pub fn link(&self, snr_db: f64, rho: f64) -> Result<LinkParams> {
        LinkParams::from_snr_db(snr_db, rho, self.cfg.link.e_u, self.cfg.link.detector)
    }

    pub fn draw<R: Rng + ?Sized>(&self, los: bool, rng: &mut R) -> FrameDraw {
        let g2u = self.model.draw_g2u(los, rng);
        let u2g = self.model.draw_u2g(los, rng);
        let bits = random_bits(rng, 2 * self.cfg.link.m);
        let noise_seed = rng.random();
        FrameDraw { los, g2u, u2g, bits, noise_seed }
    }

    pub fn transmit(&self, draw: &FrameDraw, snr_db: f64, rho: f64, payload: Payload) -> Result<Frame> {
        let link = self.link(snr_db, rho)?;
        let h = draw.g2u.h.view();
        let (code, z_norm, target, q) = match payload {
            Payload::Compressed => {
                let (z, z_norm) = compress(h, &self.phi)?;
                (z, z_norm, h.mapv(|c| c / z_norm), &self.q)
            }
            Payload::Uncompressed => {
                let e = norm_sqr_arr(&h.to_owned());
                if e == 0.0 {
                    return Err(Error::DegenerateCsi);
                }
                let scale = (h.len() as f64 / e).sqrt();
                let hu = h.mapv(|c| c * scale);
                (hu.clone(), 1.0 / scale, hu, self.q8()?)
            }
        };
        let d = modulate_qpsk(&draw.bits)?;
        let s = spread(code.view(), q);
        let x = superimpose(s.view(), d.view(), rho, link.e_u)?;
        let mut noise = SimRng::seed_from_u64(draw.noise_seed);
        let y = receive(x.view(), draw.u2g.g.view(), link.sigma2, &mut noise);
        let g_taps_hat = ls_estimate_u2g(&draw.u2g, snr_db, self.cfg.link.pilot_len, link.e_u, &mut noise)?;
        let g_hat = if self.cfg.link.perfect_g { draw.u2g.g.clone() } else { g_taps_hat.row(0).to_owned() };
        Ok(Frame { link, payload, code, z_norm, target, d, x, y, g_taps_hat, g_hat })
    }

    fn dataset_tag(role: Role) -> Stream {
        match role {
            Role::Sennet => Stream::SennetData,
            Role::Aidnet => Stream::AidnetData,
            Role::Recnet => Stream::RecnetData,
        }
    }

    /// Generates one dataset sample; returns `(input, target, los)`.
    pub fn dataset_sample(&self, role: Role, index: u64) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let spec = self.cfg.datasets.get(role);
        let mut rng = stream(self.cfg.seed, Self::dataset_tag(role), index);
        match role {
            Role::Sennet => {
                let los = rng.random::<f64>() < spec.beta;
                let u2g = self.model.draw_u2g(los, &mut rng);
                let est = ls_estimate_u2g(&u2g, spec.gen_snr_db, self.cfg.link.pilot_len, self.cfg.link.e_u, &mut rng)?;
                let x = reshape_for_sensing(&est).into_raw_vec_and_offset().0;
                Ok((x, vec![los as u8 as f64], los))
            }
            Role::Aidnet => {
                if spec.beta == 0.0 {
                    return Err(Error::NoLosSamples);
                }
                let draw = self.draw(true, &mut rng);
                let frame = self.transmit(&draw, spec.gen_snr_db, self.cfg.link.rho, Payload::Compressed)?;
                let feat = initial_feature(frame.y.view(), frame.g_hat.view(), &frame.link, &self.q)?;
                Ok((to_real(feat.z_hat.as_slice().expect("contiguous")), to_real(frame.code.as_slice().expect("contiguous")), true))
            }
            Role::Recnet => {
                let los = rng.random::<f64>() < spec.beta;
                let draw = self.draw(los, &mut rng);
                let frame = self.transmit(&draw, spec.gen_snr_db, self.cfg.link.rho, Payload::Compressed)?;
                let feat = initial_feature(frame.y.view(), frame.g_hat.view(), &frame.link, &self.q)?;
                Ok((
                    to_real(feat.z_hat.as_slice().expect("contiguous")),
                    to_real(frame.target.as_slice().expect("contiguous")),
                    los,
                ))
            }
        }
    }

    /// Builds one split of one role's dataset (parallel over samples).
    pub fn build_dataset(&self, role: Role, split: Split) -> Result<Dataset> {
        let spec = self.cfg.datasets.get(role);
        if role == Role::Aidnet && spec.beta == 0.0 {
            return Err(Error::NoLosSamples);
        }
        let count = spec.count(split);
        let base = split_offset(split.index());
        let rows: Vec<(Vec<f64>, Vec<f64>, bool)> =
            (0..count as u64).into_par_iter().map(|i| self.dataset_sample(role, base + i)).collect::<Result<_>>()?;
        let (xl, yl) = (rows[0].0.len(), rows[0].1.len());
        let mut x = Array2::zeros((count, xl));
        let mut y = Array2::zeros((count, yl));
        let mut los = Vec::with_capacity(count);
        for (i, (xi, yi, l)) in rows.into_iter().enumerate() {
            x.row_mut(i).assign(&ArrayView1::from(&xi[..]));
            y.row_mut(i).assign(&ArrayView1::from(&yi[..]));
            los.push(l);
        }
        Ok(Dataset {
            role,
            split,
            x,
            y,
            los,
            seeds: (0..count as u64).map(|i| base + i).collect(),
            snr_db: spec.gen_snr_db,
            beta: if role == Role::Aidnet { 1.0 } else { spec.beta },
            master_seed: self.cfg.seed,
        })
    }
}

/// All datasets of a run, keyed by role and split.
#[derive(Debug, Clone, Default)]
pub struct Datasets(pub BTreeMap<(Role, Split), Dataset>);

impl Datasets {
    pub fn get(&self, role: Role, split: Split) -> Result<&Dataset> {
        self.0.get(&(role, split)).ok_or_else(|| Error::Missing(PathBuf::from(Dataset::file_name(role, split))))
    }

    pub fn insert(&mut self, d: Dataset) {
        self.0.insert((d.role, d.split), d);
    }

    pub fn build(sim: &Simulator, roles: &[Role], splits: &[Split]) -> Result<Self> {
        let mut out = Self::default();
        for &role in roles {
            for &split in splits {
                out.insert(sim.build_dataset(role, split)?);
            }
        }
        Ok(out)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.0.values().try_for_each(|d| d.save(dir))
    }

    /// Loads every file present for the given roles and splits.
    pub fn load(dir: &Path, roles: &[Role], splits: &[Split]) -> Result<Self> {
        let mut out = Self::default();
        for &role in roles {
            for &split in splits {
                out.insert(Dataset::load(dir, role, split)?);
            }
        }
        Ok(out)
    }
}

/// Fraction of samples whose hard decision matches the LoS label.
pub fn sensing_accuracy(net: &SenNet, data: &Dataset) -> f64 {
    let o = predict_chunked(net, data.x.view(), 4096);
    let hits = o.column(0).iter().zip(&data.los).filter(|(&o, &l)| hard_decision(o) == l).count();
    hits as f64 / data.len().max(1) as f64
}

/// Replaces the inputs of LoS samples by the refinement network's output.
pub fn route_through_aidnet(aidnet: &Mlp, x: &Array2<f64>, los: &[bool]) -> Array2<f64> {
    let idx: Vec<usize> = los.iter().enumerate().filter(|(_, &l)| l).map(|(i, _)| i).collect();
    let mut out = x.clone();
    if idx.is_empty() {
        return out;
    }
    let refined = predict_chunked(aidnet, x.select(Axis(0), &idx).view(), 4096);
    for (k, &i) in idx.iter().enumerate() {
        out.row_mut(i).assign(&refined.row(k));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    /// Best-validation weights of every network (used for inference).
    pub deployed: ModelParams,
    /// Weights after the last epoch.
    pub last_epoch: ModelParams,
    pub logs: Vec<(Role, Vec<EpochLog>)>,
    pub best_epochs: Vec<(Role, usize)>,
    pub sennet_val_accuracy: f64,
}

fn train_role<M: Trainable>(
    sim: &Simulator,
    role: Role,
    model: M,
    x_train: ArrayView2<f64>,
    train_set: &Dataset,
    x_val: ArrayView2<f64>,
    val_set: &Dataset,
) -> Result<crate::nn::TrainOutcome<M>> {
    let cfg = sim.cfg.train.for_role(role);
    let mut rng = stream(sim.cfg.seed, Stream::Shuffle, role as u64);
    train(model, (x_train, train_set.y.view()), (x_val, val_set.y.view()), &cfg, &mut rng)
}

/// Draws `sennet_init_candidates` sensor initializations and returns the one
/// with the lowest validation loss after one epoch. Candidate 0 is the plain
/// single-draw initialization.
pub fn screen_sennet_inits(sim: &Simulator, train_set: &Dataset, val_set: &Dataset) -> Result<SenNet> {
    let cfg = &sim.cfg;
    let mut rng = stream(cfg.seed, Stream::Init, Role::Sennet as u64);
    let mut best: Option<(f64, SenNet)> = None;
    for _ in 0..cfg.train.sennet_init_candidates {
        let cand = SenNet::init(cfg.channel.la, cfg.channel.n, &mut rng)?;
        if cfg.train.sennet_init_candidates == 1 {
            return Ok(cand);
        }
        let probe = crate::nn::TrainConfig { epochs: 1, ..cfg.train.for_role(Role::Sennet) };
        let mut shuffle = stream(cfg.seed, Stream::Shuffle, Role::Sennet as u64);
        let out = train(cand.clone(), (train_set.x.view(), train_set.y.view()), (val_set.x.view(), val_set.y.view()), &probe, &mut shuffle)?;
        let loss = out.log[1].val_mse;
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, cand));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

/// Trains the sensor, then the refinement network, then the reconstruction
/// network (whose LoS inputs pass through the trained refinement network).
pub fn train_all(sim: &Simulator, data: &Datasets) -> Result<TrainedModels> {
    let cfg = &sim.cfg;
    let (n, la) = (cfg.channel.n, cfg.channel.la);
    let init = |role: Role| stream(cfg.seed, Stream::Init, role as u64);

    let (st, sv) = (data.get(Role::Sennet, Split::Train)?, data.get(Role::Sennet, Split::Val)?);
    let sen = screen_sennet_inits(sim, st, sv)?;
    let sen = train_role(sim, Role::Sennet, sen, st.x.view(), st, sv.x.view(), sv)?;

    let (at, av) = (data.get(Role::Aidnet, Split::Train)?, data.get(Role::Aidnet, Split::Val)?);
    let aid = Mlp::aidnet(n, &mut init(Role::Aidnet));
    let aid = train_role(sim, Role::Aidnet, aid, at.x.view(), at, av.x.view(), av)?;

    let (rt, rv) = (data.get(Role::Recnet, Split::Train)?, data.get(Role::Recnet, Split::Val)?);
    let xt = route_through_aidnet(&aid.best_model, &rt.x, &rt.los);
    let xv = route_through_aidnet(&aid.best_model, &rv.x, &rv.los);
    let rec = Mlp::recnet(n, la, &mut init(Role::Recnet));
    let rec = train_role(sim, Role::Recnet, rec, xt.view(), rt, xv.view(), rv)?;

    let pack = |s: &SenNet, a: &Mlp, r: &Mlp| ModelParams {
        dims: cfg.dims(),
        sennet: Some(s.clone()),
        aidnet: Some(a.clone()),
        recnet: r.clone(),
        phi: sim.phi.clone(),
        q_seed: 0,
        master_seed: cfg.seed,
    };
    Ok(TrainedModels {
        deployed: pack(&sen.best_model, &aid.best_model, &rec.best_model),
        last_epoch: pack(&sen.final_model, &aid.final_model, &rec.final_model),
        sennet_val_accuracy: sensing_accuracy(&sen.best_model, sv),
        best_epochs: vec![(Role::Sennet, sen.best_epoch), (Role::Aidnet, aid.best_epoch), (Role::Recnet, rec.best_epoch)],
        logs: vec![(Role::Sennet, sen.log), (Role::Aidnet, aid.log), (Role::Recnet, rec.log)],
    })
}

/// Writes `train_<role>.csv` (epoch, train_mse, val_mse, wall_seconds).
pub fn write_train_logs(dir: &Path, logs: &[(Role, Vec<EpochLog>)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (role, log) in logs {
        let mut w = csv::Writer::from_path(dir.join(format!("train_{}.csv", role.as_str())))?;
        for row in log {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Los,
    Nlos,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub sensing: f64,
    pub feature: f64,
    pub refine: f64,
    pub detect: f64,
    pub reconstruct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub chi: bool,
    /// Channel estimate in `h / z_norm` units.
    pub h_hat: Array1<C64>,
    pub d_bits: Vec<u8>,
    pub branch: Branch,
    /// Compressed CSI the reconstruction network received.
    pub z_used: Array1<C64>,
    pub timings: StageTimings,
}

impl PipelineOutput {
    /// Equality of everything except timings.
    pub fn same_result(&self, other: &Self) -> bool {
        self.chi == other.chi
            && self.h_hat == other.h_hat
            && self.d_bits == other.d_bits
            && self.branch == other.branch
            && self.z_used == other.z_used
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Branch chosen by the sensor.
    Sensed,
    Forced(Branch),
    /// No sensor, no refinement.
    Ablation,
}

/// Inputs of the online receiver for one frame.
#[derive(Debug, Clone, Copy)]
pub struct RxFrame<'a> {
    pub y: ArrayView2<'a, C64>,
    pub g_taps_hat: &'a Array2<C64>,
    pub g_hat: ArrayView1<'a, C64>,
    pub link: &'a LinkParams,
    pub q: &'a SpreadingMatrix,
}

impl<'a> RxFrame<'a> {
    pub fn of(frame: &'a Frame, q: &'a SpreadingMatrix) -> Self {
        Self { y: frame.y.view(), g_taps_hat: &frame.g_taps_hat, g_hat: frame.g_hat.view(), link: &frame.link, q }
    }
}

fn reconstruct(recnet: &Mlp, z: &Array1<C64>) -> Result<Array1<C64>> {
    let out = recnet.forward(&to_real(z.as_slice().expect("contiguous")))?;
    Ok(Array1::from(from_real(&out)))
}

/// Online receiver with an optional precomputed front-end feature.
pub fn infer_with(
    rx: RxFrame<'_>,
    params: &ModelParams,
    mode: Mode,
    feature: Option<&InitialFeature>,
) -> Result<PipelineOutput> {
    let mut t = StageTimings::default();
    let clock = Instant::now();
    let chi = match mode {
        Mode::Sensed => {
            let o = params.sennet()?.forward(reshape_for_sensing(rx.g_taps_hat).view())?;
            hard_decision(o)
        }
        Mode::Forced(b) => b == Branch::Los,
        Mode::Ablation => false,
    };
    t.sensing = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let owned;
    let feat = match feature {
        Some(f) => f,
        None => {
            owned = initial_feature(rx.y, rx.g_hat, rx.link, rx.q)?;
            &owned
        }
    };
    t.feature = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let z_used = if chi {
        let out = params.aidnet()?.forward(&to_real(feat.z_hat.as_slice().expect("contiguous")))?;
        Array1::from(from_real(&out))
    } else {
        feat.z_hat.clone()
    };
    t.refine = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let d_soft = detect_data(rx.y, rx.g_hat, z_used.view(), rx.link, rx.q)?;
    let d_bits = demap_qpsk(d_soft.as_slice().expect("contiguous"));
    t.detect = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let h_hat = reconstruct(&params.recnet, &z_used)?;
    t.reconstruct = clock.elapsed().as_secs_f64();

    Ok(PipelineOutput {
        chi,
        h_hat,
        d_bits,
        branch: if chi { Branch::Los } else { Branch::Nlos },
        z_used,
        timings: t,
    })
}

/// Full receiver: sense, extract the feature, refine on LoS, detect, reconstruct.
pub fn infer(rx: RxFrame<'_>, params: &ModelParams) -> Result<PipelineOutput> {
    infer_with(rx, params, Mode::Sensed, None)
}

/// Receiver without the sensor and the refinement network.
pub fn infer_ablation(rx: RxFrame<'_>, params: &ModelParams) -> Result<PipelineOutput> {
    infer_with(rx, params, Mode::Ablation, None)
}

/// Receiver that feeds the first-pass estimate (no data cancellation)
/// straight to detection and reconstruction.
pub fn infer_single_shot(rx: RxFrame<'_>, params: &ModelParams, feature: &InitialFeature) -> Result<PipelineOutput> {
    let d_soft = detect_data(rx.y, rx.g_hat, feature.z_first.view(), rx.link, rx.q)?;
    Ok(PipelineOutput {
        chi: false,
        h_hat: reconstruct(&params.recnet, &feature.z_first)?,
        d_bits: demap_qpsk(d_soft.as_slice().expect("contiguous")),
        branch: Branch::Nlos,
        z_used: feature.z_first.clone(),
        timings: StageTimings::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::config::{DatasetSpec, LinkConfig};

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            channel: ChannelConfig { n: 8, la: 3, l: 4, k: 6, ..Default::default() },
            link: LinkConfig { m: 64, pilot_len: 8, ..Default::default() },
            ..Default::default()
        };
        for (role, counts) in [(Role::Sennet, 200), (Role::Aidnet, 100), (Role::Recnet, 100)] {
            let spec = match role {
                Role::Sennet => &mut cfg.datasets.sennet,
                Role::Aidnet => &mut cfg.datasets.aidnet,
                Role::Recnet => &mut cfg.datasets.recnet,
            };
            *spec = DatasetSpec { n_train: counts, n_val: counts / 4, n_test: counts / 4, ..DatasetSpec::defaults(role) };
        }
        cfg.train.epochs_sennet = 2;
        cfg.train.epochs_aidnet = 2;
        cfg.train.epochs_recnet = 2;
        cfg
    }

    #[test]
    fn dataset_labels_and_shapes() {
        let cfg = small_cfg();
        let sim = Simulator::new(&cfg).unwrap();
        let d = sim.build_dataset(Role::Sennet, Split::Train).unwrap();
        assert_eq!(d.x.dim(), (200, 3 * 16));
        for (row, &l) in d.y.rows().into_iter().zip(&d.los) {
            assert_eq!(row[0], if l { 1.0 } else { 0.0 });
        }
        let a = sim.build_dataset(Role::Aidnet, Split::Val).unwrap();
        assert!(a.los.iter().all(|&l| l));
        assert_eq!((a.x.ncols(), a.y.ncols()), (16, 16));
        let r = sim.build_dataset(Role::Recnet, Split::Test).unwrap();
        assert_eq!((r.x.ncols(), r.y.ncols()), (16, 48));
    }

    #[test]
    fn aidnet_needs_los_samples() {
        let mut cfg = small_cfg();
        cfg.datasets.aidnet.beta = 0.0;
        let sim = Simulator::new(&cfg).unwrap();
        assert!(matches!(sim.build_dataset(Role::Aidnet, Split::Train), Err(Error::NoLosSamples)));
        cfg.datasets.aidnet.beta = 1.0;
        let sim = Simulator::new(&cfg).unwrap();
        assert!(sim.build_dataset(Role::Aidnet, Split::Train).is_ok());
    }

    #[test]
    fn dataset_generation_is_reproducible() {
        let sim = Simulator::new(&small_cfg()).unwrap();
        let a = sim.build_dataset(Role::Recnet, Split::Train).unwrap();
        let b = sim.build_dataset(Role::Recnet, Split::Train).unwrap();
        assert_eq!(a, b);
        let (x, y, los) = sim.dataset_sample(Role::Recnet, a.seeds[7]).unwrap();
        assert_eq!(x, a.x.row(7).to_vec());
        assert_eq!(y, a.y.row(7).to_vec());
        assert_eq!(los, a.los[7]);
    }

    #[test]
    fn train_all_runs_and_is_deterministic() {
        let cfg = small_cfg();
        let sim = Simulator::new(&cfg).unwrap();
        let data = Datasets::build(&sim, &Role::ALL, &[Split::Train, Split::Val]).unwrap();
        let a = train_all(&sim, &data).unwrap();
        let b = train_all(&sim, &data).unwrap();
        assert_eq!(a.deployed.to_bytes().unwrap(), b.deployed.to_bytes().unwrap());
        assert_eq!(a.logs.iter().map(|(r, l)| (*r, l.len())).collect::<Vec<_>>(), vec![
            (Role::Sennet, 3),
            (Role::Aidnet, 3),
            (Role::Recnet, 3)
        ]);
        let mut partial = Datasets::default();
        partial.insert(data.get(Role::Sennet, Split::Train).unwrap().clone());
        assert!(matches!(train_all(&sim, &partial), Err(Error::Missing(_))));
    }

    #[test]
    fn forced_nlos_equals_ablation_and_branch_tracks_chi() {
        let cfg = small_cfg();
        let sim = Simulator::new(&cfg).unwrap();
        let data = Datasets::build(&sim, &Role::ALL, &[Split::Train, Split::Val]).unwrap();
        let params = train_all(&sim, &data).unwrap().deployed;
        let mut rng = stream(9, Stream::Sweep, 0);
        for i in 0..6 {
            let draw = sim.draw(i % 2 == 0, &mut rng);
            let frame = sim.transmit(&draw, 10.0, 0.15, Payload::Compressed).unwrap();
            let rx = RxFrame::of(&frame, &sim.q);
            let forced = infer_with(rx, &params, Mode::Forced(Branch::Nlos), None).unwrap();
            let abl = infer_ablation(rx, &params).unwrap();
            assert!(forced.same_result(&abl));
            let full = infer(rx, &params).unwrap();
            assert_eq!(full.branch == Branch::Los, full.chi);
            let o = params.sennet().unwrap().forward(reshape_for_sensing(&frame.g_taps_hat).view()).unwrap();
            assert_eq!(full.chi, o > 0.5);
        }
        let mut no_opt = params.clone();
        no_opt.sennet = None;
        no_opt.aidnet = None;
        let draw = sim.draw(true, &mut rng);
        let frame = sim.transmit(&draw, 10.0, 0.15, Payload::Compressed).unwrap();
        assert!(infer_ablation(RxFrame::of(&frame, &sim.q), &no_opt).is_ok());
        assert!(infer(RxFrame::of(&frame, &sim.q), &no_opt).is_err());
    }

    #[test]
    fn noise_free_los_frame_with_perfect_link_is_error_free() {
        let mut cfg = small_cfg();
        cfg.channel = ChannelConfig::default();
        cfg.link = LinkConfig { perfect_g: true, ..Default::default() };
        let sim = Simulator::new(&cfg).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        let params = ModelParams {
            dims: cfg.dims(),
            sennet: Some(SenNet::init(5, 64, &mut rng).unwrap()),
            aidnet: Some(Mlp::aidnet(64, &mut rng)),
            recnet: Mlp::recnet_zeros(64, 5),
            phi: sim.phi.clone(),
            q_seed: 0,
            master_seed: 0,
        };
        for i in 0..3 {
            let draw = sim.draw(true, &mut stream(1, Stream::Sweep, i));
            let frame = sim.transmit(&draw, f64::INFINITY, 0.15, Payload::Compressed).unwrap();
            let out = infer_with(RxFrame::of(&frame, &sim.q), &params, Mode::Forced(Branch::Nlos), None).unwrap();
            assert_eq!(out.d_bits, draw.bits);
        }
    }

    #[test]
    fn uncompressed_payload_is_unit_power() {
        let sim = Simulator::new(&ExperimentConfig::default()).unwrap();
        let draw = sim.draw(false, &mut SimRng::seed_from_u64(4));
        let f = sim.transmit(&draw, 10.0, 0.15, Payload::Uncompressed).unwrap();
        assert!((norm_sqr_arr(&f.code) - 320.0).abs() < 1e-9);
        assert_eq!(f.y.dim(), (64, 512));
        let f = sim.transmit(&draw, 10.0, 0.15, Payload::Compressed).unwrap();
        for (a, b) in f.target.iter().zip(draw.g2u.h.iter()) {
            assert!((a * f.z_norm - b).norm() < 1e-12 * b.norm().max(1e-300) + 1e-15);
        }
    }
}
