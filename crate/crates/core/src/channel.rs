//! Clustered mmWave channels for the ground-to-UAV (G2U) and UAV-to-ground
//! (U2G) links.
//!
//! The cluster geometry (mean angles, intra-cluster ray angles, delay power
//! profile) is a fixed scenario derived from `ChannelConfig::seed`, the way a
//! tapped-delay-line table is fixed. Each draw re-samples the ray gains and,
//! for LoS draws, adds a specular ray on the first cluster's mean direction.

use crate::error::{config_err, Result};
use crate::linalg::{unitary_dft, C64};
use crate::rng::{cn, stream, Stream};
use ndarray::{s, Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// gBS antenna count.
    pub n: usize,
    /// Number of delay clusters.
    pub l: usize,
    /// Rows kept after truncation.
    pub la: usize,
    /// Rays per cluster.
    pub k: usize,
    pub kfactor_db: f64,
    /// Cluster `l` gets power proportional to `exp(-pdp_decay * l)`.
    pub pdp_decay: f64,
    /// RMS intra-cluster angular spread.
    pub angle_spread_deg: f64,
    /// Cluster mean angles are uniform on `[-max, max]`.
    pub mean_angle_max_deg: f64,
    /// Seed of the scenario geometry.
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            n: 64,
            l: 8,
            la: 5,
            k: 20,
            kfactor_db: 20.0,
            pdp_decay: 1.4,
            angle_spread_deg: 5.0,
            mean_angle_max_deg: 60.0,
            seed: 1,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(config_err("channel.n must be >= 1"));
        }
        if self.la < 1 || self.la > self.l {
            return Err(config_err(format!(
                "channel.la must satisfy 1 <= la <= l (la = {}, l = {})",
                self.la, self.l
            )));
        }
        if self.k < 1 {
            return Err(config_err("channel.k must be >= 1"));
        }
        if !(self.kfactor_db >= 0.0 && self.kfactor_db.is_finite()) {
            return Err(config_err("channel.kfactor_db must be finite and >= 0"));
        }
        if !(self.pdp_decay >= 0.0 && self.pdp_decay.is_finite()) {
            return Err(config_err("channel.pdp_decay must be finite and >= 0"));
        }
        if !(self.angle_spread_deg >= 0.0 && self.angle_spread_deg.is_finite()) {
            return Err(config_err("channel.angle_spread_deg must be finite and >= 0"));
        }
        if !(0.0..=90.0).contains(&self.mean_angle_max_deg) {
            return Err(config_err("channel.mean_angle_max_deg must lie in [0, 90]"));
        }
        Ok(())
    }

    /// Linear K-factor.
    pub fn kfactor(&self) -> f64 {
        10f64.powf(self.kfactor_db / 10.0)
    }

    /// Length of the vectorized truncated channel.
    pub fn la_n(&self) -> usize {
        self.la * self.n
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterRay {
    pub gain: C64,
    /// Departure angle (radians).
    pub aod: f64,
    /// Arrival angle (radians).
    pub aoa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2uChannel {
    /// Time-spatial matrix, `L x N`.
    pub h_td: Array2<C64>,
    /// Truncated time-angular matrix, `La x N`.
    pub h_ta: Array2<C64>,
    /// Column-stacked `h_ta`, length `La * N`.
    pub h: Array1<C64>,
    pub los: bool,
    /// Rays per cluster; the LoS ray, when present, is the last ray of cluster 0.
    pub rays: Vec<Vec<ClusterRay>>,
}

impl G2uChannel {
    /// Builds the channel from explicit rays (single-antenna UAV receiver).
    pub fn from_rays(n: usize, la: usize, rays: &[Vec<ClusterRay>], los: bool) -> Result<Self> {
        if n < 1 || la < 1 || la > rays.len() {
            return Err(config_err("from_rays needs n >= 1 and 1 <= la <= clusters"));
        }
        let mut h_td = Array2::zeros((rays.len(), n));
        for (l, cluster) in rays.iter().enumerate() {
            for ray in cluster {
                let sv = steering(n, ray.aod);
                for (dst, a) in h_td.row_mut(l).iter_mut().zip(sv.iter()) {
                    *dst += ray.gain * a.conj();
                }
            }
        }
        let fh = unitary_dft(n).t().mapv(|c| c.conj());
        Ok(Self::assemble(h_td, &fh, la, los, rays.to_vec()))
    }

    fn assemble(h_td: Array2<C64>, fh: &Array2<C64>, la: usize, los: bool, rays: Vec<Vec<ClusterRay>>) -> Self {
        let h_ta = h_td.slice(s![..la, ..]).dot(fh);
        let h: Array1<C64> = h_ta.t().iter().copied().collect();
        Self { h_td, h_ta, h, los, rays }
    }

    pub fn l(&self) -> usize {
        self.h_td.nrows()
    }

    pub fn la(&self) -> usize {
        self.h_ta.nrows()
    }

    /// Full `L x N` time-angular matrix (before truncation).
    pub fn angular_full(&self) -> Array2<C64> {
        let fh = unitary_dft(self.h_td.ncols()).t().mapv(|c| c.conj());
        self.h_td.dot(&fh)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct U2gChannel {
    /// Effective narrowband link vector, equal to `taps.row(0)`.
    pub g: Array1<C64>,
    /// Per-tap receive spatial signatures, `La x N`.
    pub taps: Array2<C64>,
    pub los: bool,
}

impl U2gChannel {
    /// Builds the channel from explicit rays, one tap per cluster, without
    /// power normalization.
    pub fn from_rays(n: usize, rays: &[Vec<ClusterRay>], los: bool) -> Result<Self> {
        if n < 1 || rays.is_empty() {
            return Err(config_err("from_rays needs n >= 1 and at least one tap"));
        }
        let mut taps = Array2::zeros((rays.len(), n));
        for (l, cluster) in rays.iter().enumerate() {
            for ray in cluster {
                let sv = steering(n, ray.aoa);
                for (dst, a) in taps.row_mut(l).iter_mut().zip(sv.iter()) {
                    *dst += ray.gain * a;
                }
            }
        }
        let g = taps.row(0).to_owned();
        Ok(Self { g, taps, los })
    }
}

/// ULA steering vector with half-wavelength spacing, `a[n] = exp(-j pi n sin(theta))`.
pub fn steering(n: usize, theta: f64) -> Array1<C64> {
    let k = PI * theta.sin();
    Array1::from_shape_fn(n, |i| C64::from_polar(1.0, -k * i as f64))
}

/// Fixed scenario geometry plus cached steering vectors.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    cfg: ChannelConfig,
    powers: Vec<f64>,
    /// Angles at the gBS, `[cluster][ray]`.
    gbs_angles: Vec<Vec<f64>>,
    /// Angles at the UAV, `[cluster][ray]`.
    uav_angles: Vec<Vec<f64>>,
    los_gbs: f64,
    los_uav: f64,
    /// `a(theta)` for each gBS ray, row-major over `(cluster, ray)`.
    sv: Array2<C64>,
    sv_los: Array1<C64>,
    fh: Array2<C64>,
    kf: f64,
}

fn laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

impl ChannelModel {
    pub fn new(cfg: &ChannelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(cfg.seed, Stream::Geometry, 0);
        let raw: Vec<f64> = (0..cfg.l).map(|l| (-cfg.pdp_decay * l as f64).exp()).collect();
        let total: f64 = raw.iter().sum();
        let powers: Vec<f64> = raw.iter().map(|p| p / total).collect();

        let max = cfg.mean_angle_max_deg.to_radians();
        let lap_scale = cfg.angle_spread_deg.to_radians() / 2f64.sqrt();
        let clip = |a: f64| a.clamp(-FRAC_PI_2, FRAC_PI_2);
        let mut gbs_angles = Vec::with_capacity(cfg.l);
        let mut uav_angles = Vec::with_capacity(cfg.l);
        let mut gbs_means = Vec::with_capacity(cfg.l);
        for _ in 0..cfg.l {
            let mg = rng.random_range(-max..=max);
            let mu = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            gbs_means.push(mg);
            let mut ga = Vec::with_capacity(cfg.k);
            let mut ua = Vec::with_capacity(cfg.k);
            for _ in 0..cfg.k {
                ga.push(clip(mg + laplace(&mut rng, lap_scale)));
                ua.push(clip(mu + laplace(&mut rng, lap_scale)));
            }
            gbs_angles.push(ga);
            uav_angles.push(ua);
        }
        let los_gbs = gbs_means[0];
        let los_uav = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);

        let n = cfg.n;
        let mut sv = Array2::zeros((cfg.l * cfg.k, n));
        for (i, theta) in gbs_angles.iter().flatten().enumerate() {
            sv.row_mut(i).assign(&steering(n, *theta));
        }
        let sv_los = steering(n, los_gbs);
        let fh = unitary_dft(n).t().mapv(|c| c.conj());
        Ok(Self {
            cfg: cfg.clone(),
            powers,
            gbs_angles,
            uav_angles,
            los_gbs,
            los_uav,
            sv,
            sv_los,
            fh,
            kf: cfg.kfactor(),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// Normalized cluster powers (sum to one).
    pub fn cluster_powers(&self) -> &[f64] {
        &self.powers
    }

    /// Expected power of every ray of one draw, `[cluster][ray]`, in the
    /// same layout as `G2uChannel::rays`.
    pub fn expected_ray_powers(&self, los: bool) -> Vec<Vec<f64>> {
        let diffuse = if los { 1.0 / (self.kf + 1.0) } else { 1.0 };
        let mut out: Vec<Vec<f64>> = self
            .powers
            .iter()
            .map(|p| vec![p * diffuse / self.cfg.k as f64; self.cfg.k])
            .collect();
        if los {
            out[0].push(self.kf / (self.kf + 1.0));
        }
        out
    }

    fn draw_gains<R: Rng + ?Sized>(&self, los: bool, rng: &mut R) -> (Vec<C64>, Option<C64>) {
        let diffuse = if los { 1.0 / (self.kf + 1.0) } else { 1.0 };
        let k = self.cfg.k;
        let mut gains = Vec::with_capacity(self.cfg.l * k);
        for p in &self.powers {
            let var = p * diffuse / k as f64;
            for _ in 0..k {
                gains.push(cn(rng, var));
            }
        }
        let los_gain = los.then(|| {
            let phase = rng.random_range(0.0..2.0 * PI);
            C64::from_polar((self.kf / (self.kf + 1.0)).sqrt(), phase)
        });
        (gains, los_gain)
    }

    /// Samples one G2U realization.
    pub fn draw_g2u<R: Rng + ?Sized>(&self, los: bool, rng: &mut R) -> G2uChannel {
        let (n, k) = (self.cfg.n, self.cfg.k);
        let (gains, los_gain) = self.draw_gains(los, rng);
        let mut h_td = Array2::<C64>::zeros((self.cfg.l, n));
        let mut rays = Vec::with_capacity(self.cfg.l);
        for l in 0..self.cfg.l {
            let mut row = h_td.row_mut(l);
            let mut cluster = Vec::with_capacity(k + 1);
            for r in 0..k {
                let i = l * k + r;
                let xi = gains[i];
                for (dst, a) in row.iter_mut().zip(self.sv.row(i).iter()) {
                    *dst += xi * a.conj();
                }
                cluster.push(ClusterRay { gain: xi, aod: self.gbs_angles[l][r], aoa: self.uav_angles[l][r] });
            }
            if l == 0 {
                if let Some(xi) = los_gain {
                    for (dst, a) in row.iter_mut().zip(self.sv_los.iter()) {
                        *dst += xi * a.conj();
                    }
                    cluster.push(ClusterRay { gain: xi, aod: self.los_gbs, aoa: self.los_uav });
                }
            }
            rays.push(cluster);
        }
        G2uChannel::assemble(h_td, &self.fh, self.cfg.la, los, rays)
    }

    /// Samples one U2G realization, scaled so that `E[|g|^2] = N`.
    pub fn draw_u2g<R: Rng + ?Sized>(&self, los: bool, rng: &mut R) -> U2gChannel {
        let (n, k, la) = (self.cfg.n, self.cfg.k, self.cfg.la);
        let (gains, los_gain) = self.draw_gains(los, rng);
        let tap0 = if los {
            (self.powers[0] + self.kf) / (self.kf + 1.0)
        } else {
            self.powers[0]
        };
        let scale = 1.0 / tap0.sqrt();
        let mut taps = Array2::<C64>::zeros((la, n));
        for l in 0..la {
            let mut row = taps.row_mut(l);
            for r in 0..k {
                let i = l * k + r;
                let xi = gains[i] * scale;
                for (dst, a) in row.iter_mut().zip(self.sv.row(i).iter()) {
                    *dst += xi * a;
                }
            }
            if l == 0 {
                if let Some(xi) = los_gain {
                    for (dst, a) in row.iter_mut().zip(self.sv_los.iter()) {
                        *dst += xi * scale * a;
                    }
                }
            }
        }
        let g = taps.row(0).to_owned();
        U2gChannel { g, taps, los }
    }
}

/// Noise variance for a given SNR in dB; `+inf` maps to zero.
pub fn noise_variance(snr_db: f64, e_u: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        e_u / 10f64.powf(snr_db / 10.0)
    }
}

/// LS estimate of the U2G taps modeled as `G + W`, `W ~ CN(0, sigma^2 / pilot_len)`.
pub fn ls_estimate_u2g<R: Rng + ?Sized>(
    u2g: &U2gChannel,
    snr_db: f64,
    pilot_len: usize,
    e_u: f64,
    rng: &mut R,
) -> Result<Array2<C64>> {
    if pilot_len < 1 {
        return Err(config_err("pilot_len must be >= 1"));
    }
    let sd = (noise_variance(snr_db, e_u) / pilot_len as f64).sqrt();
    let mut est = u2g.taps.clone();
    for v in est.iter_mut() {
        *v += cn(rng, 1.0) * sd;
    }
    Ok(est)
}

/// `[Re(G) | Im(G)]` row by row.
pub fn reshape_for_sensing(g_hat: &Array2<C64>) -> Array2<f64> {
    let (rows, n) = g_hat.dim();
    Array2::from_shape_fn((rows, 2 * n), |(r, c)| {
        if c < n {
            g_hat[[r, c]].re
        } else {
            g_hat[[r, c - n]].im
        }
    })
}

/// Inverse of [`reshape_for_sensing`].
pub fn unreshape_sensing(x: &Array2<f64>) -> Array2<C64> {
    let (rows, two_n) = x.dim();
    let n = two_n / 2;
    Array2::from_shape_fn((rows, n), |(r, c)| C64::new(x[[r, c]], x[[r, c + n]]))
}
