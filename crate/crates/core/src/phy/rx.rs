//! gBS receiver: despreading, scalar LMMSE estimation of the spread CSI,
//! two-stage interference cancellation and data detection.

use super::tx::{check_power_split, hard_qpsk, SpreadingMatrix};
use crate::error::{config_err, Error, Result};
use crate::linalg::{norm_sqr_arr, C64};
use crate::rng::cn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    #[default]
    Lmmse,
    /// Drops the noise and interference terms from every denominator.
    Zf,
}

/// Power split and noise level of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub rho: f64,
    pub e_u: f64,
    /// Noise variance per received entry; zero means noise-free.
    pub sigma2: f64,
    pub detector: Detector,
}

impl LinkParams {
    pub fn new(rho: f64, e_u: f64, sigma2: f64, detector: Detector) -> Result<Self> {
        check_power_split(rho, e_u)?;
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(config_err(format!("noise variance {sigma2} must be finite and >= 0")));
        }
        Ok(Self { rho, e_u, sigma2, detector })
    }

    /// `snr_db = 10 log10(E_u / sigma^2)`; `+inf` gives a noise-free link.
    pub fn from_snr_db(snr_db: f64, rho: f64, e_u: f64, detector: Detector) -> Result<Self> {
        Self::new(rho, e_u, crate::channel::noise_variance(snr_db, e_u), detector)
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.e_u / self.sigma2).log10()
    }

    fn csi_amp(&self, codes: usize) -> f64 {
        (self.rho * self.e_u / codes as f64).sqrt()
    }

    fn data_amp(&self) -> f64 {
        ((1.0 - self.rho) * self.e_u).sqrt()
    }

    /// Data power left in the signal before any data cancellation.
    pub fn data_power(&self) -> f64 {
        (1.0 - self.rho) * self.e_u
    }
}

/// `Y = g x^T + W`, `W ~ CN(0, sigma^2)` per entry, drawn row by row.
pub fn receive<R: Rng + ?Sized>(x: ArrayView1<C64>, g: ArrayView1<C64>, sigma2: f64, rng: &mut R) -> Array2<C64> {
    let sd = sigma2.sqrt();
    let mut y = Array2::zeros((g.len(), x.len()));
    for (r, mut row) in y.rows_mut().into_iter().enumerate() {
        let gr = g[r];
        for (m, v) in row.iter_mut().enumerate() {
            *v = gr * x[m] + cn(rng, 1.0) * sd;
        }
    }
    y
}

/// `V = Y Q / M`.
pub fn despread(y: ArrayView2<C64>, q: &SpreadingMatrix) -> Array2<C64> {
    let inv = 1.0 / q.m() as f64;
    q.correlate(y).mapv(|c| c * inv)
}

fn check_link(g_hat: ArrayView1<C64>) -> Result<f64> {
    let gn2 = norm_sqr_arr(&g_hat.to_owned());
    if gn2 == 0.0 || !gn2.is_finite() {
        return Err(Error::DegenerateLink);
    }
    Ok(gn2)
}

/// Scalar LMMSE of the unit-power code symbols from the despread block.
///
/// `data_power` is the power of the data component still present in `V`
/// (`(1 - rho) E_u` before data cancellation, zero after it).
pub fn lmmse_csi(
    v: ArrayView2<C64>,
    g_hat: ArrayView1<C64>,
    link: &LinkParams,
    m: usize,
    data_power: f64,
) -> Result<Array1<C64>> {
    if v.nrows() != g_hat.len() {
        return Err(Error::Shape { what: "V rows".into(), expected: vec![g_hat.len()], found: vec![v.nrows()] });
    }
    let gn2 = check_link(g_hat)?;
    let a = link.csi_amp(v.ncols());
    let mut den = a * a * gn2 * gn2;
    if link.detector == Detector::Lmmse {
        den += gn2 * gn2 * data_power / m as f64 + gn2 * link.sigma2 / m as f64;
    }
    if den == 0.0 {
        return Ok(Array1::zeros(v.ncols()));
    }
    let coef = a * gn2 / den;
    let gc = g_hat.mapv(|c| c.conj());
    Ok(gc.dot(&v).mapv(|u| u * coef))
}

/// `Y - sqrt(rho E_u / N) g_hat (z_est Q^T)`.
pub fn cancel_csi(
    y: ArrayView2<C64>,
    g_hat: ArrayView1<C64>,
    z_est: ArrayView1<C64>,
    link: &LinkParams,
    q: &SpreadingMatrix,
) -> Array2<C64> {
    let a = link.csi_amp(q.n());
    let mix = q.mix(z_est);
    rank1_subtract(y, g_hat, mix.view(), a)
}

fn rank1_subtract(y: ArrayView2<C64>, g: ArrayView1<C64>, x: ArrayView1<C64>, amp: f64) -> Array2<C64> {
    let mut out = y.to_owned();
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        let gr = g[r] * amp;
        Zip::from(&mut row).and(&x).for_each(|o, xv| *o -= gr * xv);
    }
    out
}

/// Soft LMMSE data symbols from a CSI-cancelled block.
pub fn lmmse_data(y: ArrayView2<C64>, g_hat: ArrayView1<C64>, link: &LinkParams) -> Result<Array1<C64>> {
    if y.nrows() != g_hat.len() {
        return Err(Error::Shape { what: "Y rows".into(), expected: vec![g_hat.len()], found: vec![y.nrows()] });
    }
    let gn2 = check_link(g_hat)?;
    let b = link.data_amp();
    let mut den = b * b * gn2;
    if link.detector == Detector::Lmmse {
        den += link.sigma2;
    }
    if den == 0.0 {
        return Ok(Array1::zeros(y.ncols()));
    }
    let coef = b / den;
    let gc = g_hat.mapv(|c| c.conj());
    Ok(gc.dot(&y).mapv(|u| u * coef))
}

/// `Y - sqrt((1 - rho) E_u) g_hat d_init^T`.
pub fn cancel_data(y: ArrayView2<C64>, g_hat: ArrayView1<C64>, d_init: ArrayView1<C64>, link: &LinkParams) -> Array2<C64> {
    rank1_subtract(y, g_hat, d_init, link.data_amp())
}

/// Cancels known data symbols and re-estimates the code symbols.
pub fn reestimate_csi(
    y: ArrayView2<C64>,
    g_hat: ArrayView1<C64>,
    d: ArrayView1<C64>,
    link: &LinkParams,
    q: &SpreadingMatrix,
) -> Result<Array1<C64>> {
    let clean = cancel_data(y, g_hat, d, link);
    lmmse_csi(despread(clean.view(), q).view(), g_hat, link, q.m(), 0.0)
}

/// Output of the one-cycle estimation front end.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialFeature {
    /// Refined estimate after data cancellation.
    pub z_hat: Array1<C64>,
    /// First-pass estimate with the data still present.
    pub z_first: Array1<C64>,
    /// Remodulated hard decisions used for data cancellation.
    pub d_init: Array1<C64>,
}

/// despread, estimate, cancel CSI, detect, cancel data, despread, estimate.
pub fn initial_feature(
    y: ArrayView2<C64>,
    g_hat: ArrayView1<C64>,
    link: &LinkParams,
    q: &SpreadingMatrix,
) -> Result<InitialFeature> {
    let v = despread(y, q);
    let z_first = lmmse_csi(v.view(), g_hat, link, q.m(), link.data_power())?;
    let y_c = cancel_csi(y, g_hat, z_first.view(), link, q);
    let d_soft = lmmse_data(y_c.view(), g_hat, link)?;
    let d_init = hard_qpsk(d_soft.as_slice().expect("contiguous"));
    let z_hat = reestimate_csi(y, g_hat, d_init.view(), link, q)?;
    Ok(InitialFeature { z_hat, z_first, d_init })
}

/// Soft data after cancelling a given CSI estimate.
pub fn detect_data(
    y: ArrayView2<C64>,
    g_hat: ArrayView1<C64>,
    z_est: ArrayView1<C64>,
    link: &LinkParams,
    q: &SpreadingMatrix,
) -> Result<Array1<C64>> {
    let y_c = cancel_csi(y, g_hat, z_est, link, q);
    lmmse_data(y_c.view(), g_hat, link)
}

/// Uncompressed superimposed feedback: the full (unit-power) channel vector
/// is spread over `q8.n()` codes and refined over `iters` estimate/cancel
/// cycles. Returns the channel estimate and the final soft data.
pub fn ref8_baseline(
    y: ArrayView2<C64>,
    g_hat: ArrayView1<C64>,
    link: &LinkParams,
    q8: &SpreadingMatrix,
    iters: usize,
) -> Result<(Array1<C64>, Array1<C64>)> {
    if iters == 0 {
        return Err(config_err("ref8 baseline needs at least one iteration"));
    }
    if y.ncols() != q8.m() {
        return Err(Error::Shape { what: "Y columns".into(), expected: vec![q8.m()], found: vec![y.ncols()] });
    }
    let v = despread(y, q8);
    let mut h_est = lmmse_csi(v.view(), g_hat, link, q8.m(), link.data_power())?;
    for _ in 0..iters {
        let d_soft = detect_data(y, g_hat, h_est.view(), link, q8)?;
        let d = hard_qpsk(d_soft.as_slice().expect("contiguous"));
        h_est = reestimate_csi(y, g_hat, d.view(), link, q8)?;
    }
    let d_soft = detect_data(y, g_hat, h_est.view(), link, q8)?;
    Ok((h_est, d_soft))
}
