//! Small complex-vector helpers shared by the channel and PHY code.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;

/// Unitary DFT matrix, `F[m][n] = exp(-j 2 pi m n / N) / sqrt(N)`.
pub fn unitary_dft(n: usize) -> Array2<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    Array2::from_shape_fn((n, n), |(m, k)| {
        let ph = -2.0 * PI * ((m * k) % n) as f64 / n as f64;
        C64::from_polar(scale, ph)
    })
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

pub fn norm_sqr_arr(v: &Array1<C64>) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// `[Re(v) | Im(v)]`.
pub fn to_real(v: &[C64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.len());
    out.extend(v.iter().map(|c| c.re));
    out.extend(v.iter().map(|c| c.im));
    out
}

/// Inverse of [`to_real`]. Panics on odd length.
pub fn from_real(x: &[f64]) -> Vec<C64> {
    assert!(x.len() % 2 == 0, "real form must have even length");
    let h = x.len() / 2;
    (0..h).map(|i| C64::new(x[i], x[h + i])).collect()
}

/// In-place unnormalized Walsh-Hadamard transform in Sylvester order.
///
/// For a power-of-two length `M`, `out[j] = sum_i x[i] * H[i][j]` with
/// `H[i][j] = (-1)^popcount(i & j)`.
pub fn fwht(x: &mut [C64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let a = x[i];
                let b = x[i + h];
                x[i] = a + b;
                x[i + h] = a - b;
            }
        }
        h *= 2;
    }
}
