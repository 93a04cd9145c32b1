//! UAV transmitter: CSI compression, Walsh spreading, QPSK and superposition.

use crate::error::{config_err, Error, Result};
use crate::linalg::{fwht, norm_sqr, C64};
use crate::rng::{cn, stream, Stream};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use std::f64::consts::FRAC_1_SQRT_2;

/// Random `LaN x N` compression matrix with i.i.d. `CN(0, 1/(LaN))` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionMatrix {
    pub phi: Array2<C64>,
    pub seed: u64,
}

impl CompressionMatrix {
    pub fn generate(la_n: usize, n: usize, seed: u64) -> Result<Self> {
        if la_n == 0 || n == 0 {
            return Err(config_err("compression matrix dimensions must be positive"));
        }
        let mut rng = stream(seed, Stream::Compression, 0);
        let var = 1.0 / la_n as f64;
        let phi = Array2::from_shape_simple_fn((la_n, n), || cn(&mut rng, var));
        Ok(Self { phi, seed })
    }

    pub fn from_matrix(phi: Array2<C64>, seed: u64) -> Self {
        Self { phi, seed }
    }

    pub fn input_len(&self) -> usize {
        self.phi.nrows()
    }

    pub fn output_len(&self) -> usize {
        self.phi.ncols()
    }
}

/// Compresses `h` to `z = h Phi / z_norm` with `z_norm = |h Phi| / sqrt(N)`.
pub fn compress(h: ArrayView1<C64>, phi: &CompressionMatrix) -> Result<(Array1<C64>, f64)> {
    if h.len() != phi.input_len() {
        return Err(Error::Shape {
            what: "h".into(),
            expected: vec![phi.input_len()],
            found: vec![h.len()],
        });
    }
    let z_raw = h.dot(&phi.phi);
    let e = norm_sqr(z_raw.as_slice().expect("contiguous"));
    if e == 0.0 {
        return Err(Error::DegenerateCsi);
    }
    let z_norm = e.sqrt() / (phi.output_len() as f64).sqrt();
    Ok((z_raw.mapv(|c| c / z_norm), z_norm))
}

/// `M x N` matrix of +-1 codes with orthogonal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingMatrix {
    m: usize,
    n: usize,
    entries: Vec<i8>,
    walsh: bool,
}

impl SpreadingMatrix {
    /// First `n` columns of the `m x m` Sylvester-Hadamard matrix.
    pub fn walsh(m: usize, n: usize) -> Result<Self> {
        if !m.is_power_of_two() {
            return Err(config_err(format!("spreading length M = {m} must be a power of two")));
        }
        if n == 0 || n > m {
            return Err(config_err(format!("code count {n} must satisfy 1 <= n <= M = {m}")));
        }
        let mut entries = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                entries.push(if (i & j).count_ones() % 2 == 0 { 1 } else { -1 });
            }
        }
        Ok(Self { m, n, entries, walsh: true })
    }

    /// Arbitrary +-1 matrix given row-major; columns must be orthogonal.
    pub fn from_entries(m: usize, n: usize, entries: Vec<i8>) -> Result<Self> {
        if entries.len() != m * n || n == 0 {
            return Err(config_err("spreading matrix entry count must equal m * n"));
        }
        if entries.iter().any(|&e| e != 1 && e != -1) {
            return Err(config_err("spreading matrix entries must be +1 or -1"));
        }
        let q = Self { m, n, entries, walsh: false };
        let gram = q.gram();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { m as i64 } else { 0 };
                if gram[i * n + j] != want {
                    return Err(config_err("spreading matrix columns are not orthogonal"));
                }
            }
        }
        Ok(q)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n + j]
    }

    /// `Q^T Q` in exact integer arithmetic, row-major `n x n`.
    pub fn gram(&self) -> Vec<i64> {
        let n = self.n;
        let mut g = vec![0i64; n * n];
        for row in self.entries.chunks(n) {
            for a in 0..n {
                let ra = row[a] as i64;
                for b in 0..n {
                    g[a * n + b] += ra * row[b] as i64;
                }
            }
        }
        g
    }

    /// `z Q^T` without normalization (length `M`).
    pub fn mix(&self, z: ArrayView1<C64>) -> Array1<C64> {
        assert_eq!(z.len(), self.n, "code vector length");
        if self.walsh {
            let mut buf = vec![C64::new(0.0, 0.0); self.m];
            for (b, v) in buf.iter_mut().zip(z.iter()) {
                *b = *v;
            }
            fwht(&mut buf);
            Array1::from_vec(buf)
        } else {
            Array1::from_shape_fn(self.m, |i| {
                let row = &self.entries[i * self.n..(i + 1) * self.n];
                row.iter().zip(z.iter()).map(|(&q, v)| v * q as f64).sum()
            })
        }
    }

    /// `Y Q` without normalization: `rows x n`.
    pub fn correlate(&self, y: ArrayView2<C64>) -> Array2<C64> {
        assert_eq!(y.ncols(), self.m, "received block width");
        let mut out = Array2::zeros((y.nrows(), self.n));
        let mut buf = vec![C64::new(0.0, 0.0); self.m];
        for (r, row) in y.rows().into_iter().enumerate() {
            if self.walsh {
                for (b, v) in buf.iter_mut().zip(row.iter()) {
                    *b = *v;
                }
                fwht(&mut buf);
                for j in 0..self.n {
                    out[[r, j]] = buf[j];
                }
            } else {
                for j in 0..self.n {
                    let mut acc = C64::new(0.0, 0.0);
                    for (i, v) in row.iter().enumerate() {
                        acc += v * self.get(i, j) as f64;
                    }
                    out[[r, j]] = acc;
                }
            }
        }
        out
    }
}

/// `s = z Q^T / sqrt(N)`.
pub fn spread(z: ArrayView1<C64>, q: &SpreadingMatrix) -> Array1<C64> {
    let scale = 1.0 / (q.n() as f64).sqrt();
    q.mix(z).mapv(|c| c * scale)
}

/// `x = sqrt(rho E_u) s + sqrt((1 - rho) E_u) d`.
pub fn superimpose(s: ArrayView1<C64>, d: ArrayView1<C64>, rho: f64, e_u: f64) -> Result<Array1<C64>> {
    check_power_split(rho, e_u)?;
    if s.len() != d.len() {
        return Err(Error::Shape { what: "d".into(), expected: vec![s.len()], found: vec![d.len()] });
    }
    let a = (rho * e_u).sqrt();
    let b = ((1.0 - rho) * e_u).sqrt();
    Ok(Array1::from_shape_fn(s.len(), |i| s[i] * a + d[i] * b))
}

pub(crate) fn check_power_split(rho: f64, e_u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(config_err(format!("rho = {rho} outside [0, 1]")));
    }
    if !(e_u > 0.0 && e_u.is_finite()) {
        return Err(config_err(format!("E_u = {e_u} must be positive")));
    }
    Ok(())
}

/// Gray-mapped QPSK, `d = ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
pub fn modulate_qpsk(bits: &[u8]) -> Result<Array1<C64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::Format(format!("QPSK needs an even bit count, got {}", bits.len())));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::Format("bits must be 0 or 1".into()));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|p| {
            C64::new(
                (1.0 - 2.0 * p[0] as f64) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * p[1] as f64) * FRAC_1_SQRT_2,
            )
        })
        .collect())
}

/// Hard QPSK demapping; a component that is exactly zero maps to bit 0.
pub fn demap_qpsk(d: &[C64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(2 * d.len());
    for c in d {
        bits.push((c.re < 0.0) as u8);
        bits.push((c.im < 0.0) as u8);
    }
    bits
}

/// Remodulated hard decisions of soft symbols.
pub fn hard_qpsk(d: &[C64]) -> Array1<C64> {
    d.iter()
        .map(|c| {
            C64::new(
                if c.re < 0.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
                if c.im < 0.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
            )
        })
        .collect()
}

pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(count);
    while bits.len() < count {
        let w: u64 = rng.random();
        for k in 0..64.min(count - bits.len()) {
            bits.push(((w >> k) & 1) as u8);
        }
    }
    bits
}
