//! Iterative radix-2 complex FFT and a square 2-D transform built from it.
//! Transforms are unnormalized; `Direction::Inverse` uses `e^{+2πi jk/n}`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Precomputed twiddles and bit-reversal table for one power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter("FFT length must be a power of two"));
        }
        let twiddles = (0..n / 2).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64)).collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process(&self, data: &mut [Complex64], dir: Direction) {
        debug_assert_eq!(data.len(), self.n);
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if dir == Direction::Inverse {
                        w = w.conj();
                    }
                    let u = data[start + k];
                    let v = data[start + k + half] * w;
                    data[start + k] = u + v;
                    data[start + k + half] = u - v;
                }
            }
            len *= 2;
        }
    }
}

/// Row-major `n × n` transform: rows, transpose, rows, transpose.
#[derive(Debug, Clone)]
pub struct Fft2d {
    line: Fft,
}

impl Fft2d {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self { line: Fft::new(n)? })
    }

    pub fn size(&self) -> usize {
        self.line.len()
    }

    pub fn process(&self, data: &mut [Complex64], dir: Direction) {
        let n = self.size();
        assert_eq!(data.len(), n * n, "2-D FFT buffer has the wrong length");
        for row in data.chunks_exact_mut(n) {
            self.line.process(row, dir);
        }
        self.finish_columns(data, dir);
    }

    /// Same as [`Self::process`] when every row outside `rows` is zero.
    pub fn process_sparse_rows(&self, data: &mut [Complex64], rows: &[usize], dir: Direction) {
        let n = self.size();
        assert_eq!(data.len(), n * n, "2-D FFT buffer has the wrong length");
        for &r in rows {
            self.line.process(&mut data[r * n..(r + 1) * n], dir);
        }
        self.finish_columns(data, dir);
    }

    fn finish_columns(&self, data: &mut [Complex64], dir: Direction) {
        let n = self.size();
        transpose(data, n);
        for row in data.chunks_exact_mut(n) {
            self.line.process(row, dir);
        }
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    extern crate std;

    fn naive(data: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = data.len();
        (0..n)
            .map(|k| {
                data.iter()
                    .enumerate()
                    .map(|(j, &x)| x * Complex64::from_polar(1.0, sign * 2.0 * PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n).map(|i| Complex64::new((i as f64 * 0.37).sin() + 0.1 * i as f64, (i as f64 * 1.3).cos())).collect()
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1, 2, 4, 8, 64, 256] {
            let x = signal(n);
            let mut y = x.clone();
            Fft::new(n).unwrap().process(&mut y, Direction::Forward);
            for (a, b) in y.iter().zip(naive(&x, -1.0)) {
                assert!((a - b).norm() < 1e-10 * n as f64);
            }
            let mut z = x.clone();
            Fft::new(n).unwrap().process(&mut z, Direction::Inverse);
            for (a, b) in z.iter().zip(naive(&x, 1.0)) {
                assert!((a - b).norm() < 1e-10 * n as f64);
            }
        }
        assert!(Fft::new(12).is_err());
    }

    #[test]
    fn two_dimensional_round_trip_and_sparse_rows() {
        let n = 64;
        let mut data: Vec<Complex64> = signal(n * n);
        for r in 0..n {
            if r % 5 != 0 {
                for c in 0..n {
                    data[r * n + c] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let rows: Vec<usize> = (0..n).filter(|r| r % 5 == 0).collect();
        let plan = Fft2d::new(n).unwrap();
        let mut dense = data.clone();
        plan.process(&mut dense, Direction::Inverse);
        let mut sparse = data.clone();
        plan.process_sparse_rows(&mut sparse, &rows, Direction::Inverse);
        assert_eq!(dense, sparse);
        // Single plane wave lands where expected.
        let mut wave = std::vec![Complex64::new(0.0, 0.0); n * n];
        wave[3 * n + 5] = Complex64::new(1.0, 0.0);
        plan.process(&mut wave, Direction::Inverse);
        let expect = Complex64::from_polar(1.0, 2.0 * PI * (3.0 * 7.0 + 5.0 * 11.0) / n as f64);
        assert!((wave[7 * n + 11] - expect).norm() < 1e-12);
        plan.process(&mut dense, Direction::Forward);
        for (a, b) in dense.iter().zip(data.iter()) {
            assert!((a / (n * n) as f64 - b).norm() < 1e-10);
        }
    }
}
