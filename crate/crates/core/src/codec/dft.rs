//! Square 2D DFT pair on row-major buffers.
//!
//! The forward transform carries the `1/n^2` factor and the inverse is
//! unscaled, so `inverse(forward(x)) == x`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Dft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Dft2 {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "transform size must be positive");
        let mut planner = FftPlanner::new();
        Dft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `X[i][j] = 1/n^2 * sum I[a][b] e^{-i 2 pi (ia + jb) / n}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
        let scale = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// `I[a][b] = sum X[i][j] e^{+i 2 pi (ia + jb) / n}`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
    }

    fn apply(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not {n}x{n}");
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

pub fn forward_real(n: usize, plane: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Dft2::new(n).forward(&mut buf);
    buf
}
