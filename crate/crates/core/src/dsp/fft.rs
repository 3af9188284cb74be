use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward complex FFT of a real signal (length must already be the transform size).
pub fn fft_forward(signal: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse FFT normalized by `1/n`, returning the real part.
pub fn fft_inverse(spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Reusable real-input one-sided magnitude transform of a fixed size.
pub(crate) struct MagnitudeFft {
    size: usize,
    plan: std::sync::Arc<dyn rustfft::Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl MagnitudeFft {
    pub(crate) fn new(size: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_forward(size);
        let scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        Self {
            size,
            plan,
            buf: vec![Complex64::default(); size],
            scratch,
        }
    }

    /// Writes `|X_k|^2` for k in 0..=size/2 of the windowed, zero-padded frame.
    pub(crate) fn power(&mut self, frame: &[f64], window: &[f64], out: &mut [f64]) {
        debug_assert!(frame.len() <= self.size && window.len() == frame.len());
        for (i, slot) in self.buf.iter_mut().enumerate() {
            *slot = if i < frame.len() {
                Complex64::new(frame[i] * window[i], 0.0)
            } else {
                Complex64::default()
            };
        }
        self.plan
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, c) in out.iter_mut().zip(&self.buf[..=self.size / 2]) {
            *o = c.norm_sqr();
        }
    }
}
