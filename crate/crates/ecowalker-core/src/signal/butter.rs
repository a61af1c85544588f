//! Digital Butterworth low-pass design (second-order sections) and
//! zero-phase forward-backward application.
//!
//! The design path is the classical one: analog Butterworth prototype poles,
//! cutoff prewarping, bilinear transform, conjugate poles paired into
//! biquads, each section normalized to unit DC gain. Zero-phase filtering
//! runs the cascade forward and backward over an odd-reflection padded
//! signal with each pass started from its steady state, so constants pass
//! through bit-near-exactly and symmetric inputs stay symmetric.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("filter order must be at least 1 (got {0})")]
    BadOrder(usize),
    #[error("cutoff {cutoff} Hz invalid for sample rate {fs} Hz (need 0 < cutoff < fs/2)")]
    BadCutoff { cutoff: f64, fs: f64 },
    #[error("signal too short for zero-phase filtering ({len} samples, need > {need})")]
    TooShort { len: usize, need: usize },
}

/// One second-order section with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Direct-form-II-transposed state that makes a constant input `x`
    /// produce `dc_gain * x` from the first sample.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let g = self.dc_gain();
        [(g - self.b0) * x, (self.b2 - self.a2 * g) * x]
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    sections: Vec<Biquad>,
    order: usize,
}

/// Designs a low-pass Butterworth of the given order.
pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs_hz: f64) -> Result<Sos, FilterError> {
    if order == 0 {
        return Err(FilterError::BadOrder(order));
    }
    if !(cutoff_hz > 0.0) || !(fs_hz > 0.0) || cutoff_hz >= fs_hz / 2.0 {
        return Err(FilterError::BadCutoff { cutoff: cutoff_hz, fs: fs_hz });
    }

    // Prewarped analog cutoff so the digital response crosses -3 dB at
    // exactly cutoff_hz after the bilinear transform.
    let k = 2.0 * fs_hz;
    let wc = k * (std::f64::consts::PI * cutoff_hz / fs_hz).tan();

    let mut sections = Vec::with_capacity(order.div_ceil(2));

    // Real pole for odd orders: s = -wc, mapped to z = (k + s)/(k - s).
    if order % 2 == 1 {
        let zp = (k - wc) / (k + wc);
        let a1 = -zp;
        // Numerator (1 + z^-1) scaled to unit DC gain.
        let g = (1.0 + a1) / 2.0;
        sections.push(Biquad { b0: g, b1: g, b2: 0.0, a1, a2: 0.0 });
    }

    // Conjugate pole pairs. Left-half-plane prototype angles.
    let n = order as f64;
    for i in 0..order / 2 {
        let theta = std::f64::consts::PI * (2.0 * i as f64 + n + 1.0) / (2.0 * n);
        let (s_re, s_im) = (wc * theta.cos(), wc * theta.sin());
        // Bilinear transform of the complex pole.
        let den = (k - s_re) * (k - s_re) + s_im * s_im;
        let z_re = ((k + s_re) * (k - s_re) - s_im * s_im) / den;
        let z_im = (s_im * (k - s_re) + s_im * (k + s_re)) / den;
        let a1 = -2.0 * z_re;
        let a2 = z_re * z_re + z_im * z_im;
        // Numerator (1 + z^-1)^2 scaled to unit DC gain.
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Biquad { b0: g, b1: 2.0 * g, b2: g, a1, a2 });
    }

    Ok(Sos { sections, order })
}

impl Sos {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Single forward pass with every section started at the steady state
    /// for the first input sample.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        if y.is_empty() {
            return y;
        }
        for sec in &self.sections {
            let mut state = sec.steady_state(y[0]);
            for v in y.iter_mut() {
                let x_in = *v;
                let out = sec.b0 * x_in + state[0];
                state[0] = sec.b1 * x_in - sec.a1 * out + state[1];
                state[1] = sec.b2 * x_in - sec.a2 * out;
                *v = out;
            }
        }
        y
    }

    /// Default pad length for [`Sos::filtfilt`]: three filter lengths.
    pub fn default_padlen(&self) -> usize {
        3 * (2 * self.order + 1)
    }

    /// Zero-phase forward-backward filtering with odd-reflection padding of
    /// at least three filter lengths.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>, FilterError> {
        let padlen = self.default_padlen();
        if x.len() <= padlen {
            return Err(FilterError::TooShort { len: x.len(), need: padlen });
        }
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        // Odd reflection about the first and last samples.
        for i in (1..=padlen).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=padlen {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }

        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        Ok(y[padlen..padlen + n].to_vec())
    }

    /// Single-pass magnitude response at frequency `f` for sample rate `fs`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f / fs;
        let (zr, zi) = (w.cos(), -w.sin()); // z^-1
        let mut mag = 1.0;
        for s in &self.sections {
            // num = b0 + b1 z^-1 + b2 z^-2, den = 1 + a1 z^-1 + a2 z^-2.
            let z2r = zr * zr - zi * zi;
            let z2i = 2.0 * zr * zi;
            let nr = s.b0 + s.b1 * zr + s.b2 * z2r;
            let ni = s.b1 * zi + s.b2 * z2i;
            let dr = 1.0 + s.a1 * zr + s.a2 * z2r;
            let di = s.a1 * zi + s.a2 * z2i;
            mag *= (nr * nr + ni * ni).sqrt() / (dr * dr + di * di).sqrt();
        }
        mag
    }
}
