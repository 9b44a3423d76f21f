use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AudioClip, AudioError, MfccConfig, Result};
use crate::DenseMatrix;

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mirror-pads `pad` samples on both ends without repeating the edge sample
/// (`[a b c d]` padded by 2 is `[c b a b c d c b]`). Pads wider than the
/// signal keep folding back and forth.
pub fn reflect_pad(samples: &[f64], pad: usize) -> Vec<f64> {
    let n = samples.len();
    assert!(n > 0, "cannot pad an empty signal");
    let reflect = |i: isize| -> usize {
        if n == 1 {
            return 0;
        }
        let period = 2 * (n as isize - 1);
        let m = i.rem_euclid(period);
        (if m < n as isize { m } else { period - m }) as usize
    };
    (-(pad as isize)..(n + pad) as isize)
        .map(|i| samples[reflect(i)])
        .collect()
}

/// Frames produced for a signal of `len` samples with centered framing.
pub fn frame_count(len: usize, n_fft: usize, hop: usize) -> usize {
    1 + (len + 2 * (n_fft / 2) - n_fft) / hop
}

/// Squared-magnitude STFT: centered frames of `n_fft` samples every
/// `hop_length`, reflect padding of `n_fft / 2`, Hann weighting.
/// Rows are frames, columns the `n_fft / 2 + 1` non-negative frequency bins.
pub fn power_spectrogram(clip: &AudioClip, cfg: &MfccConfig) -> Result<DenseMatrix> {
    if clip.is_empty() {
        return Err(AudioError::InvalidClip("empty clip".into()));
    }
    let n_fft = cfg.n_fft;
    let hop = cfg.hop_length;
    let bins = n_fft / 2 + 1;
    let padded = reflect_pad(clip.samples(), n_fft / 2);
    let frames = frame_count(clip.len(), n_fft, hop);
    let window = hann_window(n_fft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = DenseMatrix::zeros(frames, bins);
    for f in 0..frames {
        let start = f * hop;
        for ((b, &x), &w) in buf.iter_mut().zip(&padded[start..start + n_fft]).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (o, c) in out.row_mut(f).iter_mut().zip(&buf[..bins]) {
            *o = c.norm_sqr();
        }
    }
    Ok(out)
}
