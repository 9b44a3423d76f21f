use std::f64::consts::PI;

use super::{power_spectrogram, random_window, resample_linear, AudioClip, AudioError, MfccConfig, Result};
use super::mel::mel_filterbank;
use crate::{DenseMatrix, MFCC_DIM};

/// Energy floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// Frame-averaged MFCCs for one song.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccVector {
    pub song_id: String,
    values: Vec<f64>,
}

impl MfccVector {
    pub fn new(song_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != MFCC_DIM {
            return Err(AudioError::InvalidClip(format!(
                "MFCC vector must have {MFCC_DIM} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AudioError::InvalidClip("non-finite MFCC value".into()));
        }
        Ok(Self {
            song_id: song_id.into(),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_id(mut self, song_id: impl Into<String>) -> Self {
        self.song_id = song_id.into();
        self
    }
}

/// Orthonormal DCT-II basis, `n_out × n_in`.
pub fn dct_ii_ortho(n_out: usize, n_in: usize) -> DenseMatrix {
    let n = n_in as f64;
    DenseMatrix::from_fn(n_out, n_in, |k, i| {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()
    })
}

/// `ln(max(mel energy, LOG_FLOOR))`, frames × mel bands.
pub fn log_mel(power: &DenseMatrix, cfg: &MfccConfig) -> DenseMatrix {
    let fb = mel_filterbank(cfg);
    power.matmul_t(&fb).map(|e| e.max(LOG_FLOOR).ln())
}

/// Mel projection, log, DCT and frame mean over a precomputed power spectrogram.
pub fn mfcc_from_power(power: &DenseMatrix, cfg: &MfccConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if power.cols() != cfg.n_bins() {
        return Err(AudioError::InvalidConfig(format!(
            "spectrogram has {} bins, config expects {}",
            power.cols(),
            cfg.n_bins()
        )));
    }
    if power.rows() == 0 {
        return Err(AudioError::InvalidClip("spectrogram has no frames".into()));
    }
    let ceps = log_mel(power, cfg).matmul_t(&dct_ii_ortho(cfg.n_mfcc, cfg.n_mels));
    let frames = ceps.rows() as f64;
    Ok(ceps.col_sums().into_iter().map(|s| s / frames).collect())
}

/// 30 MFCCs averaged over all frames of `clip`. The clip must already be at
/// `cfg.target_sample_rate`; cutting the analysis window is the caller's job.
pub fn mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<MfccVector> {
    cfg.validate()?;
    if clip.sample_rate() != cfg.target_sample_rate {
        return Err(AudioError::SampleRateMismatch {
            expected: cfg.target_sample_rate,
            actual: clip.sample_rate(),
        });
    }
    let power = power_spectrogram(clip, cfg)?;
    MfccVector::new(String::new(), mfcc_from_power(&power, cfg)?)
}

/// Full per-song chain: resample, seeded random window, MFCC.
pub fn extract_song_features(clip: &AudioClip, cfg: &MfccConfig, seed: u64) -> Result<MfccVector> {
    cfg.validate()?;
    let clip = if clip.sample_rate() == cfg.target_sample_rate {
        clip.clone()
    } else {
        resample_linear(clip, cfg.target_sample_rate)?
    };
    let window = random_window(&clip, cfg.window_seconds, seed)?;
    mfcc(&window, cfg)
}
