//! Audio decoding and MFCC feature extraction.

mod mel;
mod mfcc;
mod resample;
mod spectrogram;
mod wav;
mod window;

pub use mel::{hz_to_mel, mel_filterbank, mel_peak_frequencies, mel_to_hz};
pub use mfcc::{dct_ii_ortho, extract_song_features, log_mel, mfcc, mfcc_from_power, MfccVector, LOG_FLOOR};
pub use resample::resample_linear;
pub use spectrogram::{frame_count, hann_window, power_spectrogram, reflect_pad};
pub use wav::{decode_wav, encode_wav_pcm16, read_wav};
pub use window::{random_window, window_offset};

use serde::{Deserialize, Serialize};

use crate::MFCC_DIM;

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedCodec(String),
    #[error("WAV file contains no samples")]
    EmptyPayload,
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("clip too short: window needs {required_secs:.3} s but clip lasts {actual_secs:.3} s")]
    ClipTooShort { required_secs: f64, actual_secs: f64 },
    #[error("invalid MFCC configuration: {0}")]
    InvalidConfig(String),
    #[error("sample rate {actual} Hz does not match configured {expected} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// Decoded mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidClip(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Feature-extraction constants. Defaults follow the usual librosa settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub n_mfcc: usize,
    pub n_fft: usize,
    pub hop_length: usize,
    pub n_mels: usize,
    pub target_sample_rate: u32,
    pub window_seconds: f64,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_mfcc: MFCC_DIM,
            n_fft: 2048,
            hop_length: 512,
            n_mels: 128,
            target_sample_rate: 22_050,
            window_seconds: 5.0,
            fmin: 0.0,
            fmax: 11_025.0,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(AudioError::InvalidConfig(msg));
        if self.n_mfcc != MFCC_DIM {
            return fail(format!("n_mfcc must be {MFCC_DIM}, got {}", self.n_mfcc));
        }
        if self.n_mfcc > self.n_mels {
            return fail(format!("n_mfcc {} exceeds n_mels {}", self.n_mfcc, self.n_mels));
        }
        if self.n_fft < 2 || !self.n_fft.is_multiple_of(2) {
            return fail(format!("n_fft must be even and at least 2, got {}", self.n_fft));
        }
        if self.hop_length == 0 || self.hop_length > self.n_fft {
            return fail(format!(
                "hop_length must be in 1..={}, got {}",
                self.n_fft, self.hop_length
            ));
        }
        if self.target_sample_rate == 0 {
            return fail("target_sample_rate must be positive".into());
        }
        let nyquist = f64::from(self.target_sample_rate) / 2.0;
        if !(0.0 <= self.fmin && self.fmin < self.fmax && self.fmax <= nyquist) {
            return fail(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin={} fmax={}",
                self.fmin, self.fmax
            ));
        }
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return fail(format!("window_seconds must be positive, got {}", self.window_seconds));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_invariants() {
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AudioClip::new(vec![0.0, f64::NAN], 8000).is_err());
        let clip = AudioClip::new(vec![0.0; 44_100], 22_050).unwrap();
        assert_eq!(clip.duration_secs(), 2.0);
    }

    #[test]
    fn default_config_is_valid() {
        MfccConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_bounds() {
        let mut cfg = MfccConfig::default();
        cfg.fmax = 20_000.0;
        assert!(cfg.validate().is_err());
        let mut cfg = MfccConfig::default();
        cfg.hop_length = 4096;
        assert!(cfg.validate().is_err());
        let mut cfg = MfccConfig::default();
        cfg.n_mels = 20;
        assert!(cfg.validate().is_err());
    }
}
