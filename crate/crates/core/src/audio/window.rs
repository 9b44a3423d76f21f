use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AudioClip, AudioError, Result};

/// Start offset of a `window_len`-sample window drawn uniformly from the
/// `clip_len - window_len + 1` valid positions.
pub fn window_offset(clip_len: usize, window_len: usize, seed: u64) -> Option<usize> {
    if window_len > clip_len {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Some(rng.random_range(0..=clip_len - window_len))
}

/// Cuts `round(seconds · sample_rate)` contiguous samples at a seeded random offset.
pub fn random_window(clip: &AudioClip, seconds: f64, seed: u64) -> Result<AudioClip> {
    let window_len = (seconds * f64::from(clip.sample_rate())).round() as usize;
    let offset = window_offset(clip.len(), window_len, seed).ok_or(AudioError::ClipTooShort {
        required_secs: seconds,
        actual_secs: clip.duration_secs(),
    })?;
    AudioClip::new(
        clip.samples()[offset..offset + window_len].to_vec(),
        clip.sample_rate(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn ramp(seconds: f64, sr: u32) -> AudioClip {
        let n = (seconds * f64::from(sr)) as usize;
        AudioClip::new((0..n).map(|i| i as f64 / n as f64).collect(), sr).unwrap()
    }

    #[test]
    fn exact_length_clip_is_returned_whole() {
        let clip = ramp(5.0, 22_050);
        assert_eq!(random_window(&clip, 5.0, 99).unwrap(), clip);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let clip = ramp(30.0, 22_050);
        let a = random_window(&clip, 5.0, 1234).unwrap();
        let b = random_window(&clip, 5.0, 1234).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 110_250);
    }

    #[test]
    fn short_clip_reports_durations() {
        let clip = ramp(3.0, 22_050);
        match random_window(&clip, 5.0, 0) {
            Err(AudioError::ClipTooShort {
                required_secs,
                actual_secs,
            }) => {
                assert_eq!(required_secs, 5.0);
                assert!((actual_secs - 3.0).abs() < 1e-9);
            }
            other => panic!("expected ClipTooShort, got {other:?}"),
        }
    }

    #[test]
    fn offsets_are_uniform_over_valid_range() {
        let sr = 22_050usize;
        let clip_len = 30 * sr;
        let window_len = 5 * sr;
        let positions = clip_len - window_len + 1;
        let bins = 20usize;
        let mut counts = vec![0usize; bins];
        let seeds = 10_000u64;
        for seed in 0..seeds {
            let off = window_offset(clip_len, window_len, seed).unwrap();
            assert!(off + window_len <= clip_len);
            counts[off * bins / positions] += 1;
        }
        let expected = seeds as f64 / bins as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "chi-square {stat}, p = {p}");
    }
}
