use super::{AudioClip, Result};

/// Linear-interpolation resampler.
pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    let src_rate = clip.sample_rate();
    if src_rate == target_rate || clip.is_empty() {
        return AudioClip::new(clip.samples().to_vec(), target_rate);
    }
    let src = clip.samples();
    let ratio = f64::from(src_rate) / f64::from(target_rate);
    let out_len = ((src.len() as f64) / ratio).round().max(1.0) as usize;
    let last = src.len() - 1;
    let out = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let j = (pos.floor() as usize).min(last);
            let frac = pos - j as f64;
            let next = src[(j + 1).min(last)];
            src[j] + (next - src[j]) * frac
        })
        .collect();
    AudioClip::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_duration_and_linear_signals() {
        let src: Vec<f64> = (0..16_000).map(|i| i as f64 / 16_000.0).collect();
        let clip = AudioClip::new(src, 16_000).unwrap();
        let out = resample_linear(&clip, 22_050).unwrap();
        assert_eq!(out.len(), 22_050);
        assert!((out.duration_secs() - 1.0).abs() < 1e-9);
        for (i, &v) in out.samples().iter().enumerate().take(22_000) {
            let t = i as f64 * 16_000.0 / 22_050.0 / 16_000.0;
            assert!((v - t).abs() < 1e-9);
        }
    }

    #[test]
    fn same_rate_is_identity() {
        let clip = AudioClip::new(vec![0.1, -0.2, 0.3], 8000).unwrap();
        assert_eq!(resample_linear(&clip, 8000).unwrap(), clip);
    }
}
