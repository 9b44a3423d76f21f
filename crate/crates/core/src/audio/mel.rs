use super::MfccConfig;
use crate::DenseMatrix;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Filter edge frequencies: `n_mels + 2` points equally spaced in mel between
/// `fmin` and `fmax`. Filter `i` rises over `[f_i, f_{i+1}]` and falls over
/// `[f_{i+1}, f_{i+2}]`.
fn mel_edges(cfg: &MfccConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.fmin);
    let hi = hz_to_mel(cfg.fmax);
    let steps = (cfg.n_mels + 1) as f64;
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / steps))
        .collect()
}

/// Centre (peak) frequency of each triangular filter, in Hz.
pub fn mel_peak_frequencies(cfg: &MfccConfig) -> Vec<f64> {
    let edges = mel_edges(cfg);
    edges[1..=cfg.n_mels].to_vec()
}

/// Triangular mel filterbank, `n_mels × (n_fft/2 + 1)`, area-normalized so
/// each filter's weights scale by `2 / (f_{i+2} - f_i)`.
pub fn mel_filterbank(cfg: &MfccConfig) -> DenseMatrix {
    let edges = mel_edges(cfg);
    let sr = f64::from(cfg.target_sample_rate);
    let bins = cfg.n_bins();
    let bin_hz: Vec<f64> = (0..bins).map(|k| k as f64 * sr / cfg.n_fft as f64).collect();
    DenseMatrix::from_fn(cfg.n_mels, bins, |m, k| {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let f = bin_hz[k];
        let rising = (f - left) / (centre - left);
        let falling = (right - f) / (right - centre);
        let tri = rising.min(falling).max(0.0);
        tri * 2.0 / (right - left)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_of_700_hz() {
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn every_filter_has_positive_weight() {
        let fb = mel_filterbank(&MfccConfig::default());
        assert_eq!(fb.shape(), (128, 1025));
        for row in fb.iter_rows() {
            assert!(row.iter().any(|&w| w > 0.0));
            assert!(row.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn peaks_strictly_increase_and_match_formula() {
        let cfg = MfccConfig::default();
        let peaks = mel_peak_frequencies(&cfg);
        assert_eq!(peaks.len(), 128);
        assert!(peaks.windows(2).all(|w| w[0] < w[1]));
        // Recompute directly from the mel spacing.
        let top = 2595.0 * (1.0 + 11_025.0 / 700.0f64).log10();
        for (i, &p) in peaks.iter().enumerate() {
            let m = top * (i + 1) as f64 / 129.0;
            let hz = 700.0 * (10f64.powf(m / 2595.0) - 1.0);
            assert!((p - hz).abs() < 1e-9 * hz.max(1.0));
        }
    }

    #[test]
    fn filters_are_unimodal_with_contiguous_support() {
        let fb = mel_filterbank(&MfccConfig::default());
        for row in fb.iter_rows() {
            let support: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.0).collect();
            let (first, last) = (support[0], *support.last().unwrap());
            assert_eq!(support.len(), last - first + 1, "support has a gap");
            let peak = (first..=last).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert!((first..peak).all(|k| row[k] <= row[k + 1]));
            assert!((peak..last).all(|k| row[k] >= row[k + 1]));
        }
    }
}
