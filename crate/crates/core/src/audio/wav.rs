use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, AudioError, Result};

/// Decodes 8/16/24/32-bit integer or 32-bit float PCM WAV into a mono clip.
///
/// Stereo is averaged to mono and integer samples are scaled by `2^(bits-1)`.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::UnsupportedCodec(format!(
            "{} channels (only mono and stereo are supported)",
            spec.channels
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedCodec(format!("{bits}-bit {fmt:?}")));
        }
    };
    if interleaved.is_empty() {
        return Err(AudioError::EmptyPayload);
    }
    let samples = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|pair| 0.5 * (pair[0] + pair[1]))
            .collect()
    } else {
        interleaved
    };
    AudioClip::new(samples, spec.sample_rate)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    decode_wav(&std::fs::read(path)?)
}

/// Encodes a clip as 16-bit mono PCM, clamping to [-1, 1].
pub fn encode_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + 2 * clip.len()));
    {
        let mut writer = WavWriter::new(&mut buf, spec).expect("in-memory WAV header");
        for &s in clip.samples() {
            let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
            writer.write_sample(q).expect("in-memory WAV sample");
        }
        writer.finalize().expect("in-memory WAV finalize");
    }
    buf.into_inner()
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::Unsupported => AudioError::UnsupportedCodec("unsupported format tag".into()),
        hound::Error::TooWide => AudioError::UnsupportedCodec("sample too wide".into()),
        hound::Error::InvalidSampleFormat => {
            AudioError::UnsupportedCodec("invalid sample format".into())
        }
        hound::Error::FormatError(msg) => AudioError::MalformedHeader(msg.to_string()),
        hound::Error::UnfinishedSample => AudioError::MalformedHeader("truncated sample".into()),
        hound::Error::IoError(e) => AudioError::MalformedHeader(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(spec: WavSpec, write: impl FnOnce(&mut WavWriter<&mut Cursor<Vec<u8>>>)) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        {
            let mut w = WavWriter::new(&mut buf, spec).unwrap();
            write(&mut w);
            w.finalize().unwrap();
        }
        buf.into_inner()
    }

    fn int_spec(channels: u16, bits: u16) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: 22_050,
            bits_per_sample: bits,
            sample_format: SampleFormat::Int,
        }
    }

    #[test]
    fn pcm16_constant_scales_to_half() {
        let bytes = wav_bytes(int_spec(1, 16), |w| {
            for _ in 0..100 {
                w.write_sample(16_384i16).unwrap();
            }
        });
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.len(), 100);
        assert!(clip.samples().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn opposite_stereo_channels_cancel() {
        let bytes = wav_bytes(int_spec(2, 16), |w| {
            for i in 0..50i16 {
                let c = i * 300 - 7000;
                w.write_sample(c).unwrap();
                w.write_sample(-c).unwrap();
            }
        });
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.len(), 50);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sine_round_trip_keeps_peak() {
        let sr = 22_050u32;
        let peak = 0.8;
        let synth: Vec<f64> = (0..sr)
            .map(|n| peak * (2.0 * std::f64::consts::PI * 440.0 * f64::from(n) / f64::from(sr)).sin())
            .collect();
        let encoded_peak = synth.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let clip = AudioClip::new(synth, sr).unwrap();
        let back = decode_wav(&encode_wav_pcm16(&clip)).unwrap();
        assert_eq!(back.len(), 22_050);
        assert_eq!(back.sample_rate(), sr);
        let got = back.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!((got - encoded_peak).abs() < 1e-3, "{got} vs {encoded_peak}");
    }

    #[test]
    fn other_bit_depths_scale() {
        let b8 = wav_bytes(int_spec(1, 8), |w| w.write_sample(64i8).unwrap());
        assert_eq!(decode_wav(&b8).unwrap().samples(), &[0.5]);
        let b24 = wav_bytes(int_spec(1, 24), |w| w.write_sample(-(1i32 << 22)).unwrap());
        assert_eq!(decode_wav(&b24).unwrap().samples(), &[-0.5]);
        let float = WavSpec {
            sample_format: SampleFormat::Float,
            bits_per_sample: 32,
            ..int_spec(1, 32)
        };
        let bf = wav_bytes(float, |w| w.write_sample(0.25f32).unwrap());
        assert_eq!(decode_wav(&bf).unwrap().samples(), &[0.25]);
    }

    #[test]
    fn errors_are_distinct() {
        assert!(matches!(decode_wav(b"not a wav file at all"), Err(AudioError::MalformedHeader(_))));

        let empty = wav_bytes(int_spec(1, 16), |_| {});
        assert!(matches!(decode_wav(&empty), Err(AudioError::EmptyPayload)));

        // Rewrite the format tag of a valid file to 2 (MS ADPCM).
        let mut adpcm = wav_bytes(int_spec(1, 16), |w| w.write_sample(1i16).unwrap());
        let fmt = adpcm.windows(4).position(|c| c == b"fmt ").unwrap();
        adpcm[fmt + 8] = 2;
        assert!(matches!(decode_wav(&adpcm), Err(AudioError::UnsupportedCodec(_))));

        let three = wav_bytes(int_spec(3, 16), |w| {
            for _ in 0..3 {
                w.write_sample(0i16).unwrap();
            }
        });
        assert!(matches!(decode_wav(&three), Err(AudioError::UnsupportedCodec(_))));
    }
}
