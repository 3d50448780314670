//! RIFF/WAVE reader and writer, 16-bit PCM mono only.

use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

const PCM: u16 = 1;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a WAV byte buffer into samples scaled by `1 / 32768` and the
/// sample rate. `origin` only labels error messages.
pub fn parse_wav(bytes: &[u8], origin: &Path) -> Result<(Vec<f64>, u32)> {
    let fail = |m: String| Error::format(origin, m);
    if bytes.len() < 12 {
        return Err(fail("truncated RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(fail("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                fail(format!(
                    "chunk `{}` claims {size} bytes past the end of the file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(fail(format!("fmt chunk too short ({size} bytes)")));
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    format.ok_or_else(|| fail("data chunk before fmt chunk".into()))?;
                if tag != PCM {
                    return Err(fail(format!(
                        "unsupported encoding (format tag {tag:#06x}); only integer PCM is read"
                    )));
                }
                if channels != 1 {
                    return Err(fail(format!("expected mono audio, found {channels} channels")));
                }
                if bits != 16 {
                    return Err(fail(format!("expected 16-bit samples, found {bits}-bit")));
                }
                if rate == 0 {
                    return Err(fail("sample rate is zero".into()));
                }
                if size % 2 != 0 {
                    return Err(fail("data chunk has an odd byte count".into()));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                    .collect();
                return Ok((samples, rate));
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = end + (size & 1);
    }
    Err(fail("no data chunk".into()))
}

/// Encodes samples as 16-bit PCM mono; values are clamped to the PCM range.
pub fn encode_wav(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Reads a mono 16-bit PCM file. The utterance id is the file stem and the
/// label is 0; callers that know better overwrite both.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (samples, rate) = parse_wav(&bytes, path)?;
    if samples.is_empty() {
        return Err(Error::format(path, "no samples"));
    }
    Ok(Waveform {
        samples,
        sample_rate: rate as f64,
        label: 0,
        utterance_id: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    })
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: f64) -> Result<()> {
    if !(sample_rate >= 1.0 && sample_rate <= u32::MAX as f64 && sample_rate.fract() == 0.0) {
        return Err(Error::InvalidInput(format!(
            "WAV needs an integral sample rate, got {sample_rate}"
        )));
    }
    std::fs::write(path, encode_wav(samples, sample_rate as u32)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_of_known_samples() {
        let mut bytes = encode_wav(&[], 16000);
        for v in [0i16, 16384, -16384, 32767] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        // patch sizes
        let data_len = 8u32;
        bytes[4..8].copy_from_slice(&(36 + data_len).to_le_bytes());
        bytes[40..44].copy_from_slice(&data_len.to_le_bytes());
        let (s, rate) = parse_wav(&bytes, Path::new("mem")).unwrap();
        assert_eq!(rate, 16000);
        assert_eq!(s, vec![0.0, 0.5, -0.5, 32767.0 / 32768.0]);
    }

    #[test]
    fn truncated_and_foreign_files_are_format_errors() {
        let bytes = encode_wav(&[0.1, 0.2], 8000);
        for cut in [0, 7, 20, 40, 45] {
            let err = parse_wav(&bytes[..cut], Path::new("x.wav")).unwrap_err();
            assert_eq!(err.kind(), "format", "cut at {cut}");
        }
        let mut float = bytes.clone();
        float[20..22].copy_from_slice(&3u16.to_le_bytes());
        let err = parse_wav(&float, Path::new("x.wav")).unwrap_err();
        assert!(err.to_string().contains("unsupported encoding"));
        let mut stereo = bytes.clone();
        stereo[22..24].copy_from_slice(&2u16.to_le_bytes());
        assert!(parse_wav(&stereo, Path::new("x.wav"))
            .unwrap_err()
            .to_string()
            .contains("mono"));
        let mut eight_bit = bytes;
        eight_bit[34..36].copy_from_slice(&8u16.to_le_bytes());
        assert!(parse_wav(&eight_bit, Path::new("x.wav")).is_err());
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = encode_wav(&[0.25, -0.25], 8000);
        let mut with_list = plain[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&plain[36..]);
        let (s, _) = parse_wav(&with_list, Path::new("mem")).unwrap();
        assert_eq!(s, vec![0.25, -0.25]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_wav(Path::new("/nonexistent/none.wav")).unwrap_err();
        assert_eq!(err.kind(), "io");
    }
}
