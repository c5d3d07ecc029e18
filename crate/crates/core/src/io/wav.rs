//! Mono WAV input and float32 WAV output.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// Reads a mono PCM16 or float32 file. PCM16 samples are divided by 32768.
pub fn wav_read(path: impl AsRef<Path>) -> Result<(Vec<f32>, u32)> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>(),
        (SampleFormat::Float, 32) => reader.into_samples::<f32>().collect(),
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: {bits}-bit {fmt:?} samples, expected 16-bit PCM or 32-bit float",
                path.display()
            )))
        }
    };
    let samples = samples.map_err(|e| wav_err(path, e))?;
    Ok((samples, spec.sample_rate))
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::Format(format!("{}: truncated WAV data", path.display()))
        }
        hound::Error::IoError(io) => Error::Io(io),
        hound::Error::FormatError(m) => Error::Format(format!("{}: {m}", path.display())),
        hound::Error::Unsupported => Error::UnsupportedFormat(format!("{}: unsupported WAV encoding", path.display())),
        other => Error::Wav(other),
    }
}

/// Writes mono float32 samples.
pub fn wav_write(path: impl AsRef<Path>, samples: &[f32], sample_rate: u32) -> Result<()> {
    let spec = WavSpec { channels: 1, sample_rate, bits_per_sample: 32, sample_format: SampleFormat::Float };
    let mut w = WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample(s)?;
    }
    w.finalize()?;
    Ok(())
}
