//! WAV reading and writing (32-bit float and 16-bit PCM).

use std::io::ErrorKind;
use std::path::Path;

use crate::dsp::Signal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Float32,
    Pcm16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavSpec {
    pub channels: u16,
    pub sample_rate: u32,
    pub encoding: Encoding,
}

impl WavSpec {
    pub fn float32(channels: u16, sample_rate: u32) -> Self {
        WavSpec {
            channels,
            sample_rate,
            encoding: Encoding::Float32,
        }
    }

    /// Float32 spec matching a signal's layout.
    pub fn for_signal(signal: &Signal) -> Self {
        WavSpec::float32(signal.num_channels() as u16, signal.sample_rate)
    }

    fn to_hound(self) -> hound::WavSpec {
        let (bits_per_sample, sample_format) = match self.encoding {
            Encoding::Float32 => (32, hound::SampleFormat::Float),
            Encoding::Pcm16 => (16, hound::SampleFormat::Int),
        };
        hound::WavSpec {
            channels: self.channels,
            sample_rate: self.sample_rate,
            bits_per_sample,
            sample_format,
        }
    }
}

fn map_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) if io.kind() == ErrorKind::UnexpectedEof => {
            Error::MalformedWav("unexpected end of file".into())
        }
        hound::Error::IoError(io) => Error::Io(io),
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.into()),
        hound::Error::UnfinishedSample => Error::MalformedWav("truncated sample".into()),
        hound::Error::TooWide => Error::UnsupportedWav("sample width too large".into()),
        hound::Error::Unsupported => Error::UnsupportedWav("unsupported encoding".into()),
        hound::Error::InvalidSampleFormat => Error::UnsupportedWav("invalid sample format".into()),
    }
}

/// While parsing, short reads mean the file itself is cut off.
fn map_read_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io)
            if matches!(io.kind(), ErrorKind::UnexpectedEof | ErrorKind::Other) =>
        {
            Error::MalformedWav(io.to_string())
        }
        other => map_err(other),
    }
}

fn deinterleave(samples: Vec<f64>, channels: usize, sample_rate: u32) -> Signal {
    let mut out = vec![Vec::with_capacity(samples.len() / channels); channels];
    for (i, v) in samples.into_iter().enumerate() {
        out[i % channels].push(v);
    }
    Signal {
        channels: out,
        sample_rate,
    }
}

/// Reads a mono or stereo file; 16-bit samples are divided by 32768.
pub fn read_wav(path: &Path) -> Result<Signal> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path).map_err(map_read_err)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedWav(format!("{} channels", spec.channels)));
    }
    if spec.sample_rate == 0 {
        return Err(Error::MalformedWav("zero sample rate".into()));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_read_err)?,
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_read_err)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedWav(format!("{bits}-bit {fmt:?}")));
        }
    };
    Ok(deinterleave(samples, spec.channels as usize, spec.sample_rate))
}

/// Writes `signal` and returns how many samples exceeded full scale.
/// PCM16 output clamps those samples; float output keeps them.
pub fn write_wav(path: &Path, signal: &Signal, spec: WavSpec) -> Result<usize> {
    signal.check()?;
    if spec.sample_rate == 0 {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    if spec.channels as usize != signal.num_channels() {
        return Err(Error::InvalidArgument(format!(
            "spec has {} channels, signal has {}",
            spec.channels,
            signal.num_channels()
        )));
    }
    if spec.sample_rate != signal.sample_rate {
        return Err(Error::SampleRateMismatch(spec.sample_rate, signal.sample_rate));
    }
    let n_ch = signal.num_channels();
    for (c, ch) in signal.channels.iter().enumerate() {
        if let Some(i) = ch.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index: i * n_ch + c });
        }
    }

    let mut writer = hound::WavWriter::create(path, spec.to_hound()).map_err(map_err)?;
    let mut clipped = 0;
    for i in 0..signal.len() {
        for ch in &signal.channels {
            let v = ch[i];
            if v.abs() > 1.0 {
                clipped += 1;
            }
            match spec.encoding {
                Encoding::Float32 => writer.write_sample(v as f32),
                Encoding::Pcm16 => {
                    writer.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
                }
            }
            .map_err(map_err)?;
        }
    }
    writer.finalize().map_err(map_err)?;
    Ok(clipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let left: Vec<f64> = (0..1000).map(|i| ((i as f32 * 0.37).sin() * 0.9) as f64).collect();
        let right: Vec<f64> = left.iter().map(|v| -v * 0.5).collect();
        let s = Signal::stereo(left, right, 48_000);
        assert_eq!(write_wav(&path, &s, WavSpec::for_signal(&s)).unwrap(), 0);
        assert_eq!(read_wav(&path).unwrap(), s);
    }

    #[test]
    fn pcm16_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.wav");
        let s = Signal::mono(vec![-1.0, 0.5, 0.0, 2.0], 44_100);
        let spec = WavSpec {
            channels: 1,
            sample_rate: 44_100,
            encoding: Encoding::Pcm16,
        };
        assert_eq!(write_wav(&path, &s, spec).unwrap(), 1);
        let back = read_wav(&path).unwrap();
        assert_eq!(back.channels[0], vec![-1.0, 0.5, 0.0, 32767.0 / 32768.0]);
    }

    #[test]
    fn empty_signal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.wav");
        let s = Signal::mono(vec![], 48_000);
        write_wav(&path, &s, WavSpec::for_signal(&s)).unwrap();
        let back = read_wav(&path).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.sample_rate, 48_000);
    }

    #[test]
    fn errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_wav(&dir.path().join("missing.wav")),
            Err(Error::MissingFile(_))
        ));

        let path = dir.path().join("t.wav");
        let s = Signal::mono(vec![0.1; 64], 48_000);
        write_wav(&path, &s, WavSpec::for_signal(&s)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..20]).unwrap();
        assert!(matches!(read_wav(&path), Err(Error::MalformedWav(_))));

        let nan = Signal::mono(vec![0.0, f64::NAN], 48_000);
        assert!(matches!(
            write_wav(&path, &nan, WavSpec::for_signal(&nan)),
            Err(Error::NonFiniteSample { index: 1 })
        ));

        let path24 = dir.path().join("w.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 48_000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path24, spec).unwrap();
        w.write_sample(5i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path24), Err(Error::UnsupportedWav(_))));
    }

    #[test]
    fn unwritable_path() {
        let s = Signal::mono(vec![0.0], 48_000);
        let err = write_wav(Path::new("/nonexistent/dir/x.wav"), &s, WavSpec::for_signal(&s));
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
