//! IQ sample files.
//!
//! Every file starts with the same little-endian header:
//!
//! | field        | type    |
//! |--------------|---------|
//! | magic        | `AOFM`  |
//! | version      | u16     |
//! | rate (Hz)    | u64     |
//! | complex flag | u8      |
//! | sample count | u64     |
//!
//! Version 1 is a single stream. Version 2 is a multichannel capture: the
//! header continues with a u16 channel count, `sample count` is per channel,
//! and channels follow one another as consecutive blocks. Samples are f32,
//! interleaved I,Q for complex data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{BasebandSignal, PassbandSignal};

pub const MAGIC: [u8; 4] = *b"AOFM";
pub const STREAM_VERSION: u16 = 1;
pub const CAPTURE_VERSION: u16 = 2;
pub const STREAM_HEADER_BYTES: u64 = 23;
pub const CAPTURE_HEADER_BYTES: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u16,
    pub rate: u64,
    pub complex: bool,
    pub samples: u64,
    pub channels: u16,
}

impl Header {
    pub fn len(&self) -> u64 {
        if self.version == CAPTURE_VERSION {
            CAPTURE_HEADER_BYTES
        } else {
            STREAM_HEADER_BYTES
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    fn bytes_per_sample(&self) -> u64 {
        if self.complex {
            8
        } else {
            4
        }
    }

    pub fn payload_bytes(&self) -> u64 {
        self.samples * self.channels as u64 * self.bytes_per_sample()
    }

    fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.rate.to_le_bytes())?;
        w.write_all(&[u8::from(self.complex)])?;
        w.write_all(&self.samples.to_le_bytes())?;
        if self.version == CAPTURE_VERSION {
            w.write_all(&self.channels.to_le_bytes())?;
        }
        Ok(())
    }

    fn read(r: &mut impl Read) -> Result<Header> {
        let mut fixed = [0u8; STREAM_HEADER_BYTES as usize];
        r.read_exact(&mut fixed)
            .map_err(|_| Error::BadHeader("file shorter than the header".into()))?;
        if fixed[0..4] != MAGIC {
            return Err(Error::BadHeader(format!("bad magic {:?}", &fixed[0..4])));
        }
        let version = u16::from_le_bytes([fixed[4], fixed[5]]);
        let rate = u64::from_le_bytes(fixed[6..14].try_into().expect("8 bytes"));
        let complex = match fixed[14] {
            0 => false,
            1 => true,
            other => return Err(Error::BadHeader(format!("complex flag {other}"))),
        };
        let samples = u64::from_le_bytes(fixed[15..23].try_into().expect("8 bytes"));
        let channels = match version {
            STREAM_VERSION => 1,
            CAPTURE_VERSION => {
                let mut c = [0u8; 2];
                r.read_exact(&mut c)
                    .map_err(|_| Error::BadHeader("missing channel count".into()))?;
                u16::from_le_bytes(c)
            }
            other => return Err(Error::BadHeader(format!("unsupported version {other}"))),
        };
        Ok(Header {
            version,
            rate,
            complex,
            samples,
            channels,
        })
    }
}

/// Size in bytes of a complex capture file.
pub fn capture_size_bytes(channels: u16, samples_per_channel: u64) -> u64 {
    CAPTURE_HEADER_BYTES + channels as u64 * samples_per_channel * 8
}

fn integer_rate(rate: f64) -> Result<u64> {
    if rate > 0.0 && rate.fract() == 0.0 && rate < u64::MAX as f64 {
        Ok(rate as u64)
    } else {
        Err(Error::invalid("rate", format!("{rate} is not a whole number of Hz")))
    }
}

fn write_complex(w: &mut impl Write, samples: &[Complex64]) -> Result<()> {
    for c in samples {
        w.write_all(&(c.re as f32).to_le_bytes())?;
        w.write_all(&(c.im as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_complex(r: &mut impl Read, n: u64) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(n as usize);
    let mut buf = vec![0u8; 8 * 4096];
    let mut left = n as usize;
    while left > 0 {
        let take = left.min(4096);
        r.read_exact(&mut buf[..take * 8])?;
        out.extend(buf[..take * 8].chunks_exact(8).map(|b| {
            Complex64::new(
                f32::from_le_bytes(b[0..4].try_into().expect("4 bytes")) as f64,
                f32::from_le_bytes(b[4..8].try_into().expect("4 bytes")) as f64,
            )
        }));
        left -= take;
    }
    Ok(out)
}

fn check_length(header: &Header, file_len: u64) -> Result<()> {
    let available = file_len.saturating_sub(header.len()) / header.bytes_per_sample();
    let expected = header.samples * header.channels as u64;
    if available < expected {
        return Err(Error::Truncated {
            expected,
            actual: available,
        });
    }
    Ok(())
}

/// Writes one complex baseband stream (version 1).
pub fn write_stream(path: &Path, signal: &BasebandSignal) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    Header {
        version: STREAM_VERSION,
        rate: integer_rate(signal.rate)?,
        complex: true,
        samples: signal.len() as u64,
        channels: 1,
    }
    .write(&mut w)?;
    write_complex(&mut w, &signal.samples)?;
    w.flush()?;
    Ok(())
}

/// Writes a real passband stream (version 1, complex flag 0).
pub fn write_real_stream(path: &Path, signal: &PassbandSignal) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    Header {
        version: STREAM_VERSION,
        rate: integer_rate(signal.rate)?,
        complex: false,
        samples: signal.samples.len() as u64,
        channels: 1,
    }
    .write(&mut w)?;
    for &s in &signal.samples {
        w.write_all(&(s as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a complex stream (version 1).
pub fn read_stream(path: &Path) -> Result<BasebandSignal> {
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let header = Header::read(&mut r)?;
    if header.version != STREAM_VERSION {
        return Err(Error::BadHeader(format!(
            "expected a version {STREAM_VERSION} stream, found version {}",
            header.version
        )));
    }
    if !header.complex {
        return Err(Error::BadHeader("expected complex samples".into()));
    }
    check_length(&header, file_len)?;
    Ok(BasebandSignal::new(read_complex(&mut r, header.samples)?, header.rate as f64))
}

/// Writes a multichannel complex capture (version 2). All channels must
/// share a rate and length.
pub fn write_capture(path: &Path, channels: &[BasebandSignal]) -> Result<()> {
    let first = channels.first().ok_or(Error::EmptyInput)?;
    for ch in channels {
        if ch.len() != first.len() {
            return Err(Error::LengthMismatch {
                expected: first.len(),
                actual: ch.len(),
            });
        }
        if ch.rate != first.rate {
            return Err(Error::invalid("rate", "channels differ in sample rate"));
        }
    }
    let n_channels = u16::try_from(channels.len())
        .map_err(|_| Error::invalid("channels", "more than 65535 channels"))?;
    let mut w = BufWriter::new(File::create(path)?);
    Header {
        version: CAPTURE_VERSION,
        rate: integer_rate(first.rate)?,
        complex: true,
        samples: first.len() as u64,
        channels: n_channels,
    }
    .write(&mut w)?;
    for ch in channels {
        write_complex(&mut w, &ch.samples)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a multichannel capture back into per-element signals.
pub fn replay_capture(path: &Path) -> Result<Vec<BasebandSignal>> {
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let header = Header::read(&mut r)?;
    if header.version != CAPTURE_VERSION {
        return Err(Error::BadHeader(format!(
            "expected a version {CAPTURE_VERSION} capture, found version {}",
            header.version
        )));
    }
    if !header.complex {
        return Err(Error::BadHeader("expected complex samples".into()));
    }
    check_length(&header, file_len)?;
    (0..header.channels)
        .map(|_| Ok(BasebandSignal::new(read_complex(&mut r, header.samples)?, header.rate as f64)))
        .collect()
}
