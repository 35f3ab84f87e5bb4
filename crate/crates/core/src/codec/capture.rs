//! `.wcap` capture files: a 16-byte header (`b"WCAP"`, u32 version, u64
//! frame count) followed by u32-length-prefixed wire frames.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{decode_frame, encode_frame, CodecError, Result};
use crate::csi::CsiFrame;

pub const CAPTURE_MAGIC: [u8; 4] = *b"WCAP";
pub const CAPTURE_VERSION: u32 = 1;
pub const CAPTURE_HEADER_LEN: usize = 16;

pub fn encode_capture(frames: &[CsiFrame]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&CAPTURE_MAGIC);
    out.extend_from_slice(&CAPTURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(frames.len() as u64).to_le_bytes());
    for f in frames {
        let bytes = encode_frame(f)?;
        out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&bytes);
    }
    Ok(out)
}

pub fn write_capture(path: &Path, frames: &[CsiFrame]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_capture(frames)?)?;
    w.flush()?;
    Ok(())
}

/// Streams frames out of a capture. After the first error the iterator ends.
pub struct CaptureReader<R> {
    inner: R,
    remaining: u64,
    done: bool,
}

/// Fills `buf` as far as the reader allows; returns the byte count read.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(got)
}

impl<R: Read> CaptureReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut header = [0u8; CAPTURE_HEADER_LEN];
        let got = read_full(&mut inner, &mut header)?;
        if got >= 4 && header[..4] != CAPTURE_MAGIC {
            return Err(CodecError::BadMagic(u32::from_le_bytes([
                header[0], header[1], header[2], header[3],
            ])));
        }
        if got < CAPTURE_HEADER_LEN {
            return Err(CodecError::Truncated {
                needed: CAPTURE_HEADER_LEN,
                available: got,
            });
        }
        let version = u32::from_le_bytes([header[4], header[5], header[6], header[7]]);
        if version != CAPTURE_VERSION {
            return Err(CodecError::BadVersion(version.min(255) as u8));
        }
        let mut count = [0u8; 8];
        count.copy_from_slice(&header[8..16]);
        Ok(Self {
            inner,
            remaining: u64::from_le_bytes(count),
            done: false,
        })
    }

    /// Frames the header says are still to come.
    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    fn next_frame(&mut self) -> Result<Option<CsiFrame>> {
        if self.remaining == 0 {
            let mut probe = [0u8; 1];
            return match read_full(&mut self.inner, &mut probe)? {
                0 => Ok(None),
                _ => Err(CodecError::TrailingBytes(1)),
            };
        }
        let mut len = [0u8; 4];
        let got = read_full(&mut self.inner, &mut len)?;
        if got < 4 {
            return Err(CodecError::Truncated {
                needed: 4,
                available: got,
            });
        }
        let len = u32::from_le_bytes(len) as usize;
        // the largest legal frame is 4x4 at 80 MHz
        if len > super::encoded_len(4, 4, 234) {
            return Err(CodecError::InconsistentCounts(format!(
                "record length {len} exceeds any valid frame"
            )));
        }
        let mut buf = vec![0u8; len];
        let got = read_full(&mut self.inner, &mut buf)?;
        if got < len {
            return Err(CodecError::Truncated {
                needed: len,
                available: got,
            });
        }
        self.remaining -= 1;
        decode_frame(&buf).map(Some)
    }
}

impl<R: Read> Iterator for CaptureReader<R> {
    type Item = Result<CsiFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_frame() {
            Ok(Some(f)) => Some(Ok(f)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Everything readable from a capture, plus the error that stopped reading.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureContents {
    pub frames: Vec<CsiFrame>,
    pub error: Option<CodecError>,
}

/// Reads a capture file. Header problems are an `Err`; mid-file corruption
/// returns the frames before it along with the error.
pub fn read_capture(path: &Path) -> Result<CaptureContents> {
    let reader = CaptureReader::new(BufReader::new(File::open(path)?))?;
    let mut frames = Vec::new();
    let mut error = None;
    for item in reader {
        match item {
            Ok(f) => frames.push(f),
            Err(e) => error = Some(e),
        }
    }
    Ok(CaptureContents { frames, error })
}
