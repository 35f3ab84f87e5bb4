//! Wire and file codec for CSI frames.
//!
//! A wire frame is a 32-byte little-endian header followed by the CSI payload
//! as `f32` (re, im) pairs in rx, tx, subcarrier order:
//!
//! | offset | type    | field                          |
//! |--------|---------|--------------------------------|
//! | 0      | u32     | magic `0x57435349`             |
//! | 4      | u8      | version (1)                    |
//! | 5      | u8      | n_rx                           |
//! | 6      | u8      | n_tx                           |
//! | 7      | u8      | bandwidth, MHz                 |
//! | 8      | u16     | channel number                 |
//! | 10     | u16     | sequence number                |
//! | 12     | i8      | RSSI, dBm (rounded)            |
//! | 13     | u8      | pad (0)                        |
//! | 14     | u16     | n_sub                          |
//! | 16     | [u8; 6] | source MAC                     |
//! | 22     | u64     | timestamp, ns                  |
//! | 30     | [u8; 2] | reserved (0)                   |

mod capture;
mod ingest;

pub use capture::{
    encode_capture, read_capture, write_capture, CaptureContents, CaptureReader,
    CAPTURE_HEADER_LEN, CAPTURE_MAGIC, CAPTURE_VERSION,
};
pub use ingest::{
    ingest_stream, DatagramSource, DropReason, Ingest, IngestStats, IterSource, PacketFilter,
    UdpSource, DEFAULT_UDP_PORT,
};

use num_complex::Complex32;
use thiserror::Error;

use crate::csi::{ChannelSpec, CsiError, CsiFrame, MacAddr};

pub const FRAME_MAGIC: u32 = 0x5743_5349;
pub const FRAME_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("bad magic 0x{0:08x}")]
    BadMagic(u32),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("reserved header bytes are not zero")]
    Reserved,
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("field does not fit the wire layout: {0}")]
    Overflow(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CodecError {
    fn from(e: std::io::Error) -> Self {
        CodecError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CodecError>;

pub fn encoded_len(n_rx: usize, n_tx: usize, n_sub: usize) -> usize {
    HEADER_LEN + 8 * n_rx * n_tx * n_sub
}

pub fn encode_frame(frame: &CsiFrame) -> Result<Vec<u8>> {
    let rssi = frame.rssi_dbm.round();
    if !(-128.0..=127.0).contains(&rssi) {
        return Err(CodecError::Overflow(format!("rssi {} dBm", frame.rssi_dbm)));
    }
    let n_sub = u16::try_from(frame.n_sub())
        .map_err(|_| CodecError::Overflow(format!("n_sub {}", frame.n_sub())))?;
    let n_rx = u8::try_from(frame.n_rx()).map_err(|_| CodecError::Overflow("n_rx".into()))?;
    let n_tx = u8::try_from(frame.n_tx()).map_err(|_| CodecError::Overflow("n_tx".into()))?;
    let chanspec = frame.chanspec();

    let mut out = Vec::with_capacity(encoded_len(frame.n_rx(), frame.n_tx(), frame.n_sub()));
    out.extend_from_slice(&FRAME_MAGIC.to_le_bytes());
    out.push(FRAME_VERSION);
    out.push(n_rx);
    out.push(n_tx);
    out.push(chanspec.bandwidth_mhz() as u8);
    out.extend_from_slice(&chanspec.channel_number().to_le_bytes());
    out.extend_from_slice(&frame.seq.to_le_bytes());
    out.push((rssi as i8) as u8);
    out.push(0);
    out.extend_from_slice(&n_sub.to_le_bytes());
    out.extend_from_slice(&frame.source_mac.0);
    out.extend_from_slice(&frame.timestamp_ns.to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    debug_assert_eq!(out.len(), HEADER_LEN);
    for z in frame.csi() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes exactly one frame; the buffer must hold nothing else.
pub fn decode_frame(bytes: &[u8]) -> Result<CsiFrame> {
    if bytes.len() < HEADER_LEN {
        // still report a wrong magic in preference to a short read
        if bytes.len() >= 4 {
            let magic = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
            if magic != FRAME_MAGIC {
                return Err(CodecError::BadMagic(magic));
            }
        }
        return Err(CodecError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let magic = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if magic != FRAME_MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    if bytes[4] != FRAME_VERSION {
        return Err(CodecError::BadVersion(bytes[4]));
    }
    let n_rx = usize::from(bytes[5]);
    let n_tx = usize::from(bytes[6]);
    let bandwidth = u32::from(bytes[7]);
    let channel = u16_at(bytes, 8);
    let seq = u16_at(bytes, 10);
    let rssi = bytes[12] as i8;
    let n_sub = usize::from(u16_at(bytes, 14));
    if bytes[13] != 0 || bytes[30] != 0 || bytes[31] != 0 {
        return Err(CodecError::Reserved);
    }
    let chanspec = ChannelSpec::new(channel, bandwidth)
        .map_err(|e| CodecError::InconsistentCounts(e.to_string()))?;
    if n_sub != chanspec.n_sub() {
        return Err(CodecError::InconsistentCounts(format!(
            "n_sub {n_sub} but chanspec {chanspec} carries {}",
            chanspec.n_sub()
        )));
    }
    if !(1..=4).contains(&n_rx) || !(1..=4).contains(&n_tx) {
        return Err(CodecError::InconsistentCounts(format!(
            "antenna counts {n_rx}x{n_tx}"
        )));
    }
    let needed = encoded_len(n_rx, n_tx, n_sub);
    if bytes.len() < needed {
        return Err(CodecError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(CodecError::TrailingBytes(bytes.len() - needed));
    }
    let mut mac = [0u8; 6];
    mac.copy_from_slice(&bytes[16..22]);
    let mut ts = [0u8; 8];
    ts.copy_from_slice(&bytes[22..30]);

    let csi = (0..n_rx * n_tx * n_sub)
        .map(|k| {
            let at = HEADER_LEN + 8 * k;
            Complex32::new(f32_at(bytes, at), f32_at(bytes, at + 4))
        })
        .collect();
    let frame = CsiFrame::new(chanspec, n_rx, n_tx, csi).map_err(|e| match e {
        CsiError::InvalidFrame(m) => CodecError::InvalidPayload(m),
        other => CodecError::InvalidPayload(other.to_string()),
    })?;
    Ok(frame.with_meta(f64::from(rssi), MacAddr(mac), seq, u64::from_le_bytes(ts)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn frame_strategy() -> impl Strategy<Value = CsiFrame> {
        let chanspecs: Vec<ChannelSpec> = [20u32, 40, 80]
            .iter()
            .flat_map(|&bw| {
                crate::csi::Bandwidth::from_mhz(bw)
                    .unwrap()
                    .channel_plan()
                    .iter()
                    .map(move |&c| ChannelSpec::new(c, bw).unwrap())
            })
            .collect();
        (
            proptest::sample::select(chanspecs),
            1usize..=4,
            1usize..=4,
            any::<u64>(),
            -128i32..=127,
            any::<[u8; 6]>(),
            any::<u16>(),
            any::<u64>(),
        )
            .prop_map(|(ch, n_rx, n_tx, seed, rssi, mac, seq, ts)| {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let csi = (0..n_rx * n_tx * ch.n_sub())
                    .map(|_| {
                        Complex32::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3))
                    })
                    .collect();
                CsiFrame::new(ch, n_rx, n_tx, csi).unwrap().with_meta(
                    f64::from(rssi),
                    MacAddr(mac),
                    seq,
                    ts,
                )
            })
    }

    fn sample_frame() -> CsiFrame {
        let ch = ChannelSpec::new(155, 80).unwrap();
        let csi = (0..4 * 234)
            .map(|k| Complex32::new(k as f32, -(k as f32) * 0.5))
            .collect();
        CsiFrame::new(ch, 4, 1, csi).unwrap().with_meta(
            -52.0,
            MacAddr([1, 2, 3, 4, 5, 6]),
            77,
            123_456_789,
        )
    }

    #[test]
    fn encoded_length() {
        let bytes = encode_frame(&sample_frame()).unwrap();
        assert_eq!(bytes.len(), 7520);
        assert_eq!(&bytes[..4], &[0x49, 0x53, 0x43, 0x57]);
    }

    #[test]
    fn roundtrip_and_determinism() {
        let f = sample_frame();
        let a = encode_frame(&f).unwrap();
        assert_eq!(a, encode_frame(&f.clone()).unwrap());
        assert_eq!(decode_frame(&a).unwrap(), f);
    }

    #[test]
    fn truncation_and_trailing() {
        let bytes = encode_frame(&sample_frame()).unwrap();
        assert!(matches!(
            decode_frame(&bytes[..bytes.len() - 1]),
            Err(CodecError::Truncated { .. })
        ));
        assert!(matches!(
            decode_frame(&bytes[..10]),
            Err(CodecError::Truncated { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(decode_frame(&long), Err(CodecError::TrailingBytes(1)));
    }

    #[test]
    fn header_errors_are_distinct() {
        let bytes = encode_frame(&sample_frame()).unwrap();
        let mut b = bytes.clone();
        b[0] ^= 0xff;
        assert!(matches!(decode_frame(&b), Err(CodecError::BadMagic(_))));
        let mut b = bytes.clone();
        b[4] = 2;
        assert_eq!(decode_frame(&b), Err(CodecError::BadVersion(2)));
        let mut b = bytes.clone();
        b[14] = 10;
        assert!(matches!(
            decode_frame(&b),
            Err(CodecError::InconsistentCounts(_))
        ));
        let mut b = bytes.clone();
        b[5] = 0;
        assert!(matches!(
            decode_frame(&b),
            Err(CodecError::InconsistentCounts(_))
        ));
        let mut b = bytes.clone();
        b[31] = 1;
        assert_eq!(decode_frame(&b), Err(CodecError::Reserved));
        let mut b = bytes;
        b[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_frame(&b),
            Err(CodecError::InvalidPayload(_))
        ));
    }

    #[test]
    fn rssi_out_of_range_rejected() {
        let mut f = sample_frame();
        f.rssi_dbm = -200.0;
        assert!(matches!(encode_frame(&f), Err(CodecError::Overflow(_))));
        f.rssi_dbm = -51.6;
        let back = decode_frame(&encode_frame(&f).unwrap()).unwrap();
        assert_eq!(back.rssi_dbm, -52.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn roundtrip_is_identity(f in frame_strategy()) {
            let bytes = encode_frame(&f).unwrap();
            prop_assert_eq!(bytes.len(), encoded_len(f.n_rx(), f.n_tx(), f.n_sub()));
            prop_assert_eq!(decode_frame(&bytes).unwrap(), f);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let _ = decode_frame(&bytes);
        }

        #[test]
        fn decode_never_panics_on_valid_header(f in frame_strategy(), cut in 0usize..64, flip in any::<(usize, u8)>()) {
            let mut bytes = encode_frame(&f).unwrap();
            let i = flip.0 % bytes.len();
            bytes[i] ^= flip.1;
            bytes.truncate(bytes.len().saturating_sub(cut));
            let _ = decode_frame(&bytes);
        }
    }
}
