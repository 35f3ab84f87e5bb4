//! Datagram ingestion: decode, filter by MAC allow-list and RSSI floor,
//! count what was dropped and why.

use std::io::ErrorKind;
use std::net::{SocketAddr, UdpSocket};
use std::str::FromStr;
use std::time::Duration;

use super::decode_frame;
use crate::csi::{CsiError, CsiFrame, MacAddr};

pub const DEFAULT_UDP_PORT: u16 = 5500;

/// One datagram per call; `None` ends the stream.
pub trait DatagramSource {
    fn next_datagram(&mut self) -> Option<Vec<u8>>;
}

/// Adapts any iterator of byte buffers.
pub struct IterSource<I>(pub I);

impl<I: Iterator<Item = Vec<u8>>> DatagramSource for IterSource<I> {
    fn next_datagram(&mut self) -> Option<Vec<u8>> {
        self.0.next()
    }
}

/// A bound UDP socket. The stream ends after `idle_timeout` without traffic.
pub struct UdpSource {
    socket: UdpSocket,
    buf: Vec<u8>,
}

impl UdpSource {
    pub fn bind(addr: SocketAddr, idle_timeout: Duration) -> std::io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(idle_timeout))?;
        Ok(Self {
            socket,
            buf: vec![0u8; 65_536],
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.socket.local_addr()
    }
}

impl DatagramSource for UdpSource {
    fn next_datagram(&mut self) -> Option<Vec<u8>> {
        loop {
            match self.socket.recv_from(&mut self.buf) {
                Ok((n, _)) => return Some(self.buf[..n].to_vec()),
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(_) => return None,
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PacketFilter {
    /// Empty means all-pass.
    pub allow: Vec<MacAddr>,
    pub rssi_floor_dbm: Option<f64>,
}

impl PacketFilter {
    pub fn all_pass() -> Self {
        Self::default()
    }

    /// Parses a comma/whitespace separated MAC list.
    pub fn parse_macs(text: &str) -> Result<Vec<MacAddr>, CsiError> {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(MacAddr::from_str)
            .collect()
    }

    pub fn check(&self, frame: &CsiFrame) -> Result<(), DropReason> {
        if !self.allow.is_empty() && !self.allow.contains(&frame.source_mac) {
            return Err(DropReason::Mac);
        }
        if let Some(floor) = self.rssi_floor_dbm {
            if frame.rssi_dbm < floor {
                return Err(DropReason::Rssi);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Mac,
    Rssi,
    Decode,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub received: u64,
    pub delivered: u64,
    pub dropped_mac: u64,
    pub dropped_rssi: u64,
    pub decode_errors: u64,
}

/// Frame stream over a datagram source, in arrival order.
pub struct Ingest<S> {
    source: S,
    filter: PacketFilter,
    stats: IngestStats,
}

impl<S> Ingest<S> {
    pub fn stats(&self) -> IngestStats {
        self.stats
    }
}

impl<S: DatagramSource> Iterator for Ingest<S> {
    type Item = CsiFrame;

    fn next(&mut self) -> Option<CsiFrame> {
        loop {
            let bytes = self.source.next_datagram()?;
            self.stats.received += 1;
            let frame = match decode_frame(&bytes) {
                Ok(f) => f,
                Err(_) => {
                    self.stats.decode_errors += 1;
                    continue;
                }
            };
            match self.filter.check(&frame) {
                Ok(()) => {
                    self.stats.delivered += 1;
                    return Some(frame);
                }
                Err(DropReason::Mac) => self.stats.dropped_mac += 1,
                Err(DropReason::Rssi) => self.stats.dropped_rssi += 1,
                Err(DropReason::Decode) => self.stats.decode_errors += 1,
            }
        }
    }
}

pub fn ingest_stream<S: DatagramSource>(source: S, filter: PacketFilter) -> Ingest<S> {
    Ingest {
        source,
        filter,
        stats: IngestStats::default(),
    }
}
