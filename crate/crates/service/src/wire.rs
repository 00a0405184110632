//! Fixed-size little-endian datagrams.
//!
//! Request (52 bytes):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `AMPC`                  |
//! | 4      | 1    | version (1)                   |
//! | 5      | 1    | type (0x01)                   |
//! | 6      | 4    | seq, u32                      |
//! | 10     | 8    | client send time, u64 µs      |
//! | 18     | 2    | trajectory id, u16            |
//! | 20     | 32   | theta, L, phase, incline, f64 |
//!
//! Response (23 bytes): magic, version, type (0x02), seq u32, torque f64,
//! compute time u32 µs, converged u8.

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"AMPC";
pub const VERSION: u8 = 1;
pub const TYPE_REQUEST: u8 = 0x01;
pub const TYPE_RESPONSE: u8 = 0x02;
pub const REQUEST_LEN: usize = 52;
pub const RESPONSE_LEN: usize = 23;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("datagram is {actual} bytes, expected {expected}")]
    Length { expected: usize, actual: usize },
    #[error("bad magic")]
    Magic,
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("unexpected message type {0:#04x}")]
    Type(u8),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcRequest {
    pub seq: u32,
    pub sent_us: u64,
    pub traj_id: u16,
    pub theta: f64,
    pub momentum: f64,
    pub phase_time: f64,
    pub incline_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcResponse {
    pub seq: u32,
    pub torque: f64,
    pub compute_us: u32,
    pub converged: bool,
}

fn header(buf: &mut [u8], kind: u8) {
    buf[..4].copy_from_slice(&MAGIC);
    buf[4] = VERSION;
    buf[5] = kind;
}

fn check_header(buf: &[u8], expected_len: usize, kind: u8) -> Result<(), WireError> {
    if buf.len() != expected_len {
        return Err(WireError::Length { expected: expected_len, actual: buf.len() });
    }
    if buf[..4] != MAGIC {
        return Err(WireError::Magic);
    }
    if buf[4] != VERSION {
        return Err(WireError::Version(buf[4]));
    }
    if buf[5] != kind {
        return Err(WireError::Type(buf[5]));
    }
    Ok(())
}

fn f64_at(buf: &[u8], o: usize) -> f64 {
    f64::from_le_bytes(buf[o..o + 8].try_into().unwrap())
}

impl MpcRequest {
    pub fn encode(&self) -> [u8; REQUEST_LEN] {
        let mut buf = [0u8; REQUEST_LEN];
        header(&mut buf, TYPE_REQUEST);
        buf[6..10].copy_from_slice(&self.seq.to_le_bytes());
        buf[10..18].copy_from_slice(&self.sent_us.to_le_bytes());
        buf[18..20].copy_from_slice(&self.traj_id.to_le_bytes());
        for (i, v) in [self.theta, self.momentum, self.phase_time, self.incline_deg].iter().enumerate() {
            buf[20 + 8 * i..28 + 8 * i].copy_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        check_header(buf, REQUEST_LEN, TYPE_REQUEST)?;
        Ok(Self {
            seq: u32::from_le_bytes(buf[6..10].try_into().unwrap()),
            sent_us: u64::from_le_bytes(buf[10..18].try_into().unwrap()),
            traj_id: u16::from_le_bytes(buf[18..20].try_into().unwrap()),
            theta: f64_at(buf, 20),
            momentum: f64_at(buf, 28),
            phase_time: f64_at(buf, 36),
            incline_deg: f64_at(buf, 44),
        })
    }
}

impl MpcResponse {
    pub fn encode(&self) -> [u8; RESPONSE_LEN] {
        let mut buf = [0u8; RESPONSE_LEN];
        header(&mut buf, TYPE_RESPONSE);
        buf[6..10].copy_from_slice(&self.seq.to_le_bytes());
        buf[10..18].copy_from_slice(&self.torque.to_le_bytes());
        buf[18..22].copy_from_slice(&self.compute_us.to_le_bytes());
        buf[22] = u8::from(self.converged);
        buf
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        check_header(buf, RESPONSE_LEN, TYPE_RESPONSE)?;
        Ok(Self {
            seq: u32::from_le_bytes(buf[6..10].try_into().unwrap()),
            torque: f64_at(buf, 10),
            compute_us: u32::from_le_bytes(buf[18..22].try_into().unwrap()),
            converged: buf[22] != 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> MpcRequest {
        MpcRequest {
            seq: 7,
            sent_us: 123_456_789,
            traj_id: 2,
            theta: 0.1,
            momentum: -16.5,
            phase_time: 0.25,
            incline_deg: 12.0,
        }
    }

    #[test]
    fn request_layout() {
        let buf = request().encode();
        assert_eq!(&buf[..6], b"AMPC\x01\x01");
        assert_eq!(&buf[6..10], &7u32.to_le_bytes());
        assert_eq!(&buf[18..20], &2u16.to_le_bytes());
        assert_eq!(&buf[44..52], &12.0f64.to_le_bytes());
        assert_eq!(MpcRequest::decode(&buf).unwrap(), request());
    }

    #[test]
    fn response_layout() {
        let r = MpcResponse { seq: 9, torque: -23.0, compute_us: 41, converged: true };
        let buf = r.encode();
        assert_eq!(buf.len(), 23);
        assert_eq!(buf[5], 0x02);
        assert_eq!(buf[22], 1);
        assert_eq!(MpcResponse::decode(&buf).unwrap(), r);
    }

    #[test]
    fn malformed_datagrams() {
        let mut buf = request().encode();
        assert_eq!(MpcRequest::decode(&buf[..51]), Err(WireError::Length { expected: 52, actual: 51 }));
        buf[0] = b'X';
        assert_eq!(MpcRequest::decode(&buf), Err(WireError::Magic));
        let mut buf = request().encode();
        buf[4] = 2;
        assert_eq!(MpcRequest::decode(&buf), Err(WireError::Version(2)));
        let mut buf = request().encode();
        buf[5] = TYPE_RESPONSE;
        assert_eq!(MpcRequest::decode(&buf), Err(WireError::Type(2)));
    }
}
