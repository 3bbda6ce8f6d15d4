//! Transfer preamble and payload.
//!
//! Each connection carries one transfer: a 16-byte header
//! (`"SGTE"`, version `0x01`, three zero bytes, payload length as big-endian
//! u64), then exactly that many payload bytes cycling `0x00..=0xFF`. The
//! server answers with a single [`ACK`] once the payload is drained.

use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SGTE";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 16;
pub const ACK: u8 = 0x06;

// a multiple of 256, so every full chunk starts the cycle at 0x00
const CHUNK: usize = 256 * 1024;

pub fn encode_header(len: u64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(&MAGIC);
    h[4] = VERSION;
    h[8..].copy_from_slice(&len.to_be_bytes());
    h
}

/// Returns the declared payload length. Reserved bytes are not checked.
pub fn decode_header(h: &[u8; HEADER_LEN]) -> Result<u64> {
    let magic: [u8; 4] = h[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if h[4] != VERSION {
        return Err(Error::BadVersion(h[4]));
    }
    Ok(u64::from_be_bytes(h[8..].try_into().unwrap()))
}

/// Splits `total` bytes over `flows` connections. Every flow gets
/// `total / flows`; the last one also takes the remainder.
pub fn split_bytes(total: u64, flows: u32) -> Vec<u64> {
    assert!(flows > 0, "at least one flow");
    let n = flows as u64;
    let mut v = vec![total / n; flows as usize];
    *v.last_mut().unwrap() += total % n;
    v
}

/// Payload byte at absolute offset `i`.
pub fn pattern_byte(i: u64) -> u8 {
    (i % 256) as u8
}

fn pattern_chunk() -> Vec<u8> {
    (0..CHUNK as u64).map(pattern_byte).collect()
}

/// Writes header and payload for one transfer.
pub async fn send_transfer<W: AsyncWrite + Unpin>(w: &mut W, len: u64) -> Result<()> {
    w.write_all(&encode_header(len)).await?;
    let chunk = pattern_chunk();
    let mut left = len;
    while left > 0 {
        let n = left.min(CHUNK as u64) as usize;
        w.write_all(&chunk[..n]).await?;
        left -= n as u64;
    }
    w.flush().await?;
    Ok(())
}

/// Waits for the single acknowledgment byte.
pub async fn read_ack<R: AsyncRead + Unpin>(r: &mut R) -> Result<()> {
    let b = r.read_u8().await?;
    if b != ACK {
        return Err(Error::BadAck(b));
    }
    Ok(())
}
