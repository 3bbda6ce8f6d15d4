use std::io;
use std::time::Duration;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot bind {address}:{port}")]
    Bind {
        address: String,
        port: u16,
        source: io::Error,
    },
    #[error("invalid {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("expected acknowledgment 0x06, got 0x{0:02x}")]
    BadAck(u8),
    #[error("{what} timed out after {after:?}")]
    Timeout { what: &'static str, after: Duration },
    #[error("byte audit failed: sent {sent} of {expected}")]
    Audit { sent: u64, expected: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Core(#[from] streamscore_core::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}
