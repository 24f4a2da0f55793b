//! Device/renderer link: a fixed little-endian datagram format, transports
//! and rate-paced endpoints.

mod endpoint;
mod transport;
mod wire;

pub use endpoint::{
    nominal_load_bps, run_endpoint, run_publisher, run_subscriber, EndpointConfig, EndpointIo, LinkStats,
    PublishSchedule, Role, SeqTracker, SharedLinkStats,
};
pub use transport::{
    shared_channel, ChannelReceiver, ChannelSender, DatagramReceiver, DatagramSender, UdpReceiver, UdpSender,
};
pub use wire::{
    decode, encode, encode_into, Packet, PacketHeader, PacketKind, HEADER_LEN, MAGIC, MAX_DATAGRAM, POSE_DATAGRAM_LEN,
    QUATERNION_NORM_TOLERANCE, STATUS_DATAGRAM_LEN, VERSION, WRENCH_DATAGRAM_LEN,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unknown protocol version {0}")]
    UnknownVersion(u8),
    #[error("unknown packet kind {0}")]
    UnknownKind(u8),
    #[error("datagram truncated: needed {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("datagram has {got} bytes, payload ends at {expected}")]
    TrailingBytes { expected: usize, got: usize },
    #[error("datagram of {len} bytes exceeds the {MAX_DATAGRAM}-byte limit")]
    Oversize { len: usize },
    #[error("pose quaternion norm {norm} is not 1")]
    NonUnitQuaternion { norm: f64 },
    #[error("config key is not valid UTF-8")]
    InvalidKey,
    #[error("invalid rate {0} Hz")]
    InvalidRate(f64),
    #[error("publisher needs a peer address")]
    MissingPeer,
    #[error("endpoint role does not match its data source/sink")]
    RoleMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PartialEq for ProtocolError {
    fn eq(&self, other: &Self) -> bool {
        use ProtocolError::*;
        match (self, other) {
            (BadMagic(a), BadMagic(b)) => a == b,
            (UnknownVersion(a), UnknownVersion(b)) | (UnknownKind(a), UnknownKind(b)) => a == b,
            (Truncated { needed: a, got: b }, Truncated { needed: c, got: d }) => a == c && b == d,
            (TrailingBytes { expected: a, got: b }, TrailingBytes { expected: c, got: d }) => a == c && b == d,
            (Oversize { len: a }, Oversize { len: b }) => a == b,
            (NonUnitQuaternion { norm: a }, NonUnitQuaternion { norm: b }) => a.to_bits() == b.to_bits(),
            (InvalidKey, InvalidKey) | (MissingPeer, MissingPeer) | (RoleMismatch, RoleMismatch) => true,
            (InvalidRate(a), InvalidRate(b)) => a.to_bits() == b.to_bits(),
            (Io(a), Io(b)) => a.kind() == b.kind(),
            _ => false,
        }
    }
}
