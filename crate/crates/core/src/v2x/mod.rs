//! Messages exchanged between agents, their wire format and the bus that
//! delivers them.

pub mod bus;
pub mod codec;
pub mod message;

pub use bus::{BusMessage, BusRecord, MessageBus};
pub use codec::{
    decode_detection, decode_early, detection_size, early_size, encode_detection, encode_early, hex_dump, DecodeError,
    EncodeError,
};
pub use message::{DetectionEntry, DetectionMessage, EarlyMessage};
