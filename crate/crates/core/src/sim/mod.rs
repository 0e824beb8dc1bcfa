//! Synthetic multi-path CFR generation.
//!
//! A [`Scenario`] declares a set of propagation paths and a hardware offset
//! model. [`cfr_clean`] evaluates the ideal channel frequency response for a
//! packet, [`apply_offsets`] rotates it by the per-sub-channel hardware phase,
//! and [`simulate`] streams the result for every packet and antenna.

mod activity;
mod channel;
mod ofdm;
mod offsets;
mod scenario;
mod waveform;

pub use activity::{Activity, ActivityGenerator};
pub use channel::{cfr_at, cfr_clean, path_delay, simulate, CfrPacket, Simulator};
pub use ofdm::OfdmConfig;
pub use offsets::{apply_offsets, CfoProcess, DelayJitter, OffsetSpec, OffsetTrack, PacketOffsets};
pub use scenario::{PathSpec, Scenario, VelocitySchedule};
pub use waveform::{waveform_roundtrip, OVERSAMPLING};
