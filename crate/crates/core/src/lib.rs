//! System-level simulator for multi-user XR SLAM offloading over Massive MIMO.
//!
//! The crate models four aspects of offloading pose estimation from an XR
//! headset to a Massive MIMO base station:
//!
//! * [`frame_latency`]: pose-correction latency over TDD frame structures.
//! * [`phy`]: zero-forcing multi-user uplink, Gray QAM and Monte-Carlo BER.
//! * [`bitstorm`] and [`sandbox`]: uncoded bit errors injected into the
//!   serialized offload payloads of a synthetic known-map localiser.
//! * [`metrics`] and [`linkbudget`]: trajectory error statistics and the
//!   device transmit power needed for a target BER.
//!
//! [`runner`] ties these together into the four studies exposed by the CLI.

pub mod bitstorm;
pub mod frame_latency;
pub mod linkbudget;
pub mod metrics;
pub mod phy;
pub mod runner;
pub mod sandbox;
pub mod scenario;
pub mod seed;

pub use scenario::ScenarioId;
