//! Measurement orchestration: the wire protocol, the session state
//! machine that sequences a display and a camera unit, and software
//! emulators of both devices backed by the synthetic scene renderer.

pub mod emulator;
pub mod protocol;
pub mod server;
pub mod transport;

pub use protocol::{decode_message, encode_message, CodecError, MessageKind, Pattern, ProtocolMessage};
pub use server::{
    canonical_trace, run_measurement, run_series, write_trend_csv, Direction, MeasurementRecord,
    OrchestratorError, SequenceState, SeriesEntry, SessionOutcome,
};
pub use transport::{FramedStream, TransportError};
