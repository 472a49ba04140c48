//! The measurement choreography: white display, capture, check display,
//! capture, analyze, broadcast. One session is one strictly-ordered state
//! machine over two connections.

use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use soluscan_core::config::PipelineConfig;
use soluscan_core::dataset::Label;
use soluscan_core::features::FeatureVector;
use soluscan_core::pipeline::{analyze_pair, PipelineError};
use soluscan_core::raster::{Raster, RasterError};
use soluscan_core::svm::SvmModel;

use crate::protocol::{AnalysisResult, CodecError, MessageKind, Pattern};
use crate::transport::{FramedStream, TransportError};

/// Session progress, in the order the steps must happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceState {
    Idle,
    AwaitWhiteDisplayAck,
    AwaitWhiteImage,
    AwaitCheckDisplayAck,
    AwaitCheckImage,
    Analyzing,
    Done,
    Failed,
}

impl std::fmt::Display for SequenceState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SequenceState::Idle => "Idle",
            SequenceState::AwaitWhiteDisplayAck => "AwaitWhiteDisplayAck",
            SequenceState::AwaitWhiteImage => "AwaitWhiteImage",
            SequenceState::AwaitCheckDisplayAck => "AwaitCheckDisplayAck",
            SequenceState::AwaitCheckImage => "AwaitCheckImage",
            SequenceState::Analyzing => "Analyzing",
            SequenceState::Done => "Done",
            SequenceState::Failed => "Failed",
        };
        f.write_str(s)
    }
}

/// Why the analysis stage failed; wraps whichever layer broke.
#[derive(Debug, Error)]
pub enum AnalysisFailure {
    #[error(transparent)]
    Codec(CodecError),
    #[error("image decode: {0}")]
    Image(#[from] RasterError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("step timed out in state {0}")]
    StepTimeout(SequenceState),
    #[error("protocol violation in state {state}: {detail}")]
    ProtocolViolation {
        state: SequenceState,
        detail: String,
    },
    #[error("analysis failed: {0}")]
    AnalysisFailed(#[source] AnalysisFailure),
    #[error("connection: {0}")]
    Connection(std::io::Error),
}

/// One completed measurement: both captures, the verdict and the exact
/// configuration it was produced with.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub session_id: String,
    /// (state reached, unix epoch milliseconds) per transition.
    pub timestamps: Vec<(String, u64)>,
    pub white_image: Raster,
    pub check_image: Raster,
    pub features: FeatureVector,
    pub label: Label,
    pub config_hash: String,
}

impl MeasurementRecord {
    /// JSON sidecar without the pixel data: features, label, timestamps,
    /// config hash and the image file names.
    pub fn sidecar_json(&self) -> String {
        #[derive(serde::Serialize)]
        struct Sidecar<'a> {
            session_id: &'a str,
            label: String,
            features: &'a FeatureVector,
            config_hash: &'a str,
            timestamps: &'a [(String, u64)],
            white_png: &'a str,
            check_png: &'a str,
        }
        serde_json::to_string_pretty(&Sidecar {
            session_id: &self.session_id,
            label: self.label.to_string(),
            features: &self.features,
            config_hash: &self.config_hash,
            timestamps: &self.timestamps,
            white_png: "white.png",
            check_png: "check.png",
        })
        .expect("record always serializes")
    }

    /// Writes `white.png`, `check.png` and `record.json` under
    /// `dir/<session_id>/`.
    pub fn save(&self, dir: &Path) -> std::io::Result<std::path::PathBuf> {
        let session_dir = dir.join(&self.session_id);
        std::fs::create_dir_all(&session_dir)?;
        let io_err = |e: RasterError| std::io::Error::other(e.to_string());
        self.white_image
            .save_png(&session_dir.join("white.png"))
            .map_err(io_err)?;
        self.check_image
            .save_png(&session_dir.join("check.png"))
            .map_err(io_err)?;
        std::fs::write(session_dir.join("record.json"), self.sidecar_json())?;
        Ok(session_dir)
    }
}

/// Direction of a traced message, from the server's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// One step of the session trace: direction plus the message summary,
/// e.g. `(Sent, "DISPLAY_SET(white)")`.
pub type TraceEntry = (Direction, String);

/// A finished session: the record plus the observed message trace.
#[derive(Debug)]
pub struct SessionOutcome {
    pub record: MeasurementRecord,
    pub trace: Vec<TraceEntry>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct Session<'a> {
    display: &'a mut FramedStream,
    camera: &'a mut FramedStream,
    timeout: Duration,
    state: SequenceState,
    trace: Vec<TraceEntry>,
    timestamps: Vec<(String, u64)>,
}

impl<'a> Session<'a> {
    fn enter(&mut self, state: SequenceState) {
        self.state = state;
        self.timestamps.push((state.to_string(), now_ms()));
    }

    fn fail(&mut self, err: OrchestratorError) -> OrchestratorError {
        self.enter(SequenceState::Failed);
        err
    }

    fn send(&mut self, to_display: bool, kind: MessageKind) -> Result<(), OrchestratorError> {
        let summary = kind.describe();
        let conn = if to_display {
            &mut *self.display
        } else {
            &mut *self.camera
        };
        match conn.send(kind) {
            Ok(_) => {
                self.trace.push((Direction::Sent, summary));
                Ok(())
            }
            Err(TransportError::Io(e)) => Err(self.fail(OrchestratorError::Connection(e))),
            Err(TransportError::Codec(e)) => {
                Err(self.fail(OrchestratorError::AnalysisFailed(AnalysisFailure::Codec(e))))
            }
            Err(other) => {
                let state = self.state;
                Err(self.fail(OrchestratorError::ProtocolViolation {
                    state,
                    detail: other.to_string(),
                }))
            }
        }
    }

    fn recv(&mut self, from_display: bool) -> Result<MessageKind, OrchestratorError> {
        let timeout = self.timeout;
        let conn = if from_display {
            &mut *self.display
        } else {
            &mut *self.camera
        };
        match conn.recv(timeout) {
            Ok(msg) => {
                self.trace.push((Direction::Received, msg.kind.describe()));
                Ok(msg.kind)
            }
            Err(TransportError::Timeout) => {
                let state = self.state;
                Err(self.fail(OrchestratorError::StepTimeout(state)))
            }
            Err(TransportError::Codec(e)) => {
                // Garbled frames surface as a failed analysis with the codec
                // error as the cause.
                Err(self.fail(OrchestratorError::AnalysisFailed(AnalysisFailure::Codec(e))))
            }
            Err(TransportError::SeqRegression { last, got }) => {
                let state = self.state;
                Err(self.fail(OrchestratorError::ProtocolViolation {
                    state,
                    detail: format!("sequence regression: {got} after {last}"),
                }))
            }
            Err(TransportError::Io(e)) => Err(self.fail(OrchestratorError::Connection(e))),
        }
    }

    /// Receives and demands an exact message shape.
    fn expect_ack(&mut self, pattern: Pattern) -> Result<(), OrchestratorError> {
        let kind = self.recv(true)?;
        match kind {
            MessageKind::DisplayAck(p) if p == pattern => Ok(()),
            other => {
                let state = self.state;
                Err(self.fail(OrchestratorError::ProtocolViolation {
                    state,
                    detail: format!("expected DISPLAY_ACK({pattern}), got {}", other.describe()),
                }))
            }
        }
    }

    fn expect_image(&mut self) -> Result<Vec<u8>, OrchestratorError> {
        let kind = self.recv(false)?;
        match kind {
            MessageKind::CaptureImg(bytes) => Ok(bytes),
            other => {
                let state = self.state;
                Err(self.fail(OrchestratorError::ProtocolViolation {
                    state,
                    detail: format!("expected CAPTURE_IMG, got {}", other.describe()),
                }))
            }
        }
    }

    /// One display-and-capture leg: set the pattern, await the ack, request
    /// a capture, await the image.
    fn capture_leg(
        &mut self,
        pattern: Pattern,
        ack_state: SequenceState,
        img_state: SequenceState,
    ) -> Result<Vec<u8>, OrchestratorError> {
        self.enter(ack_state);
        self.send(true, MessageKind::DisplaySet(pattern))?;
        self.expect_ack(pattern)?;
        self.enter(img_state);
        self.send(false, MessageKind::CaptureReq)?;
        self.expect_image()
    }
}

/// Runs one full measurement session over established connections.
pub fn run_measurement(
    display: &mut FramedStream,
    camera: &mut FramedStream,
    cfg: &PipelineConfig,
    model: &SvmModel,
    session_id: &str,
) -> Result<SessionOutcome, OrchestratorError> {
    let mut session = Session {
        display,
        camera,
        timeout: Duration::from_secs_f64(cfg.protocol.timeout_s),
        state: SequenceState::Idle,
        trace: Vec::new(),
        timestamps: vec![(SequenceState::Idle.to_string(), now_ms())],
    };

    let white_bytes = session.capture_leg(
        Pattern::White,
        SequenceState::AwaitWhiteDisplayAck,
        SequenceState::AwaitWhiteImage,
    )?;
    let check_bytes = session.capture_leg(
        Pattern::Check,
        SequenceState::AwaitCheckDisplayAck,
        SequenceState::AwaitCheckImage,
    )?;

    session.enter(SequenceState::Analyzing);
    let analyzed = (|| -> Result<_, AnalysisFailure> {
        let white = Raster::from_png_bytes(&white_bytes)?;
        let check = Raster::from_png_bytes(&check_bytes)?;
        let analysis = analyze_pair(&white, &check, model, cfg, None)?;
        Ok((white, check, analysis))
    })();
    let (white, check, analysis) = match analyzed {
        Ok(v) => v,
        Err(e) => return Err(session.fail(OrchestratorError::AnalysisFailed(e))),
    };

    let result = MessageKind::AnalyzeResult(AnalysisResult {
        label: analysis.label,
        features: analysis.features,
    });
    session.send(true, result.clone())?;
    session.send(false, result)?;
    session.enter(SequenceState::Done);

    Ok(SessionOutcome {
        record: MeasurementRecord {
            session_id: session_id.to_string(),
            timestamps: session.timestamps,
            white_image: white,
            check_image: check,
            features: analysis.features,
            label: analysis.label,
            config_hash: cfg.hash(),
        },
        trace: session.trace,
    })
}

/// The canonical trace of a clean session, before the result broadcast.
pub fn canonical_trace() -> Vec<TraceEntry> {
    vec![
        (Direction::Sent, "DISPLAY_SET(white)".into()),
        (Direction::Received, "DISPLAY_ACK(white)".into()),
        (Direction::Sent, "CAPTURE_REQ".into()),
        (Direction::Received, "CAPTURE_IMG".into()),
        (Direction::Sent, "DISPLAY_SET(check)".into()),
        (Direction::Received, "DISPLAY_ACK(check)".into()),
        (Direction::Sent, "CAPTURE_REQ".into()),
        (Direction::Received, "CAPTURE_IMG".into()),
    ]
}

/// One step of a measurement series.
#[derive(Debug)]
pub struct SeriesEntry {
    pub index: usize,
    pub started_ms: u64,
    pub outcome: Result<MeasurementRecord, OrchestratorError>,
}

/// Runs `count` measurements at a fixed interval. A failed step is
/// recorded and the series continues: one bad frame must not abandon a
/// dissolving sample.
pub fn run_series(
    display: &mut FramedStream,
    camera: &mut FramedStream,
    cfg: &PipelineConfig,
    model: &SvmModel,
    interval: Duration,
    count: usize,
    session_prefix: &str,
) -> Vec<SeriesEntry> {
    let mut entries = Vec::with_capacity(count);
    for index in 0..count {
        if index > 0 && !interval.is_zero() {
            std::thread::sleep(interval);
        }
        let session_id = format!("{session_prefix}-{index:04}");
        let started_ms = now_ms();
        let outcome = run_measurement(display, camera, cfg, model, &session_id)
            .map(|outcome| outcome.record);
        if let Err(e) = &outcome {
            // Tell both units the measurement is over so they can reset for
            // the next one; best effort, the step is already failed.
            let notice = MessageKind::Error {
                code: 500,
                text: e.to_string(),
            };
            let _ = display.send(notice.clone());
            let _ = camera.send(notice);
        }
        entries.push(SeriesEntry {
            index,
            started_ms,
            outcome,
        });
    }
    entries
}

/// Writes the per-step feature trend of a series as CSV.
pub fn write_trend_csv(entries: &[SeriesEntry], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(
        w,
        "step,status,label,superposition_ratio,particle_pixel_count,radial_curvature,radial_minimum,radial_mse"
    )?;
    for entry in entries {
        match &entry.outcome {
            Ok(rec) => writeln!(
                w,
                "{},ok,{},{},{},{},{},{}",
                entry.index,
                rec.label,
                rec.features.superposition_ratio,
                rec.features.particle_pixel_count,
                rec.features.radial_curvature,
                rec.features.radial_minimum,
                rec.features.radial_mse,
            )?,
            Err(e) => writeln!(w, "{},failed: {},,,,,", entry.index, brief(e))?,
        }
    }
    Ok(())
}

fn brief(e: &OrchestratorError) -> String {
    e.to_string().replace(',', ";")
}
