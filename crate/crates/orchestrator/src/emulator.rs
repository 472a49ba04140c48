//! Display and camera emulators: enough device behavior to run the full
//! measurement loop without hardware. The camera renders synthetic scenes;
//! both emulators can inject faults for protocol testing.

use std::net::{SocketAddr, TcpListener};
use std::time::Duration;

use soluscan_core::synth::{render_frame, Background, DissolutionSeries, SceneParams};

use crate::protocol::{MessageKind, Pattern};
use crate::transport::{FramedStream, TransportError};

/// Misbehavior an emulator can be told to exhibit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Wait this long before every reply.
    Delay(Duration),
    /// Never reply at all.
    Drop,
    /// Swallow exactly one reply (the n-th, counting from 0), then behave.
    DropOnce(usize),
    /// Reply with a deliberately truncated frame.
    CorruptFrame,
    /// Reply with a message of the wrong kind.
    WrongOrder,
}

/// What the camera photographs.
#[derive(Debug, Clone)]
pub enum SceneSource {
    /// The same scene for every capture.
    Static(SceneParams),
    /// Step through a dissolution series, one step per measurement
    /// (i.e. per white/check capture pair); the last step repeats.
    Series(DissolutionSeries),
}

impl SceneSource {
    fn scene_for(&self, measurement: usize) -> &SceneParams {
        match self {
            SceneSource::Static(p) => p,
            SceneSource::Series(series) => {
                let step = measurement.min(series.steps.len() - 1);
                &series.steps[step]
            }
        }
    }
}

fn apply_delay(fault: Fault) {
    if let Fault::Delay(d) = fault {
        std::thread::sleep(d);
    }
}

/// A truncated frame: the length field promises more bytes than follow.
fn corrupt_frame() -> Vec<u8> {
    vec![0x00, 0x00, 0x00, 0x20, 0x04, 0x00, 0x00]
}

/// Serves one display session: acks every DISPLAY_SET and remembers the
/// pattern, stops at the result broadcast or when the server hangs up.
pub fn serve_display(listener: TcpListener, fault: Fault) -> std::io::Result<()> {
    let (stream, _) = listener.accept()?;
    let mut framed = FramedStream::new(stream, 64 * 1024 * 1024);
    let mut _current = Pattern::White;
    loop {
        let msg = match framed.recv(Duration::from_secs(30)) {
            Ok(m) => m,
            // Server closed the connection (or gave up): session over.
            Err(_) => return Ok(()),
        };
        match msg.kind {
            MessageKind::DisplaySet(p) => {
                _current = p;
                apply_delay(fault);
                let send_result = match fault {
                    Fault::Drop => Ok(()),
                    Fault::CorruptFrame => {
                        // Close right after the garbage so the server sees a
                        // frame cut short, not a stalled read.
                        let _ = framed.send_raw(&corrupt_frame());
                        return Ok(());
                    }
                    Fault::WrongOrder => framed
                        .send(MessageKind::CaptureImg(vec![0xde, 0xad]))
                        .map(|_| ()),
                    _ => framed.send(MessageKind::DisplayAck(p)).map(|_| ()),
                };
                if send_result.is_err() {
                    return Ok(());
                }
            }
            MessageKind::AnalyzeResult(_) | MessageKind::Error { .. } => {
                // Verdict or step failure; keep serving the session.
            }
            other => {
                let _ = framed.send(MessageKind::Error {
                    code: 400,
                    text: format!("display cannot handle {}", other.describe()),
                });
            }
        }
    }
}

/// Serves one camera session: renders the scene under the pattern implied
/// by the capture order (white first, then check, per measurement).
pub fn serve_camera(
    listener: TcpListener,
    source: SceneSource,
    fault: Fault,
) -> std::io::Result<()> {
    let (stream, _) = listener.accept()?;
    let mut framed = FramedStream::new(stream, 64 * 1024 * 1024);
    // Pattern comes from the capture order within a measurement (white
    // first); the result or error broadcast marks the boundary.
    let mut measurement = 0usize;
    let mut captures_in_measurement = 0usize;
    let mut requests_seen = 0usize;
    loop {
        let msg = match framed.recv(Duration::from_secs(30)) {
            Ok(m) => m,
            Err(TransportError::Timeout) => continue,
            Err(_) => return Ok(()),
        };
        match msg.kind {
            MessageKind::CaptureReq => {
                let pattern = if captures_in_measurement.is_multiple_of(2) {
                    Background::White
                } else {
                    Background::Check
                };
                let scene = source.scene_for(measurement);
                captures_in_measurement += 1;
                apply_delay(fault);
                let this_reply = requests_seen;
                requests_seen += 1;
                let send_result = match fault {
                    Fault::Drop => Ok(()),
                    Fault::DropOnce(n) if n == this_reply => Ok(()),
                    Fault::CorruptFrame => {
                        let _ = framed.send_raw(&corrupt_frame());
                        return Ok(());
                    }
                    Fault::WrongOrder => framed
                        .send(MessageKind::DisplayAck(Pattern::White))
                        .map(|_| ()),
                    _ => {
                        let frame = render_frame(scene, pattern)
                            .expect("emulator scene params validated at startup");
                        let png = frame.to_png_bytes().expect("png encoding");
                        framed.send(MessageKind::CaptureImg(png)).map(|_| ())
                    }
                };
                if send_result.is_err() {
                    return Ok(());
                }
            }
            MessageKind::AnalyzeResult(_) | MessageKind::Error { .. } => {
                // Measurement boundary: next capture starts a new pair.
                measurement += 1;
                captures_in_measurement = 0;
            }
            other => {
                let _ = framed.send(MessageKind::Error {
                    code: 400,
                    text: format!("camera cannot handle {}", other.describe()),
                });
            }
        }
    }
}

/// Binds an emulator pair on loopback and serves one session each on
/// background threads. Returns the addresses to connect the server to.
pub fn spawn_pair(
    source: SceneSource,
    display_fault: Fault,
    camera_fault: Fault,
) -> std::io::Result<(SocketAddr, SocketAddr, EmulatorHandles)> {
    if let SceneSource::Static(p) = &source {
        p.validate().map_err(std::io::Error::other)?;
    }
    let display_listener = TcpListener::bind("127.0.0.1:0")?;
    let camera_listener = TcpListener::bind("127.0.0.1:0")?;
    let display_addr = display_listener.local_addr()?;
    let camera_addr = camera_listener.local_addr()?;
    let display = std::thread::spawn(move || serve_display(display_listener, display_fault));
    let camera = std::thread::spawn(move || serve_camera(camera_listener, source, camera_fault));
    Ok((
        display_addr,
        camera_addr,
        EmulatorHandles { display, camera },
    ))
}

/// Join handles of a spawned emulator pair.
pub struct EmulatorHandles {
    pub display: std::thread::JoinHandle<std::io::Result<()>>,
    pub camera: std::thread::JoinHandle<std::io::Result<()>>,
}

impl EmulatorHandles {
    /// Waits for both emulators to finish serving.
    pub fn join(self) {
        let _ = self.display.join();
        let _ = self.camera.join();
    }
}
