//! Wire protocol: length-prefixed frames carrying the measurement
//! choreography between the server and the display/camera units.
//!
//! Frame layout: 4-byte big-endian length, then 1-byte kind, 4-byte
//! big-endian sequence number and the payload. The length field counts
//! everything after itself (kind + seq + payload).

use serde::{Deserialize, Serialize};
use soluscan_core::dataset::Label;
use soluscan_core::features::FeatureVector;
use thiserror::Error;

/// Header bytes after the length field: kind + seq.
pub const FRAME_OVERHEAD: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    FrameTruncated { need: usize, have: usize },
    #[error("frame of {len} bytes exceeds the {max}-byte limit")]
    FrameTooLarge { len: usize, max: usize },
    #[error("unknown message kind 0x{0:02x}")]
    UnknownKind(u8),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
}

/// Background pattern the display can show.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    White,
    Check,
}

impl Pattern {
    fn to_byte(self) -> u8 {
        match self {
            Pattern::White => 0,
            Pattern::Check => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self, CodecError> {
        match b {
            0 => Ok(Pattern::White),
            1 => Ok(Pattern::Check),
            other => Err(CodecError::MalformedPayload(format!(
                "bad pattern id {other}"
            ))),
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pattern::White => "white",
            Pattern::Check => "check",
        })
    }
}

/// Verdict payload broadcast at the end of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub label: Label,
    pub features: FeatureVector,
}

/// Message kinds and their payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageKind {
    DisplaySet(Pattern),
    DisplayAck(Pattern),
    CaptureReq,
    CaptureImg(Vec<u8>),
    AnalyzeResult(AnalysisResult),
    Error { code: u16, text: String },
}

impl MessageKind {
    fn tag(&self) -> u8 {
        match self {
            MessageKind::DisplaySet(_) => 0x01,
            MessageKind::DisplayAck(_) => 0x02,
            MessageKind::CaptureReq => 0x03,
            MessageKind::CaptureImg(_) => 0x04,
            MessageKind::AnalyzeResult(_) => 0x05,
            MessageKind::Error { .. } => 0x06,
        }
    }

    /// Human-readable summary used in session traces.
    pub fn describe(&self) -> String {
        match self {
            MessageKind::DisplaySet(p) => format!("DISPLAY_SET({p})"),
            MessageKind::DisplayAck(p) => format!("DISPLAY_ACK({p})"),
            MessageKind::CaptureReq => "CAPTURE_REQ".into(),
            MessageKind::CaptureImg(_) => "CAPTURE_IMG".into(),
            MessageKind::AnalyzeResult(_) => "ANALYZE_RESULT".into(),
            MessageKind::Error { .. } => "ERROR".into(),
        }
    }
}

/// One protocol message with its per-session sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolMessage {
    pub seq: u32,
    pub kind: MessageKind,
}

/// Encodes a message into a complete frame.
pub fn encode_message(msg: &ProtocolMessage, max_payload: usize) -> Result<Vec<u8>, CodecError> {
    let payload = match &msg.kind {
        MessageKind::DisplaySet(p) | MessageKind::DisplayAck(p) => vec![p.to_byte()],
        MessageKind::CaptureReq => Vec::new(),
        MessageKind::CaptureImg(bytes) => bytes.clone(),
        MessageKind::AnalyzeResult(result) => serde_json::to_vec(result)
            .map_err(|e| CodecError::MalformedPayload(e.to_string()))?,
        MessageKind::Error { code, text } => {
            let mut v = code.to_be_bytes().to_vec();
            v.extend_from_slice(text.as_bytes());
            v
        }
    };
    if payload.len() > max_payload {
        return Err(CodecError::FrameTooLarge {
            len: payload.len(),
            max: max_payload,
        });
    }
    let len = (payload.len() + FRAME_OVERHEAD) as u32;
    let mut out = Vec::with_capacity(4 + len as usize);
    out.extend_from_slice(&len.to_be_bytes());
    out.push(msg.kind.tag());
    out.extend_from_slice(&msg.seq.to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Decodes exactly one frame. Never panics on arbitrary input.
pub fn decode_message(buf: &[u8], max_payload: usize) -> Result<ProtocolMessage, CodecError> {
    if buf.len() < 4 {
        return Err(CodecError::FrameTruncated {
            need: 4,
            have: buf.len(),
        });
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if len < FRAME_OVERHEAD {
        return Err(CodecError::MalformedPayload(format!(
            "length field {len} below header size"
        )));
    }
    if len - FRAME_OVERHEAD > max_payload {
        return Err(CodecError::FrameTooLarge {
            len: len - FRAME_OVERHEAD,
            max: max_payload,
        });
    }
    if buf.len() < 4 + len {
        return Err(CodecError::FrameTruncated {
            need: 4 + len,
            have: buf.len(),
        });
    }
    if buf.len() > 4 + len {
        return Err(CodecError::MalformedPayload(format!(
            "{} trailing bytes after the frame",
            buf.len() - 4 - len
        )));
    }
    let kind_tag = buf[4];
    let seq = u32::from_be_bytes([buf[5], buf[6], buf[7], buf[8]]);
    let payload = &buf[9..];
    let kind = match kind_tag {
        0x01 | 0x02 => {
            if payload.len() != 1 {
                return Err(CodecError::MalformedPayload(format!(
                    "pattern payload must be 1 byte, got {}",
                    payload.len()
                )));
            }
            let p = Pattern::from_byte(payload[0])?;
            if kind_tag == 0x01 {
                MessageKind::DisplaySet(p)
            } else {
                MessageKind::DisplayAck(p)
            }
        }
        0x03 => {
            if !payload.is_empty() {
                return Err(CodecError::MalformedPayload(
                    "capture request carries no payload".into(),
                ));
            }
            MessageKind::CaptureReq
        }
        0x04 => MessageKind::CaptureImg(payload.to_vec()),
        0x05 => {
            let result: AnalysisResult = serde_json::from_slice(payload)
                .map_err(|e| CodecError::MalformedPayload(e.to_string()))?;
            MessageKind::AnalyzeResult(result)
        }
        0x06 => {
            if payload.len() < 2 {
                return Err(CodecError::MalformedPayload(
                    "error payload needs a 2-byte code".into(),
                ));
            }
            let code = u16::from_be_bytes([payload[0], payload[1]]);
            let text = String::from_utf8_lossy(&payload[2..]).into_owned();
            MessageKind::Error { code, text }
        }
        other => return Err(CodecError::UnknownKind(other)),
    };
    Ok(ProtocolMessage { seq, kind })
}
