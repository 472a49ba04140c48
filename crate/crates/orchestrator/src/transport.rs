//! Blocking framed transport over TCP with per-read deadlines and
//! strictly-increasing sequence numbers in both directions.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use crate::protocol::{decode_message, encode_message, CodecError, MessageKind, ProtocolMessage};

/// What went wrong while moving one frame.
#[derive(Debug)]
pub enum TransportError {
    /// The peer did not produce a full frame before the deadline.
    Timeout,
    /// The connection failed or closed mid-frame.
    Io(std::io::Error),
    /// The bytes arrived but do not form a valid frame.
    Codec(CodecError),
    /// The peer reused or rewound its sequence counter.
    SeqRegression { last: u32, got: u32 },
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Timeout => write!(f, "timed out waiting for a frame"),
            TransportError::Io(e) => write!(f, "io: {e}"),
            TransportError::Codec(e) => write!(f, "codec: {e}"),
            TransportError::SeqRegression { last, got } => {
                write!(f, "sequence regression: {got} after {last}")
            }
        }
    }
}

impl std::error::Error for TransportError {}

/// A connection speaking the length-prefixed protocol. Tracks the local
/// outgoing sequence and validates the peer's.
pub struct FramedStream {
    stream: TcpStream,
    max_payload: usize,
    next_seq: u32,
    last_peer_seq: Option<u32>,
}

impl FramedStream {
    pub fn connect(addr: SocketAddr, max_payload: usize) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true).ok();
        Ok(Self::new(stream, max_payload))
    }

    pub fn new(stream: TcpStream, max_payload: usize) -> Self {
        Self {
            stream,
            max_payload,
            next_seq: 1,
            last_peer_seq: None,
        }
    }

    /// Sends one message, assigning the next sequence number. Returns the
    /// message as actually sent.
    pub fn send(&mut self, kind: MessageKind) -> Result<ProtocolMessage, TransportError> {
        let msg = ProtocolMessage {
            seq: self.next_seq,
            kind,
        };
        let bytes = encode_message(&msg, self.max_payload).map_err(TransportError::Codec)?;
        self.stream
            .write_all(&bytes)
            .map_err(TransportError::Io)?;
        self.next_seq += 1;
        Ok(msg)
    }

    /// Sends raw bytes as-is; fault injection only.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        self.stream.write_all(bytes).map_err(TransportError::Io)
    }

    /// Receives one full frame within the deadline.
    pub fn recv(&mut self, timeout: Duration) -> Result<ProtocolMessage, TransportError> {
        self.stream
            .set_read_timeout(Some(timeout.max(Duration::from_millis(1))))
            .map_err(TransportError::Io)?;
        let mut header = [0u8; 4];
        read_exact_or(&mut self.stream, &mut header)?;
        let len = u32::from_be_bytes(header) as usize;
        // Sanity-check the length before allocating; the codec enforces the
        // same bound with a typed error.
        if len > self.max_payload + crate::protocol::FRAME_OVERHEAD {
            return Err(TransportError::Codec(CodecError::FrameTooLarge {
                len: len.saturating_sub(crate::protocol::FRAME_OVERHEAD),
                max: self.max_payload,
            }));
        }
        let mut frame = vec![0u8; 4 + len];
        frame[..4].copy_from_slice(&header);
        // A connection that ends mid-frame delivered a truncated frame.
        let mut have = 4usize;
        while have < frame.len() {
            match self.stream.read(&mut frame[have..]) {
                Ok(0) => {
                    return Err(TransportError::Codec(CodecError::FrameTruncated {
                        need: frame.len(),
                        have,
                    }))
                }
                Ok(n) => have += n,
                Err(e)
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut =>
                {
                    return Err(TransportError::Timeout)
                }
                Err(e) => return Err(TransportError::Io(e)),
            }
        }
        let msg = decode_message(&frame, self.max_payload).map_err(TransportError::Codec)?;
        if let Some(last) = self.last_peer_seq {
            if msg.seq <= last {
                return Err(TransportError::SeqRegression {
                    last,
                    got: msg.seq,
                });
            }
        }
        self.last_peer_seq = Some(msg.seq);
        Ok(msg)
    }
}

fn read_exact_or(stream: &mut TcpStream, buf: &mut [u8]) -> Result<(), TransportError> {
    match stream.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e)
            if e.kind() == std::io::ErrorKind::WouldBlock
                || e.kind() == std::io::ErrorKind::TimedOut =>
        {
            Err(TransportError::Timeout)
        }
        Err(e) => Err(TransportError::Io(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Pattern;
    use std::net::TcpListener;

    #[test]
    fn frames_cross_a_socket_with_sequence_checking() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut framed = FramedStream::new(stream, 1024);
            let msg = framed.recv(Duration::from_secs(2)).unwrap();
            assert_eq!(msg.seq, 1);
            framed.send(MessageKind::DisplayAck(Pattern::White)).unwrap();
            framed.send(MessageKind::CaptureReq).unwrap();
        });
        let mut client = FramedStream::connect(addr, 1024).unwrap();
        client
            .send(MessageKind::DisplaySet(Pattern::White))
            .unwrap();
        let a = client.recv(Duration::from_secs(2)).unwrap();
        let b = client.recv(Duration::from_secs(2)).unwrap();
        assert_eq!(a.seq, 1);
        assert_eq!(b.seq, 2);
        server.join().unwrap();
    }

    #[test]
    fn silent_peer_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let _keep = std::thread::spawn(move || {
            let (_stream, _) = listener.accept().unwrap();
            std::thread::sleep(Duration::from_millis(500));
        });
        let mut client = FramedStream::connect(addr, 1024).unwrap();
        let err = client.recv(Duration::from_millis(80)).unwrap_err();
        assert!(matches!(err, TransportError::Timeout));
    }
}
