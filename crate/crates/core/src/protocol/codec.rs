//! JSON-lines framing: one UTF-8 JSON object per LF-terminated line.

use thiserror::Error;

use super::Frame;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("message contains a non-finite number")]
    NonFinite,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A line that could not be decoded. The stream continues past it.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("malformed frame ({reason}): {line}")]
pub struct FrameError {
    pub line: String,
    pub reason: String,
}

/// Serialize one frame, including the trailing LF.
pub fn encode(msg: &Frame) -> Result<Vec<u8>, EncodeError> {
    let mut out = encode_line(msg)?.into_bytes();
    out.push(b'\n');
    Ok(out)
}

/// Serialize one frame without the line terminator (WebSocket text payload).
pub fn encode_line(msg: &Frame) -> Result<String, EncodeError> {
    if !msg.is_finite() {
        return Err(EncodeError::NonFinite);
    }
    Ok(serde_json::to_string(msg)?)
}

/// Decode a single line (no terminator).
pub fn decode_line(line: &str) -> Result<Frame, FrameError> {
    serde_json::from_str(line).map_err(|e| FrameError { line: line.to_string(), reason: e.to_string() })
}

/// Decode every complete line in `buffer`. Returns the per-frame results in
/// order and the unterminated tail. Blank lines are skipped.
pub fn decode(buffer: &[u8]) -> (Vec<Result<Frame, FrameError>>, &[u8]) {
    let mut out = Vec::new();
    let mut start = 0;
    while let Some(pos) = buffer[start..].iter().position(|&b| b == b'\n') {
        let raw = &buffer[start..start + pos];
        start += pos + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        if raw.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        out.push(match std::str::from_utf8(raw) {
            Ok(line) => decode_line(line),
            Err(e) => Err(FrameError { line: String::from_utf8_lossy(raw).into_owned(), reason: e.to_string() }),
        });
    }
    (out, &buffer[start..])
}

/// Incremental decoder that keeps partial lines between reads.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<Result<Frame, FrameError>> {
        self.buf.extend_from_slice(bytes);
        let (frames, rest) = decode(&self.buf);
        let consumed = self.buf.len() - rest.len();
        self.buf.drain(..consumed);
        frames
    }

    pub fn pending(&self) -> &[u8] {
        &self.buf
    }
}
