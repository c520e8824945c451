use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{Message, Method, RpcError};

/// Default cap on a single frame payload accepted by [`FrameDecoder`].
pub const DEFAULT_MAX_FRAME: usize = 16 * 1024 * 1024;

const PREFIX: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("incomplete frame")]
    NeedMoreBytes,
    #[error("malformed message: {0}")]
    MalformedJson(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("frame length {declared} does not match the JSON object ({detail})")]
    LengthMismatch { declared: usize, detail: String },
    #[error("payload of {size} bytes exceeds the {limit}-byte limit")]
    OversizeMessage { size: usize, limit: usize },
}

#[derive(Serialize)]
struct WireOut<'a> {
    jsonrpc: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<&'a Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a RpcError>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireIn {
    jsonrpc: String,
    #[serde(default)]
    id: Option<u64>,
    #[serde(default)]
    method: Option<String>,
    #[serde(default, deserialize_with = "present")]
    params: Option<Value>,
    #[serde(default, deserialize_with = "present")]
    result: Option<Value>,
    #[serde(default)]
    error: Option<RpcError>,
}

/// Keeps an explicit `null` distinct from an absent key.
fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

fn to_wire(msg: &Message) -> WireOut<'_> {
    let mut w = WireOut {
        jsonrpc: "2.0",
        id: msg.id(),
        method: msg.method().map(Method::as_str),
        params: None,
        result: None,
        error: None,
    };
    match msg {
        Message::Request { params, .. } | Message::Notification { params, .. } => w.params = params.as_ref(),
        Message::Response { outcome: Ok(v), .. } => w.result = Some(v),
        Message::Response { outcome: Err(e), .. } => w.error = Some(e),
    }
    w
}

fn from_wire(w: WireIn) -> Result<Message, FrameError> {
    let malformed = |m: &str| Err(FrameError::MalformedJson(m.to_owned()));
    if w.jsonrpc != "2.0" {
        return malformed("jsonrpc must be \"2.0\"");
    }
    match (w.method, w.result, w.error) {
        (Some(name), None, None) => {
            let method = name.parse().map_err(FrameError::UnknownMethod)?;
            Ok(match w.id {
                Some(id) => Message::Request {
                    id,
                    method,
                    params: w.params,
                },
                None => Message::Notification {
                    method,
                    params: w.params,
                },
            })
        }
        (Some(_), _, _) => malformed("request carries result or error"),
        (None, result, error) => {
            let Some(id) = w.id else {
                return malformed("response without id");
            };
            if w.params.is_some() {
                return malformed("response carries params");
            }
            match (result, error) {
                (Some(v), None) => Ok(Message::result(id, v)),
                (None, Some(e)) => Ok(Message::error(id, e)),
                _ => malformed("response needs exactly one of result and error"),
            }
        }
    }
}

/// 4-byte big-endian payload length followed by the JSON-RPC object, keys in
/// the order jsonrpc, id, method, params, result, error.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, FrameError> {
    let body = serde_json::to_vec(&to_wire(msg)).map_err(|e| FrameError::MalformedJson(e.to_string()))?;
    let len = u32::try_from(body.len()).map_err(|_| FrameError::OversizeMessage {
        size: body.len(),
        limit: u32::MAX as usize,
    })?;
    let mut out = Vec::with_capacity(PREFIX + body.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

fn frame_len(bytes: &[u8]) -> Option<usize> {
    let prefix: [u8; PREFIX] = bytes.get(..PREFIX)?.try_into().ok()?;
    Some(u32::from_be_bytes(prefix) as usize)
}

fn parse_body(body: &[u8]) -> Result<Message, FrameError> {
    let declared = body.len();
    let mut stream = serde_json::Deserializer::from_slice(body).into_iter::<WireIn>();
    let wire = match stream.next() {
        Some(Ok(w)) => w,
        Some(Err(e)) if e.is_eof() => {
            return Err(FrameError::LengthMismatch {
                declared,
                detail: "object truncated".into(),
            })
        }
        Some(Err(e)) => return Err(FrameError::MalformedJson(e.to_string())),
        None => {
            return Err(FrameError::LengthMismatch {
                declared,
                detail: "empty payload".into(),
            })
        }
    };
    let end = stream.byte_offset();
    if body[end..].iter().any(|b| !b.is_ascii_whitespace()) {
        return Err(FrameError::LengthMismatch {
            declared,
            detail: format!("{} trailing bytes", declared - end),
        });
    }
    from_wire(wire)
}

/// Decodes the first frame of `bytes`, returning it with the unconsumed rest.
pub fn decode_frame(bytes: &[u8]) -> Result<(Message, &[u8]), FrameError> {
    let len = frame_len(bytes).ok_or(FrameError::NeedMoreBytes)?;
    let end = PREFIX.checked_add(len).ok_or(FrameError::NeedMoreBytes)?;
    if bytes.len() < end {
        return Err(FrameError::NeedMoreBytes);
    }
    let msg = parse_body(&bytes[PREFIX..end])?;
    Ok((msg, &bytes[end..]))
}

/// Incremental decoder for a byte stream of frames.
#[derive(Debug)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    max_frame: usize,
}

impl Default for FrameDecoder {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_FRAME)
    }
}

impl FrameDecoder {
    pub fn new(max_frame: usize) -> Self {
        Self {
            buf: Vec::new(),
            max_frame,
        }
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete message, `Ok(None)` if more bytes are needed. A bad frame
    /// is dropped from the buffer before its error is returned.
    pub fn next_message(&mut self) -> Result<Option<Message>, FrameError> {
        let Some(len) = frame_len(&self.buf) else {
            return Ok(None);
        };
        if len > self.max_frame {
            self.buf.clear();
            return Err(FrameError::OversizeMessage {
                size: len,
                limit: self.max_frame,
            });
        }
        if self.buf.len() < PREFIX + len {
            return Ok(None);
        }
        let result = parse_body(&self.buf[PREFIX..PREFIX + len]);
        self.buf.drain(..PREFIX + len);
        result.map(Some)
    }
}
