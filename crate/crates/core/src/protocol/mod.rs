//! JSON-RPC 2.0 agent protocol with length-prefixed framing, an in-process
//! bus and a TCP transport.

mod bus;
mod frame;
mod tcp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::registry::{DataType, NodeId};

pub use bus::{AgentHandler, Bus, BusError, HandlerFactory, InvokeOutcome, TraceEntry, DEFAULT_TIMEOUT_S};
pub use frame::{decode_frame, encode_frame, FrameDecoder, FrameError, DEFAULT_MAX_FRAME};
pub use tcp::{serve, serve_connection, ClientError, TcpClient};

/// Protocol methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Register,
    Deregister,
    Invoke,
    Event,
    Query,
    Subscribe,
    /// Liveness check.
    Ping,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Register,
        Method::Deregister,
        Method::Invoke,
        Method::Event,
        Method::Query,
        Method::Subscribe,
        Method::Ping,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Register => "agent/register",
            Method::Deregister => "agent/deregister",
            Method::Invoke => "agent/invoke",
            Method::Event => "agent/event",
            Method::Query => "graph/query",
            Method::Subscribe => "graph/subscribe",
            Method::Ping => "ping",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| s.to_owned())
    }
}

/// JSON-RPC error object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
}

impl RpcError {
    pub const PARSE_ERROR: i64 = -32700;
    pub const INVALID_REQUEST: i64 = -32600;
    pub const METHOD_NOT_FOUND: i64 = -32601;
    pub const INVALID_PARAMS: i64 = -32602;
    pub const INTERNAL: i64 = -32603;
    pub const UNKNOWN_TARGET: i64 = -32001;
    pub const CAPABILITY_NOT_FOUND: i64 = -32002;
    pub const REGISTRY: i64 = -32003;
    pub const TIMEOUT: i64 = -32004;

    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for RpcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.message, self.code)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request {
        id: u64,
        method: Method,
        params: Option<Value>,
    },
    Notification {
        method: Method,
        params: Option<Value>,
    },
    Response {
        id: u64,
        outcome: Result<Value, RpcError>,
    },
}

impl Message {
    pub fn request(id: u64, method: Method, params: Option<Value>) -> Self {
        Message::Request { id, method, params }
    }

    pub fn notification(method: Method, params: Option<Value>) -> Self {
        Message::Notification { method, params }
    }

    pub fn result(id: u64, result: Value) -> Self {
        Message::Response { id, outcome: Ok(result) }
    }

    pub fn error(id: u64, error: RpcError) -> Self {
        Message::Response { id, outcome: Err(error) }
    }

    pub fn id(&self) -> Option<u64> {
        match self {
            Message::Request { id, .. } | Message::Response { id, .. } => Some(*id),
            Message::Notification { .. } => None,
        }
    }

    pub fn method(&self) -> Option<Method> {
        match self {
            Message::Request { method, .. } | Message::Notification { method, .. } => Some(*method),
            Message::Response { .. } => None,
        }
    }

    pub fn is_response(&self) -> bool {
        matches!(self, Message::Response { .. })
    }
}

/// Parameters of `agent/invoke`. Payloads travel by reference only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvokeParams {
    pub target: NodeId,
    pub capability: String,
    pub data_type: DataType,
    pub size_bits: u64,
    #[serde(default)]
    pub payload_ref: String,
}
