use std::collections::{BTreeMap, VecDeque};
use std::sync::mpsc::{channel, Receiver, Sender};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::frame::{decode_frame, encode_frame, FrameError};
use super::{InvokeParams, Message, Method, RpcError};
use crate::registry::{
    AgentProfile, Edge, EdgeKind, GraphEvent, NodeId, ProfileDelta, QueryFilter, Registry, RegistryError,
};

/// Default invoke timeout in simulated seconds.
pub const DEFAULT_TIMEOUT_S: f64 = 5.0;

/// Agent-side implementation of `agent/invoke`.
pub trait AgentHandler: Send {
    fn handle(&mut self, capability: &str, params: &InvokeParams) -> Result<InvokeOutcome, RpcError>;
}

/// Result document of an invocation and the simulated time it took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvokeOutcome {
    pub result: Value,
    pub sim_latency_s: f64,
}

/// Builds handlers for agents registered without one (for example over TCP).
pub type HandlerFactory = Box<dyn Fn(&AgentProfile) -> Box<dyn AgentHandler> + Send>;

#[derive(Debug, Error)]
pub enum BusError {
    #[error("unknown target agent {0}")]
    UnknownTarget(NodeId),
    #[error("agent {target} has no capability `{capability}`")]
    CapabilityNotFound { target: NodeId, capability: String },
    #[error("remote error: {0}")]
    RemoteError(RpcError),
    #[error("invocation of `{capability}` on agent {target} took {elapsed_s} s, limit {limit_s} s")]
    Timeout {
        target: NodeId,
        capability: String,
        elapsed_s: f64,
        limit_s: f64,
    },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl BusError {
    pub fn to_rpc(&self) -> RpcError {
        let code = match self {
            BusError::UnknownTarget(_) => RpcError::UNKNOWN_TARGET,
            BusError::CapabilityNotFound { .. } => RpcError::CAPABILITY_NOT_FOUND,
            BusError::RemoteError(e) => return e.clone(),
            BusError::Timeout { .. } => RpcError::TIMEOUT,
            BusError::Registry(_) => RpcError::REGISTRY,
            BusError::Frame(_) | BusError::Protocol(_) => RpcError::INTERNAL,
        };
        RpcError::new(code, self.to_string())
    }
}

/// One message as it crossed the bus. `None` endpoints denote the bus itself
/// (orchestrator side or broadcast).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub from: Option<NodeId>,
    pub to: Option<NodeId>,
    pub method: Option<String>,
    pub id: Option<u64>,
    pub frame_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<i64>,
}

type Endpoint = Option<NodeId>;

/// In-process message bus. Dispatch is serialized through `&mut self`; wrap in
/// a mutex to share between threads.
pub struct Bus {
    registry: Registry,
    handlers: BTreeMap<NodeId, Box<dyn AgentHandler>>,
    factory: Option<HandlerFactory>,
    queues: BTreeMap<(Endpoint, Endpoint), VecDeque<Vec<u8>>>,
    next_id: u64,
    timeout_s: f64,
    trace: Vec<TraceEntry>,
    subscribers: Vec<Sender<GraphEvent>>,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new(Registry::new())
    }
}

impl Bus {
    pub fn new(registry: Registry) -> Self {
        Self {
            registry,
            handlers: BTreeMap::new(),
            factory: None,
            queues: BTreeMap::new(),
            next_id: 1,
            timeout_s: DEFAULT_TIMEOUT_S,
            trace: Vec::new(),
            subscribers: Vec::new(),
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn timeout_s(&self) -> f64 {
        self.timeout_s
    }

    pub fn set_timeout_s(&mut self, timeout_s: f64) {
        self.timeout_s = timeout_s;
    }

    pub fn set_handler_factory(&mut self, factory: HandlerFactory) {
        self.factory = Some(factory);
    }

    /// Attach a handler to an already registered agent.
    pub fn attach(&mut self, id: NodeId, handler: Box<dyn AgentHandler>) -> Result<(), BusError> {
        if !self.registry.graph().contains(id) {
            return Err(BusError::UnknownTarget(id));
        }
        self.handlers.insert(id, handler);
        Ok(())
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceEntry> {
        std::mem::take(&mut self.trace)
    }

    pub fn set_time(&mut self, t: f64) {
        self.registry.set_time(t);
    }

    /// Stream of graph events with seq greater than `replay_from` (already
    /// logged ones first), or only future events when `None`.
    pub fn subscribe(&mut self, replay_from: Option<u64>) -> Receiver<GraphEvent> {
        let (tx, rx) = channel();
        if let Some(after) = replay_from {
            for e in self.registry.events_after(after) {
                let _ = tx.send(e.clone());
            }
        }
        self.subscribers.push(tx);
        rx
    }

    fn broadcast(&mut self, event: &GraphEvent) {
        self.subscribers.retain(|s| s.send(event.clone()).is_ok());
        let note = Message::notification(Method::Event, serde_json::to_value(event).ok());
        let frame_bytes = encode_frame(&note).map_or(0, |f| f.len());
        self.trace.push(TraceEntry {
            from: None,
            to: None,
            method: Some(Method::Event.as_str().to_owned()),
            id: None,
            frame_bytes,
            error_code: None,
        });
    }

    pub fn register(
        &mut self,
        profile: AgentProfile,
        handler: Option<Box<dyn AgentHandler>>,
    ) -> Result<GraphEvent, BusError> {
        let handler = handler.or_else(|| self.factory.as_ref().map(|f| f(&profile)));
        let (id, event) = self.registry.register(profile)?;
        if let Some(h) = handler {
            self.handlers.insert(id, h);
        }
        self.broadcast(&event);
        Ok(event)
    }

    pub fn deregister(&mut self, id: NodeId) -> Result<GraphEvent, BusError> {
        let event = self.registry.deregister(id)?;
        self.handlers.remove(&id);
        self.broadcast(&event);
        Ok(event)
    }

    pub fn update_state(&mut self, id: NodeId, delta: ProfileDelta) -> Result<GraphEvent, BusError> {
        let event = self.registry.update_state(id, delta)?;
        self.broadcast(&event);
        Ok(event)
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<GraphEvent, BusError> {
        let event = self.registry.add_edge(edge)?;
        self.broadcast(&event);
        Ok(event)
    }

    pub fn remove_edge(&mut self, from: NodeId, to: NodeId, kind: EdgeKind) -> Result<GraphEvent, BusError> {
        let event = self.registry.remove_edge(from, to, kind)?;
        self.broadcast(&event);
        Ok(event)
    }

    fn send(&mut self, from: Endpoint, to: Endpoint, msg: &Message) -> Result<(), BusError> {
        let frame = encode_frame(msg)?;
        self.trace.push(TraceEntry {
            from,
            to,
            method: msg.method().map(|m| m.as_str().to_owned()),
            id: msg.id(),
            frame_bytes: frame.len(),
            error_code: match msg {
                Message::Response { outcome: Err(e), .. } => Some(e.code),
                _ => None,
            },
        });
        self.queues.entry((from, to)).or_default().push_back(frame);
        Ok(())
    }

    fn receive(&mut self, from: Endpoint, to: Endpoint) -> Result<Message, BusError> {
        let frame = self
            .queues
            .get_mut(&(from, to))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| BusError::Protocol("empty connection queue".into()))?;
        let (msg, rest) = decode_frame(&frame)?;
        if !rest.is_empty() {
            return Err(BusError::Protocol("trailing bytes after frame".into()));
        }
        Ok(msg)
    }

    /// Agent-side handling of an invoke request.
    fn serve_invoke(&mut self, target: NodeId, msg: &Message) -> Message {
        let Message::Request { id, params, .. } = msg else {
            unreachable!("serve_invoke only receives requests");
        };
        let outcome = (|| {
            let params: InvokeParams = params
                .clone()
                .ok_or_else(|| RpcError::new(RpcError::INVALID_PARAMS, "missing params"))
                .and_then(|p| {
                    serde_json::from_value(p).map_err(|e| RpcError::new(RpcError::INVALID_PARAMS, e.to_string()))
                })?;
            let has_tool = self.registry.graph().node(target).is_some_and(|p| p.has_tool(&params.capability));
            if !has_tool {
                return Err(RpcError::new(
                    RpcError::CAPABILITY_NOT_FOUND,
                    format!("agent {target} has no capability `{}`", params.capability),
                ));
            }
            let handler = self
                .handlers
                .get_mut(&target)
                .ok_or_else(|| RpcError::new(RpcError::UNKNOWN_TARGET, format!("agent {target} has no handler")))?;
            let out = handler.handle(&params.capability, &params)?;
            serde_json::to_value(out).map_err(|e| RpcError::new(RpcError::INTERNAL, e.to_string()))
        })();
        Message::Response { id: *id, outcome }
    }

    /// Request `params.capability` of `params.target` on behalf of `from`
    /// (`None` for the orchestrator) and wait for the correlated response.
    pub fn invoke(&mut self, from: Option<NodeId>, params: InvokeParams) -> Result<InvokeOutcome, BusError> {
        let target = params.target;
        if !self.registry.graph().contains(target) || !self.handlers.contains_key(&target) {
            return Err(BusError::UnknownTarget(target));
        }
        if params.capability.is_empty() {
            return Err(BusError::CapabilityNotFound {
                target,
                capability: params.capability,
            });
        }
        let id = self.next_id;
        self.next_id += 1;
        let capability = params.capability.clone();
        let request = Message::request(
            id,
            Method::Invoke,
            Some(serde_json::to_value(&params).map_err(|e| BusError::Protocol(e.to_string()))?),
        );
        self.send(from, Some(target), &request)?;

        let delivered = self.receive(from, Some(target))?;
        let response = self.serve_invoke(target, &delivered);
        self.send(Some(target), from, &response)?;

        match self.receive(Some(target), from)? {
            Message::Response { id: rid, outcome } if rid == id => match outcome {
                Ok(v) => {
                    let out: InvokeOutcome =
                        serde_json::from_value(v).map_err(|e| BusError::Protocol(e.to_string()))?;
                    if out.sim_latency_s > self.timeout_s {
                        return Err(BusError::Timeout {
                            target,
                            capability,
                            elapsed_s: out.sim_latency_s,
                            limit_s: self.timeout_s,
                        });
                    }
                    Ok(out)
                }
                Err(e) if e.code == RpcError::CAPABILITY_NOT_FOUND => {
                    Err(BusError::CapabilityNotFound { target, capability })
                }
                Err(e) if e.code == RpcError::UNKNOWN_TARGET => Err(BusError::UnknownTarget(target)),
                Err(e) => Err(BusError::RemoteError(e)),
            },
            other => Err(BusError::Protocol(format!("uncorrelated reply {other:?}"))),
        }
    }

    /// Serve one message from a remote peer. Returns the response for requests
    /// and `None` for notifications and responses. `graph/subscribe` only
    /// acknowledges here; streaming is up to the transport.
    pub fn handle_message(&mut self, msg: Message) -> Option<Message> {
        let Message::Request { id, method, params } = msg else {
            return None;
        };
        let params = params.unwrap_or(Value::Null);
        let parse_err = |e: serde_json::Error| BusError::RemoteError(RpcError::new(RpcError::INVALID_PARAMS, e.to_string()));
        let outcome: Result<Value, BusError> = match method {
            Method::Ping => Ok(json!("pong")),
            Method::Register => serde_json::from_value::<AgentProfile>(params)
                .map_err(parse_err)
                .and_then(|p| self.register(p, None))
                .map(|e| json!({ "seq": e.seq })),
            Method::Deregister => serde_json::from_value::<IdParam>(params)
                .map_err(parse_err)
                .and_then(|p| self.deregister(p.id))
                .map(|e| json!({ "seq": e.seq })),
            Method::Invoke => serde_json::from_value::<InvokeParams>(params)
                .map_err(parse_err)
                .and_then(|p| self.invoke(None, p))
                .and_then(|o| serde_json::to_value(o).map_err(|e| BusError::Protocol(e.to_string()))),
            Method::Query => {
                let filter = if params.is_null() {
                    Ok(QueryFilter::default())
                } else {
                    serde_json::from_value::<QueryFilter>(params).map_err(parse_err)
                };
                filter.map(|f| json!(self.registry.query(&f)))
            }
            Method::Subscribe => Ok(json!({ "seq": self.registry.seq() })),
            Method::Event => Err(BusError::RemoteError(RpcError::new(
                RpcError::INVALID_REQUEST,
                "agent/event is sent by the bus only",
            ))),
        };
        Some(match outcome {
            Ok(v) => Message::result(id, v),
            Err(e) => Message::error(id, e.to_rpc()),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IdParam {
    id: NodeId,
}

/// Parameters of `graph/subscribe`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub(crate) struct SubscribeParams {
    #[serde(default)]
    pub replay_from: Option<u64>,
}
