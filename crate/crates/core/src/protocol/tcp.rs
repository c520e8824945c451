use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::Value;
use thiserror::Error;

use super::bus::SubscribeParams;
use super::frame::{encode_frame, FrameDecoder, FrameError};
use super::{Bus, Message, Method, RpcError};
use crate::registry::GraphEvent;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("remote error: {0}")]
    Remote(RpcError),
    #[error("connection closed")]
    Closed,
    #[error("protocol violation: {0}")]
    Protocol(String),
}

fn write_message(stream: &Mutex<TcpStream>, msg: &Message) -> io::Result<()> {
    let frame = encode_frame(msg).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let mut s = stream.lock().unwrap_or_else(|p| p.into_inner());
    s.write_all(&frame)?;
    s.flush()
}

/// Accept connections forever, one thread per peer.
pub fn serve(listener: TcpListener, bus: Arc<Mutex<Bus>>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let bus = Arc::clone(&bus);
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = serve_connection(stream, bus) {
                log::warn!("connection {peer:?} ended: {e}");
            }
        });
    }
    Ok(())
}

/// Serve a single peer until it disconnects.
pub fn serve_connection(stream: TcpStream, bus: Arc<Mutex<Bus>>) -> io::Result<()> {
    let mut reader = stream.try_clone()?;
    let writer = Arc::new(Mutex::new(stream));
    let mut decoder = FrameDecoder::default();
    let mut buf = [0u8; 8192];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            return Ok(());
        }
        decoder.push(&buf[..n]);
        loop {
            let msg = match decoder.next_message() {
                Ok(Some(m)) => m,
                Ok(None) => break,
                Err(e @ FrameError::OversizeMessage { .. }) => {
                    return Err(io::Error::new(io::ErrorKind::InvalidData, e));
                }
                Err(e) => {
                    log::warn!("dropping bad frame: {e}");
                    continue;
                }
            };
            if let Message::Request {
                id,
                method: Method::Subscribe,
                params,
            } = &msg
            {
                let parsed: Result<SubscribeParams, _> = match params {
                    None | Some(Value::Null) => Ok(SubscribeParams::default()),
                    Some(p) => serde_json::from_value(p.clone()),
                };
                match parsed {
                    Ok(p) => {
                        let (rx, seq) = {
                            let mut bus = bus.lock().unwrap_or_else(|p| p.into_inner());
                            (bus.subscribe(p.replay_from), bus.registry().seq())
                        };
                        write_message(&writer, &Message::result(*id, serde_json::json!({ "seq": seq })))?;
                        let w = Arc::clone(&writer);
                        thread::spawn(move || {
                            for event in rx {
                                let note = Message::notification(Method::Event, serde_json::to_value(&event).ok());
                                if write_message(&w, &note).is_err() {
                                    break;
                                }
                            }
                        });
                    }
                    Err(e) => {
                        let err = RpcError::new(RpcError::INVALID_PARAMS, e.to_string());
                        write_message(&writer, &Message::error(*id, err))?;
                    }
                }
                continue;
            }
            let reply = bus.lock().unwrap_or_else(|p| p.into_inner()).handle_message(msg);
            if let Some(reply) = reply {
                write_message(&writer, &reply)?;
            }
        }
    }
}

/// Blocking JSON-RPC client. Events that arrive while waiting for a
/// response are queued for [`TcpClient::next_event`].
pub struct TcpClient {
    stream: TcpStream,
    decoder: FrameDecoder,
    next_id: u64,
    events: VecDeque<GraphEvent>,
}

impl TcpClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, ClientError> {
        Ok(Self {
            stream: TcpStream::connect(addr)?,
            decoder: FrameDecoder::default(),
            next_id: 1,
            events: VecDeque::new(),
        })
    }

    fn read_message(&mut self) -> Result<Message, ClientError> {
        let mut buf = [0u8; 8192];
        loop {
            if let Some(m) = self.decoder.next_message()? {
                return Ok(m);
            }
            let n = self.stream.read(&mut buf)?;
            if n == 0 {
                return Err(ClientError::Closed);
            }
            self.decoder.push(&buf[..n]);
        }
    }

    fn queue_event(&mut self, params: Option<Value>) -> Result<(), ClientError> {
        let event = serde_json::from_value(params.unwrap_or(Value::Null))
            .map_err(|e| ClientError::Protocol(format!("bad event: {e}")))?;
        self.events.push_back(event);
        Ok(())
    }

    pub fn call(&mut self, method: Method, params: Option<Value>) -> Result<Value, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        let frame = encode_frame(&Message::request(id, method, params))?;
        self.stream.write_all(&frame)?;
        loop {
            match self.read_message()? {
                Message::Response { id: rid, outcome } if rid == id => return outcome.map_err(ClientError::Remote),
                Message::Notification {
                    method: Method::Event,
                    params,
                } => self.queue_event(params)?,
                other => return Err(ClientError::Protocol(format!("unexpected message {other:?}"))),
            }
        }
    }

    pub fn notify(&mut self, method: Method, params: Option<Value>) -> Result<(), ClientError> {
        let frame = encode_frame(&Message::notification(method, params))?;
        self.stream.write_all(&frame)?;
        Ok(())
    }

    /// Next graph event pushed by the server, blocking until one arrives.
    pub fn next_event(&mut self) -> Result<GraphEvent, ClientError> {
        loop {
            if let Some(e) = self.events.pop_front() {
                return Ok(e);
            }
            match self.read_message()? {
                Message::Notification {
                    method: Method::Event,
                    params,
                } => self.queue_event(params)?,
                other => return Err(ClientError::Protocol(format!("unexpected message {other:?}"))),
            }
        }
    }
}
