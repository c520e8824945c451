//! Wire format properties and the TCP transport against the canonical scenario.

use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use goagentnet_core::protocol::{
    decode_frame, encode_frame, serve, Bus, ClientError, FrameDecoder, FrameError, Message, Method, RpcError,
    TcpClient,
};
use goagentnet_core::registry::{AgentProfile, EventKind, NodeId};
use goagentnet_core::scenario::{Scenario, SimAgent};
use proptest::prelude::*;
use serde_json::{json, Value};

fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::from),
        (-1e9f64..1e9).prop_map(Value::from),
        ".{0,16}".prop_map(Value::String),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map(".{0,8}", inner, 0..4).prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn message() -> impl Strategy<Value = Message> {
    let method = prop::sample::select(Method::ALL.to_vec());
    prop_oneof![
        (any::<u64>(), method.clone(), prop::option::of(json_value())).prop_map(|(id, m, p)| Message::request(id, m, p)),
        (method, prop::option::of(json_value())).prop_map(|(m, p)| Message::notification(m, p)),
        (any::<u64>(), json_value()).prop_map(|(id, v)| Message::result(id, v)),
        (any::<u64>(), any::<i64>(), ".{0,24}").prop_map(|(id, c, m)| Message::error(id, RpcError::new(c, m))),
    ]
}

proptest! {
    #[test]
    fn frames_round_trip(msgs in prop::collection::vec(message(), 1..16), cut in 1usize..64) {
        let mut stream = Vec::new();
        for m in &msgs {
            let frame = encode_frame(m).unwrap();
            let (back, rest) = decode_frame(&frame).unwrap();
            prop_assert_eq!(&back, m);
            prop_assert!(rest.is_empty());
            stream.extend(frame);
        }
        let mut decoder = FrameDecoder::default();
        let mut out = Vec::new();
        for chunk in stream.chunks(cut) {
            decoder.push(chunk);
            while let Some(m) = decoder.next_message().unwrap() {
                out.push(m);
            }
        }
        prop_assert_eq!(out, msgs);
    }

    #[test]
    fn truncated_frames_need_more_bytes(m in message(), frac in 0.0f64..1.0) {
        let frame = encode_frame(&m).unwrap();
        let cut = ((frame.len() as f64) * frac) as usize;
        prop_assert!(matches!(decode_frame(&frame[..cut]), Err(FrameError::NeedMoreBytes)));
    }
}

#[test]
fn oversize_and_malformed_frames_are_rejected() {
    let mut decoder = FrameDecoder::new(16);
    decoder.push(&[0, 0, 1, 0]);
    assert!(matches!(decoder.next_message(), Err(FrameError::OversizeMessage { size: 256, limit: 16 })));

    let body = b"{\"jsonrpc\":\"2.0\",\"id\":1,\"method\":\"agent/teleport\"}";
    let mut frame = (body.len() as u32).to_be_bytes().to_vec();
    frame.extend_from_slice(body);
    assert!(matches!(decode_frame(&frame), Err(FrameError::UnknownMethod(m)) if m == "agent/teleport"));

    let mut frame = 3u32.to_be_bytes().to_vec();
    frame.extend_from_slice(b"{x}");
    assert!(matches!(decode_frame(&frame), Err(FrameError::MalformedJson(_))));

    // A bad frame is dropped and the decoder resynchronises on the next one.
    let mut decoder = FrameDecoder::default();
    decoder.push(&frame);
    decoder.push(&encode_frame(&Message::request(2, Method::Ping, None)).unwrap());
    assert!(decoder.next_message().is_err());
    assert_eq!(decoder.next_message().unwrap(), Some(Message::request(2, Method::Ping, None)));
}

fn start_server() -> (String, Scenario) {
    let scenario = Scenario::canonical();
    let catalog = scenario.knowledge.get_representations("robotic_fdr").unwrap().to_vec();
    let mut bus = Bus::new(scenario.registry.clone());
    for p in scenario.registry.graph().nodes() {
        bus.attach(p.id, Box::new(SimAgent::new(p.clone(), catalog.clone()))).unwrap();
    }
    let factory_catalog = catalog.clone();
    bus.set_handler_factory(Box::new(move |p: &AgentProfile| {
        Box::new(SimAgent::new(p.clone(), factory_catalog.clone()))
    }));
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let bus = Arc::new(Mutex::new(bus));
    thread::spawn(move || serve(listener, bus));
    (addr, scenario)
}

#[test]
fn tcp_ping_query_and_invoke() {
    let (addr, _) = start_server();
    let mut client = TcpClient::connect(&addr).unwrap();
    assert_eq!(client.call(Method::Ping, None).unwrap(), json!("pong"));
    assert_eq!(
        client.call(Method::Query, Some(json!({ "capability_name": "extract_edge_points" }))).unwrap(),
        json!([5])
    );
    let out = client
        .call(
            Method::Invoke,
            Some(json!({
                "target": 5,
                "capability": "extract_edge_points",
                "data_type": {"kind": "raw_point_cloud", "modality": "point_cloud", "unit": "bits"},
                "size_bits": 40000000u64,
                "payload_ref": "sim://0"
            })),
        )
        .unwrap();
    assert_eq!(out["result"]["representation"], "edge_points");
    assert_eq!(out["sim_latency_s"], 0.1);

    let err = client
        .call(
            Method::Invoke,
            Some(json!({
                "target": 99,
                "capability": "x",
                "data_type": {"kind": "any", "modality": "any", "unit": "bits"},
                "size_bits": 1,
                "payload_ref": ""
            })),
        )
        .unwrap_err();
    assert!(matches!(err, ClientError::Remote(e) if e.code == RpcError::UNKNOWN_TARGET));
    let err = client.call(Method::Invoke, Some(json!({ "target": 1 }))).unwrap_err();
    assert!(matches!(err, ClientError::Remote(e) if e.code == RpcError::INVALID_PARAMS));
}

#[test]
fn tcp_subscribers_see_membership_changes() {
    let (addr, scenario) = start_server();
    let mut watcher = TcpClient::connect(&addr).unwrap();
    let ack = watcher.call(Method::Subscribe, None).unwrap();
    assert_eq!(ack["seq"], json!(scenario.registry.seq()));

    let mut admin = TcpClient::connect(&addr).unwrap();
    let mut profile = scenario.registry.graph().node(NodeId(9)).unwrap().clone();
    profile.id = NodeId(12);
    profile.name = "backup_link".into();
    let joined = admin.call(Method::Register, Some(serde_json::to_value(&profile).unwrap())).unwrap();
    admin.call(Method::Deregister, Some(json!({ "id": 12 }))).unwrap();

    let e1 = watcher.next_event().unwrap();
    let e2 = watcher.next_event().unwrap();
    assert_eq!((e1.kind, e2.kind), (EventKind::Joined, EventKind::Left));
    assert_eq!(json!(e1.seq), joined["seq"]);
    assert_eq!(e2.seq, e1.seq + 1);

    // A late subscriber replays the log from a given sequence number.
    let mut late = TcpClient::connect(&addr).unwrap();
    late.call(Method::Subscribe, Some(json!({ "replay_from": e1.seq - 1 }))).unwrap();
    assert_eq!(late.next_event().unwrap(), e1);
    assert_eq!(late.next_event().unwrap(), e2);
}

#[test]
fn tcp_rejects_duplicate_registration() {
    let (addr, scenario) = start_server();
    let mut client = TcpClient::connect(&addr).unwrap();
    let profile = scenario.registry.graph().node(NodeId(1)).unwrap();
    let err = client.call(Method::Register, Some(serde_json::to_value(profile).unwrap())).unwrap_err();
    assert!(matches!(err, ClientError::Remote(e) if e.code == RpcError::REGISTRY));
    let err = client.call(Method::Event, None).unwrap_err();
    assert!(matches!(err, ClientError::Remote(e) if e.code == RpcError::INVALID_REQUEST));
}
