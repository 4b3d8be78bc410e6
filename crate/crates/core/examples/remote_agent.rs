//! Agents backed by a chat-completion endpoint.
//!
//! With `DELIB_ENDPOINT` (and optionally `DELIB_MODEL`) set, prompts go to
//! that endpoint. Otherwise a tiny local stand-in answers every prompt.
//!
//! `DELIB_ENDPOINT=http://localhost:8000/v1/chat/completions cargo run --example remote_agent`

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use delibchain::agent::{AgentBehavior, ChatRequest};
use delibchain::crypto::NodeIdentity;
use delibchain::domain::Problem;
use delibchain::engine::{AgentSpec, DeliberationConfig, Engine};

/// Answers "42" to everything, one request per connection.
fn local_stand_in() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    thread::spawn(move || {
        for mut stream in listener.incoming().flatten() {
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut line = String::new();
            while reader.read_line(&mut line).unwrap_or(0) > 0 && line != "\r\n" {
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
                line.clear();
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            let request: Option<ChatRequest> = serde_json::from_slice(&body).ok();
            let turn = request.map_or(0, |r| {
                r.messages
                    .last()
                    .map_or(0, |m| m.content.matches("[Agent").count())
            });
            let content = format!("Reviewed {turn} responses. 17 + 25 = 42.\nANSWER: 42");
            let payload =
                serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    url
}

fn main() {
    let endpoint = std::env::var("DELIB_ENDPOINT").unwrap_or_else(|_| local_stand_in());
    let model = std::env::var("DELIB_MODEL").unwrap_or_else(|_| "stand-in".into());
    println!("endpoint {endpoint}, model {model}");

    let agents = (0..3)
        .map(|i| {
            let behavior = AgentBehavior::Remote {
                endpoint: endpoint.clone(),
                model: model.clone(),
                timeout: Duration::from_secs(60),
            };
            AgentSpec::new(NodeIdentity::derive(50, i), behavior)
        })
        .collect();
    let config = DeliberationConfig::new(agents, 2);
    let problem = Problem::definitive("sum", "What is 17 + 25?")
        .unwrap()
        .with_ground_truth("42");
    let r = Engine::new().run_deliberation(&config, &problem).unwrap();

    for u in &r.transcript {
        println!(
            "[{:?} {}] {}: {}",
            u.round,
            u.turn,
            u.agent.short(),
            u.body.lines().last().unwrap_or("")
        );
    }
    println!(
        "outcome {:?}, value {:?}, abstentions {}",
        r.record.outcome, r.record.consensus.value, r.metrics.abstentions
    );
}
