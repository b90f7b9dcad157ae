use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

/// Deterministic chat-completions fixture. The first `failures` requests get
/// the given status; after that every request is answered with a summary of
/// the final user turn followed by a second line the client must drop.
pub struct ChatFixture {
    pub base: String,
    #[allow(dead_code)]
    pub requests: Arc<Mutex<Vec<Value>>>,
}

pub fn chat_fixture(failures: Vec<u16>) -> ChatFixture {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let base = format!("http://{}/v1", server.server_addr().to_ip().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = requests.clone();
    std::thread::spawn(move || {
        let mut failures = failures.into_iter();
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let v: Value = serde_json::from_str(&body).unwrap();
            log.lock().unwrap().push(v.clone());
            if let Some(status) = failures.next() {
                let header = tiny_http::Header::from_bytes("Retry-After", "0").unwrap();
                let err = json!({"error": {"message": "try later", "code": null}}).to_string();
                req.respond(tiny_http::Response::from_string(err).with_status_code(status).with_header(header)).unwrap();
                continue;
            }
            let last = v["messages"].as_array().unwrap().last().unwrap()["content"].as_str().unwrap();
            let words: Vec<&str> = last.split_whitespace().skip(2).take(3).collect();
            let content = format!(" Added {}\nextra line", words.join(" "));
            let reply = json!({"id": "x", "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]});
            req.respond(tiny_http::Response::from_string(reply.to_string())).unwrap();
        }
    });
    ChatFixture { base, requests }
}
