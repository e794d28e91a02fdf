//! In-process HTTP stub standing in for a gateway.

#![allow(dead_code)]

use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use semcomm_core::image_io::encode_png;
use semcomm_core::{load_image, ImageFormat, RasterImage};
use serde_json::Value;

#[derive(Debug, Clone)]
pub struct Recorded {
    pub path: String,
    pub body: Vec<u8>,
    pub request_id: Option<String>,
    pub authorization: Option<String>,
}

pub type Reply = (u16, String);

pub struct Stub {
    pub url: String,
    pub log: Arc<Mutex<Vec<Recorded>>>,
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
}

impl Stub {
    /// `handler(path, parsed body, call index)` produces status and body.
    pub fn spawn<F>(handler: F) -> Stub
    where
        F: Fn(&str, &Value, usize) -> Reply + Send + Sync + 'static,
    {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let log: Arc<Mutex<Vec<Recorded>>> = Arc::default();
        let (s, l) = (server.clone(), log.clone());
        let handler = Arc::new(handler);
        let thread = std::thread::spawn(move || {
            for mut req in s.incoming_requests() {
                let mut body = Vec::new();
                req.as_reader().read_to_end(&mut body).unwrap();
                let header = |name: &'static str| {
                    req.headers()
                        .iter()
                        .find(|h| h.field.equiv(name))
                        .map(|h| h.value.as_str().to_owned())
                };
                let path = req.url().to_owned();
                let index = {
                    let mut log = l.lock().unwrap();
                    log.push(Recorded {
                        path: path.clone(),
                        body: body.clone(),
                        request_id: header("X-Request-Id"),
                        authorization: header("Authorization"),
                    });
                    log.len() - 1
                };
                let parsed: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let (status, text) = handler(&path, &parsed, index);
                let resp = tiny_http::Response::from_string(text)
                    .with_status_code(status)
                    .with_header(
                        "Content-Type: application/json"
                            .parse::<tiny_http::Header>()
                            .unwrap(),
                    );
                let _ = req.respond(resp);
            }
        });
        Stub {
            url,
            log,
            server,
            thread: Some(thread),
        }
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.log.lock().unwrap().clone()
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}


pub fn ok(v: Value) -> Reply {
    (200, v.to_string())
}

pub fn png_b64(img: &RasterImage) -> String {
    B64.encode(encode_png(img).unwrap())
}

pub fn image_from_request(body: &Value) -> RasterImage {
    let b = B64.decode(body["image_png_b64"].as_str().unwrap()).unwrap();
    load_image(&b, Some(ImageFormat::Png)).unwrap()
}
