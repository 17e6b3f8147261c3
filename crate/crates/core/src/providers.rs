//! Text to vector providers.
//!
//! Two backends sit behind [`ProviderConfig`]:
//!
//! * `file`: rows of an SSEV file bound to the input texts by position, plus
//!   an optional JSON sidecar mapping query strings to vectors.
//! * `http`: `POST {base_url}/embed` with `{"model", "texts"}`, answered by
//!   `{"embeddings": [[f32]]}`. Large inputs are split into batches of at most
//!   `max_batch` texts, sent concurrently and reassembled in input order.
//!
//! Every vector leaving a provider is unit-normalized. HTTP services are
//! expected to be deterministic: the same text must always map to the same
//! vector, whatever batch it arrives in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::read_json;
use crate::error::{Error, Result};
use crate::vecstore::{normalized, read_embeddings, EmbeddingMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        query_sidecar: Option<PathBuf>,
    },
    Http {
        base_url: String,
        model: String,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default = "default_batch")]
        max_batch: usize,
        #[serde(default)]
        retries: u32,
    },
}

fn default_timeout() -> f64 {
    30.0
}

fn default_batch() -> usize {
    64
}

impl ProviderConfig {
    pub fn http(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        ProviderConfig::Http {
            base_url: base_url.into(),
            model: model.into(),
            timeout_secs: default_timeout(),
            max_batch: default_batch(),
            retries: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ProviderConfig::Http {
            timeout_secs,
            max_batch,
            base_url,
            ..
        } = self
        {
            if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "timeout {timeout_secs} must be > 0"
                )));
            }
            if *max_batch == 0 {
                return Err(Error::InvalidParam("max_batch must be >= 1".into()));
            }
            if base_url.is_empty() {
                return Err(Error::InvalidParam("base_url is empty".into()));
            }
        }
        Ok(())
    }

    /// Reads a JSON config. Relative file paths resolve against the config
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: ProviderConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let ProviderConfig::File {
            path: p,
            query_sidecar,
        } = &mut cfg
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if let Some(s) = query_sidecar.as_mut().filter(|s| s.is_relative()) {
                *s = base.join(&*s);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        self.validate()?;
        Ok(match self {
            ProviderConfig::File {
                path,
                query_sidecar,
            } => Box::new(FileProvider {
                path: path.clone(),
                query_sidecar: query_sidecar.clone(),
            }),
            ProviderConfig::Http {
                base_url,
                model,
                timeout_secs,
                max_batch,
                retries,
            } => Box::new(HttpProvider::new(
                base_url,
                model,
                Duration::from_secs_f64(*timeout_secs),
                *max_batch,
                *retries,
            )?),
        })
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// One normalized row per text, in input order.
    fn embed_texts(&self, texts: &[String]) -> Result<EmbeddingMatrix>;

    /// A single normalized vector for a retrieval query.
    fn embed_query(&self, query: &str) -> Result<Vec<f32>>;
}

pub fn embed_texts(cfg: &ProviderConfig, texts: &[String]) -> Result<EmbeddingMatrix> {
    cfg.build()?.embed_texts(texts)
}

pub fn embed_query(cfg: &ProviderConfig, query: &str) -> Result<Vec<f32>> {
    cfg.build()?.embed_query(query)
}

#[derive(Debug, Clone)]
pub struct FileProvider {
    pub path: PathBuf,
    pub query_sidecar: Option<PathBuf>,
}

impl EmbeddingProvider for FileProvider {
    fn embed_texts(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        let m = read_embeddings(&self.path)?;
        if m.count() != texts.len() {
            return Err(Error::Provider(format!(
                "{} has {} rows but {} texts were given",
                self.path.display(),
                m.count(),
                texts.len()
            )));
        }
        Ok(if m.is_normalized() { m } else { m.normalize() })
    }

    fn embed_query(&self, query: &str) -> Result<Vec<f32>> {
        if query.is_empty() {
            return Err(Error::InvalidParam("query is empty".into()));
        }
        let Some(sidecar) = &self.query_sidecar else {
            return Err(Error::Provider(
                "file provider has no query sidecar; queries cannot be embedded".into(),
            ));
        };
        let table: BTreeMap<String, Vec<f32>> = read_json(sidecar)?;
        let v = table.get(query).ok_or_else(|| {
            Error::Provider(format!(
                "query {query:?} not found in {}",
                sidecar.display()
            ))
        })?;
        let m = EmbeddingMatrix::from_rows(&[v], false)?;
        Ok(normalized(m.row(0)))
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

#[derive(Debug)]
pub struct HttpProvider {
    endpoint: String,
    model: String,
    max_batch: usize,
    retries: u32,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(
        base_url: &str,
        model: &str,
        timeout: Duration,
        max_batch: usize,
        retries: u32,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Provider(format!("http client: {e}")))?;
        Ok(Self {
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            model: model.to_string(),
            max_batch: max_batch.max(1),
            retries,
            client,
        })
    }

    fn post_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        let mut last_err = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                log::debug!("retrying {} (attempt {})", self.endpoint, attempt + 1);
            }
            let resp = self
                .client
                .post(&self.endpoint)
                .json(&EmbedRequest {
                    model: &self.model,
                    texts,
                })
                .send();
            match resp {
                Err(e) => last_err = format!("request to {} failed: {e}", self.endpoint),
                Ok(r) if r.status() != reqwest::StatusCode::OK => {
                    last_err = format!("{} returned {}", self.endpoint, r.status());
                    if r.status().is_client_error() {
                        break;
                    }
                }
                Ok(r) => {
                    let body: EmbedResponse = r
                        .json()
                        .map_err(|e| Error::Provider(format!("bad response body: {e}")))?;
                    if body.embeddings.len() != texts.len() {
                        return Err(Error::Provider(format!(
                            "sent {} texts, received {} embeddings",
                            texts.len(),
                            body.embeddings.len()
                        )));
                    }
                    return Ok(body.embeddings);
                }
            }
        }
        Err(Error::Provider(last_err))
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed_texts(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        if texts.is_empty() {
            return Err(Error::InvalidParam("no texts to embed".into()));
        }
        let batches: Vec<Vec<Vec<f32>>> = texts
            .par_chunks(self.max_batch)
            .map(|chunk| self.post_batch(chunk))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f32>> = batches.into_iter().flatten().collect();
        Ok(EmbeddingMatrix::from_rows(&rows, false)?.normalize())
    }

    fn embed_query(&self, query: &str) -> Result<Vec<f32>> {
        if query.is_empty() {
            return Err(Error::InvalidParam("query is empty".into()));
        }
        let m = self.embed_texts(&[query.to_string()])?;
        Ok(m.row(0).to_vec())
    }
}

/// A loopback HTTP server speaking the `/embed` contract, backed by a
/// caller-supplied function. Meant for tests and examples.
pub mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{SocketAddr, TcpListener, TcpStream};
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::thread::JoinHandle;

    pub type Handler = dyn Fn(&str, &[String]) -> Result<Vec<Vec<f32>>, u16> + Send + Sync;

    pub struct StubServer {
        addr: SocketAddr,
        stop: Arc<AtomicBool>,
        requests: Arc<AtomicUsize>,
        handle: Option<JoinHandle<()>>,
    }

    impl StubServer {
        /// Starts serving on an ephemeral port. The handler receives the model
        /// name and texts, and returns rows or an HTTP status to fail with.
        pub fn start<F>(handler: F) -> std::io::Result<Self>
        where
            F: Fn(&str, &[String]) -> Result<Vec<Vec<f32>>, u16> + Send + Sync + 'static,
        {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let stop = Arc::new(AtomicBool::new(false));
            let requests = Arc::new(AtomicUsize::new(0));
            let handler: Arc<Handler> = Arc::new(handler);
            let (stop2, req2) = (stop.clone(), requests.clone());
            let handle = std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop2.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let h = handler.clone();
                    let r = req2.clone();
                    std::thread::spawn(move || {
                        r.fetch_add(1, Ordering::SeqCst);
                        let _ = serve(conn, &*h);
                    });
                }
            });
            Ok(Self {
                addr,
                stop,
                requests,
                handle: Some(handle),
            })
        }

        pub fn base_url(&self) -> String {
            format!("http://{}", self.addr)
        }

        /// Number of requests accepted so far.
        pub fn requests(&self) -> usize {
            self.requests.load(Ordering::SeqCst)
        }
    }

    impl Drop for StubServer {
        fn drop(&mut self) {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
    }

    fn serve(stream: TcpStream, handler: &Handler) -> std::io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut request_line = String::new();
        reader.read_line(&mut request_line)?;
        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.trim().eq_ignore_ascii_case("content-length") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body)?;

        let path_ok = request_line.starts_with("POST /embed ");
        let (status, payload) = match (path_ok, serde_json::from_slice::<serde_json::Value>(&body))
        {
            (false, _) => (404, String::from("{}")),
            (true, Err(_)) => (400, String::from("{\"error\":\"malformed json\"}")),
            (true, Ok(v)) => {
                let model = v["model"].as_str().unwrap_or_default().to_string();
                let texts: Option<Vec<String>> = v["texts"].as_array().map(|a| {
                    a.iter()
                        .filter_map(|t| t.as_str().map(String::from))
                        .collect()
                });
                match texts {
                    None => (400, String::from("{\"error\":\"missing texts\"}")),
                    Some(texts) => match handler(&model, &texts) {
                        Ok(rows) => (200, serde_json::json!({ "embeddings": rows }).to_string()),
                        Err(code) => (code, String::from("{\"error\":\"stub failure\"}")),
                    },
                }
            }
        };
        let mut out = stream;
        write!(
            out,
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            payload.len()
        )?;
        out.flush()
    }
}
