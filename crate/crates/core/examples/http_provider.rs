//! The `/embed` HTTP provider against a loopback stub server.
//!
//! A real deployment points `base_url` at an embedding service; the stub here
//! answers with a toy bag-of-letters embedding so the example is
//! self-contained.
//!
//! ```bash
//! cargo run -p sse-curate --example http_provider
//! ```

use sse_curate::providers::stub::StubServer;
use sse_curate::vecstore::cosine;
use sse_curate::{embed_query, embed_texts, ProviderConfig};

fn letters(text: &str) -> Vec<f32> {
    let mut v = vec![0.0f32; 26];
    for c in text
        .to_ascii_lowercase()
        .bytes()
        .filter(u8::is_ascii_lowercase)
    {
        v[(c - b'a') as usize] += 1.0;
    }
    v
}

fn main() -> sse_curate::Result<()> {
    let server = StubServer::start(|_model, texts| Ok(texts.iter().map(|t| letters(t)).collect()))
        .expect("bind loopback port");

    let cfg = ProviderConfig::Http {
        base_url: server.base_url(),
        model: "toy-letters".into(),
        timeout_secs: 5.0,
        max_batch: 2,
        retries: 1,
    };
    let captions: Vec<String> = [
        "rainy highway at night",
        "sunny parking lot",
        "night rain on a highway",
        "school zone with children",
        "parking garage entrance",
    ]
    .map(String::from)
    .to_vec();

    let m = embed_texts(&cfg, &captions)?;
    println!(
        "{} captions embedded in {} requests",
        m.count(),
        server.requests()
    );

    let q = embed_query(&cfg, "highway in the rain")?;
    for (i, caption) in captions.iter().enumerate() {
        println!("{:.3}  {caption}", cosine(&q, m.row(i))?);
    }
    Ok(())
}
