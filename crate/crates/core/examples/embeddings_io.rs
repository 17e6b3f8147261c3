//! Writing and reading SSEV embedding files, and the cosine kernels.
//!
//! ```bash
//! cargo run -p sse-curate --example embeddings_io
//! ```

use sse_curate::vecstore::{cosine, normalized, pairwise_distances, HEADER_LEN};
use sse_curate::{read_embeddings, write_embeddings, EmbeddingMatrix};

fn main() -> sse_curate::Result<()> {
    // Raw model output is rarely unit length; normalize at the boundary.
    let raw = [
        vec![3.0f32, 4.0, 0.0],
        vec![0.0, 2.0, 2.0],
        vec![1.0, 0.0, 0.0],
        vec![3.1, 3.9, 0.1],
    ];
    let rows: Vec<Vec<f32>> = raw.iter().map(|r| normalized(r)).collect();
    let m = EmbeddingMatrix::from_rows(&rows, true)?;

    let dir = std::env::temp_dir().join("sse-embeddings-io");
    std::fs::create_dir_all(&dir).map_err(|e| sse_curate::Error::Format(e.to_string()))?;
    let path = dir.join("captions.ssev");
    write_embeddings(&m, &path)?;
    let size = std::fs::metadata(&path).map(|md| md.len()).unwrap_or(0);
    println!(
        "wrote {} x {} matrix: {size} bytes ({HEADER_LEN}-byte header + {} floats)",
        m.count(),
        m.dim(),
        m.count() * m.dim()
    );

    let back = read_embeddings(&path)?;
    assert_eq!(back, m);
    println!("read back: normalized flag = {}", back.is_normalized());

    println!("cos(row0, row3) = {:.4}", cosine(back.row(0), back.row(3))?);
    let d = pairwise_distances(&[0, 1, 2, 3], &back)?;
    println!("cosine distances:");
    for i in 0..d.len() {
        let row: Vec<String> = d.row(i).iter().map(|x| format!("{x:.3}")).collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
