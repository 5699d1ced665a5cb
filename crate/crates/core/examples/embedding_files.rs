//! Writing, inspecting and reading SMOS embedding files.
//!
//! ```text
//! cargo run --example embedding_files
//! ```

use batchmos::data::embeddings::read_embedding_header;
use batchmos::data::{read_embeddings, write_embeddings, EmbeddingTable};

fn main() -> batchmos::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("xvector.smos");

    let mut table = EmbeddingTable::new("xvector", 4)?;
    table.push("clip_001", vec![0.25, -1.0, 3.5, 0.0])?;
    table.push("clip_002", vec![1.0, 2.0, 3.0, 4.0])?;
    write_embeddings(&table, &path)?;

    let bytes = std::fs::read(&path).expect("just written");
    let header = read_embedding_header(&bytes)?;
    println!("{} bytes, ptm_id {}, dim {}, count {}", bytes.len(), header.ptm_id, header.dim, header.count);
    println!("header bytes: {:02x?}", &bytes[..bytes.len() - 2 * (2 + 8 + 16)]);

    let back = read_embeddings(&path)?;
    assert_eq!(back, table);
    println!("clip_002 -> {:?}", back.get("clip_002").unwrap());

    // a truncated file is rejected with the offset where reading stopped
    std::fs::write(&path, &bytes[..bytes.len() - 3]).expect("write");
    println!("truncated: {}", read_embeddings(&path).unwrap_err());

    // a vector of the wrong width never makes it into a table
    println!("wrong dim: {}", table.push("clip_003", vec![1.0; 3]).unwrap_err());
    Ok(())
}
