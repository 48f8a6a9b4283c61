//! Writes a binary matrix container, reads it back and shows the error a
//! truncated file produces.
//!
//! ```text
//! cargo run --example container_io
//! ```

use rubriclab::io::{decode_container, read_container, write_container, Container};
use rubriclab::RowMatrix;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u01.bin");
    let logits = RowMatrix::new(3, 2, vec![2.0, -1.0, 0.5, 0.25, -3.0, 4.0]).unwrap();
    let labels = vec!["a".to_string(), "sil".to_string()];
    write_container(&path, &Container::new(logits, 20.0, labels)).unwrap();

    let bytes = std::fs::read(&path).unwrap();
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
    println!("header: {}", String::from_utf8_lossy(&bytes[..header_end]));
    println!("payload: {} bytes", bytes.len() - header_end - 1);

    let back = read_container(&path).unwrap();
    for f in 0..back.matrix.rows() {
        println!("frame {f}: {:?}", back.matrix.row(f));
    }

    let err = decode_container(&bytes[..bytes.len() - 2], &path).unwrap_err();
    println!("truncated: {err}");
}
