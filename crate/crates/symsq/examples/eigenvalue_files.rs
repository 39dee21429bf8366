//! Eigenvalue record files: write the built-in forms, read them back,
//! validate, and validate the shipped decimal records.
//!
//! cargo run --example eigenvalue_files

use std::path::Path;
use symsq::data::{load_records, validate_record, write_records, EigenvalueRecord};
use symsq::qexp::{eta_newform, ETA_LEVELS};

fn main() -> symsq::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("builtin.jsonl");
    let records = ETA_LEVELS
        .iter()
        .map(|&q| {
            let f = eta_newform(q, 500)?;
            Ok(EigenvalueRecord::from_newform(&format!("{q}.{}.a.a", f.weight()), &f))
        })
        .collect::<symsq::Result<Vec<_>>>()?;
    write_records(&path, &records)?;
    let first = std::fs::read_to_string(&path)?;
    println!("{}...", &first[..first.find('\n').unwrap_or(first.len()).min(100)]);
    for r in load_records(&path)? {
        println!("{}: exact {}, {} coefficients, valid {}", r.label, r.is_exact(), r.len(), validate_record(&r).passed);
    }
    for file in ["basis_5_8.jsonl", "basis_11_4.jsonl"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(file);
        for r in load_records(&path)? {
            let rep = validate_record(&r);
            println!("{file} {}: precision {}, valid {}", r.label, r.precision, rep.passed);
        }
    }
    Ok(())
}
