//! Parses a Java file and shows which declaration encloses each line.
//!
//! cargo run --example structure_map [-- File.java]

use cbt_core::structure::parse_structure;

const SAMPLE: &str = "package demo;

public class Counter {
    private int count;

    public void increment() {
        count++;
    }

    class Inner {
        int get() { return count; }
    }
}
";

fn main() -> anyhow::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let structure = parse_structure(&text).map_err(|f| anyhow::anyhow!("parse failed: {f}"))?;
    for decl in &structure.decls {
        println!("{:?} {} lines {}-{}", decl.kind, decl.name, decl.start_line, decl.end_line);
    }
    println!();
    for (i, line) in text.lines().enumerate() {
        let loc = structure.locate(i + 1);
        let method = loc.method.as_deref().unwrap_or("");
        println!("{:>3} {:<28} | {line}", i + 1, method);
    }
    Ok(())
}
