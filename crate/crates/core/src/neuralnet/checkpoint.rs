//! Text checkpoint format.
//!
//! ```text
//! ITERLEARN-CHECKPOINT 1
//! vocab_size 15
//! embed 20
//! hidden 20
//! vocab <pad> <bos> <eos> left right up down 1 2 3 m1 m2 m3 m4 m5
//! param embedding 15 20
//! <one row of 20 floats>
//! ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so save/load is exact.

use std::io::{BufRead, Write};

use thiserror::Error;

use super::model::{AgentModel, ModelDims, Param};
use crate::token::{join_tokens, parse_tokens, Vocabulary};

pub const MAGIC: &str = "ITERLEARN-CHECKPOINT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_checkpoint<W: Write>(model: &AgentModel, mut w: W) -> std::io::Result<()> {
    let d = model.dims();
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "vocab_size {}", d.vocab)?;
    writeln!(w, "embed {}", d.embed)?;
    writeln!(w, "hidden {}", d.hidden)?;
    writeln!(w, "vocab {}", join_tokens(Vocabulary::standard().tokens()))?;
    for p in Param::ALL {
        let (rows, cols) = p.shape(d);
        writeln!(w, "param {} {rows} {cols}", p.name())?;
        for row in model.block(p).chunks_exact(cols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    writeln!(w, "end")
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<AgentModel, CheckpointError> {
    let mut lines = r.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String), CheckpointError> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(CheckpointError::Format {
                line: 0,
                msg: format!("unexpected end of file, wanted {what}"),
            }),
        }
    };
    let fail = |line: usize, msg: String| CheckpointError::Format { line, msg };

    let (ln, header) = next("header")?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(fail(ln, format!("bad magic/version {header:?}")));
    }
    let mut field = |name: &str| -> Result<usize, CheckpointError> {
        let (ln, l) = next(name)?;
        l.strip_prefix(name)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| fail(ln, format!("expected `{name} <int>`")))
    };
    let dims = ModelDims {
        vocab: field("vocab_size")?,
        embed: field("embed")?,
        hidden: field("hidden")?,
    };
    let (ln, vocab_line) = next("vocab")?;
    let tokens = vocab_line
        .strip_prefix("vocab ")
        .map(parse_tokens)
        .and_then(Result::ok)
        .ok_or_else(|| fail(ln, "bad vocabulary line".into()))?;
    if tokens.as_slice() != Vocabulary::standard().tokens() || dims.vocab != tokens.len() {
        return Err(fail(
            ln,
            "vocabulary does not match the standard inventory".into(),
        ));
    }

    let mut model = AgentModel::zeros(dims);
    for _ in Param::ALL {
        let (ln, head) = next("param header")?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        let (name, rows, cols) = match parts.as_slice() {
            ["param", name, r, c] => (*name, r.parse::<usize>(), c.parse::<usize>()),
            _ => return Err(fail(ln, format!("bad param header {head:?}"))),
        };
        let p =
            Param::from_name(name).ok_or_else(|| fail(ln, format!("unknown parameter {name}")))?;
        if (rows.ok(), cols.ok()) != (Some(p.shape(dims).0), Some(p.shape(dims).1)) {
            return Err(fail(ln, format!("shape mismatch for {name}")));
        }
        let (rows, cols) = p.shape(dims);
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) = next("parameter row")?;
            let parsed: Result<Vec<f64>, _> =
                row.split_whitespace().map(str::parse::<f64>).collect();
            let parsed = parsed.map_err(|e| fail(ln, e.to_string()))?;
            if parsed.len() != cols {
                return Err(fail(
                    ln,
                    format!("expected {cols} values, got {}", parsed.len()),
                ));
            }
            values.extend(parsed);
        }
        model.block_mut(p).copy_from_slice(&values);
    }
    let (ln, end) = next("end")?;
    if end != "end" {
        return Err(fail(ln, "missing end marker".into()));
    }
    Ok(model)
}

pub fn save(model: &AgentModel, path: &std::path::Path) -> std::io::Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(model, &mut w)?;
    w.flush()
}

pub fn load(path: &std::path::Path) -> Result<AgentModel, CheckpointError> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}
