//! Line-oriented dataset files.
//!
//! ```text
//! d m kind seed
//! y x1 ... xd
//! ...
//! ```
//!
//! Numbers are written as `{:.16e}` (17 significant digits), which round-trips
//! every finite `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DatasetKind, LabeledDataset};
use crate::{Error, Result};

pub fn write_dataset<W: Write>(data: &LabeledDataset, mut w: W) -> Result<()> {
    writeln!(w, "{} {} {} {}", data.dim(), data.len(), data.kind(), data.seed())?;
    for i in 0..data.len() {
        write!(w, "{:.16e}", data.labels()[i])?;
        for v in data.point(i) {
            write!(w, " {v:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<LabeledDataset> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    let header = header?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::Parse { line: 1, msg: format!("expected `d m kind seed`, got `{header}`") });
    }
    let parse_usize = |s: &str, what: &str| {
        s.parse::<usize>().map_err(|e| Error::Parse { line: 1, msg: format!("{what}: {e}") })
    };
    let d = parse_usize(fields[0], "d")?;
    let m = parse_usize(fields[1], "m")?;
    let kind: DatasetKind = fields[2].parse()?;
    let seed = fields[3].parse::<u64>().map_err(|e| Error::Parse { line: 1, msg: format!("seed: {e}") })?;

    let mut points = Vec::with_capacity(d * m);
    let mut labels = Vec::with_capacity(m);
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse { line: lineno, msg: format!("`{t}`: {e}") }))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != d + 1 {
            return Err(Error::Parse { line: lineno, msg: format!("expected {} numbers, found {}", d + 1, values.len()) });
        }
        labels.push(values[0]);
        points.extend_from_slice(&values[1..]);
    }
    if labels.len() != m {
        return Err(Error::Parse { line: labels.len() + 1, msg: format!("header promises {m} rows, found {}", labels.len()) });
    }
    LabeledDataset::new(d, points, labels, kind, seed)
}

pub fn save(data: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(data, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<LabeledDataset> {
    read_dataset(File::open(path)?)
}
