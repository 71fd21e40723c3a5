//! Dataset text format.
//!
//! ```text
//! # n_spins=3 d=2 seed=7
//! +1 -1 +1
//! -1 -1 +1
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{IsingError, Result};
use crate::model::{IsingModel, SpinDataset};

/// A dataset together with the seed recorded in its header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFile {
    pub data: SpinDataset,
    pub seed: u64,
}

impl DatasetFile {
    pub fn to_text(&self) -> String {
        let n = self.data.n_spins();
        let mut out = String::with_capacity(16 + self.data.len() * n * 3);
        let _ = writeln!(out, "# n_spins={} d={} seed={}", n, self.data.len(), self.seed);
        for row in self.data.rows() {
            for (i, &s) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(if s > 0 { "+1" } else { "-1" });
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| IsingError::Parse("empty dataset file".into()))?;
        let (n, d, seed) = parse_header(header)?;
        let mut spins = Vec::with_capacity(n * d);
        let mut rows = 0;
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let before = spins.len();
            for tok in line.split_whitespace() {
                spins.push(match tok {
                    "+1" => 1,
                    "-1" => -1,
                    other => {
                        return Err(IsingError::Parse(format!(
                            "line {}: bad spin token {other:?}",
                            lineno + 2
                        )))
                    }
                });
            }
            if spins.len() - before != n {
                return Err(IsingError::Parse(format!(
                    "line {}: expected {n} spins, found {}",
                    lineno + 2,
                    spins.len() - before
                )));
            }
            rows += 1;
        }
        if rows != d {
            return Err(IsingError::Parse(format!(
                "header declares d={d} but {rows} rows present"
            )));
        }
        Ok(Self {
            data: SpinDataset::from_flat(n, spins)?,
            seed,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_header(line: &str) -> Result<(usize, usize, u64)> {
    let bad = || IsingError::Parse(format!("malformed header {line:?}"));
    let rest = line.strip_prefix('#').ok_or_else(bad)?;
    let (mut n, mut d, mut seed) = (None, None, None);
    for field in rest.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(bad)?;
        match key {
            "n_spins" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
            "d" => d = Some(value.parse::<usize>().map_err(|_| bad())?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    match (n, d, seed) {
        (Some(n), Some(d), Some(seed)) if n > 0 => Ok((n, d, seed)),
        _ => Err(bad()),
    }
}

pub fn read_model(path: impl AsRef<Path>) -> Result<IsingModel> {
    IsingModel::from_json(&std::fs::read_to_string(path)?)
}

pub fn write_model(path: impl AsRef<Path>, model: &IsingModel, dense: bool) -> Result<()> {
    std::fs::write(path, model.to_json(dense))?;
    Ok(())
}
