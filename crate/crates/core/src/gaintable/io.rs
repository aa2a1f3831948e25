//! Versioned text format for gain tables.
//!
//! ```text
//! # free-form comment lines (ignored on load)
//! sdre-gain-table 1
//! axis 0 <breakpoints...>
//! ...
//! axis 5 <breakpoints...>
//! inertia <9 entries, row-major, kg·m²>
//! weights <q1> <q2> <r>
//! tolerance <tol>
//! vertices <count>
//! <i0> <i1> <i2> <i3> <i4> <i5> <k11> <k12> ... <k36>
//! ```
//!
//! Rate breakpoints are stored in rad/s. Every real is written with 17
//! significant digits, so a save/load round trip is bit-exact. Vertex lines
//! follow row-major `(σ1, σ2, σ3, ω1, ω2, ω3)` order and gains are row-major.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::Matrix3;
use thiserror::Error;

use super::{BreakpointGrid, Gain, GainTable, GridError, AXES};
use crate::dynamics::{InertiaError, InertiaMatrix};
use crate::riccati::WeightCase;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "sdre-gain-table";

#[derive(Debug, Error)]
pub enum TableIoError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported table format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: String },
    #[error("not a gain table file (missing '{MAGIC}' header)")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("table body has {found} vertices, expected {expected}")]
    CorruptedLength { expected: usize, found: usize },
    #[error("invalid grid: {0}")]
    Grid(#[from] GridError),
    #[error("invalid inertia: {0}")]
    Inertia(#[from] InertiaError),
}

fn fmt_real(out: &mut String, v: f64) {
    write!(out, " {v:.16e}").expect("writing to a String cannot fail");
}

/// Serializes `table`, preceded by `comments` written as `# ` lines.
pub fn write_table<W: Write>(
    table: &GainTable,
    comments: &[String],
    mut w: W,
) -> Result<(), TableIoError> {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    writeln!(out, "{MAGIC} {FORMAT_VERSION}").unwrap();
    for (a, axis) in table.grid().axes().iter().enumerate() {
        write!(out, "axis {a}").unwrap();
        axis.iter().for_each(|&v| fmt_real(&mut out, v));
        out.push('\n');
    }
    out.push_str("inertia");
    let j = table.inertia().matrix();
    for r in 0..3 {
        for c in 0..3 {
            fmt_real(&mut out, j[(r, c)]);
        }
    }
    out.push('\n');
    let wc = table.weights();
    out.push_str("weights");
    [wc.q1, wc.q2, wc.r]
        .iter()
        .for_each(|&v| fmt_real(&mut out, v));
    out.push('\n');
    out.push_str("tolerance");
    fmt_real(&mut out, table.tolerance());
    out.push('\n');
    writeln!(out, "vertices {}", table.gains().len()).unwrap();
    let grid = table.grid();
    for (flat, k) in table.gains().iter().enumerate() {
        let idx = grid.multi_index(flat);
        let idx_text: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        out.push_str(&idx_text.join(" "));
        for r in 0..3 {
            for c in 0..6 {
                fmt_real(&mut out, k[(r, c)]);
            }
        }
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn save_table(
    table: &GainTable,
    comments: &[String],
    path: impl AsRef<Path>,
) -> Result<(), TableIoError> {
    let file = fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    write_table(table, comments, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<GainTable, TableIoError> {
    read_table(fs::File::open(path)?)
}

struct Lines<R> {
    inner: io::Lines<BufReader<R>>,
    line_no: usize,
}

impl<R: Read> Lines<R> {
    /// Next non-comment, non-blank line.
    fn next_content(&mut self) -> Result<Option<(usize, String)>, TableIoError> {
        for line in self.inner.by_ref() {
            self.line_no += 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(Some((self.line_no, trimmed.to_string())));
        }
        Ok(None)
    }

    fn expect(&mut self, what: &str) -> Result<(usize, String), TableIoError> {
        self.next_content()?.ok_or(TableIoError::Malformed {
            line: self.line_no + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    /// Parses a `<keyword> <reals...>` line.
    fn keyed_reals(&mut self, keyword: &str) -> Result<(usize, Vec<f64>), TableIoError> {
        let (line, text) = self.expect(keyword)?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(TableIoError::Malformed {
                line,
                message: format!("expected '{keyword}'"),
            });
        }
        let values = parse_reals(parts, line)?;
        Ok((line, values))
    }
}

fn parse_reals<'a>(
    parts: impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<Vec<f64>, TableIoError> {
    parts
        .map(|p| {
            p.parse::<f64>().map_err(|_| TableIoError::Malformed {
                line,
                message: format!("invalid number '{p}'"),
            })
        })
        .collect()
}

fn expect_count(values: &[f64], n: usize, line: usize, what: &str) -> Result<(), TableIoError> {
    if values.len() == n {
        Ok(())
    } else {
        Err(TableIoError::Malformed {
            line,
            message: format!("{what} needs {n} values, found {}", values.len()),
        })
    }
}

/// Parses a table and re-validates the grid and body length.
pub fn read_table<R: Read>(reader: R) -> Result<GainTable, TableIoError> {
    let mut lines = Lines {
        inner: BufReader::new(reader).lines(),
        line_no: 0,
    };

    let (_, header) = lines.next_content()?.ok_or(TableIoError::MissingHeader)?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(TableIoError::MissingHeader);
    }
    let version = parts.next().unwrap_or("").to_string();
    if version != FORMAT_VERSION.to_string() {
        return Err(TableIoError::VersionMismatch { found: version });
    }

    let mut axes: [Vec<f64>; AXES] = Default::default();
    for (a, axis) in axes.iter_mut().enumerate() {
        let (line, text) = lines.expect("axis line")?;
        let mut parts = text.split_whitespace();
        let tag_ok = parts.next() == Some("axis") && parts.next() == Some(&a.to_string());
        if !tag_ok {
            return Err(TableIoError::Malformed {
                line,
                message: format!("expected 'axis {a}'"),
            });
        }
        *axis = parse_reals(parts, line)?;
    }
    let grid = BreakpointGrid::new(axes)?;

    let (line, j) = lines.keyed_reals("inertia")?;
    expect_count(&j, 9, line, "inertia")?;
    let inertia = InertiaMatrix::new(Matrix3::from_row_slice(&j))?;

    let (line, w) = lines.keyed_reals("weights")?;
    expect_count(&w, 3, line, "weights")?;
    let weights = WeightCase::new(w[0], w[1], w[2]);

    let (line, tol) = lines.keyed_reals("tolerance")?;
    expect_count(&tol, 1, line, "tolerance")?;

    let (line, count) = lines.expect("vertices")?;
    let declared: usize = count
        .strip_prefix("vertices")
        .and_then(|c| c.trim().parse().ok())
        .ok_or(TableIoError::Malformed {
            line,
            message: "expected 'vertices <count>'".into(),
        })?;
    if declared != grid.len() {
        return Err(TableIoError::CorruptedLength {
            expected: grid.len(),
            found: declared,
        });
    }

    let mut gains = Vec::with_capacity(declared);
    while let Some((line, text)) = lines.next_content()? {
        if gains.len() == declared {
            return Err(TableIoError::CorruptedLength {
                expected: declared,
                found: declared + 1,
            });
        }
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() < AXES + 18 {
            // A short vertex line means the body was cut off.
            return Err(TableIoError::CorruptedLength {
                expected: declared,
                found: gains.len(),
            });
        }
        if parts.len() != AXES + 18 {
            return Err(TableIoError::Malformed {
                line,
                message: format!("vertex line needs {} fields, found {}", AXES + 18, parts.len()),
            });
        }
        let expected = grid.multi_index(gains.len());
        for (a, p) in parts[..AXES].iter().enumerate() {
            if p.parse::<usize>().ok() != Some(expected[a]) {
                return Err(TableIoError::Malformed {
                    line,
                    message: format!("vertex index out of order, expected {expected:?}"),
                });
            }
        }
        let values = parse_reals(parts[AXES..].iter().copied(), line)?;
        gains.push(Gain::from_row_slice(&values));
    }
    GainTable::from_parts(grid, gains, inertia, weights, tol[0])
}
