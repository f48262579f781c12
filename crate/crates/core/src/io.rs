//! Text formats: pose graphs (`EDGE i j r11 … r33`), node rotations
//! (`NODE i r11 … r33`) and the per-edge corruption CSV.
//!
//! Matrices are row-major. Floats are written with 17 significant digits so
//! values round-trip exactly. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::graph::{GraphError, ViewGraph};
use crate::rotation::{project_to_so3, Rotation};

/// Inputs within this orthogonality defect are accepted and re-projected.
pub const INPUT_ROTATION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_matrix(fields: &[&str], line: usize) -> Result<Rotation, IoError> {
    let mut v = [0.0; 9];
    for (slot, f) in v.iter_mut().zip(fields) {
        *slot = f.parse().map_err(|_| IoError::Parse {
            line,
            msg: format!("bad number {f:?}"),
        })?;
    }
    let m = Rotation::from_row_major(&v);
    if let Ok(r) = Rotation::from_matrix(m) {
        return Ok(r);
    }
    Rotation::from_matrix_tol(m, INPUT_ROTATION_TOL)
        .and_then(|_| project_to_so3(&m))
        .map_err(|e| IoError::Parse {
            line,
            msg: e.to_string(),
        })
}

fn records<'a>(text: &'a str, tag: &'a str) -> impl Iterator<Item = Result<(usize, Vec<&'a str>), IoError>> + 'a {
    text.lines().enumerate().filter_map(move |(idx, raw)| {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != tag {
            return Some(Err(IoError::Parse {
                line: idx + 1,
                msg: format!("expected {tag} record, found {:?}", fields[0]),
            }));
        }
        Some(Ok((idx + 1, fields[1..].to_vec())))
    })
}

fn parse_index(s: &str, line: usize) -> Result<usize, IoError> {
    s.parse().map_err(|_| IoError::Parse {
        line,
        msg: format!("bad node id {s:?}"),
    })
}

/// Parses a pose graph. The node count is one past the largest id, or
/// `min_nodes` if larger.
pub fn parse_pose_graph(text: &str, min_nodes: usize) -> Result<ViewGraph, IoError> {
    let mut edges = Vec::new();
    let mut n = min_nodes;
    for rec in records(text, "EDGE") {
        let (line, f) = rec?;
        if f.len() != 11 {
            return Err(IoError::Parse {
                line,
                msg: format!("EDGE needs 11 fields, got {}", f.len()),
            });
        }
        let i = parse_index(f[0], line)?;
        let j = parse_index(f[1], line)?;
        let r = parse_matrix(&f[2..], line)?;
        n = n.max(i + 1).max(j + 1);
        edges.push((i, j, r));
    }
    Ok(ViewGraph::new(n, edges)?)
}

pub fn format_pose_graph(graph: &ViewGraph) -> String {
    let mut out = String::new();
    for e in graph.edges() {
        let _ = write!(out, "EDGE {} {}", e.i, e.j);
        for x in e.rotation.to_row_major() {
            let _ = write!(out, " {}", fmt_f64(x));
        }
        out.push('\n');
    }
    out
}

/// Parses `NODE` records; ids must be exactly `0..n` in any order.
pub fn parse_rotations(text: &str) -> Result<Vec<Rotation>, IoError> {
    let mut entries = Vec::new();
    for rec in records(text, "NODE") {
        let (line, f) = rec?;
        if f.len() != 10 {
            return Err(IoError::Parse {
                line,
                msg: format!("NODE needs 10 fields, got {}", f.len()),
            });
        }
        entries.push((parse_index(f[0], line)?, parse_matrix(&f[1..], line)?, line));
    }
    let n = entries.len();
    let mut out = vec![None; n];
    for (id, r, line) in entries {
        if id >= n || out[id].is_some() {
            return Err(IoError::Parse {
                line,
                msg: format!("node ids must be unique and consecutive from 0 (got {id})"),
            });
        }
        out[id] = Some(r);
    }
    Ok(out.into_iter().map(|r| r.unwrap()).collect())
}

pub fn format_rotations(rotations: &[Rotation]) -> String {
    let mut out = String::new();
    for (i, r) in rotations.iter().enumerate() {
        let _ = write!(out, "NODE {i}");
        for x in r.to_row_major() {
            let _ = write!(out, " {}", fmt_f64(x));
        }
        out.push('\n');
    }
    out
}

/// `edge_i,edge_j,s_hat[,s_star]`.
pub fn format_levels_csv(graph: &ViewGraph, estimate: &[f64], truth: Option<&[f64]>) -> String {
    let mut out = String::from(if truth.is_some() {
        "edge_i,edge_j,s_hat,s_star\n"
    } else {
        "edge_i,edge_j,s_hat\n"
    });
    for (id, e) in graph.edges().iter().enumerate() {
        let _ = write!(out, "{},{},{}", e.i, e.j, fmt_f64(estimate[id]));
        if let Some(t) = truth {
            let _ = write!(out, ",{}", fmt_f64(t[id]));
        }
        out.push('\n');
    }
    out
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes through a temporary sibling and renames, so readers never see partial files.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), IoError> {
    let wrap = |source| IoError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(wrap)?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents).map_err(wrap)?;
    fs::rename(&tmp, path).map_err(wrap)
}
