//! Tab-separated graph files, CSV tables and run manifests.
//!
//! Blocks file: header `node_id  block_id  [node_group]  [block_group]`, one
//! row per node, all ids 1-based. Edges file: header `source  target`, one
//! undirected edge per row. Lines starting with `#` and blank lines are
//! skipped in both.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{BlockPartition, LocalGraph};

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split('\t').map(str::trim).collect()))
}

fn parse_id(file: &str, line: usize, field: &str, v: &str) -> Result<usize> {
    match v.parse::<usize>() {
        Ok(x) if x >= 1 => Ok(x - 1),
        _ => Err(Error::Parse {
            file: file.into(),
            line,
            message: format!("{field} must be a positive integer, found `{v}`"),
        }),
    }
}

pub fn parse_blocks(text: &str, file: &str) -> Result<BlockPartition> {
    let mut lines = data_lines(text);
    let (hline, header) =
        lines.next().ok_or_else(|| Error::Parse { file: file.into(), line: 0, message: "empty blocks file".into() })?;
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (Some(c_node), Some(c_block)) = (col("node_id"), col("block_id")) else {
        return Err(Error::Parse {
            file: file.into(),
            line: hline,
            message: "header must contain node_id and block_id".into(),
        });
    };
    let c_group = col("node_group");
    let c_bgroup = col("block_group");

    let mut rows = Vec::new();
    for (line, fields) in lines {
        if fields.len() != header.len() {
            return Err(Error::Parse {
                file: file.into(),
                line,
                message: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        let node = parse_id(file, line, "node_id", fields[c_node])?;
        let block = parse_id(file, line, "block_id", fields[c_block])?;
        let group = c_group.map(|c| parse_id(file, line, "node_group", fields[c])).transpose()?;
        let bgroup = c_bgroup.map(|c| parse_id(file, line, "block_group", fields[c])).transpose()?;
        rows.push((line, node, block, group, bgroup));
    }
    let n = rows.len();
    let mut assignment = vec![usize::MAX; n];
    let mut groups = vec![0; n];
    for &(line, node, block, group, _) in &rows {
        if node >= n || assignment[node] != usize::MAX {
            return Err(Error::Parse {
                file: file.into(),
                line,
                message: format!("node ids must be exactly 1..{n}; `{}` is out of range or repeated", node + 1),
            });
        }
        assignment[node] = block;
        groups[node] = group.unwrap_or(0);
    }
    let mut partition = BlockPartition::from_assignment(&assignment)?;
    if c_group.is_some() {
        partition = partition.with_node_groups(groups)?;
    }
    if c_bgroup.is_some() {
        let mut bg = vec![None; partition.n_blocks()];
        for &(line, _, block, _, b) in &rows {
            let b = b.expect("column present");
            match bg[block] {
                None => bg[block] = Some(b),
                Some(prev) if prev != b => {
                    return Err(Error::Parse {
                        file: file.into(),
                        line,
                        message: format!("block {} has block_group {} and {}", block + 1, prev + 1, b + 1),
                    });
                }
                _ => {}
            }
        }
        partition =
            partition.with_block_groups(bg.into_iter().map(|g| g.expect("every block has a node")).collect())?;
    }
    Ok(partition)
}

pub fn parse_edges(text: &str, file: &str, partition: Arc<BlockPartition>) -> Result<LocalGraph> {
    let mut lines = data_lines(text);
    let header_ok = matches!(lines.next(), Some((_, h)) if h == ["source", "target"]);
    if !header_ok {
        return Err(Error::Parse { file: file.into(), line: 1, message: "header must be `source<TAB>target`".into() });
    }
    let mut edges = Vec::new();
    for (line, fields) in lines {
        if fields.len() != 2 {
            return Err(Error::Parse {
                file: file.into(),
                line,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let i = parse_id(file, line, "source", fields[0])?;
        let j = parse_id(file, line, "target", fields[1])?;
        edges.push((i, j));
    }
    LocalGraph::from_edges(partition, &edges)
}

pub fn read_blocks(path: &Path) -> Result<BlockPartition> {
    parse_blocks(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn read_edges(path: &Path, partition: Arc<BlockPartition>) -> Result<LocalGraph> {
    parse_edges(&std::fs::read_to_string(path)?, &path.display().to_string(), partition)
}

pub fn format_blocks(p: &BlockPartition) -> String {
    let mut out = String::from("node_id\tblock_id");
    if p.has_node_groups() {
        out.push_str("\tnode_group");
    }
    if p.has_block_groups() {
        out.push_str("\tblock_group");
    }
    out.push('\n');
    for i in 0..p.n_nodes() {
        let k = p.block_of(i);
        write!(out, "{}\t{}", i + 1, k + 1).unwrap();
        if let Some(m) = p.node_group(i) {
            write!(out, "\t{}", m + 1).unwrap();
        }
        if let Some(l) = p.block_group(k) {
            write!(out, "\t{}", l + 1).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_edges(g: &LocalGraph) -> String {
    let mut out = String::from("source\ttarget\n");
    for (i, j) in g.edges() {
        writeln!(out, "{}\t{}", i + 1, j + 1).unwrap();
    }
    out
}

/// Ten significant digits, shortest representation.
pub fn csv_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Writes a CSV file with a header row; fields are written verbatim.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        writeln!(f, "{}", r.join(","))?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Provenance of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the canonical configuration JSON.
    pub config_hash: String,
    pub root_seed: u64,
    pub started: String,
    pub finished: String,
    pub thread_count: usize,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn start<T: Serialize>(command: &str, config: &T, root_seed: u64) -> Result<Self> {
        let canonical = serde_json::to_string(config)?;
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: sha256_hex(canonical.as_bytes()),
            root_seed,
            started: now(),
            finished: String::new(),
            thread_count: crate::par::current_threads(),
            config: serde_json::from_str(&canonical)?,
        })
    }

    pub fn finish(mut self) -> Self {
        self.finished = now();
        self
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
