//! File formats: edge lists, exact model JSON, and report emission.
//!
//! Every floating-point number written by this module uses 17 significant
//! digits (`{:.16e}`), so values round-trip exactly; non-finite values are
//! written as `null` (JSON) or `nan`/`inf` (text).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;
use serde_json::Value;
use wpcert_core::depgraph::{DependencyGraph, VertexId};
use wpcert_core::rsums::JointModel;

use crate::CliError;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Parses the edge-list text format.
///
/// One edge per line as two whitespace-separated vertex tokens; an optional
/// first line `vertices: v1 v2 …` declares the vertex set (needed for
/// isolated vertices). Blank lines and `#` comments are ignored. Lattice
/// vertices are comma-joined coordinates such as `0,3`.
pub fn parse_edge_list(text: &str) -> Result<DependencyGraph, CliError> {
    let mut declared: Option<Vec<VertexId>> = None;
    let mut edges = Vec::new();
    let mut seen_content = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::Input(format!("edge list line {line}: {msg}"));
        if let Some(rest) = content.strip_prefix("vertices:") {
            if seen_content {
                return Err(bad("the 'vertices:' header must come first".into()));
            }
            let vs = rest
                .split_whitespace()
                .map(VertexId::parse)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(e.to_string()))?;
            declared = Some(vs);
            seen_content = true;
            continue;
        }
        seen_content = true;
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(bad(format!("expected two vertex tokens, found {}", tokens.len())));
        }
        let a = VertexId::parse(tokens[0]).map_err(|e| bad(e.to_string()))?;
        let b = VertexId::parse(tokens[1]).map_err(|e| bad(e.to_string()))?;
        edges.push((a, b));
    }
    let graph = DependencyGraph::from_edge_list(&edges, declared.as_deref()).map_err(|e| CliError::Input(e.to_string()))?;
    if graph.is_empty() {
        return Err(CliError::Input("edge list declares no vertices".into()));
    }
    Ok(graph)
}

/// Writes a graph in the edge-list format (always with a vertex header).
pub fn write_edge_list(g: &DependencyGraph) -> String {
    let mut out = String::from("vertices:");
    for v in g.vertices() {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
    for (a, b) in g.edges_idx() {
        let _ = writeln!(out, "{} {}", g.vertices()[a], g.vertices()[b]);
    }
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExactFile {
    #[serde(default)]
    vertices: Option<Vec<String>>,
    #[serde(default)]
    edges: Option<Vec<(String, String)>>,
    outcomes: Vec<OutcomeRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeRecord {
    p: f64,
    values: BTreeMap<String, f64>,
}

/// Parses an exact discrete model:
///
/// ```json
/// { "vertices": ["0", "1"],
///   "edges": [["0", "1"]],
///   "outcomes": [ {"p": 0.5, "values": {"0": 1, "1": -1}},
///                 {"p": 0.5, "values": {"0": -1, "1": 1}} ] }
/// ```
///
/// `vertices` defaults to the keys of the first outcome. `edges` may be
/// omitted when `graph` is supplied (an edge-list file); giving both is an
/// error. Every outcome must assign a value to every vertex.
pub fn parse_exact_model(text: &str, graph: Option<DependencyGraph>) -> Result<JointModel, CliError> {
    let file: ExactFile =
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("model JSON: {e}")))?;
    if file.outcomes.is_empty() {
        return Err(CliError::Input("model JSON: outcome table is empty".into()));
    }
    let parse_v = |s: &str| VertexId::parse(s).map_err(|e| CliError::Input(format!("model JSON: {e}")));
    let graph = match (graph, &file.edges) {
        (Some(_), Some(_)) => {
            return Err(CliError::Input("model JSON has 'edges' and an edge-list file was also given".into()))
        }
        (Some(g), None) => {
            if let Some(vs) = &file.vertices {
                let mut ids = vs.iter().map(|s| parse_v(s)).collect::<Result<Vec<_>, _>>()?;
                ids.sort();
                if ids != g.vertices() {
                    return Err(CliError::Input("model JSON vertices differ from the edge-list vertices".into()));
                }
            }
            g
        }
        (None, edges) => {
            let vertex_names: Vec<String> = match &file.vertices {
                Some(vs) => vs.clone(),
                None => file.outcomes[0].values.keys().cloned().collect(),
            };
            let ids = vertex_names.iter().map(|s| parse_v(s)).collect::<Result<Vec<_>, _>>()?;
            let edges = edges
                .iter()
                .flatten()
                .map(|(a, b)| Ok((parse_v(a)?, parse_v(b)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            DependencyGraph::from_edge_list(&edges, Some(&ids)).map_err(|e| CliError::Input(format!("model JSON: {e}")))?
        }
    };
    let mut outcomes = Vec::with_capacity(file.outcomes.len());
    for (o, rec) in file.outcomes.iter().enumerate() {
        let mut values = vec![f64::NAN; graph.len()];
        for (name, v) in &rec.values {
            let id = parse_v(name)?;
            let i = graph
                .index_of(&id)
                .map_err(|_| CliError::Input(format!("model JSON: outcome {o} assigns unknown vertex {name}")))?;
            values[i] = *v;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(CliError::Input(format!(
                "model JSON: outcome {o} has no value for vertex {}",
                graph.vertices()[i]
            )));
        }
        outcomes.push((rec.p, values));
    }
    JointModel::exact(graph, &outcomes).map_err(|e| CliError::Input(format!("model JSON: {e}")))
}

/// Serialises a JSON value with 17-significant-digit floats, two-space
/// indentation and sorted keys. Integers stay integers.
pub fn to_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("f64 number");
                out.push_str(&if f.is_finite() { fmt_f64(f) } else { "null".into() });
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // Arrays of scalars stay on one line.
            if items.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, x, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, x, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// One cell of a tabular report.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    /// Text.
    Text(String),
    /// Integer.
    Int(i64),
    /// Float (17 significant digits).
    Float(f64),
    /// Missing value.
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) => fmt_f64(*f),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A rectangular report rendered as CSV or as an aligned text table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    /// Column names.
    pub header: Vec<String>,
    /// Rows, each as long as the header.
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// An empty table with the given columns.
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row.
    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Comma-separated values with a header line. Text cells containing a
    /// comma or quote are quoted.
    pub fn to_csv(&self) -> String {
        let quote = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = self.header.iter().map(|h| quote(h)).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|c| quote(&c.render())).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    /// Aligned columns separated by two spaces.
    pub fn to_text(&self) -> String {
        let rendered: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::render).collect()).collect();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &rendered {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let _ = write!(s, "{c:<w$}");
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        for row in &rendered {
            out.push_str(&line(row));
        }
        out
    }
}

/// gnuplot-compatible two-column data: a `#` comment line, then `x y` rows.
pub fn to_dat(comment: &str, xy: &[(f64, f64)]) -> String {
    let mut out = format!("# {comment}\n");
    for (x, y) in xy {
        let _ = writeln!(out, "{} {}", fmt_f64(*x), fmt_f64(*y));
    }
    out
}
