//! File formats. Every number is written with 17 significant digits so that
//! reading a file back reproduces the same `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde_json::{json, Map, Number, Value};

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeVoteTable, GraphStructure};
use crate::sample::SampleMatrix;
use crate::select::{Band, BootstrapSummary};
use crate::tpdm::Tpdm;

/// Scientific notation with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_num(x)).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn parse_cell(cell: &str, line: u64, column: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Data {
        line,
        column,
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Data {
            line,
            column,
            message: format!("'{cell}' is not finite"),
        });
    }
    Ok(v)
}

/// Header row of names, then one numeric row per line.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, path))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, path))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Data {
            line: 1,
            column: 1,
            message: "missing header row".into(),
        });
    }
    let p = names.len();
    let mut cells = Vec::new();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(e, path))?;
        let line = rec.position().map(|pos| pos.line()).unwrap_or(0);
        if rec.len() != p {
            return Err(Error::Data {
                line,
                column: rec.len().min(p) + 1,
                message: format!("expected {p} fields, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            cells.push(parse_cell(cell, line, j + 1)?);
        }
        rows += 1;
    }
    Ok((names, DMatrix::from_row_slice(rows, p, &cells)))
}

fn csv_error(e: csv::Error, path: &Path) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data {
            line,
            column: 0,
            message: format!("{}: {other:?}", path.display()),
        },
    }
}

pub fn read_samples(path: &Path) -> Result<SampleMatrix> {
    let (names, values) = read_numeric_csv(path)?;
    SampleMatrix::new(values, names)
}

pub fn write_samples(path: &Path, data: &SampleMatrix) -> Result<()> {
    write_matrix_csv(path, data.names(), data.values())
}

pub fn write_matrix_csv(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
    w.write_record(names).map_err(|e| csv_error(e, path))?;
    let mut row = Vec::with_capacity(m.ncols());
    for r in 0..m.nrows() {
        row.clear();
        row.extend((0..m.ncols()).map(|c| fmt_num(m[(r, c)])));
        w.write_record(&row).map_err(|e| csv_error(e, path))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tpdm(dir: &Path, t: &Tpdm) -> Result<()> {
    write_matrix_csv(&dir.join("tpdm.csv"), &t.names, &t.sigma)?;
    write_meta(&dir.join("tpdm.meta"), &tpdm_meta(t))
}

pub fn tpdm_meta(t: &Tpdm) -> Vec<(String, String)> {
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_else(|| "none".into());
    vec![
        ("p".into(), t.dim().to_string()),
        ("m".into(), fmt_num(t.m)),
        ("threshold".into(), opt(t.threshold)),
        ("n_exceedances".into(), t.n_exceedances.to_string()),
        ("quantile_level".into(), opt(t.quantile_level)),
        ("pd_repaired".into(), t.pd_repaired.to_string()),
    ]
}

pub fn write_meta(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got '{line}'", idx + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string(), idx + 1));
    }
    Ok(out)
}

/// Reads a TPDM file and its sidecar metadata if present.
pub fn read_tpdm(csv_path: &Path) -> Result<Tpdm> {
    let (names, sigma) = read_numeric_csv(csv_path)?;
    let mut t = Tpdm::from_matrix_named(sigma, names)?;
    let meta = csv_path.with_extension("meta");
    if meta.exists() {
        let text = fs::read_to_string(&meta)?;
        let bad = |k: &str, v: &str| Error::Data {
            line: 0,
            column: 0,
            message: format!("{}: bad value '{v}' for {k}", meta.display()),
        };
        for (k, v, _) in parse_key_values(&text).map_err(|e| bad("metadata", &e.to_string()))? {
            let num = |v: &str| -> Result<Option<f64>> {
                if v == "none" {
                    Ok(None)
                } else {
                    v.parse().map(Some).map_err(|_| bad(&k, v))
                }
            };
            match k.as_str() {
                "m" => t.m = num(&v)?.ok_or_else(|| bad(&k, &v))?,
                "threshold" => t.threshold = num(&v)?,
                "quantile_level" => t.quantile_level = num(&v)?,
                "n_exceedances" => t.n_exceedances = v.parse().map_err(|_| bad(&k, &v))?,
                "pd_repaired" => t.pd_repaired = v.parse().map_err(|_| bad(&k, &v))?,
                _ => {}
            }
        }
    }
    Ok(t)
}

pub fn write_votes(path: &Path, votes: &EdgeVoteTable) -> Result<()> {
    write_matrix_csv(path, &votes.names, &votes.votes)
}

/// Band of an edge: bootstrap band when available, otherwise the band of its vote.
fn edge_band(
    e: Edge,
    votes: Option<&BTreeMap<Edge, f64>>,
    boot: Option<&BootstrapSummary>,
) -> Option<Band> {
    match boot {
        Some(b) => b.bands.get(&e).copied(),
        None => votes.and_then(|v| v.get(&e)).map(|&v| Band::of(v)),
    }
}

pub fn graph_json(
    g: &GraphStructure,
    boot: Option<&BootstrapSummary>,
    extra: &[(String, String)],
) -> String {
    let edges: Vec<Value> = g
        .edges
        .iter()
        .map(|&(i, k)| {
            let weight = g.weights.as_ref().and_then(|w| w.get(&(i, k))).copied();
            let vote = g.votes.as_ref().and_then(|v| v.get(&(i, k))).copied();
            let band = edge_band((i, k), g.votes.as_ref(), boot);
            let freq = boot.map(|b| b.frequency[(i, k)]);
            json!({
                "source": g.vertices[i],
                "target": g.vertices[k],
                "source_index": i,
                "target_index": k,
                "weight": weight.map(json_num).unwrap_or(Value::Null),
                "vote": vote.map(json_num).unwrap_or(Value::Null),
                "bootstrap_frequency": freq.map(json_num).unwrap_or(Value::Null),
                "band": band.map(|b| Value::from(b.label())).unwrap_or(Value::Null),
            })
        })
        .collect();
    let mut info = Map::new();
    for (k, v) in extra {
        info.insert(k.clone(), Value::from(v.as_str()));
    }
    let doc = json!({
        "vertices": g.vertices,
        "edge_count": g.edge_count(),
        "edges": edges,
        "info": Value::Object(info),
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
    s.push('\n');
    s
}

/// 0/1 adjacency matrix with a header of vertex names.
pub fn write_graph_csv(path: &Path, g: &GraphStructure) -> Result<()> {
    let p = g.n_vertices();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
    w.write_record(&g.vertices).map_err(|e| csv_error(e, path))?;
    for i in 0..p {
        let row: Vec<&str> = (0..p)
            .map(|k| if i != k && g.contains(i, k) { "1" } else { "0" })
            .collect();
        w.write_record(&row).map_err(|e| csv_error(e, path))?;
    }
    w.flush()?;
    Ok(())
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Undirected DOT; pen width 3 / 2 / 1 for the >90, 70-90 and 50-70 bands,
/// dashed width 1 below 50.
pub fn graph_dot(g: &GraphStructure, boot: Option<&BootstrapSummary>) -> String {
    let mut s = String::from("graph extnet {\n");
    for v in &g.vertices {
        s.push_str(&format!("  {};\n", dot_id(v)));
    }
    for &(i, k) in &g.edges {
        let mut attrs = Vec::new();
        match edge_band((i, k), g.votes.as_ref(), boot) {
            Some(Band::Above90) => attrs.push("penwidth=3".to_string()),
            Some(Band::From70To90) => attrs.push("penwidth=2".to_string()),
            Some(Band::From50To70) => attrs.push("penwidth=1".to_string()),
            Some(Band::Below50) => {
                attrs.push("penwidth=1".to_string());
                attrs.push("style=dashed".to_string());
            }
            None => {}
        }
        if let Some(v) = g.votes.as_ref().and_then(|v| v.get(&(i, k))) {
            attrs.push(format!("vote={}", dot_id(&fmt_num(*v))));
        }
        let attr = if attrs.is_empty() {
            String::new()
        } else {
            format!(" [{}]", attrs.join(", "))
        };
        s.push_str(&format!(
            "  {} -- {}{attr};\n",
            dot_id(&g.vertices[i]),
            dot_id(&g.vertices[k])
        ));
    }
    s.push_str("}\n");
    s
}

/// Long format: one line per vertex pair.
pub fn write_bootstrap_csv(path: &Path, b: &BootstrapSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
    w.write_record(["source", "target", "frequency", "band"])
        .map_err(|e| csv_error(e, path))?;
    for (&(i, k), band) in &b.bands {
        w.write_record([
            b.names[i].as_str(),
            b.names[k].as_str(),
            &fmt_num(b.frequency[(i, k)]),
            band.label(),
        ])
        .map_err(|e| csv_error(e, path))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges_csv(path: &Path, names: &[String], edges: &[Edge]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
    w.write_record(["source", "target"]).map_err(|e| csv_error(e, path))?;
    for &(i, k) in edges {
        w.write_record([names[i].as_str(), names[k].as_str()])
            .map_err(|e| csv_error(e, path))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
