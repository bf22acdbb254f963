//! Line-oriented text mesh format:
//!
//! ```text
//! poromesh v1 dim=2
//! nodes N
//! x y          (N lines)
//! tris M
//! i j k        (M lines)
//! edges E
//! i j MARKER   (E lines, MARKER in GAMMA|OUTER|PERX|PERY)
//! ```
//!
//! Coordinates are written in shortest round-trip form, so export/import is bit-exact.

use std::fmt::Write as _;

use super::mesh::{EdgeMarker, MarkedEdge, Mesh};
use crate::error::{Error, Result};

const HEADER: &str = "poromesh v1";

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let edges: Vec<&MarkedEdge> = mesh.edges.iter().filter(|e| e.marker != EdgeMarker::Interior).collect();
    let _ = writeln!(s, "{HEADER} dim=2");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    let _ = writeln!(s, "tris {}", mesh.triangles.len());
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "edges {}", edges.len());
    for e in edges {
        let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.marker.label());
    }
    s
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {}: {msg}", line + 1))
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (ln, header) = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("poromesh") || parts.next() != Some("v1") {
        return Err(parse_err(ln, "expected header 'poromesh v1 dim=2'"));
    }
    match parts.next().and_then(|d| d.strip_prefix("dim=")) {
        Some("2") => {}
        Some(d) => {
            let dim = d.parse().map_err(|_| parse_err(ln, format!("bad dimension '{d}'")))?;
            return Err(Error::UnsupportedDimension(dim));
        }
        None => return Err(parse_err(ln, "missing dim=")),
    }

    let mut section = |name: &str| -> Result<(usize, Vec<(usize, Vec<String>)>)> {
        let (ln, l) = lines.next().ok_or_else(|| Error::Parse(format!("missing '{name}' section")))?;
        let mut p = l.split_whitespace();
        if p.next() != Some(name) {
            return Err(parse_err(ln, format!("expected '{name} <count>'")));
        }
        let count: usize = p
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| parse_err(ln, format!("bad {name} count")))?;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, l) = lines.next().ok_or_else(|| Error::Parse(format!("truncated '{name}' section")))?;
            rows.push((ln, l.split_whitespace().map(str::to_owned).collect()));
        }
        Ok((count, rows))
    };

    let (n_nodes, rows) = section("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for (ln, r) in rows {
        if r.len() != 2 {
            return Err(parse_err(ln, "expected 'x y'"));
        }
        let x: f64 = r[0].parse().map_err(|_| parse_err(ln, "bad x"))?;
        let y: f64 = r[1].parse().map_err(|_| parse_err(ln, "bad y"))?;
        nodes.push([x, y]);
    }
    let idx = |ln: usize, s: &str| -> Result<usize> {
        let i: usize = s.parse().map_err(|_| parse_err(ln, format!("bad index '{s}'")))?;
        if i >= n_nodes {
            return Err(parse_err(ln, format!("index {i} out of range")));
        }
        Ok(i)
    };
    let (_, rows) = section("tris")?;
    let mut triangles = Vec::with_capacity(rows.len());
    for (ln, r) in rows {
        if r.len() != 3 {
            return Err(parse_err(ln, "expected 'i j k'"));
        }
        triangles.push([idx(ln, &r[0])?, idx(ln, &r[1])?, idx(ln, &r[2])?]);
    }
    let (_, rows) = section("edges")?;
    let mut edges = Vec::with_capacity(rows.len());
    for (ln, r) in rows {
        if r.len() != 3 {
            return Err(parse_err(ln, "expected 'i j MARKER'"));
        }
        let marker = match EdgeMarker::from_label(&r[2]) {
            Some(m) if m != EdgeMarker::Interior => m,
            _ => return Err(parse_err(ln, format!("unknown marker '{}'", r[2]))),
        };
        edges.push(MarkedEdge { nodes: [idx(ln, &r[0])?, idx(ln, &r[1])?], marker });
    }
    Ok(Mesh { element_markers: vec![0; triangles.len()], nodes, triangles, edges })
}
