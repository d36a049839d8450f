//! Mesh and nodal-field serialization.
//!
//! Plain-text mesh format:
//! ```text
//! tri-mesh v1 <nv> <nt>
//! x y            (nv lines)
//! i j k          (nt lines)
//! TAG n          (one block per tag)
//! a b            (n lines)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{EdgeTag, TriMesh};
use crate::error::{Error, Result};

pub fn write_mesh_text(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "tri-mesh v1 {} {}",
        mesh.num_vertices(),
        mesh.num_triangles()
    )
    .unwrap();
    for v in &mesh.vertices {
        writeln!(out, "{} {}", v[0], v[1]).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    for (tag, edges) in &mesh.edge_groups {
        writeln!(out, "{} {}", tag.as_str(), edges.len()).unwrap();
        for e in edges {
            writeln!(out, "{} {}", e[0], e[1]).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn parse_mesh_text(text: &str) -> Result<TriMesh> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "tri-mesh" || parts[1] != "v1" {
        return Err(Error::Parse(format!("bad header: {header}")));
    }
    let nv: usize = parts[2].parse().map_err(|_| Error::Parse("bad nv".into()))?;
    let nt: usize = parts[3].parse().map_err(|_| Error::Parse("bad nt".into()))?;

    let mut mesh = TriMesh::new_unhashed();
    for _ in 0..nv {
        let line = lines.next().ok_or_else(|| Error::Parse("missing vertex".into()))?;
        let mut it = line.split_whitespace();
        let x: f64 = parse_num(it.next())?;
        let y: f64 = parse_num(it.next())?;
        mesh.vertices.push([x, y]);
    }
    for _ in 0..nt {
        let line = lines.next().ok_or_else(|| Error::Parse("missing triangle".into()))?;
        let mut it = line.split_whitespace();
        let a: usize = parse_num(it.next())?;
        let b: usize = parse_num(it.next())?;
        let c: usize = parse_num(it.next())?;
        if a >= nv || b >= nv || c >= nv {
            return Err(Error::Parse("triangle index out of range".into()));
        }
        mesh.triangles.push([a, b, c]);
    }
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it
            .next()
            .and_then(EdgeTag::from_str)
            .ok_or_else(|| Error::Parse(format!("bad tag line: {line}")))?;
        let count: usize = parse_num(it.next())?;
        let mut edges = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| Error::Parse("missing edge".into()))?;
            let mut it = line.split_whitespace();
            let a: usize = parse_num(it.next())?;
            let b: usize = parse_num(it.next())?;
            edges.push([a, b]);
        }
        mesh.edge_groups.insert(tag, edges);
    }
    mesh.h_max = (0..mesh.triangles.len())
        .flat_map(|t| {
            let p = mesh.triangle_points(t);
            [
                super::dist(p[0], p[1]),
                super::dist(p[1], p[2]),
                super::dist(p[2], p[0]),
            ]
        })
        .fold(0.0, f64::max);
    mesh.assign_id();
    Ok(mesh)
}

fn parse_num<T: std::str::FromStr>(s: Option<&str>) -> Result<T> {
    s.ok_or_else(|| Error::Parse("missing field".into()))?
        .parse()
        .map_err(|_| Error::Parse("bad number".into()))
}

/// Legacy-VTK ASCII export for visualization, with optional nodal scalars.
pub fn write_vtk(mesh: &TriMesh, values: Option<&[f64]>, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nperfhom mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", mesh.num_vertices()).unwrap();
    for v in &mesh.vertices {
        writeln!(out, "{} {} 0", v[0], v[1]).unwrap();
    }
    writeln!(
        out,
        "CELLS {} {}",
        mesh.num_triangles(),
        4 * mesh.num_triangles()
    )
    .unwrap();
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {}", mesh.num_triangles()).unwrap();
    for _ in 0..mesh.num_triangles() {
        out.push_str("5\n");
    }
    if let Some(vals) = values {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices()).unwrap();
        out.push_str("SCALARS u double 1\nLOOKUP_TABLE default\n");
        for v in vals {
            writeln!(out, "{v}").unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Nodal field dump: `node_index,x,y,value`.
pub fn write_fefunction_csv(mesh: &TriMesh, values: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("node_index,x,y,value\n");
    for (i, (v, val)) in mesh.vertices.iter().zip(values).enumerate() {
        writeln!(out, "{i},{:.12e},{:.12e},{:.12e}", v[0], v[1], val).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}
