//! Cell mesh construction: structured grid, hole cut, circle projection.

use std::collections::BTreeMap;

use super::{dist, double_area, min_angle_deg, CellGeometry, EdgeTag, TriMesh};
use crate::error::{Error, Result};

/// Vertices whose distance to the circle is within this fraction of h are
/// snapped onto the circle before any triangle is removed. Keeps the cut
/// from producing sliver triangles.
const SNAP_BAND: f64 = 0.4;

/// Minimum interior angle accepted after projection, in degrees.
const MIN_ANGLE_DEG: f64 = 15.0;

/// Build the triangulation of Y_s = Y \ cl(H).
///
/// The grid is a union-jack pattern (diagonal direction alternating with
/// square parity), which makes the mesh invariant under the reflections
/// y_i -> 1 - y_i. With a hole, triangles covered by the disk are removed,
/// the cut boundary is projected onto the exact circle, and edges stretched
/// past the structured diagonal sqrt(2)*h are bisected back under it. Every
/// SIGMA vertex satisfies |v - center| = r to rounding.
pub fn build_cell_mesh(geom: &CellGeometry) -> Result<TriMesh> {
    geom.validate()?;
    let n = 1usize << geom.refinement;
    let h = geom.grid_step();

    // Structured grid; coordinates k*h are exact dyadic values.
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;

    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = vid(i, j);
            let b = vid(i + 1, j);
            let c = vid(i + 1, j + 1);
            let d = vid(i, j + 1);
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }

    let mut on_circle = vec![false; vertices.len()];
    if geom.hole_radius > 0.0 {
        cut_hole(geom, h, &mut vertices, &mut triangles, &mut on_circle)?;
        split_long_edges(geom, h, &mut vertices, &mut triangles, &mut on_circle)?;
    }

    // Drop orphaned vertices and compact indices.
    let mut used = vec![false; vertices.len()];
    for tri in &triangles {
        for &v in tri {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut new_vertices = Vec::new();
    let mut new_on_circle = Vec::new();
    for (v, &u) in used.iter().enumerate() {
        if u {
            remap[v] = new_vertices.len();
            new_vertices.push(vertices[v]);
            new_on_circle.push(on_circle[v]);
        }
    }
    for tri in &mut triangles {
        for v in tri.iter_mut() {
            *v = remap[*v];
        }
    }

    let mut mesh = TriMesh::new_unhashed();
    mesh.vertices = new_vertices;
    mesh.triangles = triangles;
    mesh.cell_geometry = Some(*geom);

    classify_boundary(&mut mesh, &new_on_circle)?;
    build_periodic_pairs(&mut mesh, n, h)?;
    check_quality(&mesh, geom)?;

    mesh.h_max = (0..mesh.triangles.len())
        .flat_map(|t| {
            let p = mesh.triangle_points(t);
            [dist(p[0], p[1]), dist(p[1], p[2]), dist(p[2], p[0])]
        })
        .fold(0.0, f64::max);
    mesh.assign_id();
    Ok(mesh)
}

/// Remove triangles covered by the hole and project the cut boundary onto
/// the circle. On return `triangles` holds only kept triangles.
fn cut_hole(
    geom: &CellGeometry,
    h: f64,
    vertices: &mut [[f64; 2]],
    triangles: &mut Vec<[usize; 3]>,
    on_circle: &mut [bool],
) -> Result<()> {
    let c = geom.hole_center;
    let r = geom.hole_radius;
    let project = |v: [f64; 2]| -> [f64; 2] {
        let d = dist(v, c);
        [c[0] + r * (v[0] - c[0]) / d, c[1] + r * (v[1] - c[1]) / d]
    };

    // Snap pass.
    for (v, p) in vertices.iter_mut().enumerate() {
        let d = dist(*p, c);
        if (d - r).abs() <= SNAP_BAND * h && d > 0.0 {
            *p = project(*p);
            on_circle[v] = true;
        }
    }

    // Removal pass: a triangle is covered when it has a vertex strictly
    // inside the circle or its centroid lies inside (the latter removes
    // inscribed cap triangles whose vertices all sit on the circle).
    let mut keep = vec![true; triangles.len()];
    let inside = |v: usize, p: [f64; 2]| -> bool { !on_circle[v] && dist(p, c) < r };
    for (t, tri) in triangles.iter().enumerate() {
        let vs = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
        let centroid = [
            (vs[0][0] + vs[1][0] + vs[2][0]) / 3.0,
            (vs[0][1] + vs[1][1] + vs[2][1]) / 3.0,
        ];
        let vertex_inside = (0..3).any(|k| inside(tri[k], vs[k]));
        let centroid_inside = dist(centroid, c) < r * (1.0 - 1e-12);
        if vertex_inside || centroid_inside {
            keep[t] = false;
        }
    }

    // Project every vertex shared by a kept and a removed triangle.
    let mut in_kept = vec![false; vertices.len()];
    let mut in_removed = vec![false; vertices.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            if keep[t] {
                in_kept[v] = true;
            } else {
                in_removed[v] = true;
            }
        }
    }
    for v in 0..vertices.len() {
        if in_kept[v] && in_removed[v] && !on_circle[v] {
            vertices[v] = project(vertices[v]);
            on_circle[v] = true;
        }
    }

    // Projection may have collapsed further triangles onto the circle;
    // sweep those away as well (their vertices stay on the circle).
    for (t, tri) in triangles.iter().enumerate() {
        if keep[t] && tri.iter().all(|&v| on_circle[v]) {
            keep[t] = false;
        }
    }

    // No surviving triangle may keep a vertex inside the hole.
    for (t, tri) in triangles.iter().enumerate() {
        if keep[t] {
            for &v in tri {
                if !on_circle[v] && dist(vertices[v], c) < r {
                    return Err(Error::MeshQuality(format!(
                        "vertex {v} left inside the hole after cut"
                    )));
                }
            }
        }
    }

    let mut kept = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        if keep[t] {
            kept.push(*tri);
        }
    }
    *triangles = kept;
    Ok(())
}

/// Conforming longest-edge bisection of every edge longer than sqrt(2)*h.
/// Midpoints of circle-chord edges are projected back onto the circle so
/// SIGMA never leaves it.
fn split_long_edges(
    geom: &CellGeometry,
    h: f64,
    vertices: &mut Vec<[f64; 2]>,
    triangles: &mut Vec<[usize; 3]>,
    on_circle: &mut Vec<bool>,
) -> Result<()> {
    let c = geom.hole_center;
    let r = geom.hole_radius;
    let limit = 2f64.sqrt() * h * (1.0 + 1e-12);
    let mut guard = 0usize;
    loop {
        guard += 1;
        if guard > 10_000 {
            return Err(Error::MeshQuality(
                "edge splitting did not terminate".into(),
            ));
        }
        // Longest edge per triangle; process the globally longest first.
        let mut worst: Option<(f64, usize, usize, usize)> = None;
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let len = dist(vertices[a], vertices[b]);
                if len > limit && worst.map_or(true, |(l, ..)| len > l) {
                    worst = Some((len, a.min(b), a.max(b), t));
                }
            }
        }
        let Some((_, a, b, _)) = worst else {
            return Ok(());
        };

        // Rivara cascade: an edge may only be split when it is the longest
        // edge of every triangle adjacent to it.
        let mut target = (a, b);
        loop {
            let (a, b) = target;
            let mut blocker: Option<(usize, usize)> = None;
            for tri in triangles.iter() {
                if !contains_edge(tri, a, b) {
                    continue;
                }
                let (la, lb) = longest_edge(tri, vertices);
                if (la.min(lb), la.max(lb)) != (a, b) {
                    blocker = Some((la.min(lb), la.max(lb)));
                    break;
                }
            }
            match blocker {
                Some(e) => target = e,
                None => break,
            }
        }
        let (a, b) = target;

        let mut mid = [
            0.5 * (vertices[a][0] + vertices[b][0]),
            0.5 * (vertices[a][1] + vertices[b][1]),
        ];
        let mid_on_circle = on_circle[a] && on_circle[b];
        if mid_on_circle {
            let d = dist(mid, c);
            mid = [c[0] + r * (mid[0] - c[0]) / d, c[1] + r * (mid[1] - c[1]) / d];
        }
        let m = vertices.len();
        vertices.push(mid);
        on_circle.push(mid_on_circle);

        let mut new_tris = Vec::new();
        triangle_split(triangles, a, b, m, &mut new_tris);
        triangles.extend(new_tris);
    }
}

fn contains_edge(tri: &[usize; 3], a: usize, b: usize) -> bool {
    tri.contains(&a) && tri.contains(&b)
}

fn longest_edge(tri: &[usize; 3], vertices: &[[f64; 2]]) -> (usize, usize) {
    let mut best = (tri[0], tri[1]);
    let mut len = dist(vertices[tri[0]], vertices[tri[1]]);
    for k in 1..3 {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        let l = dist(vertices[a], vertices[b]);
        if l > len {
            len = l;
            best = (a, b);
        }
    }
    best
}

/// Replace each triangle adjacent to edge (a,b) by its two halves through m.
fn triangle_split(
    triangles: &mut Vec<[usize; 3]>,
    a: usize,
    b: usize,
    m: usize,
    new_tris: &mut Vec<[usize; 3]>,
) {
    let mut t = 0;
    while t < triangles.len() {
        let tri = triangles[t];
        if contains_edge(&tri, a, b) {
            // Preserve orientation: replace a by m in one copy, b in the other.
            let mut t1 = tri;
            let mut t2 = tri;
            for v in t1.iter_mut() {
                if *v == b {
                    *v = m;
                }
            }
            for v in t2.iter_mut() {
                if *v == a {
                    *v = m;
                }
            }
            triangles[t] = t1;
            new_tris.push(t2);
        }
        t += 1;
    }
}

/// Detect boundary edges and sort them into SIGMA and cell-face groups.
fn classify_boundary(mesh: &mut TriMesh, on_circle: &[bool]) -> Result<()> {
    let mut counts: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            let e = counts.entry(key).or_insert((0, [a, b]));
            e.0 += 1;
        }
    }
    let mut groups: BTreeMap<EdgeTag, Vec<[usize; 2]>> = BTreeMap::new();
    for (&(a, b), &(count, oriented)) in &counts {
        match count {
            2 => {}
            1 => {
                let pa = mesh.vertices[a];
                let pb = mesh.vertices[b];
                let tag = if pa[0] == 0.0 && pb[0] == 0.0 {
                    EdgeTag::CellFaceLeft
                } else if pa[0] == 1.0 && pb[0] == 1.0 {
                    EdgeTag::CellFaceRight
                } else if pa[1] == 0.0 && pb[1] == 0.0 {
                    EdgeTag::CellFaceBottom
                } else if pa[1] == 1.0 && pb[1] == 1.0 {
                    EdgeTag::CellFaceTop
                } else if on_circle[a] && on_circle[b] {
                    EdgeTag::Sigma
                } else {
                    return Err(Error::MeshQuality(format!(
                        "boundary edge ({a},{b}) neither on a cell face nor on the circle"
                    )));
                };
                groups.entry(tag).or_default().push(oriented);
            }
            _ => {
                return Err(Error::MeshQuality(format!(
                    "edge ({a},{b}) shared by {count} triangles"
                )))
            }
        }
    }
    if let Some(sigma) = groups.get(&EdgeTag::Sigma) {
        check_sigma_loop(sigma)?;
    }
    mesh.edge_groups = groups;
    Ok(())
}

/// SIGMA must form a single closed loop: every vertex of degree 2, one cycle.
fn check_sigma_loop(sigma: &[[usize; 2]]) -> Result<()> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &[a, b] in sigma {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    for (&v, nb) in &adj {
        if nb.len() != 2 {
            return Err(Error::MeshQuality(format!(
                "SIGMA vertex {v} has degree {}",
                nb.len()
            )));
        }
    }
    // Walk the cycle from any start; it must visit every SIGMA vertex.
    let &start = adj.keys().next().unwrap();
    let mut visited = 1usize;
    let mut prev = start;
    let mut cur = adj[&start][0];
    while cur != start {
        let nb = &adj[&cur];
        let next = if nb[0] == prev { nb[1] } else { nb[0] };
        prev = cur;
        cur = next;
        visited += 1;
        if visited > adj.len() {
            break;
        }
    }
    if visited != adj.len() {
        return Err(Error::MeshQuality(format!(
            "SIGMA is not a single closed loop ({} of {} vertices in first cycle)",
            visited,
            adj.len()
        )));
    }
    Ok(())
}

/// Pair left/right and bottom/top face nodes; master is the low-coordinate one.
fn build_periodic_pairs(mesh: &mut TriMesh, n: usize, h: f64) -> Result<()> {
    let mut by_coord: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (v, p) in mesh.vertices.iter().enumerate() {
        by_coord.insert((p[0].to_bits(), p[1].to_bits()), v);
    }
    let lookup = |x: f64, y: f64| -> Result<usize> {
        by_coord
            .get(&(x.to_bits(), y.to_bits()))
            .copied()
            .ok_or_else(|| Error::StitchFailure(format!("face node ({x},{y}) not found")))
    };
    let mut pairs = Vec::new();
    for k in 0..=n {
        let t = k as f64 * h;
        pairs.push((lookup(0.0, t)?, lookup(1.0, t)?));
        pairs.push((lookup(t, 0.0)?, lookup(t, 1.0)?));
    }
    mesh.periodic_pairs = pairs;
    Ok(())
}

fn check_quality(mesh: &TriMesh, geom: &CellGeometry) -> Result<()> {
    for t in 0..mesh.triangles.len() {
        let p = mesh.triangle_points(t);
        let da = double_area(&p);
        if da <= 0.0 {
            return Err(Error::MeshQuality(format!(
                "triangle {t} has non-positive area {}",
                0.5 * da
            )));
        }
        let ang = min_angle_deg(&p);
        if ang < MIN_ANGLE_DEG {
            return Err(Error::MeshQuality(format!(
                "triangle {t} min angle {ang:.2} deg < {MIN_ANGLE_DEG} (r={}, L={})",
                geom.hole_radius, geom.refinement
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_hole_structured_counts() {
        let geom = CellGeometry {
            hole_center: [0.5, 0.5],
            hole_radius: 0.0,
            refinement: 3,
        };
        let mesh = build_cell_mesh(&geom).unwrap();
        assert_eq!(mesh.num_vertices(), 81);
        assert_eq!(mesh.num_triangles(), 128);
        assert!(!mesh.has_tag(EdgeTag::Sigma));
        assert!((mesh.area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hole_perimeter_and_area() {
        let geom = CellGeometry::default(); // r = 0.25, L = 4
        let mesh = build_cell_mesh(&geom).unwrap();
        let perim = mesh.group_length(EdgeTag::Sigma).unwrap();
        let exact = 2.0 * std::f64::consts::PI * 0.25;
        assert!((perim - exact).abs() / exact < 0.02, "perimeter {perim}");
        let area = mesh.area();
        let exact_area = 1.0 - std::f64::consts::PI / 16.0;
        assert!((area - exact_area).abs() / exact_area < 0.02, "area {area}");
    }

    #[test]
    fn sigma_vertices_on_exact_circle() {
        let geom = CellGeometry::default();
        let mesh = build_cell_mesh(&geom).unwrap();
        for &[a, b] in mesh.edges(EdgeTag::Sigma).unwrap() {
            for v in [a, b] {
                let d = dist(mesh.vertices[v], geom.hole_center);
                assert!((d - geom.hole_radius).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn h_max_within_structured_diagonal() {
        for (r, l) in [(0.0, 3u32), (0.25, 4), (0.25, 5), (0.3, 5), (0.15, 5)] {
            let geom = CellGeometry {
                hole_center: [0.5, 0.5],
                hole_radius: r,
                refinement: l,
            };
            let mesh = build_cell_mesh(&geom).unwrap();
            let bound = 2f64.sqrt() * geom.grid_step();
            assert!(
                mesh.h_max <= bound * (1.0 + 1e-12),
                "h_max {} > {bound} for r={r} L={l}",
                mesh.h_max
            );
        }
    }

    #[test]
    fn periodic_pairs_differ_by_unit_vector() {
        let mesh = build_cell_mesh(&CellGeometry::default()).unwrap();
        for &(m, s) in &mesh.periodic_pairs {
            let dm = mesh.vertices[m];
            let ds = mesh.vertices[s];
            let diff = [ds[0] - dm[0], ds[1] - dm[1]];
            assert!(diff == [1.0, 0.0] || diff == [0.0, 1.0], "diff {diff:?}");
        }
        // Bijection: each axis pairs n+1 nodes.
        assert_eq!(mesh.periodic_pairs.len(), 2 * (16 + 1));
    }

    #[test]
    fn margin_violation_rejected() {
        let geom = CellGeometry {
            hole_center: [0.85, 0.5],
            hole_radius: 0.25,
            refinement: 4,
        };
        assert!(matches!(
            build_cell_mesh(&geom),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn refining_halves_h_max() {
        let mut geom = CellGeometry {
            hole_center: [0.5, 0.5],
            hole_radius: 0.0,
            refinement: 3,
        };
        let coarse = build_cell_mesh(&geom).unwrap();
        geom.refinement = 4;
        let fine = build_cell_mesh(&geom).unwrap();
        assert!((coarse.h_max / fine.h_max - 2.0).abs() < 1e-12);
    }
}
