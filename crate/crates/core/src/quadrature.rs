//! Quadrature rules used by all assembly and norm routines.
//!
//! Triangles use the 3-point edge-midpoint rule (exact for degree 2), edges
//! the 2-point Gauss rule (exact for degree 3). Every integral in the crate
//! goes through these two rules so that discrete Galerkin identities hold to
//! solver precision rather than quadrature precision.

/// Barycentric coordinates and weights of the degree-2 midpoint rule.
/// Weights sum to 1 and are applied to the triangle area.
pub const TRI_MIDPOINT: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

/// 2-point Gauss rule on [0,1]: positions and weights (weights sum to 1).
pub const EDGE_GAUSS2: [(f64, f64); 2] = [
    (0.5 - 0.28867513459481287, 0.5), // 0.5 - 1/(2*sqrt(3))
    (0.5 + 0.28867513459481287, 0.5),
];

/// Physical quadrature points of the midpoint rule on a triangle.
pub fn tri_points(p: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let mut out = [[0.0; 2]; 3];
    for (q, (bary, _)) in TRI_MIDPOINT.iter().enumerate() {
        for d in 0..2 {
            out[q][d] = bary[0] * p[0][d] + bary[1] * p[1][d] + bary[2] * p[2][d];
        }
    }
    out
}

/// Physical quadrature points of the 2-point Gauss rule on a segment.
pub fn edge_points(a: [f64; 2], b: [f64; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for (q, (t, _)) in EDGE_GAUSS2.iter().enumerate() {
        for d in 0..2 {
            out[q][d] = a[d] + t * (b[d] - a[d]);
        }
    }
    out
}
