//! Closed catalog of coefficient fields A(y), mu(y), alpha(y), f(x,y), g(x,y).
//!
//! Every field is a finite trigonometric expression, so validators are exact
//! on sample grids and all evaluations are Y-periodic by construction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{EdgeTag, TriMesh};
use crate::quadrature::{edge_points, EDGE_GAUSS2};

const TWO_PI: f64 = 2.0 * PI;

/// 2x2 diffusion matrix field: a_ij(y) = c_ij + d_ij * sin(2 pi wave . y).
/// No symmetry is assumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MatrixField {
    Constant {
        c: [[f64; 2]; 2],
    },
    Trig {
        c: [[f64; 2]; 2],
        d: [[f64; 2]; 2],
        wave: [i32; 2],
    },
}

impl MatrixField {
    pub fn identity() -> Self {
        MatrixField::Constant {
            c: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn eval(&self, y: [f64; 2]) -> [[f64; 2]; 2] {
        match self {
            MatrixField::Constant { c } => *c,
            MatrixField::Trig { c, d, wave } => {
                let s = (TWO_PI * (wave[0] as f64 * y[0] + wave[1] as f64 * y[1])).sin();
                let mut a = *c;
                for i in 0..2 {
                    for j in 0..2 {
                        a[i][j] += d[i][j] * s;
                    }
                }
                a
            }
        }
    }

    pub fn is_symmetric_kind(&self) -> bool {
        match self {
            MatrixField::Constant { c } => c[0][1] == c[1][0],
            MatrixField::Trig { c, d, .. } => c[0][1] == c[1][0] && d[0][1] == d[1][0],
        }
    }

    fn validate_waves(&self) -> Result<()> {
        if let MatrixField::Trig { wave, .. } = self {
            check_wave(*wave)?;
        }
        Ok(())
    }
}

/// Eigenvalues of the symmetric part of a 2x2 matrix, smallest first.
pub fn symmetric_part_eigenvalues(a: &[[f64; 2]; 2]) -> (f64, f64) {
    let s = 0.5 * (a[0][1] + a[1][0]);
    let tr = 0.5 * (a[0][0] + a[1][1]);
    let dev = 0.5 * (a[0][0] - a[1][1]);
    let rad = (dev * dev + s * s).sqrt();
    (tr - rad, tr + rad)
}

/// Sampled ellipticity constants of (ac): m <= (A zeta, zeta)/|zeta|^2 <= M.
///
/// Samples the eigenvalues of the symmetric part on a `grid` x `grid`
/// lattice (at least 64 x 64) and errors when the lower constant is not
/// positive. Antisymmetric parts drop out of the quadratic form.
pub fn validate_ellipticity(a: &MatrixField, grid: usize) -> Result<(f64, f64)> {
    a.validate_waves()?;
    let grid = grid.max(64);
    let mut m = f64::INFINITY;
    let mut big = f64::NEG_INFINITY;
    for j in 0..grid {
        for i in 0..grid {
            let y = [i as f64 / grid as f64, j as f64 / grid as f64];
            let (lo, hi) = symmetric_part_eigenvalues(&a.eval(y));
            m = m.min(lo);
            big = big.max(hi);
        }
    }
    if m <= 0.0 {
        return Err(Error::NotElliptic { m });
    }
    Ok((m, big))
}

/// Scalar volume field mu(y) = base + amplitude * sin(2 pi wave . y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalarVolumeField {
    Constant {
        base: f64,
    },
    Trig {
        base: f64,
        amplitude: f64,
        wave: [i32; 2],
    },
}

impl ScalarVolumeField {
    pub fn one() -> Self {
        ScalarVolumeField::Constant { base: 1.0 }
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        match self {
            ScalarVolumeField::Constant { base } => *base,
            ScalarVolumeField::Trig {
                base,
                amplitude,
                wave,
            } => {
                base + amplitude * (TWO_PI * (wave[0] as f64 * y[0] + wave[1] as f64 * y[1])).sin()
            }
        }
    }
}

/// Sampled positivity bound mu_0 = min mu(y) > 0; errors when not positive.
pub fn validate_mu(mu: &ScalarVolumeField) -> Result<f64> {
    if let ScalarVolumeField::Trig { wave, .. } = mu {
        check_wave(*wave)?;
    }
    let grid = 64usize;
    let mut min = f64::INFINITY;
    for j in 0..grid {
        for i in 0..grid {
            let y = [i as f64 / grid as f64, j as f64 / grid as f64];
            min = min.min(mu.eval(y));
        }
    }
    if min <= 0.0 {
        return Err(Error::NotPositive { min });
    }
    Ok(min)
}

/// Sign-changing surface resistivity on the hole boundary, given by a
/// Fourier sum without constant term:
/// alpha(theta) = sum_k a_k cos(k theta) + b_k sin(k theta) - shift.
///
/// The exact-circle mean is zero by construction; `discrete_mean_shift` is
/// set by [`discrete_zero_mean_correction`] so the edge-quadrature integral
/// over the polygonal Sigma_h vanishes as well, which is the discrete
/// solvability condition for the gamma and theta cell problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceResistivity {
    /// (a_k, b_k) for k = 1..=len; at most 4 modes.
    pub fourier: Vec<[f64; 2]>,
    #[serde(default)]
    pub discrete_mean_shift: f64,
}

impl SurfaceResistivity {
    pub fn zero() -> Self {
        SurfaceResistivity {
            fourier: Vec::new(),
            discrete_mean_shift: 0.0,
        }
    }

    pub fn from_modes(fourier: Vec<[f64; 2]>) -> Result<Self> {
        let alpha = SurfaceResistivity {
            fourier,
            discrete_mean_shift: 0.0,
        };
        alpha.validate()?;
        Ok(alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fourier.len() > 4 {
            return Err(Error::Config(format!(
                "alpha supports at most 4 Fourier modes, got {}",
                self.fourier.len()
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.discrete_mean_shift == 0.0 && self.fourier.iter().all(|m| *m == [0.0, 0.0])
    }

    /// Evaluate at a hole-boundary angle.
    pub fn eval_theta(&self, theta: f64) -> f64 {
        let mut v = -self.discrete_mean_shift;
        for (idx, [a, b]) in self.fourier.iter().enumerate() {
            let k = (idx + 1) as f64;
            v += a * (k * theta).cos() + b * (k * theta).sin();
        }
        v
    }

    /// Evaluate at a cell point y; the angle is measured around `center`.
    pub fn eval_at(&self, y: [f64; 2], center: [f64; 2]) -> f64 {
        self.eval_theta((y[1] - center[1]).atan2(y[0] - center[0]))
    }

    /// Sampled sup norm |alpha|_{L^inf(Sigma)} on a dense angle grid.
    pub fn sup_abs(&self) -> f64 {
        let n = 4096;
        (0..n)
            .map(|i| self.eval_theta(TWO_PI * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Integral of alpha over the polygonal hole boundary of `mesh` using the
/// same 2-point edge quadrature as all surface assembly, together with the
/// polygon length.
pub fn surface_mean_data(alpha: &SurfaceResistivity, mesh: &TriMesh) -> Result<(f64, f64)> {
    let geom = mesh
        .cell_geometry
        .ok_or_else(|| Error::MeshMismatch("mesh has no cell geometry".into()))?;
    let edges = mesh.edges(EdgeTag::Sigma).map_err(|_| Error::EmptySigma)?;
    if edges.is_empty() {
        return Err(Error::EmptySigma);
    }
    let scale = mesh.tiling.as_ref().map_or(1.0, |t| t.n as f64);
    let mut integral = 0.0;
    let mut length = 0.0;
    for &[a, b] in edges {
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let len = crate::mesh::dist(pa, pb);
        let pts = edge_points(pa, pb);
        for (q, (_, w)) in EDGE_GAUSS2.iter().enumerate() {
            let y = cell_coordinate(pts[q], scale);
            integral += w * len * alpha.eval_at(y, geom.hole_center);
        }
        length += len;
    }
    Ok((integral, length))
}

/// Set `discrete_mean_shift` so the edge-quadrature integral of alpha over
/// the hole boundary of `mesh` is zero (to rounding).
pub fn discrete_zero_mean_correction(
    alpha: &SurfaceResistivity,
    mesh: &TriMesh,
) -> Result<SurfaceResistivity> {
    let (integral, length) = surface_mean_data(alpha, mesh)?;
    let mut corrected = alpha.clone();
    corrected.discrete_mean_shift += integral / length;
    Ok(corrected)
}

/// Map a point of a (possibly tiled) mesh to its cell coordinate in [0,1)^2.
pub fn cell_coordinate(x: [f64; 2], scale: f64) -> [f64; 2] {
    if scale == 1.0 {
        x
    } else {
        [
            (x[0] * scale).rem_euclid(1.0).min(1.0),
            (x[1] * scale).rem_euclid(1.0).min(1.0),
        ]
    }
}

/// One separable factor of a source term, evaluated on a 2D point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Factor {
    Const { value: f64 },
    /// sin(2 pi freq * p_axis), axis is 1 or 2.
    Sin { axis: u8, freq: u32 },
}

impl Factor {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            Factor::Const { value } => *value,
            Factor::Sin { axis, freq } => (TWO_PI * *freq as f64 * p[(*axis - 1) as usize]).sin(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Factor::Const { value } => {
                if !value.is_finite() {
                    return Err(Error::Config("non-finite source factor".into()));
                }
            }
            Factor::Sin { axis, freq } => {
                if !(1..=2).contains(axis) {
                    return Err(Error::Config(format!(
                        "source factor axis {axis} not in 1..=2"
                    )));
                }
                if *freq == 0 || *freq > 8 {
                    return Err(Error::Config(format!(
                        "source frequency {freq} not in 1..=8"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm {
    pub x: Factor,
    pub y: Factor,
}

/// Separable source f(x,y) = sum_j u_j(x) v_j(y); same shape serves g(x,y)
/// with the y factors evaluated on Sigma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceField {
    pub terms: Vec<SourceTerm>,
}

impl SourceField {
    pub fn zero() -> Self {
        SourceField { terms: Vec::new() }
    }

    pub fn constant(v: f64) -> Self {
        SourceField {
            terms: vec![SourceTerm {
                x: Factor::Const { value: v },
                y: Factor::Const { value: 1.0 },
            }],
        }
    }

    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.terms.iter().map(|t| t.x.eval(x) * t.y.eval(y)).sum()
    }

    /// Oscillated trace f_eps(x) = f(x, x/eps mod 1) with eps = 1/n.
    pub fn eval_oscillated(&self, x: [f64; 2], n: usize) -> f64 {
        self.eval(x, cell_coordinate(x, n as f64))
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            t.x.validate()?;
            t.y.validate()?;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
            || self
                .terms
                .iter()
                .all(|t| matches!(t.x, Factor::Const { value: v } if v == 0.0))
    }
}

/// The full coefficient set of one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a: MatrixField,
    pub mu: ScalarVolumeField,
    pub alpha: SurfaceResistivity,
    pub f: SourceField,
    pub g: SourceField,
}

impl CoefficientSet {
    /// Run all validators; returns (m, M, mu0).
    pub fn validate(&self) -> Result<(f64, f64, f64)> {
        let (m, big) = validate_ellipticity(&self.a, 64)?;
        let mu0 = validate_mu(&self.mu)?;
        self.alpha.validate()?;
        self.f.validate()?;
        self.g.validate()?;
        Ok((m, big, mu0))
    }

    /// Deterministic content hash used for model provenance.
    pub fn content_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        serde_json::to_string(self).unwrap().hash(&mut hasher);
        hasher.finish()
    }
}

fn check_wave(wave: [i32; 2]) -> Result<()> {
    if wave == [0, 0] || wave.iter().any(|w| w.abs() > 8) {
        return Err(Error::Config(format!(
            "wave vector {wave:?} must be nonzero with components in -8..=8"
        )));
    }
    Ok(())
}
