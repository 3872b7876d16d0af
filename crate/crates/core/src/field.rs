//! Sphere-valued fields, noise-intensity profiles, initial data and the
//! pointwise geometric identities of unit-length maps, written as residuals.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::vec3::{self, Vec3};

/// Allowed deviation of a node norm from 1.
pub const UNIT_TOL: f64 = 1e-12;
const PROJECTION_FLOOR: f64 = 1e-12;
/// Boundary slope above which tabulated initial data is reported as not
/// Neumann-compatible.
pub const NEUMANN_SLOPE_TOL: f64 = 1e-6;

/// A map from the grid nodes to the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereField {
    grid: Grid1D,
    values: Vec<Vec3>,
}

impl SphereField {
    /// Wraps unit vectors; fails if any node is off the sphere by more than
    /// [`UNIT_TOL`].
    pub fn new(grid: Grid1D, values: Vec<Vec3>) -> Result<Self> {
        grid.check_len(values.len(), "sphere field")?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| (vec3::norm(**v) - 1.0).abs() > UNIT_TOL) {
            return Err(Error::InvalidInput(format!("node {i} has norm {} (not on the unit sphere)", vec3::norm(*v))));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_unit_unchecked(grid: Grid1D, values: Vec<Vec3>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.values.iter().map(|v| (vec3::norm(*v) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest one-sided boundary slope `|u_1 - u_0| / dx` or its mirror.
    pub fn boundary_slope(&self) -> f64 {
        let n = self.values.len();
        let dx = self.grid.dx();
        let left = vec3::norm(vec3::sub(self.values[1], self.values[0]));
        let right = vec3::norm(vec3::sub(self.values[n - 1], self.values[n - 2]));
        left.max(right) / dx
    }

    pub fn tangency_residual(&self) -> f64 {
        tangency_residual(&self.grid, &self.values)
    }

    pub fn fundamental_identity_residual(&self) -> f64 {
        fundamental_identity_residual(&self.grid, &self.values)
    }

    pub fn damping_identity_residual(&self) -> f64 {
        damping_identity_residual(&self.grid, &self.values)
    }
}

/// Normalizes every node of a raw vector field onto the sphere.
pub fn project_sphere(grid: Grid1D, raw: &[Vec3]) -> Result<SphereField> {
    grid.check_len(raw.len(), "raw field")?;
    let values = raw
        .iter()
        .enumerate()
        .map(|(node, v)| {
            let norm = vec3::norm(*v);
            if norm < PROJECTION_FLOOR || !norm.is_finite() {
                Err(Error::DegenerateProjection { node, norm })
            } else {
                Ok(vec3::scale(*v, 1.0 / norm))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SphereField { grid, values })
}

/// Initial data families; all are Neumann-compatible except `Tabulated`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Constant {
        q: Vec3,
    },
    /// `u = (cos θ, sin θ, 0)` with `θ(x) = A cos(πx/L)`.
    GreatCircleProfile {
        amplitude: f64,
    },
    /// Raw nodal vectors, projected onto the sphere.
    Tabulated {
        values: Vec<Vec3>,
    },
}

pub fn make_initial(kind: &InitialCondition, grid: Grid1D) -> Result<SphereField> {
    match kind {
        InitialCondition::Constant { q } => {
            let norm = vec3::norm(*q);
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("constant initial value must be a unit vector, |Q| = {norm}")));
            }
            let q = vec3::scale(*q, 1.0 / norm);
            Ok(SphereField { grid, values: vec![q; grid.n()] })
        }
        InitialCondition::GreatCircleProfile { amplitude } => {
            if !amplitude.is_finite() {
                return Err(Error::InvalidInput("profile amplitude must be finite".into()));
            }
            let l = grid.length();
            let values = grid
                .nodes()
                .into_iter()
                .map(|x| {
                    let theta = amplitude * (PI * x / l).cos();
                    [theta.cos(), theta.sin(), 0.0]
                })
                .collect();
            Ok(SphereField { grid, values })
        }
        InitialCondition::Tabulated { values } => {
            let field = project_sphere(grid, values)?;
            let slope = field.boundary_slope();
            if slope > NEUMANN_SLOPE_TOL {
                log::warn!("tabulated initial data is not Neumann-compatible: boundary slope {slope:e}");
            }
            Ok(field)
        }
    }
}

/// `max_i |u_i · (∂_x u)_i|` over interior nodes.
pub fn tangency_residual(grid: &Grid1D, u: &[Vec3]) -> f64 {
    let d1 = grid.d1_neumann(u).expect("field on grid");
    (1..u.len() - 1).map(|i| vec3::dot(u[i], d1[i]).abs()).fold(0.0, f64::max)
}

/// `‖∂²u‖² − ‖u × ∂²u‖² − ‖∂u‖⁴_{L⁴}`.
pub fn fundamental_identity_residual(grid: &Grid1D, u: &[Vec3]) -> f64 {
    let d1 = grid.d1_neumann(u).expect("field on grid");
    let d2 = grid.d2_neumann(u).expect("field on grid");
    let cross: Vec<Vec3> = u.iter().zip(&d2).map(|(a, b)| vec3::cross(*a, *b)).collect();
    grid.norm_l2_sq(&d2).unwrap() - grid.norm_l2_sq(&cross).unwrap() - grid.norm_l4_4(&d1).unwrap()
}

/// Interior L² norm of `−u × (u × ∂²u) − (∂²u + u |∂u|²)`.
pub fn damping_identity_residual(grid: &Grid1D, u: &[Vec3]) -> f64 {
    let d1 = grid.d1_neumann(u).expect("field on grid");
    let d2 = grid.d2_neumann(u).expect("field on grid");
    let sum: f64 = (1..u.len() - 1)
        .map(|i| {
            let lhs = vec3::scale(vec3::cross(u[i], vec3::cross(u[i], d2[i])), -1.0);
            let rhs = vec3::axpy(d2[i], vec3::norm_sq(d1[i]), u[i]);
            vec3::norm_sq(vec3::sub(lhs, rhs))
        })
        .sum();
    (grid.dx() * sum).sqrt()
}

/// Profile family of a noise intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Constant {
        c: f64,
    },
    /// `h(x) = α cos(x)` on `[0, 2πk]`.
    Cosine {
        alpha: f64,
        k: u32,
    },
    Tabulated,
}

/// Scalar spatial modulation `h(x)` of the noise, with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIntensity {
    grid: Grid1D,
    h: Vec<f64>,
    dx_h: Vec<f64>,
    family: NoiseFamily,
}

impl NoiseIntensity {
    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self { grid, h: vec![c; grid.n()], dx_h: vec![0.0; grid.n()], family: NoiseFamily::Constant { c } }
    }

    pub fn cosine(grid: Grid1D, alpha: f64, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("cosine noise needs k >= 1".into()));
        }
        let expected = 2.0 * PI * k as f64;
        if (grid.length() - expected).abs() > 1e-9 * expected {
            return Err(Error::Config(format!(
                "cosine noise with k = {k} needs domain length 2πk = {expected}, grid has {}",
                grid.length()
            )));
        }
        let xs = grid.nodes();
        Ok(Self {
            grid,
            h: xs.iter().map(|x| alpha * x.cos()).collect(),
            dx_h: xs.iter().map(|x| -alpha * x.sin()).collect(),
            family: NoiseFamily::Cosine { alpha, k },
        })
    }

    /// Nodal values; the derivative is taken by central differences
    /// (second-order one-sided at the ends).
    pub fn tabulated(grid: Grid1D, h: Vec<f64>) -> Result<Self> {
        grid.check_len(h.len(), "noise intensity")?;
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("noise intensity contains non-finite values".into()));
        }
        let n = h.len();
        let dx = grid.dx();
        let mut dx_h = vec![0.0; n];
        for i in 1..n - 1 {
            dx_h[i] = (h[i + 1] - h[i - 1]) / (2.0 * dx);
        }
        dx_h[0] = (-3.0 * h[0] + 4.0 * h[1] - h[2]) / (2.0 * dx);
        dx_h[n - 1] = (3.0 * h[n - 1] - 4.0 * h[n - 2] + h[n - 3]) / (2.0 * dx);
        Ok(Self { grid, h, dx_h, family: NoiseFamily::Tabulated })
    }

    /// Reads a two-column `x,h` CSV whose abscissae must coincide with the
    /// grid nodes. A header row is optional.
    pub fn from_csv<R: Read>(grid: Grid1D, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut xs = Vec::new();
        let mut hs = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::InvalidInput(format!("row {row}: expected 2 columns, got {}", record.len())));
            }
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => {
                    xs.push(v[0]);
                    hs.push(v[1]);
                }
                Err(_) if row == 0 => continue,
                Err(e) => return Err(Error::InvalidInput(format!("row {row}: {e}"))),
            }
        }
        grid.check_len(xs.len(), "tabulated noise CSV")?;
        let tol = 1e-9 * grid.length();
        for (i, x) in xs.iter().enumerate() {
            if (x - grid.x(i)).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "tabulated x[{i}] = {x} does not match grid node {}",
                    grid.x(i)
                )));
            }
        }
        Self::tabulated(grid, hs)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }

    pub fn derivative(&self) -> &[f64] {
        &self.dx_h
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn is_space_constant(&self) -> bool {
        self.dx_h.iter().all(|d| *d == 0.0)
    }

    /// `s · h`, keeping the family tag consistent.
    pub fn scaled(&self, s: f64) -> Self {
        let family = match self.family {
            NoiseFamily::Constant { c } => NoiseFamily::Constant { c: s * c },
            NoiseFamily::Cosine { alpha, k } => NoiseFamily::Cosine { alpha: s * alpha, k },
            NoiseFamily::Tabulated => NoiseFamily::Tabulated,
        };
        Self {
            grid: self.grid,
            h: self.h.iter().map(|v| s * v).collect(),
            dx_h: self.dx_h.iter().map(|v| s * v).collect(),
            family,
        }
    }

    pub fn moments(&self) -> HMoments {
        h_moments(self)
    }
}

/// Spatial moments of `h` that enter the stationary identities and the
/// non-triviality bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HMoments {
    /// `⟨h⟩`
    pub mean: f64,
    /// `⟨h²⟩`
    pub mean_sq: f64,
    /// `⟨|h|⟩`
    pub mean_abs: f64,
    /// `‖h‖_∞`
    pub sup: f64,
    /// `‖∂_x h‖²_{L²}`
    pub grad_l2_sq: f64,
}

pub fn h_moments(h: &NoiseIntensity) -> HMoments {
    let g = &h.grid;
    let l = g.length();
    HMoments {
        mean: g.integrate_unchecked(h.h.iter().copied()) / l,
        mean_sq: g.integrate_unchecked(h.h.iter().map(|v| v * v)) / l,
        mean_abs: g.integrate_unchecked(h.h.iter().map(|v| v.abs())) / l,
        sup: h.h.iter().fold(0.0, |m, v| m.max(v.abs())),
        grad_l2_sq: g.integrate_unchecked(h.dx_h.iter().map(|v| v * v)),
    }
}

/// A discrete space curve (e.g. the primitive of a sphere-valued field).
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub grid: Grid1D,
    pub points: Vec<Vec3>,
    /// Rounding error of each point: `points[i] + carry[i]` is the curve to
    /// about twice working precision. Zero for curves built directly.
    pub carry: Vec<Vec3>,
}

impl Curve {
    pub fn new(grid: Grid1D, points: Vec<Vec3>) -> Self {
        let carry = vec![[0.0; 3]; points.len()];
        Self { grid, points, carry }
    }
}
