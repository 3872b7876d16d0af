//! Uniform 1D grid on `[0, L]` with homogeneous Neumann boundary handling.
//!
//! Every spatial derivative and integral in the crate goes through this
//! module so that operators and quadratures stay mutually consistent:
//! the ghost-mirrored Laplacian is symmetric with respect to the trapezoid
//! weights, which is what makes the discrete energy and average identities
//! hold exactly at the semi-discrete level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    length: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("grid length must be positive, got {length}")));
        }
        if n < 3 {
            return Err(Error::Config(format!("grid needs at least 3 nodes, got {n}")));
        }
        Ok(Self { length, n, dx: length / (n - 1) as f64 })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Position of node `i`; the last node sits exactly at `length`.
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.length
        } else {
            i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Grid with `2n - 1` nodes on the same interval (every old node kept).
    pub fn refined(&self) -> Self {
        Self::new(self.length, 2 * self.n - 1).expect("refinement of a valid grid")
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n {
            return Err(Error::Config(format!("{what} has {len} nodes but the grid has {}", self.n)));
        }
        Ok(())
    }

    /// Central first difference; zero at both boundary nodes.
    pub fn d1_neumann(&self, f: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check_len(f.len(), "field")?;
        let mut out = vec![vec3::ZERO; self.n];
        self.d1_into(f, &mut out);
        Ok(out)
    }

    /// Three-point Laplacian with mirrored ghosts `f[-1] = f[1]`, `f[n] = f[n-2]`.
    pub fn d2_neumann(&self, f: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check_len(f.len(), "field")?;
        let mut out = vec![vec3::ZERO; self.n];
        self.d2_into(f, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn d1_into(&self, f: &[Vec3], out: &mut [Vec3]) {
        let n = self.n;
        let c = 0.5 / self.dx;
        out[0] = vec3::ZERO;
        out[n - 1] = vec3::ZERO;
        for i in 1..n - 1 {
            out[i] = vec3::scale(vec3::sub(f[i + 1], f[i - 1]), c);
        }
    }

    #[inline]
    pub(crate) fn d2_into(&self, f: &[Vec3], out: &mut [Vec3]) {
        let n = self.n;
        let c = 1.0 / (self.dx * self.dx);
        for k in 0..3 {
            out[0][k] = 2.0 * (f[1][k] - f[0][k]) * c;
            out[n - 1][k] = 2.0 * (f[n - 2][k] - f[n - 1][k]) * c;
        }
        for i in 1..n - 1 {
            let (a, b, d) = (f[i - 1], f[i], f[i + 1]);
            out[i] = [(d[0] - 2.0 * b[0] + a[0]) * c, (d[1] - 2.0 * b[1] + a[1]) * c, (d[2] - 2.0 * b[2] + a[2]) * c];
        }
    }

    /// Trapezoid quadrature of a nodal scalar.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len(), "scalar field")?;
        Ok(self.integrate_unchecked(values.iter().copied()))
    }

    #[inline]
    pub(crate) fn integrate_unchecked(&self, values: impl Iterator<Item = f64>) -> f64 {
        let last = self.n - 1;
        let mut interior = 0.0;
        let mut ends = 0.0;
        for (i, v) in values.enumerate() {
            if i == 0 || i == last {
                ends += v;
            } else {
                interior += v;
            }
        }
        self.dx * (interior + 0.5 * ends)
    }

    pub fn norm_l2_sq(&self, f: &[Vec3]) -> Result<f64> {
        self.check_len(f.len(), "field")?;
        Ok(self.integrate_unchecked(f.iter().map(|v| vec3::norm_sq(*v))))
    }

    pub fn norm_l4_4(&self, f: &[Vec3]) -> Result<f64> {
        self.check_len(f.len(), "field")?;
        Ok(self.integrate_unchecked(f.iter().map(|v| {
            let s = vec3::norm_sq(*v);
            s * s
        })))
    }

    pub fn inner_l2(&self, f: &[Vec3], g: &[Vec3]) -> Result<f64> {
        self.check_len(f.len(), "first field")?;
        self.check_len(g.len(), "second field")?;
        Ok(self.integrate_unchecked(f.iter().zip(g).map(|(a, b)| vec3::dot(*a, *b))))
    }

    /// `⟨f⟩ = ∫ f dx / L`.
    pub fn space_average(&self, f: &[Vec3]) -> Result<Vec3> {
        self.check_len(f.len(), "field")?;
        Ok(self.average_unchecked(f))
    }

    #[inline]
    pub(crate) fn average_unchecked(&self, f: &[Vec3]) -> Vec3 {
        let mut acc = vec3::ZERO;
        for (i, v) in f.iter().enumerate() {
            acc = vec3::axpy(acc, self.weight(i), *v);
        }
        vec3::scale(acc, 1.0 / self.length)
    }

    /// Forward-difference Dirichlet energy `Σ |f_{i+1} - f_i|² / dx`.
    ///
    /// Equals `-inner_l2(f, d2_neumann(f))` exactly up to rounding; this is
    /// the gradient norm conserved by the discrete Schrödinger map flow.
    pub fn dirichlet_energy(&self, f: &[Vec3]) -> Result<f64> {
        self.check_len(f.len(), "field")?;
        Ok(self.dirichlet_unchecked(f))
    }

    #[inline]
    pub(crate) fn dirichlet_unchecked(&self, f: &[Vec3]) -> f64 {
        f.windows(2).map(|w| vec3::norm_sq(vec3::sub(w[1], w[0]))).sum::<f64>() / self.dx
    }
}
