//! Geometric transforms of sphere-valued fields: the primitive curve that
//! moves by binormal curvature flow, and the Hashimoto curvature/torsion
//! map.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Curve, SphereField};
use crate::grid::Grid1D;
use crate::vec3::{self, Vec3};

pub const DEFAULT_TORSION_EPS: f64 = 1e-8;

/// Left-endpoint primitive `γ_0 = 0`, `γ_{i+1} = γ_i + dx·u_i`. The forward
/// difference of `γ` returns `u` exactly, so the discrete arclength is one.
pub fn bcf_transform(u: &SphereField) -> Curve {
    let grid = *u.grid();
    let dx = grid.dx();
    let v = u.values();
    let mut points = Vec::with_capacity(v.len());
    let mut carry = Vec::with_capacity(v.len());
    let mut g = vec3::ZERO;
    let mut c = vec3::ZERO;
    points.push(g);
    carry.push(c);
    for ui in &v[..v.len() - 1] {
        for k in 0..3 {
            let step = dx * ui[k];
            let step_err = dx.mul_add(ui[k], -step);
            let (s, e) = two_sum(g[k], step);
            g[k] = s;
            c[k] += e + step_err;
        }
        // renormalize so the carry stays below one ulp of the point
        for k in 0..3 {
            let (s, e) = two_sum(g[k], c[k]);
            g[k] = s;
            c[k] = e;
        }
        points.push(g);
        carry.push(c);
    }
    Curve { grid, points, carry }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `γ_{i+1} − γ_i` including the carried rounding errors.
fn increment(curve: &Curve, i: usize) -> Vec3 {
    let (p, c) = (&curve.points, &curve.carry);
    let mut d = vec3::ZERO;
    for k in 0..3 {
        let (s, e) = two_sum(p[i + 1][k], -p[i][k]);
        d[k] = s + (e + (c[i + 1][k] - c[i][k]));
    }
    d
}

/// `max_i | |γ_{i+1} − γ_i|/dx − 1 |`.
pub fn arclength_residual(curve: &Curve) -> f64 {
    let dx = curve.grid.dx();
    (0..curve.points.len().saturating_sub(1))
        .map(|i| (vec3::norm(increment(curve, i)) / dx - 1.0).abs())
        .fold(0.0, f64::max)
}

/// `∂_x γ × ∂²_x γ` by central differences at interior nodes
/// (zero at the two end nodes).
pub fn binormal_velocity(curve: &Curve) -> Vec<Vec3> {
    let dx = curve.grid.dx();
    let p = &curve.points;
    let mut out = vec![vec3::ZERO; p.len()];
    for i in 1..p.len() - 1 {
        let d1 = vec3::scale(vec3::sub(p[i + 1], p[i - 1]), 0.5 / dx);
        let d2 = vec3::scale(vec3::add(vec3::sub(p[i + 1], vec3::scale(p[i], 2.0)), p[i - 1]), 1.0 / (dx * dx));
        out[i] = vec3::cross(d1, d2);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcfResidual {
    /// Interior L² norm after removing the best spatially constant
    /// translation, which the flow only determines up to.
    pub shifted: f64,
    /// Interior L² norm without the translation.
    pub raw: f64,
    /// The translation that was removed.
    pub shift: Vec3,
}

/// Residual of `γ_{t_m} − γ_{t_0} − ∫ ∂_xγ × ∂²_xγ dt` with the time
/// integral taken by the trapezoid rule over the snapshots.
pub fn bcf_residual(snapshots: &[(f64, Curve)]) -> Result<BcfResidual> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidInput(format!("BCF residual needs at least 2 snapshots, got {}", snapshots.len())));
    }
    let grid = snapshots[0].1.grid;
    let n = grid.n();
    if n < 3 {
        return Err(Error::InvalidInput("BCF residual needs at least 3 nodes".into()));
    }
    for (t, c) in snapshots {
        if c.grid != grid || c.points.len() != n {
            return Err(Error::InvalidInput(format!("snapshot at t = {t} lives on a different grid")));
        }
    }
    let mut acc = vec![vec3::ZERO; n];
    let mut prev = binormal_velocity(&snapshots[0].1);
    for w in snapshots.windows(2) {
        let next = binormal_velocity(&w[1].1);
        let h = 0.5 * (w[1].0 - w[0].0);
        for i in 0..n {
            acc[i] = vec3::axpy(acc[i], h, vec3::add(prev[i], next[i]));
        }
        prev = next;
    }
    let first = &snapshots[0].1.points;
    let last = &snapshots[snapshots.len() - 1].1.points;
    let r: Vec<Vec3> = (1..n - 1).map(|i| vec3::sub(vec3::sub(last[i], first[i]), acc[i])).collect();
    let shift = vec3::scale(r.iter().fold(vec3::ZERO, |a, b| vec3::add(a, *b)), 1.0 / r.len() as f64);
    let dx = grid.dx();
    let norm = |f: &dyn Fn(Vec3) -> Vec3| (r.iter().map(|v| vec3::norm_sq(f(*v))).sum::<f64>() * dx).sqrt();
    Ok(BcfResidual { shifted: norm(&|v| vec3::sub(v, shift)), raw: norm(&|v| v), shift })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashimotoField {
    pub grid: Grid1D,
    pub k: Vec<f64>,
    /// Torsion; `NaN` where undefined.
    pub tau: Vec<f64>,
    pub q: Vec<Complex64>,
    pub defined: Vec<bool>,
    /// Index of the maximal run of defined nodes each node belongs to;
    /// the torsion phase restarts at zero in every run.
    pub segment: Vec<usize>,
}

impl HashimotoField {
    pub fn segments(&self) -> usize {
        self.segment.iter().copied().max().map_or(0, |s| s + 1)
    }
}

/// `k = |∂_x u|`, `τ = (u × ∂_x u)·∂²_x u / k²` where `k > eps`, and
/// `q = k·exp(i∫τ)` with the phase accumulated by left-endpoint sums.
pub fn hashimoto(u: &SphereField, eps: f64) -> HashimotoField {
    let grid = *u.grid();
    let v = u.values();
    let n = v.len();
    let dx = grid.dx();
    // lengths always match for a SphereField
    let d1 = grid.d1_neumann(v).unwrap_or_else(|_| vec![vec3::ZERO; n]);
    let d2 = grid.d2_neumann(v).unwrap_or_else(|_| vec![vec3::ZERO; n]);

    let mut k = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    let mut defined = Vec::with_capacity(n);
    for i in 0..n {
        let ki = vec3::norm(d1[i]);
        k.push(ki);
        if ki > eps {
            tau.push(vec3::dot(vec3::cross(v[i], d1[i]), d2[i]) / (ki * ki));
            defined.push(true);
        } else {
            tau.push(f64::NAN);
            defined.push(false);
        }
    }

    let mut q = Vec::with_capacity(n);
    let mut segment = Vec::with_capacity(n);
    let mut seg = 0usize;
    let mut phase = 0.0;
    let mut in_run = false;
    for i in 0..n {
        if defined[i] {
            if !in_run && i > 0 {
                seg += 1;
                phase = 0.0;
            }
            in_run = true;
            q.push(Complex64::from_polar(k[i], phase));
            phase += dx * tau[i];
        } else {
            if in_run {
                seg += 1;
            }
            in_run = false;
            q.push(Complex64::new(k[i], 0.0));
        }
        segment.push(seg);
    }
    let out = HashimotoField { grid, k, tau, q, defined, segment };
    let undefined = out.defined.iter().filter(|d| !**d).count();
    if undefined > 0 && undefined < n {
        log::warn!("torsion undefined at {undefined} of {n} nodes; Hashimoto field reported piecewise");
    }
    out
}

/// Writes curve snapshots as `t,x,gamma_1,gamma_2,gamma_3` rows.
pub fn write_curves_csv<W: Write>(writer: W, snapshots: &[(f64, Curve)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "x", "gamma_1", "gamma_2", "gamma_3"])?;
    for (t, c) in snapshots {
        for (i, p) in c.points.iter().enumerate() {
            w.write_record(&[
                format!("{t:e}"),
                format!("{:e}", c.grid.x(i)),
                format!("{:e}", p[0]),
                format!("{:e}", p[1]),
                format!("{:e}", p[2]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `x,k,tau,re_q,im_q,defined` rows.
pub fn write_hashimoto_csv<W: Write>(writer: W, field: &HashimotoField) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "k", "tau", "re_q", "im_q", "defined"])?;
    for i in 0..field.k.len() {
        w.write_record(&[
            format!("{:e}", field.grid.x(i)),
            format!("{:e}", field.k[i]),
            if field.defined[i] { format!("{:e}", field.tau[i]) } else { String::new() },
            format!("{:e}", field.q[i].re),
            format!("{:e}", field.q[i].im),
            u8::from(field.defined[i]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
