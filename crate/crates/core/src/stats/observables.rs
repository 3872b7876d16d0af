use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{NoiseIntensity, SphereField};
use crate::vec3::{self, Vec3};

/// Scalar functionals of one field snapshot.
///
/// `grad_l2_sq` is the forward-difference Dirichlet form, and the pointwise
/// `|∂_x u|²` inside `avg_ugrad2_dot_avg` is `−u·∂²u`, whose trapezoid
/// integral reproduces that form. With these choices the discrete energy
/// and average balances mirror the continuum ones term by term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub grad_l2_sq: f64,
    pub grad_l4_4: f64,
    pub lap_l2_sq: f64,
    pub cross_lap_l2_sq: f64,
    pub avg: Vec3,
    pub avg_hu_sq: f64,
    pub avg_h2u_dot_avg: f64,
    pub avg_ugrad2_dot_avg: f64,
    pub fund_residual: f64,
}

/// Column order used in every statistics table.
pub const OBSERVABLE_NAMES: [&str; 14] = [
    "grad_l2_sq",
    "grad_l2_sq_sq",
    "grad_l4_4",
    "lap_l2_sq",
    "cross_lap_l2_sq",
    "avg_x",
    "avg_y",
    "avg_z",
    "avg_norm",
    "avg_hu_sq",
    "avg_h2u_dot_avg",
    "avg_ugrad2_dot_avg",
    "balance_combo",
    "fund_residual",
];

pub const N_OBSERVABLES: usize = OBSERVABLE_NAMES.len();

pub fn observable_index(name: &str) -> Option<usize> {
    OBSERVABLE_NAMES.iter().position(|n| *n == name)
}

impl ObservableRecord {
    /// `⟨u|∂u|²⟩·⟨u⟩ − ⟨h²u⟩·⟨u⟩ + |⟨hu⟩|²`, zero in expectation at
    /// stationarity.
    pub fn balance_combo(&self) -> f64 {
        self.avg_ugrad2_dot_avg - self.avg_h2u_dot_avg + self.avg_hu_sq
    }

    /// Values in [`OBSERVABLE_NAMES`] order.
    pub fn values(&self) -> [f64; N_OBSERVABLES] {
        [
            self.grad_l2_sq,
            self.grad_l2_sq * self.grad_l2_sq,
            self.grad_l4_4,
            self.lap_l2_sq,
            self.cross_lap_l2_sq,
            self.avg[0],
            self.avg[1],
            self.avg[2],
            vec3::norm(self.avg),
            self.avg_hu_sq,
            self.avg_h2u_dot_avg,
            self.avg_ugrad2_dot_avg,
            self.balance_combo(),
            self.fund_residual,
        ]
    }
}

pub fn observe(u: &SphereField, h: &NoiseIntensity, t: f64) -> Result<ObservableRecord> {
    let grid = u.grid();
    grid.check_len(h.values().len(), "noise intensity")?;
    let v = u.values();
    let d1 = grid.d1_neumann(v)?;
    let d2 = grid.d2_neumann(v)?;
    let hv = h.values();

    let mut grad_l4 = 0.0;
    let mut lap = 0.0;
    let mut cross = 0.0;
    let mut avg = vec3::ZERO;
    let mut avg_h = vec3::ZERO;
    let mut avg_h2 = vec3::ZERO;
    let mut avg_e = vec3::ZERO;
    for i in 0..v.len() {
        let w = grid.weight(i);
        let g2 = vec3::norm_sq(d1[i]);
        grad_l4 += w * g2 * g2;
        lap += w * vec3::norm_sq(d2[i]);
        cross += w * vec3::norm_sq(vec3::cross(v[i], d2[i]));
        let e = -vec3::dot(v[i], d2[i]);
        avg = vec3::axpy(avg, w, v[i]);
        avg_h = vec3::axpy(avg_h, w * hv[i], v[i]);
        avg_h2 = vec3::axpy(avg_h2, w * hv[i] * hv[i], v[i]);
        avg_e = vec3::axpy(avg_e, w * e, v[i]);
    }
    let inv_l = 1.0 / grid.length();
    let (avg, avg_h, avg_h2, avg_e) =
        (vec3::scale(avg, inv_l), vec3::scale(avg_h, inv_l), vec3::scale(avg_h2, inv_l), vec3::scale(avg_e, inv_l));

    Ok(ObservableRecord {
        t,
        grad_l2_sq: grid.dirichlet_unchecked(v),
        grad_l4_4: grad_l4,
        lap_l2_sq: lap,
        cross_lap_l2_sq: cross,
        avg,
        avg_hu_sq: vec3::norm_sq(avg_h),
        avg_h2u_dot_avg: vec3::dot(avg_h2, avg),
        avg_ugrad2_dot_avg: vec3::dot(avg_e, avg),
        fund_residual: lap - cross - grad_l4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_initial, InitialCondition};
    use crate::grid::Grid1D;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_record() {
        let g = Grid1D::new(2.0 * PI, 65).unwrap();
        let u = make_initial(&InitialCondition::Constant { q: vec3::E3 }, g).unwrap();
        let h = NoiseIntensity::cosine(g, 0.1, 1).unwrap();
        let r = observe(&u, &h, 1.5).unwrap();
        assert_eq!(r.t, 1.5);
        assert_eq!(r.grad_l2_sq, 0.0);
        assert_eq!(r.fund_residual, 0.0);
        assert!(vec3::max_abs_diff(r.avg, vec3::E3) < 1e-15);
        // |⟨h⟩|² with ⟨cos⟩ = 0
        assert!(r.avg_hu_sq < 1e-20);
        // ⟨h²⟩ = 0.005 for α = 0.1
        assert!((r.avg_h2u_dot_avg - 0.005).abs() < 1e-15);
        assert!((r.balance_combo() + 0.005).abs() < 1e-15);
    }

    #[test]
    fn profile_record_is_consistent() {
        let g = Grid1D::new(2.0 * PI, 129).unwrap();
        let u = make_initial(&InitialCondition::GreatCircleProfile { amplitude: 0.5 }, g).unwrap();
        let h = NoiseIntensity::constant(g, 0.0);
        let r = observe(&u, &h, 0.0).unwrap();
        assert!(r.cross_lap_l2_sq <= r.lap_l2_sq);
        assert!(r.grad_l2_sq > 0.0 && r.grad_l4_4 > 0.0);
        assert!((r.fund_residual - u.fundamental_identity_residual()).abs() < 1e-12 * r.lap_l2_sq);
        let d1 = g.d1_neumann(u.values()).unwrap();
        assert!((r.grad_l2_sq - g.norm_l2_sq(&d1).unwrap()).abs() < 1e-3 * r.grad_l2_sq);
        // observe is a pure function
        assert_eq!(observe(&u, &h, 0.0).unwrap(), r);
    }

    #[test]
    fn names_line_up_with_values() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let u = make_initial(&InitialCondition::Constant { q: vec3::E1 }, g).unwrap();
        let r = observe(&u, &NoiseIntensity::constant(g, 2.0), 0.0).unwrap();
        let v = r.values();
        assert_eq!(v[observable_index("avg_x").unwrap()], r.avg[0]);
        assert_eq!(v[observable_index("balance_combo").unwrap()], r.balance_combo());
        assert_eq!(v[observable_index("fund_residual").unwrap()], r.fund_residual);
        assert!(observable_index("nope").is_none());
    }
}
