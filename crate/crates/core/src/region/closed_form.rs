//! Closed-form symmetric-rate candidates for the symmetric two-vehicle toy
//! model, kept as cross-checks against the direct minimisation in
//! [`super::sym_rate_direct`].

use serde::Serialize;

use super::bounds::sym_rate_direct;
use crate::error::Result;
use crate::state::{lens_displaced_area, toy_model_joint, Geometry, VehicleProfile};

/// Tolerance for flagging a closed form that disagrees with direct minimisation.
pub const DISCREPANCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedForms {
    /// `R_sym,1 .. R_sym,4`.
    pub r_sym: [f64; 4],
    /// Symmetric rate with feedback only.
    pub r_fb: f64,
    /// Closed form stated for the mixed scheme under the validity conditions.
    pub r_mixed: f64,
    /// `p_{s≠00} ./ p_{01,11}`, indexed by the estimate `00, 01, 10, 11`.
    pub mu_candidates: [f64; 4],
    /// `mu2 <= mu4 <= mu1 <= mu3`.
    pub ordering_holds: bool,
    /// `1/3 < exp(-lambda A) < 4/5`.
    pub density_condition: bool,
    /// Crescent area above its threshold.
    pub crescent_condition: bool,
    /// Direct minimisation over the breakpoints.
    pub direct: f64,
    /// `min_i R_sym,i` differs from `direct`.
    pub min_discrepancy: bool,
    /// Both conditions hold yet `r_mixed` differs from `direct`.
    pub mixed_discrepancy: bool,
}

/// `R_sym,1 .. R_sym,4` from `x = exp(-lambda A)` and `y = exp(-lambda A_k)`.
fn candidates(x: f64, y: f64, lambda: f64, a: f64, ak: f64) -> [f64; 4] {
    let s1 = x * y;
    let s3 = x - 1.0;
    let s4 = y - 1.0;
    let s2 = x * x * s4 * s4 / (s3 * s3) - 1.0;
    let s5 = s1 * (y - 1.0) / (x - 1.0) - 1.0;

    let r1 = (1.0 - x * x) / ((s3 * (s1 * (y - 1.0) / (x - 1.0) - 1.0)) / (s1 - 2.0 * x + 1.0) + 1.0);

    let den2 = s2 * s3 / (s1 - 2.0 * x + 1.0) + 1.0;
    let r2 = -(s2 * s3 * s3 + x * x * (y * y - 1.0) - x * s2 * s3) / den2 + x * (s1 * s4 - s3) / den2;

    let e = |t: f64| (lambda * t).exp();
    let r3 = (e(a) - e(ak)) / (2.0 * e(a + ak) + e(2.0 * a + ak)) + (1.0 - x) * (1.0 + y) / (2.0 + y);

    let r4 = (1.0 - x) * s5 / (s5 + y - 1.0);
    [r1, r2, r3, r4]
}

/// Mixed-scheme closed form, written with decaying exponentials.
fn mixed_closed_form(x: f64, y: f64) -> f64 {
    (x * y - x * x) / (2.0 * x + 1.0) + (1.0 - x) * (1.0 + y) / (2.0 + y)
}

/// `(1 - x^2) / (2 + x)`.
pub fn feedback_only_sym_rate(x: f64) -> f64 {
    (1.0 - x * x) / (2.0 + x)
}

pub fn sym_rate_closed_forms(geom: &Geometry, profile: &VehicleProfile) -> Result<ClosedForms> {
    geom.validate()?;
    let a = geom.ball_area();
    let ak = lens_displaced_area(geom.displacement(profile.v), geom.rb)?;
    let lambda = geom.lambda;
    let x = (-lambda * a).exp();
    let y = (-lambda * ak).exp();

    let joint = toy_model_joint(geom, &[profile.v, profile.v])?;
    let any = joint.p_any_received();
    let event = joint.p_received_by(2);
    let mut mu_candidates = [f64::INFINITY; 4];
    for (m, (p, q)) in mu_candidates.iter_mut().zip(any.values.iter().zip(&event.values)) {
        if *q > 0.0 {
            *m = p / q;
        }
    }
    let [m1, m2, m3, m4] = mu_candidates;
    let (direct, _) = sym_rate_direct(&joint)?;

    let r_sym = candidates(x, y, lambda, a, ak);
    let r_mixed = mixed_closed_form(x, y);
    let threshold = ((1.0 / x + 1.0) / (3.0 / x - 1.0 / (x * x))).ln() / lambda;
    let density_condition = 1.0 / 3.0 < x && x < 4.0 / 5.0;
    let crescent_condition = threshold.is_finite() && ak > threshold;
    let min_r = r_sym.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(ClosedForms {
        r_sym,
        r_fb: feedback_only_sym_rate(x),
        r_mixed,
        mu_candidates,
        ordering_holds: m2 <= m4 && m4 <= m1 && m1 <= m3,
        density_condition,
        crescent_condition,
        direct,
        min_discrepancy: !((min_r - direct).abs() <= DISCREPANCY_TOL),
        mixed_discrepancy: density_condition && crescent_condition && !((r_mixed - direct).abs() <= DISCREPANCY_TOL),
    })
}
