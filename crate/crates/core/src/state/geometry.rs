//! LoS-ball blockage model for a single vehicle.
//!
//! Radio sites form a homogeneous Poisson process of density `lambda` (km⁻²).
//! A vehicle is unblocked iff some site lies within `rb` km. The transmitter
//! predicts the current state from a location report that is `ts` seconds
//! old, so the prediction degrades with the distance driven since.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Radio-site density in km⁻².
    pub lambda: f64,
    /// LoS ball radius in km.
    pub rb: f64,
    /// Age of the location report in seconds.
    pub ts: f64,
}

impl Geometry {
    pub fn new(lambda: f64, rb: f64, ts: f64) -> Result<Self> {
        let g = Self { lambda, rb, ts };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "density must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.rb.is_finite() && self.rb > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "LoS radius must be > 0, got {}",
                self.rb
            )));
        }
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "report delay must be > 0, got {}",
                self.ts
            )));
        }
        Ok(())
    }

    /// Area of the LoS ball, km².
    pub fn ball_area(&self) -> f64 {
        PI * self.rb * self.rb
    }

    /// Probability that a vehicle sees no site, `exp(-lambda * A)`.
    pub fn erasure_probability(&self) -> f64 {
        (-self.lambda * self.ball_area()).exp()
    }

    /// Distance in km covered at `v_kmh` during the report delay.
    pub fn displacement(&self, v_kmh: f64) -> f64 {
        v_kmh / SECONDS_PER_HOUR * self.ts
    }

    /// Smallest velocity (km/h) at which the location report carries no
    /// information, i.e. the displacement reaches `2 rb`.
    pub fn decorrelation_velocity(&self) -> f64 {
        2.0 * self.rb * SECONDS_PER_HOUR / self.ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleProfile {
    /// Velocity in km/h.
    pub v: f64,
}

impl VehicleProfile {
    pub fn new(v: f64) -> Result<Self> {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "velocity must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self { v })
    }
}

/// Area of the part of a radius-`rb` disk not covered by the same disk
/// shifted by `d`. Saturates at the full disk area once `d >= 2 rb`.
pub fn lens_displaced_area(d: f64, rb: f64) -> Result<f64> {
    if !(rb.is_finite() && rb > 0.0) {
        return Err(Error::InvalidGeometry(format!("LoS radius must be > 0, got {rb}")));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "displacement must be finite and >= 0, got {d}"
        )));
    }
    let full = PI * rb * rb;
    if d >= 2.0 * rb {
        return Ok(full);
    }
    let ratio = (d / (2.0 * rb)).clamp(-1.0, 1.0);
    let root = (4.0 * rb * rb - d * d).max(0.0).sqrt();
    let area = full + 0.5 * d * root - 2.0 * rb * rb * ratio.acos();
    Ok(area.clamp(0.0, full))
}

/// Joint law of one vehicle's true state and its estimate.
///
/// `table[s][shat] = P(S = s, Ŝ = shat)` with 0 meaning blocked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerVehicleJoint {
    pub table: [[f64; 2]; 2],
}

impl PerVehicleJoint {
    pub const MASS_TOL: f64 = 1e-12;
    pub const MARGINAL_TOL: f64 = 1e-9;

    pub fn new(table: [[f64; 2]; 2]) -> Result<Self> {
        let flat = table.iter().flatten();
        if flat.clone().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "per-vehicle table has a negative or non-finite entry: {table:?}"
            )));
        }
        let total: f64 = flat.sum();
        if (total - 1.0).abs() > Self::MASS_TOL {
            return Err(Error::InvalidGeometry(format!("per-vehicle table sums to {total}")));
        }
        let j = Self { table };
        if (j.state_erasure() - j.estimate_erasure()).abs() > Self::MARGINAL_TOL {
            return Err(Error::InvalidGeometry(
                "per-vehicle state and estimate marginals differ".into(),
            ));
        }
        Ok(j)
    }

    /// Always-connected vehicle with a perfect estimate.
    pub fn never_erased() -> Self {
        Self {
            table: [[0.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Always-blocked vehicle.
    pub fn always_erased() -> Self {
        Self {
            table: [[1.0, 0.0], [0.0, 0.0]],
        }
    }

    /// Estimate independent of the state, both with erasure probability `eps`.
    pub fn independent(eps: f64) -> Self {
        let on = 1.0 - eps;
        Self {
            table: [[eps * eps, eps * on], [on * eps, on * on]],
        }
    }

    pub fn p(&self, s: usize, shat: usize) -> f64 {
        self.table[s][shat]
    }

    /// `P(S = 0)`.
    pub fn state_erasure(&self) -> f64 {
        self.table[0][0] + self.table[0][1]
    }

    /// `P(Ŝ = 0)`.
    pub fn estimate_erasure(&self) -> f64 {
        self.table[0][0] + self.table[1][0]
    }

    /// `P(S = 0 | Ŝ = shat)`, or `None` when `Ŝ = shat` has no mass.
    pub fn erasure_given_estimate(&self, shat: usize) -> Option<f64> {
        let col = self.table[0][shat] + self.table[1][shat];
        (col > 0.0).then(|| self.table[0][shat] / col)
    }
}

/// Per-vehicle joint of the LoS-ball toy model.
///
/// With `q = exp(-lambda A)` and crescent area `A_k`,
/// `P(S=0 | Ŝ=0) = exp(-lambda A_k)` and
/// `P(S=0 | Ŝ=1) = q (1 - exp(-lambda A_k)) / (1 - q)`.
/// When `q` is 0 or 1 the second ratio is 0/0; the limit is the independent
/// point mass.
pub fn per_vehicle_joint(geom: &Geometry, profile: &VehicleProfile) -> Result<PerVehicleJoint> {
    geom.validate()?;
    let profile = VehicleProfile::new(profile.v)?;
    let q = geom.erasure_probability();
    if q <= 0.0 || q >= 1.0 {
        return Ok(PerVehicleJoint::independent(q.clamp(0.0, 1.0)));
    }
    let ak = lens_displaced_area(geom.displacement(profile.v), geom.rb)?;
    let stay_blocked = (-geom.lambda * ak).exp();
    // q (1 - exp(-lambda A_k)), the mass of both off-diagonal cells.
    let cross = q * -(-geom.lambda * ak).exp_m1();
    let both_on = 1.0 - q - cross;
    Ok(PerVehicleJoint {
        table: [[q * stay_blocked, cross], [cross, both_on.max(0.0)]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fig3(v: f64) -> PerVehicleJoint {
        let g = Geometry::new(4.0, 0.2, 10.0).unwrap();
        per_vehicle_joint(&g, &VehicleProfile::new(v).unwrap()).unwrap()
    }

    #[test]
    fn lens_identical_circles_is_empty() {
        assert_eq!(lens_displaced_area(0.0, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn lens_saturates_beyond_diameter() {
        let full = PI * 0.04;
        assert_abs_diff_eq!(lens_displaced_area(0.4, 0.2).unwrap(), full, epsilon = 1e-15);
        assert_abs_diff_eq!(lens_displaced_area(7.0, 0.2).unwrap(), full, epsilon = 1e-15);
        assert_abs_diff_eq!(full, 0.125664, epsilon = 5e-7);
    }

    #[test]
    fn lens_rejects_bad_radius() {
        assert!(matches!(lens_displaced_area(0.1, 0.0), Err(Error::InvalidGeometry(_))));
        assert!(lens_displaced_area(0.1, -1.0).is_err());
        assert!(lens_displaced_area(-0.1, 0.2).is_err());
    }

    #[test]
    fn lens_is_nondecreasing_on_grid() {
        let rb = 0.2;
        let mut prev = 0.0;
        for i in 0..=1000 {
            let d = 2.0 * rb * i as f64 / 1000.0;
            let a = lens_displaced_area(d, rb).unwrap();
            assert!(a + 1e-15 >= prev, "d = {d}: {a} < {prev}");
            prev = a;
        }
        assert_eq!(lens_displaced_area(0.5, rb).unwrap(), prev);
    }

    #[test]
    fn conditionals_at_sixty_kmh() {
        let j = fig3(60.0);
        assert_abs_diff_eq!(j.erasure_given_estimate(0).unwrap(), 0.772026, epsilon = 1e-6);
        // q (1 - exp(-lambda A_k)) / (1 - q) evaluated independently.
        assert_abs_diff_eq!(j.erasure_given_estimate(1).unwrap(), 0.349061, epsilon = 1e-6);
        assert_abs_diff_eq!(j.p(0, 0), 0.4670164, epsilon = 1e-7);
    }

    #[test]
    fn conditionals_match_closed_form_ratio() {
        let g = Geometry::new(4.0, 0.2, 10.0).unwrap();
        let j = fig3(60.0);
        let q = g.erasure_probability();
        let ak = lens_displaced_area(g.displacement(60.0), g.rb).unwrap();
        let e = (-g.lambda * ak).exp();
        let expected = q * (1.0 - e) / (1.0 - q);
        assert_abs_diff_eq!(j.erasure_given_estimate(1).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn marginals_are_identical() {
        for v in [0.0, 30.0, 60.0, 100.0, 143.0, 200.0] {
            let j = fig3(v);
            assert_abs_diff_eq!(j.state_erasure(), j.estimate_erasure(), epsilon = 1e-15);
            assert_abs_diff_eq!(j.state_erasure(), (-4.0 * PI * 0.04).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn high_speed_decouples_estimate() {
        let g = Geometry::new(4.0, 0.2, 10.0).unwrap();
        assert_abs_diff_eq!(g.decorrelation_velocity(), 144.0, epsilon = 1e-12);
        let j = fig3(144.0);
        let eps = g.erasure_probability();
        let ind = PerVehicleJoint::independent(eps);
        for s in 0..2 {
            for t in 0..2 {
                assert_abs_diff_eq!(j.p(s, t), ind.p(s, t), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_density_gives_point_mass() {
        let g = Geometry::new(0.0, 0.2, 10.0).unwrap();
        let j = per_vehicle_joint(&g, &VehicleProfile { v: 60.0 }).unwrap();
        assert_eq!(j, PerVehicleJoint::always_erased());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(Geometry::new(-1.0, 0.2, 10.0).is_err());
        assert!(Geometry::new(1.0, 0.0, 10.0).is_err());
        assert!(Geometry::new(1.0, 0.2, 0.0).is_err());
        assert!(VehicleProfile::new(-3.0).is_err());
        assert!(PerVehicleJoint::new([[0.5, 0.1], [0.0, 0.4]]).is_err());
    }
}
