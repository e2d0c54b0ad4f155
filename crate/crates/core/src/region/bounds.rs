//! Exact two-receiver region from the family of weighted-sum bounds
//! `R_a + mu R_b <= 1ᵀ max{p_{s≠00}, mu p_{s_b=1}}`, `mu >= 1`.

use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::polygon::{HalfPlane, RegionPolygon};
use crate::error::{Error, Result};
use crate::state::{EventVector, JointStateTable};

/// Weight in a bound family; `Infinite` stands for the single-user limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mu {
    Finite(f64),
    Infinite,
}

impl Mu {
    pub fn value(&self) -> f64 {
        match self {
            Mu::Finite(m) => *m,
            Mu::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Mu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mu::Finite(m) => write!(f, "{m}"),
            Mu::Infinite => write!(f, "inf"),
        }
    }
}

/// Which receiver carries the weight `mu`. `Protected(2)` is the family
/// `R1 + mu R2 <= ...`, `Protected(1)` is `R2 + mu R1 <= ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Protected(pub usize);

impl Protected {
    fn other(&self) -> usize {
        3 - self.0
    }
}

/// Witness for a symmetric-rate value: the binding weight, family and bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuCertificate {
    pub mu: Mu,
    pub family: Protected,
    /// `1ᵀ max{p_{s≠00}, mu p_E}`, or `P(S_b = 1)` at the limit.
    pub bound: f64,
}

impl Serialize for MuCertificate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("MuCertificate", 3)?;
        match self.mu {
            Mu::Finite(m) => st.serialize_field("mu", &m)?,
            Mu::Infinite => st.serialize_field("mu", "inf")?,
        }
        let family = match self.family.0 {
            2 => "R1+mu*R2",
            _ => "R2+mu*R1",
        };
        st.serialize_field("family", family)?;
        st.serialize_field("bound", &self.bound)?;
        st.end()
    }
}

fn require_two(joint: &JointStateTable) -> Result<()> {
    match joint.num_receivers() {
        2 => Ok(()),
        k => Err(Error::NotTwoReceivers(k)),
    }
}

/// `1ᵀ max{p_{s≠00}, mu p_{s_protected = 1}}`.
pub fn weighted_bound(joint: &JointStateTable, mu: f64, protected: usize) -> f64 {
    joint
        .p_any_received()
        .max_weighted_total(&joint.p_received_by(protected), mu)
}

/// Weights at which some component of the max switches sides, plus `mu = 1`.
fn breakpoints(any: &EventVector, event: &EventVector) -> Vec<f64> {
    let mut mus = vec![1.0];
    for (a, b) in any.values.iter().zip(&event.values) {
        if *b > 0.0 {
            let m = a / b;
            if m >= 1.0 && m.is_finite() {
                mus.push(m);
            }
        }
    }
    mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mus.dedup();
    mus
}

/// Every constraint needed to describe the region exactly: the two families
/// at `mu = 1` and at their breakpoints, plus the single-user limits.
pub fn binding_constraints(joint: &JointStateTable) -> Result<Vec<(MuCertificate, HalfPlane)>> {
    require_two(joint)?;
    let any = joint.p_any_received();
    let mut out = Vec::new();
    for protected in [Protected(2), Protected(1)] {
        let event = joint.p_received_by(protected.0);
        for mu in breakpoints(&any, &event) {
            let bound = any.max_weighted_total(&event, mu);
            out.push((
                MuCertificate {
                    mu: Mu::Finite(mu),
                    family: protected,
                    bound,
                },
                weighted_half_plane(protected, mu, bound),
            ));
        }
        let limit = event.total();
        let (a1, a2) = if protected.0 == 1 { (1.0, 0.0) } else { (0.0, 1.0) };
        out.push((
            MuCertificate {
                mu: Mu::Infinite,
                family: protected,
                bound: limit,
            },
            HalfPlane::new(a1, a2, limit),
        ));
    }
    Ok(out)
}

fn weighted_half_plane(protected: Protected, mu: f64, bound: f64) -> HalfPlane {
    // Weight 1 on the other receiver, mu on the protected one.
    let mut a = [0.0; 2];
    a[protected.other() - 1] = 1.0;
    a[protected.0 - 1] = mu;
    HalfPlane::new(a[0], a[1], bound)
}

/// The region `{(R1, R2) : both families hold for every mu >= 1}`.
pub fn region_polygon(joint: &JointStateTable) -> Result<RegionPolygon> {
    require_two(joint)?;
    if joint.p_any_received().total() <= 0.0 {
        return Err(Error::DegenerateJoint);
    }
    let planes: Vec<HalfPlane> = binding_constraints(joint)?.into_iter().map(|(_, h)| h).collect();
    Ok(RegionPolygon::from_half_planes(&planes))
}

/// Symmetric rate `min_mu 1ᵀ max{p_{s≠00}, mu p_E} / (1 + mu)`.
///
/// The ratio is monotone between consecutive breakpoints, so the minimum is
/// attained at `mu = 1`, a breakpoint, or the `mu -> inf` limit. Both
/// families are scanned, which makes the value `max{r : (r, r) in region}`
/// for asymmetric joints as well.
pub fn sym_rate_direct(joint: &JointStateTable) -> Result<(f64, MuCertificate)> {
    let mut best: Option<(f64, MuCertificate)> = None;
    for (cert, _) in binding_constraints(joint)? {
        let rate = match cert.mu {
            Mu::Finite(m) => cert.bound / (1.0 + m),
            Mu::Infinite => cert.bound,
        };
        if best.is_none_or(|(r, _)| rate < r) {
            best = Some((rate, cert));
        }
    }
    Ok(best.expect("constraint set is never empty"))
}

/// Reference regions: delayed feedback only, and orthogonal time sharing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRegions {
    pub feedback_only: RegionPolygon,
    pub tdma: RegionPolygon,
}

pub fn baseline_regions(joint: &JointStateTable) -> Result<BaselineRegions> {
    require_two(joint)?;
    let feedback_only = region_polygon(&joint.feedback_only())?;
    let c1 = joint.connection_probability(1);
    let c2 = joint.connection_probability(2);
    let tdma = RegionPolygon::from_vertices(vec![(c1, 0.0), (0.0, c2), (0.0, 0.0)]);
    Ok(BaselineRegions { feedback_only, tdma })
}

/// Symmetric point of the TDMA region, `1 / (1/(1-eps1) + 1/(1-eps2))`.
pub fn tdma_symmetric_rate(joint: &JointStateTable) -> Result<f64> {
    require_two(joint)?;
    let c1 = joint.connection_probability(1);
    let c2 = joint.connection_probability(2);
    if c1 <= 0.0 || c2 <= 0.0 {
        return Ok(0.0);
    }
    Ok(c1 * c2 / (c1 + c2))
}
