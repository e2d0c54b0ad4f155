//! Two-receiver scheduling parametrisation: per-estimate probabilities of
//! sending a private packet to receiver 1, to receiver 2, or their mixture.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::JointStateTable;

/// Feasibility tolerance for the side-information constraints.
pub const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaTriple {
    pub private1: [f64; 4],
    pub private2: [f64; 4],
    pub mix: [f64; 4],
}

impl AlphaTriple {
    pub fn zeros() -> Self {
        Self {
            private1: [0.0; 4],
            private2: [0.0; 4],
            mix: [0.0; 4],
        }
    }

    pub fn new(private1: [f64; 4], private2: [f64; 4], mix: [f64; 4]) -> Result<Self> {
        let a = Self {
            private1,
            private2,
            mix,
        };
        a.validate(1e-12)?;
        Ok(a)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        for i in 0..4 {
            let parts = [self.private1[i], self.private2[i], self.mix[i]];
            if parts.iter().any(|x| !(x.is_finite() && *x >= -tol && *x <= 1.0 + tol)) {
                return Err(Error::InvalidPolicy(format!("entry outside [0,1] at estimate {i}")));
            }
            if parts.iter().sum::<f64>() > 1.0 + tol {
                return Err(Error::InvalidPolicy(format!("mass exceeds 1 at estimate {i}")));
            }
        }
        Ok(())
    }

    /// Probability of the common (retransmission) phase per estimate.
    pub fn common(&self) -> [f64; 4] {
        std::array::from_fn(|i| (1.0 - self.private1[i] - self.private2[i] - self.mix[i]).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaPair {
    pub beta1: [f64; 4],
    pub beta2: [f64; 4],
}

impl BetaPair {
    pub fn new(beta1: [f64; 4], beta2: [f64; 4]) -> Result<Self> {
        if beta1.iter().chain(&beta2).any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidPolicy("beta entries must lie in [0,1]".into()));
        }
        Ok(Self { beta1, beta2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop3Point {
    pub feasible: bool,
    pub r1: f64,
    pub r2: f64,
    /// Left minus right side of the receiver-1 side-information constraint.
    pub excess1: f64,
    /// Same for receiver 2.
    pub excess2: f64,
}

fn dot(a: &[f64; 4], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| a[i] + b[i])
}

/// Rates of the triple and whether the common phase has room for the side
/// information it generates.
pub fn prop3_rates(joint: &JointStateTable, alpha: &AlphaTriple) -> Result<Prop3Point> {
    if joint.num_receivers() != 2 {
        return Err(Error::NotTwoReceivers(joint.num_receivers()));
    }
    alpha.validate(1e-9)?;
    let any = joint.p_any_received();
    let rx1 = joint.p_received_by(1);
    let rx2 = joint.p_received_by(2);
    let to1 = add(&alpha.private1, &alpha.mix);
    let to2 = add(&alpha.private2, &alpha.mix);
    let r1 = dot(&to1, &any.values);
    let r2 = dot(&to2, &any.values);
    let excess1 = dot(&to2, &rx1.values) + r1 - rx1.total();
    let excess2 = dot(&to1, &rx2.values) + r2 - rx2.total();
    Ok(Prop3Point {
        feasible: excess1 <= FEASIBILITY_TOL && excess2 <= FEASIBILITY_TOL,
        r1,
        r2,
        excess1,
        excess2,
    })
}

/// Splits a pair of outer-bound weights into private and mixed parts:
/// the common part of `beta1` and `beta2` is mixed, the remainder is sent
/// privately.
pub fn beta_to_alpha(beta: &BetaPair) -> AlphaTriple {
    let mut a = AlphaTriple::zeros();
    for i in 0..4 {
        let (b1, b2) = (beta.beta1[i], beta.beta2[i]);
        a.mix[i] = b1.min(b2);
        a.private1[i] = (b1 - b2).max(0.0);
        a.private2[i] = (b2 - b1).max(0.0);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{toy_model_joint, Geometry};
    use proptest::prelude::*;

    fn fig3() -> JointStateTable {
        toy_model_joint(&Geometry::new(4.0, 0.2, 10.0).unwrap(), &[60.0, 60.0]).unwrap()
    }

    #[test]
    fn zero_policy() {
        let p = prop3_rates(&fig3(), &AlphaTriple::zeros()).unwrap();
        assert!(p.feasible);
        assert_eq!((p.r1, p.r2), (0.0, 0.0));
    }

    #[test]
    fn always_private_one_is_infeasible() {
        let a = AlphaTriple::new([1.0; 4], [0.0; 4], [0.0; 4]).unwrap();
        let p = prop3_rates(&fig3(), &a).unwrap();
        assert!(!p.feasible);
        assert!((p.r1 - 0.634069).abs() < 1e-6);
    }

    #[test]
    fn beta_examples() {
        let b = BetaPair::new([0.3; 4], [0.3; 4]).unwrap();
        let a = beta_to_alpha(&b);
        assert_eq!(a.private1, [0.0; 4]);
        assert_eq!(a.private2, [0.0; 4]);
        assert_eq!(a.mix, [0.3; 4]);

        let b = BetaPair::new([1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]).unwrap();
        let a = beta_to_alpha(&b);
        assert_eq!(a.private1, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(a.private2, [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(a.mix, [0.0; 4]);
    }

    #[test]
    fn invalid_triples() {
        assert!(AlphaTriple::new([0.6; 4], [0.6; 4], [0.0; 4]).is_err());
        assert!(AlphaTriple::new([-0.1; 4], [0.0; 4], [0.0; 4]).is_err());
        assert!(BetaPair::new([1.1; 4], [0.0; 4]).is_err());
    }

    proptest! {
        #[test]
        fn beta_to_alpha_is_valid(b1 in prop::array::uniform4(0.0..=1.0f64),
                                  b2 in prop::array::uniform4(0.0..=1.0f64)) {
            let a = beta_to_alpha(&BetaPair { beta1: b1, beta2: b2 });
            prop_assert!(a.validate(0.0).is_ok());
            for i in 0..4 {
                let total = a.private1[i] + a.private2[i] + a.mix[i];
                prop_assert!((total - b1[i].max(b2[i])).abs() <= 1e-15);
                prop_assert!((a.private1[i] + a.mix[i] - b1[i]).abs() <= 1e-15);
            }
        }
    }
}
