use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::PerVehicleJoint;
use crate::error::{Error, Result};

/// Default upper bound on the receiver count.
pub const DEFAULT_K_MAX: usize = 4;

/// Index of a global state in `{0,1}^K`. Receiver 1 is the most significant
/// bit, so `0b01` at K = 2 means receiver 1 erased and receiver 2 connected.
pub type StateIndex = usize;

/// Bit of receiver `k` (1-based) in `state`.
#[inline]
pub fn bit(state: StateIndex, k: usize, num_receivers: usize) -> usize {
    (state >> (num_receivers - k)) & 1
}

/// Renders a state as a bitstring, receiver 1 first.
pub fn state_string(state: StateIndex, num_receivers: usize) -> String {
    (1..=num_receivers)
        .map(|k| if bit(state, k, num_receivers) == 1 { '1' } else { '0' })
        .collect()
}

/// Problems found while checking a candidate joint table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    WrongLength {
        expected: usize,
        found: usize,
    },
    NegativeMass {
        s: String,
        shat: String,
        p: f64,
    },
    SumMismatch {
        sum: f64,
    },
    MarginalMismatch {
        state: String,
        s_marginal: f64,
        shat_marginal: f64,
    },
}

impl Diagnostic {
    /// Whether this diagnostic is only a warning under the override flag.
    pub fn is_marginal_mismatch(&self) -> bool {
        matches!(self, Diagnostic::MarginalMismatch { .. })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::WrongLength { expected, found } => {
                write!(f, "table has {found} entries, expected {expected}")
            }
            Diagnostic::NegativeMass { s, shat, p } => {
                write!(f, "negative or non-finite mass {p} at (s={s}, shat={shat})")
            }
            Diagnostic::SumMismatch { sum } => write!(f, "probabilities sum to {sum}"),
            Diagnostic::MarginalMismatch {
                state,
                s_marginal,
                shat_marginal,
            } => write!(
                f,
                "marginal mismatch at {state}: P(S)={s_marginal}, P(Shat)={shat_marginal}"
            ),
        }
    }
}

/// Joint law `P(S = s, Ŝ = shat)` over `{0,1}^K × {0,1}^K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStateTable {
    k: usize,
    /// Row-major, `probs[s * 2^K + shat]`.
    probs: Vec<f64>,
}

impl JointStateTable {
    pub const SUM_TOL: f64 = 1e-9;
    pub const MARGINAL_TOL: f64 = 1e-6;

    /// Builds a table, rejecting any diagnostic.
    pub fn new(k: usize, probs: Vec<f64>) -> Result<Self> {
        let (table, _) = Self::with_override(k, probs, false)?;
        Ok(table)
    }

    /// Builds a table; with `allow_marginal_mismatch` a marginal mismatch is
    /// returned as a warning instead of an error.
    pub fn with_override(k: usize, probs: Vec<f64>, allow_marginal_mismatch: bool) -> Result<(Self, Vec<Diagnostic>)> {
        if k == 0 || k > 16 {
            return Err(Error::SizeLimit { k, min: 1, max: 16 });
        }
        let diags = validate_probs(k, &probs);
        let fatal = diags
            .iter()
            .any(|d| !(allow_marginal_mismatch && d.is_marginal_mismatch()));
        if fatal {
            return Err(Error::Validation(diags));
        }
        Ok((Self { k, probs }, diags))
    }

    pub fn num_receivers(&self) -> usize {
        self.k
    }

    pub fn num_states(&self) -> usize {
        1 << self.k
    }

    pub fn p(&self, s: StateIndex, shat: StateIndex) -> f64 {
        self.probs[s * self.num_states() + shat]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(S = s)` for every `s`.
    pub fn state_marginal(&self) -> Vec<f64> {
        let n = self.num_states();
        (0..n).map(|s| (0..n).map(|t| self.p(s, t)).sum()).collect()
    }

    /// `P(Ŝ = shat)` for every `shat`.
    pub fn estimate_marginal(&self) -> Vec<f64> {
        let n = self.num_states();
        (0..n).map(|t| (0..n).map(|s| self.p(s, t)).sum()).collect()
    }

    /// `p_E[shat] = sum_{s in E} P(s, shat)`.
    pub fn event_vector(&self, event: impl Fn(StateIndex) -> bool) -> EventVector {
        let n = self.num_states();
        let mut values = vec![0.0; n];
        for s in (0..n).filter(|&s| event(s)) {
            for (t, v) in values.iter_mut().enumerate() {
                *v += self.p(s, t);
            }
        }
        EventVector { values }
    }

    /// Event vector of an explicit state set.
    pub fn event_vector_of(&self, states: &[StateIndex]) -> EventVector {
        self.event_vector(|s| states.contains(&s))
    }

    /// `p_{s != 0...0}`: somebody receives.
    pub fn p_any_received(&self) -> EventVector {
        self.event_vector(|s| s != 0)
    }

    /// `p_{s_k = 1}`: receiver `k` (1-based) receives.
    pub fn p_received_by(&self, k: usize) -> EventVector {
        let n = self.k;
        self.event_vector(|s| bit(s, k, n) == 1)
    }

    /// `P(S_k = 1)`.
    pub fn connection_probability(&self, k: usize) -> f64 {
        self.p_received_by(k).total()
    }

    /// Marginal 2×2 joint of receiver `k` (1-based).
    pub fn receiver_marginal(&self, k: usize) -> PerVehicleJoint {
        let n = self.num_states();
        let mut table = [[0.0; 2]; 2];
        for s in 0..n {
            for t in 0..n {
                table[bit(s, k, self.k)][bit(t, k, self.k)] += self.p(s, t);
            }
        }
        PerVehicleJoint { table }
    }

    /// True when swapping receivers 1 and 2 leaves a K = 2 table unchanged.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.k != 2 {
            return false;
        }
        let swap = |x: usize| ((x & 1) << 1) | (x >> 1);
        (0..4).all(|s| (0..4).all(|t| (self.p(s, t) - self.p(swap(s), swap(t))).abs() <= tol))
    }

    /// Independence-decoupled version: same state law, estimate drawn
    /// independently from its own marginal, `P(s) P(shat)`.
    pub fn feedback_only(&self) -> JointStateTable {
        let states = self.state_marginal();
        let estimates = self.estimate_marginal();
        let probs = states
            .iter()
            .flat_map(|ps| estimates.iter().map(move |pe| ps * pe))
            .collect();
        JointStateTable { k: self.k, probs }
    }
}

/// Checks a raw table against the joint-table invariants.
pub fn validate_probs(k: usize, probs: &[f64]) -> Vec<Diagnostic> {
    let n = 1usize << k;
    let mut diags = Vec::new();
    if probs.len() != n * n {
        diags.push(Diagnostic::WrongLength {
            expected: n * n,
            found: probs.len(),
        });
        return diags;
    }
    for (i, &p) in probs.iter().enumerate() {
        if !(p.is_finite() && p >= 0.0) {
            diags.push(Diagnostic::NegativeMass {
                s: state_string(i / n, k),
                shat: state_string(i % n, k),
                p,
            });
        }
    }
    let sum: f64 = probs.iter().sum();
    if !((sum - 1.0).abs() <= JointStateTable::SUM_TOL) {
        diags.push(Diagnostic::SumMismatch { sum });
    }
    for x in 0..n {
        let s_marg: f64 = (0..n).map(|t| probs[x * n + t]).sum();
        let shat_marg: f64 = (0..n).map(|s| probs[s * n + x]).sum();
        if !((s_marg - shat_marg).abs() <= JointStateTable::MARGINAL_TOL) {
            diags.push(Diagnostic::MarginalMismatch {
                state: state_string(x, k),
                s_marginal: s_marg,
                shat_marginal: shat_marg,
            });
        }
    }
    diags
}

/// Diagnostics of an existing table (always empty for tables built through
/// the strict constructor).
pub fn validate(joint: &JointStateTable) -> Vec<Diagnostic> {
    validate_probs(joint.k, &joint.probs)
}

/// Product of independent per-vehicle joints, vehicle 1 first.
pub fn product_joint(per_vehicle: &[PerVehicleJoint]) -> Result<JointStateTable> {
    product_joint_with_limit(per_vehicle, DEFAULT_K_MAX)
}

pub fn product_joint_with_limit(per_vehicle: &[PerVehicleJoint], k_max: usize) -> Result<JointStateTable> {
    let k = per_vehicle.len();
    if k < 2 || k > k_max {
        return Err(Error::SizeLimit { k, min: 2, max: k_max });
    }
    let joint = product_joint_unchecked(per_vehicle);
    let diags = validate(&joint);
    if !diags.is_empty() {
        return Err(Error::Validation(diags));
    }
    Ok(joint)
}

fn product_joint_unchecked(per_vehicle: &[PerVehicleJoint]) -> JointStateTable {
    let k = per_vehicle.len();
    let n = 1usize << k;
    let mut probs = vec![0.0; n * n];
    for s in 0..n {
        for t in 0..n {
            probs[s * n + t] = per_vehicle
                .iter()
                .enumerate()
                .map(|(i, j)| j.p(bit(s, i + 1, k), bit(t, i + 1, k)))
                .product();
        }
    }
    JointStateTable { k, probs }
}

/// Per-estimate probability vector of a state event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventVector {
    pub values: Vec<f64>,
}

impl EventVector {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `1ᵀ p_E`, the probability of the event.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(p, w)| p * w).sum()
    }

    /// `1ᵀ max{self, mu * other}` with the max taken componentwise.
    pub fn max_weighted_total(&self, other: &EventVector, mu: f64) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.max(mu * b)).sum()
    }
}
