//! The bilinear constraint system over scheduling weights `alpha` and
//! downgrading weights `beta`.

use std::collections::HashMap;

use super::sets::{jc_set, overhearing_set, sc_set, Action, ActionSet, Subset};
use crate::error::{Error, Result};
use crate::state::{bit, state_string, JointStateTable, StateIndex};

/// `alpha[action][shat]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPolicy {
    pub values: Vec<Vec<f64>>,
}

impl AlphaPolicy {
    pub fn zeros(actions: usize, states: usize) -> Self {
        Self {
            values: vec![vec![0.0; states]; actions],
        }
    }

    /// All mass on one action for every estimate.
    pub fn pure(actions: usize, states: usize, action: usize) -> Self {
        let mut a = Self::zeros(actions, states);
        a.values[action].iter_mut().for_each(|x| *x = 1.0);
        a
    }

    /// Nonnegative, and sums to one per estimate within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let states = self.values.first().map_or(0, |v| v.len());
        for shat in 0..states {
            let mut total = 0.0;
            for row in &self.values {
                if !(row[shat] >= -tol) {
                    return Err(Error::InvalidPolicy(format!("negative alpha at estimate {shat}")));
                }
                total += row[shat];
            }
            if (total - 1.0).abs() > tol {
                return Err(Error::InvalidPolicy(format!(
                    "alpha sums to {total} at estimate {shat}"
                )));
            }
        }
        Ok(())
    }
}

/// Identifies `beta_{U, layer}^s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BetaKey {
    pub u: Subset,
    pub layer: Subset,
    pub state: StateIndex,
}

/// Weights for one `(U, s)`: either summing to one over `J_c(U, J)`, or a
/// single free weight in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaGroup {
    pub u: Subset,
    pub overhearers: Subset,
    pub state: StateIndex,
    pub vars: Vec<usize>,
    pub free: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaLayout {
    pub keys: Vec<BetaKey>,
    pub groups: Vec<BetaGroup>,
    index: HashMap<BetaKey, usize>,
}

impl BetaLayout {
    /// With `free_top_layer`, the weight of `U` with `|U| = K - 1` into the
    /// full set is left free in `[0, 1]` instead of being pinned by the
    /// sum-to-one rule.
    pub fn new(num_receivers: usize, free_top_layer: bool) -> Self {
        let full = Subset::full(num_receivers);
        let mut keys = Vec::new();
        let mut groups = Vec::new();
        for u in Subset::all_nonempty(num_receivers) {
            if u == full {
                continue;
            }
            for state in 0..1usize << num_receivers {
                let Some(j) = overhearing_set(u, state, num_receivers) else {
                    continue;
                };
                let free = free_top_layer && j == full && u.len() + 1 == j.len();
                let layers = if free { vec![j] } else { jc_set(u, j) };
                let vars = layers
                    .into_iter()
                    .map(|layer| {
                        keys.push(BetaKey { u, layer, state });
                        keys.len() - 1
                    })
                    .collect();
                groups.push(BetaGroup {
                    u,
                    overhearers: j,
                    state,
                    vars,
                    free,
                });
            }
        }
        let index = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        Self { keys, groups, index }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: &BetaKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// All side information kept at the overhearing set itself.
    pub fn top_layer(&self) -> BetaPolicy {
        let mut values = vec![0.0; self.len()];
        for g in &self.groups {
            for &v in &g.vars {
                if self.keys[v].layer == g.overhearers {
                    values[v] = 1.0;
                }
            }
        }
        BetaPolicy { values }
    }

    /// Equal weight over each `J_c` family; free weights at one.
    pub fn uniform(&self) -> BetaPolicy {
        let mut values = vec![0.0; self.len()];
        for g in &self.groups {
            let w = if g.free { 1.0 } else { 1.0 / g.vars.len() as f64 };
            for &v in &g.vars {
                values[v] = w;
            }
        }
        BetaPolicy { values }
    }

    pub fn validate(&self, beta: &BetaPolicy, tol: f64) -> Result<()> {
        if beta.values.len() != self.len() {
            return Err(Error::InvalidPolicy("beta has the wrong length".into()));
        }
        if beta.values.iter().any(|b| !(*b >= -tol && *b <= 1.0 + tol)) {
            return Err(Error::InvalidPolicy("beta outside [0,1]".into()));
        }
        for g in self.groups.iter().filter(|g| !g.free) {
            let total: f64 = g.vars.iter().map(|&v| beta.values[v]).sum();
            if (total - 1.0).abs() > tol {
                return Err(Error::InvalidPolicy(format!(
                    "beta family for U={} s={} sums to {total}",
                    g.u, g.state
                )));
            }
        }
        Ok(())
    }

    pub fn key_string(&self, var: usize, num_receivers: usize) -> String {
        let k = &self.keys[var];
        format!("{}|{}|{}", k.u, k.layer, state_string(k.state, num_receivers))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaPolicy {
    pub values: Vec<f64>,
}

/// One bilinear term `sign * alpha_action^T p_state * beta` (beta omitted
/// means weight one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub action: usize,
    pub state: StateIndex,
    pub sign: f64,
    pub beta: Option<usize>,
}

/// The constraint system for one joint law.
#[derive(Debug, Clone)]
pub struct Program {
    pub num_receivers: usize,
    pub actions: ActionSet,
    pub beta: BetaLayout,
    /// `(k, J)` with `k in J`, `|J| >= 2`.
    pub residual_keys: Vec<(usize, Subset)>,
    pub(crate) terms: Vec<Vec<Term>>,
    /// Per receiver, `(action, state)` pairs whose mass counts toward its rate.
    pub(crate) rate_terms: Vec<Vec<(usize, StateIndex)>>,
    probs: Vec<f64>,
    num_states: usize,
}

impl Program {
    pub fn new(joint: &JointStateTable, free_top_layer: bool) -> Result<Self> {
        Self::build(joint, free_top_layer, false)
    }

    /// With `literal_forwarding`, the credit for a group signal passed to a
    /// higher layer also counts states where receiver `k` already heard it.
    pub fn build(joint: &JointStateTable, free_top_layer: bool, literal_forwarding: bool) -> Result<Self> {
        let kk = joint.num_receivers();
        let n = joint.num_states();
        let actions = ActionSet::new(kk);
        let beta = BetaLayout::new(kk, free_top_layer);
        let full = Subset::full(kk);
        let all = Subset::all_nonempty(kk);
        let group = |u: Subset| actions.index_of(Action::Group(u)).expect("group action");

        let on = |s: StateIndex, k: usize| bit(s, k, kk) == 1;
        // States with nobody outside {k, j} connected and one of k, j connected.
        let pair_states = |k: usize, j: usize| -> Vec<StateIndex> {
            (0..n)
                .filter(|&s| (1..=kk).all(|i| i == k || i == j || !on(s, i)) && (on(s, k) || on(s, j)))
                .collect()
        };

        let mut rate_terms = vec![Vec::new(); kk];
        for k in 1..=kk {
            let a = group(Subset::singleton(k));
            rate_terms[k - 1].extend((1..n).map(|s| (a, s)));
            for j in (1..=kk).filter(|&j| j != k) {
                let a = actions.index_of(Action::mix(k, j)).expect("mix action");
                rate_terms[k - 1].extend(pair_states(k, j).into_iter().map(|s| (a, s)));
            }
        }

        let beta_term = |u: Subset, layer: Subset, l: Subset, sign: f64, out: &mut Vec<Term>| -> Result<()> {
            for s in sc_set(u, l, kk)? {
                if let Some(b) = beta.get(&BetaKey { u, layer, state: s }) {
                    out.push(Term {
                        action: group(u),
                        state: s,
                        sign,
                        beta: Some(b),
                    });
                }
            }
            Ok(())
        };
        // L ⊇ J with |L| - |J| in {0, 1}.
        let near_supersets = |j: Subset| -> Vec<Subset> {
            all.iter()
                .copied()
                .filter(|l| j.is_subset_of(*l) && l.is_subset_of(full) && l.len() - j.len() <= 1)
                .collect()
        };

        let mut residual_keys = Vec::new();
        let mut terms = Vec::new();
        for &j in all.iter().filter(|j| j.len() >= 2) {
            for k in j.members() {
                let mut t = Vec::new();
                // Private side information generated for layer J.
                let uk = Subset::singleton(k);
                for l in near_supersets(j) {
                    beta_term(uk, j, l, 1.0, &mut t)?;
                }
                // Common side information from groups I containing k.
                for &i in all
                    .iter()
                    .filter(|i| i.len() >= 2 && i.contains(k) && i.is_strict_subset_of(j))
                {
                    for l in near_supersets(j) {
                        beta_term(i, j, l, 1.0, &mut t)?;
                    }
                }
                // Channel uses of J's own signal at receiver k.
                let aj = group(j);
                t.extend((0..n).filter(|&s| on(s, k)).map(|s| Term {
                    action: aj,
                    state: s,
                    sign: -1.0,
                    beta: None,
                }));
                // J's signal forwarded to higher layers, credited only where
                // receiver k missed it.
                for &l in all.iter().filter(|l| j.is_strict_subset_of(**l)) {
                    for u in near_supersets(l) {
                        let start = t.len();
                        beta_term(j, l, u, -1.0, &mut t)?;
                        if !literal_forwarding {
                            let kept: Vec<Term> = t.drain(start..).filter(|x| !on(x.state, k)).collect();
                            t.extend(kept);
                        }
                    }
                }
                // Mixture side information lands on the pair layer.
                if j.len() == 2 {
                    let other = j.members().find(|&x| x != k).expect("pair");
                    let a = actions.index_of(Action::mix(k, other)).expect("mix action");
                    t.extend(pair_states(k, other).into_iter().map(|s| Term {
                        action: a,
                        state: s,
                        sign: 1.0,
                        beta: None,
                    }));
                }
                residual_keys.push((k, j));
                terms.push(t);
            }
        }

        Ok(Self {
            num_receivers: kk,
            actions,
            beta,
            residual_keys,
            terms,
            rate_terms,
            probs: joint.probs().to_vec(),
            num_states: n,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub(crate) fn p(&self, s: StateIndex, shat: StateIndex) -> f64 {
        self.probs[s * self.num_states + shat]
    }

    /// `alpha_q^T p_s`.
    pub(crate) fn alpha_mass(&self, alpha: &AlphaPolicy, action: usize, s: StateIndex) -> f64 {
        alpha.values[action]
            .iter()
            .enumerate()
            .map(|(shat, a)| a * self.p(s, shat))
            .sum()
    }

    pub fn rate_of(&self, alpha: &AlphaPolicy) -> Vec<f64> {
        self.rate_terms
            .iter()
            .map(|ts| ts.iter().map(|&(a, s)| self.alpha_mass(alpha, a, s)).sum())
            .collect()
    }

    pub fn residuals(&self, alpha: &AlphaPolicy, beta: &BetaPolicy) -> Vec<f64> {
        self.terms
            .iter()
            .map(|ts| {
                ts.iter()
                    .map(|t| {
                        let b = t.beta.map_or(1.0, |i| beta.values[i]);
                        t.sign * b * self.alpha_mass(alpha, t.action, t.state)
                    })
                    .sum()
            })
            .collect()
    }

    pub fn residual_key_string(&self, i: usize) -> String {
        let (k, j) = self.residual_keys[i];
        format!("{k}|{j}")
    }
}
