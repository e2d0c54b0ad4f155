//! Receiver subsets, side-information state sets and the action alphabet.

use std::fmt;

use crate::error::{Error, Result};
use crate::state::{bit, StateIndex};

/// Set of receivers; receiver `k` (1-based) is bit `k - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(pub u32);

impl Subset {
    pub fn from_receivers(receivers: &[usize]) -> Self {
        Subset(receivers.iter().fold(0, |m, &k| m | (1 << (k - 1))))
    }

    pub fn full(k: usize) -> Self {
        Subset((1u32 << k) - 1)
    }

    pub fn singleton(k: usize) -> Self {
        Subset(1 << (k - 1))
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0 & (1 << (k - 1)) != 0
    }

    pub fn is_subset_of(&self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_strict_subset_of(&self, other: Subset) -> bool {
        self.is_subset_of(other) && self.0 != other.0
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=32).filter(move |&k| self.contains(k))
    }

    /// Receivers of `state` that are connected.
    pub fn connected(state: StateIndex, num_receivers: usize) -> Subset {
        Subset::from_receivers(
            &(1..=num_receivers)
                .filter(|&k| bit(state, k, num_receivers) == 1)
                .collect::<Vec<_>>(),
        )
    }

    /// All nonempty subsets of `{1..K}`, ordered by size then mask.
    pub fn all_nonempty(num_receivers: usize) -> Vec<Subset> {
        let mut out: Vec<Subset> = (1..(1u32 << num_receivers)).map(Subset).collect();
        out.sort_by_key(|s| (s.len(), s.0));
        out
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner: Vec<String> = self.members().map(|k| k.to_string()).collect();
        write!(f, "{{{}}}", inner.join(","))
    }
}

/// `S_c(U, J)`: states where `U` is not fully connected, exactly `J \ U`
/// overhears, and nobody outside `J` does.
pub fn sc_set(u: Subset, j: Subset, num_receivers: usize) -> Result<Vec<StateIndex>> {
    if u.is_empty() || !u.is_strict_subset_of(j) || !j.is_subset_of(Subset::full(num_receivers)) {
        return Err(Error::InvalidSubset(format!("need nonempty {u} strictly inside {j}")));
    }
    let outsiders = Subset(j.0 & !u.0);
    Ok((0..1usize << num_receivers)
        .filter(|&s| {
            let on = Subset::connected(s, num_receivers);
            on.0 & u.0 != u.0 && on.0 & !u.0 == outsiders.0
        })
        .collect())
}

/// `J_c(U, J)`: layers one below `J` that still strictly contain `U`, plus `J`.
pub fn jc_set(u: Subset, j: Subset) -> Vec<Subset> {
    let mut out: Vec<Subset> = j
        .members()
        .map(|k| Subset(j.0 & !(1 << (k - 1))))
        .filter(|t| u.is_strict_subset_of(*t))
        .collect();
    out.push(j);
    out
}

/// The overhearing superset `J` that a state determines for `U`, if any.
pub fn overhearing_set(u: Subset, state: StateIndex, num_receivers: usize) -> Option<Subset> {
    let on = Subset::connected(state, num_receivers);
    if on.0 & u.0 == u.0 || on.0 & !u.0 == 0 {
        return None;
    }
    Some(Subset(u.0 | on.0))
}

/// Transmission choice: a signal for a group, or a mixture of two privates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Group(Subset),
    /// Unordered pair with `i < j`.
    Mix(usize, usize),
}

impl Action {
    pub fn mix(i: usize, j: usize) -> Self {
        Action::Mix(i.min(j), i.max(j))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Group(u) => write!(f, "{u}"),
            Action::Mix(i, j) => write!(f, "{i}x{j}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    pub num_receivers: usize,
    pub actions: Vec<Action>,
}

impl ActionSet {
    pub fn new(num_receivers: usize) -> Self {
        let mut actions: Vec<Action> = Subset::all_nonempty(num_receivers)
            .into_iter()
            .map(Action::Group)
            .collect();
        for i in 1..=num_receivers {
            for j in i + 1..=num_receivers {
                actions.push(Action::Mix(i, j));
            }
        }
        Self { num_receivers, actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn index_of(&self, a: Action) -> Option<usize> {
        self.actions.iter().position(|&x| x == a)
    }

    pub fn num_group(&self) -> usize {
        self.actions.iter().filter(|a| matches!(a, Action::Group(_))).count()
    }

    pub fn num_mix(&self) -> usize {
        self.len() - self.num_group()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(r: &[usize]) -> Subset {
        Subset::from_receivers(r)
    }

    fn states(v: &[StateIndex], k: usize) -> Vec<String> {
        v.iter().map(|&x| crate::state::state_string(x, k)).collect()
    }

    #[test]
    fn sc_examples() {
        assert_eq!(states(&sc_set(s(&[1]), s(&[1, 2]), 2).unwrap(), 2), ["01"]);
        assert_eq!(states(&sc_set(s(&[1]), s(&[1, 2]), 3).unwrap(), 3), ["010"]);
        assert_eq!(
            states(&sc_set(s(&[1, 2]), s(&[1, 2, 3]), 3).unwrap(), 3),
            ["001", "011", "101"]
        );
        assert!(matches!(
            sc_set(s(&[1, 3]), s(&[1, 2]), 3),
            Err(Error::InvalidSubset(_))
        ));
        assert!(sc_set(s(&[1, 2]), s(&[1, 2]), 2).is_err());
    }

    #[test]
    fn jc_examples() {
        assert_eq!(jc_set(s(&[1]), s(&[1, 2])), vec![s(&[1, 2])]);
        let mut got = jc_set(s(&[1]), s(&[1, 2, 3]));
        got.sort();
        let mut want = vec![s(&[1, 2]), s(&[1, 3]), s(&[1, 2, 3])];
        want.sort();
        assert_eq!(got, want);
        assert_eq!(jc_set(s(&[1, 2]), s(&[1, 2, 3])), vec![s(&[1, 2, 3])]);
    }

    #[test]
    fn partition_property() {
        for k in 2..=4 {
            let full = Subset::full(k);
            for u in Subset::all_nonempty(k) {
                for state in 0..1usize << k {
                    let on = Subset::connected(state, k);
                    if on.0 & u.0 == u.0 {
                        continue;
                    }
                    let count = Subset::all_nonempty(k)
                        .into_iter()
                        .filter(|j| u.is_strict_subset_of(*j) && j.is_subset_of(full))
                        .filter(|&j| sc_set(u, j, k).unwrap().contains(&state))
                        .count();
                    let expected = usize::from(on.0 & !u.0 != 0);
                    assert_eq!(count, expected, "K={k} U={u} s={state}");
                    assert_eq!(overhearing_set(u, state, k).is_some(), expected == 1);
                }
            }
        }
    }

    #[test]
    fn action_counts() {
        for k in 2..=4 {
            let a = ActionSet::new(k);
            assert_eq!(a.num_group(), (1 << k) - 1);
            assert_eq!(a.num_mix(), k * (k - 1) / 2);
        }
        assert_eq!(Action::mix(2, 1).to_string(), "1x2");
        assert_eq!(Action::Group(s(&[1, 3])).to_string(), "{1,3}");
    }
}
