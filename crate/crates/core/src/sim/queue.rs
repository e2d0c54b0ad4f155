//! Queue state and the per-slot transition for two receivers.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

/// Scheduler action in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SimAction {
    P1,
    P2,
    Mix,
    Common,
}

impl SimAction {
    pub const ALL: [SimAction; 4] = [SimAction::P1, SimAction::P2, SimAction::Mix, SimAction::Common];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SimAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SimAction::P1 => "P1",
            SimAction::P2 => "P2",
            SimAction::Mix => "MIX",
            SimAction::Common => "COMMON",
        };
        f.write_str(s)
    }
}

/// Channel state and its estimate for one slot, two bits each with
/// receiver 1 in the high bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotDraw {
    pub slot: u64,
    pub s: usize,
    pub shat: usize,
}

impl SlotDraw {
    pub fn on(&self, k: usize) -> bool {
        (self.s >> (2 - k)) & 1 == 1
    }
}

/// What one slot did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    /// Action after fallbacks.
    pub action: Option<SimAction>,
    pub deliveries: [u32; 2],
    /// Nothing was delivered, queued or resolved.
    pub wasted: bool,
}

/// Fresh backlogs and the common retransmission queue.
///
/// The common queue is kept as three ordered id sets by outstanding need,
/// so the oldest entry of each kind is found in logarithmic time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueueSystem {
    /// Remaining fresh packets per receiver; `None` is an unlimited backlog.
    pub fresh: [Option<u64>; 2],
    need1: BTreeSet<u64>,
    need2: BTreeSet<u64>,
    need12: BTreeSet<u64>,
    next_id: u64,
    pub created: [u64; 2],
    pub delivered: [u64; 2],
}

impl QueueSystem {
    pub fn backlogged() -> Self {
        Self::default()
    }

    pub fn with_fresh(f1: u64, f2: u64) -> Self {
        Self {
            fresh: [Some(f1), Some(f2)],
            ..Self::default()
        }
    }

    pub fn common_len(&self) -> usize {
        self.need1.len() + self.need2.len() + self.need12.len()
    }

    /// Outstanding needs of receiver `k` in the common queue.
    pub fn pending(&self, k: usize) -> u64 {
        let single = if k == 1 { &self.need1 } else { &self.need2 };
        (single.len() + self.need12.len()) as u64
    }

    /// Entry counts by outstanding need: `{1}`, `{2}`, `{1,2}`.
    pub fn common_by_need(&self) -> [usize; 3] {
        [self.need1.len(), self.need2.len(), self.need12.len()]
    }

    fn has_fresh(&self, k: usize) -> bool {
        self.fresh[k - 1].is_none_or(|n| n > 0)
    }

    fn take_fresh(&mut self, k: usize) {
        if let Some(n) = self.fresh[k - 1].as_mut() {
            *n -= 1;
        }
        self.created[k - 1] += 1;
    }

    fn push(&mut self, needs: (bool, bool)) {
        let id = self.next_id;
        self.next_id += 1;
        match needs {
            (true, false) => self.need1.insert(id),
            (false, true) => self.need2.insert(id),
            (true, true) => self.need12.insert(id),
            (false, false) => unreachable!("common entries always have a need"),
        };
    }

    fn single(&mut self, k: usize) -> &mut BTreeSet<u64> {
        if k == 1 {
            &mut self.need1
        } else {
            &mut self.need2
        }
    }

    /// Action that will actually run, or `None` for an idle slot.
    pub fn resolve(&self, action: SimAction) -> Option<SimAction> {
        match action {
            SimAction::P1 | SimAction::P2 => {
                let k = if action == SimAction::P1 { 1 } else { 2 };
                self.has_fresh(k).then_some(action)
            }
            SimAction::Mix => match (self.has_fresh(1), self.has_fresh(2)) {
                (true, true) => Some(SimAction::Mix),
                (true, false) => Some(SimAction::P1),
                (false, true) => Some(SimAction::P2),
                (false, false) => None,
            },
            SimAction::Common => (self.common_len() > 0).then_some(SimAction::Common),
        }
    }

    /// Applies one slot. `action` is the policy's choice before fallbacks.
    pub fn step(&mut self, draw: SlotDraw, action: SimAction) -> StepOutcome {
        let Some(action) = self.resolve(action) else {
            return StepOutcome {
                action: None,
                deliveries: [0, 0],
                wasted: true,
            };
        };
        let (on1, on2) = (draw.on(1), draw.on(2));
        let mut out = StepOutcome {
            action: Some(action),
            ..Default::default()
        };
        match action {
            SimAction::P1 | SimAction::P2 => {
                let (k, on_k, on_other) = if action == SimAction::P1 {
                    (1, on1, on2)
                } else {
                    (2, on2, on1)
                };
                if on_k {
                    self.take_fresh(k);
                    out.deliveries[k - 1] = 1;
                } else if on_other {
                    // Overheard by the other receiver only.
                    self.take_fresh(k);
                    self.push((k == 1, k == 2));
                } else {
                    out.wasted = true;
                }
            }
            SimAction::Mix => {
                if on1 || on2 {
                    // Whichever of V1, V2 resolves the mixture is needed by both.
                    self.take_fresh(1);
                    self.take_fresh(2);
                    self.push((true, true));
                } else {
                    out.wasted = true;
                }
            }
            SimAction::Common => {
                out.deliveries = self.serve_common(on1, on2);
                out.wasted = out.deliveries == [0, 0];
            }
        }
        for k in 0..2 {
            self.delivered[k] += u64::from(out.deliveries[k]);
        }
        out
    }

    /// Sends the head of the common queue, combined with the oldest entry
    /// needed only by the other receiver when one exists. Single-need
    /// entries are already known to the other receiver, so the combination
    /// is decodable by both.
    fn serve_common(&mut self, on1: bool, on2: bool) -> [u32; 2] {
        let front = |s: &BTreeSet<u64>| s.first().copied();
        let heads = [front(&self.need1), front(&self.need2), front(&self.need12)];
        let head = (0..3)
            .filter_map(|i| heads[i].map(|id| (id, i)))
            .min()
            .expect("common queue is nonempty");
        let on = [on1, on2];
        let mut got = [0u32; 2];
        match head.1 {
            2 => self.serve_both(head.0, on, &mut got),
            i => {
                let k = i + 1;
                let j = 3 - k;
                if let Some(other) = heads[j - 1] {
                    if on[k - 1] {
                        self.single(k).remove(&head.0);
                        got[k - 1] = 1;
                    }
                    if on[j - 1] {
                        self.single(j).remove(&other);
                        got[j - 1] = 1;
                    }
                } else if let Some(both) = heads[2] {
                    self.serve_both(both, on, &mut got);
                } else if on[k - 1] {
                    self.single(k).remove(&head.0);
                    got[k - 1] = 1;
                }
            }
        }
        got
    }

    fn serve_both(&mut self, id: u64, on: [bool; 2], got: &mut [u32; 2]) {
        match on {
            [false, false] => {}
            [true, true] => {
                self.need12.remove(&id);
                *got = [1, 1];
            }
            [true, false] => {
                self.need12.remove(&id);
                self.need2.insert(id);
                got[0] = 1;
            }
            [false, true] => {
                self.need12.remove(&id);
                self.need1.insert(id);
                got[1] = 1;
            }
        }
    }

    /// `created = delivered + pending` for both receivers.
    pub fn conserved(&self) -> bool {
        (1..=2).all(|k| self.created[k - 1] == self.delivered[k - 1] + self.pending(k))
    }
}
