//! Slot-level Monte Carlo of the two-receiver scheme with explicit queues.

mod queue;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use queue::{QueueSystem, SimAction, SlotDraw, StepOutcome};

use crate::error::{Error, Result};
use crate::region::AlphaTriple;
use crate::solver::{Action, SchedulingSolution, Subset};
use crate::state::{state_string, JointStateTable};

/// Batches used for confidence intervals.
pub const BATCHES: usize = 20;
/// Two-sided 97.5% Student-t quantile at `BATCHES - 1` degrees of freedom.
const T_QUANTILE: f64 = 2.093;

/// Per-estimate distribution over `P1, P2, MIX, COMMON`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Policy {
    pub probs: [[f64; 4]; 4],
}

impl Policy {
    pub fn new(probs: [[f64; 4]; 4]) -> Result<Self> {
        for (shat, row) in probs.iter().enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!("negative weight at estimate {shat}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidPolicy(format!(
                    "weights sum to {total} at estimate {shat}"
                )));
            }
        }
        Ok(Self { probs })
    }

    pub fn always(action: SimAction) -> Self {
        let mut row = [0.0; 4];
        row[action.index()] = 1.0;
        Self { probs: [row; 4] }
    }

    pub fn prob(&self, shat: usize, action: SimAction) -> f64 {
        self.probs[shat][action.index()]
    }

    fn sample(&self, shat: usize, u: f64) -> SimAction {
        let mut acc = 0.0;
        for a in SimAction::ALL {
            acc += self.probs[shat][a.index()];
            if u < acc {
                return a;
            }
        }
        // Rounding left a sliver above the last cumulative weight.
        SimAction::ALL
            .into_iter()
            .rev()
            .find(|a| self.probs[shat][a.index()] > 0.0)
            .unwrap_or(SimAction::Common)
    }
}

/// Policy from a scheduling triple. Private and mixed weights are scaled by
/// `1 - backoff`; the remainder goes to the common queue.
pub fn policy_from_solution(alpha: &AlphaTriple, backoff: f64) -> Result<Policy> {
    alpha.validate(1e-9)?;
    if !(0.0..1.0).contains(&backoff) {
        return Err(Error::InvalidPolicy(format!("back-off {backoff} outside [0,1)")));
    }
    let scale = 1.0 - backoff;
    let mut probs = [[0.0; 4]; 4];
    for (shat, row) in probs.iter_mut().enumerate() {
        row[0] = (alpha.private1[shat] * scale).max(0.0);
        row[1] = (alpha.private2[shat] * scale).max(0.0);
        row[2] = (alpha.mix[shat] * scale).max(0.0);
        row[3] = (1.0 - row[0] - row[1] - row[2]).max(0.0);
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
    }
    Ok(Policy { probs })
}

/// Reads the two-receiver triple out of a solver result.
pub fn alpha_triple_from_solution(sol: &SchedulingSolution) -> Result<AlphaTriple> {
    let p = &sol.program;
    if p.num_receivers != 2 {
        return Err(Error::NotTwoReceivers(p.num_receivers));
    }
    let row = |a: Action| -> [f64; 4] {
        let i = p.actions.index_of(a).expect("two-receiver action");
        std::array::from_fn(|shat| sol.alpha.values[i][shat].max(0.0))
    };
    let mut t = AlphaTriple {
        private1: row(Action::Group(Subset::singleton(1))),
        private2: row(Action::Group(Subset::singleton(2))),
        mix: row(Action::mix(1, 2)),
    };
    for shat in 0..4 {
        let total = t.private1[shat] + t.private2[shat] + t.mix[shat];
        if total > 1.0 {
            t.private1[shat] /= total;
            t.private2[shat] /= total;
            t.mix[shat] /= total;
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub slots: u64,
    pub seed: u64,
    pub delivered: [u64; 2],
    pub rates: [f64; 2],
    pub created: [u64; 2],
    pub pending: [u64; 2],
    pub common_queue_mean: f64,
    pub common_queue_max: usize,
    /// Batch-means 95% half-widths; absent with fewer slots than batches.
    pub ci_half_width: [Option<f64>; 2],
    pub wasted_slots: u64,
    /// `action_counts[shat][action]` after fallbacks; idle slots are not counted.
    pub action_counts: [[u64; 4]; 4],
    /// Slots per estimate.
    pub estimate_counts: [u64; 4],
}

/// Runs `slots` slots from empty queues with unlimited fresh backlog.
pub fn run(joint: &JointStateTable, policy: &Policy, slots: u64, seed: u64) -> Result<SimReport> {
    run_with_trace(joint, policy, slots, seed, None)
}

/// As [`run`], also writing `slot,s,shat,action,deliveries,qlen` per slot.
pub fn run_with_trace(
    joint: &JointStateTable,
    policy: &Policy,
    slots: u64,
    seed: u64,
    trace: Option<&mut dyn Write>,
) -> Result<SimReport> {
    if joint.num_receivers() != 2 {
        return Err(Error::NotTwoReceivers(joint.num_receivers()));
    }
    if slots == 0 {
        return Err(Error::Config("slot count must be at least 1".into()));
    }
    let mut writer = trace.map(csv::Writer::from_writer);
    if let Some(w) = writer.as_mut() {
        w.write_record(["slot", "s", "shat", "action", "deliveries", "qlen"])
            .map_err(csv_err)?;
    }

    let cumulative: Vec<f64> = joint
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let last_nonzero = joint.probs().iter().rposition(|p| *p > 0.0).unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QueueSystem::backlogged();
    let mut wasted = 0u64;
    let mut action_counts = [[0u64; 4]; 4];
    let mut estimate_counts = [0u64; 4];
    let mut qlen_sum = 0f64;
    let mut qlen_max = 0usize;
    let batch_len = slots / BATCHES as u64;
    let mut batch_delivered = vec![[0u64; 2]; BATCHES];

    for slot in 0..slots {
        let u: f64 = rng.gen();
        let cell = cumulative.partition_point(|&c| c <= u).min(last_nonzero);
        let draw = SlotDraw {
            slot,
            s: cell / 4,
            shat: cell % 4,
        };
        let chosen = policy.sample(draw.shat, rng.gen());
        let out = q.step(draw, chosen);

        estimate_counts[draw.shat] += 1;
        if let Some(a) = out.action {
            action_counts[draw.shat][a.index()] += 1;
        }
        wasted += u64::from(out.wasted);
        let qlen = q.common_len();
        qlen_sum += qlen as f64;
        qlen_max = qlen_max.max(qlen);
        if let Some(b) = slot.checked_div(batch_len).map(|b| b as usize) {
            if b < BATCHES {
                batch_delivered[b][0] += u64::from(out.deliveries[0]);
                batch_delivered[b][1] += u64::from(out.deliveries[1]);
            }
        }
        if let Some(w) = writer.as_mut() {
            let action = out.action.map_or("IDLE".to_string(), |a| a.to_string());
            w.write_record([
                slot.to_string(),
                state_string(draw.s, 2),
                state_string(draw.shat, 2),
                action,
                (out.deliveries[0] + out.deliveries[1]).to_string(),
                qlen.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    if let Some(mut w) = writer {
        w.flush()
            .map_err(|e| Error::Config(format!("trace write failed: {e}")))?;
    }
    debug_assert!(q.conserved());

    let ci_half_width = std::array::from_fn(|k| {
        (batch_len > 0).then(|| {
            let rates: Vec<f64> = batch_delivered.iter().map(|b| b[k] as f64 / batch_len as f64).collect();
            let mean = rates.iter().sum::<f64>() / BATCHES as f64;
            let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            T_QUANTILE * (var / BATCHES as f64).sqrt()
        })
    });

    Ok(SimReport {
        slots,
        seed,
        delivered: q.delivered,
        rates: [
            q.delivered[0] as f64 / slots as f64,
            q.delivered[1] as f64 / slots as f64,
        ],
        created: q.created,
        pending: [q.pending(1), q.pending(2)],
        common_queue_mean: qlen_sum / slots as f64,
        common_queue_max: qlen_max,
        ci_half_width,
        wasted_slots: wasted,
        action_counts,
        estimate_counts,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("trace write failed: {e}"))
}

/// Independent runs, one per seed, on separate threads.
pub fn run_replicas(joint: &JointStateTable, policy: &Policy, slots: u64, seeds: &[u64]) -> Result<Vec<SimReport>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| scope.spawn(move || run(joint, policy, slots, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub rates: [f64; 2],
    pub targets: [f64; 2],
    /// `(target - rate) / target`; negative when the run beats the target.
    pub relative_gap: [f64; 2],
    pub tolerance: f64,
    pub pass: bool,
}

pub fn compare(report: &SimReport, targets: [f64; 2], tol: f64) -> GapReport {
    let relative_gap = std::array::from_fn(|k| {
        if targets[k] > 0.0 {
            (targets[k] - report.rates[k]) / targets[k]
        } else {
            0.0
        }
    });
    GapReport {
        rates: report.rates,
        targets,
        relative_gap,
        tolerance: tol,
        pass: relative_gap.iter().all(|g| *g <= tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{product_joint, PerVehicleJoint};

    fn report_with(rates: [f64; 2]) -> SimReport {
        SimReport {
            slots: 1,
            seed: 0,
            delivered: [0, 0],
            rates,
            created: [0, 0],
            pending: [0, 0],
            common_queue_mean: 0.0,
            common_queue_max: 0,
            ci_half_width: [None, None],
            wasted_slots: 0,
            action_counts: [[0; 4]; 4],
            estimate_counts: [0; 4],
        }
    }

    #[test]
    fn policy_examples() {
        let a = AlphaTriple::new([1.0; 4], [0.0; 4], [0.0; 4]).unwrap();
        assert_eq!(policy_from_solution(&a, 0.0).unwrap(), Policy::always(SimAction::P1));
        let z = policy_from_solution(&AlphaTriple::zeros(), 0.0).unwrap();
        assert_eq!(z, Policy::always(SimAction::Common));
        let b = policy_from_solution(&a, 0.1).unwrap();
        assert!((b.prob(0, SimAction::Common) - 0.1).abs() < 1e-15);
        assert!(policy_from_solution(&a, 1.0).is_err());
        assert!(Policy::new([[0.5, 0.5, 0.5, 0.0]; 4]).is_err());
    }

    #[test]
    fn erasure_free_alternation() {
        let j = product_joint(&[PerVehicleJoint::never_erased(); 2]).unwrap();
        // Perfect estimates are always 11, so alternate by hand.
        let mut q = QueueSystem::backlogged();
        for slot in 0..1000u64 {
            let a = if slot % 2 == 0 { SimAction::P1 } else { SimAction::P2 };
            q.step(SlotDraw { slot, s: 3, shat: 3 }, a);
        }
        assert_eq!(q.delivered, [500, 500]);
        let r = run(&j, &Policy::always(SimAction::P1), 100, 1).unwrap();
        assert_eq!(r.rates, [1.0, 0.0]);
    }

    #[test]
    fn always_erased_wastes_everything() {
        let j = product_joint(&[PerVehicleJoint::always_erased(); 2]).unwrap();
        let p = Policy::new([[0.25; 4]; 4]).unwrap();
        let r = run(&j, &p, 5000, 3).unwrap();
        assert_eq!(r.rates, [0.0, 0.0]);
        assert_eq!(r.wasted_slots, 5000);
    }

    #[test]
    fn determinism_and_trace() {
        let j = product_joint(&[PerVehicleJoint::independent(0.4); 2]).unwrap();
        let p = Policy::new([[0.3, 0.3, 0.2, 0.2]; 4]).unwrap();
        let a = run(&j, &p, 10_000, 42).unwrap();
        let b = run(&j, &p, 10_000, 42).unwrap();
        assert_eq!(a, b);
        let c = run(&j, &p, 10_000, 43).unwrap();
        assert_ne!(a.delivered, c.delivered);
        let mut buf = Vec::new();
        let t = run_with_trace(&j, &p, 50, 42, Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("slot,s,shat,action,deliveries,qlen"));
        assert_eq!(text.lines().count(), 51);
        assert_eq!(t.created[0], t.delivered[0] + t.pending[0]);
    }

    #[test]
    fn compare_examples() {
        let t = [0.280707; 2];
        let g = compare(&report_with([0.2779; 2]), t, 0.02);
        assert!(g.pass);
        assert!((g.relative_gap[0] - 0.01).abs() < 1e-3);
        assert!(!compare(&report_with([0.26; 2]), t, 0.02).pass);
    }

    #[test]
    fn rejects_bad_inputs() {
        let j = product_joint(&[PerVehicleJoint::independent(0.4); 3]).unwrap();
        assert!(matches!(
            run(&j, &Policy::always(SimAction::P1), 10, 0),
            Err(Error::NotTwoReceivers(3))
        ));
        let j2 = product_joint(&[PerVehicleJoint::independent(0.4); 2]).unwrap();
        assert!(run(&j2, &Policy::always(SimAction::P1), 0, 0).is_err());
    }
}
