//! Alternating linear programs over `alpha` (with `beta` fixed) and `beta`
//! (with `alpha` fixed), restarted from several deterministic seeds.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::program::{AlphaPolicy, BetaPolicy, Program};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::state::{JointStateTable, DEFAULT_K_MAX};

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Maximise `min_k R_k`.
    Symmetric,
    /// Maximise `sum_k w_k R_k`.
    Weighted(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub objective: Objective,
    /// Restrict `alpha` to be the same for every estimate.
    pub alpha_constant: bool,
    /// Leave the top-layer downgrading weight free instead of pinning it.
    pub free_top_layer_beta: bool,
    /// Credit forwarded group signals even where the receiver already has them.
    pub literal_forwarding: bool,
    /// Number of starting points; the first two are deterministic layouts,
    /// the rest are seeded random draws.
    pub starts: usize,
    pub max_rounds: usize,
    pub rel_tol: f64,
    pub k_max: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            objective: Objective::Symmetric,
            alpha_constant: false,
            free_top_layer_beta: false,
            literal_forwarding: false,
            starts: 10,
            max_rounds: 200,
            rel_tol: 1e-9,
            k_max: DEFAULT_K_MAX,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchedulingSolution {
    pub program: Program,
    pub objective: Objective,
    pub value: f64,
    pub rates: Vec<f64>,
    pub alpha: AlphaPolicy,
    pub beta: BetaPolicy,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the start that produced this solution.
    pub start: usize,
}

impl SchedulingSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Serialize for SchedulingSolution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let p = &self.program;
        let k = p.num_receivers;
        let alpha: BTreeMap<String, &Vec<f64>> = p
            .actions
            .actions
            .iter()
            .zip(&self.alpha.values)
            .map(|(a, v)| (a.to_string(), v))
            .collect();
        let beta: BTreeMap<String, f64> = (0..p.beta.len())
            .map(|i| (p.beta.key_string(i, k), self.beta.values[i]))
            .collect();
        let residuals: BTreeMap<String, f64> = (0..p.residual_keys.len())
            .map(|i| (p.residual_key_string(i), self.residuals[i]))
            .collect();
        let mut m = serializer.serialize_map(Some(9))?;
        m.serialize_entry("K", &k)?;
        match &self.objective {
            Objective::Symmetric => m.serialize_entry("objective_kind", "symmetric")?,
            Objective::Weighted(w) => m.serialize_entry("objective_kind", &serde_json::json!({ "weighted": w }))?,
        }
        m.serialize_entry("objective", &self.value)?;
        m.serialize_entry("rates", &self.rates)?;
        m.serialize_entry("alpha", &alpha)?;
        m.serialize_entry("beta", &beta)?;
        m.serialize_entry("residuals", &residuals)?;
        m.serialize_entry("iterations", &self.iterations)?;
        m.serialize_entry("converged", &self.converged)?;
        m.end()
    }
}

fn objective_value(objective: &Objective, rates: &[f64]) -> f64 {
    match objective {
        Objective::Symmetric => rates.iter().copied().fold(f64::INFINITY, f64::min),
        Objective::Weighted(w) => w.iter().zip(rates).map(|(a, b)| a * b).sum(),
    }
}

/// Best `alpha` for fixed `beta`.
fn alpha_step(p: &Program, beta: &BetaPolicy, opts: &SolveOptions) -> Result<AlphaPolicy> {
    let na = p.actions.len();
    let n = p.num_states();
    let per_action = if opts.alpha_constant { 1 } else { n };
    let var = |a: usize, shat: usize| a * per_action + if opts.alpha_constant { 0 } else { shat };

    let mut lp = LinearProgram::new();
    for _ in 0..na * per_action {
        lp.add_var(0.0, 0.0, 1.0);
    }
    for col in 0..per_action {
        lp.add_row(
            (0..na).map(|a| (a * per_action + col, 1.0)).collect(),
            Relation::Eq,
            1.0,
        );
    }

    // Coefficient of alpha_q(shat) in a sum of (action, state, weight) terms.
    let accumulate = |items: &mut dyn Iterator<Item = (usize, usize, f64)>| {
        let mut row = vec![0.0; na * per_action];
        for (a, s, w) in items {
            for shat in 0..n {
                row[var(a, shat)] += w * p.p(s, shat);
            }
        }
        row.into_iter()
            .enumerate()
            .filter(|(_, c)| *c != 0.0)
            .collect::<Vec<_>>()
    };

    let rate_rows: Vec<Vec<(usize, f64)>> = p
        .rate_terms
        .iter()
        .map(|ts| accumulate(&mut ts.iter().map(|&(a, s)| (a, s, 1.0))))
        .collect();

    for ts in &p.terms {
        let row = accumulate(&mut ts.iter().map(|t| {
            let b = t.beta.map_or(1.0, |i| beta.values[i]);
            (t.action, t.state, t.sign * b)
        }));
        lp.add_row(row, Relation::Le, 0.0);
    }

    match &opts.objective {
        Objective::Symmetric => {
            let t = lp.add_var(1.0, 0.0, 1.0);
            for row in rate_rows {
                let mut r: Vec<(usize, f64)> = row.into_iter().map(|(i, c)| (i, -c)).collect();
                r.push((t, 1.0));
                lp.add_row(r, Relation::Le, 0.0);
            }
        }
        Objective::Weighted(w) => {
            for (row, wk) in rate_rows.into_iter().zip(w) {
                for (i, c) in row {
                    lp.set_cost(i, lp.cost(i) + wk * c);
                }
            }
        }
    }

    let sol = crate::lp::solve(&lp)?;
    let mut alpha = AlphaPolicy::zeros(na, n);
    for shat in 0..n {
        let col = if opts.alpha_constant { 0 } else { shat };
        let mut total = 0.0;
        for a in 0..na {
            let v = sol.x[a * per_action + col].clamp(0.0, 1.0);
            alpha.values[a][shat] = v;
            total += v;
        }
        for a in 0..na {
            alpha.values[a][shat] /= total;
        }
    }
    Ok(alpha)
}

/// Downgrading weights that leave the most slack for fixed `alpha`, keeping
/// every current constraint satisfied.
fn beta_step(p: &Program, alpha: &AlphaPolicy, current: &BetaPolicy) -> Result<BetaPolicy> {
    let nb = p.beta.len();
    if nb == 0 {
        return Ok(current.clone());
    }
    let mut lp = LinearProgram::new();
    for _ in 0..nb {
        lp.add_var(0.0, 0.0, 1.0);
    }
    let z = lp.add_var(-1.0, f64::NEG_INFINITY, f64::INFINITY);
    let spread = 1e-3 / p.terms.len().max(1) as f64;
    let cur_res = p.residuals(alpha, current);
    for (ts, cur) in p.terms.iter().zip(cur_res) {
        let mut coeffs = vec![0.0; nb];
        let mut constant = 0.0;
        for t in ts {
            let m = t.sign * p.alpha_mass(alpha, t.action, t.state);
            match t.beta {
                Some(b) => coeffs[b] += m,
                None => constant += m,
            }
        }
        let row: Vec<(usize, f64)> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (i, *c))
            .collect();
        for &(i, c) in &row {
            lp.set_cost(i, lp.cost(i) - spread * c);
        }
        // Never make a satisfied constraint worse than it already is.
        lp.add_row(row.clone(), Relation::Le, cur.max(0.0) - constant);
        let mut with_z = row;
        with_z.push((z, -1.0));
        lp.add_row(with_z, Relation::Le, -constant);
    }
    for g in p.beta.groups.iter().filter(|g| !g.free) {
        lp.add_row(g.vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
    }
    let sol = crate::lp::solve(&lp)?;
    let mut values: Vec<f64> = sol.x[..nb].iter().map(|b| b.clamp(0.0, 1.0)).collect();
    for g in p.beta.groups.iter().filter(|g| !g.free) {
        let total: f64 = g.vars.iter().map(|&v| values[v]).sum();
        for &v in &g.vars {
            values[v] /= total;
        }
    }
    Ok(BetaPolicy { values })
}

/// Starting `beta` for start index `i`.
pub fn initial_beta(p: &Program, i: usize) -> BetaPolicy {
    match i {
        0 => p.beta.top_layer(),
        1 => p.beta.uniform(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            let mut values = vec![0.0; p.beta.len()];
            for g in &p.beta.groups {
                if g.free {
                    for &v in &g.vars {
                        values[v] = rng.gen::<f64>();
                    }
                } else {
                    // Flat Dirichlet draw.
                    let draws: Vec<f64> = g.vars.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                    let total: f64 = draws.iter().sum();
                    for (&v, d) in g.vars.iter().zip(draws) {
                        values[v] = d / total;
                    }
                }
            }
            BetaPolicy { values }
        }
    }
}

struct Run {
    value: f64,
    alpha: AlphaPolicy,
    beta: BetaPolicy,
    iterations: usize,
    converged: bool,
}

fn run_from(p: &Program, opts: &SolveOptions, start: usize) -> Result<Run> {
    let mut beta = initial_beta(p, start);
    let mut alpha = alpha_step(p, &beta, opts)?;
    let mut value = objective_value(&opts.objective, &p.rate_of(&alpha));
    let mut iterations = 1;
    let mut converged = false;
    while iterations < opts.max_rounds {
        let next_beta = beta_step(p, &alpha, &beta)?;
        let next_alpha = alpha_step(p, &next_beta, opts)?;
        let next_value = objective_value(&opts.objective, &p.rate_of(&next_alpha));
        iterations += 1;
        let improvement = next_value - value;
        if next_value >= value {
            alpha = next_alpha;
            beta = next_beta;
            value = next_value;
        }
        if improvement <= opts.rel_tol * value.abs().max(1e-12) {
            converged = true;
            break;
        }
    }
    Ok(Run {
        value,
        alpha,
        beta,
        iterations,
        converged,
    })
}

/// Best of `opts.starts` alternating runs. Starts run on separate threads;
/// ties go to the lower start index.
pub fn solve(joint: &JointStateTable, opts: &SolveOptions) -> Result<SchedulingSolution> {
    let k = joint.num_receivers();
    if k < 2 || k > opts.k_max {
        return Err(Error::SizeLimit {
            k,
            min: 2,
            max: opts.k_max,
        });
    }
    if let Objective::Weighted(w) = &opts.objective {
        if w.len() != k || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Config(format!("weights must be {k} nonnegative numbers")));
        }
    }
    if opts.starts == 0 {
        return Err(Error::Config("at least one start is required".into()));
    }
    let program = Program::build(joint, opts.free_top_layer_beta, opts.literal_forwarding)?;
    let runs: Vec<Result<Run>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..opts.starts)
            .map(|i| {
                let program = &program;
                scope.spawn(move || run_from(program, opts, i))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });

    let mut best: Option<(usize, Run)> = None;
    for (i, run) in runs.into_iter().enumerate() {
        let run = run?;
        if best.as_ref().is_none_or(|(_, b)| run.value > b.value) {
            best = Some((i, run));
        }
    }
    let (start, run) = best.expect("at least one start");
    let rates = program.rate_of(&run.alpha);
    let residuals = program.residuals(&run.alpha, &run.beta);
    Ok(SchedulingSolution {
        objective: opts.objective.clone(),
        value: run.value,
        rates,
        alpha: run.alpha,
        beta: run.beta,
        residuals,
        iterations: run.iterations,
        converged: run.converged,
        start,
        program,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::sym_rate_direct;
    use crate::state::{product_joint, toy_model_joint, Geometry, PerVehicleJoint};
    use approx::assert_abs_diff_eq;

    fn fig3() -> JointStateTable {
        toy_model_joint(&Geometry::new(4.0, 0.2, 10.0).unwrap(), &[60.0, 60.0]).unwrap()
    }

    #[test]
    fn two_receiver_symmetric_optimum() {
        let s = solve(&fig3(), &SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(s.value, 0.280707, epsilon = 1e-6);
        assert!(s.max_residual() <= 1e-8);
        s.alpha.validate(1e-10).unwrap();
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["K"], 2);
        assert!(json["alpha"]["1x2"].is_array());
        assert!(json["beta"]["{1}|{1,2}|01"].is_number());
        assert!(json["residuals"]["1|{1,2}"].is_number());
    }

    #[test]
    fn erasure_free_is_half() {
        let j = product_joint(&[PerVehicleJoint::never_erased(); 2]).unwrap();
        let s = solve(&j, &SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(s.value, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn weighted_objective_matches_polygon_support() {
        let j = fig3();
        let poly = crate::region::region_polygon(&j).unwrap();
        for w in [[1.0, 0.0], [1.0, 2.0], [0.3, 0.7]] {
            let opts = SolveOptions {
                objective: Objective::Weighted(w.to_vec()),
                starts: 2,
                ..Default::default()
            };
            let s = solve(&j, &opts).unwrap();
            assert_abs_diff_eq!(s.value, poly.support(w[0], w[1]), epsilon = 1e-8);
        }
        let (direct, _) = sym_rate_direct(&j).unwrap();
        assert!(direct > 0.0);
    }

    #[test]
    fn three_receiver_feedback_only_bracket() {
        let eps = 0.604923;
        let j = product_joint(&[PerVehicleJoint::independent(eps); 3]).unwrap();
        let s = solve(
            &j,
            &SolveOptions {
                starts: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.value >= 0.13169 - 1e-5 && s.value <= 0.18544 + 1e-5, "{}", s.value);
        assert!(s.max_residual() <= 1e-8);
    }

    #[test]
    fn four_receiver_feedback_only_bracket() {
        let eps: f64 = 0.604923;
        let j = product_joint(&[PerVehicleJoint::independent(eps); 4]).unwrap();
        let s = solve(
            &j,
            &SolveOptions {
                starts: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let upper = 1.0 / (1..=4).map(|i| 1.0 / (1.0 - eps.powi(i))).sum::<f64>();
        assert!(s.value >= (1.0 - eps) / 4.0 && s.value <= upper + 1e-9, "{}", s.value);
        assert!(s.max_residual() <= 1e-8);
    }

    #[test]
    fn literal_forwarding_exceeds_feedback_capacity() {
        let j = product_joint(&[PerVehicleJoint::independent(0.604923); 3]).unwrap();
        let opts = SolveOptions {
            starts: 1,
            literal_forwarding: true,
            ..Default::default()
        };
        assert!(solve(&j, &opts).unwrap().value > 0.18544);
    }

    #[test]
    fn rejects_bad_options() {
        let j = fig3();
        let bad = SolveOptions {
            objective: Objective::Weighted(vec![1.0]),
            ..Default::default()
        };
        assert!(matches!(solve(&j, &bad), Err(Error::Config(_))));
        let small = SolveOptions {
            k_max: 1,
            ..Default::default()
        };
        assert!(matches!(solve(&j, &small), Err(Error::SizeLimit { .. })));
    }
}
