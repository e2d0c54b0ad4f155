//! Dense two-phase simplex for small linear programs.
//!
//! Problems here have at most a few hundred variables, so the tableau is
//! stored densely; Bland's rule takes over on degenerate stretches so the
//! method cannot cycle.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const HARRIS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rel: Relation,
    rhs: f64,
}

/// `maximize cᵀx` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpFailure {
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl From<LpFailure> for Error {
    fn from(f: LpFailure) -> Self {
        Error::Lp(format!("{f:?}"))
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with bounds `[lower, upper]`; `lower` may be
    /// `-inf` and `upper` may be `+inf`. Returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        debug_assert!(lower <= upper);
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn cost(&self, var: usize) -> f64 {
        self.objective[var]
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) {
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn solve(&self) -> std::result::Result<LpSolution, LpFailure> {
        Standard::build(self).solve(self)
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[i] - v).max(v - self.upper[i]);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let gap = match row.rel {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        if x.iter().any(|v| v.is_nan()) {
            return f64::INFINITY;
        }
        worst
    }
}

/// Column layout after shifting bounds: every structural column is `>= 0`.
enum ColumnMap {
    /// `x = lower + y`.
    Shifted { col: usize, lower: f64 },
    /// `x = upper - y`.
    Mirrored { col: usize, upper: f64 },
    /// `x = y+ - y-`.
    Split { pos: usize, neg: usize },
}

struct Standard {
    map: Vec<ColumnMap>,
    ncols: usize,
    /// Dense rows over structural columns, with relation and rhs.
    rows: Vec<(Vec<f64>, Relation, f64)>,
    cost: Vec<f64>,
    offset: f64,
}

impl Standard {
    fn build(lp: &LinearProgram) -> Standard {
        let mut map = Vec::with_capacity(lp.num_vars());
        let mut ncols = 0;
        for (&lo, &hi) in lp.lower.iter().zip(&lp.upper) {
            if lo.is_finite() {
                map.push(ColumnMap::Shifted { col: ncols, lower: lo });
                ncols += 1;
            } else if hi.is_finite() {
                map.push(ColumnMap::Mirrored { col: ncols, upper: hi });
                ncols += 1;
            } else {
                map.push(ColumnMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }

        let mut cost = vec![0.0; ncols];
        let mut offset = 0.0;
        for (j, m) in map.iter().enumerate() {
            let c = lp.objective[j];
            match *m {
                ColumnMap::Shifted { col, lower } => {
                    cost[col] += c;
                    offset += c * lower;
                }
                ColumnMap::Mirrored { col, upper } => {
                    cost[col] -= c;
                    offset += c * upper;
                }
                ColumnMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        let mut rows = Vec::new();
        for row in &lp.rows {
            let mut dense = vec![0.0; ncols];
            let mut rhs = row.rhs;
            for &(j, a) in &row.coeffs {
                match map[j] {
                    ColumnMap::Shifted { col, lower } => {
                        dense[col] += a;
                        rhs -= a * lower;
                    }
                    ColumnMap::Mirrored { col, upper } => {
                        dense[col] -= a;
                        rhs -= a * upper;
                    }
                    ColumnMap::Split { pos, neg } => {
                        dense[pos] += a;
                        dense[neg] -= a;
                    }
                }
            }
            rows.push((dense, row.rel, rhs));
        }
        // Finite upper bounds on shifted columns become rows.
        for (j, m) in map.iter().enumerate() {
            if let ColumnMap::Shifted { col, lower } = *m {
                let hi = lp.upper[j];
                if hi.is_finite() {
                    let mut dense = vec![0.0; ncols];
                    dense[col] = 1.0;
                    rows.push((dense, Relation::Le, hi - lower));
                }
            }
        }
        Standard {
            map,
            ncols,
            rows,
            cost,
            offset,
        }
    }

    fn solve(self, lp: &LinearProgram) -> std::result::Result<LpSolution, LpFailure> {
        let m = self.rows.len();
        let n = self.ncols;

        // Column layout: structural | slack/surplus (one per inequality) | artificial.
        let n_ineq = self.rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let slack_start = n;
        let art_start = n + n_ineq;
        let mut n_art = 0;
        let mut art_rows = Vec::new();

        let mut rows_norm = Vec::with_capacity(m);
        let mut slack_of_row = vec![None; m];
        let mut next_slack = slack_start;
        for (i, (coeffs, rel, rhs)) in self.rows.iter().enumerate() {
            let (mut coeffs, mut rel, mut rhs) = (coeffs.clone(), *rel, *rhs);
            if rhs < 0.0 {
                coeffs.iter_mut().for_each(|a| *a = -*a);
                rhs = -rhs;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            if rel != Relation::Eq {
                slack_of_row[i] = Some(next_slack);
                next_slack += 1;
            }
            if rel != Relation::Le {
                art_rows.push(i);
                n_art += 1;
            }
            rows_norm.push((coeffs, rel, rhs));
        }

        let width = art_start + n_art + 1;
        let rhs_col = width - 1;
        let mut t = Tableau {
            a: vec![vec![0.0; width]; m],
            basis: vec![0; m],
            rhs_col,
        };
        let mut art_index = art_start;
        for (i, (coeffs, rel, rhs)) in rows_norm.iter().enumerate() {
            t.a[i][..n].copy_from_slice(coeffs);
            t.a[i][rhs_col] = *rhs;
            if let Some(s) = slack_of_row[i] {
                t.a[i][s] = if *rel == Relation::Le { 1.0 } else { -1.0 };
            }
            if *rel == Relation::Le {
                t.basis[i] = slack_of_row[i].expect("inequality has slack");
            } else {
                t.a[i][art_index] = 1.0;
                t.basis[i] = art_index;
                art_index += 1;
            }
        }

        let max_iter = 50_000 + 50 * (m + width);

        // Phase 1: maximise -sum(artificials).
        if n_art > 0 {
            let mut c1 = vec![0.0; width - 1];
            for c in c1.iter_mut().skip(art_start) {
                *c = -1.0;
            }
            t.optimize(&c1, width - 1, max_iter)?;
            let infeas: f64 = (0..m)
                .filter(|&i| t.basis[i] >= art_start)
                .map(|i| t.a[i][rhs_col])
                .sum();
            if infeas > FEAS_TOL {
                return Err(LpFailure::Infeasible);
            }
            // Drive remaining artificials out of the basis.
            let mut i = 0;
            while i < t.a.len() {
                if t.basis[i] >= art_start {
                    let col = (0..art_start)
                        .filter(|&j| t.a[i][j].abs() > PIVOT_TOL)
                        .max_by(|&x, &y| t.a[i][x].abs().total_cmp(&t.a[i][y].abs()));
                    match col {
                        Some(j) => {
                            t.pivot(i, j);
                            i += 1;
                        }
                        None => {
                            // Redundant row.
                            t.a.remove(i);
                            t.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }

        // Phase 2 over structural and slack columns only.
        let mut c2 = vec![0.0; art_start];
        c2[..n].copy_from_slice(&self.cost);
        t.optimize(&c2, art_start, max_iter)?;

        let mut y = vec![0.0; n];
        for (i, &b) in t.basis.iter().enumerate() {
            if b < n {
                y[b] = t.a[i][rhs_col].max(0.0);
            }
        }
        let x: Vec<f64> = self
            .map
            .iter()
            .map(|m| match *m {
                ColumnMap::Shifted { col, lower } => lower + y[col],
                ColumnMap::Mirrored { col, upper } => upper - y[col],
                ColumnMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect();
        let objective = x.iter().zip(&lp.objective).map(|(a, c)| a * c).sum();
        let _ = self.offset;
        Ok(LpSolution { x, objective })
    }
}

struct Tableau {
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    rhs_col: usize,
}

impl Tableau {
    /// Maximises `cᵀx` over the first `ncols` columns. Pricing picks the
    /// largest reduced cost; after a run of degenerate pivots it switches to
    /// Bland's rule until the objective moves again, which rules out cycling.
    fn optimize(&mut self, c: &[f64], ncols: usize, max_iter: usize) -> std::result::Result<(), LpFailure> {
        // Reduced costs c_j - c_Bᵀ B⁻¹ A_j, kept up to date by pivoting.
        let mut rc = vec![0.0; ncols];
        rc.copy_from_slice(&c[..ncols]);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = if b < c.len() { c[b] } else { 0.0 };
            if cb != 0.0 {
                for (r, a) in rc.iter_mut().zip(&self.a[i]) {
                    *r -= cb * a;
                }
            }
        }
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run >= 50;
            let entering = if bland {
                (0..ncols).find(|&j| rc[j] > COST_TOL)
            } else {
                (0..ncols)
                    .filter(|&j| rc[j] > COST_TOL)
                    .max_by(|&x, &y| rc[x].total_cmp(&rc[y]))
            };
            let Some(j) = entering else { return Ok(()) };

            // Harris two-pass ratio test: find the loosest step that keeps
            // every row within a small tolerance, then take the largest pivot
            // among rows that block at or before it.
            let rhs = |i: usize| self.a[i][self.rhs_col].max(0.0);
            let theta_max = (0..self.a.len())
                .filter(|&i| self.a[i][j] > PIVOT_TOL)
                .map(|i| (rhs(i) + HARRIS_TOL) / self.a[i][j])
                .fold(f64::INFINITY, f64::min);
            if theta_max.is_infinite() {
                return Err(LpFailure::Unbounded);
            }
            let eligible: Vec<usize> = (0..self.a.len())
                .filter(|&i| self.a[i][j] > PIVOT_TOL && rhs(i) / self.a[i][j] <= theta_max)
                .collect();
            let biggest = eligible.iter().map(|&i| self.a[i][j]).fold(0.0, f64::max);
            let i = if bland {
                *eligible
                    .iter()
                    .filter(|&&i| self.a[i][j] >= 1e-3 * biggest)
                    .min_by_key(|&&i| self.basis[i])
                    .expect("nonempty")
            } else {
                *eligible
                    .iter()
                    .max_by(|&&x, &&y| self.a[x][j].total_cmp(&self.a[y][j]))
                    .expect("nonempty")
            };
            let ratio = rhs(i) / self.a[i][j];
            if ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(i, j);
            let f = rc[j];
            for (r, a) in rc.iter_mut().zip(&self.a[i]) {
                *r -= f * a;
            }
            rc[j] = 0.0;
        }
        Err(LpFailure::IterationLimit)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        self.a[r].iter_mut().for_each(|x| *x /= p);
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, pr) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                row[c] = 0.0;
                let b = &mut row[self.rhs_col];
                if *b < 0.0 && *b > -10.0 * HARRIS_TOL {
                    *b = 0.0;
                }
            }
        }
        self.basis[r] = c;
    }
}

/// Solves and maps failures into the crate error type.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let sol = lp.solve().map_err(Error::from)?;
    let v = lp.max_violation(&sol.x);
    if v > 1e-7 {
        return Err(Error::Lp(format!("solution violates constraints by {v:e}")));
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(3.0, 0.0, f64::INFINITY);
        let y = lp.add_var(5.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0)], Relation::Le, 4.0);
        lp.add_row(vec![(y, 2.0)], Relation::Le, 12.0);
        lp.add_row(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.objective, 36.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[1], 6.0, epsilon = 1e-9);
    }

    #[test]
    fn equalities_bounds_and_free_variables() {
        // min z s.t. z >= x - 1, z >= 1 - x, x in [0, 3], x + w = 2, w in [0, 0.5].
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 0.0, 3.0);
        let w = lp.add_var(0.0, 0.0, 0.5);
        let z = lp.add_var(-1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(z, 1.0), (x, -1.0)], Relation::Ge, -1.0);
        lp.add_row(vec![(z, 1.0), (x, 1.0)], Relation::Ge, 1.0);
        lp.add_row(vec![(x, 1.0), (w, 1.0)], Relation::Eq, 2.0);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.x[0], 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[2], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s.objective, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(vec![(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(lp.solve(), Err(LpFailure::Infeasible));

        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(lp.solve(), Err(LpFailure::Unbounded));
    }

    #[test]
    fn degenerate_redundant_equalities() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 1.0);
        lp.add_row(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 2.0);
        lp.add_row(vec![(x, 1.0)], Relation::Le, 0.0);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mirrored_upper_only() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, f64::NEG_INFINITY, 2.0);
        lp.add_row(vec![(x, 1.0)], Relation::Ge, -3.0);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.x[0], -3.0, epsilon = 1e-12);
    }
}
