//! Dense bounded-variable primal simplex (two phases).
//!
//! Columns are shifted so every lower bound is zero; upper bounds are handled by the ratio
//! test and bound flips instead of extra rows. Pricing is Dantzig's rule, falling back to the
//! smallest-index rule after a run of degenerate pivots so cycling cannot persist.

use thiserror::Error;

use crate::model::{Model, Sense};

pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;
pub const ITERATION_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective at the returned point; `NaN` unless `status` is `Optimal`.
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimplexError {
    #[error("iteration cap of {cap} reached ({rows} rows, {cols} columns, phase {phase})")]
    IterationCap {
        cap: usize,
        rows: usize,
        cols: usize,
        phase: u8,
    },
    #[error("invalid model: {0}")]
    Model(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ColMap {
    /// x = lower + x'
    Shift(usize),
    /// x = upper - x'
    Mirror(usize),
    /// x = x'+ - x'-
    Split(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Lower,
    Upper,
    Basic,
}

struct Tableau {
    m: usize,
    n: usize,
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    upper: Vec<f64>,
    blocked: Vec<bool>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, j: usize) -> f64 {
        self.a[r * self.n + j]
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.a[r * self.n..(r + 1) * self.n];
                for (dj, &t) in d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let n = self.n;
        let piv = self.a[r * n + q];
        {
            let row = &mut self.a[r * n..(r + 1) * n];
            for x in row.iter_mut() {
                *x /= piv;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.a[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + q];
            if f != 0.0 {
                let row = &mut self.a[i * n..(i + 1) * n];
                for (x, &p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let f = d[q];
        if f != 0.0 {
            for (x, &p) in d.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
            d[q] = 0.0;
        }
    }

    fn run(&mut self, cost: &[f64], phase: u8) -> Result<Outcome, SimplexError> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > ITERATION_CAP {
                return Err(SimplexError::IterationCap {
                    cap: ITERATION_CAP,
                    rows: self.m,
                    cols: self.n,
                    phase,
                });
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter: Option<usize> = None;
            let mut best = 0.0;
            for (j, &dj) in d.iter().enumerate().take(self.n) {
                if self.blocked[j] {
                    continue;
                }
                let score = match self.state[j] {
                    State::Basic => continue,
                    State::Lower if dj < -OPT_TOL => -dj,
                    State::Upper if dj > OPT_TOL => dj,
                    _ => continue,
                };
                if bland {
                    enter = Some(j);
                    break;
                }
                if score > best {
                    best = score;
                    enter = Some(j);
                }
            }
            let Some(q) = enter else {
                return Ok(Outcome::Optimal);
            };
            let dir = if self.state[q] == State::Lower {
                1.0
            } else {
                -1.0
            };

            let mut theta = f64::INFINITY;
            let mut leave: Option<usize> = None;
            for r in 0..self.m {
                let alpha = dir * self.at(r, q);
                let ratio = if alpha > PIVOT_TOL {
                    self.beta[r].max(0.0) / alpha
                } else if alpha < -PIVOT_TOL {
                    let ub = self.upper[self.basis[r]];
                    if !ub.is_finite() {
                        continue;
                    }
                    (ub - self.beta[r]).max(0.0) / -alpha
                } else {
                    continue;
                };
                let take = match leave {
                    None => true,
                    Some(l) => {
                        ratio < theta - 1e-12
                            || (ratio <= theta + 1e-12 && self.basis[r] < self.basis[l])
                    }
                };
                if take {
                    theta = ratio;
                    leave = Some(r);
                }
            }
            // A bound flip wins only when strictly shorter than every row ratio.
            if self.upper[q] < theta {
                theta = self.upper[q];
                leave = None;
            }
            if !theta.is_finite() {
                return Ok(Outcome::Unbounded);
            }
            if theta < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for r in 0..self.m {
                let t = self.at(r, q);
                if t != 0.0 {
                    self.beta[r] -= dir * t * theta;
                }
            }
            match leave {
                Some(r) => {
                    let alpha = dir * self.at(r, q);
                    let out = self.basis[r];
                    self.state[out] = if alpha > 0.0 {
                        State::Lower
                    } else {
                        State::Upper
                    };
                    let start = if dir > 0.0 { 0.0 } else { self.upper[q] };
                    self.beta[r] = start + dir * theta;
                    self.basis[r] = q;
                    self.state[q] = State::Basic;
                    self.pivot(r, q, &mut d);
                }
                None => {
                    self.state[q] = if dir > 0.0 {
                        State::Upper
                    } else {
                        State::Lower
                    };
                }
            }
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => 0.0,
            State::Upper => self.upper[j],
            State::Basic => {
                let r = self
                    .basis
                    .iter()
                    .position(|&b| b == j)
                    .expect("basic column has a row");
                self.beta[r]
            }
        }
    }
}

/// Solves the continuous relaxation of `model` using the given column bounds.
pub fn solve_with_bounds(
    model: &Model,
    lower: &[f64],
    upper: &[f64],
) -> Result<LpSolution, SimplexError> {
    let nv = model.num_vars();
    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        objective: f64::NAN,
        values: vec![],
        iterations,
    };
    for j in 0..nv {
        if lower[j] > upper[j] + FEAS_TOL {
            return Ok(infeasible(0));
        }
    }
    let mut maps = Vec::with_capacity(nv);
    let mut col_upper: Vec<f64> = Vec::new();
    for j in 0..nv {
        let (lo, hi) = (lower[j], upper[j].max(lower[j]));
        if lo.is_finite() {
            maps.push(ColMap::Shift(col_upper.len()));
            col_upper.push(hi - lo);
        } else if hi.is_finite() {
            maps.push(ColMap::Mirror(col_upper.len()));
            col_upper.push(f64::INFINITY);
        } else {
            maps.push(ColMap::Split(col_upper.len(), col_upper.len() + 1));
            col_upper.push(f64::INFINITY);
            col_upper.push(f64::INFINITY);
        }
    }
    let ns = col_upper.len();
    let m = model.num_constraints();

    // Structural block plus right-hand sides after the column substitution.
    let mut rows = vec![vec![0.0; ns]; m];
    let mut rhs = vec![0.0; m];
    for (r, c) in model.constraints.iter().enumerate() {
        let mut b = c.rhs;
        for &(v, a) in &c.terms {
            match maps[v] {
                ColMap::Shift(k) => {
                    rows[r][k] += a;
                    b -= a * lower[v];
                }
                ColMap::Mirror(k) => {
                    rows[r][k] -= a;
                    b -= a * upper[v];
                }
                ColMap::Split(p, q) => {
                    rows[r][p] += a;
                    rows[r][q] -= a;
                }
            }
        }
        rhs[r] = b;
    }
    let mut cost = vec![0.0; ns];
    let mut offset = 0.0;
    for &(v, a) in &model.objective {
        match maps[v] {
            ColMap::Shift(k) => {
                cost[k] += a;
                offset += a * lower[v];
            }
            ColMap::Mirror(k) => {
                cost[k] -= a;
                offset += a * upper[v];
            }
            ColMap::Split(p, q) => {
                cost[p] += a;
                cost[q] -= a;
            }
        }
    }

    // Slack and artificial columns.
    let mut slack_of = vec![None; m];
    let mut n = ns;
    for (r, c) in model.constraints.iter().enumerate() {
        if c.sense != Sense::Eq {
            slack_of[r] = Some(n);
            n += 1;
        }
    }
    let mut sign = vec![1.0; m];
    let mut art_of = vec![None; m];
    let mut basis = vec![0usize; m];
    for (r, c) in model.constraints.iter().enumerate() {
        if rhs[r] < 0.0 {
            sign[r] = -1.0;
        }
        let slack_coef = match c.sense {
            Sense::Le => sign[r],
            Sense::Ge => -sign[r],
            Sense::Eq => 0.0,
        };
        if slack_coef > 0.0 {
            basis[r] = slack_of[r].unwrap();
        } else {
            art_of[r] = Some(n);
            basis[r] = n;
            n += 1;
        }
    }

    let mut a = vec![0.0; m * n];
    for r in 0..m {
        let base = r * n;
        for k in 0..ns {
            a[base + k] = sign[r] * rows[r][k];
        }
        if let Some(s) = slack_of[r] {
            let coef = if model.constraints[r].sense == Sense::Le {
                1.0
            } else {
                -1.0
            };
            a[base + s] = sign[r] * coef;
        }
        if let Some(t) = art_of[r] {
            a[base + t] = 1.0;
        }
    }
    let mut upper_all = col_upper.clone();
    upper_all.resize(n, f64::INFINITY);
    let mut state = vec![State::Lower; n];
    for &b in &basis {
        state[b] = State::Basic;
    }
    let beta: Vec<f64> = (0..m).map(|r| sign[r] * rhs[r]).collect();
    let mut tab = Tableau {
        m,
        n,
        a,
        beta,
        basis,
        state,
        upper: upper_all,
        blocked: vec![false; n],
        iterations: 0,
    };

    let has_art = art_of.iter().any(Option::is_some);
    if has_art {
        let mut c1 = vec![0.0; n];
        for t in art_of.iter().flatten() {
            c1[*t] = 1.0;
        }
        tab.run(&c1, 1)?;
        let infeas: f64 = art_of.iter().flatten().map(|&t| tab.value(t)).sum();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        if infeas > FEAS_TOL * scale {
            return Ok(infeasible(tab.iterations));
        }
        for &t in art_of.iter().flatten() {
            tab.upper[t] = 0.0;
            tab.blocked[t] = true;
            if tab.state[t] == State::Basic {
                let r = tab.basis.iter().position(|&b| b == t).unwrap();
                tab.beta[r] = 0.0;
            }
        }
    }
    let mut c2 = cost.clone();
    c2.resize(n, 0.0);
    if let Outcome::Unbounded = tab.run(&c2, 2)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NAN,
            values: vec![],
            iterations: tab.iterations,
        });
    }

    let mut x = vec![0.0; n];
    for (j, xj) in x.iter_mut().enumerate() {
        *xj = tab.value(j);
    }
    let mut values = vec![0.0; nv];
    for j in 0..nv {
        values[j] = match maps[j] {
            ColMap::Shift(k) => lower[j] + x[k],
            ColMap::Mirror(k) => upper[j] - x[k],
            ColMap::Split(p, q) => x[p] - x[q],
        };
    }
    let objective = offset + cost.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        values,
        iterations: tab.iterations,
    })
}

/// Solves `model` as a linear program, treating every column as continuous within its bounds.
pub fn simplex_solve(model: &Model) -> Result<LpSolution, SimplexError> {
    model
        .validate()
        .map_err(|e| SimplexError::Model(e.to_string()))?;
    let (lo, hi): (Vec<f64>, Vec<f64>) =
        model.variables.iter().map(|v| v.effective_bounds()).unzip();
    solve_with_bounds(model, &lo, &hi)
}

/// LP relaxation: binaries relaxed to their [0, 1] bounds, fixings kept.
pub fn lp_relax(model: &Model) -> Result<LpSolution, SimplexError> {
    simplex_solve(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinExpr;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-7
    }

    #[test]
    fn single_bound_row() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint("r", LinExpr::var(x), Sense::Ge, LinExpr::constant(3.0));
        m.set_objective(LinExpr::var(x));
        let s = simplex_solve(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.objective, 3.0));
    }

    #[test]
    fn classic_two_variable() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.add_row("a", vec![(x, 1.0)], Sense::Le, 4.0);
        m.add_row("b", vec![(y, 2.0)], Sense::Le, 12.0);
        m.add_row("c", vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        m.set_objective(LinExpr::term(x, -3.0) + LinExpr::term(y, -5.0));
        let s = simplex_solve(&m).unwrap();
        assert!(close(s.objective, -36.0));
        assert!(close(s.values[x], 2.0) && close(s.values[y], 6.0));
    }

    #[test]
    fn infeasible_detected() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 1.0);
        m.add_row("r", vec![(x, 1.0)], Sense::Ge, 2.0);
        m.set_objective(LinExpr::var(x));
        assert_eq!(simplex_solve(&m).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.add_row("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        m.set_objective(LinExpr::term(y, -1.0));
        assert_eq!(simplex_solve(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities_terminate() {
        // Three copies of the same equality plus a degenerate vertex.
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        let z = m.add_continuous("z", 0.0, f64::INFINITY);
        for k in 0..3 {
            m.add_row(
                format!("e{k}"),
                vec![(x, 1.0), (y, 1.0), (z, 1.0)],
                Sense::Eq,
                1.0,
            );
        }
        m.add_row("d1", vec![(x, 1.0), (y, -1.0)], Sense::Le, 0.0);
        m.add_row("d2", vec![(y, 1.0), (z, -1.0)], Sense::Le, 0.0);
        m.set_objective(LinExpr::term(x, -1.0) + LinExpr::term(y, -1.0));
        let s = simplex_solve(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.objective, -2.0 / 3.0));
    }

    #[test]
    fn free_and_mirrored_columns() {
        // min x + y with x free, y <= 5 (no lower), x - y >= -2, x + y >= 1
        let mut m = Model::new();
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = m.add_continuous("y", f64::NEG_INFINITY, 5.0);
        m.add_row("a", vec![(x, 1.0), (y, -1.0)], Sense::Ge, -2.0);
        m.add_row("b", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 1.0);
        m.set_objective(LinExpr::var(x) + LinExpr::var(y));
        let s = simplex_solve(&m).unwrap();
        assert!(close(s.objective, 1.0));
        assert!(m.violations(&s.values, 1e-7).is_empty());
    }

    #[test]
    fn fixed_column_respected() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        let y = m.add_continuous("y", 0.0, 10.0);
        m.fix(x, 4.0);
        m.add_row("r", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 6.0);
        m.set_objective(LinExpr::var(y));
        let s = simplex_solve(&m).unwrap();
        assert!(close(s.values[x], 4.0) && close(s.objective, 2.0));
    }

    #[test]
    fn bound_flip_path() {
        // max x + y with x, y in [0, 1] and no rows binding.
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 1.0);
        let y = m.add_continuous("y", 0.0, 1.0);
        m.add_row("r", vec![(x, 1.0), (y, 1.0)], Sense::Le, 5.0);
        m.set_objective(LinExpr::term(x, -1.0) + LinExpr::term(y, -1.0));
        let s = simplex_solve(&m).unwrap();
        assert!(close(s.objective, -2.0));
    }
}
