//! Best-bound branch-and-bound over the binary and integer columns of a model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::model::Model;
use crate::simplex::{solve_with_bounds, LpStatus, SimplexError};

const INT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Default)]
pub struct MipOptions {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Every feasible objective value is an integer, so bounds may be rounded up.
    pub integral_objective: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// A limit stopped the search; `objective` holds the incumbent if any.
    LimitReached,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MipResult {
    pub status: MipStatus,
    pub objective: Option<f64>,
    /// Best proven lower bound on the optimum.
    pub bound: f64,
    pub values: Vec<f64>,
    pub nodes: usize,
}

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn prunable(bound: f64, incumbent: Option<f64>, integral: bool) -> bool {
    match incumbent {
        None => false,
        Some(best) if integral => (bound - 1e-6).ceil() >= best - 1e-6,
        Some(best) => bound >= best - 1e-9,
    }
}

/// Minimizes `model` with its binary and integer columns restricted to integer values.
pub fn mip_solve(model: &Model, options: &MipOptions) -> Result<MipResult, SimplexError> {
    model
        .validate()
        .map_err(|e| SimplexError::Model(e.to_string()))?;
    let start = Instant::now();
    let integers: Vec<usize> = model.integers().collect();
    let (lower, upper): (Vec<f64>, Vec<f64>) =
        model.variables.iter().map(|v| v.effective_bounds()).unzip();

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        lower,
        upper,
    });

    while let Some(node) = heap.pop() {
        let best = incumbent.as_ref().map(|(o, _)| *o);
        if prunable(node.bound, best, options.integral_objective) {
            continue;
        }
        let out_of_nodes = options.node_limit.is_some_and(|k| nodes >= k);
        let out_of_time = options.time_limit.is_some_and(|t| start.elapsed() >= t);
        if out_of_nodes || out_of_time {
            let bound = node
                .bound
                .min(heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min));
            let bound = match best {
                Some(b) => bound.min(b),
                None => bound,
            };
            let (objective, values) = match incumbent {
                Some((o, v)) => (Some(o), v),
                None => (None, vec![]),
            };
            return Ok(MipResult {
                status: MipStatus::LimitReached,
                objective,
                bound,
                values,
                nodes,
            });
        }
        nodes += 1;
        let lp = solve_with_bounds(model, &node.lower, &node.upper)?;
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Ok(MipResult {
                    status: MipStatus::Unbounded,
                    objective: None,
                    bound: f64::NEG_INFINITY,
                    values: vec![],
                    nodes,
                })
            }
            LpStatus::Optimal => {}
        }
        if prunable(lp.objective, best, options.integral_objective) {
            continue;
        }
        let mut branch: Option<(usize, f64)> = None;
        for &b in &integers {
            let v = lp.values[b];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > INT_TOL && branch.is_none_or(|(_, f)| frac > f + 1e-12) {
                branch = Some((b, frac));
            }
        }
        match branch {
            None => {
                let mut values = lp.values;
                for &b in &integers {
                    values[b] = values[b].round();
                }
                log::debug!("mip incumbent {} after {} nodes", lp.objective, nodes);
                incumbent = Some((lp.objective, values));
            }
            Some((b, _)) => {
                let v = lp.values[b];
                let mut down_hi = node.upper.clone();
                down_hi[b] = v.floor();
                let mut up_lo = node.lower.clone();
                up_lo[b] = v.ceil();
                for (lo, hi) in [(node.lower.clone(), down_hi), (up_lo, node.upper.clone())] {
                    seq += 1;
                    heap.push(Node {
                        bound: lp.objective,
                        seq,
                        lower: lo,
                        upper: hi,
                    });
                }
            }
        }
    }
    Ok(match incumbent {
        Some((o, v)) => MipResult {
            status: MipStatus::Optimal,
            objective: Some(o),
            bound: o,
            values: v,
            nodes,
        },
        None => MipResult {
            status: MipStatus::Infeasible,
            objective: None,
            bound: f64::INFINITY,
            values: vec![],
            nodes,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, Sense};

    #[test]
    fn knapsack() {
        // max 10a + 13b + 7c, 4a + 6b + 3c <= 9 -> a + b infeasible (10), best a + c = 17
        let mut m = Model::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        let c = m.add_binary("c");
        m.add_row("cap", vec![(a, 4.0), (b, 6.0), (c, 3.0)], Sense::Le, 9.0);
        m.set_objective(LinExpr::term(a, -10.0) + LinExpr::term(b, -13.0) + LinExpr::term(c, -7.0));
        let r = mip_solve(&m, &MipOptions::default()).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        assert!((r.objective.unwrap() + 20.0).abs() < 1e-7);
        assert_eq!((r.values[a], r.values[b], r.values[c]), (0.0, 1.0, 1.0));
    }

    #[test]
    fn general_integer_branching() {
        // min x s.t. 2x >= 5, x integer in [0, 10] -> 3
        let mut m = Model::new();
        let x = m.add_var("x", crate::model::VarKind::Integer, 0.0, 10.0);
        m.add_row("r", vec![(x, 2.0)], Sense::Ge, 5.0);
        m.set_objective(LinExpr::var(x));
        let r = mip_solve(&m, &MipOptions::default()).unwrap();
        assert_eq!(r.objective, Some(3.0));
    }

    #[test]
    fn infeasible_parity() {
        let mut m = Model::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_row("half", vec![(a, 2.0), (b, 2.0)], Sense::Eq, 1.0);
        m.set_objective(LinExpr::var(a));
        assert_eq!(
            mip_solve(&m, &MipOptions::default()).unwrap().status,
            MipStatus::Infeasible
        );
    }

    #[test]
    fn node_limit_reports_bound() {
        let mut m = Model::new();
        let xs: Vec<_> = (0..6).map(|i| m.add_binary(format!("x{i}"))).collect();
        m.add_row(
            "odd",
            xs.iter().map(|&x| (x, 2.0)).collect(),
            Sense::Ge,
            5.0,
        );
        m.set_objective(xs.iter().fold(LinExpr::new(), |e, &x| e + LinExpr::var(x)));
        let r = mip_solve(
            &m,
            &MipOptions {
                node_limit: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.status, MipStatus::LimitReached);
        assert!(r.bound <= 3.0 + 1e-9);
        let full = mip_solve(
            &m,
            &MipOptions {
                integral_objective: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(full.objective, Some(3.0));
    }
}
