//! Exact cyclic hoist scheduling by branch-and-bound over move orders.
//!
//! A move order fixes every disjunction, leaving difference constraints
//! `t_v >= t_u + a + b*C`. The minimal integer C for an order is found by
//! longest-path cycle detection: each positive cycle with total `A + B*C`
//! either raises C to `ceil(A / -B)` or proves the order infeasible.

use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{div_ceil, Instance, LoadConfig};
use crate::schedule::Schedule;

const UNREACHED: i64 = i64::MIN / 4;
const NO_LIMIT: i64 = i64::MAX / 8;

/// Cycle time, move order and start times of the best schedule so far.
type Incumbent = (i64, Vec<usize>, Vec<i64>);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Forces the cycle to end when the hoist returns after the latest move.
    pub restricted: bool,
    /// Enforces the tank-sharing rows for operations in the same tank.
    pub multifunction: bool,
    /// Overrides the instance's load configuration.
    pub load_config: Option<LoadConfig>,
    /// Overrides the instance's carrier limit.
    pub carrier_limit: Option<u32>,
    /// Worker threads; 1 runs the reference sequential search.
    pub threads: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            restricted: false,
            multifunction: true,
            load_config: None,
            carrier_limit: None,
            threads: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub time: Duration,
    pub nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            time: Duration::from_secs(60),
            nodes: 10_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Budget ran out with an incumbent.
    Feasible,
    Infeasible,
    /// Budget ran out before any schedule was found.
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<i64>,
    pub schedule: Option<Schedule>,
    /// Move order of the certificate, starting with move 0.
    pub order: Option<Vec<usize>>,
    /// Proven lower bound on the optimum.
    pub bound: i64,
    pub nodes: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("order must be a permutation of the moves starting with move 0")]
    BadOrder,
    #[error("brute force is limited to 9 free moves, got {0}")]
    TooLarge(usize),
    #[error("degree must be at least 1")]
    ZeroDegree,
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    from: usize,
    to: usize,
    a: i64,
    b: i64,
}

#[derive(Clone, Debug)]
struct Link {
    from: usize,
    to: usize,
    lower: i64,
    upper: Option<i64>,
    mlo: u32,
    mhi: u32,
}

/// The forward cyclic distance from `t_u + off_u` to `t_v + off_v` is at least `gap`; `w` folds the offsets in.
#[derive(Clone, Copy, Debug)]
struct Gap {
    u: usize,
    v: usize,
    w: i64,
}

struct Problem {
    moves: usize,
    ret: Vec<i64>,
    g: Vec<Vec<i64>>,
    links: Vec<Link>,
    gaps: Vec<Gap>,
    extra: Vec<Edge>,
    tuples: Vec<[usize; 4]>,
    /// Move (p, 0) for each copy, in required entry order.
    entries: Vec<usize>,
    degree: usize,
    clo: i64,
    chi: i64,
    restricted: bool,
    carrier_limit: Option<u32>,
}

impl Problem {
    fn new(inst: &Instance, r: usize, options: &SolveOptions) -> Self {
        let mut inst = inst.clone();
        if let Some(lc) = options.load_config {
            inst.load_config = lc;
        }
        let n = inst.num_ops;
        let ops = n + 1;
        let moves = r * ops;
        let op = |u: usize| u % ops;
        let id = |p: usize, i: usize| p * ops + i;
        let ret: Vec<i64> = (0..moves)
            .map(|u| inst.d(op(u)) + inst.e(op(u) + 1, 0))
            .collect();
        let g: Vec<Vec<i64>> = (0..moves)
            .map(|u| {
                (0..moves)
                    .map(|v| (inst.d(op(u)) + inst.e(op(u) + 1, op(v))).max(1))
                    .collect()
            })
            .collect();
        let mut links = Vec::new();
        for p in 0..r {
            for i in 1..=n {
                links.push(Link {
                    from: id(p, i - 1),
                    to: id(p, i),
                    lower: inst.d(i - 1) + inst.soak_min[i],
                    upper: inst.soak_max[i].finite().map(|u| -inst.d(i - 1) - u),
                    mlo: inst.min_level(i),
                    mhi: inst.max_level(i),
                });
            }
        }
        let (l0, ln1, dn) = (inst.soak_min[0], inst.soak_min[n + 1], inst.d(n));
        let mut gaps = Vec::new();
        let mut extra = Vec::new();
        let mut clo = 1;
        let mut chi = NO_LIMIT;
        match (inst.load_config, r) {
            (LoadConfig::Dissociated, 1) => {
                clo = clo.max(l0).max(ln1);
                if let Some(u) = inst.soak_max[0].min(inst.soak_max[n + 1]).finite() {
                    chi = u;
                }
            }
            (LoadConfig::Dissociated, _) => {
                for p in 0..r {
                    for q in 0..r {
                        if p != q {
                            gaps.push(Gap {
                                u: id(p, 0),
                                v: id(q, 0),
                                w: l0,
                            });
                            gaps.push(Gap {
                                u: id(p, n),
                                v: id(q, n),
                                w: ln1,
                            });
                        }
                    }
                }
            }
            (LoadConfig::Associated, _) => {
                for p in 0..r {
                    for q in 0..r {
                        gaps.push(Gap {
                            u: id(p, n),
                            v: id(q, 0),
                            w: dn + l0 + ln1,
                        });
                    }
                }
                if let (1, Some(u0)) = (r, inst.soak_max[0].finite()) {
                    extra.push(Edge {
                        from: 0,
                        to: n,
                        a: -dn - u0,
                        b: 1,
                    });
                }
            }
        }
        if r == 1 {
            clo = clo.max(inst.lower_bound());
        }
        let mut tuples = Vec::new();
        if options.multifunction {
            for ((p, i), (q, j)) in crate::schedule::occupancy_pairs(&inst, r) {
                tuples.push([id(p, i - 1), id(p, i), id(q, j - 1), id(q, j)]);
            }
        }
        Problem {
            moves,
            ret,
            g,
            links,
            gaps,
            extra,
            tuples,
            entries: (0..r).map(|p| id(p, 0)).collect(),
            degree: r,
            clo,
            chi,
            restricted: options.restricted,
            carrier_limit: options.carrier_limit.or(inst.carrier_limit),
        }
    }

    fn positions(&self, prefix: &[usize]) -> Vec<Option<usize>> {
        let mut pos = vec![None; self.moves];
        for (k, &u) in prefix.iter().enumerate() {
            pos[u] = Some(k);
        }
        pos
    }

    /// Whether `u` is known to precede `v` (Some(true)), to follow it (Some(false)), or neither.
    fn before(pos: &[Option<usize>], u: usize, v: usize) -> Option<bool> {
        match (pos[u], pos[v]) {
            (Some(a), Some(b)) => Some(a < b),
            (Some(_), None) => Some(true),
            (None, Some(_)) => Some(false),
            (None, None) => None,
        }
    }

    /// For a tuple that must appear as a rotation, the undecided members in forced order,
    /// or None when the decided members already break the rotation.
    fn rotation_tail(tuple: &[usize; 4], pos: &[Option<usize>]) -> Option<Vec<usize>> {
        let mut decided: Vec<(usize, usize)> = (0..4)
            .filter_map(|k| pos[tuple[k]].map(|p| (p, k)))
            .collect();
        if decided.is_empty() {
            return Some(vec![]);
        }
        decided.sort();
        let s = decided[0].1;
        for (step, &(_, k)) in decided.iter().enumerate() {
            if k != (s + step) % 4 {
                return None;
            }
        }
        Some(
            (decided.len()..4)
                .map(|step| tuple[(s + step) % 4])
                .collect(),
        )
    }

    fn carriers_lower(&self, pos: &[Option<usize>], levels: Option<&[u32]>) -> u32 {
        let mut total = self.degree as u32;
        for (k, l) in self.links.iter().enumerate() {
            let m = levels.map_or(l.mlo, |lv| lv[k]);
            let wrap = Self::before(pos, l.from, l.to) == Some(false);
            total += m - 1 + u32::from(wrap);
        }
        total
    }

    /// Structural checks on a prefix that do not need C.
    fn admissible(&self, pos: &[Option<usize>]) -> bool {
        if self
            .tuples
            .iter()
            .any(|t| Self::rotation_tail(t, pos).is_none())
        {
            return false;
        }
        match self.carrier_limit {
            Some(k) => self.carriers_lower(pos, None) <= k,
            None => true,
        }
    }

    fn edges(&self, prefix: &[usize], pos: &[Option<usize>], levels: Option<&[u32]>) -> Vec<Edge> {
        let mut e = Vec::with_capacity(self.moves * 4);
        for w in prefix.windows(2) {
            e.push(Edge {
                from: w[0],
                to: w[1],
                a: self.g[w[0]][w[1]],
                b: 0,
            });
        }
        let last = *prefix.last().unwrap();
        if prefix.len() == self.moves {
            e.push(Edge {
                from: last,
                to: 0,
                a: self.g[last][0],
                b: -1,
            });
            if self.restricted {
                e.push(Edge {
                    from: 0,
                    to: last,
                    a: -self.ret[last],
                    b: 1,
                });
            }
        } else {
            let rest: Vec<usize> = (0..self.moves).filter(|&v| pos[v].is_none()).collect();
            let mut work = 0;
            for &v in rest.iter().chain([0].iter()) {
                let best = rest
                    .iter()
                    .chain([last].iter())
                    .filter(|&&w| w != v)
                    .map(|&w| self.g[w][v])
                    .min();
                work += best.unwrap_or(0);
                if v != 0 {
                    e.push(Edge {
                        from: last,
                        to: v,
                        a: self.g[last][v],
                        b: 0,
                    });
                }
            }
            e.push(Edge {
                from: last,
                to: 0,
                a: work,
                b: -1,
            });
        }
        for u in 0..self.moves {
            e.push(Edge {
                from: u,
                to: 0,
                a: self.ret[u],
                b: -1,
            });
        }
        for (k, l) in self.links.iter().enumerate() {
            let (mlo, mhi) = match levels {
                Some(lv) => (lv[k], lv[k]),
                None => (l.mlo, l.mhi),
            };
            let (klo, khi) = match Self::before(pos, l.from, l.to) {
                Some(true) => (mlo - 1, mhi - 1),
                Some(false) => (mlo, mhi),
                None => (mlo - 1, mhi),
            };
            e.push(Edge {
                from: l.from,
                to: l.to,
                a: l.lower,
                b: -(khi as i64),
            });
            if let Some(up) = l.upper {
                e.push(Edge {
                    from: l.to,
                    to: l.from,
                    a: up,
                    b: klo as i64,
                });
            }
        }
        for gp in &self.gaps {
            let b = if Self::before(pos, gp.u, gp.v) == Some(true) {
                0
            } else {
                -1
            };
            e.push(Edge {
                from: gp.u,
                to: gp.v,
                a: gp.w,
                b,
            });
        }
        e.extend(self.extra.iter().copied());
        for t in &self.tuples {
            if let Some(tail) = Self::rotation_tail(t, pos) {
                for w in tail.windows(2) {
                    e.push(Edge {
                        from: w[0],
                        to: w[1],
                        a: self.g[w[0]][w[1]],
                        b: 0,
                    });
                }
            }
        }
        e
    }

    /// Longest paths from move 0 at cycle time c, or a positive cycle's (A, B).
    fn longest(&self, edges: &[Edge], c: i64) -> Result<Vec<i64>, (i64, i64)> {
        let nv = self.moves;
        let mut dist = vec![UNREACHED; nv];
        let mut pred = vec![usize::MAX; nv];
        dist[0] = 0;
        let mut changed_at = None;
        for round in 0..=nv {
            let mut changed = None;
            for (k, ed) in edges.iter().enumerate() {
                if dist[ed.from] == UNREACHED {
                    continue;
                }
                let cand = dist[ed.from] + ed.a + ed.b * c;
                if cand > dist[ed.to] {
                    dist[ed.to] = cand;
                    pred[ed.to] = k;
                    changed = Some(ed.to);
                }
            }
            match changed {
                None => return Ok(dist),
                Some(v) if round == nv => changed_at = Some(v),
                Some(_) => {}
            }
        }
        let mut x = changed_at.unwrap();
        for _ in 0..nv {
            x = edges[pred[x]].from;
        }
        let (mut a, mut b) = (0, 0);
        let mut y = x;
        loop {
            let ed = edges[pred[y]];
            a += ed.a;
            b += ed.b;
            y = ed.from;
            if y == x {
                break;
            }
        }
        Err((a, b))
    }

    /// Smallest integer C >= start admitting the edges, with the witness times.
    fn min_c(&self, edges: &[Edge], start: i64) -> Option<(i64, Vec<i64>)> {
        let mut c = start.max(self.clo);
        loop {
            if c > self.chi {
                return None;
            }
            match self.longest(edges, c) {
                Ok(d) => return Some((c, d)),
                Err((a, b)) if b < 0 => c = (c + 1).max(div_ceil(a, -b)),
                Err(_) => return None,
            }
        }
    }

    fn level_combos(&self) -> Vec<Vec<u32>> {
        let mut combos = vec![vec![]];
        for l in &self.links {
            combos = combos
                .into_iter()
                .flat_map(|c: Vec<u32>| {
                    (l.mlo..=l.mhi).map(move |m| {
                        let mut c = c.clone();
                        c.push(m);
                        c
                    })
                })
                .collect();
        }
        combos
    }

    fn has_choices(&self) -> bool {
        self.links.iter().any(|l| l.mlo < l.mhi)
    }

    /// Exact minimum over capacity levels for a complete order, never below `start`.
    fn leaf(&self, order: &[usize], start: i64, cutoff: i64) -> Option<(i64, Vec<i64>)> {
        let pos = self.positions(order);
        if !self.admissible_complete(&pos) {
            return None;
        }
        if !self.has_choices() {
            if self
                .carrier_limit
                .is_some_and(|k| self.carriers_lower(&pos, None) > k)
            {
                return None;
            }
            return self.min_c(&self.edges(order, &pos, None), start);
        }
        let mut best: Option<(i64, Vec<i64>)> = None;
        for lv in self.level_combos() {
            if self
                .carrier_limit
                .is_some_and(|k| self.carriers_lower(&pos, Some(&lv)) > k)
            {
                continue;
            }
            if let Some((c, d)) = self.min_c(&self.edges(order, &pos, Some(&lv)), start) {
                if c < cutoff && best.as_ref().is_none_or(|(b, _)| c < *b) {
                    best = Some((c, d));
                }
            }
        }
        best
    }

    fn admissible_complete(&self, pos: &[Option<usize>]) -> bool {
        let entries_sorted = self.entries.windows(2).all(|w| pos[w[0]] < pos[w[1]]);
        entries_sorted
            && self
                .tuples
                .iter()
                .all(|t| Self::rotation_tail(t, pos).is_some())
    }

    fn schedule(&self, c: i64, dist: &[i64]) -> Schedule {
        Schedule {
            cycle_time: c,
            degree: self.degree,
            start: dist.to_vec(),
        }
    }

    fn children(&self, prefix: &[usize], pos: &[Option<usize>], bound: i64) -> Vec<usize> {
        let mut cands: Vec<usize> = (0..self.moves)
            .filter(|&v| pos[v].is_none())
            .filter(|&v| {
                // copies enter in index order
                match self.entries.iter().position(|&e| e == v) {
                    Some(p) if p > 0 => pos[self.entries[p - 1]].is_some(),
                    _ => true,
                }
            })
            .collect();
        let edges = self.edges(prefix, pos, None);
        let earliest = self.longest(&edges, bound).ok();
        let latest = earliest.as_ref().map(|_| self.latest(&edges, bound));
        let key = |v: usize| {
            let l = latest.as_ref().map_or(0, |l| l[v]);
            let e = earliest.as_ref().map_or(0, |e| e[v]);
            (l, e, v)
        };
        cands.sort_by_key(|&v| key(v));
        cands
    }

    /// Latest start of each move relative to move 0 at cycle time c.
    fn latest(&self, edges: &[Edge], c: i64) -> Vec<i64> {
        let nv = self.moves;
        let mut h = vec![UNREACHED; nv];
        h[0] = 0;
        for _ in 0..nv {
            let mut changed = false;
            for ed in edges {
                if h[ed.to] == UNREACHED {
                    continue;
                }
                let cand = h[ed.to] + ed.a + ed.b * c;
                if cand > h[ed.from] {
                    h[ed.from] = cand;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        h.into_iter()
            .map(|x| if x == UNREACHED { NO_LIMIT } else { -x })
            .collect()
    }
}

struct Shared {
    incumbent: AtomicI64,
    best: Mutex<Option<Incumbent>>,
    nodes: AtomicU64,
    deadline: Instant,
    node_cap: u64,
}

impl Shared {
    fn offer(&self, c: i64, order: &[usize], dist: Vec<i64>) {
        let mut best = self.best.lock().unwrap();
        let better = match &*best {
            None => true,
            Some((b, o, _)) => c < *b || (c == *b && order < o.as_slice()),
        };
        if better {
            *best = Some((c, order.to_vec(), dist));
            self.incumbent.fetch_min(c, Ordering::SeqCst);
        }
    }
}

struct Frame {
    prefix: Vec<usize>,
    bound: i64,
}

/// Depth-first search below `root`; returns the smallest bound among unexplored nodes if stopped.
fn dfs(pb: &Problem, root: Frame, sh: &Shared) -> Option<i64> {
    let mut stack = vec![root];
    while let Some(fr) = stack.pop() {
        let count = sh.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if count > sh.node_cap || (count.is_multiple_of(256) && Instant::now() >= sh.deadline) {
            let rest = stack.iter().map(|f| f.bound).chain([fr.bound]).min();
            return rest;
        }
        if fr.bound >= sh.incumbent.load(Ordering::SeqCst) {
            continue;
        }
        let pos = pb.positions(&fr.prefix);
        if !pb.admissible(&pos) {
            continue;
        }
        let inc = sh.incumbent.load(Ordering::SeqCst);
        if fr.prefix.len() == pb.moves {
            if let Some((c, d)) = pb.leaf(&fr.prefix, fr.bound, inc) {
                if c < inc {
                    sh.offer(c, &fr.prefix, d);
                }
            }
            continue;
        }
        let edges = pb.edges(&fr.prefix, &pos, None);
        let Some((bound, _)) = pb.min_c(&edges, fr.bound) else {
            continue;
        };
        if bound >= inc {
            continue;
        }
        let kids = pb.children(&fr.prefix, &pos, bound);
        for &v in kids.iter().rev() {
            let mut prefix = fr.prefix.clone();
            prefix.push(v);
            stack.push(Frame { prefix, bound });
        }
    }
    None
}

fn run(inst: &Instance, r: usize, options: &SolveOptions, budget: &Budget) -> SolveResult {
    let started = Instant::now();
    let pb = Problem::new(inst, r, options);
    let sh = Shared {
        incumbent: AtomicI64::new(NO_LIMIT),
        best: Mutex::new(None),
        nodes: AtomicU64::new(0),
        deadline: started + budget.time,
        node_cap: budget.nodes,
    };
    let identity: Vec<usize> = (0..pb.moves).collect();
    if let Some((c, d)) = pb.leaf(&identity, pb.clo, NO_LIMIT) {
        sh.offer(c, &identity, d);
    }
    let root = Frame {
        prefix: vec![0],
        bound: pb.clo,
    };
    let stopped = if options.threads > 1 && pb.moves > 2 {
        let pos = pb.positions(&root.prefix);
        let kids = pb.children(&root.prefix, &pos, pb.clo);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            kids.par_iter()
                .filter_map(|&v| {
                    dfs(
                        &pb,
                        Frame {
                            prefix: vec![0, v],
                            bound: pb.clo,
                        },
                        &sh,
                    )
                })
                .min()
        })
    } else {
        dfs(&pb, root, &sh)
    };
    let best = sh.best.into_inner().unwrap();
    let nodes = sh.nodes.load(Ordering::Relaxed);
    let elapsed = started.elapsed();
    let (objective, schedule, order) = match best {
        Some((c, o, d)) => (Some(c), Some(pb.schedule(c, &d)), Some(o)),
        None => (None, None, None),
    };
    let (status, bound) = match (stopped, objective) {
        (None, Some(c)) => (SolveStatus::Optimal, c),
        (None, None) => (SolveStatus::Infeasible, NO_LIMIT),
        (Some(b), Some(c)) => (SolveStatus::Feasible, b.min(c)),
        (Some(b), None) => (SolveStatus::BudgetExhausted, b),
    };
    log::info!("solve r={r}: {status:?} objective={objective:?} nodes={nodes} in {elapsed:?}");
    SolveResult {
        status,
        objective,
        schedule,
        order,
        bound,
        nodes,
        elapsed,
    }
}

/// Optimal simple cycle (one carrier enters per cycle).
pub fn solve_simple_cycle(inst: &Instance, options: &SolveOptions, budget: &Budget) -> SolveResult {
    run(inst, 1, options, budget)
}

/// Optimal r-degree cycle: r carriers enter per cycle, in copy order.
pub fn solve_multidegree(
    inst: &Instance,
    r: usize,
    options: &SolveOptions,
    budget: &Budget,
) -> Result<SolveResult, SolverError> {
    if r == 0 {
        return Err(SolverError::ZeroDegree);
    }
    Ok(run(inst, r, options, budget))
}

fn check_order(pb: &Problem, order: &[usize]) -> Result<(), SolverError> {
    let mut seen = vec![false; pb.moves];
    if order.len() != pb.moves || order.first() != Some(&0) {
        return Err(SolverError::BadOrder);
    }
    for &u in order {
        if u >= pb.moves || std::mem::replace(&mut seen[u], true) {
            return Err(SolverError::BadOrder);
        }
    }
    Ok(())
}

/// A schedule with cycle time `c` that executes moves in `order`, if one exists.
pub fn feasible_at_c(
    inst: &Instance,
    order: &[usize],
    c: i64,
    options: &SolveOptions,
) -> Result<Option<Schedule>, SolverError> {
    let pb = Problem::new(inst, 1, options);
    check_order(&pb, order)?;
    let pos = pb.positions(order);
    if c < 1 || c > pb.chi || !pb.admissible_complete(&pos) {
        return Ok(None);
    }
    let lo = match options.load_config.unwrap_or(inst.load_config) {
        LoadConfig::Dissociated => inst.soak_min[0].max(inst.soak_min[inst.num_ops + 1]),
        LoadConfig::Associated => 1,
    };
    if c < lo {
        return Ok(None);
    }
    for lv in pb.level_combos() {
        if pb
            .carrier_limit
            .is_some_and(|k| pb.carriers_lower(&pos, Some(&lv)) > k)
        {
            continue;
        }
        if let Ok(d) = pb.longest(&pb.edges(order, &pos, Some(&lv)), c) {
            return Ok(Some(pb.schedule(c, &d)));
        }
    }
    Ok(None)
}

/// Minimal integer cycle time for a fixed order of the simple cycle's moves.
pub fn min_cycle_for_order(
    inst: &Instance,
    order: &[usize],
    options: &SolveOptions,
) -> Result<Option<(i64, Schedule)>, SolverError> {
    let pb = Problem::new(inst, 1, options);
    check_order(&pb, order)?;
    Ok(pb
        .leaf(order, pb.clo, NO_LIMIT)
        .map(|(c, d)| (c, pb.schedule(c, &d))))
}

/// Exhaustive search over all orders; each order's minimum is found by bisection on C.
pub fn brute_force(inst: &Instance, options: &SolveOptions) -> Result<SolveResult, SolverError> {
    brute_force_degree(inst, 1, options)
}

pub fn brute_force_degree(
    inst: &Instance,
    r: usize,
    options: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    if r == 0 {
        return Err(SolverError::ZeroDegree);
    }
    let started = Instant::now();
    let pb = Problem::new(inst, r, options);
    let free = pb.moves - 1;
    if free > 9 {
        return Err(SolverError::TooLarge(free));
    }
    let mut rest: Vec<usize> = (1..pb.moves).collect();
    let mut best: Option<Incumbent> = None;
    let mut count = 0u64;
    permute(&mut rest, 0, &mut |perm| {
        count += 1;
        let mut order = vec![0];
        order.extend_from_slice(perm);
        let pos = pb.positions(&order);
        if !pb.admissible_complete(&pos) {
            return;
        }
        for lv in pb.level_combos() {
            if pb
                .carrier_limit
                .is_some_and(|k| pb.carriers_lower(&pos, Some(&lv)) > k)
            {
                continue;
            }
            let edges = pb.edges(&order, &pos, Some(&lv));
            if let Some((c, d)) = bisect(&pb, &edges) {
                if best
                    .as_ref()
                    .is_none_or(|(b, o, _)| c < *b || (c == *b && order < *o))
                {
                    best = Some((c, order.clone(), d));
                }
            }
        }
    });
    let elapsed = started.elapsed();
    Ok(match best {
        Some((c, o, d)) => SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(c),
            schedule: Some(pb.schedule(c, &d)),
            order: Some(o),
            bound: c,
            nodes: count,
            elapsed,
        },
        None => SolveResult {
            status: SolveStatus::Infeasible,
            objective: None,
            schedule: None,
            order: None,
            bound: NO_LIMIT,
            nodes: count,
            elapsed,
        },
    })
}

fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

/// Bisection on C; a violated cycle's sign of B tells which side to keep.
fn bisect(pb: &Problem, edges: &[Edge]) -> Option<(i64, Vec<i64>)> {
    let span: i64 = edges.iter().map(|e| e.a.abs()).sum();
    let mut lo = 1.max(pb.clo);
    let mut hi = (lo + span).min(pb.chi);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match pb.longest(edges, mid) {
            Ok(_) => hi = mid,
            Err((_, b)) if b < 0 => lo = mid + 1,
            Err((_, b)) if b > 0 => hi = mid - 1,
            Err(_) => return None,
        }
    }
    pb.longest(edges, lo).ok().map(|d| (lo, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::builtin;
    use crate::schedule::{check_schedule, CheckOptions};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn ex1_orders() {
        let ex1 = builtin("ex1").unwrap();
        let s = feasible_at_c(&ex1, &[0, 2, 1], 160, &opts())
            .unwrap()
            .unwrap();
        assert_eq!(s.start, vec![0, 50, 20]);
        assert!(feasible_at_c(&ex1, &[0, 2, 1], 159, &opts())
            .unwrap()
            .is_none());
        assert!(feasible_at_c(&ex1, &[0, 1, 2], 200, &opts())
            .unwrap()
            .is_some());
        assert_eq!(
            min_cycle_for_order(&ex1, &[0, 1, 2], &opts())
                .unwrap()
                .unwrap()
                .0,
            200
        );
        assert_eq!(
            min_cycle_for_order(&ex1, &[0, 2, 1], &opts())
                .unwrap()
                .unwrap()
                .0,
            160
        );
        assert_eq!(
            min_cycle_for_order(&ex1, &[1, 0, 2], &opts()),
            Err(SolverError::BadOrder)
        );
    }

    #[test]
    fn ex1_solves() {
        let ex1 = builtin("ex1").unwrap();
        let r = solve_simple_cycle(&ex1, &opts(), &Budget::default());
        assert_eq!((r.status, r.objective), (SolveStatus::Optimal, Some(160)));
        assert_eq!(r.schedule.as_ref().unwrap().start, vec![0, 50, 20]);
        let restricted = SolveOptions {
            restricted: true,
            ..opts()
        };
        assert_eq!(
            solve_simple_cycle(&ex1, &restricted, &Budget::default()).objective,
            Some(200)
        );
        let bf = brute_force(&ex1, &opts()).unwrap();
        assert_eq!((bf.objective, bf.nodes), (Some(160), 2));
        let one = SolveOptions {
            carrier_limit: Some(1),
            ..opts()
        };
        assert_eq!(brute_force(&ex1, &one).unwrap().objective, Some(200));
        assert_eq!(
            solve_simple_cycle(&ex1, &one, &Budget::default()).objective,
            Some(200)
        );
    }

    #[test]
    fn ex2_solves_and_certifies() {
        let ex2 = builtin("ex2").unwrap();
        assert_eq!(
            min_cycle_for_order(&ex2, &[0, 1, 4, 5, 2, 3], &opts())
                .unwrap()
                .unwrap()
                .0,
            290
        );
        let r = solve_simple_cycle(&ex2, &opts(), &Budget::default());
        assert_eq!(r.objective, Some(290));
        let rep = check_schedule(&ex2, r.schedule.as_ref().unwrap(), &CheckOptions::default());
        assert!(rep.feasible, "{rep}");
        let bf = brute_force(&ex2, &opts()).unwrap();
        assert_eq!((bf.objective, bf.nodes), (Some(290), 120));
    }

    #[test]
    fn multidegree_ex1() {
        let ex1 = builtin("ex1").unwrap();
        let one = solve_multidegree(&ex1, 1, &opts(), &Budget::default()).unwrap();
        assert_eq!(one.objective, Some(160));
        let two = solve_multidegree(&ex1, 2, &opts(), &Budget::default()).unwrap();
        let c2 = two.objective.unwrap();
        assert!(c2 <= 320, "{c2}");
        let rep = check_schedule(
            &ex1,
            two.schedule.as_ref().unwrap(),
            &CheckOptions::default(),
        );
        assert!(rep.feasible, "{rep}");
        assert_eq!(
            brute_force_degree(&ex1, 2, &opts()).unwrap().objective,
            Some(c2)
        );
    }

    #[test]
    fn parallel_matches_sequential() {
        let ex2 = builtin("ex2").unwrap();
        let par = SolveOptions {
            threads: 4,
            ..opts()
        };
        assert_eq!(
            solve_simple_cycle(&ex2, &par, &Budget::default()).objective,
            Some(290)
        );
    }

    #[test]
    fn node_budget_reports_bound() {
        let ex2 = builtin("ex2").unwrap();
        let r = solve_simple_cycle(
            &ex2,
            &opts(),
            &Budget {
                nodes: 2,
                ..Budget::default()
            },
        );
        assert!(matches!(
            r.status,
            SolveStatus::Feasible | SolveStatus::Optimal
        ));
        assert!(r.bound <= 290 && r.objective.unwrap() >= 290);
    }

    #[test]
    fn single_operation() {
        let mut inst = builtin("ex1").unwrap();
        inst.num_ops = 1;
        inst.num_tanks = 1;
        inst.tank_of = vec![0, 1, 0];
        inst.move_duration = vec![10, 10];
        inst.soak_min = vec![0, 30, 0];
        inst.soak_max = vec![crate::instance::Limit::Infinite; 3];
        inst.travel = vec![vec![0, 10], vec![10, 0]];
        let r = brute_force(&inst, &opts()).unwrap();
        assert_eq!(r.objective, Some(inst.upper_bound()));
        assert_eq!(r.objective, Some(inst.lower_bound()));
    }
}
