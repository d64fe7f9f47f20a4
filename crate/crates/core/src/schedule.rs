//! Cyclic schedules: feasibility checking, trajectory reconstruction, carrier counting and SVG rendering.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, LoadConfig};

/// Move start times plus cycle time. For degree r, move (p, i) of copy p (0-based) sits at
/// index p * (n + 1) + i.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub cycle_time: i64,
    #[serde(default = "one")]
    pub degree: usize,
    pub start: Vec<i64>,
}

fn one() -> usize {
    1
}

impl Schedule {
    pub fn simple(cycle_time: i64, start: Vec<i64>) -> Self {
        Self {
            cycle_time,
            degree: 1,
            start,
        }
    }

    /// Start time of move i of copy p.
    pub fn t(&self, n: usize, p: usize, i: usize) -> i64 {
        self.start[p * (n + 1) + i]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("moves {0} and {1} start at the same time")]
    Tie(usize, usize),
    #[error("schedule has {got} start times, expected {want}")]
    Length { got: usize, want: usize },
    #[error("hoist cannot reach move {next} in time after move {prev} (short by {deficit})")]
    NegativeWait {
        prev: usize,
        next: usize,
        deficit: i64,
    },
    #[error("start time {time} of move {mv} lies outside [0, {cycle})")]
    OutOfCycle { mv: usize, time: i64, cycle: i64 },
}

/// Start of each soaking operation modulo C; entry 0 is the start of unloading.
pub fn operation_start_times(inst: &Instance, sched: &Schedule) -> Vec<i64> {
    let n = inst.num_ops;
    let c = sched.cycle_time;
    let mut out = Vec::with_capacity(n + 1);
    out.push(sched.start[n] + inst.d(n));
    for i in 1..=n {
        out.push((sched.start[i - 1] + inst.d(i - 1)).rem_euclid(c));
    }
    out
}

/// Moves sorted by start time.
pub fn execution_order(sched: &Schedule) -> Result<Vec<usize>, ScheduleError> {
    let mut order: Vec<usize> = (0..sched.start.len()).collect();
    order.sort_by_key(|&u| (sched.start[u], u));
    for w in order.windows(2) {
        if sched.start[w[0]] == sched.start[w[1]] {
            return Err(ScheduleError::Tie(w[0], w[1]));
        }
    }
    Ok(order)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Shape,
    Travel,
    Cycle,
    Soak,
    Load,
    Multifunction,
    Multitank,
    Carrier,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Shape => "shape",
            Family::Travel => "travel",
            Family::Cycle => "cycle",
            Family::Soak => "soak",
            Family::Load => "load",
            Family::Multifunction => "multifunction",
            Family::Multitank => "multitank",
            Family::Carrier => "carrier",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub family: Family,
    pub indices: Vec<usize>,
    /// Amount by which the constraint is violated (negative).
    pub slack: i64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(
            f,
            "{} [{}] slack={} {}",
            self.family,
            idx.join(","),
            self.slack,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub carriers: Option<u32>,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.feasible {
            write!(f, "FEASIBLE")?;
            if let Some(c) = self.carriers {
                write!(f, ", carriers={c}")?;
            }
            return writeln!(f);
        }
        writeln!(f, "INFEASIBLE, {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CheckOptions {
    /// Require the cycle to end exactly when the hoist is back after the latest move.
    pub restricted_cycle_finish: bool,
    /// Overrides the instance's carrier limit when set.
    pub carrier_limit: Option<u32>,
}

struct Ctx<'a> {
    inst: &'a Instance,
    sched: &'a Schedule,
    n: usize,
    c: i64,
}

impl Ctx<'_> {
    fn t(&self, p: usize, i: usize) -> i64 {
        self.sched.t(self.n, p, i)
    }
    fn end(&self, p: usize, i: usize) -> i64 {
        self.t(p, i) + self.inst.d(i)
    }
    fn op_of(&self, u: usize) -> usize {
        u % (self.n + 1)
    }
    /// Soak time within one period, ignoring the multitank shift, and whether it wraps.
    fn base_soak(&self, p: usize, i: usize) -> (i64, bool) {
        let end = self.end(p, i - 1);
        let pick = self.t(p, i);
        let wrapped = pick < end;
        (pick - end + if wrapped { self.c } else { 0 }, wrapped)
    }
    /// Smallest admissible capacity level for op i of copy p.
    fn level(&self, p: usize, i: usize) -> Option<u32> {
        let (base, _) = self.base_soak(p, i);
        (self.inst.min_level(i)..=self.inst.max_level(i)).find(|&m| {
            let s = base + (m as i64 - 1) * self.c;
            s >= self.inst.soak_min[i] && self.inst.soak_max[i].admits(s)
        })
    }
}

fn fwd(from: i64, to: i64, c: i64) -> i64 {
    (to - from).rem_euclid(c)
}

/// Closed cyclic arcs [s1, s1 + l1] and [s2, s2 + l2] share a point.
fn arcs_intersect(s1: i64, l1: i64, s2: i64, l2: i64, c: i64) -> bool {
    fwd(s1, s2, c) <= l1 || fwd(s2, s1, c) <= l2
}

/// Pairs of (copy, op) occupancy intervals that must not overlap.
pub(crate) fn occupancy_pairs(inst: &Instance, r: usize) -> Vec<((usize, usize), (usize, usize))> {
    let mut out = Vec::new();
    for (i, j) in inst.multifunction_pairs() {
        if inst.max_level(i) > 1 || inst.max_level(j) > 1 {
            continue;
        }
        for p in 0..r {
            for q in 0..r {
                out.push(((p, i), (q, j)));
            }
        }
    }
    for i in 1..=inst.num_ops {
        if inst.max_level(i) > 1 {
            continue;
        }
        for p in 0..r {
            for q in p + 1..r {
                out.push(((p, i), (q, i)));
            }
        }
    }
    out
}

/// Numeric feasibility check of a cyclic schedule of any degree.
pub fn check_schedule(inst: &Instance, sched: &Schedule, options: &CheckOptions) -> CheckReport {
    let n = inst.num_ops;
    let r = sched.degree.max(1);
    let c = sched.cycle_time;
    let mut v = Vec::new();
    macro_rules! push {
        ($family:expr, $indices:expr, $slack:expr, $detail:expr $(,)?) => {
            v.push(Violation {
                family: $family,
                indices: $indices,
                slack: $slack,
                detail: $detail,
            })
        };
    }
    let moves = r * (n + 1);
    if sched.start.len() != moves {
        push!(
            Family::Shape,
            vec![],
            0,
            format!("expected {moves} start times, got {}", sched.start.len())
        );
        return finish(v, None);
    }
    if c <= 0 {
        push!(
            Family::Shape,
            vec![],
            c,
            "cycle time must be positive".into()
        );
        return finish(v, None);
    }
    if sched.start[0] != 0 {
        push!(
            Family::Shape,
            vec![0],
            -sched.start[0].abs(),
            "move 0 must start at 0".into()
        );
    }
    for (u, &t) in sched.start.iter().enumerate() {
        if t < 0 || t >= c {
            push!(
                Family::Shape,
                vec![u],
                if t < 0 { t } else { c - 1 - t },
                format!("start {t} outside [0, {c})")
            );
        }
    }
    let order = match execution_order(sched) {
        Ok(o) => o,
        Err(ScheduleError::Tie(a, b)) => {
            push!(
                Family::Shape,
                vec![a, b],
                0,
                "two moves start at the same time".into()
            );
            return finish(v, None);
        }
        Err(e) => unreachable!("{e}"),
    };
    if !v.is_empty() {
        return finish(v, None);
    }
    let x = Ctx { inst, sched, n, c };

    for k in 0..moves {
        let u = order[k];
        let w = order[(k + 1) % moves];
        let (ou, ow) = (x.op_of(u), x.op_of(w));
        let gap = sched.start[w] - sched.start[u] + if k + 1 == moves { c } else { 0 };
        let need = inst.d(ou) + inst.e(ou + 1, ow);
        if gap < need {
            push!(
                Family::Travel,
                vec![u, w],
                gap - need,
                format!("move {w} starts {gap} after move {u}, needs {need}")
            );
        }
    }
    for u in 0..moves {
        let o = x.op_of(u);
        let slack = c - sched.start[u] - inst.d(o) - inst.e(o + 1, 0);
        if slack < 0 {
            push!(
                Family::Cycle,
                vec![u],
                slack,
                "hoist cannot return to the load station within the cycle".into()
            );
        }
    }
    if options.restricted_cycle_finish {
        let last = *order.last().unwrap();
        let o = x.op_of(last);
        let finish_at = sched.start[last] + inst.d(o) + inst.e(o + 1, 0);
        if finish_at != c {
            push!(
                Family::Cycle,
                vec![last],
                finish_at - c,
                format!("restricted finish needs C = {finish_at}")
            );
        }
    }

    for p in 0..r {
        for i in 1..=n {
            let (base, _) = x.base_soak(p, i);
            if x.level(p, i).is_none() {
                let family = if inst.max_level(i) > 1 {
                    Family::Multitank
                } else {
                    Family::Soak
                };
                let m = inst.min_level(i) as i64;
                let s = base + (m - 1) * c;
                let lo = s - inst.soak_min[i];
                let hi = inst.soak_max[i].finite().map_or(i64::MAX, |u| u - s);
                push!(
                    family,
                    vec![p * (n + 1) + i],
                    lo.min(hi),
                    format!("operation {i} soaks {s}")
                );
            }
        }
    }

    let l0 = inst.soak_min[0];
    let ln1 = inst.soak_min[n + 1];
    match (inst.load_config, r) {
        (LoadConfig::Dissociated, 1) => {
            let lo = l0.max(ln1);
            if c < lo {
                push!(
                    Family::Load,
                    vec![0, n + 1],
                    c - lo,
                    "cycle shorter than loading or unloading".into()
                );
            }
            if let Some(hi) = inst.soak_max[0].min(inst.soak_max[n + 1]).finite() {
                if c > hi {
                    push!(
                        Family::Load,
                        vec![0, n + 1],
                        hi - c,
                        "cycle longer than the load window".into()
                    );
                }
            }
        }
        (LoadConfig::Dissociated, _) => {
            for p in 0..r {
                for q in 0..r {
                    if p == q {
                        continue;
                    }
                    let g = fwd(x.t(p, 0), x.t(q, 0), c);
                    if g < l0 {
                        push!(
                            Family::Load,
                            vec![p * (n + 1), q * (n + 1)],
                            g - l0,
                            "loads too close".into()
                        );
                    }
                    let g = fwd(x.end(p, n), x.end(q, n), c);
                    if g < ln1 {
                        push!(
                            Family::Load,
                            vec![p * (n + 1) + n, q * (n + 1) + n],
                            g - ln1,
                            "unloads too close".into()
                        );
                    }
                }
            }
        }
        (LoadConfig::Associated, _) => {
            for p in 0..r {
                for q in 0..r {
                    let g = fwd(x.end(p, n), x.t(q, 0), c);
                    if g < l0 + ln1 {
                        push!(
                            Family::Load,
                            vec![p * (n + 1) + n, q * (n + 1)],
                            g - l0 - ln1,
                            "no time to unload and load".into(),
                        );
                    }
                }
            }
            if r == 1 {
                if let Some(u0) = inst.soak_max[0].finite() {
                    let g = c - x.end(0, n);
                    if g > u0 {
                        push!(
                            Family::Load,
                            vec![n, 0],
                            u0 - g,
                            "station idle longer than the load limit".into()
                        );
                    }
                }
            }
        }
    }

    for ((p, i), (q, j)) in occupancy_pairs(inst, r) {
        let (li, _) = x.base_soak(p, i);
        let (lj, _) = x.base_soak(q, j);
        let si = x.end(p, i - 1).rem_euclid(c);
        let sj = x.end(q, j - 1).rem_euclid(c);
        if arcs_intersect(si, li, sj, lj, c) {
            push!(
                Family::Multifunction,
                vec![p * (n + 1) + i, q * (n + 1) + j],
                -1,
                format!("operations {i} and {j} overlap in tank {}", inst.tank_of[i]),
            );
        }
    }

    let carriers = count_carriers(inst, sched);
    let limit = options.carrier_limit.or(inst.carrier_limit);
    if let Some(k) = limit {
        if carriers > k {
            push!(
                Family::Carrier,
                vec![],
                k as i64 - carriers as i64,
                format!("{carriers} carriers exceed {k}")
            );
        }
    }
    finish(v, Some(carriers))
}

fn finish(violations: Vec<Violation>, carriers: Option<u32>) -> CheckReport {
    CheckReport {
        feasible: violations.is_empty(),
        violations,
        carriers,
    }
}

/// Checks a degree-1 schedule.
pub fn check_simple_cycle(
    inst: &Instance,
    sched: &Schedule,
    options: &CheckOptions,
) -> CheckReport {
    debug_assert_eq!(sched.degree, 1);
    check_schedule(inst, sched, options)
}

/// Carriers in the line: one per copy entering, plus those soaking across the cycle boundary.
pub fn count_carriers(inst: &Instance, sched: &Schedule) -> u32 {
    let n = inst.num_ops;
    let r = sched.degree.max(1);
    let x = Ctx {
        inst,
        sched,
        n,
        c: sched.cycle_time,
    };
    let mut total = r as u32;
    for p in 0..r {
        for i in 1..=n {
            let (_, wrapped) = x.base_soak(p, i);
            let m = x.level(p, i).unwrap_or(inst.min_level(i));
            total += m - 1 + u32::from(wrapped);
        }
    }
    total
}

/// Generalized rotation test over all operations sharing `tank`: true when the
/// boundary events appear as a cyclic shift of the processing order. It is not a
/// valid feasibility condition, as the ex2 schedule shows.
pub fn cyclic_shift_sum_test(inst: &Instance, sched: &Schedule, tank: usize) -> bool {
    let ops: Vec<usize> = (1..=inst.num_ops)
        .filter(|&i| inst.tank_of[i] == tank)
        .collect();
    let r = ops.len();
    if r < 2 {
        return true;
    }
    let y = |a: usize, b: usize| i64::from(sched.start[a] < sched.start[b]);
    let mut sum = 0;
    for p in 0..r {
        sum += y(ops[p] - 1, ops[p]);
        sum += if p + 1 < r {
            y(ops[p], ops[p + 1] - 1)
        } else {
            1 - y(ops[0] - 1, ops[r - 1])
        };
    }
    sum == 2 * r as i64 - 1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Move {
        mv: usize,
        from: usize,
        to: usize,
        start: i64,
        end: i64,
    },
    EmptyTravel {
        from: usize,
        to: usize,
        start: i64,
        end: i64,
    },
    Wait {
        tank: usize,
        start: i64,
        end: i64,
    },
}

impl Segment {
    pub fn interval(&self) -> (i64, i64) {
        match *self {
            Segment::Move { start, end, .. }
            | Segment::EmptyTravel { start, end, .. }
            | Segment::Wait { start, end, .. } => (start, end),
        }
    }

    pub fn tanks(&self) -> (usize, usize) {
        match *self {
            Segment::Move { from, to, .. } | Segment::EmptyTravel { from, to, .. } => (from, to),
            Segment::Wait { tank, .. } => (tank, tank),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub cycle_time: i64,
    pub degree: usize,
    pub num_ops: usize,
    pub segments: Vec<Segment>,
}

/// Hoist path over one cycle: each move, the empty travel to the next pickup, then waiting there.
pub fn build_trajectory(inst: &Instance, sched: &Schedule) -> Result<Trajectory, ScheduleError> {
    let n = inst.num_ops;
    let r = sched.degree.max(1);
    let c = sched.cycle_time;
    let want = r * (n + 1);
    if sched.start.len() != want {
        return Err(ScheduleError::Length {
            got: sched.start.len(),
            want,
        });
    }
    for (mv, &time) in sched.start.iter().enumerate() {
        if time < 0 || time >= c {
            return Err(ScheduleError::OutOfCycle { mv, time, cycle: c });
        }
    }
    let order = execution_order(sched)?;
    let mut segments = Vec::new();
    for (k, &u) in order.iter().enumerate() {
        let o = u % (n + 1);
        let start = sched.start[u];
        let end = start + inst.d(o);
        let from = inst.tank_of[o];
        let to = inst.tank_of[o + 1];
        segments.push(Segment::Move {
            mv: u,
            from,
            to,
            start,
            end,
        });
        let (next_tank, next_time, next) = match order.get(k + 1) {
            Some(&w) => (inst.tank_of[w % (n + 1)], sched.start[w], w),
            None => (inst.tank_of[0], c, order[0]),
        };
        let arrive = end + inst.travel[to][next_tank];
        if arrive > end {
            segments.push(Segment::EmptyTravel {
                from: to,
                to: next_tank,
                start: end,
                end: arrive,
            });
        }
        if next_time < arrive {
            return Err(ScheduleError::NegativeWait {
                prev: u,
                next,
                deficit: arrive - next_time,
            });
        }
        if next_time > arrive {
            segments.push(Segment::Wait {
                tank: next_tank,
                start: arrive,
                end: next_time,
            });
        }
    }
    Ok(Trajectory {
        cycle_time: c,
        degree: r,
        num_ops: n,
        segments,
    })
}

/// Re-derives soak, load, tank-sharing and carrier conditions from the trajectory's move
/// segments alone. Returns human-readable failures.
pub fn audit_trajectory(
    inst: &Instance,
    traj: &Trajectory,
    carrier_limit: Option<u32>,
) -> Vec<String> {
    let n = traj.num_ops;
    let r = traj.degree;
    let c = traj.cycle_time;
    let mut pick = vec![None; r * (n + 1)];
    let mut drop = vec![None; r * (n + 1)];
    let mut covered = 0;
    let mut cursor = 0;
    let mut out = Vec::new();
    for s in &traj.segments {
        let (a, b) = s.interval();
        if a != cursor {
            out.push(format!("segments leave a gap or overlap at {cursor}"));
        }
        cursor = b;
        covered += b - a;
        if let Segment::Move { mv, start, end, .. } = *s {
            pick[mv] = Some(start);
            drop[mv] = Some(end);
        }
    }
    if covered != c || cursor != c {
        out.push(format!("segments cover {covered} of {c}"));
    }
    if pick.iter().any(|p| p.is_none()) {
        out.push("some move is missing".into());
        return out;
    }
    let pick: Vec<i64> = pick.into_iter().map(Option::unwrap).collect();
    let drop: Vec<i64> = drop.into_iter().map(Option::unwrap).collect();
    let id = |p: usize, i: usize| p * (n + 1) + i;

    // soak intervals as (start, length, wrapped)
    let mut soak = vec![(0i64, 0i64, false); r * (n + 1)];
    let mut carriers = r as u32;
    for p in 0..r {
        for i in 1..=n {
            let start = drop[id(p, i - 1)];
            let len = (pick[id(p, i)] - start).rem_euclid(c);
            let wrapped = pick[id(p, i)] < start;
            soak[id(p, i)] = (start % c, len, wrapped);
            let levels = inst.min_level(i)..=inst.max_level(i);
            let ok: Vec<u32> = levels
                .filter(|&m| {
                    let s = len + (m as i64 - 1) * c;
                    s >= inst.soak_min[i] && inst.soak_max[i].admits(s)
                })
                .collect();
            match ok.first() {
                Some(&m) => carriers += m - 1 + u32::from(wrapped),
                None => {
                    out.push(format!("operation ({p},{i}) soak {len} outside its window"));
                    carriers += inst.min_level(i) - 1 + u32::from(wrapped);
                }
            }
        }
    }
    if let Some(k) = carrier_limit.or(inst.carrier_limit) {
        if carriers > k {
            out.push(format!("{carriers} carriers exceed {k}"));
        }
    }

    let l0 = inst.soak_min[0];
    let ln1 = inst.soak_min[n + 1];
    match inst.load_config {
        LoadConfig::Dissociated if r == 1 => {
            if c < l0.max(ln1) {
                out.push("cycle shorter than a station operation".into());
            }
            if let Some(u) = inst.soak_max[0].min(inst.soak_max[n + 1]).finite() {
                if c > u {
                    out.push("cycle exceeds station limit".into());
                }
            }
        }
        LoadConfig::Dissociated => {
            let mut loads: Vec<i64> = (0..r).map(|p| pick[id(p, 0)]).collect();
            let mut unloads: Vec<i64> = (0..r).map(|p| drop[id(p, n)] % c).collect();
            for (events, gap, what) in [(&mut loads, l0, "loads"), (&mut unloads, ln1, "unloads")] {
                events.sort();
                for k in 0..r {
                    let next = if k + 1 < r {
                        events[k + 1]
                    } else {
                        events[0] + c
                    };
                    if next - events[k] < gap {
                        out.push(format!("{what} closer than {gap}"));
                    }
                }
            }
        }
        LoadConfig::Associated => {
            // every unload must be followed by a full station gap before the next pickup
            for p in 0..r {
                let u = drop[id(p, n)];
                let next_pick = (0..r)
                    .map(|q| {
                        let t = pick[id(q, 0)];
                        if t >= u {
                            t
                        } else {
                            t + c
                        }
                    })
                    .chain((0..r).map(|q| pick[id(q, 0)] + c).filter(|&t| t >= u))
                    .min()
                    .unwrap();
                let next_pick = if u % c == 0 && u > 0 {
                    next_pick.min(u)
                } else {
                    next_pick
                };
                if next_pick - u < l0 + ln1 {
                    out.push(format!("unload of copy {p} leaves too little station time"));
                }
                if r == 1 {
                    if let Some(u0) = inst.soak_max[0].finite() {
                        if c - u > u0 {
                            out.push("station idle too long".into());
                        }
                    }
                }
            }
        }
    }

    // tank sharing: unroll every occupancy over two periods and sweep each tank
    let mut by_tank: std::collections::BTreeMap<usize, Vec<(i64, i64, usize)>> = Default::default();
    for p in 0..r {
        for i in 1..=n {
            if inst.max_level(i) > 1 {
                continue;
            }
            let (s, len, _) = soak[id(p, i)];
            let list = by_tank.entry(inst.tank_of[i]).or_default();
            for shift in [0, c] {
                list.push((s + shift, s + shift + len, id(p, i)));
            }
        }
    }
    for (tank, mut list) in by_tank {
        list.sort();
        for w in list.windows(2) {
            if w[0].2 != w[1].2 && w[1].0 <= w[0].1 {
                out.push(format!("tank {tank} holds two carriers at {}", w[1].0));
            }
        }
        for k in 0..list.len() {
            for l in k + 1..list.len() {
                if list[k].2 != list[l].2 && list[l].0 <= list[k].1 {
                    out.push(format!("tank {tank} holds two carriers at {}", list[l].0));
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Carrier number of each move: copies enter in order, and each wrap hands the work to an older carrier.
pub fn carrier_ids(inst: &Instance, sched: &Schedule) -> Vec<usize> {
    let n = inst.num_ops;
    let r = sched.degree.max(1);
    let mut ids = vec![0; r * (n + 1)];
    for p in 0..r {
        let mut wraps = 0;
        ids[p * (n + 1)] = p;
        for i in 1..=n {
            if sched.t(n, p, i) < sched.t(n, p, i - 1) + inst.d(i - 1) {
                wraps += 1;
            }
            wraps += inst.min_level(i) as usize - 1;
            ids[p * (n + 1) + i] = p + r * wraps;
        }
    }
    ids
}

#[derive(Clone, Debug)]
pub struct SvgStyle {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            width: 1400.0,
            height: 600.0,
            title: None,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f4e9c", "#a3262a", "#3d7a2a", "#d9822b", "#6a3d9a", "#138d90", "#8c564b", "#c0458a",
];

/// Time-way diagram: time on x, tanks on y.
pub fn render_timeway_svg(inst: &Instance, traj: &Trajectory, style: &SvgStyle) -> String {
    let (w, h) = (style.width, style.height);
    let (left, right, top, bottom) = (70.0, w - 30.0, 40.0, h - 50.0);
    let c = traj.cycle_time.max(1) as f64;
    let max_tank = inst.travel.len().saturating_sub(1).max(1) as f64;
    let x = |t: i64| left + (right - left) * t as f64 / c;
    let y = |tank: usize| bottom - (bottom - top) * tank as f64 / max_tank;
    let n = traj.num_ops;

    let mut start = vec![0i64; traj.degree * (n + 1)];
    for s in &traj.segments {
        if let Segment::Move { mv, start: t, .. } = *s {
            start[mv] = t;
        }
    }
    let sched = Schedule {
        cycle_time: traj.cycle_time,
        degree: traj.degree,
        start,
    };
    let ids = carrier_ids(inst, &sched);
    let color = |mv: usize| PALETTE[ids[mv] % PALETTE.len()];

    let mut o = String::new();
    let _ = writeln!(
        o,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    o.push_str(
        "<style>.axis{stroke:#000;stroke-width:1}.grid{stroke:#ddd;stroke-width:1}.label{font:12px sans-serif}\
.move{stroke-width:3}.travel{stroke:#444;stroke-width:1.5;stroke-dasharray:6 4}\
.wait{stroke:#888;stroke-width:1.5;stroke-dasharray:2 3}.soak{stroke-width:8;stroke-opacity:0.3}</style>\n",
    );
    if let Some(title) = &style.title {
        let _ = writeln!(
            o,
            "<text class=\"label\" x=\"{:.3}\" y=\"20.000\">{}</text>",
            left,
            escape(title)
        );
    }
    let _ = writeln!(o, "<g id=\"axes\">");
    for tank in 0..inst.travel.len() {
        let _ = writeln!(
            o,
            "<line class=\"grid\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\"/>",
            left,
            y(tank),
            right,
            y(tank)
        );
        let _ = writeln!(
            o,
            "<text class=\"label\" x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\">{}</text>",
            left - 8.0,
            y(tank) + 4.0,
            tank
        );
    }
    let _ = writeln!(o, "<line class=\"axis\" x1=\"{left:.3}\" y1=\"{bottom:.3}\" x2=\"{right:.3}\" y2=\"{bottom:.3}\"/>");
    let _ = writeln!(o, "<line class=\"axis\" x1=\"{left:.3}\" y1=\"{top:.3}\" x2=\"{left:.3}\" y2=\"{bottom:.3}\"/>");
    let _ = writeln!(o, "<line class=\"axis\" x1=\"{right:.3}\" y1=\"{top:.3}\" x2=\"{right:.3}\" y2=\"{bottom:.3}\"/>");
    let mut ticks: Vec<i64> = traj
        .segments
        .iter()
        .map(|s| s.interval().0)
        .chain([traj.cycle_time])
        .collect();
    ticks.sort();
    ticks.dedup();
    for t in ticks {
        let _ = writeln!(
            o,
            "<text class=\"label\" x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"middle\">{}</text>",
            x(t),
            bottom + 18.0,
            t
        );
    }
    let _ = writeln!(o, "</g>");

    let _ = writeln!(o, "<g id=\"soak\">");
    let ct = traj.cycle_time;
    for p in 0..traj.degree {
        for i in 1..=n {
            let prev = p * (n + 1) + i - 1;
            let cur = p * (n + 1) + i;
            let drop = sched.start[prev] + inst.d(i - 1);
            let pick = sched.start[cur];
            let yy = y(inst.tank_of[i]);
            let mut bar = |a: i64, b: i64, mv: usize| {
                let _ = writeln!(
                    o,
                    "<line class=\"soak\" stroke=\"{}\" x1=\"{:.3}\" y1=\"{yy:.3}\" x2=\"{:.3}\" y2=\"{yy:.3}\"/>",
                    color(mv),
                    x(a),
                    x(b)
                );
            };
            let drop = drop.min(ct);
            if pick >= drop {
                bar(drop, pick, cur);
            } else {
                bar(drop, ct, prev);
                bar(0, pick, cur);
            }
        }
    }
    let _ = writeln!(o, "</g>");

    let _ = writeln!(o, "<g id=\"hoist\">");
    for s in &traj.segments {
        let (a, b) = s.interval();
        let (ta, tb) = s.tanks();
        match s {
            Segment::Move { mv, .. } => {
                let _ = writeln!(
                    o,
                    "<line class=\"move\" stroke=\"{}\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\"/>",
                    color(*mv),
                    x(a),
                    y(ta),
                    x(b),
                    y(tb)
                );
            }
            Segment::EmptyTravel { .. } => {
                let _ = writeln!(
                    o,
                    "<line class=\"travel\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\"/>",
                    x(a),
                    y(ta),
                    x(b),
                    y(tb)
                );
            }
            Segment::Wait { .. } => {
                let _ = writeln!(
                    o,
                    "<line class=\"wait\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\"/>",
                    x(a),
                    y(ta),
                    x(b),
                    y(tb)
                );
            }
        }
    }
    let _ = writeln!(o, "</g>");
    o.push_str("</svg>\n");
    o
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::builtin;

    fn ex1_opt() -> Schedule {
        Schedule::simple(160, vec![0, 50, 20])
    }

    fn ex2_ref() -> Schedule {
        Schedule::simple(290, vec![0, 60, 180, 240, 80, 150])
    }

    #[test]
    fn ex1_operation_starts_and_order() {
        let ex1 = builtin("ex1").unwrap();
        assert_eq!(operation_start_times(&ex1, &ex1_opt()), vec![40, 10, 60]);
        assert_eq!(execution_order(&ex1_opt()).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn start_on_cycle_edge_wraps_to_zero() {
        let mut inst = builtin("ex1").unwrap();
        inst.move_duration[0] = 100;
        let s = Schedule::simple(100, vec![0, 50, 20]);
        assert_eq!(operation_start_times(&inst, &s)[1], 0);
    }

    #[test]
    fn ties_and_monotone_orders() {
        assert_eq!(
            execution_order(&Schedule::simple(10, vec![0, 3, 3])),
            Err(ScheduleError::Tie(1, 2))
        );
        assert_eq!(
            execution_order(&Schedule::simple(10, vec![0, 3, 5, 7])).unwrap(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn ex1_trajectory_segments() {
        let ex1 = builtin("ex1").unwrap();
        let tr = build_trajectory(&ex1, &ex1_opt()).unwrap();
        let expected = vec![
            Segment::Move {
                mv: 0,
                from: 0,
                to: 1,
                start: 0,
                end: 10,
            },
            Segment::EmptyTravel {
                from: 1,
                to: 2,
                start: 10,
                end: 20,
            },
            Segment::Move {
                mv: 2,
                from: 2,
                to: 0,
                start: 20,
                end: 40,
            },
            Segment::EmptyTravel {
                from: 0,
                to: 1,
                start: 40,
                end: 50,
            },
            Segment::Move {
                mv: 1,
                from: 1,
                to: 2,
                start: 50,
                end: 60,
            },
            Segment::EmptyTravel {
                from: 2,
                to: 0,
                start: 60,
                end: 80,
            },
            Segment::Wait {
                tank: 0,
                start: 80,
                end: 160,
            },
        ];
        assert_eq!(tr.segments, expected);
        assert!(audit_trajectory(&ex1, &tr, None).is_empty());
    }

    #[test]
    fn negative_wait_is_reported() {
        let ex1 = builtin("ex1").unwrap();
        let err = build_trajectory(&ex1, &Schedule::simple(160, vec![0, 50, 15])).unwrap_err();
        assert!(
            matches!(
                err,
                ScheduleError::NegativeWait {
                    prev: 0,
                    next: 2,
                    deficit: 5
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn ex1_optimal_is_feasible_but_not_restricted() {
        let ex1 = builtin("ex1").unwrap();
        let rep = check_simple_cycle(&ex1, &ex1_opt(), &CheckOptions::default());
        assert!(rep.feasible, "{rep}");
        let rep = check_simple_cycle(
            &ex1,
            &ex1_opt(),
            &CheckOptions {
                restricted_cycle_finish: true,
                ..Default::default()
            },
        );
        assert!(!rep.feasible);
        assert!(rep.violations.iter().all(|v| v.family == Family::Cycle));
    }

    #[test]
    fn ex1_primitive_schedule() {
        let ex1 = builtin("ex1").unwrap();
        let s = Schedule::simple(200, vec![0, 50, 180]);
        let opts = CheckOptions {
            restricted_cycle_finish: true,
            ..Default::default()
        };
        let rep = check_simple_cycle(&ex1, &s, &opts);
        assert!(rep.feasible, "{rep}");
        assert_eq!(count_carriers(&ex1, &s), 1);
        let tr = build_trajectory(&ex1, &s).unwrap();
        assert!(!tr
            .segments
            .iter()
            .any(|s| matches!(s, Segment::EmptyTravel { .. }) && s.interval().1 != 200));
    }

    #[test]
    fn ex2_reference_schedule() {
        let ex2 = builtin("ex2").unwrap();
        let rep = check_simple_cycle(&ex2, &ex2_ref(), &CheckOptions::default());
        assert!(rep.feasible, "{rep}");
        assert_eq!(rep.carriers, Some(2));
        assert_eq!(rep.to_string().trim(), "FEASIBLE, carriers=2");
        assert!(!cyclic_shift_sum_test(&ex2, &ex2_ref(), 1));
    }

    #[test]
    fn overlap_is_detected() {
        let ex2 = builtin("ex2").unwrap();
        // op 5 soaks from 160 to 290 and op 1 from 10 to 60: shift op 1 into op 5's stay
        let mut s = ex2_ref();
        s.cycle_time = 400;
        s.start = vec![0, 60, 180, 240, 80, 350];
        let rep = check_simple_cycle(&ex2, &s, &CheckOptions::default());
        assert!(
            rep.violations
                .iter()
                .any(|v| v.family == Family::Multifunction),
            "{rep}"
        );
    }

    #[test]
    fn carrier_limit_violation() {
        let ex2 = builtin("ex2").unwrap();
        let rep = check_simple_cycle(
            &ex2,
            &ex2_ref(),
            &CheckOptions {
                carrier_limit: Some(1),
                ..Default::default()
            },
        );
        assert!(!rep.feasible);
        assert_eq!(rep.violations[0].family, Family::Carrier);
        assert!(rep.to_string().contains("carrier [] slack=-1"));
    }

    #[test]
    fn svg_is_deterministic() {
        let ex1 = builtin("ex1").unwrap();
        let tr = build_trajectory(&ex1, &ex1_opt()).unwrap();
        let a = render_timeway_svg(&ex1, &tr, &SvgStyle::default());
        let b = render_timeway_svg(&ex1, &tr, &SvgStyle::default());
        assert_eq!(a, b);
        for class in ["move", "travel", "wait", "soak"] {
            assert!(a.contains(&format!("class=\"{class}\"")), "{class}");
        }
    }

    #[test]
    fn trivial_instance_renders_two_moves() {
        let mut inst = builtin("ex1").unwrap();
        inst.num_ops = 1;
        inst.num_tanks = 1;
        inst.tank_of = vec![0, 1, 0];
        inst.move_duration = vec![10, 10];
        inst.soak_min = vec![0, 0, 0];
        inst.soak_max = vec![crate::instance::Limit::Infinite; 3];
        inst.travel = vec![vec![0, 10], vec![10, 0]];
        assert!(inst.validate().is_empty());
        let s = Schedule::simple(20, vec![0, 10]);
        let tr = build_trajectory(&inst, &s).unwrap();
        assert_eq!(tr.segments.len(), 2);
        let svg = render_timeway_svg(&inst, &tr, &SvgStyle::default());
        assert_eq!(svg.matches("class=\"move\"").count(), 2);
    }
}
