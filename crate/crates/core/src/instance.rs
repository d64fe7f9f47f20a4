//! Problem instances, validation, station conversion and analytic cycle-time bounds.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Upper soak limit: a finite integer or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Limit {
    Finite(i64),
    Infinite,
}

impl Limit {
    pub fn finite(self) -> Option<i64> {
        match self {
            Limit::Finite(v) => Some(v),
            Limit::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Limit::Infinite
    }

    /// True when `value` does not exceed the limit.
    pub fn admits(self, value: i64) -> bool {
        match self {
            Limit::Finite(u) => value <= u,
            Limit::Infinite => true,
        }
    }

    pub fn min(self, other: Limit) -> Limit {
        match (self, other) {
            (Limit::Finite(a), Limit::Finite(b)) => Limit::Finite(a.min(b)),
            (Limit::Finite(a), Limit::Infinite) | (Limit::Infinite, Limit::Finite(a)) => {
                Limit::Finite(a)
            }
            _ => Limit::Infinite,
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Finite(v) => write!(f, "{v}"),
            Limit::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Limit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Limit::Finite(v) => s.serialize_i64(*v),
            Limit::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Limit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Limit::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(Limit::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected an integer or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LoadConfig {
    #[default]
    Dissociated,
    Associated,
}

/// How many capacity units a bottleneck operation uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multitank {
    /// Soak lasts between (m-1)C and mC.
    Fixed(u32),
    /// m is chosen by the optimizer from 1..=cap.
    Variable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub num_tanks: usize,
    pub num_ops: usize,
    pub tank_of: Vec<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tank_capacity: BTreeMap<usize, u32>,
    pub move_duration: Vec<i64>,
    pub soak_min: Vec<i64>,
    pub soak_max: Vec<Limit>,
    pub travel: Vec<Vec<i64>>,
    pub load_config: LoadConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub multitank: BTreeMap<usize, Multitank>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_limit: Option<u32>,
    /// Factor already applied to every time value (1 for native integer data).
    #[serde(default = "one")]
    pub scale: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationIssue {
    Shape(String),
    AsymmetricTravel {
        a: usize,
        b: usize,
    },
    NonzeroDiagonal {
        tank: usize,
    },
    NegativeTravel {
        a: usize,
        b: usize,
    },
    TriangleInequality {
        a: usize,
        b: usize,
        c: usize,
    },
    MoveShorterThanTravel {
        op: usize,
        duration: i64,
        travel: i64,
    },
    NegativeDuration {
        what: &'static str,
        index: usize,
    },
    EmptyWindow {
        op: usize,
    },
    BadStation(String),
    SoakTankOutOfRange {
        op: usize,
        tank: usize,
    },
    ConsecutiveSameTank {
        op: usize,
    },
    Multitank {
        op: usize,
        reason: String,
    },
    ZeroCapacity {
        tank: usize,
    },
    ZeroCarrierLimit,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            Shape(s) => write!(f, "shape: {s}"),
            AsymmetricTravel { a, b } => {
                write!(f, "travel is not symmetric between tanks {a} and {b}")
            }
            NonzeroDiagonal { tank } => write!(f, "travel from tank {tank} to itself is not zero"),
            NegativeTravel { a, b } => write!(f, "negative travel time between tanks {a} and {b}"),
            TriangleInequality { a, b, c } => write!(
                f,
                "triangle inequality violated: {a} -> {c} longer than via {b}"
            ),
            MoveShorterThanTravel {
                op,
                duration,
                travel,
            } => {
                write!(
                    f,
                    "move shorter than loaded travel: move {op} takes {duration} < {travel}"
                )
            }
            NegativeDuration { what, index } => write!(f, "negative {what} at index {index}"),
            EmptyWindow { op } => write!(f, "soak window of operation {op} has L > U"),
            BadStation(s) => write!(f, "station: {s}"),
            SoakTankOutOfRange { op, tank } => write!(
                f,
                "operation {op} uses tank {tank}, outside the soaking tanks"
            ),
            ConsecutiveSameTank { op } => {
                write!(f, "operations {op} and {} use the same tank", op + 1)
            }
            Multitank { op, reason } => write!(f, "multitank operation {op}: {reason}"),
            ZeroCapacity { tank } => write!(f, "tank {tank} has capacity 0"),
            ZeroCarrierLimit => write!(f, "carrier limit must be at least 1"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("instance already has dissociated load and unload stations")]
    AlreadyDissociated,
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// Lower and upper bound on the optimal cycle time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lb: i64,
    pub ub: i64,
}

impl Instance {
    /// Unload operation index n+1.
    pub fn unload(&self) -> usize {
        self.num_ops + 1
    }

    /// Empty travel time between the tanks of operations i and j.
    pub fn e(&self, i: usize, j: usize) -> i64 {
        self.travel[self.tank_of[i]][self.tank_of[j]]
    }

    pub fn d(&self, i: usize) -> i64 {
        self.move_duration[i]
    }

    pub fn capacity(&self, tank: usize) -> u32 {
        self.tank_capacity.get(&tank).copied().unwrap_or(1)
    }

    /// Largest capacity level the operation may use (1 for ordinary operations).
    pub fn max_level(&self, op: usize) -> u32 {
        match self.multitank.get(&op) {
            None => 1,
            Some(Multitank::Fixed(m)) => *m,
            Some(Multitank::Variable) => self.capacity(self.tank_of[op]),
        }
    }

    /// Smallest capacity level the operation may use.
    pub fn min_level(&self, op: usize) -> u32 {
        match self.multitank.get(&op) {
            Some(Multitank::Fixed(m)) => *m,
            _ => 1,
        }
    }

    pub fn has_multitank(&self) -> bool {
        self.multitank.values().any(|m| *m != Multitank::Fixed(1))
    }

    pub fn is_dissociated_geometry(&self) -> bool {
        self.tank_of.last().is_some_and(|&s| s != 0)
    }

    /// Pairs of soaking operations (i, j), i < j, that share a tank.
    pub fn multifunction_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.num_ops;
        let mut out = Vec::new();
        for i in 1..=n {
            for j in i + 1..=n {
                if self.tank_of[i] == self.tank_of[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Vec<ValidationIssue> {
        use ValidationIssue::*;
        let mut issues = Vec::new();
        let n = self.num_ops;
        let nt = self.num_tanks;
        let check_len = |issues: &mut Vec<ValidationIssue>, what: &str, got: usize, want: usize| {
            if got != want {
                issues.push(Shape(format!("{what} has length {got}, expected {want}")));
            }
        };
        check_len(&mut issues, "tank_of", self.tank_of.len(), n + 2);
        check_len(
            &mut issues,
            "move_duration",
            self.move_duration.len(),
            n + 1,
        );
        check_len(&mut issues, "soak_min", self.soak_min.len(), n + 2);
        check_len(&mut issues, "soak_max", self.soak_max.len(), n + 2);
        let size = self.travel.len();
        if size != nt + 1 && size != nt + 2 {
            issues.push(Shape(format!(
                "travel has {size} rows, expected {} or {}",
                nt + 1,
                nt + 2
            )));
        }
        for (a, row) in self.travel.iter().enumerate() {
            if row.len() != size {
                issues.push(Shape(format!(
                    "travel row {a} has {} entries, expected {size}",
                    row.len()
                )));
            }
        }
        if !issues.is_empty() {
            return issues;
        }
        for (i, &s) in self.tank_of.iter().enumerate() {
            if s >= size {
                issues.push(Shape(format!(
                    "operation {i} uses tank {s} outside the travel matrix"
                )));
            }
        }
        if !issues.is_empty() {
            return issues;
        }

        for a in 0..size {
            if self.travel[a][a] != 0 {
                issues.push(NonzeroDiagonal { tank: a });
            }
            for b in 0..size {
                if self.travel[a][b] < 0 {
                    issues.push(NegativeTravel { a, b });
                }
                if a < b && self.travel[a][b] != self.travel[b][a] {
                    issues.push(AsymmetricTravel { a, b });
                }
            }
        }
        for a in 0..size {
            for b in 0..size {
                for c in 0..size {
                    if self.travel[a][c] > self.travel[a][b] + self.travel[b][c] {
                        issues.push(TriangleInequality { a, b, c });
                    }
                }
            }
        }

        if self.tank_of[0] != 0 {
            issues.push(BadStation("operation 0 must use the load station 0".into()));
        }
        let last = self.tank_of[n + 1];
        if last != 0 && last != nt + 1 {
            issues.push(BadStation(format!(
                "unload operation uses tank {last}, expected 0 or {}",
                nt + 1
            )));
        }
        if last == nt + 1 && size != nt + 2 {
            issues.push(Shape(
                "dissociated unload station needs a travel row for it".into(),
            ));
        }
        for i in 1..=n {
            let s = self.tank_of[i];
            if s == 0 || s > nt {
                issues.push(SoakTankOutOfRange { op: i, tank: s });
            }
        }
        for i in 1..n {
            if self.tank_of[i] == self.tank_of[i + 1] {
                issues.push(ConsecutiveSameTank { op: i });
            }
        }
        for i in 0..=n {
            let d = self.move_duration[i];
            if d < 0 {
                issues.push(NegativeDuration {
                    what: "move duration",
                    index: i,
                });
            } else if d < self.e(i, i + 1) {
                issues.push(MoveShorterThanTravel {
                    op: i,
                    duration: d,
                    travel: self.e(i, i + 1),
                });
            }
        }
        for i in 0..=n + 1 {
            if self.soak_min[i] < 0 {
                issues.push(NegativeDuration {
                    what: "minimum soak",
                    index: i,
                });
            }
            if !self.soak_max[i].admits(self.soak_min[i]) {
                issues.push(EmptyWindow { op: i });
            }
        }
        for (&tank, &cap) in &self.tank_capacity {
            if cap == 0 {
                issues.push(ZeroCapacity { tank });
            }
        }
        let shared: Vec<usize> = self
            .multifunction_pairs()
            .iter()
            .flat_map(|&(i, j)| [i, j])
            .collect();
        for (&op, spec) in &self.multitank {
            if op == 0 || op > n {
                issues.push(Multitank {
                    op,
                    reason: "not a soaking operation".into(),
                });
                continue;
            }
            let cap = self.capacity(self.tank_of[op]);
            if let crate::instance::Multitank::Fixed(m) = spec {
                if *m == 0 {
                    issues.push(Multitank {
                        op,
                        reason: "m must be at least 1".into(),
                    });
                } else if *m > cap {
                    issues.push(Multitank {
                        op,
                        reason: format!("m = {m} exceeds tank capacity {cap}"),
                    });
                }
            }
            if shared.contains(&op) {
                issues.push(Multitank {
                    op,
                    reason: "tank is shared with another operation".into(),
                });
            }
        }
        if self.carrier_limit == Some(0) {
            issues.push(ZeroCarrierLimit);
        }
        issues
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Adds a fictive unload station N+1 that mirrors the load station.
    pub fn to_dissociated(&self) -> Result<Instance, InstanceError> {
        if self.is_dissociated_geometry() {
            return Err(InstanceError::AlreadyDissociated);
        }
        let nt = self.num_tanks;
        if self.travel.len() != nt + 1 {
            return Err(InstanceError::Invalid(format!(
                "travel must have {} rows",
                nt + 1
            )));
        }
        let size = nt + 2;
        let mut travel = vec![vec![0; size]; size];
        let map = |a: usize| if a == nt + 1 { 0 } else { a };
        for (a, row) in travel.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = self.travel[map(a)][map(b)];
            }
        }
        let mut out = self.clone();
        out.travel = travel;
        let n = self.num_ops;
        out.tank_of[n + 1] = nt + 1;
        Ok(out)
    }

    /// The instance in dissociated geometry (converted if needed).
    pub fn dissociated(&self) -> Instance {
        if self.is_dissociated_geometry() {
            self.clone()
        } else {
            self.to_dissociated().expect("associated geometry converts")
        }
    }

    fn multitank_floor(&self) -> i64 {
        let mut lb = 0;
        for &op in self.multitank.keys() {
            let m = self.max_level(op) as i64;
            if m >= 1 {
                lb = lb.max(div_ceil(self.soak_min[op], m));
            }
        }
        lb
    }

    fn dissociated_floor(&self) -> i64 {
        match self.load_config {
            LoadConfig::Dissociated => self.soak_min[0].max(self.soak_min[self.unload()]),
            LoadConfig::Associated => 0,
        }
    }

    /// Cycle time of the primitive schedule, raised by the load and multitank floors.
    pub fn upper_bound(&self) -> i64 {
        let n = self.num_ops;
        let mut ub = self.d(0);
        for i in 1..=n {
            ub += self.soak_min[i] + self.d(i);
        }
        let ret = self.e(n + 1, 0);
        ub += match self.load_config {
            LoadConfig::Dissociated => ret,
            LoadConfig::Associated => ret.max(self.soak_min[0] + self.soak_min[n + 1]),
        };
        ub.max(self.multitank_floor()).max(self.dissociated_floor())
    }

    pub fn lower_bound(&self) -> i64 {
        let n = self.num_ops;
        let total: i64 = (0..=n).map(|i| self.d(i)).sum();
        let ret = (0..=n).map(|i| self.e(i + 1, 0)).min().unwrap_or(0);
        let mut lb = ret + total;
        for i in 1..=n {
            if self.max_level(i) > 1 {
                continue;
            }
            lb = lb.max(self.d(i - 1) + self.soak_min[i] + self.d(i) + self.e(i + 1, i - 1));
        }
        lb.max(self.multitank_floor()).max(self.dissociated_floor())
    }

    pub fn bounds(&self) -> BoundPair {
        BoundPair {
            lb: self.lower_bound(),
            ub: self.upper_bound(),
        }
    }

    /// Constant used in every linearized constraint.
    pub fn big_m(&self) -> i64 {
        self.upper_bound()
    }
}

pub(crate) fn div_ceil(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    a.div_euclid(b) + i64::from(a.rem_euclid(b) != 0)
}

pub(crate) fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::builtin;

    #[test]
    fn ex1_bounds() {
        let ex1 = builtin("ex1").unwrap();
        assert!(ex1.validate().is_empty(), "{:?}", ex1.validate());
        assert_eq!(ex1.upper_bound(), 200);
        assert_eq!(ex1.lower_bound(), 160);
        assert_eq!(ex1.big_m(), 200);
    }

    #[test]
    fn ex2_bounds() {
        let ex2 = builtin("ex2").unwrap();
        assert!(ex2.validate().is_empty());
        assert_eq!(ex2.move_duration, vec![10, 10, 10, 20, 20, 10]);
        assert_eq!(ex2.upper_bound(), 330);
        assert_eq!(ex2.lower_bound(), 110);
    }

    #[test]
    fn broken_symmetry_flagged() {
        let mut ex1 = builtin("ex1").unwrap();
        ex1.travel[0][2] = 5;
        let issues = ex1.validate();
        assert!(
            issues.contains(&ValidationIssue::AsymmetricTravel { a: 0, b: 2 }),
            "{issues:?}"
        );
    }

    #[test]
    fn short_move_flagged() {
        let mut ex1 = builtin("ex1").unwrap();
        ex1.move_duration[0] = 5;
        let issues = ex1.validate();
        assert!(issues
            .iter()
            .any(|i| i.to_string().contains("move shorter than loaded travel")));
    }

    #[test]
    fn dissociation_of_ex1() {
        let ex1 = builtin("ex1").unwrap();
        let d = ex1.to_dissociated().unwrap();
        assert_eq!(d.tank_of, vec![0, 1, 2, 3]);
        assert_eq!(d.travel[3], d.travel[0]);
        assert_eq!(d.travel[0][3], 0);
        assert_eq!(d.load_config, LoadConfig::Associated);
        assert!(d.validate().is_empty());
        assert_eq!(d.to_dissociated(), Err(InstanceError::AlreadyDissociated));
    }

    #[test]
    fn zero_instance() {
        let inst = Instance {
            name: "zero".into(),
            num_tanks: 1,
            num_ops: 1,
            tank_of: vec![0, 1, 0],
            tank_capacity: BTreeMap::new(),
            move_duration: vec![0, 0],
            soak_min: vec![0, 0, 0],
            soak_max: vec![Limit::Infinite; 3],
            travel: vec![vec![0, 0], vec![0, 0]],
            load_config: LoadConfig::Dissociated,
            multitank: BTreeMap::new(),
            carrier_limit: None,
            scale: 1,
        };
        assert!(inst.validate().is_empty());
        assert_eq!(inst.upper_bound(), 0);
        assert_eq!(inst.lower_bound(), 0);
        assert_eq!(inst.big_m(), 0);
        let d = inst.to_dissociated().unwrap();
        assert_eq!(d.num_tanks, 1);
        assert_eq!(d.travel, vec![vec![0; 3]; 3]);
    }

    #[test]
    fn multitank_bounds() {
        let mut ex1 = builtin("ex1").unwrap();
        ex1.tank_capacity.insert(2, 3);
        ex1.multitank.insert(2, Multitank::Fixed(3));
        ex1.soak_min[2] = 500;
        ex1.soak_max[2] = Limit::Finite(700);
        assert!(ex1.validate().is_empty());
        assert!(ex1.lower_bound() >= 167);
        ex1.multitank.insert(2, Multitank::Fixed(4));
        assert!(!ex1.validate().is_empty());
    }

    #[test]
    fn limit_serde() {
        let v: Vec<Limit> = serde_json::from_str("[3, \"inf\"]").unwrap();
        assert_eq!(v, vec![Limit::Finite(3), Limit::Infinite]);
        assert_eq!(serde_json::to_string(&v).unwrap(), "[3,\"inf\"]");
        assert!(serde_json::from_str::<Limit>("\"x\"").is_err());
    }
}
