//! Instance files, the built-in corpus and seeded instance generators.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instance::{Instance, Limit, LoadConfig, ValidationIssue};

/// Environment variable naming the directory with the external benchmark files.
pub const DATA_DIR_ENV: &str = "HOISTLAB_DATA_DIR";

pub const BUILTIN_NAMES: [&str; 10] = [
    "philu",
    "philu_mini",
    "bo1",
    "bo2",
    "cu",
    "zn",
    "ligne1",
    "ligne2",
    "ex1",
    "ex2",
];

const EX1: &str = include_str!("../data/ex1.json");
const EX2: &str = include_str!("../data/ex2.json");
const MANIFEST: &str = include_str!("../data/MANIFEST");

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed instance: {0}")]
    Structure(String),
    #[error("invalid instance: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationIssue>),
    #[error("unknown builtin instance {0:?}")]
    UnknownBuiltin(String),
    #[error("data missing: builtin {name:?} is not bundled; set {DATA_DIR_ENV} to a directory containing {name}.json")]
    NotBundled { name: String },
    #[error("checksum mismatch for {name}: expected {expected}, found {found}")]
    Checksum {
        name: String,
        expected: String,
        found: String,
    },
}

impl BenchError {
    pub fn is_io(&self) -> bool {
        matches!(self, BenchError::Io { .. } | BenchError::NotBundled { .. })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses instance text, checks its structure and validates it.
pub fn parse_instance(text: &str) -> Result<Instance, BenchError> {
    let inst: Instance = serde_json::from_str(text).map_err(|e| BenchError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    check_structure(&inst)?;
    let issues = inst.validate();
    if issues.is_empty() {
        Ok(inst)
    } else {
        Err(BenchError::Invalid(issues))
    }
}

fn check_structure(inst: &Instance) -> Result<(), BenchError> {
    let n = inst.num_ops;
    let Some(&last) = inst.tank_of.get(n + 1) else {
        return Err(BenchError::Structure(format!(
            "tank_of needs {} entries",
            n + 2
        )));
    };
    let size = if last == inst.num_tanks + 1 {
        inst.num_tanks + 2
    } else {
        inst.num_tanks + 1
    };
    if inst.travel.len() < size {
        return Err(BenchError::Structure(format!(
            "travel row {} is missing ({size} rows expected)",
            inst.travel.len()
        )));
    }
    for (a, row) in inst.travel.iter().enumerate() {
        if row.len() != inst.travel.len() {
            return Err(BenchError::Structure(format!(
                "travel row {a} has {} entries, expected {}",
                row.len(),
                inst.travel.len()
            )));
        }
    }
    Ok(())
}

pub fn instance_to_string(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(inst).expect("instances serialize");
    s.push('\n');
    s
}

pub fn load_instance(path: &Path) -> Result<Instance, BenchError> {
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.into(),
        source,
    })?;
    parse_instance(&text)
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<(), BenchError> {
    fs::write(path, instance_to_string(inst)).map_err(|source| BenchError::Io {
        path: path.into(),
        source,
    })
}

/// Pinned digests of the embedded files.
pub fn manifest() -> BTreeMap<String, String> {
    parse_manifest(MANIFEST)
}

fn parse_manifest(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            Some((it.next()?.to_string(), it.next()?.to_string()))
        })
        .collect()
}

/// Raw text of an embedded instance file.
pub fn embedded_text(name: &str) -> Option<&'static str> {
    match name {
        "ex1" => Some(EX1),
        "ex2" => Some(EX2),
        _ => None,
    }
}

pub fn builtin(name: &str) -> Result<Instance, BenchError> {
    if !BUILTIN_NAMES.contains(&name) {
        return Err(BenchError::UnknownBuiltin(name.into()));
    }
    if let Some(text) = embedded_text(name) {
        return parse_instance(text);
    }
    let Some(dir) = std::env::var_os(DATA_DIR_ENV) else {
        return Err(BenchError::NotBundled { name: name.into() });
    };
    let dir = PathBuf::from(dir);
    let file = format!("{name}.json");
    let path = dir.join(&file);
    if !path.exists() {
        return Err(BenchError::NotBundled { name: name.into() });
    }
    let bytes = fs::read(&path).map_err(|source| BenchError::Io {
        path: path.clone(),
        source,
    })?;
    if let Ok(m) = fs::read_to_string(dir.join("MANIFEST")) {
        if let Some(expected) = parse_manifest(&m).get(&file) {
            let found = sha256_hex(&bytes);
            if &found != expected {
                return Err(BenchError::Checksum {
                    name: name.into(),
                    expected: expected.clone(),
                    found,
                });
            }
        }
    }
    parse_instance(&String::from_utf8_lossy(&bytes))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n: usize,
    pub mu: f64,
    pub seed: u64,
    /// Use floor instead of round-half-up for the upper soak limits.
    pub floor_upper: bool,
}

impl GeneratorParams {
    pub fn new(n: usize, mu: f64, seed: u64) -> Self {
        Self {
            n,
            mu,
            seed,
            floor_upper: false,
        }
    }
}

fn line_travel(pos: &[i64]) -> Vec<Vec<i64>> {
    pos.iter()
        .map(|a| pos.iter().map(|b| (a - b).abs()).collect())
        .collect()
}

/// Random line instance with dissociated stations; the draws do not depend on mu.
pub fn generate(p: &GeneratorParams) -> Instance {
    assert!(p.n >= 1 && p.mu > 1.0, "generator needs n >= 1 and mu > 1");
    let n = p.n;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let gaps: Vec<i64> = (0..=n).map(|_| 1 + rng.random_range(0..=4)).collect();
    let mut soak_min: Vec<i64> = (0..=n).map(|_| 40 + rng.random_range(0..=140)).collect();
    soak_min[0] = 0;
    soak_min.push(0);
    let mut pos = vec![0i64];
    for g in &gaps {
        pos.push(pos.last().unwrap() + g);
    }
    let soak_max: Vec<Limit> = (0..=n + 1)
        .map(|i| {
            if i == 0 || i == n + 1 {
                Limit::Infinite
            } else {
                let x = p.mu * soak_min[i] as f64;
                Limit::Finite(if p.floor_upper {
                    x.floor()
                } else {
                    (x + 0.5).floor()
                } as i64)
            }
        })
        .collect();
    Instance {
        name: format!("rand_n{}_mu{}_s{}", n, p.mu, p.seed),
        num_tanks: n,
        num_ops: n,
        tank_of: (0..=n + 1).collect(),
        tank_capacity: BTreeMap::new(),
        move_duration: gaps.iter().map(|g| g + 12).collect(),
        soak_min,
        soak_max,
        travel: line_travel(&pos),
        load_config: LoadConfig::Dissociated,
        multitank: BTreeMap::new(),
        carrier_limit: None,
        scale: 1,
    }
}

/// Knobs for [`random_small`].
#[derive(Clone, Copy, Debug)]
pub struct SmallParams {
    pub min_ops: usize,
    pub max_ops: usize,
    pub multifunction: bool,
    pub carrier_limits: bool,
    pub station_minima: bool,
}

impl Default for SmallParams {
    fn default() -> Self {
        Self {
            min_ops: 4,
            max_ops: 7,
            multifunction: true,
            carrier_limits: true,
            station_minima: true,
        }
    }
}

/// Small mixed instance for oracle tests: reused tanks, random load configuration and carrier limit.
pub fn random_small(seed: u64, p: &SmallParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5a11);
    let n = rng.random_range(p.min_ops..=p.max_ops);
    let mut tank_of = vec![0usize];
    let mut num_tanks = 0usize;
    for i in 1..=n {
        let prev = tank_of[i - 1];
        let reuse: Vec<usize> = (1..=num_tanks).filter(|&t| t != prev).collect();
        if p.multifunction && !reuse.is_empty() && i >= 3 && rng.random_bool(0.25) {
            tank_of.push(reuse[rng.random_range(0..reuse.len())]);
        } else {
            num_tanks += 1;
            tank_of.push(num_tanks);
        }
    }
    let associated_geometry = rng.random_bool(0.5);
    let size = if associated_geometry {
        num_tanks + 1
    } else {
        num_tanks + 2
    };
    let mut pos = vec![0i64];
    for _ in 1..size {
        pos.push(pos.last().unwrap() + rng.random_range(1..=5));
    }
    // shuffle the soaking tanks along the line so reuse does not always mean travelling back
    for k in (2..=num_tanks).rev() {
        let j = rng.random_range(1..=k);
        pos.swap(k, j);
    }
    tank_of.push(if associated_geometry {
        0
    } else {
        num_tanks + 1
    });
    let travel = line_travel(&pos);
    let e = |i: usize, j: usize| travel[tank_of[i]][tank_of[j]];
    let move_duration: Vec<i64> = (0..=n)
        .map(|i| (e(i, i + 1) + rng.random_range(0..=3)).max(1))
        .collect();
    let mut soak_min = vec![0i64; n + 2];
    let mut soak_max = vec![Limit::Infinite; n + 2];
    for i in 1..=n {
        soak_min[i] = rng.random_range(5..=60);
        if rng.random_bool(0.7) {
            soak_max[i] = Limit::Finite(soak_min[i] + rng.random_range(0..=60));
        }
    }
    if p.station_minima && rng.random_bool(0.4) {
        soak_min[0] = rng.random_range(0..=30);
        soak_min[n + 1] = rng.random_range(0..=15);
    }
    let load_config = if rng.random_bool(0.5) {
        LoadConfig::Associated
    } else {
        LoadConfig::Dissociated
    };
    let carrier_limit = if p.carrier_limits && rng.random_bool(0.3) {
        Some(rng.random_range(1..=3u32))
    } else {
        None
    };
    Instance {
        name: format!("small_{seed}"),
        num_tanks,
        num_ops: n,
        tank_of,
        tank_capacity: BTreeMap::new(),
        move_duration,
        soak_min,
        soak_max,
        travel,
        load_config,
        multitank: BTreeMap::new(),
        carrier_limit,
        scale: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_ex1_matches_table() {
        let ex1 = builtin("ex1").unwrap();
        assert_eq!(ex1.tank_of, vec![0, 1, 2, 0]);
        assert_eq!(ex1.move_duration, vec![10, 10, 20]);
        assert_eq!(ex1.soak_min, vec![0, 40, 120, 0]);
        assert_eq!(
            ex1.soak_max,
            vec![
                Limit::Infinite,
                Limit::Finite(100),
                Limit::Infinite,
                Limit::Infinite
            ]
        );
        assert_eq!(ex1.load_config, LoadConfig::Associated);
    }

    #[test]
    fn builtin_ex2_matches_description() {
        let ex2 = builtin("ex2").unwrap();
        assert_eq!(ex2.tank_of, vec![0, 1, 2, 1, 3, 1, 0]);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(ex2.travel[a][b], 10 * (a as i64 - b as i64).abs());
            }
        }
        for i in 0..=5 {
            assert_eq!(ex2.d(i), ex2.e(i, i + 1));
        }
        assert!(ex2.soak_max.iter().all(|u| u.is_infinite()));
    }

    #[test]
    fn unknown_and_missing_builtins() {
        assert!(matches!(
            builtin("nope"),
            Err(BenchError::UnknownBuiltin(_))
        ));
        if std::env::var_os(DATA_DIR_ENV).is_none() {
            let err = builtin("philu").unwrap_err();
            assert!(err.to_string().contains("data missing"), "{err}");
        }
    }

    #[test]
    fn manifest_pins_embedded_files() {
        let m = manifest();
        for name in ["ex1", "ex2"] {
            let text = embedded_text(name).unwrap();
            assert_eq!(
                m[&format!("{name}.json")],
                sha256_hex(text.as_bytes()),
                "{name} drifted"
            );
        }
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["ex1", "ex2"] {
            let inst = builtin(name).unwrap();
            let path = dir.path().join(format!("{name}.json"));
            save_instance(&inst, &path).unwrap();
            assert_eq!(load_instance(&path).unwrap(), inst);
        }
    }

    #[test]
    fn missing_travel_row_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(EX1).unwrap();
        v["travel"].as_array_mut().unwrap().pop();
        let err = parse_instance(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("travel row 2 is missing"), "{err}");
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_instance("{\n \"name\": \"x\",\n \"num_tanks\": oops\n}").unwrap_err();
        match err {
            BenchError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn generator_shares_draws_across_mu() {
        let a = generate(&GeneratorParams::new(14, 1.5, 3));
        let b = generate(&GeneratorParams::new(14, 2.5, 3));
        assert_eq!(a.travel, b.travel);
        assert_eq!(a.move_duration, b.move_duration);
        assert_eq!(a.soak_min, b.soak_min);
        assert_ne!(a.soak_max, b.soak_max);
        assert!(a.validate().is_empty());
    }

    #[test]
    fn generator_rounding() {
        let p = GeneratorParams::new(6, 1.5, 11);
        let g = generate(&p);
        let f = generate(&GeneratorParams {
            floor_upper: true,
            ..p
        });
        for i in 1..=6 {
            let x = 1.5 * g.soak_min[i] as f64;
            assert_eq!(g.soak_max[i], Limit::Finite((x + 0.5).floor() as i64));
            assert_eq!(f.soak_max[i], Limit::Finite(x.floor() as i64));
        }
    }

    #[test]
    fn random_small_instances_are_valid() {
        for seed in 0..300 {
            let inst = random_small(seed, &SmallParams::default());
            assert!(
                inst.validate().is_empty(),
                "seed {seed}: {:?}",
                inst.validate()
            );
        }
    }
}
