//! MIP formulations of the cyclic hoist scheduling problem over the neutral linear model.
//!
//! Column names: `C`, `t_i`, `y_i_j` (move i before move j), `z_i` (move i is the latest),
//! `tmax`, `dp_i` (slack after move i), `u_i_m` (operation i uses m parallel tanks).
//! Multidegree models label move (p, i) as `p_i` with p starting at 1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use hoistlab_milp::{lp_relax, LinExpr, Model, Sense, SimplexError, VarKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{div_ceil, div_floor, Instance, Limit, LoadConfig, Multitank};

pub const DEFECT_PHILLIPS_MULTIFUNCTION: &str = "phillips_multifunction_overlap";
pub const DEFECT_ZHOU_MULTITANK: &str = "zhou_multitank_bounds";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormulationId {
    Phillips,
    Leung,
    LeungPlus,
    Zhou,
    Imp1,
    Imp1Plus,
    Liu,
    Imp2,
}

impl FormulationId {
    pub const ALL: [FormulationId; 8] = [
        FormulationId::Phillips,
        FormulationId::Leung,
        FormulationId::LeungPlus,
        FormulationId::Zhou,
        FormulationId::Imp1,
        FormulationId::Imp1Plus,
        FormulationId::Liu,
        FormulationId::Imp2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormulationId::Phillips => "Phillips",
            FormulationId::Leung => "Leung",
            FormulationId::LeungPlus => "LeungPlus",
            FormulationId::Zhou => "Zhou",
            FormulationId::Imp1 => "Imp1",
            FormulationId::Imp1Plus => "Imp1Plus",
            FormulationId::Liu => "Liu",
            FormulationId::Imp2 => "Imp2",
        }
    }

    /// The cycle must end when the hoist returns after the latest move.
    pub fn restricted(self) -> bool {
        matches!(
            self,
            FormulationId::Phillips | FormulationId::Leung | FormulationId::LeungPlus
        )
    }

    /// Uses the latest-move indicators z and t_max.
    pub fn extended(self) -> bool {
        !matches!(self, FormulationId::Liu | FormulationId::Imp2)
    }

    /// Soak rows drop the big-M term on the side that cannot bind.
    pub fn strengthened_soak(self) -> bool {
        !matches!(
            self,
            FormulationId::Phillips | FormulationId::Zhou | FormulationId::Liu
        )
    }

    pub fn has_valid_inequalities(self) -> bool {
        matches!(self, FormulationId::LeungPlus | FormulationId::Imp1Plus)
    }
}

impl fmt::Display for FormulationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormulationId {
    type Err = FormulationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace(['+', '-', '_'], "");
        let key = if s.ends_with('+') {
            format!("{key}plus")
        } else {
            key
        };
        FormulationId::ALL
            .into_iter()
            .find(|f| f.name().to_ascii_lowercase() == key)
            .ok_or_else(|| FormulationError::UnknownFormulation(s.to_string()))
    }
}

/// Which tank-sharing or multitank rows to emit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Corrected,
    /// The rows as originally published for the formulation, defects included.
    Faithful,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultifunctionMode {
    Corrected,
    FaithfulPhillips,
    FaithfulLiu,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulationSpec {
    pub id: FormulationId,
    pub load_config: Option<LoadConfig>,
    pub multifunction: Encoding,
    /// Replaces the instance's multitank operations when set.
    pub multitank: Option<BTreeMap<usize, Multitank>>,
    pub multitank_encoding: Encoding,
    pub carrier_limit: Option<u32>,
    /// Liu only: adds free slack columns after each move.
    pub liu_slack: bool,
    /// Declares C integer, matching integer-scaled data.
    pub integer_cycle: bool,
}

impl FormulationSpec {
    pub fn new(id: FormulationId) -> Self {
        Self {
            id,
            load_config: None,
            multifunction: Encoding::Corrected,
            multitank: None,
            multitank_encoding: Encoding::Corrected,
            carrier_limit: None,
            liu_slack: false,
            integer_cycle: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FormulationError {
    #[error("unknown formulation {0:?}")]
    UnknownFormulation(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("operation {op} asks for {m} tanks but its tank holds {cap}")]
    Capacity { op: usize, m: u32, cap: u32 },
    #[error("model has no column {0}")]
    MissingColumn(String),
    #[error("carrier limit must be at least 1")]
    ZeroCarrierLimit,
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

const INF: f64 = f64::INFINITY;

fn col(model: &Model, name: &str) -> Result<LinExpr, FormulationError> {
    model
        .var_id(name)
        .map(LinExpr::var)
        .ok_or_else(|| FormulationError::MissingColumn(name.to_string()))
}

fn opt_col(model: &Model, name: &str) -> LinExpr {
    model.var_id(name).map_or_else(LinExpr::new, LinExpr::var)
}

/// Indicator that move `a` precedes move `b`. Moves without a column are fixed by position:
/// the root move `0` precedes everything.
fn y(model: &Model, a: &str, b: &str) -> Result<LinExpr, FormulationError> {
    if let Some(v) = model.var_id(&format!("y_{a}_{b}")) {
        return Ok(LinExpr::var(v));
    }
    if let Some(v) = model.var_id(&format!("y_{b}_{a}")) {
        return Ok(LinExpr::constant(1.0) - LinExpr::var(v));
    }
    match (a, b) {
        ("0", _) => Ok(LinExpr::constant(1.0)),
        (_, "0") => Ok(LinExpr::constant(0.0)),
        _ => Err(FormulationError::MissingColumn(format!("y_{a}_{b}"))),
    }
}

fn yi(model: &Model, a: usize, b: usize) -> Result<LinExpr, FormulationError> {
    y(model, &a.to_string(), &b.to_string())
}

fn t(model: &Model, i: usize) -> Result<LinExpr, FormulationError> {
    col(model, &format!("t_{i}"))
}

fn c(model: &Model) -> Result<LinExpr, FormulationError> {
    col(model, "C")
}

fn k(v: i64) -> LinExpr {
    LinExpr::constant(v as f64)
}

/// Duration of move i, plus its slack column if present.
fn dur(model: &Model, inst: &Instance, i: usize) -> LinExpr {
    opt_col(model, &format!("dp_{i}")) + inst.d(i) as f64
}

fn effective(inst: &Instance, spec: &FormulationSpec) -> Result<Instance, FormulationError> {
    let mut inst = inst.clone();
    if let Some(lc) = spec.load_config {
        inst.load_config = lc;
    }
    if let Some(mt) = &spec.multitank {
        inst.multitank = mt.clone();
    }
    if spec.carrier_limit.is_some() {
        inst.carrier_limit = spec.carrier_limit;
    }
    for (&op, &mt) in &inst.multitank {
        if let Multitank::Fixed(m) = mt {
            let cap = inst.capacity(inst.tank_of[op]);
            if m == 0 || m > cap {
                return Err(FormulationError::Capacity { op, m, cap });
            }
        }
    }
    Ok(inst)
}

fn is_multitank(inst: &Instance, op: usize) -> bool {
    inst.multitank
        .get(&op)
        .is_some_and(|m| *m != Multitank::Fixed(1))
}

/// Builds the named formulation, minimizing C.
pub fn build_model(inst: &Instance, spec: &FormulationSpec) -> Result<Model, FormulationError> {
    let inst = effective(inst, spec)?;
    let id = spec.id;
    if matches!(
        id,
        FormulationId::Phillips | FormulationId::Leung | FormulationId::LeungPlus
    ) && inst.has_multitank()
    {
        return Err(FormulationError::Unsupported(format!(
            "{id} has no multitank rows"
        )));
    }
    let n = inst.num_ops;
    let big = inst.big_m() as f64;
    let mut m = Model::new();
    m.metadata.formulation = Some(id.name().to_string());

    let kind = if spec.integer_cycle {
        VarKind::Integer
    } else {
        VarKind::Continuous
    };
    let cv = m.add_var("C", kind, 0.0, INF);
    for i in 0..=n {
        let lo = if id == FormulationId::Imp2 && i > 0 {
            (inst.d(0) + inst.e(1, i)) as f64
        } else {
            0.0
        };
        let v = m.add_continuous(format!("t_{i}"), lo, INF);
        if i == 0 {
            m.fix(v, 0.0);
        }
    }
    let pairs: Vec<(usize, usize)> = match id {
        FormulationId::Phillips | FormulationId::Zhou | FormulationId::Liu => (0..=n)
            .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
            .collect(),
        FormulationId::Leung | FormulationId::LeungPlus => (1..=n)
            .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
            .collect(),
        FormulationId::Imp1 | FormulationId::Imp1Plus => (0..=n)
            .flat_map(|i| (0..=n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect(),
        FormulationId::Imp2 => (1..=n)
            .flat_map(|i| (1..=n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect(),
    };
    for &(i, j) in &pairs {
        let v = m.add_binary(format!("y_{i}_{j}"));
        if i == 0 {
            m.fix(v, 1.0);
        } else if j == 0 {
            m.fix(v, 0.0);
        }
    }
    if id.extended() {
        for i in 1..=n {
            m.add_binary(format!("z_{i}"));
        }
        m.add_continuous("tmax", 0.0, INF);
    }
    if id == FormulationId::Liu && spec.liu_slack {
        for i in 0..=n {
            m.add_continuous(format!("dp_{i}"), 0.0, INF);
        }
    }
    let cx = LinExpr::var(cv);

    // cycle
    if id.extended() {
        let tmax = col(&m, "tmax")?;
        let mut sum = LinExpr::new();
        let mut zs = LinExpr::new();
        for i in 1..=n {
            let z = col(&m, &format!("z_{i}"))?;
            sum = sum + z.clone() * (inst.d(i) + inst.e(i + 1, 0)) as f64;
            zs = zs + z.clone();
            m.add_constraint(format!("tmax_lo_{i}"), tmax.clone(), Sense::Ge, t(&m, i)?);
            m.add_constraint(
                format!("tmax_hi_{i}"),
                tmax.clone(),
                Sense::Le,
                t(&m, i)? + (k(1) - z) * big,
            );
        }
        m.add_constraint("zsum", zs, Sense::Eq, k(1));
        let sense = if id.restricted() {
            Sense::Eq
        } else {
            Sense::Ge
        };
        m.add_constraint("cyc", cx.clone(), sense, tmax + sum);
    } else {
        for i in 1..=n {
            let rhs = t(&m, i)? + dur(&m, &inst, i) + inst.e(i + 1, 0) as f64;
            m.add_constraint(format!("cyc_{i}"), cx.clone(), Sense::Ge, rhs);
        }
    }
    if matches!(id, FormulationId::Zhou | FormulationId::Liu)
        && inst.load_config == LoadConfig::Associated
    {
        let idle = cx.clone() - t(&m, n)? - dur(&m, &inst, n);
        m.add_constraint("ret_lo", idle.clone(), Sense::Ge, k(inst.soak_min[0]));
        if let Some(u0) = inst.soak_max[0].finite() {
            m.add_constraint("ret_hi", idle, Sense::Le, k(u0));
        }
    }

    // pairing
    if matches!(
        id,
        FormulationId::Imp1 | FormulationId::Imp1Plus | FormulationId::Imp2
    ) {
        for &(i, j) in pairs.iter().filter(|(i, j)| i < j) {
            let e = col(&m, &format!("y_{i}_{j}"))? + col(&m, &format!("y_{j}_{i}"))?;
            m.add_constraint(format!("pair_{i}_{j}"), e, Sense::Eq, k(1));
        }
    }

    // travel
    let travel = |m: &mut Model, i: usize, j: usize, yv: LinExpr| -> Result<(), FormulationError> {
        let rhs = t(m, i)? + dur(m, &inst, i) + inst.e(i + 1, j) as f64 - (k(1) - yv) * big;
        m.add_constraint(format!("trav_{i}_{j}"), t(m, j)?, Sense::Ge, rhs);
        Ok(())
    };
    match id {
        FormulationId::Phillips | FormulationId::Zhou => {
            for &(i, j) in &pairs {
                {
                    let yv = yi(&m, i, j)?;
                    travel(&mut m, i, j, yv)?;
                }
                if i > 0 {
                    {
                        let yv = yi(&m, j, i)?;
                        travel(&mut m, j, i, yv)?;
                    }
                }
            }
        }
        FormulationId::Leung | FormulationId::LeungPlus | FormulationId::Liu => {
            for j in 1..=n {
                let rhs = dur(&m, &inst, 0) + inst.e(1, j) as f64;
                m.add_constraint(format!("trav_0_{j}"), t(&m, j)?, Sense::Ge, rhs);
            }
            for &(i, j) in pairs.iter().filter(|(i, _)| *i > 0) {
                {
                    let yv = yi(&m, i, j)?;
                    travel(&mut m, i, j, yv)?;
                }
                {
                    let yv = yi(&m, j, i)?;
                    travel(&mut m, j, i, yv)?;
                }
            }
        }
        FormulationId::Imp1 | FormulationId::Imp1Plus | FormulationId::Imp2 => {
            for &(i, j) in &pairs {
                {
                    let yv = yi(&m, i, j)?;
                    travel(&mut m, i, j, yv)?;
                }
            }
        }
    }

    // soak
    for i in 1..=n {
        if is_multitank(&inst, i) {
            continue;
        }
        if matches!(id, FormulationId::Leung | FormulationId::LeungPlus) && i == 1 {
            let base = t(&m, 1)? - inst.d(0) as f64;
            m.add_constraint("soak_lo_1", base.clone(), Sense::Ge, k(inst.soak_min[1]));
            if let Some(u) = inst.soak_max[1].finite() {
                m.add_constraint("soak_hi_1", base, Sense::Le, k(u));
            }
            continue;
        }
        soak_rows(&mut m, &inst, i, 0, id.strengthened_soak(), big)?;
    }

    // valid inequalities
    match id {
        FormulationId::LeungPlus => {
            for i in 1..=n {
                let zi = col(&m, &format!("z_{i}"))?;
                let mut succ = LinExpr::new();
                for j in 1..=n {
                    if j == i {
                        continue;
                    }
                    succ = succ + yi(&m, i, j)?;
                    if j > i {
                        m.add_constraint(
                            format!("vi_last_{i}_{j}"),
                            yi(&m, i, j)?,
                            Sense::Le,
                            k(1) - zi.clone(),
                        );
                        let zj = col(&m, &format!("z_{j}"))?;
                        m.add_constraint(format!("vi_pred_{i}_{j}"), zj, Sense::Le, yi(&m, i, j)?);
                    }
                }
                m.add_constraint(format!("vi_succ_{i}"), k(1) - zi, Sense::Le, succ);
            }
        }
        FormulationId::Imp1Plus => {
            for i in 1..=n {
                let zi = col(&m, &format!("z_{i}"))?;
                let mut succ = LinExpr::new();
                for j in (0..=n).filter(|&j| j != i) {
                    succ = succ + yi(&m, i, j)?;
                    m.add_constraint(
                        format!("vi_last_{i}_{j}"),
                        yi(&m, i, j)?,
                        Sense::Le,
                        k(1) - zi.clone(),
                    );
                }
                m.add_constraint(format!("vi_succ_{i}"), k(1) - zi, Sense::Le, succ);
            }
        }
        _ => {}
    }

    attach_load_constraints(&mut m, &inst)?;

    let mode = match (spec.multifunction, id) {
        (Encoding::Faithful, FormulationId::Phillips) => MultifunctionMode::FaithfulPhillips,
        (Encoding::Faithful, FormulationId::Liu) => MultifunctionMode::FaithfulLiu,
        _ => MultifunctionMode::Corrected,
    };
    attach_multifunction_constraints(&mut m, &inst, mode)?;

    let faithful_zhou = id == FormulationId::Zhou && spec.multitank_encoding == Encoding::Faithful;
    for (&op, &level) in &inst.multitank {
        if is_multitank(&inst, op) {
            let enc = if faithful_zhou {
                Encoding::Faithful
            } else {
                Encoding::Corrected
            };
            attach_multitank_constraints(&mut m, &inst, op, level, enc)?;
        }
    }
    if let Some(limit) = inst.carrier_limit {
        attach_carrier_limit(&mut m, &inst, limit)?;
    }
    m.set_objective(cx);
    Ok(m)
}

/// Soak rows of operation i, with the multitank shift `(level - 1) * C` applied.
fn soak_rows(
    m: &mut Model,
    inst: &Instance,
    i: usize,
    shift: i64,
    strong: bool,
    big: f64,
) -> Result<(), FormulationError> {
    let yv = yi(m, i - 1, i)?;
    let base = t(m, i)? - t(m, i - 1)? - dur(m, inst, i - 1) + c(m)? * shift as f64;
    let wrapped = base.clone() + c(m)?;
    let (l, u) = (inst.soak_min[i], inst.soak_max[i].finite());
    let not_y = k(1) - yv.clone();
    m.add_constraint(
        format!("soak_lo_{i}"),
        base.clone(),
        Sense::Ge,
        k(l) - not_y.clone() * big,
    );
    if let Some(u) = u {
        let rhs = if strong { k(u) } else { k(u) + not_y * big };
        m.add_constraint(format!("soak_hi_{i}"), base, Sense::Le, rhs);
    }
    let rhs = if strong {
        k(l)
    } else {
        k(l) - yv.clone() * big
    };
    m.add_constraint(format!("soakw_lo_{i}"), wrapped.clone(), Sense::Ge, rhs);
    if let Some(u) = u {
        m.add_constraint(format!("soakw_hi_{i}"), wrapped, Sense::Le, k(u) + yv * big);
    }
    Ok(())
}

/// Station rows for the instance's load configuration.
pub fn attach_load_constraints(model: &mut Model, inst: &Instance) -> Result<(), FormulationError> {
    let n = inst.num_ops;
    let cx = c(model)?;
    let (l0, ln1) = (inst.soak_min[0], inst.soak_min[n + 1]);
    match inst.load_config {
        LoadConfig::Dissociated => {
            let lo = l0.max(ln1);
            if lo > 0 {
                model.add_constraint("load_lo", cx.clone(), Sense::Ge, k(lo));
            }
            if let Some(hi) = inst.soak_max[0].min(inst.soak_max[n + 1]).finite() {
                model.add_constraint("load_hi", cx, Sense::Le, k(hi));
            }
        }
        LoadConfig::Associated => {
            let end = t(model, n)? + dur(model, inst, n);
            if l0 + ln1 > 0 {
                model.add_constraint(
                    "load_gap",
                    end.clone() + (l0 + ln1) as f64,
                    Sense::Le,
                    cx.clone(),
                );
            }
            if let Some(u0) = inst.soak_max[0].finite() {
                model.add_constraint("load_idle", cx, Sense::Le, end + u0 as f64);
            }
        }
    }
    Ok(())
}

/// Non-overlap rows for every pair of operations sharing a tank.
pub fn attach_multifunction_constraints(
    model: &mut Model,
    inst: &Instance,
    mode: MultifunctionMode,
) -> Result<(), FormulationError> {
    let big = inst.big_m() as f64;
    let pairs: Vec<(usize, usize)> = inst
        .multifunction_pairs()
        .into_iter()
        .filter(|&(i, j)| !is_multitank(inst, i) && !is_multitank(inst, j))
        .collect();
    if pairs.is_empty() {
        return Ok(());
    }
    if mode == MultifunctionMode::FaithfulPhillips
        && !model
            .metadata
            .defects
            .iter()
            .any(|d| d == DEFECT_PHILLIPS_MULTIFUNCTION)
    {
        model
            .metadata
            .defects
            .push(DEFECT_PHILLIPS_MULTIFUNCTION.to_string());
    }
    for (i, j) in pairs {
        match mode {
            MultifunctionMode::Corrected => {
                let lhs = yi(model, i - 1, i)? + yi(model, i, j - 1)? + yi(model, j - 1, j)? + k(1)
                    - yi(model, i - 1, j)?;
                model.add_constraint(format!("mf_{i}_{j}"), lhs, Sense::Eq, k(3));
            }
            MultifunctionMode::FaithfulPhillips => {
                let lhs = yi(model, i - 1, i)? + yi(model, j - 1, j)?;
                model.add_constraint(format!("mf_c_{i}_{j}"), lhs, Sense::Ge, k(1));
                let yv = yi(model, i - 1, j - 1)?;
                let rhs = t(model, i - 1)?
                    + (inst.d(i - 1) + inst.soak_min[i] + inst.d(i) + inst.e(i + 1, j)) as f64
                    - (k(1) - yv.clone()) * big;
                model.add_constraint(format!("mf_ij_{i}_{j}"), t(model, j - 1)?, Sense::Ge, rhs);
                let rhs = t(model, j - 1)?
                    + (inst.d(j - 1) + inst.soak_min[j] + inst.d(j) + inst.e(j + 1, i)) as f64
                    - yv * big;
                model.add_constraint(format!("mf_ji_{i}_{j}"), t(model, i - 1)?, Sense::Ge, rhs);
            }
            MultifunctionMode::FaithfulLiu => {
                let both = yi(model, i - 1, i)? + yi(model, j - 1, j)?;
                model.add_constraint(format!("mf_c_{i}_{j}"), both.clone(), Sense::Ge, k(1));
                let lhs = yi(model, i, j - 1)? + k(1) - yi(model, i - 1, j)?;
                model.add_constraint(format!("mf_o_{i}_{j}"), lhs, Sense::Ge, k(3) - both);
            }
        }
    }
    Ok(())
}

/// Replaces the soak rows of `op` by the rows for `level` parallel tanks.
pub fn attach_multitank_constraints(
    model: &mut Model,
    inst: &Instance,
    op: usize,
    level: Multitank,
    encoding: Encoding,
) -> Result<(), FormulationError> {
    let cap = inst.capacity(inst.tank_of[op]);
    let suffix = format!("_{op}");
    model.constraints.retain(|r| {
        !(r.name.starts_with("soak")
            && r.name.ends_with(&suffix)
            && r.name[..r.name.len() - suffix.len()].matches('_').count() == 1)
    });
    let big = inst.big_m() as f64;
    let (l, u) = (inst.soak_min[op], inst.soak_max[op]);
    match level {
        Multitank::Fixed(m) => {
            if m == 0 || m > cap {
                return Err(FormulationError::Capacity { op, m, cap });
            }
            if m == 1 {
                return soak_rows(model, inst, op, 0, false, big);
            }
            soak_rows(model, inst, op, m as i64 - 1, false, big)?;
            let cx = c(model)?;
            match encoding {
                Encoding::Corrected => {
                    model.add_constraint(
                        format!("mt_clo_{op}"),
                        cx.clone(),
                        Sense::Ge,
                        k(div_ceil(l, m as i64)),
                    );
                    if let Limit::Finite(u) = u {
                        model.add_constraint(
                            format!("mt_chi_{op}"),
                            cx,
                            Sense::Le,
                            k(div_floor(u, m as i64 - 1)),
                        );
                    }
                }
                Encoding::Faithful => {
                    if !model
                        .metadata
                        .defects
                        .iter()
                        .any(|d| d == DEFECT_ZHOU_MULTITANK)
                    {
                        model
                            .metadata
                            .defects
                            .push(DEFECT_ZHOU_MULTITANK.to_string());
                    }
                    if let Limit::Finite(u) = u {
                        model.add_constraint(
                            format!("mt_clo_{op}"),
                            cx.clone(),
                            Sense::Ge,
                            k(div_ceil(u, m as i64)),
                        );
                    }
                    model.add_constraint(
                        format!("mt_chi_{op}"),
                        cx,
                        Sense::Le,
                        k(div_floor(l, m as i64 - 1)),
                    );
                }
            }
        }
        Multitank::Variable => {
            let big = big * cap as f64;
            let mut sel = LinExpr::new();
            let mut cols = Vec::new();
            for m in 1..=cap {
                let name = format!("u_{op}_{m}");
                let v = match model.var_id(&name) {
                    Some(v) => v,
                    None => model.add_binary(name),
                };
                sel = sel + LinExpr::var(v);
                cols.push((m, LinExpr::var(v)));
            }
            model.add_constraint(format!("mt_sel_{op}"), sel, Sense::Eq, k(1));
            let yv = yi(model, op - 1, op)?;
            for (m, uv) in cols {
                let base = t(model, op)? - t(model, op - 1)? - dur(model, inst, op - 1);
                let first = base.clone() + c(model)? * (m as f64 - 1.0);
                let second = base + c(model)? * m as f64;
                let off = k(1) - uv.clone();
                let rhs = k(l) - (k(2) - yv.clone() - uv.clone()) * big;
                model.add_constraint(format!("mt_lo_{op}_{m}"), first.clone(), Sense::Ge, rhs);
                model.add_constraint(
                    format!("mtw_lo_{op}_{m}"),
                    second.clone(),
                    Sense::Ge,
                    k(l) - off.clone() * big,
                );
                if let Limit::Finite(u) = u {
                    model.add_constraint(
                        format!("mt_hi_{op}_{m}"),
                        first,
                        Sense::Le,
                        k(u) + off.clone() * big,
                    );
                    model.add_constraint(
                        format!("mtw_hi_{op}_{m}"),
                        second,
                        Sense::Le,
                        k(u) + (yv.clone() + off) * big,
                    );
                }
            }
        }
    }
    Ok(())
}

/// Limits the carriers in the line to `limit`.
pub fn attach_carrier_limit(
    model: &mut Model,
    inst: &Instance,
    limit: u32,
) -> Result<(), FormulationError> {
    if limit == 0 {
        return Err(FormulationError::ZeroCarrierLimit);
    }
    let mut used = k(1);
    for i in 1..=inst.num_ops {
        let level = match inst.multitank.get(&i) {
            Some(Multitank::Variable) => {
                let cap = inst.capacity(inst.tank_of[i]);
                let mut e = LinExpr::new();
                for m in 1..=cap {
                    e = e + col(model, &format!("u_{i}_{m}"))? * m as f64;
                }
                e
            }
            Some(Multitank::Fixed(m)) => k(*m as i64),
            None => k(1),
        };
        used = used + level - yi(model, i - 1, i)?;
    }
    model.add_constraint("carriers", used, Sense::Le, k(limit as i64));
    Ok(())
}

/// LP relaxation value of a formulation.
pub fn relax(inst: &Instance, spec: &FormulationSpec) -> Result<f64, FormulationError> {
    let model = build_model(inst, spec)?;
    Ok(lp_relax(&model)?.objective)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultidegreeOptions {
    pub load_config: Option<LoadConfig>,
    pub multifunction: bool,
    pub carrier_limit: Option<u32>,
    /// One part type per copy; not available.
    pub multi_part: bool,
    pub integer_cycle: bool,
}

fn label(p: usize, i: usize) -> String {
    format!("{}_{i}", p + 1)
}

/// Model with r carriers entering per cycle, moves indexed by (copy, operation).
pub fn build_multidegree_model(
    inst: &Instance,
    r: usize,
    options: &MultidegreeOptions,
) -> Result<Model, FormulationError> {
    if options.multi_part {
        return Err(FormulationError::Unsupported("multi-part mode".into()));
    }
    if r == 0 {
        return Err(FormulationError::Unsupported("degree 0".into()));
    }
    let mut inst = inst.clone();
    if let Some(lc) = options.load_config {
        inst.load_config = lc;
    }
    if options.carrier_limit.is_some() {
        inst.carrier_limit = options.carrier_limit;
    }
    if inst.has_multitank() {
        return Err(FormulationError::Unsupported(
            "multitank operations in a multidegree model".into(),
        ));
    }
    let n = inst.num_ops;
    let big = (r as i64 * inst.big_m()) as f64;
    let moves: Vec<(usize, usize)> = (0..r).flat_map(|p| (0..=n).map(move |i| (p, i))).collect();
    let mut m = Model::new();
    m.metadata.formulation = Some(format!("Multidegree{r}"));
    let kind = if options.integer_cycle {
        VarKind::Integer
    } else {
        VarKind::Continuous
    };
    let cv = m.add_var("C", kind, 0.0, INF);
    for &(p, i) in &moves {
        let v = m.add_continuous(format!("t_{}", label(p, i)), 0.0, INF);
        if (p, i) == (0, 0) {
            m.fix(v, 0.0);
        }
    }
    for (a, &(p, i)) in moves.iter().enumerate() {
        for &(q, j) in &moves[a + 1..] {
            let v = m.add_binary(format!("y_{}_{}", label(p, i), label(q, j)));
            if i == 0 && j == 0 && q == p + 1 {
                m.fix(v, 1.0);
            }
        }
    }
    let cx = LinExpr::var(cv);
    let tt = |m: &Model, p: usize, i: usize| col(m, &format!("t_{}", label(p, i)));
    let yy =
        |m: &Model, a: (usize, usize), b: (usize, usize)| y(m, &label(a.0, a.1), &label(b.0, b.1));

    for &(p, i) in &moves {
        let rhs = tt(&m, p, i)? + (inst.d(i) + inst.e(i + 1, 0)) as f64;
        m.add_constraint(format!("cyc_{}", label(p, i)), cx.clone(), Sense::Ge, rhs);
    }
    for (a, &u) in moves.iter().enumerate() {
        for &v in &moves[a + 1..] {
            let yv = yy(&m, u, v)?;
            let fwd = tt(&m, u.0, u.1)? + (inst.d(u.1) + inst.e(u.1 + 1, v.1)) as f64
                - (k(1) - yv.clone()) * big;
            m.add_constraint(
                format!("trav_{}_{}", label(u.0, u.1), label(v.0, v.1)),
                tt(&m, v.0, v.1)?,
                Sense::Ge,
                fwd,
            );
            let back = tt(&m, v.0, v.1)? + (inst.d(v.1) + inst.e(v.1 + 1, u.1)) as f64 - yv * big;
            m.add_constraint(
                format!("trav_{}_{}", label(v.0, v.1), label(u.0, u.1)),
                tt(&m, u.0, u.1)?,
                Sense::Ge,
                back,
            );
        }
    }
    for p in 0..r {
        for i in 1..=n {
            let yv = yy(&m, (p, i - 1), (p, i))?;
            let base = tt(&m, p, i)? - tt(&m, p, i - 1)? - inst.d(i - 1) as f64;
            let wrapped = base.clone() + cx.clone();
            let (l, u) = (inst.soak_min[i], inst.soak_max[i].finite());
            let lab = label(p, i);
            m.add_constraint(
                format!("soak_lo_{lab}"),
                base.clone(),
                Sense::Ge,
                k(l) - (k(1) - yv.clone()) * big,
            );
            m.add_constraint(format!("soakw_lo_{lab}"), wrapped.clone(), Sense::Ge, k(l));
            if let Some(u) = u {
                m.add_constraint(format!("soak_hi_{lab}"), base, Sense::Le, k(u));
                m.add_constraint(
                    format!("soakw_hi_{lab}"),
                    wrapped,
                    Sense::Le,
                    k(u) + yv * big,
                );
            }
        }
    }
    // copies of one operation never share its tank
    for i in 1..=n {
        for p in 0..r {
            for q in p + 1..r {
                let lhs = yy(&m, (p, i - 1), (p, i))?
                    + yy(&m, (p, i), (q, i - 1))?
                    + yy(&m, (q, i - 1), (q, i))?
                    + k(1)
                    - yy(&m, (p, i - 1), (q, i))?;
                m.add_constraint(format!("ovl_{i}_{}_{}", p + 1, q + 1), lhs, Sense::Eq, k(3));
            }
        }
        if r > 2 {
            let mut sum = LinExpr::new();
            for p in 0..r {
                sum = sum + yy(&m, (p, i - 1), (p, i))?;
                sum = if p + 1 < r {
                    sum + yy(&m, (p, i), (p + 1, i - 1))?
                } else {
                    sum + k(1) - yy(&m, (0, i - 1), (r - 1, i))?
                };
            }
            m.add_constraint(format!("shift_{i}"), sum, Sense::Eq, k(2 * r as i64 - 1));
        }
    }
    let (l0, ln1, dn) = (inst.soak_min[0], inst.soak_min[n + 1], inst.d(n));
    // forward cyclic distance from x_a + off_a to x_b + off_b at least gap
    let gap_rows = |m: &mut Model,
                    name: String,
                    a: (usize, usize),
                    oa: i64,
                    b: (usize, usize),
                    ob: i64,
                    gap: i64| {
        let yv = yy(m, a, b)?;
        let diff = tt(m, b.0, b.1)? + ob as f64 - tt(m, a.0, a.1)? - oa as f64;
        m.add_constraint(
            name.clone(),
            diff.clone(),
            Sense::Ge,
            k(gap) - (k(1) - yv) * big,
        );
        m.add_constraint(format!("{name}w"), diff + cx.clone(), Sense::Ge, k(gap));
        Ok::<(), FormulationError>(())
    };
    match inst.load_config {
        LoadConfig::Dissociated if r == 1 => {}
        LoadConfig::Dissociated => {
            for p in 0..r {
                for q in 0..r {
                    if p != q {
                        gap_rows(
                            &mut m,
                            format!("dl_{}_{}", p + 1, q + 1),
                            (p, 0),
                            0,
                            (q, 0),
                            0,
                            l0,
                        )?;
                        gap_rows(
                            &mut m,
                            format!("du_{}_{}", p + 1, q + 1),
                            (p, n),
                            dn,
                            (q, n),
                            dn,
                            ln1,
                        )?;
                    }
                }
            }
        }
        LoadConfig::Associated => {
            for p in 0..r {
                for q in p..r {
                    gap_rows(
                        &mut m,
                        format!("a_{}_{}", p + 1, q + 1),
                        (p, n),
                        dn,
                        (q, 0),
                        0,
                        l0 + ln1,
                    )?;
                    if q > p {
                        gap_rows(
                            &mut m,
                            format!("a_{}_{}", q + 1, p + 1),
                            (q, n),
                            dn,
                            (p, 0),
                            0,
                            l0 + ln1,
                        )?;
                    }
                }
            }
        }
    }
    match inst.load_config {
        LoadConfig::Dissociated => {
            if l0.max(ln1) > 0 && r == 1 {
                m.add_constraint("load_lo", cx.clone(), Sense::Ge, k(l0.max(ln1)));
            }
            if let Some(hi) = inst.soak_max[0].min(inst.soak_max[n + 1]).finite() {
                if r == 1 {
                    m.add_constraint("load_hi", cx.clone(), Sense::Le, k(hi));
                }
            }
        }
        LoadConfig::Associated => {
            if let (1, Some(u0)) = (r, inst.soak_max[0].finite()) {
                m.add_constraint(
                    "load_idle",
                    cx.clone(),
                    Sense::Le,
                    tt(&m, 0, n)? + (dn + u0) as f64,
                );
            }
        }
    }
    if options.multifunction {
        for (i, j) in inst.multifunction_pairs() {
            for p in 0..r {
                for q in 0..r {
                    let lhs = yy(&m, (p, i - 1), (p, i))?
                        + yy(&m, (p, i), (q, j - 1))?
                        + yy(&m, (q, j - 1), (q, j))?
                        + k(1)
                        - yy(&m, (p, i - 1), (q, j))?;
                    m.add_constraint(
                        format!("mf_{i}_{j}_{}_{}", p + 1, q + 1),
                        lhs,
                        Sense::Eq,
                        k(3),
                    );
                }
            }
        }
    }
    if let Some(limit) = inst.carrier_limit {
        let mut used = k(r as i64);
        for p in 0..r {
            for i in 1..=n {
                used = used + k(1) - yy(&m, (p, i - 1), (p, i))?;
            }
        }
        m.add_constraint("carriers", used, Sense::Le, k(limit as i64));
    }
    m.set_objective(cx);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::builtin;
    use crate::schedule::{check_simple_cycle, CheckOptions, Family, Schedule};
    use hoistlab_milp::{mip_solve, MipOptions, MipStatus};

    fn names(m: &Model, prefix: &str) -> Vec<String> {
        m.rows_with_prefix(prefix).map(|r| r.name.clone()).collect()
    }

    fn mip(m: &Model) -> f64 {
        let r = mip_solve(
            m,
            &MipOptions {
                integral_objective: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        r.objective.unwrap()
    }

    #[test]
    fn parse_ids() {
        assert_eq!(
            "imp2".parse::<FormulationId>().unwrap(),
            FormulationId::Imp2
        );
        assert_eq!(
            "Leung+".parse::<FormulationId>().unwrap(),
            FormulationId::LeungPlus
        );
        assert_eq!(
            "imp1plus".parse::<FormulationId>().unwrap(),
            FormulationId::Imp1Plus
        );
        assert!("gurobi".parse::<FormulationId>().is_err());
    }

    #[test]
    fn imp2_on_ex1_shape() {
        let ex1 = builtin("ex1").unwrap();
        let m = build_model(&ex1, &FormulationSpec::new(FormulationId::Imp2)).unwrap();
        let cols: Vec<&str> = m.variables.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(cols, ["C", "t_0", "t_1", "t_2", "y_1_2", "y_2_1"]);
        assert_eq!(m.variables[1].fixed, Some(0.0));
        assert_eq!(names(&m, "cyc").len(), 2);
        assert_eq!(names(&m, "trav").len(), 2);
        assert_eq!(names(&m, "pair").len(), 1);
        assert_eq!(names(&m, "soak").len(), 6);
        assert_eq!(m.num_constraints(), 11);
    }

    #[test]
    fn phillips_on_ex1_shape() {
        let ex1 = builtin("ex1").unwrap();
        let m = build_model(&ex1, &FormulationSpec::new(FormulationId::Phillips)).unwrap();
        for v in ["z_1", "z_2", "tmax", "y_0_1", "y_0_2", "y_1_2"] {
            assert!(m.var_id(v).is_some(), "{v}");
        }
        let cyc = m.rows_with_prefix("cyc").next().unwrap();
        assert_eq!(cyc.sense, Sense::Eq);
        assert!(m.metadata.defects.is_empty());
    }

    #[test]
    fn leung_plus_valid_inequalities() {
        let ex1 = builtin("ex1").unwrap();
        let m = build_model(&ex1, &FormulationSpec::new(FormulationId::LeungPlus)).unwrap();
        assert_eq!(names(&m, "vi_last"), ["vi_last_1_2"]);
        assert_eq!(names(&m, "vi_pred"), ["vi_pred_1_2"]);
        assert_eq!(names(&m, "vi_succ"), ["vi_succ_1", "vi_succ_2"]);
    }

    #[test]
    fn ex1_formulation_optima() {
        let ex1 = builtin("ex1").unwrap();
        for id in FormulationId::ALL {
            let m = build_model(&ex1, &FormulationSpec::new(id)).unwrap();
            let want = if id.restricted() { 200.0 } else { 160.0 };
            assert!((mip(&m) - want).abs() < 1e-6, "{id}");
        }
    }

    #[test]
    fn load_rows() {
        let ex1 = builtin("ex1").unwrap();
        let m = build_model(&ex1, &FormulationSpec::new(FormulationId::Imp2)).unwrap();
        assert_eq!(names(&m, "load").len(), 0);
        let mut d = ex1.dissociated();
        d.load_config = LoadConfig::Dissociated;
        d.soak_min[0] = 50;
        let m = build_model(&d, &FormulationSpec::new(FormulationId::Imp2)).unwrap();
        let row = m.rows_with_prefix("load").next().unwrap();
        assert_eq!((row.sense, row.rhs, row.terms.len()), (Sense::Ge, 50.0, 1));
    }

    #[test]
    fn ex2_multifunction_rows() {
        let ex2 = builtin("ex2").unwrap();
        let m = build_model(&ex2, &FormulationSpec::new(FormulationId::Imp2)).unwrap();
        assert_eq!(names(&m, "mf_"), ["mf_1_3", "mf_1_5", "mf_3_5"]);
        assert!((mip(&m) - 290.0).abs() < 1e-6);
        let mut plain = ex2.clone();
        plain.tank_of = vec![0, 1, 2, 3, 4, 5, 0];
        plain.travel = (0..6)
            .map(|a: i64| (0..6).map(|b: i64| 10 * (a - b).abs()).collect())
            .collect();
        plain.num_tanks = 5;
        let m = build_model(&plain, &FormulationSpec::new(FormulationId::Imp2)).unwrap();
        assert_eq!(names(&m, "mf_").len(), 0);
    }

    #[test]
    fn faithful_phillips_admits_overlap() {
        let ex2 = builtin("ex2").unwrap();
        let spec = FormulationSpec {
            multifunction: Encoding::Faithful,
            ..FormulationSpec::new(FormulationId::Phillips)
        };
        let m = build_model(&ex2, &spec).unwrap();
        assert_eq!(m.metadata.defects, [DEFECT_PHILLIPS_MULTIFUNCTION]);
        // op 1 soaks from 10 to 200 while op 3 occupies the same tank from 90 to 160
        let sched = Schedule::simple(310, vec![0, 200, 80, 160, 230, 300]);
        let rep = check_simple_cycle(&ex2, &sched, &CheckOptions::default());
        assert!(
            rep.violations
                .iter()
                .all(|v| v.family == Family::Multifunction),
            "{rep}"
        );
        assert!(!rep.feasible);
        let values = assignment(&m, &ex2, &sched);
        assert_eq!(m.violations(&values, 1e-6), vec![]);
        let corrected = build_model(&ex2, &FormulationSpec::new(FormulationId::Phillips)).unwrap();
        assert!(!corrected
            .violations(&assignment(&corrected, &ex2, &sched), 1e-6)
            .is_empty());
    }

    /// Column values encoding a degree-1 schedule.
    fn assignment(m: &Model, inst: &Instance, s: &Schedule) -> Vec<f64> {
        let n = inst.num_ops;
        let latest = (0..=n).max_by_key(|&i| s.start[i]).unwrap();
        m.variables
            .iter()
            .map(|v| {
                let parts: Vec<&str> = v.name.split('_').collect();
                let num = |k: usize| parts[k].parse::<usize>().unwrap();
                match parts[0] {
                    "C" => s.cycle_time as f64,
                    "t" => s.start[num(1)] as f64,
                    "tmax" => s.start[latest] as f64,
                    "y" => f64::from(u8::from(s.start[num(1)] < s.start[num(2)])),
                    "z" => f64::from(u8::from(num(1) == latest)),
                    other => panic!("{other}"),
                }
            })
            .collect()
    }

    #[test]
    fn multitank_rows() {
        let mut inst = builtin("ex1").unwrap();
        inst.soak_min[2] = 500;
        inst.soak_max[2] = Limit::Finite(700);
        inst.tank_capacity.insert(2, 3);
        let mut spec = FormulationSpec::new(FormulationId::Imp2);
        spec.multitank = Some([(2, Multitank::Fixed(3))].into());
        let m = build_model(&inst, &spec).unwrap();
        let lo = m.rows_with_prefix("mt_clo").next().unwrap();
        let hi = m.rows_with_prefix("mt_chi").next().unwrap();
        assert_eq!((lo.rhs, hi.rhs), (167.0, 350.0));
        assert!(m
            .rows_with_prefix("soak")
            .all(|r| !r.name.ends_with("_2") || r.terms.iter().any(|&(v, _)| v == 0)));

        spec.multitank = Some([(2, Multitank::Fixed(4))].into());
        assert_eq!(
            build_model(&inst, &spec),
            Err(FormulationError::Capacity {
                op: 2,
                m: 4,
                cap: 3
            })
        );

        inst.tank_capacity.insert(2, 2);
        spec.multitank = Some([(2, Multitank::Variable)].into());
        let m = build_model(&inst, &spec).unwrap();
        assert_eq!(names(&m, "mt_sel"), ["mt_sel_2"]);
        assert_eq!(
            m.rows_with_prefix("mt")
                .filter(|r| !r.name.starts_with("mt_sel"))
                .count(),
            8
        );
        assert_eq!(
            m.rows_with_prefix("soak")
                .filter(|r| r.name.ends_with("_2"))
                .count(),
            0
        );

        spec.id = FormulationId::Phillips;
        assert!(matches!(
            build_model(&inst, &spec),
            Err(FormulationError::Unsupported(_))
        ));
    }

    #[test]
    fn fixed_single_level_matches_plain_soak() {
        let ex1 = builtin("ex1").unwrap();
        let mut model = build_model(&ex1, &FormulationSpec::new(FormulationId::Zhou)).unwrap();
        let before: Vec<_> = model.rows_with_prefix("soak").cloned().collect();
        attach_multitank_constraints(
            &mut model,
            &ex1,
            2,
            Multitank::Fixed(1),
            Encoding::Corrected,
        )
        .unwrap();
        let mut after: Vec<_> = model.rows_with_prefix("soak").cloned().collect();
        let mut before = before;
        before.sort_by(|a, b| a.name.cmp(&b.name));
        after.sort_by(|a, b| a.name.cmp(&b.name));
        assert_eq!(before, after);
    }

    #[test]
    fn zhou_faithful_multitank_is_flagged() {
        let mut inst = builtin("ex1").unwrap();
        inst.tank_capacity.insert(2, 2);
        inst.multitank.insert(2, Multitank::Fixed(2));
        let spec = FormulationSpec {
            multitank_encoding: Encoding::Faithful,
            ..FormulationSpec::new(FormulationId::Zhou)
        };
        let m = build_model(&inst, &spec).unwrap();
        assert_eq!(m.metadata.defects, [DEFECT_ZHOU_MULTITANK]);
        let hi = m.rows_with_prefix("mt_chi").next().unwrap();
        assert_eq!(hi.rhs, 120.0);
    }

    #[test]
    fn carrier_rows() {
        let ex1 = builtin("ex1").unwrap();
        let spec = FormulationSpec {
            carrier_limit: Some(1),
            ..FormulationSpec::new(FormulationId::Imp2)
        };
        let m = build_model(&ex1, &spec).unwrap();
        assert_eq!(names(&m, "carriers").len(), 1);
        assert!((mip(&m) - 200.0).abs() < 1e-6);
        let loose = FormulationSpec {
            carrier_limit: Some(3),
            ..FormulationSpec::new(FormulationId::Imp2)
        };
        assert!((mip(&build_model(&ex1, &loose).unwrap()) - 160.0).abs() < 1e-6);
    }

    #[test]
    fn multidegree_models() {
        let ex1 = builtin("ex1").unwrap();
        let opts = MultidegreeOptions {
            multifunction: true,
            ..Default::default()
        };
        let one = build_multidegree_model(&ex1, 1, &opts).unwrap();
        assert!((mip(&one) - 160.0).abs() < 1e-6);
        let two = build_multidegree_model(&ex1, 2, &opts).unwrap();
        assert_eq!(names(&two, "ovl_1").len(), 1);
        assert_eq!(names(&two, "ovl_2").len(), 1);
        assert!(mip(&two) <= 320.0 + 1e-6);
        let part = MultidegreeOptions {
            multi_part: true,
            ..opts
        };
        assert!(matches!(
            build_multidegree_model(&ex1, 2, &part),
            Err(FormulationError::Unsupported(_))
        ));
    }

    #[test]
    fn liu_slack_columns() {
        let ex1 = builtin("ex1").unwrap();
        let spec = FormulationSpec {
            liu_slack: true,
            ..FormulationSpec::new(FormulationId::Liu)
        };
        let m = build_model(&ex1, &spec).unwrap();
        assert!(m.var_id("dp_0").is_some());
        assert!((mip(&m) - 160.0).abs() < 1e-6);
        let plain = build_model(&ex1, &FormulationSpec::new(FormulationId::Liu)).unwrap();
        assert!(plain.var_id("dp_0").is_none());
    }
}
