//! Solver-agnostic linear model.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    /// Set by [`Model::fix`]; the bounds are collapsed to the same value.
    pub fixed: Option<f64>,
}

impl Variable {
    /// Bounds actually seen by a solver.
    pub fn effective_bounds(&self) -> (f64, f64) {
        match self.fixed {
            Some(v) => (v, v),
            None => (self.lower, self.upper),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Free-form labels carried into exported artifacts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metadata {
    pub formulation: Option<String>,
    pub defects: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("constraint `{row}` references undeclared variable index {var}")]
    UnknownVariable { row: String, var: VarId },
    #[error("binary variable `{0}` has bounds outside [0, 1]")]
    BinaryBounds(String),
    #[error("variable `{name}` has lower bound {lower} above upper bound {upper}")]
    EmptyDomain {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
}

/// Affine expression used while building rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        Self {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }

    /// Merges duplicate variables (first-appearance order) and drops zero terms.
    pub fn normalized(&self) -> Vec<(VarId, f64)> {
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        let mut slot: HashMap<VarId, usize> = HashMap::new();
        for &(v, a) in &self.terms {
            match slot.get(&v) {
                Some(&k) => out[k].1 += a,
                None => {
                    slot.insert(v, out.len());
                    out.push((v, a));
                }
            }
        }
        out.retain(|&(_, a)| a != 0.0);
        out
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, a)| a * values[v]).sum::<f64>()
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self + rhs.scaled(-1.0)
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Sub<f64> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: f64) -> LinExpr {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// Minimization model over continuous and binary columns.
#[derive(Clone, Debug, Default)]
pub struct Model {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(VarId, f64)>,
    pub metadata: Metadata,
    index: HashMap<String, VarId>,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables
            && self.constraints == other.constraints
            && self.objective == other.objective
            && self.metadata == other.metadata
    }
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Adds a column. Panics on a duplicate name; use [`Model::try_add_var`] for input data.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> VarId {
        match self.try_add_var(name, kind, lower, upper) {
            Ok(id) => id,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn try_add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(ModelError::DuplicateVariable(name));
        }
        let id = self.variables.len();
        self.index.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
            fixed: None,
        });
        Ok(id)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn fix(&mut self, v: VarId, value: f64) {
        let var = &mut self.variables[v];
        var.lower = value;
        var.upper = value;
        var.fixed = Some(value);
    }

    /// Adds `lhs (sense) rhs`, moving every variable left and every constant right.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        lhs: LinExpr,
        sense: Sense,
        rhs: LinExpr,
    ) -> usize {
        let expr = lhs - rhs;
        let terms = expr.normalized();
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs: -expr.constant,
        });
        self.constraints.len() - 1
    }

    /// Adds a row given directly as terms and right-hand side.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let e = LinExpr {
            terms,
            constant: 0.0,
        };
        self.constraints.push(Constraint {
            name: name.into(),
            terms: e.normalized(),
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective = expr.normalized();
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, a)| a * values[v]).sum()
    }

    /// Binary and general-integer columns.
    pub fn integers(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind != VarKind::Continuous)
            .map(|(i, _)| i)
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for v in &self.variables {
            let (lo, hi) = v.effective_bounds();
            if lo > hi {
                return Err(ModelError::EmptyDomain {
                    name: v.name.clone(),
                    lower: lo,
                    upper: hi,
                });
            }
            if v.kind == VarKind::Binary && (lo < 0.0 || hi > 1.0) {
                return Err(ModelError::BinaryBounds(v.name.clone()));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite(c.name.clone()));
            }
            for &(v, a) in &c.terms {
                if v >= self.variables.len() {
                    return Err(ModelError::UnknownVariable {
                        row: c.name.clone(),
                        var: v,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(c.name.clone()));
                }
            }
        }
        for &(v, _) in &self.objective {
            if v >= self.variables.len() {
                return Err(ModelError::UnknownVariable {
                    row: "objective".into(),
                    var: v,
                });
            }
        }
        Ok(())
    }

    /// Rows (index, amount) violated by more than `tol`, plus bound violations reported
    /// with index `usize::MAX`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (k, c) in self.constraints.iter().enumerate() {
            let v = c.violation(values);
            if v > tol {
                out.push((k, v));
            }
        }
        for (j, var) in self.variables.iter().enumerate() {
            let (lo, hi) = var.effective_bounds();
            let x = values[j];
            let v = (lo - x).max(x - hi).max(0.0);
            if v > tol {
                out.push((usize::MAX, v));
            }
        }
        out
    }

    /// Rows whose name starts with `prefix`.
    pub fn rows_with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = &'a Constraint> + 'a {
        self.constraints
            .iter()
            .filter(move |c| c.name.starts_with(prefix))
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_move_to_rhs() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        // x + 3 >= y + 10  ->  x - y >= 7
        m.add_constraint(
            "r",
            LinExpr::var(x) + 3.0,
            Sense::Ge,
            LinExpr::var(y) + 10.0,
        );
        let c = &m.constraints[0];
        assert_eq!(c.terms, vec![(x, 1.0), (y, -1.0)]);
        assert_eq!(c.rhs, 7.0);
    }

    #[test]
    fn duplicate_terms_merge_and_cancel() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 1.0);
        let y = m.add_continuous("y", 0.0, 1.0);
        let e = LinExpr::var(x) + LinExpr::term(y, 2.0) - LinExpr::var(x);
        m.add_constraint("r", e, Sense::Le, LinExpr::constant(1.0));
        assert_eq!(m.constraints[0].terms, vec![(y, 2.0)]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = Model::new();
        m.add_continuous("x", 0.0, 1.0);
        assert_eq!(
            m.try_add_var("x", VarKind::Binary, 0.0, 1.0),
            Err(ModelError::DuplicateVariable("x".into()))
        );
    }

    #[test]
    fn binary_bounds_checked() {
        let mut m = Model::new();
        m.add_var("b", VarKind::Binary, 0.0, 2.0);
        assert_eq!(m.validate(), Err(ModelError::BinaryBounds("b".into())));
    }

    #[test]
    fn fix_collapses_bounds() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.fix(x, 3.0);
        assert_eq!(m.variables[x].effective_bounds(), (3.0, 3.0));
    }
}
