//! CPLEX-LP text export and import.
//!
//! The writer emits, in order: `\ key: value` comment lines for metadata, `Minimize`,
//! `Subject To`, `Bounds` (one line per column, in column order), `Binaries`, `Generals` and `End`.
//! Every column appears in `Bounds`, which is how the parser recovers column order.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Constraint, Metadata, Model, Sense, VarId, VarKind, Variable};

const WRAP_AT: usize = 96;

type Terms = Vec<(usize, f64)>;

#[derive(Debug, Error, PartialEq)]
pub enum LpParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `End` marker")]
    MissingEnd,
}

fn syntax(line: usize, msg: impl Into<String>) -> LpParseError {
    LpParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

/// Replaces characters that CPLEX-LP does not accept in names.
pub fn normalize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let bad_start = out
        .chars()
        .next()
        .map(|c| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E')
        .unwrap_or(true);
    if bad_start {
        out.insert_str(0, "x_");
    }
    out
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn push_terms(line: &mut String, out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    for (k, &(v, a)) in terms.iter().enumerate() {
        let mag = a.abs();
        let coef = if mag == 1.0 {
            String::new()
        } else {
            format!("{} ", num(mag))
        };
        let piece = if k == 0 {
            if a < 0.0 {
                format!("- {coef}{}", names[v])
            } else {
                format!("{coef}{}", names[v])
            }
        } else {
            let sign = if a < 0.0 { '-' } else { '+' };
            format!(" {sign} {coef}{}", names[v])
        };
        if line.len() + piece.len() > WRAP_AT && k > 0 {
            out.push_str(line.trim_end());
            out.push('\n');
            line.clear();
            line.push_str("   ");
            line.push_str(piece.trim_start());
        } else {
            line.push_str(&piece);
        }
    }
}

/// Deterministic CPLEX-LP rendering of `model`.
pub fn write_lp_file(model: &Model) -> String {
    let names: Vec<String> = model
        .variables
        .iter()
        .map(|v| normalize_name(&v.name))
        .collect();
    let mut out = String::new();
    if let Some(f) = &model.metadata.formulation {
        let _ = writeln!(out, "\\ formulation: {f}");
    }
    for d in &model.metadata.defects {
        let _ = writeln!(out, "\\ defect: {d}");
    }
    out.push_str("Minimize\n");
    let mut line = String::from(" obj: ");
    push_terms(&mut line, &mut out, &model.objective, &names);
    out.push_str(&line);
    out.push('\n');
    out.push_str("Subject To\n");
    for c in &model.constraints {
        let mut line = format!(" {}: ", normalize_name(&c.name));
        if c.terms.is_empty() {
            line.push_str("0 ");
        }
        push_terms(&mut line, &mut out, &c.terms, &names);
        let _ = write!(line, " {} {}", c.sense.symbol(), num(c.rhs));
        out.push_str(&line);
        out.push('\n');
    }
    if !model.variables.is_empty() {
        out.push_str("Bounds\n");
        for (v, name) in model.variables.iter().zip(&names) {
            let _ = writeln!(out, " {}", bound_line(v, name));
        }
    }
    for (kind, header) in [
        (VarKind::Binary, "Binaries\n"),
        (VarKind::Integer, "Generals\n"),
    ] {
        let listed: Vec<&str> = model
            .variables
            .iter()
            .zip(&names)
            .filter(|(v, _)| v.kind == kind)
            .map(|(_, n)| n.as_str())
            .collect();
        if listed.is_empty() {
            continue;
        }
        out.push_str(header);
        let mut line = String::from(" ");
        for b in listed {
            if line.len() + b.len() + 1 > WRAP_AT && line.len() > 1 {
                out.push_str(line.trim_end());
                out.push('\n');
                line = String::from(" ");
            }
            line.push_str(b);
            line.push(' ');
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

fn bound_line(v: &Variable, name: &str) -> String {
    if let Some(x) = v.fixed {
        return format!("{name} = {}", num(x));
    }
    match (v.lower.is_finite(), v.upper.is_finite()) {
        (false, false) => format!("{name} free"),
        (true, false) => format!("{name} >= {}", num(v.lower)),
        _ => format!("{} <= {name} <= {}", num(v.lower), num(v.upper)),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::End),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Label(String),
    Plus,
    Minus,
    Cmp(Sense),
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>, LpParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            out.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            out.push(Tok::Minus);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j], '<' | '>' | '=') {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let sense = match op.as_str() {
                "<=" | "=<" | "<" => Sense::Le,
                ">=" | "=>" | ">" => Sense::Ge,
                "=" => Sense::Eq,
                _ => return Err(syntax(line, format!("unknown operator `{op}`"))),
            };
            out.push(Tok::Cmp(sense));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() {
                let d = chars[j];
                let exp_sign = (d == '+' || d == '-') && j > i && matches!(chars[j - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(line, format!("bad number `{s}`")))?;
            out.push(Tok::Num(v));
            i = j;
        } else {
            let mut j = i;
            while j < chars.len()
                && !chars[j].is_whitespace()
                && !matches!(chars[j], '+' | '-' | '<' | '>' | '=' | ':')
            {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            if s.is_empty() {
                return Err(syntax(line, format!("unexpected character `{c}`")));
            }
            if j < chars.len() && chars[j] == ':' {
                out.push(Tok::Label(s));
                j += 1;
            } else {
                let lower = s.to_ascii_lowercase();
                if lower == "inf" || lower == "infinity" {
                    out.push(Tok::Num(f64::INFINITY));
                } else {
                    out.push(Tok::Ident(s));
                }
            }
            i = j;
        }
    }
    Ok(out)
}

struct Builder {
    order: Vec<String>,
    bounds_seen: Vec<String>,
    lookup: std::collections::HashMap<String, usize>,
}

impl Builder {
    fn id(&mut self, name: &str) -> usize {
        if let Some(&k) = self.lookup.get(name) {
            return k;
        }
        let k = self.order.len();
        self.order.push(name.to_string());
        self.lookup.insert(name.to_string(), k);
        k
    }
}

/// Parses a linear expression; returns terms and the index of the first token after it.
fn parse_expr(
    toks: &[Tok],
    mut i: usize,
    b: &mut Builder,
    line: usize,
) -> Result<(Terms, f64, usize), LpParseError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while i < toks.len() {
        match &toks[i] {
            Tok::Plus => {}
            Tok::Minus => sign = -sign,
            Tok::Num(v) => {
                if let Some(c) = coef {
                    constant += sign * c;
                    sign = 1.0;
                }
                coef = Some(*v);
            }
            Tok::Ident(name) => {
                let k = b.id(name);
                terms.push((k, sign * coef.unwrap_or(1.0)));
                sign = 1.0;
                coef = None;
            }
            Tok::Cmp(_) | Tok::Label(_) => break,
        }
        i += 1;
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    let _ = line;
    Ok((terms, constant, i))
}

/// Parses text produced by [`write_lp_file`] (and the common CPLEX-LP subset it uses).
pub fn parse_lp_file(text: &str) -> Result<Model, LpParseError> {
    let mut meta = Metadata::default();
    let mut section = Section::Preamble;
    let mut b = Builder {
        order: Vec::new(),
        bounds_seen: Vec::new(),
        lookup: Default::default(),
    };
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut rows: Vec<(String, Terms, Sense, f64)> = Vec::new();
    let mut bounds: std::collections::HashMap<usize, (f64, f64, Option<f64>)> = Default::default();
    let mut binaries: Vec<usize> = Vec::new();
    let mut generals: Vec<usize> = Vec::new();
    let mut pending: Vec<Tok> = Vec::new();
    let mut pending_line = 0;
    let mut saw_end = false;

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('\\') {
            let comment = comment.trim();
            if let Some(f) = comment.strip_prefix("formulation:") {
                meta.formulation = Some(f.trim().to_string());
            } else if let Some(d) = comment.strip_prefix("defect:") {
                meta.defects.push(d.trim().to_string());
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        if let Some(s) = section_of(trimmed) {
            if !pending.is_empty() {
                return Err(syntax(pending_line, "incomplete statement"));
            }
            section = s;
            if s == Section::End {
                saw_end = true;
                break;
            }
            continue;
        }
        match section {
            Section::Preamble | Section::End => {
                return Err(syntax(ln, "text outside of a section"))
            }
            Section::Objective => {
                let toks = tokenize(trimmed, ln)?;
                let start = usize::from(matches!(toks.first(), Some(Tok::Label(_))));
                let (terms, _c, _) = parse_expr(&toks, start, &mut b, ln)?;
                objective.extend(terms);
            }
            Section::Constraints => {
                if pending.is_empty() {
                    pending_line = ln;
                }
                pending.extend(tokenize(trimmed, ln)?);
                // A statement is complete once it has a comparison followed by a number.
                while let Some(pos) = pending.iter().position(|t| matches!(t, Tok::Cmp(_))) {
                    let mut end = pos + 1;
                    if matches!(pending.get(end), Some(Tok::Minus) | Some(Tok::Plus)) {
                        end += 1;
                    }
                    if !matches!(pending.get(end), Some(Tok::Num(_))) {
                        break;
                    }
                    let stmt: Vec<Tok> = pending.drain(..=end).collect();
                    let (name, start) = match &stmt[0] {
                        Tok::Label(l) => (l.clone(), 1),
                        _ => (format!("R{}", rows.len() + 1), 0),
                    };
                    let (terms, constant, at) = parse_expr(&stmt, start, &mut b, pending_line)?;
                    let Tok::Cmp(sense) = stmt[at] else {
                        return Err(syntax(pending_line, "expected comparison"));
                    };
                    let neg = matches!(stmt[at + 1], Tok::Minus);
                    let Tok::Num(v) = stmt[stmt.len() - 1] else {
                        return Err(syntax(pending_line, "expected right-hand side"));
                    };
                    let rhs = if neg { -v } else { v } - constant;
                    rows.push((name, terms, sense, rhs));
                    pending_line = ln;
                }
            }
            Section::Bounds => {
                let toks = tokenize(trimmed, ln)?;
                parse_bound(&toks, ln, &mut b, &mut bounds)?;
            }
            Section::Binaries => {
                for name in trimmed.split_whitespace() {
                    let k = b.id(name);
                    binaries.push(k);
                }
            }
            Section::Generals => {
                for name in trimmed.split_whitespace() {
                    let k = b.id(name);
                    generals.push(k);
                }
            }
        }
    }
    if !saw_end {
        return Err(LpParseError::MissingEnd);
    }

    // Column order: bounds order first, then remaining names by first appearance.
    let mut order: Vec<usize> = Vec::with_capacity(b.order.len());
    let mut placed = vec![false; b.order.len()];
    for name in &b.bounds_seen {
        let k = b.lookup[name];
        if !placed[k] {
            placed[k] = true;
            order.push(k);
        }
    }
    for (k, p) in placed.iter().enumerate() {
        if !p {
            order.push(k);
        }
    }
    let mut remap = vec![0usize; b.order.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }

    let mut model = Model::new();
    model.metadata = meta;
    for &old in &order {
        let is_bin = binaries.contains(&old);
        let (lo, hi, fixed) = bounds.get(&old).copied().unwrap_or(if is_bin {
            (0.0, 1.0, None)
        } else {
            (0.0, f64::INFINITY, None)
        });
        model.variables.push(Variable {
            name: b.order[old].clone(),
            kind: if is_bin {
                VarKind::Binary
            } else if generals.contains(&old) {
                VarKind::Integer
            } else {
                VarKind::Continuous
            },
            lower: lo,
            upper: hi,
            fixed,
        });
    }
    model.rebuild_index();
    model.objective = merge(objective.into_iter().map(|(k, a)| (remap[k], a)));
    for (name, terms, sense, rhs) in rows {
        let terms = merge(terms.into_iter().map(|(k, a)| (remap[k], a)));
        model.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
    }
    Ok(model)
}

fn merge(it: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut e = crate::model::LinExpr::new();
    for (k, a) in it {
        e.add_term(k, a);
    }
    e.normalized()
}

fn signed_num(toks: &[Tok], i: usize) -> Option<(f64, usize)> {
    match (toks.get(i), toks.get(i + 1)) {
        (Some(Tok::Minus), Some(Tok::Num(v))) => Some((-v, i + 2)),
        (Some(Tok::Plus), Some(Tok::Num(v))) => Some((*v, i + 2)),
        (Some(Tok::Num(v)), _) => Some((*v, i + 1)),
        _ => None,
    }
}

fn parse_bound(
    toks: &[Tok],
    ln: usize,
    b: &mut Builder,
    bounds: &mut std::collections::HashMap<usize, (f64, f64, Option<f64>)>,
) -> Result<(), LpParseError> {
    let bad = || syntax(ln, "unrecognized bound statement");
    // `x free`
    if let [Tok::Ident(x), Tok::Ident(kw)] = toks {
        if kw.eq_ignore_ascii_case("free") {
            let k = b.id(x);
            b.bounds_seen.push(x.clone());
            bounds.insert(k, (f64::NEG_INFINITY, f64::INFINITY, None));
            return Ok(());
        }
        return Err(bad());
    }
    // `lo <= x <= hi`
    if let Some((lo, at)) = signed_num(toks, 0) {
        let (Some(Tok::Cmp(Sense::Le)), Some(Tok::Ident(x))) = (toks.get(at), toks.get(at + 1))
        else {
            return Err(bad());
        };
        let hi = match toks.get(at + 2) {
            None => f64::INFINITY,
            Some(Tok::Cmp(Sense::Le)) => signed_num(toks, at + 3).ok_or_else(bad)?.0,
            _ => return Err(bad()),
        };
        let k = b.id(x);
        b.bounds_seen.push(x.clone());
        bounds.insert(k, (lo, hi, None));
        return Ok(());
    }
    // `x >= lo`, `x <= hi`, `x = v`
    if let [Tok::Ident(x), Tok::Cmp(sense), ..] = toks {
        let (v, end) = signed_num(toks, 2).ok_or_else(bad)?;
        if end != toks.len() {
            return Err(bad());
        }
        let k = b.id(x);
        b.bounds_seen.push(x.clone());
        let entry = bounds.entry(k).or_insert((0.0, f64::INFINITY, None));
        match sense {
            Sense::Ge => entry.0 = v,
            Sense::Le => entry.1 = v,
            Sense::Eq => *entry = (v, v, Some(v)),
        }
        return Ok(());
    }
    Err(bad())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinExpr;

    #[test]
    fn empty_model_skeleton() {
        assert_eq!(
            write_lp_file(&Model::new()),
            "Minimize\n obj: \nSubject To\nEnd\n"
        );
    }

    #[test]
    fn fixed_variable_as_equal_bound() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.fix(x, 3.0);
        let text = write_lp_file(&m);
        assert!(text.contains("\n x = 3\n"), "{text}");
        assert_eq!(parse_lp_file(&text).unwrap(), m);
    }

    #[test]
    fn small_model_text() {
        let mut m = Model::new();
        m.metadata.formulation = Some("Demo".into());
        m.metadata.defects.push("flagged_row".into());
        let c = m.add_continuous("C", 0.0, f64::INFINITY);
        let y = m.add_binary("y_1_2");
        m.add_constraint(
            "r1",
            LinExpr::var(c) - LinExpr::term(y, 200.0),
            Sense::Ge,
            LinExpr::constant(-40.5),
        );
        m.set_objective(LinExpr::var(c));
        let text = write_lp_file(&m);
        assert_eq!(
            text,
            "\\ formulation: Demo\n\\ defect: flagged_row\nMinimize\n obj: C\nSubject To\n r1: C - 200 y_1_2 >= -40.5\nBounds\n C >= 0\n 0 <= y_1_2 <= 1\nBinaries\n y_1_2\nEnd\n"
        );
        assert_eq!(parse_lp_file(&text).unwrap(), m);
    }

    #[test]
    fn long_rows_wrap_and_parse() {
        let mut m = Model::new();
        let vars: Vec<_> = (0..40)
            .map(|k| m.add_binary(format!("y_{k}_{}", k + 1)))
            .collect();
        let mut e = LinExpr::new();
        for &v in &vars {
            e.add_term(v, 1.0);
        }
        m.add_constraint("sum", e, Sense::Eq, LinExpr::constant(1.0));
        let text = write_lp_file(&m);
        assert!(text.lines().all(|l| l.len() <= WRAP_AT + 16));
        assert_eq!(parse_lp_file(&text).unwrap(), m);
    }

    #[test]
    fn names_normalized() {
        assert_eq!(normalize_name("t(1,2)"), "t_1_2_");
        assert_eq!(normalize_name("3x"), "x_3x");
        assert_eq!(normalize_name("e_1"), "x_e_1");
    }

    #[test]
    fn missing_end_rejected() {
        assert_eq!(
            parse_lp_file("Minimize\n obj: x\nSubject To\n"),
            Err(LpParseError::MissingEnd)
        );
    }

    #[test]
    fn foreign_spacing_accepted() {
        let m = parse_lp_file(
            "Minimize\n obj: 2x + 3 y\nSubject To\n c1: x + y >= 1\n c2: x - y\n   <= 4\nEnd\n",
        )
        .unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.objective, vec![(0, 2.0), (1, 3.0)]);
        assert_eq!(m.constraints[1].rhs, 4.0);
        assert_eq!(m.constraints[1].terms, vec![(0, 1.0), (1, -1.0)]);
    }
}
