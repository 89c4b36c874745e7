//! CPLEX-LP reader and writer for [`CanonicalModel`].
//!
//! The writer is deterministic: rows in model order, terms in column order,
//! every column listed in `Bounds` in column order, numbers in shortest
//! round-trip form. The reader orders columns by their `Bounds` entry (falling
//! back to first appearance), so `read(write(m)) == m` for any model this crate
//! builds.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::canonical::{CanonicalModel, RowSense, Variable};
use crate::error::{Error, Result};

const WRAP: usize = 100;

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn push_term(line: &mut String, out: &mut String, coef: f64, name: &str, first: bool) {
    let term = if first {
        format!("{} {name}", num(coef))
    } else if coef < 0.0 {
        format!(" - {} {name}", num(-coef))
    } else {
        format!(" + {} {name}", num(coef))
    };
    if line.len() + term.len() > WRAP {
        out.push_str(line);
        out.push('\n');
        line.clear();
        line.push(' ');
    }
    line.push_str(&term);
}

/// Render `model` in CPLEX-LP syntax.
pub fn write_lp(model: &CanonicalModel) -> String {
    let mut out = String::new();
    out.push_str("\\ written by cepkit\nMinimize\n");
    let mut line = String::from(" obj:");
    let mut first = true;
    for (j, &c) in model.objective.linear.iter().enumerate() {
        if c != 0.0 {
            let name = &model.variables[j].name;
            push_term(&mut line, &mut out, c, name, false);
            first = false;
        }
    }
    let quad: Vec<_> = model.objective.quadratic.iter().filter(|&&(_, q)| q != 0.0).collect();
    if !quad.is_empty() {
        line.push_str(" + [");
        for (i, &&(j, q)) in quad.iter().enumerate() {
            let name = format!("{} ^ 2", model.variables[j].name);
            push_term(&mut line, &mut out, 2.0 * q, &name, i == 0);
        }
        line.push_str(" ] / 2");
        first = false;
    }
    if model.objective.offset != 0.0 || first {
        let o = model.objective.offset;
        if o < 0.0 {
            let _ = write!(line, " - {}", num(-o));
        } else {
            let _ = write!(line, " + {}", num(o));
        }
    }
    out.push_str(&line);
    out.push_str("\nSubject To\n");
    for row in &model.constraints {
        let mut line = format!(" {}:", row.name);
        for &(j, a) in &row.coeffs {
            push_term(&mut line, &mut out, a, &model.variables[j].name, false);
        }
        if row.coeffs.is_empty() {
            // Keep the row parseable; an empty lhs is a zero sum.
            line.push_str(" 0 ");
            line.push_str(&model.variables.first().map_or("x".into(), |v| v.name.clone()));
        }
        let _ = write!(line, " {} {}", row.sense.symbol(), num(row.rhs));
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    let ints: Vec<&Variable> = model.variables.iter().filter(|v| v.integer).collect();
    if !ints.is_empty() {
        out.push_str("General\n");
        for v in ints {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    General,
    Binary,
    End,
}

fn section_keyword(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let lower = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(match lower.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "general" | "generals" | "gen" | "integer" | "integers" => Section::General,
        "binary" | "binaries" | "bin" => Section::Binary,
        "end" => Section::End,
        _ => return None,
    })
}

fn tokenize(text: &str, line_no: usize) -> Result<Vec<Tok>> {
    let bytes: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let two: String = bytes[i..(i + 2).min(bytes.len())].iter().collect();
        let op2 = match two.as_str() {
            "<=" | "=<" => Some("<="),
            ">=" | "=>" => Some(">="),
            _ => None,
        };
        if let Some(op) = op2 {
            toks.push(Tok::Op(op));
            i += 2;
            continue;
        }
        let op1 = match c {
            '<' => Some("<="),
            '>' => Some(">="),
            '=' => Some("="),
            '+' => Some("+"),
            '-' => Some("-"),
            ':' => Some(":"),
            '[' => Some("["),
            ']' => Some("]"),
            '^' => Some("^"),
            '/' => Some("/"),
            '*' => Some("*"),
            _ => None,
        };
        if let Some(op) = op1 {
            toks.push(Tok::Op(op));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                let save = i;
                i += 1;
                if i < bytes.len() && (bytes[i] == '+' || bytes[i] == '-') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i].is_ascii_digit() {
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = bytes[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::LpParse {
                line: line_no,
                message: format!("bad number `{s}`"),
            })?;
            toks.push(Tok::Num(v));
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_whitespace() && !"<>=+-:[]^/*".contains(bytes[i]) {
            i += 1;
        }
        let s: String = bytes[start..i].iter().collect();
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" => toks.push(Tok::Num(f64::INFINITY)),
            _ => toks.push(Tok::Ident(s)),
        }
    }
    Ok(toks)
}

struct Parser {
    model: CanonicalModel,
    columns: HashMap<String, usize>,
}

impl Parser {
    fn column(&mut self, name: &str) -> usize {
        if let Some(&c) = self.columns.get(name) {
            return c;
        }
        let c = self.model.add_variable(name, 0.0, f64::INFINITY, false, 0.0);
        self.columns.insert(name.to_string(), c);
        c
    }
}

/// A linear expression: terms, quadratic terms, constant.
#[derive(Default)]
struct Expr {
    terms: Vec<(String, f64)>,
    quad: Vec<(String, f64)>,
    constant: f64,
}

fn parse_expr(toks: &[Tok], pos: &mut usize, line: usize, stop_at_sense: bool) -> Result<Expr> {
    let err = |m: String| Error::LpParse { line, message: m };
    let mut expr = Expr::default();
    let mut in_quad = false;
    loop {
        if *pos >= toks.len() {
            break;
        }
        if stop_at_sense && matches!(toks[*pos], Tok::Op("<=" | ">=" | "=")) {
            break;
        }
        let mut sign = 1.0;
        let mut saw_sign = false;
        while let Some(Tok::Op(op @ ("+" | "-"))) = toks.get(*pos) {
            if *op == "-" {
                sign = -sign;
            }
            saw_sign = true;
            *pos += 1;
        }
        match toks.get(*pos) {
            Some(Tok::Op("[")) => {
                in_quad = true;
                *pos += 1;
                continue;
            }
            Some(Tok::Op("]")) => {
                // `] / 2` closes the quadratic block.
                *pos += 1;
                let mut divisor = 1.0;
                if let Some(Tok::Op("/")) = toks.get(*pos) {
                    match toks.get(*pos + 1) {
                        Some(Tok::Num(d)) => {
                            divisor = *d;
                            *pos += 2;
                        }
                        _ => return Err(err("expected divisor after `/`".into())),
                    }
                }
                for q in &mut expr.quad {
                    q.1 /= divisor;
                }
                in_quad = false;
                continue;
            }
            _ => {}
        }
        let coef = match toks.get(*pos) {
            Some(Tok::Num(v)) => {
                *pos += 1;
                if let Some(Tok::Op("*")) = toks.get(*pos) {
                    *pos += 1;
                }
                Some(*v)
            }
            _ => None,
        };
        match toks.get(*pos) {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                *pos += 1;
                let c = sign * coef.unwrap_or(1.0);
                if in_quad {
                    if let (Some(Tok::Op("^")), Some(Tok::Num(p))) = (toks.get(*pos), toks.get(*pos + 1)) {
                        if *p != 2.0 {
                            return Err(err(format!("unsupported power {p}")));
                        }
                        *pos += 2;
                        expr.quad.push((name, c));
                    } else {
                        return Err(err("only diagonal quadratic terms are supported".into()));
                    }
                } else {
                    expr.terms.push((name, c));
                }
            }
            _ => match coef {
                Some(v) => expr.constant += sign * v,
                None if saw_sign => return Err(err("dangling sign".into())),
                None => break,
            },
        }
    }
    if in_quad {
        return Err(err("unterminated quadratic block".into()));
    }
    Ok(expr)
}

/// Parse CPLEX-LP text into a [`CanonicalModel`].
pub fn read_lp(text: &str) -> Result<CanonicalModel> {
    // Gather (section, line number, content) with comments removed.
    let mut section = Section::None;
    let mut blocks: Vec<(Section, usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_keyword(line) {
            section = s;
            continue;
        }
        if section == Section::End {
            break;
        }
        blocks.push((section, line_no, line.to_string()));
    }

    // Bounds first, so their order defines column order.
    let mut parser = Parser {
        model: CanonicalModel::new(),
        columns: HashMap::new(),
    };
    let mut bounds = Vec::new();
    for (sec, line_no, content) in &blocks {
        if *sec == Section::Bounds {
            let toks = tokenize(content, *line_no)?;
            bounds.push((*line_no, toks));
        }
    }
    let mut bound_updates: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
    for (line_no, toks) in &bounds {
        let err = |m: &str| Error::LpParse {
            line: *line_no,
            message: m.to_string(),
        };
        let signed = |i: usize| -> Option<(f64, usize)> {
            match (toks.get(i), toks.get(i + 1)) {
                (Some(Tok::Op("-")), Some(Tok::Num(v))) => Some((-v, 2)),
                (Some(Tok::Op("+")), Some(Tok::Num(v))) => Some((*v, 2)),
                (Some(Tok::Num(v)), _) => Some((*v, 1)),
                _ => None,
            }
        };
        match toks.as_slice() {
            [Tok::Ident(name), Tok::Ident(kw)] if kw.eq_ignore_ascii_case("free") => {
                let c = parser.column(name);
                bound_updates.push((c, Some(f64::NEG_INFINITY), Some(f64::INFINITY)));
            }
            _ => {
                if let Some((lo, n)) = signed(0) {
                    // lo <= name [<= hi]
                    let (Some(Tok::Op(op)), Some(Tok::Ident(name))) = (toks.get(n), toks.get(n + 1)) else {
                        return Err(err("malformed bound"));
                    };
                    let c = parser.column(name);
                    match *op {
                        "<=" => {
                            let hi = match toks.get(n + 2) {
                                Some(Tok::Op("<=")) => Some(signed(n + 3).ok_or_else(|| err("missing upper bound"))?.0),
                                None => None,
                                _ => return Err(err("malformed bound")),
                            };
                            bound_updates.push((c, Some(lo), hi));
                        }
                        ">=" => bound_updates.push((c, None, Some(lo))),
                        "=" => bound_updates.push((c, Some(lo), Some(lo))),
                        _ => return Err(err("malformed bound")),
                    }
                } else if let Some(Tok::Ident(name)) = toks.first() {
                    let c = parser.column(name);
                    let (Some(Tok::Op(op)), Some((v, _))) = (toks.get(1), signed(2)) else {
                        return Err(err("malformed bound"));
                    };
                    match *op {
                        "<=" => bound_updates.push((c, None, Some(v))),
                        ">=" => bound_updates.push((c, Some(v), None)),
                        "=" => bound_updates.push((c, Some(v), Some(v))),
                        _ => return Err(err("malformed bound")),
                    }
                } else {
                    return Err(err("malformed bound"));
                }
            }
        }
    }

    // Objective.
    let obj_toks: Vec<(usize, Vec<Tok>)> = blocks
        .iter()
        .filter(|(s, _, _)| *s == Section::Objective)
        .map(|(_, l, c)| tokenize(c, *l).map(|t| (*l, t)))
        .collect::<Result<_>>()?;
    if let Some((first_line, _)) = obj_toks.first() {
        let mut toks: Vec<Tok> = obj_toks.iter().flat_map(|(_, t)| t.clone()).collect();
        if let (Some(Tok::Ident(_)), Some(Tok::Op(":"))) = (toks.first(), toks.get(1)) {
            toks.drain(..2);
        }
        let mut pos = 0;
        let expr = parse_expr(&toks, &mut pos, *first_line, false)?;
        if pos != toks.len() {
            return Err(Error::LpParse {
                line: *first_line,
                message: "trailing tokens in objective".into(),
            });
        }
        for (name, c) in expr.terms {
            let col = parser.column(&name);
            parser.model.objective.linear[col] += c;
        }
        for (name, q) in expr.quad {
            let col = parser.column(&name);
            parser.model.add_quadratic(col, q);
        }
        parser.model.objective.offset = expr.constant;
    }

    // Constraints: rows may span lines, each ends with `sense rhs`.
    let mut row_toks: Vec<(usize, Tok)> = Vec::new();
    for (sec, line_no, content) in &blocks {
        if *sec == Section::Constraints {
            for t in tokenize(content, *line_no)? {
                row_toks.push((*line_no, t));
            }
        }
    }
    let toks: Vec<Tok> = row_toks.iter().map(|(_, t)| t.clone()).collect();
    let mut pos = 0;
    while pos < toks.len() {
        let line = row_toks[pos].0;
        let err = |m: &str| Error::LpParse {
            line,
            message: m.to_string(),
        };
        let name = match (&toks[pos], toks.get(pos + 1)) {
            (Tok::Ident(n), Some(Tok::Op(":"))) => {
                pos += 2;
                n.clone()
            }
            _ => format!("r{}", parser.model.num_rows()),
        };
        let expr = parse_expr(&toks, &mut pos, line, true)?;
        let sense = match toks.get(pos) {
            Some(Tok::Op("<=")) => RowSense::Le,
            Some(Tok::Op(">=")) => RowSense::Ge,
            Some(Tok::Op("=")) => RowSense::Eq,
            _ => return Err(err("expected a row sense")),
        };
        pos += 1;
        let mut sign = 1.0;
        while let Some(Tok::Op(op @ ("+" | "-"))) = toks.get(pos) {
            if *op == "-" {
                sign = -sign;
            }
            pos += 1;
        }
        let rhs = match toks.get(pos) {
            Some(Tok::Num(v)) => sign * v,
            _ => return Err(err("expected a right-hand side")),
        };
        pos += 1;
        if !expr.quad.is_empty() {
            return Err(err("quadratic constraints are not supported"));
        }
        let coeffs: Vec<(usize, f64)> = expr.terms.iter().map(|(n, c)| (parser.column(n), *c)).collect();
        parser.model.add_constraint(name, coeffs, sense, rhs - expr.constant);
    }

    for (c, lo, hi) in bound_updates {
        let v = &mut parser.model.variables[c];
        if let Some(lo) = lo {
            v.lower = lo;
        }
        if let Some(hi) = hi {
            v.upper = hi;
        }
    }

    for (sec, line_no, content) in &blocks {
        if matches!(sec, Section::General | Section::Binary) {
            for tok in tokenize(content, *line_no)? {
                let Tok::Ident(name) = tok else {
                    return Err(Error::LpParse {
                        line: *line_no,
                        message: "expected a column name".into(),
                    });
                };
                let c = parser.column(&name);
                let v = &mut parser.model.variables[c];
                v.integer = true;
                if *sec == Section::Binary {
                    v.lower = v.lower.max(0.0);
                    v.upper = v.upper.min(1.0);
                }
            }
        }
    }
    Ok(parser.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CanonicalModel {
        let mut m = CanonicalModel::new();
        let x = m.add_variable("xG(0,1)", 0.0, 4.0, true, 1.5);
        let y = m.add_variable("f(0,1,2)", -50.0, 50.0, false, 0.0);
        let z = m.add_variable("sigma(0,1)", f64::NEG_INFINITY, f64::INFINITY, false, -2.25e-7);
        let u = m.add_variable("pSh(0,0,0)", 0.0, f64::INFINITY, false, 1e9);
        m.add_constraint("bal(0,0,0)", [(x, 1.0), (y, -1.0), (u, 1.0)], RowSense::Eq, 12.5);
        m.add_constraint("cap(1)", [(y, 2.0), (x, -3.5)], RowSense::Le, 0.0);
        m.add_constraint("exp(0)", [(z, 1.0), (u, 1e-3)], RowSense::Ge, -7.0);
        m.add_quadratic(x, 0.75);
        m.objective.offset = 3.0;
        m
    }

    #[test]
    fn write_then_read_is_identity() {
        let m = sample();
        let text = write_lp(&m);
        let back = read_lp(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_lp(&back), text);
    }

    #[test]
    fn reads_hand_written_file() {
        let text = "\\ comment\nMinimize\n obj: 2 x + 3 y\nSubject To\n c1: x + y >= 1\n c2: x - y\n  + 0 y <= 4\nBounds\n x <= 10\n-inf <= y <= 5\nBinary\n x\nEnd\n";
        let m = read_lp(text).unwrap();
        assert_eq!(m.num_cols(), 2);
        assert_eq!(m.variables[0].upper, 1.0);
        assert!(m.variables[0].integer);
        assert_eq!(m.variables[1].lower, f64::NEG_INFINITY);
        assert_eq!(m.constraints[1].coeffs, vec![(0, 1.0), (1, -1.0)]);
        assert_eq!(m.constraints[1].rhs, 4.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "Minimize\n obj: x\nSubject To\n c1: x + \nEnd\n";
        match read_lp(text) {
            Err(Error::LpParse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
