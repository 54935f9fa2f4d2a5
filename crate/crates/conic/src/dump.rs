//! Plain-text interchange format for [`ConicProgram`].
//!
//! ```text
//! conic-program 1
//! var <name>                 one line per variable, in index order
//! objective <constant>
//! c <var> <coef>             nonzero objective coefficients
//! eq <rhs> <var>:<coef> ...  one line per equality row
//! nonneg <start> <len>
//! soc <var> <var> ...
//! end
//! ```
//!
//! Floats are written in shortest round-trip form, so `parse(dump(p)) == p`.

use crate::program::{Cone, ConicProgram, ProgramError};
use std::fmt::Write;

const HEADER: &str = "conic-program 1";

pub fn dump(prog: &ConicProgram) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for name in prog.names() {
        let clean: String = name
            .chars()
            .map(|c| if c.is_whitespace() { '_' } else { c })
            .collect();
        writeln!(out, "var {clean}").unwrap();
    }
    writeln!(out, "objective {}", prog.objective_constant()).unwrap();
    for (j, c) in prog.objective().iter().enumerate() {
        if *c != 0.0 {
            writeln!(out, "c {j} {c}").unwrap();
        }
    }
    for (row, rhs) in prog.eq_rows().iter().zip(prog.eq_rhs()) {
        write!(out, "eq {rhs}").unwrap();
        for (j, a) in row {
            write!(out, " {j}:{a}").unwrap();
        }
        out.push('\n');
    }
    for cone in prog.cones() {
        match cone {
            Cone::NonNegative { start, len } => writeln!(out, "nonneg {start} {len}").unwrap(),
            Cone::SecondOrder(idx) => {
                out.push_str("soc");
                for j in idx {
                    write!(out, " {j}").unwrap();
                }
                out.push('\n');
            }
        }
    }
    out.push_str("end\n");
    out
}

fn perr(line: usize, message: impl Into<String>) -> ProgramError {
    ProgramError::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ProgramError> {
    tok.ok_or_else(|| perr(line, format!("missing {what}")))?
        .parse::<T>()
        .map_err(|_| perr(line, format!("bad {what}")))
}

pub fn parse(text: &str) -> Result<ConicProgram, ProgramError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(perr(1, format!("expected header '{HEADER}'"))),
    }
    let mut names = Vec::new();
    let mut objective_constant = 0.0;
    let mut coefs = Vec::new();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut cones = Vec::new();
    let mut ended = false;
    for (ln, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if ended {
            return Err(perr(ln, "content after 'end'"));
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        match key {
            "var" => names.push(toks.next().ok_or_else(|| perr(ln, "missing name"))?.to_string()),
            "objective" => objective_constant = num(toks.next(), ln, "constant")?,
            "c" => {
                let j: usize = num(toks.next(), ln, "index")?;
                let v: f64 = num(toks.next(), ln, "coefficient")?;
                coefs.push((j, v, ln));
            }
            "eq" => {
                rhs.push(num::<f64>(toks.next(), ln, "rhs")?);
                let mut row = Vec::new();
                for t in toks.by_ref() {
                    let (j, a) = t.split_once(':').ok_or_else(|| perr(ln, "expected var:coef"))?;
                    row.push((num(Some(j), ln, "index")?, num(Some(a), ln, "coefficient")?));
                }
                rows.push(row);
            }
            "nonneg" => {
                let start = num(toks.next(), ln, "start")?;
                let len = num(toks.next(), ln, "length")?;
                cones.push(Cone::NonNegative { start, len });
            }
            "soc" => {
                let idx = toks
                    .by_ref()
                    .map(|t| num(Some(t), ln, "index"))
                    .collect::<Result<Vec<usize>, _>>()?;
                cones.push(Cone::SecondOrder(idx));
            }
            "end" => ended = true,
            other => return Err(perr(ln, format!("unknown record '{other}'"))),
        }
        if toks.next().is_some() {
            return Err(perr(ln, "trailing tokens"));
        }
    }
    if !ended {
        return Err(perr(text.lines().count(), "missing 'end'"));
    }
    let mut objective = vec![0.0; names.len()];
    for (j, v, ln) in coefs {
        *objective
            .get_mut(j)
            .ok_or_else(|| perr(ln, format!("objective index {j} out of range")))? = v;
    }
    let prog = ConicProgram::from_parts(names, objective, objective_constant, rows, rhs, cones);
    prog.validate()?;
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::NormKind;
    use crate::program::LinExpr;

    #[test]
    fn round_trip_preserves_program() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_objective(&(LinExpr::term(x, 0.1) + LinExpr::term(y, -1.0 / 3.0) + LinExpr::constant(2.5)));
        p.add_le(&(LinExpr::var(x) + LinExpr::var(y)), 1e-17);
        p.add_norm_epigraph(NormKind::L2, &[LinExpr::var(x)], &LinExpr::constant(1.0));
        let text = dump(&p);
        let q = parse(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "conic-program 1\nvar x\neq 1 0:abc\nend\n";
        assert!(matches!(parse(bad), Err(ProgramError::Parse { line: 3, .. })));
        assert!(matches!(parse("nope"), Err(ProgramError::Parse { line: 1, .. })));
        assert!(parse("conic-program 1\nvar x\n").is_err());
    }
}
