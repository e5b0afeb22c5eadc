//! Text export of binary programs in the common LP file format, and a
//! reader for the subset this module writes.

use std::fmt::Write as _;
use std::path::Path;

use super::model::{Model, Sense};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

fn write_terms(out: &mut String, terms: &[(&str, f64)]) {
    for (i, &(name, c)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        if i == 0 {
            if c < 0.0 {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        if mag == 1.0 {
            let _ = write!(out, " {name}");
        } else {
            let _ = write!(out, " {mag} {name}");
        }
    }
}

pub fn format_lp(model: &Model) -> String {
    let mut out = String::from("Maximize\n obj:");
    let obj: Vec<(&str, f64)> = model
        .names()
        .iter()
        .zip(model.objective())
        .filter(|(_, &c)| c != 0.0)
        .map(|(n, &c)| (n.as_str(), c))
        .collect();
    write_terms(&mut out, &obj);
    out.push_str("\nSubject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        let mut terms: Vec<(&str, f64)> = c.terms.iter().map(|&(v, a)| (model.name(v), a)).collect();
        if terms.is_empty() {
            // keep the row; the reader drops zero terms again
            terms.push((model.name(0), 0.0));
        }
        if terms.len() == 1 && terms[0].1 == 0.0 {
            let _ = write!(out, " 0 {}", terms[0].0);
        } else {
            write_terms(&mut out, &terms);
        }
        let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
    }
    out.push_str("Binary\n");
    for n in model.names() {
        let _ = writeln!(out, " {n}");
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_lp(model)).map_err(|e| Error::io(path, e))
}

#[derive(PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Binary,
    Done,
}

/// Parse a program written by [`format_lp`]. Variables are numbered in the
/// order of the `Binary` section.
pub fn parse_lp(text: &str) -> Result<Model> {
    let mut section = Section::None;
    let mut obj_tokens: Vec<(usize, String)> = Vec::new();
    let mut rows: Vec<(usize, String, Vec<(usize, String)>)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let trimmed = line.trim();
        match trimmed.to_ascii_lowercase().as_str() {
            "maximize" => {
                section = Section::Objective;
                continue;
            }
            "subject to" => {
                section = Section::Constraints;
                continue;
            }
            "binary" | "binaries" => {
                section = Section::Binary;
                continue;
            }
            "end" => {
                section = Section::Done;
                continue;
            }
            "" => continue,
            _ => {}
        }
        match section {
            Section::Objective => {
                for tok in trimmed.split_whitespace() {
                    if !tok.ends_with(':') {
                        obj_tokens.push((ln, tok.to_string()));
                    }
                }
            }
            Section::Constraints => {
                let mut toks = trimmed.split_whitespace().peekable();
                if let Some(first) = toks.peek() {
                    if let Some(name) = first.strip_suffix(':') {
                        rows.push((ln, name.to_string(), Vec::new()));
                        toks.next();
                    }
                }
                let Some(row) = rows.last_mut() else {
                    return Err(Error::Parse { line: ln, msg: "constraint without a name".into() });
                };
                row.2.extend(toks.map(|t| (ln, t.to_string())));
            }
            Section::Binary => binaries.extend(trimmed.split_whitespace().map(str::to_string)),
            Section::None | Section::Done => {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("unexpected text outside a section: {trimmed}"),
                })
            }
        }
    }
    if section != Section::Done {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "missing End".into(),
        });
    }
    let mut model = Model::new();
    for b in &binaries {
        model.add_var(b.clone(), 0.0)?;
    }
    for (v, c) in parse_terms(&model, &obj_tokens)? {
        let cur = model.objective()[v as usize];
        model.set_objective(v, cur + c);
    }
    for (ln, name, toks) in rows {
        if toks.len() < 2 {
            return Err(Error::Parse { line: ln, msg: format!("row {name} lacks a sense and rhs") });
        }
        let (body, tail) = toks.split_at(toks.len() - 2);
        let sense = match tail[0].1.as_str() {
            "<=" | "=<" | "<" => Sense::Le,
            ">=" | "=>" | ">" => Sense::Ge,
            "=" => Sense::Eq,
            s => return Err(Error::Parse { line: tail[0].0, msg: format!("unknown sense {s}") }),
        };
        let rhs: f64 = tail[1]
            .1
            .parse()
            .map_err(|_| Error::Parse { line: tail[1].0, msg: format!("bad right-hand side {}", tail[1].1) })?;
        let terms = parse_terms(&model, body)?.into_iter().filter(|t| t.1 != 0.0).collect();
        model.add_constraint(name, terms, sense, rhs);
    }
    Ok(model)
}

fn parse_terms(model: &Model, toks: &[(usize, String)]) -> Result<Vec<(u32, f64)>> {
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for (ln, t) in toks {
        match t.as_str() {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(c) = t.parse::<f64>() {
                    coef = Some(c);
                } else {
                    let v = model
                        .var(t)
                        .ok_or_else(|| Error::Parse { line: *ln, msg: format!("undeclared variable {t}") })?;
                    out.push((v, sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_model() {
        let s = format_lp(&Model::new());
        assert_eq!(s, "Maximize\n obj:\nSubject To\nBinary\nEnd\n");
        assert_eq!(parse_lp(&s).unwrap(), Model::new());
    }

    #[test]
    fn signs_and_unit_coefficients() {
        let mut m = Model::new();
        let x = m.add_var("x_1_0_0", 0.8).unwrap();
        let y = m.add_var("y_0_0", 0.0).unwrap();
        let a = m.add_var("a_1_0", -1.0).unwrap();
        m.add_constraint("r", vec![(y, 1.0), (a, -1.0), (x, -2.5)], Sense::Le, 1.0);
        let s = format_lp(&m);
        assert!(s.contains(" obj: 0.8 x_1_0_0 - a_1_0\n"), "{s}");
        assert!(s.contains(" r: y_0_0 - a_1_0 - 2.5 x_1_0_0 <= 1\n"), "{s}");
        let back = parse_lp(&s).unwrap();
        assert_eq!(back.objective(), m.objective());
        assert_eq!(back.constraints(), m.constraints());
    }

    #[test]
    fn long_rows_wrap_and_roundtrip() {
        let mut m = Model::new();
        let vs: Vec<u32> = (0..30).map(|i| m.add_var(format!("v{i}"), i as f64 * 0.25 - 3.0).unwrap()).collect();
        m.add_constraint("big", vs.iter().map(|&v| (v, -1.0)).collect(), Sense::Ge, -4.0);
        let s = format_lp(&m);
        assert!(s.lines().all(|l| l.len() < 255));
        assert_eq!(parse_lp(&s).unwrap(), {
            let mut m2 = m.clone();
            m2.set_blocks(Vec::new());
            m2
        });
    }

    #[test]
    fn reader_reports_line() {
        let err = parse_lp("Maximize\n obj: 2 q\nSubject To\nBinary\n z\nEnd\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
