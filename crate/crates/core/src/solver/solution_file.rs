//! Reader and writer for the HiGHS "raw" solution file layout.
//!
//! ```text
//! Model status
//! Optimal
//!
//! # Primal solution values
//! Feasible
//! Objective 3
//! # Columns 1
//! x 3
//! # Rows 1
//! r 3
//!
//! # Dual solution values
//! Feasible
//! # Columns 1
//! x 0
//! # Rows 1
//! r 1
//! ```
//!
//! A trailing `# Dual bound <v>` line carries the MIP dual bound when known.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionFile {
    pub model_status: String,
    pub objective: Option<f64>,
    pub columns: Vec<(String, f64)>,
    pub rows: Vec<(String, f64)>,
    pub dual_rows: Option<Vec<(String, f64)>>,
    pub dual_bound: Option<f64>,
    pub mip_gap: Option<f64>,
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

impl SolutionFile {
    pub fn write(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Model status\n{}\n", self.model_status);
        s.push_str("# Primal solution values\n");
        match self.objective {
            None => s.push_str("None\n"),
            Some(obj) => {
                s.push_str("Feasible\n");
                let _ = writeln!(s, "Objective {}", num(obj));
                let _ = writeln!(s, "# Columns {}", self.columns.len());
                for (n, v) in &self.columns {
                    let _ = writeln!(s, "{n} {}", num(*v));
                }
                let _ = writeln!(s, "# Rows {}", self.rows.len());
                for (n, v) in &self.rows {
                    let _ = writeln!(s, "{n} {}", num(*v));
                }
            }
        }
        s.push_str("\n# Dual solution values\n");
        match &self.dual_rows {
            None => s.push_str("None\n"),
            Some(rows) => {
                s.push_str("Feasible\n# Columns 0\n");
                let _ = writeln!(s, "# Rows {}", rows.len());
                for (n, v) in rows {
                    let _ = writeln!(s, "{n} {}", num(*v));
                }
            }
        }
        if let Some(b) = self.dual_bound {
            let _ = writeln!(s, "\n# Dual bound {}", num(b));
        }
        if let Some(g) = self.mip_gap {
            let _ = writeln!(s, "# MIP gap {}", num(g));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let err = |i: usize, m: &str| Error::LpParse {
            line: i + 1,
            message: format!("solution file: {m}"),
        };
        let parse_f = |i: usize, t: &str| -> Result<f64> {
            match t {
                "inf" | "+inf" | "Inf" => Ok(f64::INFINITY),
                "-inf" | "-Inf" => Ok(f64::NEG_INFINITY),
                _ => t.parse().map_err(|_| err(i, &format!("bad number {t:?}"))),
            }
        };
        let mut out = SolutionFile::default();
        let mut i = 0;
        // Reads "# <label> n" followed by n "name value" lines.
        let read_block = |i: &mut usize, label: &str| -> Result<Vec<(String, f64)>> {
            let line = lines.get(*i).ok_or_else(|| err(*i, "unexpected end of file"))?;
            let n: usize = line
                .strip_prefix(label)
                .map(str::trim)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(*i, &format!("expected {label:?}")))?;
            *i += 1;
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                let line = lines.get(*i).ok_or_else(|| err(*i, "unexpected end of file"))?;
                let (name, val) = line
                    .rsplit_once(' ')
                    .ok_or_else(|| err(*i, "expected name and value"))?;
                v.push((name.to_string(), parse_f(*i, val.trim())?));
                *i += 1;
            }
            Ok(v)
        };
        while i < lines.len() {
            let line = lines[i].trim();
            if line == "Model status" {
                out.model_status = lines.get(i + 1).map(|s| s.trim().to_string()).unwrap_or_default();
                i += 2;
            } else if line == "# Primal solution values" {
                i += 1;
                if lines.get(i).map(|s| s.trim()) == Some("None") {
                    i += 1;
                    continue;
                }
                i += 1;
                let obj = lines.get(i).and_then(|s| s.strip_prefix("Objective "));
                let obj = obj.ok_or_else(|| err(i, "expected objective line"))?;
                out.objective = Some(parse_f(i, obj.trim())?);
                i += 1;
                out.columns = read_block(&mut i, "# Columns")?;
                out.rows = read_block(&mut i, "# Rows")?;
            } else if line == "# Dual solution values" {
                i += 1;
                if lines.get(i).map(|s| s.trim()) == Some("None") {
                    i += 1;
                    continue;
                }
                i += 1;
                read_block(&mut i, "# Columns")?;
                out.dual_rows = Some(read_block(&mut i, "# Rows")?);
            } else if let Some(v) = line.strip_prefix("# Dual bound ") {
                out.dual_bound = Some(parse_f(i, v.trim())?);
                i += 1;
            } else if let Some(v) = line.strip_prefix("# MIP gap ") {
                out.mip_gap = Some(parse_f(i, v.trim())?);
                i += 1;
            } else {
                i += 1;
            }
        }
        if out.model_status.is_empty() {
            return Err(err(0, "missing model status"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = SolutionFile {
            model_status: "Optimal".into(),
            objective: Some(3.0),
            columns: vec![("x".into(), 3.0), ("y(1,2)".into(), -0.5)],
            rows: vec![("r".into(), 3.0)],
            dual_rows: Some(vec![("r".into(), 1.0)]),
            dual_bound: Some(2.5),
            mip_gap: Some(0.0),
        };
        assert_eq!(SolutionFile::parse(&f.write()).unwrap(), f);
    }

    #[test]
    fn infeasible_has_no_values() {
        let f = SolutionFile {
            model_status: "Infeasible".into(),
            ..Default::default()
        };
        let back = SolutionFile::parse(&f.write()).unwrap();
        assert_eq!(back.objective, None);
        assert_eq!(back.model_status, "Infeasible");
    }

    #[test]
    fn truncated_file_is_an_error() {
        let text = "Model status\nOptimal\n\n# Primal solution values\nFeasible\nObjective 1\n# Columns 2\nx 1\n";
        assert!(SolutionFile::parse(text).is_err());
    }
}
