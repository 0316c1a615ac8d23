//! Versioned structured text reports shared by all commands.
//!
//! ```text
//! sixvertex-report <version>
//! command <name>
//! config <key> <value>
//! table <name>
//! columns <c1>\t<c2>...
//! row <v1>\t<v2>...
//! end
//! note <text>
//! summary <checks> <failures>
//! ```
//! Cells are tab separated and may not contain tabs or newlines. Floats are written with a
//! fixed number of significant digits so that reports are byte-stable.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::fmt::Write as _;

pub const REPORT_VERSION: u32 = 1;
const MAGIC: &str = "sixvertex-report";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Report {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub checks: usize,
    pub failures: usize,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.into(), ..Default::default() }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(clean(&text.into()));
    }

    /// Count one check; returns `pass` for chaining.
    pub fn check(&mut self, pass: bool) -> bool {
        self.checks += 1;
        if !pass {
            self.failures += 1;
        }
        pass
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {REPORT_VERSION}");
        let _ = writeln!(s, "command {}", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config {k} {}", clean(v));
        }
        for t in &self.tables {
            let _ = writeln!(s, "table {}", t.name);
            let _ = writeln!(s, "columns {}", join(&t.columns));
            for r in &t.rows {
                let _ = writeln!(s, "row {}", join(r));
            }
            s.push_str("end\n");
        }
        for n in &self.notes {
            let _ = writeln!(s, "note {n}");
        }
        let _ = writeln!(s, "summary {} {}", self.checks, self.failures);
        s
    }

    /// Human-readable view: aligned tables followed by notes and the summary line.
    pub fn render_human(&self) -> String {
        let mut s = String::new();
        for t in &self.tables {
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|c| t.rows.iter().map(|r| r[c].chars().count()).chain([t.columns[c].chars().count()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[String]| {
                cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
            };
            let _ = writeln!(s, "== {} ==", t.name);
            let _ = writeln!(s, "{}", line(&t.columns));
            for r in &t.rows {
                let _ = writeln!(s, "{}", line(r));
            }
            s.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{status}: {} checks, {} failures", self.checks, self.failures);
        s
    }

    pub fn parse(text: &str) -> Result<Report> {
        let bad = |line: usize, what: &str| Error::InvalidArgument(format!("report line {}: {what}", line + 1));
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or_else(|| bad(0, "empty report"))?;
        let version = head
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad(0, "missing header"))?;
        if version != REPORT_VERSION {
            return Err(bad(0, &format!("unsupported report version {version}")));
        }
        let mut rep = Report::default();
        let mut open: Option<Table> = None;
        let mut summary = false;
        for (i, line) in lines {
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            match (tag, open.as_mut()) {
                ("columns", Some(t)) => t.columns = split(rest),
                ("row", Some(t)) => {
                    let r = split(rest);
                    if r.len() != t.columns.len() {
                        return Err(bad(i, "row width differs from columns"));
                    }
                    t.rows.push(r);
                }
                ("end", Some(_)) => rep.tables.push(open.take().expect("open table")),
                (_, Some(_)) => return Err(bad(i, "unterminated table")),
                ("command", None) => rep.command = rest.to_string(),
                ("config", None) => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    rep.config.push((k.to_string(), v.to_string()));
                }
                ("table", None) => open = Some(Table { name: rest.to_string(), columns: Vec::new(), rows: Vec::new() }),
                ("note", None) => rep.notes.push(rest.to_string()),
                ("summary", None) => {
                    let mut it = rest.split(' ').map(|x| x.parse::<usize>());
                    match (it.next(), it.next()) {
                        (Some(Ok(c)), Some(Ok(f))) => {
                            rep.checks = c;
                            rep.failures = f;
                            summary = true;
                        }
                        _ => return Err(bad(i, "malformed summary")),
                    }
                }
                _ => return Err(bad(i, &format!("unknown tag {tag:?}"))),
            }
        }
        if open.is_some() || !summary {
            return Err(bad(0, "truncated report"));
        }
        Ok(rep)
    }
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

fn join(cells: &[String]) -> String {
    cells.iter().map(|c| clean(c)).collect::<Vec<_>>().join("\t")
}

fn split(s: &str) -> Vec<String> {
    if s.is_empty() {
        return Vec::new();
    }
    s.split('\t').map(str::to_string).collect()
}

/// Residual-style float: 3 significant digits.
pub fn fmt_residual(x: f64) -> String {
    format!("{x:.2e}")
}

/// Value-style float: 10 significant digits, with a canonical zero.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x:.9e}")
}

pub fn fmt_complex(z: C64) -> String {
    format!("{}{}{}i", fmt_real(z.re), if z.im.is_sign_negative() { "" } else { "+" }, fmt_real(z.im))
}

pub fn fmt_bool(b: bool) -> String {
    (if b { "pass" } else { "fail" }).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("table1");
        r.set("M", "3,5");
        r.set("seed", 7);
        let mut t = Table::new("counts", &["N", "M", "fraction", "status"]);
        t.push(vec!["3".into(), "3".into(), "1/3".into(), fmt_bool(r.check(true))]);
        t.push(vec!["3".into(), "5".into(), "1/10".into(), fmt_bool(r.check(false))]);
        r.tables.push(t);
        r.note("tab\tinside");
        r
    }

    #[test]
    fn render_parse_roundtrip() {
        let r = sample();
        let text = r.render();
        assert!(text.starts_with("sixvertex-report 1\n"));
        let back = Report::parse(&text).unwrap();
        assert_eq!(back.render(), text);
        assert_eq!(back.failures, 1);
        assert_eq!(back.notes, vec!["tab inside".to_string()]);
    }

    #[test]
    fn rejects_other_versions_and_truncation() {
        let text = sample().render();
        assert!(Report::parse(&text.replacen("report 1", "report 2", 1)).is_err());
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(Report::parse(&cut).is_err());
    }

    #[test]
    fn human_view_aligns() {
        let h = sample().render_human();
        assert!(h.contains("== counts =="));
        assert!(h.ends_with("FAIL: 2 checks, 1 failures\n"));
    }

    #[test]
    fn float_formats_are_fixed() {
        assert_eq!(fmt_real(0.0), "0");
        assert_eq!(fmt_residual(1.234e-12), "1.23e-12");
        assert_eq!(fmt_complex(C64::new(1.0, -0.5)), "1.000000000e0-5.000000000e-1i");
    }
}
