//! CSV and aligned-table output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Result;

/// Rectangular table of preformatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = line.iter().map(|c| csv_cell(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Columns padded to their widest cell; first column left-aligned, others right-aligned.
    pub fn to_aligned(&self) -> String {
        let n = self.header.len();
        let widths: Vec<usize> = (0..n)
            .map(|i| std::iter::once(&self.header).chain(&self.rows).map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, r: &[String]| {
            for (i, cell) in r.iter().enumerate() {
                if i > 0 {
                    out.push_str("  ");
                }
                if i == 0 {
                    let _ = write!(out, "{cell:<w$}", w = widths[i]);
                } else {
                    let _ = write!(out, "{cell:>w$}", w = widths[i]);
                }
            }
            let trimmed = out.trim_end().len();
            out.truncate(trimmed);
            out.push('\n');
        };
        line(&mut out, &self.header);
        let rule: usize = widths.iter().sum::<usize>() + 2 * n.saturating_sub(1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Decibels with `inf` for identical inputs.
pub fn db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

pub fn ratio(v: f64) -> String {
    format!("{v:.4}")
}

/// Scale label as typed: `2`, `2.5`, `3.14`.
pub fn scale_label(s: f64) -> String {
    let t = format!("{s}");
    if t.contains('.') || t.contains('e') {
        t
    } else {
        format!("{s:.0}")
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    #[test]
    fn aligned_and_csv() {
        let mut t = Table::new(&["name", "psnr_db"]);
        t.push(vec!["a,b".into(), "31.8100".into()]);
        t.push(vec!["long_name".into(), "inf".into()]);
        assert_eq!(t.to_csv(), "name,psnr_db\n\"a,b\",31.8100\nlong_name,inf\n");
        assert_eq!(t.to_aligned(), "name       psnr_db\n------------------\na,b        31.8100\nlong_name      inf\n");
    }

    #[test]
    fn labels() {
        assert_eq!(scale_label(2.0), "2");
        assert_eq!(scale_label(3.14), "3.14");
        assert_eq!(db(f64::INFINITY), "inf");
    }
}
