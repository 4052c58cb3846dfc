//! Structured-text report assembly. Key order is fixed by emission order,
//! and every formatter is deterministic, so identical runs produce
//! byte-identical reports.

use std::fmt::Display;

use num_complex::Complex64;

use darboux_core::linalg::CMatrix;

#[derive(Default)]
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn section(&mut self, name: &str) {
        if !self.lines.is_empty() {
            self.lines.push(String::new());
        }
        self.lines.push(format!("[{name}]"));
    }

    pub fn kv(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    /// Preformatted `key = value` line.
    pub fn raw(&mut self, line: String) {
        self.lines.push(line);
    }

    pub fn text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// `(a+bi)`, matching the scenario literal syntax. Signed zeros are
/// normalized so negations of real literals read naturally.
pub fn fmt_complex(z: Complex64) -> String {
    let re = if z.re == 0.0 { 0.0 } else { z.re };
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    format!("({re}{im:+}i)")
}

/// Residual-style numbers: three significant digits are plenty and keep
/// the report readable.
pub fn fmt_res(v: f64) -> String {
    format!("{v:.3e}")
}

pub fn fmt_matrix(m: &CMatrix) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|i| {
            let cols: Vec<String> = (0..m.cols()).map(|j| fmt_complex(m.get(i, j))).collect();
            format!("[{}]", cols.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// Monic polynomial in λ from its root/multiplicity list.
pub fn fmt_poly(roots: &[(Complex64, usize)]) -> String {
    if roots.is_empty() {
        return "1".to_string();
    }
    roots
        .iter()
        .map(|&(root, mult)| {
            let base = format!("(λ - {})", fmt_complex(root));
            if mult == 1 {
                base
            } else {
                format!("{base}^{mult}")
            }
        })
        .collect::<Vec<_>>()
        .join(" · ")
}
