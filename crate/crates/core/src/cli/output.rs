//! Tabular and plot emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::config::OutputFormat;
use super::CliError;
use crate::dynamics::Trajectory;

/// A header plus rows of preformatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Fixed 12-significant-digit scientific notation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

impl Table {
    pub fn new(columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| CliError::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        };
        w.write_record(&self.columns).map_err(to_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(to_err)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        })
    }

    /// `{"columns": [...], "rows": [[...], ...]}` with numeric cells as numbers.
    pub fn to_json(&self) -> Vec<u8> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Array(
                    r.iter()
                        .map(|c| match c.parse::<f64>() {
                            Ok(x) if x.is_finite() => json!(x),
                            _ => json!(c),
                        })
                        .collect(),
                )
            })
            .collect();
        let mut out =
            serde_json::to_vec_pretty(&json!({ "columns": self.columns, "rows": rows })).expect("tables serialize");
        out.push(b'\n');
        out
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<(), CliError> {
        let bytes = match format {
            OutputFormat::Csv => self.to_csv()?,
            OutputFormat::Json => self.to_json(),
        };
        write_bytes(path, &bytes)
    }

    /// Parses a CSV written by [`Table::to_csv`].
    pub fn read_csv(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
        let columns = r
            .headers()
            .map_err(|e| CliError::io(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(
                rec.map_err(|e| CliError::io(path, e))?
                    .iter()
                    .map(str::to_string)
                    .collect(),
            );
        }
        Ok(Self { columns, rows })
    }

    pub fn numeric_column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Column names: `time`, `p_<basis>` for every basis state, then
/// `re_<basis>`, `im_<basis>` pairs when amplitudes are requested.
pub fn trajectory_table(tr: &Trajectory, include_amplitudes: bool) -> Table {
    let names: Vec<String> = tr.basis_labels.iter().map(ToString::to_string).collect();
    let mut columns = vec!["time".to_string()];
    columns.extend(names.iter().map(|n| format!("p_{n}")));
    if include_amplitudes {
        for n in &names {
            columns.push(format!("re_{n}"));
            columns.push(format!("im_{n}"));
        }
    }
    let mut table = Table::new(columns);
    for (i, &t) in tr.time_grid.iter().enumerate() {
        let mut row = Vec::with_capacity(table.columns.len());
        row.push(fmt_num(t));
        row.extend(tr.populations.row(i).iter().map(|&p| fmt_num(p)));
        if include_amplitudes {
            for z in tr.states.row(i).iter() {
                row.push(fmt_num(z.re));
                row.push(fmt_num(z.im));
            }
        }
        table.push(row);
    }
    table
}

/// Two-column `key, value` summary.
pub fn summary_table(entries: &[(String, String)]) -> Table {
    let mut t = Table::new(["key", "value"]);
    for (k, v) in entries {
        t.push(vec![k.clone(), v.clone()]);
    }
    t
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Static population-versus-time plot of the selected basis columns.
pub fn trajectory_svg(tr: &Trajectory, columns: &[usize], title: &str) -> String {
    let (w, h) = (800.0, 420.0);
    let (left, right, top, bottom) = (60.0, 150.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let t_max = tr.time_grid.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let x = |t: f64| left + pw * t / t_max;
    let y = |p: f64| top + ph * (1.0 - p.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let p = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{p:.2}</text>"#,
            left - 6.0,
            y(p) + 4.0
        );
        let t = t_max * p;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x(t),
            top + ph + 18.0,
            trim_num(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">population</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (k, &col) in columns.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts = String::new();
        for (i, &t) in tr.time_grid.iter().enumerate() {
            let _ = write!(pts, "{:.2},{:.2} ", x(t), y(tr.populations[(i, col)]));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = top + 16.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            left + pw + 12.0,
            left + pw + 36.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            left + pw + 42.0,
            ly + 4.0,
            escape(&tr.basis_labels[col].to_string())
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim_num(x: f64) -> String {
    if x >= 100.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{basis_state, trajectory_matrix};
    use crate::network::BasisLabel;
    use nalgebra::DMatrix;
    use num_complex::Complex64 as C64;

    fn small() -> Trajectory {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.2, 0.0].map(|x| C64::new(x, 0.0)));
        trajectory_matrix(
            &h,
            vec![BasisLabel::Terminal("s".into()), BasisLabel::Node(1)],
            &basis_state(2, 0),
            5.0,
            3,
        )
        .unwrap()
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let tr = small();
        let table = trajectory_table(&tr, false);
        let text = String::from_utf8(table.to_csv().unwrap()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "time,p_s,p_node1");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        table.write(&path, OutputFormat::Csv).unwrap();
        let back = Table::read_csv(&path).unwrap();
        let ps = back.numeric_column("p_s").unwrap();
        let pn = back.numeric_column("p_node1").unwrap();
        for i in 0..3 {
            assert!((ps[i] - tr.populations[(i, 0)]).abs() < 1e-11);
            assert!((ps[i] + pn[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn amplitude_columns() {
        let table = trajectory_table(&small(), true);
        assert_eq!(table.columns.len(), 1 + 2 + 2 * 2);
        assert_eq!(table.columns[3], "re_s");
    }

    #[test]
    fn json_mirror_uses_same_names() {
        let v: Value = serde_json::from_slice(&trajectory_table(&small(), false).to_json()).unwrap();
        assert_eq!(v["columns"][1], "p_s");
        assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn svg_is_deterministic() {
        let a = trajectory_svg(&small(), &[0, 1], "t");
        assert_eq!(a, trajectory_svg(&small(), &[0, 1], "t"));
        assert!(a.starts_with("<svg") && a.contains("polyline"));
    }
}
