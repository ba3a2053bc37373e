use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const HEADER: [&str; 16] = [
    "t",
    "dt",
    "mass",
    "l2_n",
    "linf_n",
    "dev_inf",
    "grad_w_l2",
    "grad_w_l6",
    "grad_w_linf",
    "u_l2",
    "u_linf",
    "c_min",
    "c_max",
    "energy_f",
    "div_residual",
    "clamped_mass_cum",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
}

/// One diagnostic sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsRow {
    pub t: f64,
    /// Last step size (0 for the initial row).
    pub dt: f64,
    pub mass: f64,
    pub l2_n: f64,
    pub linf_n: f64,
    pub dev_inf: f64,
    pub grad_w_l2: f64,
    pub grad_w_l6: f64,
    pub grad_w_linf: f64,
    pub u_l2: f64,
    pub u_linf: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub energy_f: f64,
    pub div_residual: f64,
    pub clamped_mass_cum: f64,
}

impl DiagnosticsRow {
    pub fn values(&self) -> [f64; 16] {
        [
            self.t,
            self.dt,
            self.mass,
            self.l2_n,
            self.linf_n,
            self.dev_inf,
            self.grad_w_l2,
            self.grad_w_l6,
            self.grad_w_linf,
            self.u_l2,
            self.u_linf,
            self.c_min,
            self.c_max,
            self.energy_f,
            self.div_residual,
            self.clamped_mass_cum,
        ]
    }

    pub fn from_values(v: [f64; 16]) -> Self {
        Self {
            t: v[0],
            dt: v[1],
            mass: v[2],
            l2_n: v[3],
            linf_n: v[4],
            dev_inf: v[5],
            grad_w_l2: v[6],
            grad_w_l6: v[7],
            grad_w_linf: v[8],
            u_l2: v[9],
            u_linf: v[10],
            c_min: v[11],
            c_max: v[12],
            energy_f: v[13],
            div_residual: v[14],
            clamped_mass_cum: v[15],
        }
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        HEADER.iter().position(|h| *h == column).map(|k| self.values()[k])
    }
}

/// Formats with 17 significant digits.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_csv_string(rows: &[DiagnosticsRow]) -> String {
    let mut s = HEADER.join(",");
    s.push('\n');
    for row in rows {
        let fields: Vec<String> = row.values().iter().map(|v| format_value(*v)).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CsvError> {
    let io = |source| CsvError::Io { path: path.to_path_buf(), source };
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

pub fn write_rows(path: &Path, rows: &[DiagnosticsRow]) -> Result<(), CsvError> {
    write_atomic(path, &to_csv_string(rows))
}

/// Extracts `(t, column)` pairs from CSV text with a header line containing
/// `t` and `column`.
pub fn read_series(text: &str, column: &str) -> Result<Vec<(f64, f64)>, CsvError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(CsvError::Parse { line: 1, reason: "empty file".into() })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |c: &str| names.iter().position(|n| *n == c).ok_or_else(|| CsvError::MissingColumn(c.to_string()));
    let (kt, kc) = (find("t")?, find(column)?);
    let mut out = Vec::new();
    for (no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(CsvError::Parse {
                line: no + 1,
                reason: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let num = |k: usize| {
            fields[k].parse::<f64>().map_err(|e| CsvError::Parse {
                line: no + 1,
                reason: format!("'{}': {e}", fields[k]),
            })
        };
        out.push((num(kt)?, num(kc)?));
    }
    Ok(out)
}

pub fn read_rows(text: &str) -> Result<Vec<DiagnosticsRow>, CsvError> {
    let mut columns = Vec::with_capacity(HEADER.len());
    for name in HEADER {
        columns.push(read_series(text, name)?);
    }
    let n = columns[0].len();
    Ok((0..n)
        .map(|i| {
            let mut v = [0.0; 16];
            for (k, col) in columns.iter().enumerate() {
                v[k] = col[i].1;
            }
            DiagnosticsRow::from_values(v)
        })
        .collect())
}
