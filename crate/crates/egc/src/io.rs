//! CSV panels in and out.
//!
//! Input files have a header row and comma-separated decimal numbers. Lines
//! starting with `#` are skipped, which is how written files carry their
//! manifest.

use std::fs;
use std::path::Path;

use csv::{ReaderBuilder, Trim, WriterBuilder};
use egc_core::marginal::log_returns;
use egc_core::mvine::SeriesPanel;

use crate::error::{CliError, CliResult};

/// Shortest series accepted for testing or fitting.
pub const MIN_ROWS: usize = 20;

#[derive(Debug, Clone, Default)]
pub struct PanelOptions {
    /// Effect column; the first non-date column when absent.
    pub effect: Option<String>,
    /// Cause columns; every other non-date column when empty.
    pub causes: Vec<String>,
    pub date_column: Option<String>,
    /// Replace each column by its percentage log-returns.
    pub log_returns: bool,
}

/// Header and numeric columns of a CSV file, before selection.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// File line of each data row, for error messages.
    pub lines: Vec<u64>,
}

pub fn read_table(path: &Path) -> CliResult<RawTable> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::input(format!("cannot read '{}': {other:?}", path.display())),
        })?;
    let headers: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::input(format!("'{}' has no header row", path.display())));
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        lines.push(record.position().map_or(0, |p| p.line()));
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(RawTable { headers, rows, lines })
}

fn find_column(headers: &[String], name: &str) -> CliResult<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        CliError::input(format!(
            "column '{name}' not found; available columns: {}",
            headers.join(", ")
        ))
    })
}

impl RawTable {
    /// Column indices of `(effect, causes...)`.
    pub fn selection(&self, opts: &PanelOptions) -> CliResult<Vec<usize>> {
        let date = opts.date_column.as_deref().map(|d| find_column(&self.headers, d)).transpose()?;
        let data: Vec<usize> = (0..self.headers.len()).filter(|&j| Some(j) != date).collect();
        let effect = match &opts.effect {
            Some(name) => find_column(&self.headers, name)?,
            None => *data
                .first()
                .ok_or_else(|| CliError::input("no data columns besides the date column"))?,
        };
        let causes: Vec<usize> = if opts.causes.is_empty() {
            data.into_iter().filter(|&j| j != effect).collect()
        } else {
            opts.causes
                .iter()
                .map(|c| find_column(&self.headers, c))
                .collect::<CliResult<_>>()?
        };
        if causes.is_empty() {
            return Err(CliError::input("at least one cause column is needed"));
        }
        if Some(effect) == date || causes.iter().any(|&c| Some(c) == date) {
            return Err(CliError::input("the date column cannot be tested"));
        }
        let mut selected = vec![effect];
        for c in causes {
            if selected.contains(&c) {
                return Err(CliError::input(format!("column '{}' is selected twice", self.headers[c])));
            }
            selected.push(c);
        }
        Ok(selected)
    }

    pub fn numeric_column(&self, j: usize) -> CliResult<Vec<f64>> {
        let name = &self.headers[j];
        self.rows
            .iter()
            .zip(&self.lines)
            .enumerate()
            .map(|(r, (row, line))| {
                let cell = row.get(j).map(String::as_str).unwrap_or("");
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::input(format!(
                        "non-numeric value '{cell}' in row {} (line {line}), column '{name}'",
                        r + 1
                    ))
                })
            })
            .collect()
    }

    pub fn to_panel(&self, opts: &PanelOptions) -> CliResult<SeriesPanel> {
        let selected = self.selection(opts)?;
        let mut names = Vec::with_capacity(selected.len());
        let mut columns = Vec::with_capacity(selected.len());
        for &j in &selected {
            let mut col = self.numeric_column(j)?;
            if opts.log_returns {
                col = log_returns(&col)?;
                if col.iter().all(|&v| v == col[0]) {
                    return Err(egc_core::Error::Domain(format!(
                        "degenerate column after transform: '{}'",
                        self.headers[j]
                    ))
                    .into());
                }
            }
            names.push(self.headers[j].clone());
            columns.push(col);
        }
        let t_len = columns[0].len();
        if t_len < MIN_ROWS {
            return Err(CliError::input(format!(
                "series too short: {t_len} rows, need at least {MIN_ROWS}"
            )));
        }
        Ok(SeriesPanel::new(names, columns)?)
    }
}

pub fn read_panel(path: &Path, opts: &PanelOptions) -> CliResult<SeriesPanel> {
    read_table(path)?.to_panel(opts)
}

/// The panel as CSV text, preceded by `# ` comment lines. Numbers use the
/// shortest representation that parses back to the same `f64`.
pub fn panel_csv(panel: &SeriesPanel, comments: &[String]) -> CliResult<String> {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    let mut writer = WriterBuilder::new().from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::input(format!("cannot format CSV: {e}"));
    writer.write_record(panel.names()).map_err(csv_err)?;
    for t in 0..panel.n_rows() {
        writer
            .write_record(panel.row(t).iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::input(format!("cannot format CSV: {e}")))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
