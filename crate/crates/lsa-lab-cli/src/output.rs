//! Result artifacts: results.csv (fixed schema), bounds.json, meta.json.
//!
//! Rows are written with 17 significant digits so doubles survive a
//! text round-trip; reruns with the same config are byte-identical except
//! for the trailing wall-time column.

use std::path::Path;

use serde::Serialize;

use lsa_lab::bounds::BoundComponents;
use lsa_lab::{Error, Result};

pub const CSV_HEADER: &str = "experiment,quantity,n,p,alpha,estimate,ci_low,ci_high,\
bound_total,bound_leading,bound_fluctuation,bound_transient,bound_bias,eligible,seed,wall_time_ms";

/// 17 significant digits; round-trips any finite f64.
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: &'static str,
    pub quantity: String,
    pub n: u64,
    pub p: f64,
    pub alpha: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Bound evaluated on the same grid point, when one applies.
    pub bound: Option<BoundComponents>,
    pub eligible: Option<bool>,
    pub seed: u64,
    pub wall_time_ms: u128,
}

impl ResultRow {
    fn csv_line(&self) -> String {
        let (bt, bl, bf, btr, bb) = match &self.bound {
            Some(c) => (
                g17(c.total),
                g17(c.leading),
                g17(c.fluctuation),
                g17(c.transient),
                g17(c.bias),
            ),
            None => Default::default(),
        };
        let eligible = match self.eligible {
            Some(e) => e.to_string(),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.quantity,
            self.n,
            g17(self.p),
            g17(self.alpha),
            g17(self.estimate),
            g17(self.ci_low),
            g17(self.ci_high),
            bt,
            bl,
            bf,
            btr,
            bb,
            eligible,
            self.seed,
            self.wall_time_ms,
        )
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.csv_line());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("json encode: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// One parsed results.csv row; bound cells may be empty.
#[derive(Debug, Clone)]
pub struct ParsedRow {
    pub experiment: String,
    pub quantity: String,
    pub n: u64,
    pub p: f64,
    pub alpha: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound_total: Option<f64>,
    pub eligible: Option<bool>,
    pub seed: u64,
}

pub fn read_results(path: &Path) -> Result<Vec<ParsedRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::Parse(format!("{}: unexpected header", path.display()))),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 16 {
            return Err(Error::Parse(format!(
                "{}: row {} has {} cells, expected 16",
                path.display(),
                idx + 2,
                cells.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            cells[i]
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: cell {i}: {e}", idx + 2)))
        };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if cells[i].is_empty() { Ok(None) } else { num(i).map(Some) }
        };
        rows.push(ParsedRow {
            experiment: cells[0].into(),
            quantity: cells[1].into(),
            n: cells[2]
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: n: {e}", idx + 2)))?,
            p: num(3)?,
            alpha: num(4)?,
            estimate: num(5)?,
            ci_low: num(6)?,
            ci_high: num(7)?,
            bound_total: opt_num(8)?,
            eligible: match cells[13] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => {
                    return Err(Error::Parse(format!("row {}: eligible: {other}", idx + 2)))
                }
            },
            seed: cells[14]
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: seed: {e}", idx + 2)))?,
        });
    }
    Ok(rows)
}
