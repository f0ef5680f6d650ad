//! Teacher dataset: trade-off optimal allocations paired with the environment's state
//! features, used as supervised targets for the actor.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{estimate_moments_until, solve_tradeoff, WeightVector};
use crate::backtest_env::{make_state, EnvConfig};
use crate::error::{Error, Result};
use crate::market_data::{compute_returns, format_date, parse_date, MarketPanel, ReturnKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeacherConfig {
    /// Trailing return rows used for the moment estimates.
    pub window: usize,
    pub rebalance_every: usize,
    pub lambda_risk: f64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            window: 60,
            rebalance_every: 5,
            lambda_risk: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherRecord {
    pub date: NaiveDate,
    pub state_features: Vec<f64>,
    pub target_weights: WeightVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherDataset {
    pub records: Vec<TeacherRecord>,
    /// Feature column names in layout order.
    pub feature_names: Vec<String>,
    pub assets: Vec<String>,
}

impl TeacherDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.extend(self.assets.iter().map(|a| format!("target_{a}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![format_date(r.date)];
            row.extend(r.state_features.iter().map(f64::to_string));
            row.extend(r.target_weights.as_slice().iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<teacher csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("date") {
            return Err(Error::Parse {
                line: 1,
                message: "teacher dataset header must start with `date`".into(),
            });
        }
        let first_target = header
            .iter()
            .position(|h| h.starts_with("target_"))
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: "no target_ columns".into(),
            })?;
        let feature_names = header[1..first_target].to_vec();
        let assets: Vec<String> = header[first_target..]
            .iter()
            .map(|h| h.trim_start_matches("target_").to_string())
            .collect();
        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("bad number `{s}`: {e}"),
                })
            };
            let values: Vec<f64> = rec.iter().skip(1).map(parse).collect::<Result<_>>()?;
            let (features, targets) = values.split_at(first_target - 1);
            records.push(TeacherRecord {
                date: parse_date(&rec[0]).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?,
                state_features: features.to_vec(),
                target_weights: WeightVector::new(targets.to_vec()).map_err(|e| Error::Validation {
                    line,
                    message: e.to_string(),
                })?,
            });
        }
        Ok(Self {
            records,
            feature_names,
            assets,
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }
}

/// Solve the trade-off problem every `rebalance_every` dates and pair each solution with the
/// state features at that date.
///
/// The first record sits at `max(window, env warm-up)`. The weights block of each state is
/// the teacher's previous allocation (uniform for the first record).
pub fn teacher_allocations(panel: &MarketPanel, teacher: &TeacherConfig, env: &EnvConfig) -> Result<TeacherDataset> {
    if teacher.rebalance_every == 0 {
        return Err(Error::Config("rebalance_every must be at least 1".into()));
    }
    if panel.n_dates() < teacher.window + 1 {
        return Err(Error::Length(format!(
            "teacher window {} needs at least {} dates, panel has {}",
            teacher.window,
            teacher.window + 1,
            panel.n_dates()
        )));
    }
    let returns = compute_returns(panel, ReturnKind::Simple)?;
    let first = teacher.window.max(env.warmup());
    if first >= panel.n_dates() {
        return Err(Error::Length(format!(
            "first teacher date index {first} is past the panel end ({} dates)",
            panel.n_dates()
        )));
    }
    let mut current = WeightVector::uniform(panel.n_assets());
    let mut records = Vec::new();
    for t in (first..panel.n_dates()).step_by(teacher.rebalance_every) {
        // return row t-1 is the move into date t
        let moments = estimate_moments_until(&returns, t, teacher.window)?;
        let target = solve_tradeoff(&moments, teacher.lambda_risk)?;
        records.push(TeacherRecord {
            date: panel.dates()[t],
            state_features: make_state(panel, t, &current, env)?,
            target_weights: target.clone(),
        });
        current = target;
    }
    Ok(TeacherDataset {
        records,
        feature_names: env.feature_names(panel.assets()),
        assets: panel.assets().to_vec(),
    })
}
