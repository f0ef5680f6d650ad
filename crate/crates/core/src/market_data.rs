//! Daily OHLCV panels: loading, cleaning, normalization, returns and splits.
//!
//! Input files are long-form CSV with the header `date,ticker,open,high,low,close,volume`
//! and ISO-8601 dates. A panel is stored asset-major; every operation past
//! [`align_and_clean`] expects a rectangular panel (one record per asset per date).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["date", "ticker", "open", "high", "low", "close", "volume"];
const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ohlcv {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Ohlcv {
    /// A bar whose open, high and low all equal the close.
    pub fn flat(close: f64) -> Self {
        Self {
            open: close,
            high: close,
            low: close,
            close,
            volume: 0.0,
        }
    }

    fn scale_prices(&self, factor: f64) -> Self {
        Self {
            open: self.open / factor,
            high: self.high / factor,
            low: self.low / factor,
            close: self.close / factor,
            volume: self.volume,
        }
    }
}

/// A plain close series aligned with the panel's dates, e.g. an index used as benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub name: String,
    pub closes: Vec<Option<f64>>,
}

/// Aligned date x asset table of daily bars with an optional benchmark series.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    cells: Vec<Vec<Option<Ohlcv>>>,
    benchmark: Option<Benchmark>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    DropAsset,
    ForwardFill,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop-asset" => Ok(Self::DropAsset),
            "forward-fill" => Ok(Self::ForwardFill),
            other => Err(Error::Config(format!("unknown missing-data policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnKind {
    Simple,
    Log,
}

/// Per-date, per-asset returns. Row `k` covers the move from `dates[k] - 1 period` to `dates[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub kind: ReturnKind,
    /// `values[row][asset]`
    pub values: Vec<Vec<f64>>,
}

impl ReturnMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn column(&self, asset: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[asset]).collect()
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| Error::Config(format!("bad date `{s}`: {e}")))
}

pub fn format_date(d: NaiveDate) -> String {
    d.format(DATE_FORMAT).to_string()
}

impl MarketPanel {
    /// Build a rectangular panel from per-asset bar series.
    pub fn from_bars(dates: Vec<NaiveDate>, assets: Vec<String>, bars: Vec<Vec<Ohlcv>>) -> Result<Self> {
        if bars.len() != assets.len() {
            return Err(Error::Shape(format!(
                "{} assets but {} bar series",
                assets.len(),
                bars.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation {
                line: 0,
                message: "dates must be strictly increasing".into(),
            });
        }
        for (name, series) in assets.iter().zip(&bars) {
            if series.len() != dates.len() {
                return Err(Error::Shape(format!(
                    "asset {name} has {} bars for {} dates",
                    series.len(),
                    dates.len()
                )));
            }
            for (bar, date) in series.iter().zip(&dates) {
                validate_bar(bar).map_err(|message| Error::Validation {
                    line: 0,
                    message: format!("{name} on {}: {message}", format_date(*date)),
                })?;
            }
        }
        Ok(Self {
            dates,
            assets,
            cells: bars.into_iter().map(|s| s.into_iter().map(Some).collect()).collect(),
            benchmark: None,
        })
    }

    /// Rectangular panel of flat bars built from close prices, `closes[asset][date]`.
    pub fn from_closes(dates: Vec<NaiveDate>, assets: Vec<String>, closes: Vec<Vec<f64>>) -> Result<Self> {
        let bars = closes
            .into_iter()
            .map(|s| s.into_iter().map(Ohlcv::flat).collect())
            .collect();
        Self::from_bars(dates, assets, bars)
    }

    pub fn with_benchmark(mut self, name: impl Into<String>, closes: Vec<f64>) -> Result<Self> {
        if closes.len() != self.dates.len() {
            return Err(Error::Shape(format!(
                "benchmark has {} closes for {} dates",
                closes.len(),
                self.dates.len()
            )));
        }
        if closes.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Validation {
                line: 0,
                message: "benchmark closes must be positive".into(),
            });
        }
        self.benchmark = Some(Benchmark {
            name: name.into(),
            closes: closes.into_iter().map(Some).collect(),
        });
        Ok(self)
    }

    /// Move the asset named `ticker` out of the investable set and into the benchmark slot.
    pub fn extract_benchmark(mut self, ticker: &str) -> Result<Self> {
        let idx = self
            .assets
            .iter()
            .position(|a| a == ticker)
            .ok_or_else(|| Error::Config(format!("benchmark ticker `{ticker}` not in panel")))?;
        let name = self.assets.remove(idx);
        let series = self.cells.remove(idx);
        self.benchmark = Some(Benchmark {
            name,
            closes: series.into_iter().map(|c| c.map(|b| b.close)).collect(),
        });
        Ok(self)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn bar(&self, asset: usize, t: usize) -> Option<&Ohlcv> {
        self.cells[asset][t].as_ref()
    }

    /// Close of `asset` on date index `t`.
    ///
    /// Panics if the cell is missing; only call on rectangular panels.
    pub fn close(&self, asset: usize, t: usize) -> f64 {
        self.cells[asset][t]
            .as_ref()
            .expect("close() on a missing cell; clean the panel first")
            .close
    }

    pub fn closes_at(&self, t: usize) -> Vec<f64> {
        (0..self.n_assets()).map(|a| self.close(a, t)).collect()
    }

    pub fn asset_closes(&self, asset: usize) -> Vec<f64> {
        (0..self.n_dates()).map(|t| self.close(asset, t)).collect()
    }

    /// Price relatives `P_t / P_{t-1}` for every asset at date index `t >= 1`.
    pub fn relatives_at(&self, t: usize) -> Vec<f64> {
        (0..self.n_assets())
            .map(|a| self.close(a, t) / self.close(a, t - 1))
            .collect()
    }

    pub fn benchmark(&self) -> Option<&Benchmark> {
        self.benchmark.as_ref()
    }

    /// Benchmark closes, if present and complete.
    pub fn benchmark_closes(&self) -> Option<Vec<f64>> {
        self.benchmark.as_ref()?.closes.iter().copied().collect()
    }

    pub fn is_rectangular(&self) -> bool {
        self.cells.iter().all(|s| s.iter().all(Option::is_some))
    }

    pub fn require_rectangular(&self) -> Result<()> {
        for (a, series) in self.cells.iter().enumerate() {
            if let Some(t) = series.iter().position(Option::is_none) {
                return Err(Error::NotRectangular {
                    asset: self.assets[a].clone(),
                    date: format_date(self.dates[t]),
                });
            }
        }
        Ok(())
    }

    /// Sub-panel over the date index range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> MarketPanel {
        MarketPanel {
            dates: self.dates[start..end].to_vec(),
            assets: self.assets.clone(),
            cells: self.cells.iter().map(|s| s[start..end].to_vec()).collect(),
            benchmark: self.benchmark.as_ref().map(|b| Benchmark {
                name: b.name.clone(),
                closes: b.closes[start..end].to_vec(),
            }),
        }
    }

    /// Index of the latest date `<= date`, if any.
    pub fn index_at_or_before(&self, date: NaiveDate) -> Option<usize> {
        match self.dates.binary_search(&date) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }
}

fn validate_bar(bar: &Ohlcv) -> std::result::Result<(), String> {
    let prices = [
        ("open", bar.open),
        ("high", bar.high),
        ("low", bar.low),
        ("close", bar.close),
    ];
    for (name, p) in prices {
        if !p.is_finite() || p <= 0.0 {
            return Err(format!("{name} must be positive, got {p}"));
        }
    }
    if !bar.volume.is_finite() || bar.volume < 0.0 {
        return Err(format!("volume must be non-negative, got {}", bar.volume));
    }
    Ok(())
}

/// Load a long-form OHLCV CSV file.
pub fn load_ohlcv_csv(path: impl AsRef<Path>) -> Result<MarketPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ohlcv_csv(file)
}

pub fn read_ohlcv_csv<R: Read>(reader: R) -> Result<MarketPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let got: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if got != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, got `{}`", CSV_HEADER.join(","), got.join(",")),
        });
    }

    let mut rows: BTreeMap<String, BTreeMap<NaiveDate, Ohlcv>> = BTreeMap::new();
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", CSV_HEADER.len(), record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT).map_err(|e| Error::Parse {
            line,
            message: format!("bad date `{}`: {e}", &record[0]),
        })?;
        let ticker = record[1].to_string();
        if ticker.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty ticker".into(),
            });
        }
        let num = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad {} `{}`: {e}", CSV_HEADER[i], &record[i]),
            })
        };
        let bar = Ohlcv {
            open: num(2)?,
            high: num(3)?,
            low: num(4)?,
            close: num(5)?,
            volume: num(6)?,
        };
        validate_bar(&bar).map_err(|message| Error::Validation {
            line,
            message: format!("{ticker} on {}: {message}", &record[0]),
        })?;
        let series = rows.entry(ticker.clone()).or_default();
        if series.insert(date, bar).is_some() {
            return Err(Error::Duplicate {
                line,
                date: record[0].to_string(),
                ticker,
            });
        }
    }

    if rows.is_empty() {
        return Err(Error::EmptyPanel("no data rows".into()));
    }

    let dates: Vec<NaiveDate> = rows
        .values()
        .flat_map(|s| s.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let assets: Vec<String> = rows.keys().cloned().collect();
    let cells = rows
        .values()
        .map(|s| dates.iter().map(|d| s.get(d).copied()).collect())
        .collect();
    Ok(MarketPanel {
        dates,
        assets,
        cells,
        benchmark: None,
    })
}

/// Write a panel as canonical long-form CSV (dates ascending, assets in panel order,
/// benchmark rows last per date as flat bars). Missing cells are skipped.
pub fn write_panel_csv<W: Write>(panel: &MarketPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for (t, date) in panel.dates.iter().enumerate() {
        let d = format_date(*date);
        for (a, name) in panel.assets.iter().enumerate() {
            if let Some(bar) = &panel.cells[a][t] {
                w.write_record([
                    d.clone(),
                    name.clone(),
                    bar.open.to_string(),
                    bar.high.to_string(),
                    bar.low.to_string(),
                    bar.close.to_string(),
                    bar.volume.to_string(),
                ])?;
            }
        }
        if let Some(b) = &panel.benchmark {
            if let Some(c) = b.closes[t] {
                let c = c.to_string();
                w.write_record([d.clone(), b.name.clone(), c.clone(), c.clone(), c.clone(), c, "0".into()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<panel csv>", e))?;
    Ok(())
}

pub fn save_panel_csv(panel: &MarketPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_panel_csv(panel, std::io::BufWriter::new(file))
}

/// Make the panel rectangular.
///
/// `DropAsset` removes every asset with at least one missing date. `ForwardFill` copies the
/// last known bar forward; an asset with nothing to fill from (missing on the first date)
/// is dropped. The benchmark, if any, is always forward-filled and discarded when it has a
/// leading gap.
pub fn align_and_clean(panel: &MarketPanel, policy: MissingPolicy) -> Result<MarketPanel> {
    let mut assets = Vec::new();
    let mut cells = Vec::new();
    for (name, series) in panel.assets.iter().zip(&panel.cells) {
        match policy {
            MissingPolicy::DropAsset => {
                if series.iter().all(Option::is_some) {
                    assets.push(name.clone());
                    cells.push(series.clone());
                }
            }
            MissingPolicy::ForwardFill => {
                if let Some(filled) = forward_fill(series) {
                    assets.push(name.clone());
                    cells.push(filled.into_iter().map(Some).collect());
                }
            }
        }
    }
    if assets.is_empty() {
        return Err(Error::EmptyPanel("no asset survives cleaning".into()));
    }
    if panel.dates.len() < 2 {
        return Err(Error::EmptyPanel(format!("{} date(s), need at least 2", panel.dates.len())));
    }
    let benchmark = panel.benchmark.as_ref().and_then(|b| {
        forward_fill(&b.closes).map(|closes| Benchmark {
            name: b.name.clone(),
            closes: closes.into_iter().map(Some).collect(),
        })
    });
    Ok(MarketPanel {
        dates: panel.dates.clone(),
        assets,
        cells,
        benchmark,
    })
}

fn forward_fill<T: Copy>(series: &[Option<T>]) -> Option<Vec<T>> {
    let mut last = None;
    series
        .iter()
        .map(|c| {
            if c.is_some() {
                last = *c;
            }
            last
        })
        .collect()
}

/// Divide each asset's prices by its first close so every close series starts at 1.0.
/// The benchmark is rescaled the same way. Volume is untouched.
pub fn normalize_prices(panel: &MarketPanel) -> Result<MarketPanel> {
    panel.require_rectangular()?;
    let cells = panel
        .cells
        .iter()
        .map(|series| {
            let anchor = series[0].expect("rectangular").close;
            series.iter().map(|c| c.map(|b| b.scale_prices(anchor))).collect()
        })
        .collect();
    let benchmark = panel.benchmark.as_ref().map(|b| {
        let anchor = b.closes.iter().flatten().next().copied().unwrap_or(1.0);
        Benchmark {
            name: b.name.clone(),
            closes: b.closes.iter().map(|c| c.map(|v| v / anchor)).collect(),
        }
    });
    Ok(MarketPanel {
        dates: panel.dates.clone(),
        assets: panel.assets.clone(),
        cells,
        benchmark,
    })
}

fn relative_rows(panel: &MarketPanel) -> Result<Vec<Vec<f64>>> {
    panel.require_rectangular()?;
    if panel.n_dates() < 2 {
        return Err(Error::Length(format!("need at least 2 dates, got {}", panel.n_dates())));
    }
    Ok((1..panel.n_dates()).map(|t| panel.relatives_at(t)).collect())
}

/// Close-to-close returns. Simple returns are `x - 1` for the price relative `x`.
pub fn compute_returns(panel: &MarketPanel, kind: ReturnKind) -> Result<ReturnMatrix> {
    let rows = relative_rows(panel)?;
    let values = rows
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|x| match kind {
                    ReturnKind::Simple => x - 1.0,
                    ReturnKind::Log => x.ln(),
                })
                .collect()
        })
        .collect();
    Ok(ReturnMatrix {
        dates: panel.dates[1..].to_vec(),
        assets: panel.assets.clone(),
        kind,
        values,
    })
}

/// Price relatives `x_t = P_t / P_{t-1}`, stored as a [`ReturnMatrix`] of kind `Simple`
/// shifted by one.
pub fn price_relatives(panel: &MarketPanel) -> Result<ReturnMatrix> {
    Ok(ReturnMatrix {
        dates: panel.dates[1..].to_vec(),
        assets: panel.assets.clone(),
        kind: ReturnKind::Simple,
        values: relative_rows(panel)?,
    })
}

/// Split into training, validation and trading panels:
/// `[start, train_end]`, `(train_end, valid_end]`, `(valid_end, end]`.
///
/// Boundaries falling between trading days snap to the latest date on or before them.
pub fn split(
    panel: &MarketPanel,
    train_end: NaiveDate,
    valid_end: NaiveDate,
) -> Result<(MarketPanel, MarketPanel, MarketPanel)> {
    if train_end >= valid_end {
        return Err(Error::Domain(format!(
            "train_end {} must precede valid_end {}",
            format_date(train_end),
            format_date(valid_end)
        )));
    }
    let (first, last) = match (panel.dates.first(), panel.dates.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::EmptyPanel("no dates".into())),
    };
    for d in [train_end, valid_end] {
        if d < first || d > last {
            return Err(Error::Range(format_date(d)));
        }
    }
    let i_train = panel.index_at_or_before(train_end).expect("checked range") + 1;
    let i_valid = panel.index_at_or_before(valid_end).expect("checked range") + 1;
    let n = panel.n_dates();
    if i_valid == i_train {
        return Err(Error::EmptySplit("validation"));
    }
    if i_valid == n {
        return Err(Error::EmptySplit("trading"));
    }
    Ok((
        panel.slice(0, i_train),
        panel.slice(i_train, i_valid),
        panel.slice(i_valid, n),
    ))
}

/// Summary counts used by the ingest command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanSummary {
    pub assets_in: usize,
    pub assets_out: usize,
    pub dropped_assets: Vec<String>,
    pub dates: usize,
    pub filled_cells: usize,
}

pub fn clean_summary(before: &MarketPanel, after: &MarketPanel) -> CleanSummary {
    let kept: HashMap<&str, ()> = after.assets.iter().map(|a| (a.as_str(), ())).collect();
    let dropped_assets: Vec<String> = before
        .assets
        .iter()
        .filter(|a| !kept.contains_key(a.as_str()))
        .cloned()
        .collect();
    let filled_cells = before
        .assets
        .iter()
        .zip(&before.cells)
        .filter(|(a, _)| kept.contains_key(a.as_str()))
        .map(|(_, s)| s.iter().filter(|c| c.is_none()).count())
        .sum();
    CleanSummary {
        assets_in: before.n_assets(),
        assets_out: after.n_assets(),
        dropped_assets,
        dates: after.n_dates(),
        filled_cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        parse_date(s).unwrap()
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        (0..n)
            .map(|i| d("2010-01-04") + chrono::Duration::days(i as i64))
            .collect()
    }

    fn one_asset(closes: &[f64]) -> MarketPanel {
        MarketPanel::from_closes(dates(closes.len()), vec!["A".into()], vec![closes.to_vec()]).unwrap()
    }

    const COMPLETE: &str = "date,ticker,open,high,low,close,volume
2010-01-04,AAPL,1,1,1,10,100
2010-01-04,MSFT,1,1,1,20,100
2010-01-05,AAPL,1,1,1,11,100
2010-01-05,MSFT,1,1,1,21,100
2010-01-06,AAPL,1,1,1,12,100
2010-01-06,MSFT,1,1,1,22,100
";

    #[test]
    fn loads_complete_file() {
        let p = read_ohlcv_csv(COMPLETE.as_bytes()).unwrap();
        assert_eq!(p.n_assets(), 2);
        assert_eq!(p.n_dates(), 3);
        assert!(p.is_rectangular());
        assert_eq!(p.close(1, 2), 22.0);
    }

    #[test]
    fn duplicate_row_is_rejected() {
        let text = format!("{COMPLETE}2010-01-04,AAPL,1,1,1,10,100\n");
        match read_ohlcv_csv(text.as_bytes()) {
            Err(Error::Duplicate { line, ticker, .. }) => {
                assert_eq!(line, 8);
                assert_eq!(ticker, "AAPL");
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn zero_close_names_the_row() {
        let text = "date,ticker,open,high,low,close,volume\n2010-01-04,AAPL,1,1,1,0,100\n";
        match read_ohlcv_csv(text.as_bytes()) {
            Err(Error::Validation { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("AAPL"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "date,ticker,open,high,low,close,volume\n2010-01-04,AAPL,1,1,1,abc,100\n";
        assert!(matches!(read_ohlcv_csv(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_ohlcv_csv("".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    fn gappy() -> MarketPanel {
        let text = "date,ticker,open,high,low,close,volume
2010-01-04,A,1,1,1,10,1
2010-01-04,B,1,1,1,5,1
2010-01-05,A,1,1,1,11,1
2010-01-06,A,1,1,1,12,1
2010-01-06,B,1,1,1,6,1
";
        read_ohlcv_csv(text.as_bytes()).unwrap()
    }

    #[test]
    fn drop_asset_removes_gappy_asset() {
        let p = align_and_clean(&gappy(), MissingPolicy::DropAsset).unwrap();
        assert_eq!(p.assets(), ["A"]);
        assert!(p.is_rectangular());
    }

    #[test]
    fn forward_fill_copies_prior_day() {
        let raw = gappy();
        let p = align_and_clean(&raw, MissingPolicy::ForwardFill).unwrap();
        assert_eq!(p.assets(), ["A", "B"]);
        assert_eq!(p.bar(1, 1), raw.bar(1, 0));
        let s = clean_summary(&raw, &p);
        assert_eq!(s.filled_cells, 1);
        assert!(s.dropped_assets.is_empty());
    }

    #[test]
    fn forward_fill_without_first_date_is_empty() {
        let raw = gappy().with_benchmark("IDX", vec![1.0, 1.0, 1.0]).unwrap();
        // Blank out the first date for every asset.
        let mut raw = raw;
        for s in &mut raw.cells {
            s[0] = None;
        }
        assert!(matches!(
            align_and_clean(&raw, MissingPolicy::ForwardFill),
            Err(Error::EmptyPanel(_))
        ));
    }

    #[test]
    fn normalization() {
        let p = normalize_prices(&one_asset(&[50.0, 55.0, 60.0])).unwrap();
        assert_eq!(p.asset_closes(0), vec![1.0, 1.1, 1.2]);
        let single = normalize_prices(&one_asset(&[42.0])).unwrap();
        assert_eq!(single.asset_closes(0), vec![1.0]);
        let two = MarketPanel::from_closes(
            dates(2),
            vec!["A".into(), "B".into()],
            vec![vec![10.0, 12.0], vec![1000.0, 900.0]],
        )
        .unwrap();
        let n = normalize_prices(&two).unwrap();
        assert_eq!(n.closes_at(0), vec![1.0, 1.0]);
    }

    #[test]
    fn returns_examples() {
        let r = compute_returns(&one_asset(&[100.0, 110.0]), ReturnKind::Simple).unwrap();
        assert!((r.values[0][0] - 0.10).abs() < 1e-15);
        let r = compute_returns(&one_asset(&[100.0, 100.0, 100.0]), ReturnKind::Log).unwrap();
        assert_eq!(r.column(0), vec![0.0, 0.0]);
        let r = compute_returns(&one_asset(&[100.0, 110.0, 99.0]), ReturnKind::Simple).unwrap();
        assert!((r.values[0][0] - 0.10).abs() < 1e-15);
        assert!((r.values[1][0] - (99.0 / 110.0 - 1.0)).abs() < 1e-15);
        assert!((r.values[1][0] + 0.10).abs() < 1e-15);
        assert!(compute_returns(&one_asset(&[1.0]), ReturnKind::Simple).is_err());
    }

    #[test]
    fn relatives_examples() {
        assert_eq!(price_relatives(&one_asset(&[100.0, 110.0])).unwrap().values[0][0], 1.1);
        assert_eq!(price_relatives(&one_asset(&[7.0, 7.0, 7.0])).unwrap().column(0), vec![1.0, 1.0]);
        assert_eq!(price_relatives(&one_asset(&[100.0, 50.0])).unwrap().values[0][0], 0.5);
    }

    #[test]
    fn split_examples() {
        let p = one_asset(&(1..=10).map(f64::from).collect::<Vec<_>>());
        let ds = p.dates().to_vec();
        let (a, b, c) = split(&p, ds[5], ds[7]).unwrap();
        assert_eq!((a.n_dates(), b.n_dates(), c.n_dates()), (6, 2, 2));
        assert!(matches!(split(&p, ds[9], ds[9] + chrono::Duration::days(1)), Err(Error::Range(_))));
        assert!(matches!(split(&p, ds[8], ds[9]), Err(Error::EmptySplit("trading"))));
        assert!(matches!(
            split(&p, ds[0] - chrono::Duration::days(1), ds[5]),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn split_snaps_to_prior_trading_day() {
        // Weekly dates: boundaries that fall between them snap backwards.
        let ds: Vec<NaiveDate> = (0..6).map(|i| d("2010-01-04") + chrono::Duration::days(7 * i)).collect();
        let p = MarketPanel::from_closes(ds.clone(), vec!["A".into()], vec![vec![1.0; 6]]).unwrap();
        let (a, b, c) = split(
            &p,
            ds[2] + chrono::Duration::days(3),
            ds[3] + chrono::Duration::days(1),
        )
        .unwrap();
        assert_eq!((a.n_dates(), b.n_dates(), c.n_dates()), (3, 1, 2));
        assert_eq!(*a.dates().last().unwrap(), ds[2]);
    }

    #[test]
    fn extract_benchmark_moves_series() {
        let p = read_ohlcv_csv(COMPLETE.as_bytes()).unwrap().extract_benchmark("MSFT").unwrap();
        assert_eq!(p.assets(), ["AAPL"]);
        assert_eq!(p.benchmark_closes().unwrap(), vec![20.0, 21.0, 22.0]);
    }

    #[test]
    fn canonical_csv_round_trips() {
        let p = read_ohlcv_csv(COMPLETE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_panel_csv(&p, &mut buf).unwrap();
        assert_eq!(read_ohlcv_csv(buf.as_slice()).unwrap(), p);
    }
}
