//! Price panels and the empirical pipelines built on them.
//!
//! Price file: delimiter-separated text (comma or tab, taken from the header
//! line), header `date,ASSET1,ASSET2,…`, one row per trading day with an
//! ISO-8601 date and decimal prices. An empty cell is a missing quote; any
//! asset with a missing quote is dropped from the panel.
//!
//! Sector file: header plus two columns `asset,sector`.
//!
//! Correlation file (tab-separated): header `asset` followed by the asset
//! labels, then one row per asset starting with its label.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{seq::index, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corrmat::{
    estimate_from_slices, estimate_matrix, invert, CorrelationMatrix, ReturnSeries,
};
use crate::effsize::{m_ef_even, m_ef_exact, m_ef_sector, SectorPartition};
use crate::error::{Error, Result};
use crate::format::fmt_sig;

/// Annualization factor for mean daily returns.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Rectangular panel of strictly positive prices on strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    // prices[a][t]
    prices: Vec<Vec<f64>>,
}

impl PricePanel {
    /// `prices[a][t]` is the price of asset `a` on `dates[t]`.
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, prices: Vec<Vec<f64>>) -> Result<Self> {
        if dates.is_empty() || assets.is_empty() {
            return Err(Error::InputShape(
                "panel needs at least one date and one asset".into(),
            ));
        }
        if prices.len() != assets.len() || prices.iter().any(|p| p.len() != dates.len()) {
            return Err(Error::InputShape(
                "price table does not match dates x assets".into(),
            ));
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        for (a, col) in assets.iter().zip(&prices) {
            if let Some((t, p)) = col
                .iter()
                .enumerate()
                .find(|(_, p)| !p.is_finite() || **p <= 0.0)
            {
                return Err(Error::Data(format!(
                    "price of '{a}' on {} is {p}",
                    dates[t]
                )));
            }
        }
        Ok(Self {
            dates,
            assets,
            prices,
        })
    }

    /// Compounds returns from `initial` on weekdays starting at `start`.
    pub fn from_returns(start: NaiveDate, series: &[ReturnSeries], initial: f64) -> Result<Self> {
        let t = series.first().map(|s| s.len()).unwrap_or(0);
        if series.iter().any(|s| s.len() != t) {
            return Err(Error::InputShape("return series differ in length".into()));
        }
        let dates = weekdays_from(start, t + 1);
        let prices = series
            .iter()
            .map(|s| {
                let mut w = initial;
                std::iter::once(initial)
                    .chain(s.returns().iter().map(|r| {
                        w *= 1.0 + r;
                        w
                    }))
                    .collect()
            })
            .collect();
        let assets = series.iter().map(|s| s.asset_id().to_string()).collect();
        Self::new(dates, assets, prices)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn prices(&self, asset: usize) -> &[f64] {
        &self.prices[asset]
    }

    /// `(dates, assets)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.dates.len(), self.assets.len())
    }

    /// Panel restricted to the given dates, which must all be present.
    pub fn on_dates(&self, dates: &[NaiveDate]) -> Result<Self> {
        let pos: HashMap<NaiveDate, usize> = self
            .dates
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, i))
            .collect();
        let idx: Vec<usize> = dates
            .iter()
            .map(|d| {
                pos.get(d)
                    .copied()
                    .ok_or_else(|| Error::InputShape(format!("date {d} not in panel")))
            })
            .collect::<Result<_>>()?;
        let prices = self
            .prices
            .iter()
            .map(|col| idx.iter().map(|&t| col[t]).collect())
            .collect();
        Self::new(dates.to_vec(), self.assets.clone(), prices)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "date")?;
        for a in &self.assets {
            write!(out, ",{a}")?;
        }
        writeln!(out)?;
        for (t, d) in self.dates.iter().enumerate() {
            write!(out, "{}", d.format("%Y-%m-%d"))?;
            for col in &self.prices {
                write!(out, ",{}", fmt_sig(col[t]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn weekdays_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Dates present in both panels, ascending.
pub fn common_dates(a: &PricePanel, b: &PricePanel) -> Vec<NaiveDate> {
    let in_b: HashSet<&NaiveDate> = b.dates().iter().collect();
    a.dates()
        .iter()
        .filter(|d| in_b.contains(d))
        .copied()
        .collect()
}

/// A loaded panel plus the assets removed for missing quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPanel {
    pub panel: PricePanel,
    pub dropped: Vec<String>,
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn read_text<R: Read>(mut source: R) -> Result<String> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| parse_err(1, format!("unreadable input: {e}")))?;
    Ok(text)
}

fn table_reader(text: &str) -> csv::Reader<&[u8]> {
    let header = text.lines().next().unwrap_or("");
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn records(text: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = table_reader(text);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_header(line: u64, rec: &csv::StringRecord, min_cols: usize) -> Result<Vec<String>> {
    if rec.len() < min_cols {
        return Err(parse_err(
            line,
            format!("header needs at least {min_cols} columns"),
        ));
    }
    let labels: Vec<String> = rec.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for l in &labels {
        if l.is_empty() {
            return Err(parse_err(line, "empty column label"));
        }
        if !seen.insert(l.as_str()) {
            return Err(parse_err(line, format!("duplicate column '{l}'")));
        }
    }
    Ok(labels)
}

/// Reads a price file and drops assets with any missing quote.
pub fn load_prices<R: Read>(source: R) -> Result<LoadedPanel> {
    let text = read_text(source)?;
    let rows = records(&text)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(1, "empty file"));
    };
    let labels = parse_header(*hline, header, 2)?;
    if body.is_empty() {
        return Err(parse_err(*hline, "no data rows"));
    }
    let mut dates = Vec::with_capacity(body.len());
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(body.len()); labels.len()];
    for (line, rec) in body {
        if rec.len() != labels.len() + 1 {
            return Err(parse_err(
                *line,
                format!("expected {} fields, found {}", labels.len() + 1, rec.len()),
            ));
        }
        let raw_date = rec[0].trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|_| parse_err(*line, format!("invalid date '{raw_date}'")))?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(Error::Data(format!(
                    "line {line}: date {date} does not follow {prev}"
                )));
            }
        }
        dates.push(date);
        for (a, cell) in rec.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                cols[a].push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(*line, format!("invalid price '{cell}' for '{}'", labels[a]))
            })?;
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Data(format!(
                    "line {line}: nonpositive price {v} for '{}'",
                    labels[a]
                )));
            }
            cols[a].push(Some(v));
        }
    }
    let mut assets = Vec::new();
    let mut prices = Vec::new();
    let mut dropped = Vec::new();
    for (label, col) in labels.into_iter().zip(cols) {
        match col.into_iter().collect::<Option<Vec<f64>>>() {
            Some(p) => {
                assets.push(label);
                prices.push(p);
            }
            None => dropped.push(label),
        }
    }
    if assets.is_empty() {
        return Err(Error::Data("every asset has missing quotes".into()));
    }
    Ok(LoadedPanel {
        panel: PricePanel::new(dates, assets, prices)?,
        dropped,
    })
}

/// `(w(t+1) − w(t)) / w(t)` for consecutive prices.
pub fn simple_returns(prices: &[f64]) -> Vec<f64> {
    prices.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect()
}

/// Daily simple returns of every asset; needs at least 3 dates.
pub fn compute_returns(panel: &PricePanel) -> Result<Vec<ReturnSeries>> {
    let (t, _) = panel.shape();
    if t < 3 {
        return Err(Error::InputShape(format!(
            "need at least 3 dates for a return series, got {t}"
        )));
    }
    panel
        .assets()
        .iter()
        .enumerate()
        .map(|(a, id)| ReturnSeries::new(id.clone(), simple_returns(panel.prices(a))))
        .collect()
}

/// Reads a sector file and aligns it with `assets`. Extra rows are ignored.
pub fn load_sectors<R: Read>(source: R, assets: &[String]) -> Result<SectorPartition> {
    let text = read_text(source)?;
    let rows = records(&text)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(1, "empty sector file"));
    };
    if header.len() != 2 {
        return Err(parse_err(*hline, "sector header must be 'asset,sector'"));
    }
    let mut map: HashMap<String, String> = HashMap::new();
    for (line, rec) in body {
        if rec.len() != 2 {
            return Err(parse_err(
                *line,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        let (asset, sector) = (rec[0].trim(), rec[1].trim());
        if asset.is_empty() || sector.is_empty() {
            return Err(parse_err(*line, "empty asset or sector"));
        }
        if map.insert(asset.to_string(), sector.to_string()).is_some() {
            return Err(parse_err(*line, format!("asset '{asset}' listed twice")));
        }
    }
    let missing: Vec<&str> = assets
        .iter()
        .filter(|a| !map.contains_key(a.as_str()))
        .map(|a| a.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::InputShape(format!(
            "sector file does not cover: {}",
            missing.join(", ")
        )));
    }
    let labels: Vec<&str> = assets.iter().map(|a| map[a.as_str()].as_str()).collect();
    SectorPartition::from_labels(&labels)
}

pub fn write_correlation<W: Write>(
    c: &CorrelationMatrix,
    labels: &[String],
    mut out: W,
) -> Result<()> {
    if labels.len() != c.dim() {
        return Err(Error::InputShape("one label per asset required".into()));
    }
    write!(out, "asset")?;
    for l in labels {
        write!(out, "\t{l}")?;
    }
    writeln!(out)?;
    for (i, l) in labels.iter().enumerate() {
        write!(out, "{l}")?;
        for j in 0..c.dim() {
            write!(out, "\t{}", fmt_sig(c.get(i, j)))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a correlation file; entries rounded on output are re-symmetrized.
pub fn load_correlation<R: Read>(source: R) -> Result<(Vec<String>, CorrelationMatrix)> {
    let text = read_text(source)?;
    let rows = records(&text)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(1, "empty correlation file"));
    };
    let labels = parse_header(*hline, header, 2)?;
    let m = labels.len();
    if body.len() != m {
        return Err(parse_err(
            *hline,
            format!("expected {m} rows, found {}", body.len()),
        ));
    }
    let mut entries = vec![vec![0.0; m]; m];
    for (i, (line, rec)) in body.iter().enumerate() {
        if rec.len() != m + 1 {
            return Err(parse_err(
                *line,
                format!("expected {} fields, found {}", m + 1, rec.len()),
            ));
        }
        if rec[0].trim() != labels[i] {
            return Err(parse_err(
                *line,
                format!("row label '{}' should be '{}'", rec[0].trim(), labels[i]),
            ));
        }
        for (j, cell) in rec.iter().skip(1).enumerate() {
            entries[i][j] = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(*line, format!("invalid entry '{cell}'")))?;
        }
    }
    let c = CorrelationMatrix::from_rows(&entries).map_err(|e| Error::Data(e.to_string()))?;
    Ok((labels, c))
}

/// Sliding-window length and stride, in trading days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    length: usize,
    step: usize,
}

impl WindowSpec {
    pub const MIN_LENGTH: usize = 30;

    pub fn new(length: usize, step: usize) -> Result<Self> {
        if length < Self::MIN_LENGTH {
            return Err(Error::Domain(format!(
                "window length must be at least {}, got {length}",
                Self::MIN_LENGTH
            )));
        }
        if step == 0 {
            return Err(Error::Domain("window step must be at least 1".into()));
        }
        Ok(Self { length, step })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn step(&self) -> usize {
        self.step
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length: 252,
            step: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPoint {
    /// Last trading day in the window.
    pub end_date: NaiveDate,
    /// `None` when the window's correlation matrix is near-singular.
    pub m_ef: Option<f64>,
    /// Mean over assets of mean daily return times 252.
    pub annual_return: f64,
}

/// `m_ef` and average annualized return on each sliding window.
///
/// A window spans `length` trading days, so window `k` covers returns
/// `[k·step, k·step + length − 1)`.
pub fn sliding_window_effsize(panel: &PricePanel, spec: WindowSpec) -> Result<Vec<WindowPoint>> {
    let (days, _) = panel.shape();
    if days < spec.length() {
        return Err(Error::InputShape(format!(
            "window of {} days exceeds the {days} in the panel",
            spec.length()
        )));
    }
    let returns = compute_returns(panel)?;
    if returns.len() < 2 {
        return Err(Error::InputShape("need at least 2 assets".into()));
    }
    let count = (days - spec.length()) / spec.step() + 1;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let start = k * spec.step();
            let end = start + spec.length() - 1;
            let slices: Vec<&[f64]> = returns.iter().map(|s| &s.returns()[start..end]).collect();
            let c = estimate_from_slices(&slices)?;
            let m_ef = match invert(&c) {
                Ok(inv) => Some(m_ef_exact(&inv)),
                Err(Error::NearSingular { .. }) => None,
                Err(e) => return Err(e),
            };
            let annual_return = slices
                .iter()
                .map(|s| s.iter().sum::<f64>() / s.len() as f64)
                .sum::<f64>()
                / slices.len() as f64
                * TRADING_DAYS_PER_YEAR;
            Ok(WindowPoint {
                end_date: panel.dates()[end],
                m_ef,
                annual_return,
            })
        })
        .collect()
}

/// Portfolio sizes, draws per size and seed for random-subset curves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetCurveSpec {
    pub sizes: Vec<usize>,
    pub draws: usize,
    pub seed: u64,
}

impl SubsetCurveSpec {
    pub const DEFAULT_DRAWS: usize = 5000;

    pub fn new(sizes: Vec<usize>, draws: usize, seed: u64) -> Self {
        Self { sizes, draws, seed }
    }

    pub fn validate(&self, universe: usize) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::Domain("no portfolio sizes requested".into()));
        }
        if let Some(m) = self.sizes.iter().find(|&&m| m < 2 || m > universe) {
            return Err(Error::Domain(format!(
                "portfolio size {m} outside [2, {universe}]"
            )));
        }
        if self.draws == 0 {
            return Err(Error::Domain("draws must be at least 1".into()));
        }
        Ok(())
    }
}

/// Averages over random subsets of one size. Values are NaN when every draw was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetRow {
    pub m: usize,
    pub exact: f64,
    pub sector: Option<f64>,
    pub even: f64,
    pub used: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetCurve {
    pub rows: Vec<SubsetRow>,
    pub warnings: Vec<String>,
}

struct DrawValues {
    exact: f64,
    even: f64,
    sector: Option<f64>,
}

fn evaluate_subset(
    c: &CorrelationMatrix,
    partition: Option<&SectorPartition>,
    idx: &[usize],
) -> Result<Option<DrawValues>> {
    let sub = c.submatrix(idx);
    let outcome = (|| {
        let exact = m_ef_exact(&invert(&sub)?);
        let even = m_ef_even(&sub)?;
        let sector = partition
            .map(|p| m_ef_sector(&sub, &p.restrict(idx)))
            .transpose()?;
        Ok(DrawValues {
            exact,
            even,
            sector,
        })
    })();
    match outcome {
        Ok(v) => Ok(Some(v)),
        Err(Error::NearSingular { .. } | Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Average `m_ef` estimates over uniformly random asset subsets.
///
/// Subsets are drawn sequentially from one ChaCha8 stream seeded with
/// `spec.seed`, sizes in the order given; evaluation may run in parallel
/// but results are reduced in draw order.
pub fn subset_curve(
    panel: &PricePanel,
    spec: &SubsetCurveSpec,
    partition: Option<&SectorPartition>,
) -> Result<SubsetCurve> {
    let returns = compute_returns(panel)?;
    let c = estimate_matrix(&returns)?;
    subset_curve_from_matrix(&c, spec, partition)
}

/// [`subset_curve`] on an already estimated universe correlation matrix.
pub fn subset_curve_from_matrix(
    c: &CorrelationMatrix,
    spec: &SubsetCurveSpec,
    partition: Option<&SectorPartition>,
) -> Result<SubsetCurve> {
    let n = c.dim();
    spec.validate(n)?;
    if let Some(p) = partition {
        if p.len() != n {
            return Err(Error::InputShape(format!(
                "partition covers {} assets, universe has {n}",
                p.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.sizes.len());
    let mut warnings = Vec::new();
    for &m in &spec.sizes {
        let subsets: Vec<Vec<usize>> = if m == n {
            vec![(0..n).collect()]
        } else {
            (0..spec.draws)
                .map(|_| {
                    let mut idx = index::sample(&mut rng, n, m).into_vec();
                    idx.sort_unstable();
                    idx
                })
                .collect()
        };
        let values: Vec<Option<DrawValues>> = subsets
            .par_iter()
            .map(|idx| evaluate_subset(c, partition, idx))
            .collect::<Result<_>>()?;
        let weight = if m == n { spec.draws } else { 1 };
        let (mut exact, mut even, mut sector, mut used, mut skipped) =
            (0.0, 0.0, 0.0, 0usize, 0usize);
        for v in &values {
            match v {
                Some(v) => {
                    exact += v.exact;
                    even += v.even;
                    sector += v.sector.unwrap_or(0.0);
                    used += weight;
                }
                None => skipped += weight,
            }
        }
        let distinct = values.iter().filter(|v| v.is_some()).count() as f64;
        let avg = |s: f64| {
            if distinct > 0.0 {
                s / distinct
            } else {
                f64::NAN
            }
        };
        if skipped as f64 > 0.01 * spec.draws as f64 {
            warnings.push(format!(
                "M = {m}: skipped {skipped} of {} draws with singular matrices",
                spec.draws
            ));
        }
        rows.push(SubsetRow {
            m,
            exact: avg(exact),
            sector: partition.map(|_| avg(sector)),
            even: avg(even),
            used,
            skipped,
        });
    }
    Ok(SubsetCurve { rows, warnings })
}
