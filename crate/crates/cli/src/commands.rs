use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use effport_core::binmodel::{build_joint, sample, BinaryModelParams, MAX_ENUMERATION};
use effport_core::corrmat::{estimate_matrix, CorrelationMatrix, ReturnSeries};
use effport_core::effsize::{
    m_ef_uniform, variance_ratio_parts, EffSizeReport, SectorPartition, VarianceRatio,
};
use effport_core::format::{fmt_opt, fmt_sig};
use effport_core::kelly::{
    maximize_growth_symmetric, misestimation_experiment, MisestimationResult, UncorrelatedTotals,
};
use effport_core::marketdata::{
    common_dates, compute_returns, load_correlation, load_prices, load_sectors,
    sliding_window_effsize, subset_curve, write_correlation, PricePanel, SubsetCurve,
    SubsetCurveSpec, WindowPoint, WindowSpec,
};
use effport_core::Error;

use crate::error::{CliError, CliResult};
use crate::{
    EffsizeArgs, EstimateCorrArgs, Fig1Args, Fig2Args, SimulateArgs, SlidingArgs, SubsetCurveArgs,
    VarianceRatioArgs,
};

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        })
}

fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

// Errors from reading a file are prefixed with its path.
fn in_file<T>(path: &Path, r: effport_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
    .map_err(CliError::from)
}

fn read_panel(path: &Path, log: &mut dyn Write) -> CliResult<PricePanel> {
    let loaded = in_file(path, load_prices(open(path)?))?;
    if !loaded.dropped.is_empty() {
        writeln!(
            log,
            "note: dropped {} asset(s) with missing quotes: {}",
            loaded.dropped.len(),
            loaded.dropped.join(", ")
        )?;
    }
    Ok(loaded.panel)
}

fn read_sectors(path: &Path, assets: &[String]) -> CliResult<SectorPartition> {
    in_file(path, load_sectors(open(path)?, assets))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrSummary {
    pub assets: usize,
    pub periods: usize,
    pub mean_correlation: Option<f64>,
    pub eigenvalue_min: f64,
    pub eigenvalue_max: f64,
}

/// Writes the correlation matrix; the summary goes to `log`.
pub fn cmd_estimate_corr(
    args: &EstimateCorrArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> CliResult<CorrSummary> {
    let panel = read_panel(&args.prices, log)?;
    let returns = compute_returns(&panel)?;
    let c = estimate_matrix(&returns)?;
    write_correlation(&c, panel.assets(), &mut *out)?;
    let (eigenvalue_min, eigenvalue_max) = c.eigenvalue_range();
    let summary = CorrSummary {
        assets: c.dim(),
        periods: returns[0].len(),
        mean_correlation: c.mean_off_diagonal(),
        eigenvalue_min,
        eigenvalue_max,
    };
    writeln!(log, "assets\t{}", summary.assets)?;
    writeln!(log, "periods\t{}", summary.periods)?;
    writeln!(
        log,
        "mean_correlation\t{}",
        fmt_opt(summary.mean_correlation)
    )?;
    writeln!(log, "eigenvalue_min\t{}", fmt_sig(eigenvalue_min))?;
    writeln!(log, "eigenvalue_max\t{}", fmt_sig(eigenvalue_max))?;
    Ok(summary)
}

/// Columns: `M m_exact m_uniform m_even m_sector`.
pub fn cmd_effsize(
    args: &EffsizeArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> CliResult<EffSizeReport> {
    let (labels, c): (Vec<String>, CorrelationMatrix) = match (&args.corr, &args.prices) {
        (Some(path), None) => in_file(path, load_correlation(open(path)?))?,
        (None, Some(path)) => {
            let panel = read_panel(path, log)?;
            let c = estimate_matrix(&compute_returns(&panel)?)?;
            (panel.assets().to_vec(), c)
        }
        _ => return Err(usage("give exactly one of --corr and --prices")),
    };
    let sectors = args
        .sectors
        .as_deref()
        .map(|p| read_sectors(p, &labels))
        .transpose()?;
    let report = EffSizeReport::compute(&c, sectors.as_ref())?;
    writeln!(out, "M\tm_exact\tm_uniform\tm_even\tm_sector")?;
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}",
        report.m,
        fmt_sig(report.m_exact),
        fmt_opt(report.m_uniform),
        fmt_sig(report.m_even),
        fmt_opt(report.m_sector)
    )?;
    Ok(report)
}

/// Columns: `M exact sector even`.
pub fn cmd_subset_curve(
    args: &SubsetCurveArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> CliResult<SubsetCurve> {
    let panel = read_panel(&args.prices, log)?;
    let n = panel.assets().len();
    let sizes = args
        .sizes
        .clone()
        .map(|s| s.0)
        .unwrap_or_else(|| (2..=n).collect());
    let spec = SubsetCurveSpec::new(sizes, args.draws, args.seed);
    spec.validate(n).map_err(|e| usage(e.to_string()))?;
    let sectors = args
        .sectors
        .as_deref()
        .map(|p| read_sectors(p, panel.assets()))
        .transpose()?;
    let curve = subset_curve(&panel, &spec, sectors.as_ref())?;
    for w in &curve.warnings {
        writeln!(log, "warning: {w}")?;
    }
    writeln!(out, "M\texact\tsector\teven")?;
    for r in &curve.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.m,
            fmt_sig(r.exact),
            fmt_opt(r.sector),
            fmt_sig(r.even)
        )?;
    }
    Ok(curve)
}

/// Columns: `date m_ef R_A`; `NA` marks near-singular windows.
pub fn cmd_sliding(
    args: &SlidingArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> CliResult<Vec<WindowPoint>> {
    let spec = WindowSpec::new(args.window, args.step).map_err(|e| usage(e.to_string()))?;
    let panel = read_panel(&args.prices, log)?;
    let points = sliding_window_effsize(&panel, spec)?;
    let gaps = points.iter().filter(|p| p.m_ef.is_none()).count();
    if gaps > 0 {
        writeln!(log, "note: {gaps} window(s) near-singular, reported as NA")?;
    }
    writeln!(out, "date\tm_ef\tR_A")?;
    for p in &points {
        writeln!(
            out,
            "{}\t{}\t{}",
            p.end_date.format("%Y-%m-%d"),
            fmt_opt(p.m_ef),
            fmt_sig(p.annual_return)
        )?;
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig1Row {
    pub p: f64,
    pub c: f64,
    pub m_ef_approx: f64,
    /// `None` when the exact total fraction falls outside the uncorrelated curve.
    pub m_ef_numeric: Option<f64>,
    pub total_fraction: f64,
}

fn check_binary(m: usize, p: f64, c: f64) -> CliResult<()> {
    if m > MAX_ENUMERATION {
        return Err(usage(format!(
            "--m must be at most {MAX_ENUMERATION}, got {m}"
        )));
    }
    BinaryModelParams::new(m, p, c).map_err(|e| usage(e.to_string()))?;
    Ok(())
}

/// Columns: `p C m_ef_approx m_ef_numeric total_fraction`.
pub fn cmd_fig1(
    args: &Fig1Args,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> CliResult<Vec<Fig1Row>> {
    for &p in &args.p.0 {
        if p <= 0.5 {
            return Err(usage(format!("--p values must exceed 0.5, got {p}")));
        }
        for &c in &args.c_grid.0 {
            check_binary(args.m, p, c)?;
        }
    }
    let mut rows = Vec::new();
    for &p in &args.p.0 {
        let totals = UncorrelatedTotals::compute(args.m, p)?;
        for &c in &args.c_grid.0 {
            let total_fraction =
                maximize_growth_symmetric(&build_joint(BinaryModelParams::new(args.m, p, c)?)?)
                    .total_fraction;
            let m_ef_numeric = match totals.effective_size(total_fraction) {
                Ok(m) => Some(m),
                Err(e @ Error::Extrapolation { .. }) => {
                    writeln!(log, "note: p = {p}, C = {c}: {e}")?;
                    None
                }
                Err(e) => return Err(e.into()),
            };
            rows.push(Fig1Row {
                p,
                c,
                m_ef_approx: m_ef_uniform(args.m, c)?,
                m_ef_numeric,
                total_fraction,
            });
        }
    }
    writeln!(out, "p\tC\tm_ef_approx\tm_ef_numeric\ttotal_fraction")?;
    for r in &rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            fmt_sig(r.p),
            fmt_sig(r.c),
            fmt_sig(r.m_ef_approx),
            fmt_opt(r.m_ef_numeric),
            fmt_sig(r.total_fraction)
        )?;
    }
    Ok(rows)
}

/// Columns: `C_assumed G_realized`.
pub fn cmd_fig2(
    args: &Fig2Args,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> CliResult<Vec<MisestimationResult>> {
    check_binary(args.m, args.p, args.c_true)?;
    for &c in &args.c_grid.0 {
        check_binary(args.m, args.p, c)?;
    }
    let rows = misestimation_experiment(args.m, args.p, args.c_true, &args.c_grid.0)?;
    let g_star = maximize_growth_symmetric(&build_joint(BinaryModelParams::new(
        args.m,
        args.p,
        args.c_true,
    )?)?)
    .g_star;
    writeln!(log, "G_optimal\t{}", fmt_sig(g_star))?;
    writeln!(out, "C_assumed\tG_realized")?;
    for r in &rows {
        writeln!(out, "{}\t{}", fmt_sig(r.c_assumed), fmt_sig(r.g_realized))?;
    }
    Ok(rows)
}

/// Columns: `mean_constituent_variance index_variance m_ef`.
pub fn cmd_variance_ratio(
    args: &VarianceRatioArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> CliResult<VarianceRatio> {
    let index = read_panel(&args.index, log)?;
    let constituents = read_panel(&args.constituents, log)?;
    if index.assets().len() != 1 {
        return Err(Error::InputShape(format!(
            "{}: index file must have exactly one price column, found {}",
            args.index.display(),
            index.assets().len()
        ))
        .into());
    }
    let dates = common_dates(&index, &constituents);
    if dates.len() < index.dates().len() || dates.len() < constituents.dates().len() {
        writeln!(
            log,
            "note: using the {} dates common to both files",
            dates.len()
        )?;
    }
    if dates.is_empty() {
        return Err(Error::InputShape("index and constituents share no dates".into()).into());
    }
    let index_returns = compute_returns(&index.on_dates(&dates)?)?;
    let constituent_returns = compute_returns(&constituents.on_dates(&dates)?)?;
    let parts = variance_ratio_parts(&index_returns[0], &constituent_returns)?;
    writeln!(out, "mean_constituent_variance\tindex_variance\tm_ef")?;
    writeln!(
        out,
        "{}\t{}\t{}",
        fmt_sig(parts.mean_constituent_variance),
        fmt_sig(parts.index_variance),
        fmt_sig(parts.ratio())
    )?;
    Ok(parts)
}

fn parse_blocks(s: &str) -> CliResult<Vec<(usize, f64)>> {
    s.split(',')
        .map(|part| {
            let (m, c) = part
                .split_once(':')
                .ok_or_else(|| usage(format!("block '{part}' is not size:C")))?;
            let m: usize = m
                .trim()
                .parse()
                .map_err(|_| usage(format!("bad block size '{m}'")))?;
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| usage(format!("bad block correlation '{c}'")))?;
            Ok((m, c))
        })
        .collect()
}

// Independent streams per block; the single-block case keeps the seed as is.
fn block_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Writes a synthetic price panel.
///
/// Each block is an independent hidden-asset model; a `±1` outcome `r`
/// becomes the daily return `scale·(r − (2p − 1))`, so returns have zero
/// mean and keep the model's correlations.
pub fn cmd_simulate(
    args: &SimulateArgs,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> CliResult<()> {
    let blocks = match &args.blocks {
        Some(s) => parse_blocks(s)?,
        None => vec![(args.m, args.c)],
    };
    for &(m, c) in &blocks {
        BinaryModelParams::new(m, args.p, c).map_err(|e| usage(e.to_string()))?;
    }
    if args.samples < 2 {
        return Err(usage("--samples must be at least 2"));
    }
    let drift = 2.0 * args.p - 1.0;
    if !args.scale.is_finite() || args.scale <= 0.0 || args.scale * (1.0 + drift.abs()) >= 1.0 {
        return Err(usage(format!(
            "--scale {} would allow nonpositive prices",
            args.scale
        )));
    }
    let start = chrono::NaiveDate::parse_from_str(&args.start, "%Y-%m-%d")
        .map_err(|_| usage(format!("--start '{}' is not an ISO date", args.start)))?;

    let total: usize = blocks.iter().map(|b| b.0).sum();
    let width = total.to_string().len().max(2);
    let mut series = Vec::with_capacity(total);
    let mut sector_rows = Vec::with_capacity(total);
    for (k, &(m, c)) in blocks.iter().enumerate() {
        let draws = sample(
            BinaryModelParams::new(m, args.p, c)?,
            args.samples,
            block_seed(args.seed, k),
        )?;
        for i in 0..m {
            let id = format!("A{:0width$}", series.len() + 1);
            let returns = draws
                .column(i)
                .into_iter()
                .map(|r| args.scale * (r - drift))
                .collect();
            sector_rows.push((id.clone(), format!("S{}", k + 1)));
            series.push(ReturnSeries::new(id, returns)?);
        }
    }
    PricePanel::from_returns(start, &series, 100.0)?.write_csv(&mut *out)?;
    writeln!(
        log,
        "simulated {total} assets over {} returns",
        args.samples
    )?;

    if let Some(path) = &args.index {
        let returns: Vec<f64> = (0..args.samples)
            .map(|t| series.iter().map(|s| s.returns()[t]).sum::<f64>() / total as f64)
            .collect();
        let index =
            PricePanel::from_returns(start, &[ReturnSeries::new("INDEX", returns)?], 100.0)?;
        index.write_csv(create(path)?)?;
    }
    if let Some(path) = &args.sectors {
        let mut f = create(path)?;
        writeln!(f, "asset,sector")?;
        for (a, s) in &sector_rows {
            writeln!(f, "{a},{s}")?;
        }
    }
    Ok(())
}
