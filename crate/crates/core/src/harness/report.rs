use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use crate::asymptotics::{theorem1_capacity, theorem2_sinr, LargeSystemParams};
use crate::corelin::OpCounter;
use crate::error::{Error, Result};
use crate::stats::MeanAccumulator;

use super::config::{ExperimentConfig, Scenario};
use super::sweep::{simulate_cdma, simulate_mimo, SweepData};

pub const CSV_HEADER: &str = "scheme,B,b_bar,metric,mean,stderr,mean_equiv_inner_products,mean_macs,trials";

/// One aggregated (scheme, B, metric) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scheme: String,
    pub bits: u32,
    pub b_bar: f64,
    /// `capacity_bits`, `sinr_linear` or `sinr_db`.
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub mean_equiv_inner_products: f64,
    pub mean_macs: f64,
    pub trials: usize,
}

/// Aggregates per-trial outcomes in trial order.
pub fn aggregate(data: &SweepData) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &bits in &data.bits {
        for &scheme in &data.schemes {
            let series = data.series(bits, scheme);
            let perf: MeanAccumulator = series.iter().map(|o| o.performance).collect();
            let macs: MeanAccumulator = series.iter().map(|o| o.macs as f64).collect();
            let mut counter = OpCounter::new();
            series.iter().for_each(|o| counter.add(o.macs));
            let base = ResultRow {
                scheme: scheme.name().to_string(),
                bits,
                b_bar: bits as f64 / data.dim as f64,
                metric: String::new(),
                mean: perf.mean(),
                stderr: perf.stderr(),
                mean_equiv_inner_products: counter.equivalent_inner_products(data.dim) / series.len() as f64,
                mean_macs: macs.mean(),
                trials: series.len(),
            };
            match data.scenario {
                Scenario::Mimo => rows.push(ResultRow {
                    metric: "capacity_bits".into(),
                    ..base
                }),
                Scenario::Cdma => {
                    // dB of the mean linear SINR; stderr by the delta method.
                    let db = ResultRow {
                        metric: "sinr_db".into(),
                        mean: 10.0 * perf.mean().log10(),
                        stderr: 10.0 / std::f64::consts::LN_10 * perf.stderr() / perf.mean(),
                        ..base.clone()
                    };
                    rows.push(ResultRow {
                        metric: "sinr_linear".into(),
                        ..base
                    });
                    rows.push(db);
                }
            }
        }
    }
    sort_rows(&mut rows);
    rows
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.bits.cmp(&b.bits))
            .then(a.metric.cmp(&b.metric))
            .then(a.b_bar.partial_cmp(&b.b_bar).unwrap_or(Ordering::Equal))
    });
}

pub fn run_mimo_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(aggregate(&simulate_mimo(cfg)?))
}

pub fn run_cdma_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(aggregate(&simulate_cdma(cfg)?))
}

/// One performance metric per (scheme, B) next to its search cost.
pub fn run_complexity_profile(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let rows = match cfg.scenario {
        Scenario::Mimo => run_mimo_sweep(cfg)?,
        Scenario::Cdma => run_cdma_sweep(cfg)?,
    };
    Ok(rows.into_iter().filter(|r| r.metric != "sinr_linear").collect())
}

/// Closed-form predictions over the config's bit sweep, as CSV rows with
/// zero cost and zero trials.
pub fn predict(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let dim = cfg.dim() as f64;
    let mut rows = Vec::new();
    for bits in cfg.sweep() {
        let b_bar = bits as f64 / dim;
        let row = |scheme: &str, metric: &str, mean: f64| ResultRow {
            scheme: scheme.into(),
            bits,
            b_bar,
            metric: metric.into(),
            mean,
            stderr: 0.0,
            mean_equiv_inner_products: 0.0,
            mean_macs: 0.0,
            trials: 0,
        };
        match cfg.scenario {
            Scenario::Mimo => {
                let p = LargeSystemParams::mimo(b_bar, cfg.n_r as f64 / dim, cfg.rho());
                rows.push(row("theorem1", "capacity_bits", theorem1_capacity(&p)?));
            }
            Scenario::Cdma => {
                let p = LargeSystemParams::cdma(b_bar, cfg.k as f64 / dim, cfg.alpha, cfg.sigma2);
                let g = theorem2_sinr(&p)?;
                rows.push(row("theorem2", "sinr_db", 10.0 * g.log10()));
                rows.push(row("theorem2", "sinr_linear", g));
            }
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Ten significant digits.
fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.is_finite() {
        format!("{x:.9e}")
    } else {
        format!("{x}")
    }
}

pub fn format_csv(rows: &[ResultRow]) -> String {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.bits,
            num(r.b_bar),
            r.metric,
            num(r.mean),
            num(r.stderr),
            num(r.mean_equiv_inner_products),
            num(r.mean_macs),
            r.trials
        );
    }
    out
}

/// Writes the rows as CSV; with no rows nothing is created.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Contract("no result rows to write".into()));
    }
    std::fs::write(path, format_csv(rows))?;
    Ok(())
}
