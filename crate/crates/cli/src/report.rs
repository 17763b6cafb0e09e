//! Metric tables and the error-versus-size plot.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::experiment::RunRecord;

pub const METRICS_HEADER: &str = "regime,n,seed,kappa,max_err,mse,fallback_frac,ptilde,cond,usvt_err,wall_ms";
pub const AGGREGATE_HEADER: &str = "regime,n,runs,max_err_median,max_err_q1,max_err_q3,mse_median,mse_q1,mse_q3,fallback_median,ptilde_median,cond_median,sampled";

/// Shortest round-trip decimal, `NA` when not finite.
pub fn fmt_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "NA".into()
    }
}

/// Linear-interpolation quantile of the finite values; `NaN` when none.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

fn sorted(records: &[RunRecord]) -> Vec<&RunRecord> {
    let mut v: Vec<&RunRecord> = records.iter().collect();
    v.sort_by_key(|r| (r.regime, r.n, r.seed));
    v
}

/// One row per run. Wall time is written only when `with_timings` is set,
/// so that tables of identical runs are byte-identical.
pub fn metrics_csv(records: &[RunRecord], with_timings: bool) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in sorted(records) {
        let wall = if with_timings { fmt_value(r.wall_ms) } else { "NA".into() };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.regime.name(),
            r.n,
            r.seed,
            fmt_value(r.kappa),
            fmt_value(r.max_abs_error),
            fmt_value(r.mse),
            fmt_value(r.fallback_fraction),
            fmt_value(r.ptilde),
            fmt_value(r.condition_number),
            r.usvt_error.map_or("NA".into(), fmt_value),
            wall
        )
        .unwrap();
    }
    out
}

/// Per-size summary across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub regime: crate::config::Regime,
    pub n: usize,
    pub runs: usize,
    pub max_err: [f64; 3],
    pub mse: [f64; 3],
    pub fallback_median: f64,
    pub ptilde_median: f64,
    pub cond_median: f64,
    pub sampled: bool,
}

pub fn aggregate(records: &[RunRecord]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(crate::config::Regime, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.regime, r.n)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((regime, n), rs)| {
            let col = |f: fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let q3 = |v: &[f64]| [median(v), quantile(v, 0.25), quantile(v, 0.75)];
            Aggregate {
                regime,
                n,
                runs: rs.len(),
                max_err: q3(&col(|r| r.max_abs_error)),
                mse: q3(&col(|r| r.mse)),
                fallback_median: median(&col(|r| r.fallback_fraction)),
                ptilde_median: median(&col(|r| r.ptilde)),
                cond_median: median(&col(|r| r.condition_number)),
                sampled: rs.iter().any(|r| r.sampled),
            }
        })
        .collect()
}

pub fn aggregate_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for a in aggregate(records) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.regime.name(),
            a.n,
            a.runs,
            fmt_value(a.max_err[0]),
            fmt_value(a.max_err[1]),
            fmt_value(a.max_err[2]),
            fmt_value(a.mse[0]),
            fmt_value(a.mse[1]),
            fmt_value(a.mse[2]),
            fmt_value(a.fallback_median),
            fmt_value(a.ptilde_median),
            fmt_value(a.cond_median),
            u8::from(a.sampled)
        )
        .unwrap();
    }
    out
}

pub fn timings_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("regime,n,seed,stage,ms\n");
    for r in sorted(records) {
        for (stage, ms) in &r.timings {
            writeln!(out, "{},{},{},{},{:.3}", r.regime.name(), r.n, r.seed, stage, ms).unwrap();
        }
        writeln!(out, "{},{},{},total,{:.3}", r.regime.name(), r.n, r.seed, r.wall_ms).unwrap();
    }
    out
}

/// Log-log plot of the median max error and MSE against `n`.
pub fn error_vs_n_svg(records: &[RunRecord]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    let aggs = aggregate(records);
    let series: [(&str, &str, Vec<(f64, f64)>); 2] = [
        ("median max error", "#1f77b4", aggs.iter().map(|a| (a.n as f64, a.max_err[0])).collect()),
        ("median MSE", "#d62728", aggs.iter().map(|a| (a.n as f64, a.mse[0])).collect()),
    ];
    let finite = |v: &(f64, f64)| v.1.is_finite() && v.1 > 0.0;
    let xs: Vec<f64> = aggs.iter().map(|a| (a.n as f64).log10()).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.2.iter().filter(|p| finite(p)).map(|p| p.1.log10())).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |x: f64| M + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{M} {M} V{} H{}" fill="none" stroke="black"/>"#,
        H - M,
        W - M
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">n (log scale)</text>"#, W / 2.0, H - 15.0).unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 15 {})">error (log scale)</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    for a in &aggs {
        let x = px(a.n as f64);
        writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle" font-size="11">{}</text>"#, H - M + 16.0, a.n).unwrap();
    }
    for (k, (label, colour, pts)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = pts.iter().copied().filter(finite).map(|(x, y)| (px(x), py(y))).collect();
        if pts.len() > 1 {
            let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, d.join(" ")).unwrap();
        }
        for (x, y) in &pts {
            writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="{colour}"/>"#).unwrap();
        }
        let ly = M + 18.0 * k as f64;
        writeln!(s, r#"<rect x="{}" y="{}" width="12" height="12" fill="{colour}"/>"#, W - M - 150.0, ly - 10.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{ly}" font-size="12">{label}</text>"#, W - M - 132.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `metrics.csv`, `aggregate.csv`, `timings.csv` and
/// `error_vs_n.svg` into `dir`.
pub fn emit_report(records: &[RunRecord], dir: &Path, with_timings: bool) -> io::Result<()> {
    if records.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no records to report"));
    }
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(records, with_timings))?;
    std::fs::write(dir.join("aggregate.csv"), aggregate_csv(records))?;
    std::fs::write(dir.join("timings.csv"), timings_csv(records))?;
    std::fs::write(dir.join("error_vs_n.svg"), error_vs_n_svg(records))?;
    Ok(())
}
