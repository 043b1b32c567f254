//! Serialization of harness results: JSON detail, CSV summaries, SVG histograms.

use sha2::{Digest, Sha256};

use super::simulate::NullSizeResult;
use super::sweep::{SweepResult, SweepTestsResult};
use crate::error::{Error, Result};

/// First 16 hex digits of the SHA-256 of `canonical`.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("serialization failed: {e}")))
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_summary_csv(r: &SweepResult) -> Result<String> {
    let kind = serde_json::to_value(r.config.kind).ok().and_then(|v| v.as_str().map(String::from));
    let rows = r
        .summary
        .iter()
        .map(|s| {
            vec![
                kind.clone().unwrap_or_default(),
                s.estimator.name().to_string(),
                format!("{}", s.min_beta),
                format!("{}", s.max_beta),
                format!("{}", s.range),
                format!("{}", s.median_se),
                format!("{}", s.range_in_se_units),
                s.draws_ok.to_string(),
                s.draws_failed.to_string(),
            ]
        })
        .collect();
    csv_string(
        &[
            "kind",
            "estimator",
            "min_beta",
            "max_beta",
            "range",
            "median_se",
            "range_in_se_units",
            "draws_ok",
            "draws_failed",
        ],
        rows,
    )
}

pub fn sweep_tests_csv(r: &SweepTestsResult) -> Result<String> {
    let rows = r
        .ranges
        .iter()
        .map(|t| {
            vec![
                t.test.clone(),
                format!("{}", t.min_p),
                format!("{}", t.max_p),
                t.draws_ok.to_string(),
            ]
        })
        .collect();
    csv_string(&["test", "min_p", "max_p", "draws_ok"], rows)
}

pub fn null_size_csv(r: &NullSizeResult) -> Result<String> {
    let rows = r
        .rates
        .iter()
        .map(|t| {
            vec![
                t.test.clone(),
                r.n.to_string(),
                r.p.to_string(),
                t.reps_used.to_string(),
                format!("{}", r.level),
                format!("{}", t.rate),
                format!("{}", t.mc_sd),
            ]
        })
        .collect();
    csv_string(&["test", "n", "p", "reps", "level", "rejection_rate", "mc_sd"], rows)
}

/// Static SVG histogram of `values` with `bins` equal-width bins.
pub fn svg_histogram(values: &[f64], bins: usize, title: &str) -> String {
    let (w, h, margin) = (480.0, 300.0, 40.0);
    let bins = bins.max(1);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    if !finite.is_empty() {
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for v in &finite {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let max = *counts.iter().max().unwrap_or(&1) as f64;
        let plot_w = w - 2.0 * margin;
        let plot_h = h - 2.0 * margin;
        let bar_w = plot_w / bins as f64;
        for (b, &c) in counts.iter().enumerate() {
            let bh = plot_h * c as f64 / max;
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\" stroke=\"white\"/>\n",
                margin + b as f64 * bar_w,
                h - margin - bh,
                bar_w,
                bh
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{margin}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{lo:.4}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{hi:.4}</text>\n",
            h - margin + 16.0,
            w - margin,
            h - margin + 16.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
