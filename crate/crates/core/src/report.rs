//! Aggregation of sweep CSVs into a Δaccuracy-vs-distance trend, written as
//! CSV and as a static SVG line plot.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::synthetic::{SweepRow, SWEEP_CSV_HEADER};
use crate::training::Method;
use crate::transfer::spearman;

pub const TREND_CSV_HEADER: &str = "method,eta,distance,acc_baseline,acc_method,delta";

pub fn parse_sweep_csv(text: &str, path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let path = path.as_ref();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SWEEP_CSV_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header {SWEEP_CSV_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::parse(path, i + 1, format!("invalid {what}"));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(Error::parse(path, i + 1, "expected 6 fields"));
        }
        rows.push(SweepRow {
            seed: f[0].parse().map_err(|_| bad("seed"))?,
            method: f[1].parse().map_err(|_| bad("method"))?,
            epsilon: f[2].parse().map_err(|_| bad("epsilon"))?,
            eta: f[3].parse().map_err(|_| bad("eta"))?,
            distance: f[4].parse().map_err(|_| bad("distance"))?,
            accuracy: f[5].parse().map_err(|_| bad("accuracy"))?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendPoint {
    pub eta: f64,
    /// Mean distance of the η level over all rows.
    pub distance: f64,
    pub acc_baseline: f64,
    pub acc_method: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodTrend {
    pub method: Method,
    /// Sorted by distance ascending.
    pub points: Vec<TrendPoint>,
    pub spearman: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trend {
    pub baseline: Method,
    pub methods: Vec<MethodTrend>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Means over seeds per (method, η), then Δ against `baseline` per η and
/// the Spearman ρ of (distance, Δ) per method.
pub fn aggregate(rows: &[SweepRow], baseline: Method) -> Result<Trend> {
    if rows.is_empty() {
        return Err(Error::Mismatch("no sweep rows to aggregate".into()));
    }
    // η values are keyed by their bit pattern; every row of one sweep
    // carries the literal grid value
    let mut acc: BTreeMap<(Method, u64), Vec<f64>> = BTreeMap::new();
    let mut dist: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in rows {
        acc.entry((r.method, r.eta.to_bits())).or_default().push(r.accuracy);
        dist.entry(r.eta.to_bits()).or_default().push(r.distance);
    }
    let base: BTreeMap<u64, f64> = acc
        .iter()
        .filter(|((m, _), _)| *m == baseline)
        .map(|((_, eta), v)| (*eta, mean(v)))
        .collect();
    if base.is_empty() {
        return Err(Error::Mismatch(format!("no rows for baseline method {baseline}")));
    }

    let mut methods: BTreeMap<Method, Vec<TrendPoint>> = BTreeMap::new();
    for ((method, eta), v) in &acc {
        let Some(&acc_baseline) = base.get(eta) else {
            return Err(Error::Mismatch(format!(
                "η = {} has rows for {method} but not for {baseline}",
                f64::from_bits(*eta)
            )));
        };
        let acc_method = mean(v);
        methods.entry(*method).or_default().push(TrendPoint {
            eta: f64::from_bits(*eta),
            distance: mean(&dist[eta]),
            acc_baseline,
            acc_method,
            delta: acc_method - acc_baseline,
        });
    }
    let methods = methods
        .into_iter()
        .map(|(method, mut points)| {
            points.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.eta.total_cmp(&b.eta)));
            let xs: Vec<f64> = points.iter().map(|p| p.distance).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.delta).collect();
            let rho = spearman(&xs, &ys);
            MethodTrend {
                method,
                points,
                spearman: rho.unwrap_or(0.0),
                degenerate: rho.is_none(),
            }
        })
        .collect();
    Ok(Trend { baseline, methods })
}

impl Trend {
    pub fn method(&self, method: Method) -> Option<&MethodTrend> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{TREND_CSV_HEADER}\n");
        for m in &self.methods {
            for p in &m.points {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{:.6},{:.6},{:.6}",
                    m.method, p.eta, p.distance, p.acc_baseline, p.acc_method, p.delta
                );
            }
        }
        out
    }

    /// Line plot of Δaccuracy (points) against distance, one polyline per
    /// method. Output depends only on the trend values.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const LEFT: f64 = 70.0;
        const RIGHT: f64 = 170.0;
        const TOP: f64 = 30.0;
        const BOTTOM: f64 = 50.0;
        const COLOURS: [&str; 6] = ["#4e79a7", "#e15759", "#59a14f", "#f28e2b", "#b07aa1", "#76b7b2"];

        let pts = self.methods.iter().flat_map(|m| &m.points);
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
        for p in pts {
            x0 = x0.min(p.distance);
            x1 = x1.max(p.distance);
            y0 = y0.min(100.0 * p.delta);
            y1 = y1.max(100.0 * p.delta);
        }
        if !(x1 > x0) {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-9 {
            y0 -= 1.0;
            y1 += 1.0;
        }
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
        let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let (ax0, ax1, ay0, ay1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(
            s,
            r#"<path d="M{ax0} {ay1} V{ay0} H{ax1}" fill="none" stroke="black"/>"#
        );
        let zero = sy(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{ax0}" y1="{zero:.2}" x2="{ax1}" y2="{zero:.2}" stroke="#999" stroke-dasharray="4 3"/>"##
        );
        for (v, anchor) in [(x0, "start"), (x1, "end")] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="{anchor}">{v:.3}</text>"#, sx(v), ay0 + 16.0);
        }
        for v in [y0, y1] {
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, ax0 - 6.0, sy(v) + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">language distance</text>"#,
            (ax0 + ax1) / 2.0,
            H - 12.0
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Δaccuracy vs {} (points)</text>"#,
            (ay0 + ay1) / 2.0,
            (ay0 + ay1) / 2.0,
            self.baseline
        );
        for (k, m) in self.methods.iter().enumerate() {
            let colour = COLOURS[k % COLOURS.len()];
            let points: Vec<String> = m
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.distance), sy(100.0 * p.delta)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline data-method="{}" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                m.method,
                points.join(" ")
            );
            let ly = TOP + 18.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#,
                W - RIGHT + 12.0,
                W - RIGHT + 32.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{} ρ={:.2}</text>"#,
                W - RIGHT + 38.0,
                ly + 4.0,
                m.method,
                m.spearman
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, method: Method, eta: f64, distance: f64, accuracy: f64) -> SweepRow {
        SweepRow {
            seed,
            method,
            epsilon: 0.0,
            eta,
            distance,
            accuracy,
        }
    }

    #[test]
    fn means_and_deltas() {
        let rows = vec![
            row(0, Method::Normal, 0.0, 0.0, 0.9),
            row(1, Method::Normal, 0.0, 0.0, 0.8),
            row(0, Method::Normal, 1.0, 2.0, 0.5),
            row(1, Method::Normal, 1.0, 2.2, 0.7),
            row(0, Method::Adv, 0.0, 0.0, 0.9),
            row(1, Method::Adv, 0.0, 0.0, 0.9),
            row(0, Method::Adv, 1.0, 2.0, 0.8),
            row(1, Method::Adv, 1.0, 2.2, 0.8),
        ];
        let t = aggregate(&rows, Method::Normal).unwrap();
        let adv = t.method(Method::Adv).unwrap();
        assert!((adv.points[1].distance - 2.1).abs() < 1e-12);
        assert!((adv.points[0].delta - 0.05).abs() < 1e-12);
        assert!((adv.points[1].delta - 0.2).abs() < 1e-12);
        assert_eq!(adv.spearman, 1.0);
        let normal = t.method(Method::Normal).unwrap();
        assert!(normal.degenerate && normal.points.iter().all(|p| p.delta == 0.0));

        let csv = t.to_csv();
        assert_eq!(csv.lines().next(), Some(TREND_CSV_HEADER));
        assert!(csv.contains("\nadv,1,2.100000,0.600000,0.800000,0.200000\n"));
    }

    #[test]
    fn sweep_csv_round_trip() {
        let rows = vec![row(3, Method::RsAugment, 0.25, 1.5, 0.625)];
        let report = crate::synthetic::SweepReport {
            rows: rows.clone(),
            ..Default::default()
        };
        assert_eq!(parse_sweep_csv(&report.to_csv(), "s.csv").unwrap(), rows);
        assert!(parse_sweep_csv("a,b\n", "s.csv").is_err());
        assert!(parse_sweep_csv(&format!("{SWEEP_CSV_HEADER}\n1,adv,0,0,0\n"), "s.csv").is_err());
    }

    #[test]
    fn missing_baseline_is_a_mismatch() {
        let rows = vec![row(0, Method::Adv, 0.0, 0.0, 0.9)];
        assert!(matches!(aggregate(&rows, Method::Normal), Err(Error::Mismatch(_))));
        assert!(aggregate(&[], Method::Normal).is_err());
    }
}
