//! The synthetic transfer experiment: train every method on the toy task
//! for five seeds, evaluate zero-shot on languages of growing noise, and
//! write the sweep CSV, trend CSV and trend plot.
//!
//! cargo run --release --example transfer_sweep [OUT_DIR]

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use robustxfer::report::aggregate;
use robustxfer::synthetic::{noise_sweep, SweepConfig};
use robustxfer::training::Method;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sweep_out".into()));
    let cfg = SweepConfig::default();

    let start = Instant::now();
    let report = noise_sweep(&cfg)?;
    println!("{} cells in {:.1}s", report.rows.len(), start.elapsed().as_secs_f64());

    print!("{:>11}", "eta");
    for &eta in &cfg.etas {
        print!(" {eta:>7}");
    }
    print!("\n{:>11}", "distance");
    for &eta in &cfg.etas {
        print!(" {:>7.3}", report.mean_distance(eta).unwrap_or(f64::NAN));
    }
    println!();
    for &m in &cfg.methods {
        print!("{:>11}", m.as_str());
        for &eta in &cfg.etas {
            print!(" {:>7.2}", 100.0 * report.mean_accuracy(m, eta).unwrap_or(f64::NAN));
        }
        let chosen: Vec<String> = report
            .rows
            .iter()
            .filter(|r| r.method == m && r.eta == cfg.etas[0])
            .map(|r| r.epsilon.to_string())
            .collect();
        println!("   eps [{}]", chosen.join(" "));
    }

    let trend = aggregate(&report.rows, Method::Normal)?;
    for m in trend.methods.iter().filter(|m| m.method != Method::Normal) {
        println!("spearman(distance, delta vs normal) for {}: {:.3}", m.method, m.spearman);
    }
    fs::create_dir_all(&out)?;
    fs::write(out.join("sweep.csv"), report.to_csv())?;
    fs::write(out.join("trend.csv"), trend.to_csv())?;
    fs::write(out.join("trend.svg"), trend.to_svg())?;
    println!("wrote {}", out.display());
    Ok(())
}
