#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = robustxfer::cli::run(std::iter::once("robustxfer").chain(args.iter().copied()), &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two well separated classes in the plane plus two neutral tokens.
pub struct Toy {
    pub dir: tempfile::TempDir,
    pub emb: PathBuf,
    pub data: PathBuf,
}

impl Toy {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn toy() -> Toy {
    let dir = tempfile::tempdir().unwrap();
    let mut emb = String::from("10 2\n");
    for i in 0..4 {
        let y = 0.1 * i as f64;
        emb.push_str(&format!("p{i} 1.0 {y}\nn{i} -1.0 {}\n", -y));
    }
    emb.push_str("z0 0.05 0.3\nz1 -0.05 -0.3\n");
    let mut data = String::new();
    for i in 0..12 {
        data.push_str(&format!("0\tp{} z{} p{}\n", i % 4, i % 2, (i + 1) % 4));
        data.push_str(&format!("1\tn{} z{} n{}\n", i % 4, (i + 1) % 2, (i + 2) % 4));
    }
    let emb_path = dir.path().join("src.emb");
    let data_path = dir.path().join("train.tsv");
    fs::write(&emb_path, emb).unwrap();
    fs::write(&data_path, data).unwrap();
    Toy {
        dir,
        emb: emb_path,
        data: data_path,
    }
}

pub const FAST: &[&str] = &["--epochs", "30", "--lr", "0.5", "--hidden", "", "--batch-size", "8"];
