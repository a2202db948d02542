//! BiqMac/Beasley sparse instance files and run reports.
//!
//! Instance grammar: a header `n m`, then `m` lines `i j q` with 1-based
//! indices. Lines starting with `#` and blank lines are ignored. Entries with
//! `i > j` are read as `(j, i)`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ineq::QcqpInstance;

/// How the file's objective maps onto the internal minimization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    /// The file is a maximization; `Q` is negated on the way in.
    #[default]
    MaxToMin,
    /// The file is already a minimization.
    Min,
}

impl std::str::FromStr for Sense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-to-min" => Ok(Sense::MaxToMin),
            "min" => Ok(Sense::Min),
            _ => Err(Error::domain(format!("unknown sense '{s}' (expected max-to-min or min)"))),
        }
    }
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::MaxToMin => -1.0,
            Sense::Min => 1.0,
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_biqmac(path: &Path, sense: Sense) -> Result<QcqpInstance> {
    parse_biqmac_str(&fs::read_to_string(path)?, sense)
}

/// Binary QP `min xᵀQx` with `Q` symmetric; off-diagonal `q` is split `q/2`
/// on each side.
pub fn parse_biqmac_str(text: &str, sense: Sense) -> Result<QcqpInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(parse_err(hline, "header must be `n m`"));
    }
    let n: usize = head[0].parse().map_err(|_| parse_err(hline, "bad n"))?;
    let m: usize = head[1].parse().map_err(|_| parse_err(hline, "bad m"))?;
    if n == 0 {
        return Err(parse_err(hline, "n must be positive"));
    }
    let mut q = vec![vec![0.0; n]; n];
    let mut seen = HashSet::new();
    let mut count = 0;
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(ln, "expected `i j q`"));
        }
        let idx = |s: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| parse_err(ln, format!("bad index '{s}'")))?;
            if v == 0 || v > n {
                return Err(parse_err(ln, format!("index {v} out of range 1..={n}")));
            }
            Ok(v - 1)
        };
        let (a, b) = (idx(f[0])?, idx(f[1])?);
        let (i, j) = (a.min(b), a.max(b));
        let v: f64 = f[2].parse().map_err(|_| parse_err(ln, format!("bad value '{}'", f[2])))?;
        if !v.is_finite() {
            return Err(parse_err(ln, "value is not finite"));
        }
        if !seen.insert((i, j)) {
            return Err(parse_err(ln, format!("duplicate entry ({}, {})", i + 1, j + 1)));
        }
        let v = sense.sign() * v;
        if i == j {
            q[i][i] = v;
        } else {
            q[i][j] = v / 2.0;
            q[j][i] = v / 2.0;
        }
        count += 1;
    }
    if count != m {
        return Err(parse_err(hline, format!("header announces {m} entries, found {count}")));
    }
    QcqpInstance::binary_qp(q, vec![0.0; n])
}

/// Inverse of [`parse_biqmac_str`] for the quadratic part; `c₀` is folded
/// into the diagonal, which is exact on binaries.
pub fn biqmac_text(inst: &QcqpInstance, sense: Sense) -> String {
    let n = inst.n;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            let v = if i == j { inst.q0[i][i] + inst.c0[i] } else { inst.q0[i][j] + inst.q0[j][i] };
            if v != 0.0 {
                entries.push((i + 1, j + 1, sense.sign() * v));
            }
        }
    }
    let mut s = format!("{} {}\n", n, entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{i} {j} {v}");
    }
    s
}

pub fn write_biqmac(inst: &QcqpInstance, path: &Path, sense: Sense) -> Result<()> {
    fs::write(path, biqmac_text(inst, sense))?;
    Ok(())
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub relaxation: String,
    pub bound: f64,
    pub cuts_added: usize,
    pub time_secs: f64,
    pub ub: Option<f64>,
    pub gap: Option<String>,
}

/// A run's results together with what produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub version: String,
    pub config: serde_json::Value,
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        RunReport { seed, version: env!("CARGO_PKG_VERSION").to_string(), config, rows: Vec::new() }
    }
}

/// Writes `<path>.csv` and the `<path>.json` sidecar; returns both paths.
pub fn write_report(report: &RunReport, path: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = path.with_extension("csv");
    let json_path = path.with_extension("json");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    fs::write(&json_path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok((csv_path, json_path))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ineq::binary_qp_optimum;
    use crate::relax::{format_gap, gap_report};
    use proptest::prelude::*;

    #[test]
    fn two_variable_example() {
        let inst = parse_biqmac_str("2 1\n1 2 -4\n", Sense::Min).unwrap();
        assert_eq!(inst.q0, vec![vec![0.0, -2.0], vec![-2.0, 0.0]]);
        let (opt, x) = binary_qp_optimum(&inst).unwrap().unwrap();
        assert_eq!(opt, -4.0);
        assert_eq!(x, vec![1.0, 1.0]);
        let max = parse_biqmac_str("2 1\n1 2 -4\n", Sense::MaxToMin).unwrap();
        assert_eq!(max.q0[0][1], 2.0);
        assert_eq!(binary_qp_optimum(&max).unwrap().unwrap().0, 0.0);
    }

    #[test]
    fn empty_instance() {
        let inst = parse_biqmac_str("3 0\n", Sense::default()).unwrap();
        assert_eq!(binary_qp_optimum(&inst).unwrap().unwrap().0, 0.0);
    }

    #[test]
    fn comments_and_swapped_pairs() {
        let inst = parse_biqmac_str("# mirror header\n3 2\n\n3 1 6\n# x\n2 2 -1\n", Sense::Min).unwrap();
        assert_eq!(inst.q0[0][2], 3.0);
        assert_eq!(inst.q0[1][1], -1.0);
    }

    #[test]
    fn malformed_files() {
        for bad in ["", "2\n", "2 1\n1 3 1\n", "2 1\n0 1 1\n", "2 2\n1 2 1\n2 1 3\n", "2 2\n1 2 1\n", "2 1\n1 2 x\n", "2 1\n1 2\n"] {
            assert!(matches!(parse_biqmac_str(bad, Sense::Min), Err(Error::Parse { .. })), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn serialize_round_trip(n in 1usize..8, raw in proptest::collection::vec(-100i32..=100, 36)) {
            let mut text = String::new();
            let mut entries = Vec::new();
            let mut k = 0;
            for i in 1..=n {
                for j in i..=n {
                    if raw[k] % 3 != 0 {
                        entries.push(format!("{i} {j} {}", raw[k]));
                    }
                    k += 1;
                }
            }
            text.push_str(&format!("{} {}\n", n, entries.len()));
            for e in &entries {
                text.push_str(e);
                text.push('\n');
            }
            let a = parse_biqmac_str(&text, Sense::MaxToMin).unwrap();
            let b = parse_biqmac_str(&biqmac_text(&a, Sense::MaxToMin), Sense::MaxToMin).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(biqmac_text(&a, Sense::MaxToMin), text);
        }
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rep = RunReport::new(42, serde_json::json!({"relaxation": "i"}));
        let gap = format_gap(gap_report(-9748.0, -9769.21).unwrap());
        rep.rows.push(ReportRow {
            instance: "bqp-a".into(),
            relaxation: "i".into(),
            bound: -9769.21,
            cuts_added: 0,
            time_secs: 0.125,
            ub: Some(-9748.0),
            gap: Some(gap),
        });
        rep.rows.push(ReportRow {
            instance: "bqp-b".into(),
            relaxation: "vii".into(),
            bound: 0.1 + 0.2,
            cuts_added: 17,
            time_secs: 1.0 / 3.0,
            ub: None,
            gap: None,
        });
        let (csv_path, json_path) = write_report(&rep, &dir.path().join("run")).unwrap();
        assert_eq!(read_report_csv(&csv_path).unwrap(), rep.rows);
        let back: RunReport = serde_json::from_str(&fs::read_to_string(json_path).unwrap()).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back, rep);
        assert!(fs::read_to_string(csv_path).unwrap().contains("0.22%"));
    }
}
