//! Grid search over run-config keys.
//!
//! A sweep file is a run config plus axes `sweep.<key> = v1 | v2 | ...`.
//! Every combination of axis values is a cell; cells breaking
//! `lr_actor <= lr_q` or `tau_actor <= tau_q` are rejected up front.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{parse_pairs, RunConfig, KEYS};
use super::run::{evaluate, read_eval_csv, train, EvalSummary};
use crate::error::{Error, Result};

pub type Overrides = Vec<(String, String)>;

#[derive(Debug, Clone)]
pub struct SweepSpec {
    base: BTreeMap<String, String>,
    axes: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejected {
    pub overrides: Overrides,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    pub overrides: Overrides,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub index: usize,
    pub overrides: Overrides,
    pub dir: PathBuf,
    pub summary: EvalSummary,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Best mean evaluation return first.
    pub ranked: Vec<CellResult>,
    pub rejected: Vec<Rejected>,
}

pub fn describe(overrides: &Overrides) -> String {
    if overrides.is_empty() {
        return "(base config)".into();
    }
    overrides
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl SweepSpec {
    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut base = BTreeMap::new();
        let mut axes = Vec::new();
        for (key, value) in pairs {
            match key.strip_prefix("sweep.") {
                Some(axis) => {
                    if !KEYS.iter().any(|(k, _)| *k == axis) {
                        return Err(Error::Config(format!("unknown sweep axis '{axis}'")));
                    }
                    let values: Vec<String> = value.split('|').map(|v| v.trim().to_string()).collect();
                    if values.iter().any(String::is_empty) {
                        return Err(Error::Config(format!("{key}: empty alternative")));
                    }
                    axes.push((axis.to_string(), values));
                }
                None => {
                    base.insert(key, value);
                }
            }
        }
        if let Some((axis, _)) = axes.iter().find(|(a, _)| base.contains_key(a)) {
            return Err(Error::Config(format!("'{axis}' is both fixed and swept")));
        }
        // Fail early on a broken base config rather than once per cell.
        RunConfig::from_pairs(&base)?;
        Ok(Self { base, axes })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn base(&self) -> Result<RunConfig> {
        RunConfig::from_pairs(&self.base)
    }

    /// All combinations, last axis varying fastest, split into runnable
    /// cells and rejections.
    pub fn expand(&self) -> (Vec<Cell>, Vec<Rejected>) {
        let mut combos: Vec<Overrides> = vec![Vec::new()];
        for (key, values) in &self.axes {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.push((key.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        let mut cells = Vec::new();
        let mut rejected = Vec::new();
        for overrides in combos {
            let mut pairs = self.base.clone();
            pairs.extend(overrides.iter().cloned());
            let checked = RunConfig::from_pairs(&pairs).and_then(|cfg| {
                check_constraints(&cfg).map_err(Error::Config)?;
                Ok(cfg)
            });
            match checked {
                Ok(config) => cells.push(Cell {
                    index: cells.len(),
                    overrides,
                    config,
                }),
                Err(e) => rejected.push(Rejected {
                    overrides,
                    reason: e.to_string(),
                }),
            }
        }
        (cells, rejected)
    }
}

/// The grid-search constraints on learning rates and Polyak factors.
pub fn check_constraints(cfg: &RunConfig) -> std::result::Result<(), String> {
    if cfg.lr_actor > cfg.lr_q {
        return Err(format!("lr_actor {} exceeds lr_q {}", cfg.lr_actor, cfg.lr_q));
    }
    if cfg.tau_actor > cfg.tau_q {
        return Err(format!("tau_actor {} exceeds tau_q {}", cfg.tau_actor, cfg.tau_q));
    }
    Ok(())
}

fn cell_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("cell_{index:03}"))
}

/// Trains and evaluates every accepted cell under the base `out_dir`, then
/// writes `ranking.csv` and `rejected.txt` there.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let root = spec.base()?.out_dir;
    let (cells, rejected) = spec.expand();
    if cells.is_empty() {
        let reasons: Vec<String> = rejected
            .iter()
            .map(|r| format!("{}: {}", describe(&r.overrides), r.reason))
            .collect();
        return Err(Error::Config(format!(
            "every sweep cell was rejected:\n{}",
            reasons.join("\n")
        )));
    }
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let mut results = Vec::new();
    for cell in cells {
        let dir = cell_dir(&root, cell.index);
        let cfg = RunConfig {
            out_dir: dir.clone(),
            ..cell.config
        };
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let conf: String = cell.overrides.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        fs::write(dir.join("cell.conf"), conf).map_err(|e| Error::io(&dir, e))?;
        let trained = train(&cfg)?;
        let checkpoints: Vec<PathBuf> = trained.into_iter().map(|t| t.checkpoint).collect();
        let summary = evaluate(&checkpoints, cfg.eval_episodes, Some(&dir))?;
        results.push(CellResult {
            index: cell.index,
            overrides: cell.overrides,
            dir,
            summary,
        });
    }
    let result = SweepResult {
        ranked: rank(results),
        rejected,
    };
    write_report(&root, &result)?;
    Ok(result)
}

fn rank(mut cells: Vec<CellResult>) -> Vec<CellResult> {
    cells.sort_by(|a, b| {
        b.summary
            .summary
            .mean
            .total_cmp(&a.summary.summary.mean)
            .then(a.index.cmp(&b.index))
    });
    cells
}

fn write_report(root: &Path, result: &SweepResult) -> Result<()> {
    let mut csv = String::from("rank,cell,algorithm,env,n_seeds,mean,std,stderr\n");
    for (rank, c) in result.ranked.iter().enumerate() {
        csv += &format!("{},{},{}\n", rank + 1, c.index, c.summary.csv_line());
    }
    let path = root.join("ranking.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    let rejected: String = result
        .rejected
        .iter()
        .map(|r| format!("{}: {}\n", describe(&r.overrides), r.reason))
        .collect();
    let path = root.join("rejected.txt");
    fs::write(&path, rejected).map_err(|e| Error::io(&path, e))
}

/// Rebuilds the ranking of a finished sweep from the raw per-cell
/// evaluation CSVs.
pub fn sweep_report(root: &Path) -> Result<SweepResult> {
    let mut cells = Vec::new();
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in entries {
        let dir = entry.map_err(|e| Error::io(root, e))?.path();
        let Some(index) = dir
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("cell_"))
            .and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        let eval_path = dir.join("eval.csv");
        if !eval_path.exists() {
            continue;
        }
        let conf_path = dir.join("config.json");
        let conf = fs::read_to_string(&conf_path).map_err(|e| Error::io(&conf_path, e))?;
        let cfg: RunConfig =
            serde_json::from_str(&conf).map_err(|e| Error::Config(format!("{}: {e}", conf_path.display())))?;
        let cell_conf = dir.join("cell.conf");
        let overrides: Overrides = match fs::read_to_string(&cell_conf) {
            Ok(text) => parse_pairs(&text)?.into_iter().collect(),
            Err(_) => Vec::new(),
        };
        let records = read_eval_csv(&eval_path)?;
        let summary = EvalSummary::from_records(cfg.algorithm.name(), cfg.env.id(), &records)?;
        cells.push(CellResult {
            index,
            overrides,
            dir,
            summary,
        });
    }
    if cells.is_empty() {
        return Err(Error::InsufficientSamples { have: 0, need: 1 });
    }
    Ok(SweepResult {
        ranked: rank(cells),
        rejected: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_and_constraints() {
        let spec = SweepSpec::from_text(
            "env = bandit\nsweep.lr_q = 1e-3 | 1e-4\nsweep.lr_actor = 1e-4 | 1e-3\nsweep.hidden = 128 | 256,128",
        )
        .unwrap();
        let (cells, rejected) = spec.expand();
        assert_eq!(cells.len() + rejected.len(), 8);
        // lr_actor 1e-3 > lr_q 1e-4 and lr_actor 1e-3 vs lr_q 1e-3 is fine.
        assert_eq!(rejected.len(), 2);
        assert!(rejected.iter().all(|r| r.reason.contains("lr_actor")));
        assert!(cells.iter().all(|c| c.config.lr_actor <= c.config.lr_q));
        assert!(cells.iter().any(|c| c.config.hidden == vec![256, 128]));
    }

    #[test]
    fn bad_sweeps() {
        assert!(SweepSpec::from_text("sweep.bogus = 1 | 2").is_err());
        assert!(SweepSpec::from_text("lr_q = 1e-3\nsweep.lr_q = 1e-3 | 1e-4").is_err());
        assert!(SweepSpec::from_text("sweep.lr_q = 1e-3 |").is_err());
        let all_bad = SweepSpec::from_text("sweep.tau_actor = 0.5 | 0.9").unwrap();
        assert!(sweep(&all_bad).is_err());
    }
}
