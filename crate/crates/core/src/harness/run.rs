use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::session::{derive_seed, Checkpoint, EpisodeRecord, EvalRecord, Session};
use super::stats::{summarize, Summary};
use crate::error::{Error, Result};

pub const TRAIN_HEADER: &str = "seed,episode,return,steps,epsilon,q_loss,actor_loss";
pub const EVAL_HEADER: &str = "seed,episode,return,steps";
pub const SUMMARY_HEADER: &str = "algorithm,env,n_seeds,mean,std,stderr";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EpisodeRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.seed,
            self.episode,
            self.ret,
            self.steps,
            self.epsilon,
            opt(self.q_loss),
            opt(self.actor_loss)
        )
    }
}

impl EvalRecord {
    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.seed, self.episode, self.ret, self.steps)
    }
}

pub fn train_log_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("train_seed{seed}.csv"))
}

pub fn checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed{seed}.ckpt"))
}

fn meta_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed{seed}.meta.json"))
}

/// Progress record written beside each training log. A run that dies
/// mid-way leaves `status = "running"` and the last checkpoint it reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub algorithm: String,
    pub env: String,
    pub seed: u64,
    pub stream_seed: u64,
    pub episodes_planned: u64,
    pub episodes_logged: u64,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_episodes: u64,
    pub status: String,
}

impl RunMeta {
    fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub seed: u64,
    pub log: PathBuf,
    pub checkpoint: PathBuf,
    pub records: Vec<EpisodeRecord>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Trains one seed for `cfg.episodes` episodes into `dir`, appending one CSV
/// row per episode and checkpointing at the end.
pub fn train_seed(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<TrainOutput> {
    let mut session = Session::new(cfg, seed)?;
    let log = train_log_path(dir, seed);
    let ckpt = checkpoint_path(dir, seed);
    let meta_file = meta_path(dir, seed);
    let mut out = create(&log)?;
    let io = |e| Error::io(&log, e);
    writeln!(out, "{TRAIN_HEADER}").map_err(io)?;
    out.flush().map_err(io)?;
    let mut meta = RunMeta {
        algorithm: cfg.algorithm.name().into(),
        env: cfg.env.id().into(),
        seed,
        stream_seed: derive_seed(cfg.master_seed, seed),
        episodes_planned: cfg.episodes,
        episodes_logged: 0,
        checkpoint: None,
        checkpoint_episodes: 0,
        status: "running".into(),
    };
    meta.write(&meta_file)?;

    let mut records = Vec::with_capacity(cfg.episodes.min(1 << 20) as usize);
    for episode in 0..cfg.episodes {
        let record = session.train_episode()?;
        writeln!(out, "{}", record.csv_line()).map_err(io)?;
        out.flush().map_err(io)?;
        records.push(record);
        let done = episode + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.episodes {
            session.checkpoint().save(&ckpt)?;
            meta.episodes_logged = done;
            meta.checkpoint = Some(ckpt.clone());
            meta.checkpoint_episodes = done;
            meta.write(&meta_file)?;
        }
    }
    session.checkpoint().save(&ckpt)?;
    meta.episodes_logged = cfg.episodes;
    meta.checkpoint = Some(ckpt.clone());
    meta.checkpoint_episodes = cfg.episodes;
    meta.status = "complete".into();
    meta.write(&meta_file)?;
    Ok(TrainOutput {
        seed,
        log,
        checkpoint: ckpt,
        records,
    })
}

/// Trains every seed in `cfg.seeds` into `cfg.out_dir`.
pub fn train(cfg: &RunConfig) -> Result<Vec<TrainOutput>> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let config_json = serde_json::to_string_pretty(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let config_path = cfg.out_dir.join("config.json");
    fs::write(&config_path, config_json + "\n").map_err(|e| Error::io(&config_path, e))?;
    cfg.seeds.iter().map(|&s| train_seed(cfg, s, &cfg.out_dir)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEval {
    pub seed: u64,
    pub mean_return: f64,
    pub episodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub algorithm: String,
    pub env: String,
    pub per_seed: Vec<SeedEval>,
    pub summary: Summary,
}

impl EvalSummary {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.algorithm, self.env, self.summary.n, self.summary.mean, self.summary.std, self.summary.stderr
        )
    }

    /// Per-seed means and cross-seed statistics from evaluation rows.
    pub fn from_records(algorithm: &str, env: &str, records: &[EvalRecord]) -> Result<Self> {
        let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
        seeds.dedup();
        let mut per_seed = Vec::new();
        for seed in seeds {
            let returns: Vec<f64> = records.iter().filter(|r| r.seed == seed).map(|r| r.ret).collect();
            per_seed.push(SeedEval {
                seed,
                mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
                episodes: returns.len() as u64,
            });
        }
        let means: Vec<f64> = per_seed.iter().map(|s| s.mean_return).collect();
        Ok(Self {
            algorithm: algorithm.into(),
            env: env.into(),
            summary: summarize(&means)?,
            per_seed,
        })
    }
}

/// Exploration-free evaluation of one or more checkpoints (one per seed).
/// With `out`, writes `eval.csv` and `summary.csv` there.
pub fn evaluate(checkpoints: &[PathBuf], episodes: u64, out: Option<&Path>) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    let mut records = Vec::new();
    let mut ids: Option<(String, String)> = None;
    for path in checkpoints {
        let ckpt = Checkpoint::load(path)?;
        let these = (
            ckpt.config.algorithm.name().to_string(),
            ckpt.config.env.id().to_string(),
        );
        match &ids {
            Some(known) if known != &these => {
                return Err(Error::Checkpoint(format!(
                    "{} holds {}/{}, expected {}/{}",
                    path.display(),
                    these.0,
                    these.1,
                    known.0,
                    known.1
                )))
            }
            _ => ids = Some(these),
        }
        let mut session = Session::from_checkpoint(ckpt)?;
        for episode in 0..episodes {
            records.push(session.eval_episode(episode)?);
        }
    }
    let (algorithm, env) = ids.ok_or(Error::InsufficientSamples { have: 0, need: 1 })?;
    let summary = EvalSummary::from_records(&algorithm, &env, &records)?;
    if let Some(dir) = out {
        write_eval(dir, &records, &summary)?;
    }
    Ok(summary)
}

pub fn write_eval(dir: &Path, records: &[EvalRecord], summary: &EvalSummary) -> Result<()> {
    let path = dir.join("eval.csv");
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{EVAL_HEADER}").map_err(io)?;
    for r in records {
        writeln!(w, "{}", r.csv_line()).map_err(io)?;
    }
    w.flush().map_err(io)?;
    let path = dir.join("summary.csv");
    let text = format!("{SUMMARY_HEADER}\n{}\n", summary.csv_line());
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Checkpoints in `dir` in seed order.
pub fn find_checkpoints(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(u64, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let seed = name.strip_prefix("seed")?.strip_suffix(".ckpt")?.parse().ok()?;
            Some((seed, p))
        })
        .collect();
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().transpose().map_err(|e| Error::io(path, e))?;
    if first.as_deref() != Some(header) {
        return Err(Error::Config(format!("{}: expected header '{header}'", path.display())));
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if cells.len() != width {
            return Err(Error::Config(format!("{}: malformed row {}", path.display(), n + 2)));
        }
        rows.push(cells);
    }
    Ok(rows)
}

fn cell<T: std::str::FromStr>(path: &Path, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{}: cannot parse '{v}'", path.display())))
}

fn opt_cell(path: &Path, v: &str) -> Result<Option<f64>> {
    if v.is_empty() {
        Ok(None)
    } else {
        cell(path, v).map(Some)
    }
}

pub fn read_train_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    read_rows(path, TRAIN_HEADER)?
        .iter()
        .map(|c| {
            Ok(EpisodeRecord {
                seed: cell(path, &c[0])?,
                episode: cell(path, &c[1])?,
                ret: cell(path, &c[2])?,
                steps: cell(path, &c[3])?,
                epsilon: cell(path, &c[4])?,
                q_loss: opt_cell(path, &c[5])?,
                actor_loss: opt_cell(path, &c[6])?,
            })
        })
        .collect()
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalRecord>> {
    read_rows(path, EVAL_HEADER)?
        .iter()
        .map(|c| {
            Ok(EvalRecord {
                seed: cell(path, &c[0])?,
                episode: cell(path, &c[1])?,
                ret: cell(path, &c[2])?,
                steps: cell(path, &c[3])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &Path, extra: &str) -> RunConfig {
        RunConfig::from_text(&format!(
            "env = chain\nhidden = 8\nbatch_size = 4\ninitial_fill = 4\nepisodes = 30\nseeds = 2,5\nout_dir = {}\n{extra}",
            dir.display()
        ))
        .unwrap()
    }

    #[test]
    fn zero_budget_writes_empty_log_and_initial_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            episodes: 0,
            ..tiny(dir.path(), "")
        };
        let out = train(&cfg).unwrap();
        assert!(read_train_csv(&out[0].log).unwrap().is_empty());
        let ckpt = Checkpoint::load(&out[0].checkpoint).unwrap();
        assert_eq!(ckpt.episodes_completed, 0);
        let fresh = Session::new(&cfg, 2).unwrap();
        let (Some(a), Some(b)) = (ckpt.agent.as_pdqn(), fresh.agent().as_pdqn()) else {
            panic!()
        };
        assert_eq!(a.q().nets(), b.q().nets());
    }

    #[test]
    fn logs_round_trip_and_meta_completes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path(), "checkpoint_every = 10");
        let out = train(&cfg).unwrap();
        for o in &out {
            assert_eq!(read_train_csv(&o.log).unwrap(), o.records);
            let meta = RunMeta::read(&meta_path(dir.path(), o.seed)).unwrap();
            assert_eq!((meta.status.as_str(), meta.episodes_logged), ("complete", 30));
        }
        let ckpts = find_checkpoints(dir.path()).unwrap();
        assert_eq!(ckpts.len(), 2);
        let eval_dir = dir.path().join("eval");
        let summary = evaluate(&ckpts, 3, Some(&eval_dir)).unwrap();
        let rows = read_eval_csv(&eval_dir.join("eval.csv")).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(
            EvalSummary::from_records("pdqn-multipass", "chain", &rows).unwrap(),
            summary
        );
        // Greedy policy on a deterministic environment.
        for s in &summary.per_seed {
            let returns: Vec<f64> = rows.iter().filter(|r| r.seed == s.seed).map(|r| r.ret).collect();
            assert!(returns.iter().all(|&r| r == returns[0]));
        }
    }
}
