use std::fs;

use clap::Parser;
use mpdqn::harness::{read_eval_csv, read_train_csv, run_cli, Checkpoint, Cli};

fn cli(args: &[&str]) -> String {
    let parsed = Cli::try_parse_from(std::iter::once("mpdqn").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    run_cli(parsed, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

const CONFIG: &str = "env = platform
algorithm = pdqn-multipass
hidden = 16
batch_size = 16
initial_fill = 16
episodes = 30
eval_episodes = 5
";

#[test]
fn train_eval_and_diagnose_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, CONFIG).unwrap();
    let out = dir.path().join("out");
    let (conf_s, out_s) = (conf.to_str().unwrap(), out.to_str().unwrap());

    cli(&["train", "--config", conf_s, "--seeds", "1,2", "--out", out_s]);
    for seed in [1, 2] {
        let records = read_train_csv(&out.join(format!("train_seed{seed}.csv"))).unwrap();
        assert_eq!(records.len(), 30);
        assert!(records
            .iter()
            .enumerate()
            .all(|(i, r)| r.seed == seed && r.episode == i as u64));
        let ckpt = Checkpoint::load(&out.join(format!("seed{seed}.ckpt"))).unwrap();
        assert_eq!(ckpt.episodes_completed, 30);
    }

    let eval_dir = dir.path().join("eval");
    cli(&[
        "eval",
        "--checkpoint",
        out_s,
        "--episodes",
        "4",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    let evals = read_eval_csv(&eval_dir.join("eval.csv")).unwrap();
    assert_eq!(evals.len(), 8);
    // Greedy play on a deterministic environment repeats itself.
    for seed in [1, 2] {
        let rets: Vec<f64> = evals.iter().filter(|r| r.seed == seed).map(|r| r.ret).collect();
        assert!(rets.windows(2).all(|w| w[0] == w[1]));
    }

    let ckpt = out.join("seed1.ckpt");
    let csv = dir.path().join("sweep.csv");
    cli(&[
        "diagnose-sensitivity",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--state-index",
        "0",
        "--action",
        "1",
        "--points",
        "11",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "sweep_value,q_1,q_2,q_3");
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn sweep_and_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("sweep");
    let conf = dir.path().join("sweep.conf");
    fs::write(
        &conf,
        format!(
            "env = bandit\nalgorithm = pdqn-multipass\nhidden = 8\nbatch_size = 8\ninitial_fill = 8\n\
             episodes = 40\neval_episodes = 3\nseeds = 0,1\nout_dir = {}\n\
             sweep.lr_q = 1e-3 | 1e-4\nsweep.lr_actor = 1e-4 | 1e-3\n",
            root.display()
        ),
    )
    .unwrap();
    cli(&["sweep", "--config", conf.to_str().unwrap()]);
    let ranking = fs::read_to_string(root.join("ranking.csv")).unwrap();
    assert_eq!(ranking.lines().count(), 1 + 3);
    assert!(fs::read_to_string(root.join("rejected.txt"))
        .unwrap()
        .contains("lr_actor"));
    let report = cli(&["sweep-report", "--dir", root.to_str().unwrap()]);
    let report_rows: Vec<Vec<&str>> = report.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    for (line, row) in ranking.lines().skip(1).zip(&report_rows) {
        let fields: Vec<&str> = line.split(',').collect();
        let mean: f64 = fields[5].parse().unwrap();
        assert_eq!(row[0], fields[0]);
        assert_eq!(row[1], format!("{mean:.4}"));
        assert_eq!(row[4], fields[1]);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        if text.contains("sweep.") {
            let (cells, _) = mpdqn::harness::SweepSpec::from_file(&path).unwrap().expand();
            assert!(!cells.is_empty(), "{}", path.display());
        } else {
            mpdqn::harness::RunConfig::from_file(&path).unwrap();
        }
        seen += 1;
    }
    assert!(seen >= 3);
}
