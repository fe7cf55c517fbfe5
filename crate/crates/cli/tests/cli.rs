use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "[encoder]\nkind = \"dvrl\"\nparticles = 3\nh_dim = 8\nz_dim = 4\n\n[train]\nn_e = 2\ntotal_frames = 160\n\n[log]\ncheckpoint_every = 5\n";

fn beliefrl(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_beliefrl"));
    cmd.current_dir(dir).args(args).env_remove("BELIEFRL_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_passes_every_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = beliefrl(dir.path(), &["verify"], &[]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    for suite in ["kalman", "hmm", "resampling", "gradients", "elbo-additivity"] {
        assert!(text.contains(&format!("PASS {suite}:")), "{text}");
    }
    assert!(!text.contains("FAIL"));
}

#[test]
fn train_eval_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    let out = beliefrl(dir.path(), &["train", "--config", "run.toml", "--train.seed=4", "--log.metrics=m.csv"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert!(rows[0].starts_with("frames,segment,mean_return"));
    assert_eq!(rows.len(), 1 + 16);
    assert!(rows[1..].iter().all(|r| r.split(',').nth(9) == Some("4")));
    assert!(dir.path().join("checkpoint.bin").exists());

    let out = beliefrl(dir.path(), &["eval", "--checkpoint", "checkpoint.bin", "--episodes", "2"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("over 2 episodes"));

    let out = beliefrl(dir.path(), &["plot", "--in", "m.csv", "m.csv", "--out", "p.svg"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let svg = std::fs::read_to_string(dir.path().join("p.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    let out = beliefrl(
        dir.path(),
        &["train", "--config", "run.toml", "--train.total_frames=20"],
        &[("BELIEFRL_SEED", "11")],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|r| r.split(',').nth(9) == Some("11")));
}

#[test]
fn same_seed_same_metrics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    for name in ["a.csv", "b.csv"] {
        let metrics = format!("--log.metrics={name}");
        let out = beliefrl(dir.path(), &["train", "--config", "run.toml", &metrics], &[]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    let out = beliefrl(dir.path(), &["train", "--config", "run.toml", "--train.n_g=2"], &[]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("train.n_g") && err.contains("train.n_s"), "{err}");

    let out = beliefrl(dir.path(), &["train", "--config", "run.toml", "--train.typo=1"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("typo"));
}

#[test]
fn ablate_writes_one_csv_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("base.toml"), SMALL).unwrap();
    std::fs::write(
        dir.path().join("grid.toml"),
        "base = \"base.toml\"\nout_dir = \"cells\"\noverrides = [\"train.total_frames=20\"]\nparticles = [1, 2]\nseed = [0, 1]\n",
    )
    .unwrap();
    let out = beliefrl(dir.path(), &["ablate", "--grid", "grid.toml"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    for cell in ["k1_s0", "k1_s1", "k2_s0", "k2_s1"] {
        let csv = std::fs::read_to_string(dir.path().join("cells").join(format!("{cell}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 3, "{cell}");
    }
}

#[test]
fn eval_rejects_a_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.bin"), b"not a checkpoint").unwrap();
    let out = beliefrl(dir.path(), &["eval", "--checkpoint", "bad.bin", "--episodes", "1"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("checkpoint"));
}
