use std::fs;
use std::process::Command;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mcast-ho"));
    cmd.env_remove("MCAST_HO_SEED");
    cmd
}

fn write_config(dir: &std::path::Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn same_config_and_seed_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(
        dir.path(),
        "trials = 300\nsweep.start = 0\nsweep.stop = 20\nsweep.step = 10\n",
    );
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let status = bin()
            .args(["handover", "--config", &conf, "--seed", "77", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.contains("# seed = 77"));
    assert!(text.contains("# trials = 300"));
    let data = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data, 1 + 3 * 3);
}

#[test]
fn flag_overrides_environment_seed() {
    let env_only = bin()
        .args(["analytic", "--out", "-"])
        .env("MCAST_HO_SEED", "5")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&env_only.stdout).contains("# seed = 5"));
    let both = bin()
        .args(["analytic", "--seed", "9"])
        .env("MCAST_HO_SEED", "5")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&both.stdout).contains("# seed = 9"));
}

#[test]
fn invalid_config_fails_with_key_name() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "timers.anticipation.mean = -1\n");
    let out = dir.path().join("never.csv");
    let res = bin()
        .args(["handover", "--config", &conf, "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("timers.anticipation.mean"), "{err}");
    assert!(err.contains("line 1"), "{err}");
    assert!(!out.exists());
}

#[test]
fn experiment_mismatch_and_bad_path_fail() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "experiment = mobility\n");
    let res = bin()
        .args(["analytic", "--config", &conf])
        .output()
        .unwrap();
    assert!(!res.status.success());

    let target = dir.path().join("no_such_dir").join("x.csv");
    let res = bin()
        .args(["analytic", "--out"])
        .arg(&target)
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(!target.exists());
}

#[test]
fn analytic_overhead_table() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "analytic.table = overhead\n");
    let res = bin()
        .args(["analytic", "--config", &conf])
        .output()
        .unwrap();
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows,
        vec![
            "scheme,handover_kind,messages",
            "reactive,intra_map,1",
            "reactive,inter_map,2",
            "predictive,any,7"
        ]
    );
}

#[test]
fn result_file_can_be_fed_back_as_config() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(
        dir.path(),
        "seed = 5\ntrials = 200\nsweep.start = 0\nsweep.stop = 10\nsweep.step = 5\n",
    );
    let first = dir.path().join("first.csv");
    let again = dir.path().join("again.csv");
    for (config, out) in [(conf.as_str(), &first), (first.to_str().unwrap(), &again)] {
        let status = bin()
            .args(["handover", "--config", config, "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(fs::read(&first).unwrap(), fs::read(&again).unwrap());
}
