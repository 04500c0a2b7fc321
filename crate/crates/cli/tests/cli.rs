use std::fs;
use std::path::Path;
use std::process::Command;

fn longjump(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_longjump"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run longjump");
    status.status.code().unwrap()
}

const SIM: &[&str] = &["simulate", "alpha=1.2", "N=32,64", "t=0.5,1", "L_factor=4", "tracers=3", "sites=2", "replicas=5"];

#[test]
fn same_seed_same_bytes_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(longjump(&[SIM, &["--seed", "11", "--threads", "1"]].concat(), &a), 0);
    assert_eq!(longjump(&[SIM, &["--seed", "11", "--threads", "3"]].concat(), &b), 0);
    assert_eq!(longjump(&[SIM, &["--seed", "12"]].concat(), &c), 0);
    let read = |p: &Path| fs::read(p.join("simulate.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let text = String::from_utf8(read(&a)).unwrap();
    // 2 scales x 5 replicas x 2 checkpoints x 3 tracers.
    assert_eq!(text.lines().count(), 1 + 60);
    assert!(text.starts_with("seed,replica,tracer,N,t,time,alpha,d,rho,x1,proposals,accepted,tracer_jumps,occ_0,occ_1"));
}

#[test]
fn manifest_config_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(longjump(&[SIM, &["--seed", "5"]].concat(), &a), 0);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["N"], "32,64");
    let cfg = a.join("simulate.cfg");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(longjump(&["simulate", "--config", cfg], &b), 0);
    assert_eq!(fs::read(a.join("simulate.csv")).unwrap(), fs::read(b.join("simulate.csv")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(longjump(&["oracle"], out), 0);
    assert_eq!(longjump(&["constants", "d=2", "alpha=2"], out), 0);
    assert_eq!(longjump(&["nonsense"], out), 2);
    assert_eq!(longjump(&["lln", "colour=blue"], out), 2);
    assert_eq!(longjump(&["lln", "rho=1.5"], out), 2);
    assert_eq!(longjump(&["lln", "L=10", "r_max=8"], out), 2);
    assert_eq!(longjump(&["lln", "alpha=0.5"], out), 2);
    assert_eq!(longjump(&["simulate", "d=3", "N=2000", "r_max=full", "L_factor=2"], out), 3);
    // A zero tolerance cannot be met by a noisy estimate.
    let fail = ["lln", "N=16", "L_factor=4", "tracers=2", "replicas=4", "tolerance=0"];
    assert_eq!(longjump(&fail, out), 1);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("lln.json")).unwrap()).unwrap();
    assert_eq!(m["passed"], false);
}

#[test]
fn freecheck_calibrates() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["freecheck", "alpha=0.8", "N=16", "r_max=512", "L_factor=128", "replicas=4000", "beta_grid=-2:2:11"];
    assert_eq!(longjump(&args, dir.path()), 0);
    let csv = fs::read_to_string(dir.path().join("freecheck.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
}
