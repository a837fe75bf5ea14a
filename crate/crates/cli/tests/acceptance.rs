//! CLI acceptance: byte-identical reruns under a shared seed, the
//! documented exit-code taxonomy on injected failures, CSV round-tripping,
//! and the config-expansion equivalences.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mimo_capacity_cli::report::{parse_csv, summarize};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mimocap")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

const WATERFILL_CFG: &str = r#"
scenario = "wf"
seed = 42

[dims]
tx = 2
rx = 2

[noise]
sigma2 = 1.0

[constraint]
gamma = 1.0

[fading]
kind = "explicit"
mean = [["2", "0"], ["0", "1"]]
cov = [
  ["0", "0", "0", "0"],
  ["0", "0", "0", "0"],
  ["0", "0", "0", "0"],
  ["0", "0", "0", "0"],
]

[csi]
kind = "awgn"

[task]
kind = "waterfill"
"#;

const ERGODIC_CFG: &str = r#"
scenario = "erg"
seed = 7

[dims]
tx = 2
rx = 2

[noise]
sigma2 = 1.0

[constraint]
gamma = 2.0

[fading]
kind = "iid-rayleigh"

[csi]
kind = "full"

[task]
kind = "ergodic"
n_samples = 20000
"#;

#[test]
fn criterion_11_same_seed_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "erg.toml", ERGODIC_CFG);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");

    let r1 = run(&["run", cfg.to_str().unwrap(), "--out", out_a.to_str().unwrap()], &[]);
    assert!(r1.status.success(), "stderr: {}", String::from_utf8_lossy(&r1.stderr));
    let r2 = run(&["run", cfg.to_str().unwrap(), "--out", out_b.to_str().unwrap()], &[]);
    assert!(r2.status.success());
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "rerun with the same seed must be byte-identical");

    // Sweeps stay byte-identical under different worker counts.
    let s1 = dir.path().join("s1.csv");
    let s2 = dir.path().join("s2.csv");
    let sweep_args = |out: &Path| {
        vec![
            "sweep".to_string(),
            cfg.to_str().unwrap().to_string(),
            "--param".into(),
            "sigma2".into(),
            "--values".into(),
            "0.5,1,2".into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let r = Command::new(bin())
        .args(sweep_args(&s1))
        .env("MIMOCAP_THREADS", "1")
        .output()
        .unwrap();
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let r = Command::new(bin())
        .args(sweep_args(&s2))
        .env("MIMOCAP_THREADS", "3")
        .output()
        .unwrap();
    assert!(r.status.success());
    assert_eq!(
        std::fs::read(&s1).unwrap(),
        std::fs::read(&s2).unwrap(),
        "sweep output must not depend on the worker count"
    );
    println!("[PASS] criterion 11: byte-identical CSV across reruns and thread counts");
}

#[test]
fn waterfill_row_matches_the_grid_search_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "wf.toml", WATERFILL_CFG);
    let out = dir.path().join("wf.csv");
    let r = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let rows = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(
        (rows[0].capacity_bits_per_use - 2.339_850).abs() < 1e-4,
        "capacity {} vs grid-search value 2.33985",
        rows[0].capacity_bits_per_use
    );
    assert!(rows[0].certificate.unwrap() <= 1e-8, "waterfill certificate must be nonpositive");
}

#[test]
fn optimize_cov_reports_near_isotropic_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let body = ERGODIC_CFG
        .replace("kind = \"ergodic\"", "kind = \"optimize-cov\"")
        .replace("n_samples = 20000", "mc_samples = 60000\niters = 150\ntol = 2e-3");
    let cfg = write_config(dir.path(), "opt.toml", &body);
    let out = dir.path().join("opt.csv");
    let r = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let rows = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let extra = &rows[0].extra;
    let diag: Vec<f64> = extra
        .split(';')
        .find_map(|kv| kv.strip_prefix("s_diag="))
        .expect("s_diag in extra")
        .split('|')
        .map(|x| x.parse().unwrap())
        .collect();
    for d in &diag {
        assert!((d - 1.0).abs() <= 0.02, "diagonal entry {d} should be within 2% of 1");
    }
}

#[test]
fn sweeps_follow_theory_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();

    // Budget sweep on water-filling: strictly increasing capacity.
    let wf = write_config(dir.path(), "wf.toml", WATERFILL_CFG);
    let out = dir.path().join("wf-sweep.csv");
    let r = run(
        &[
            "sweep",
            wf.to_str().unwrap(),
            "--param",
            "gamma",
            "--values",
            "0.5,1,2,4",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# mimocap-report v1"), "missing schema version comment");
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 4);
    for pair in rows.windows(2) {
        assert!(
            pair[1].capacity_bits_per_use > pair[0].capacity_bits_per_use,
            "capacity must increase with the budget"
        );
    }

    // The emitted CSV reproduces the binary's summary block exactly.
    let stdout = String::from_utf8_lossy(&r.stdout);
    let regenerated = summarize(&rows);
    assert!(
        stdout.starts_with(&regenerated),
        "stdout summary does not match the regenerated one:\n{stdout}\nvs\n{regenerated}"
    );

    // Noise sweep on the ergodic estimator: decreasing within CI.
    let erg = write_config(dir.path(), "erg.toml", ERGODIC_CFG);
    let out = dir.path().join("erg-sweep.csv");
    let r = run(
        &[
            "sweep",
            erg.to_str().unwrap(),
            "--param",
            "sigma2",
            "--values",
            "0.5,1,2",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(r.status.success());
    let rows = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for pair in rows.windows(2) {
        let slack = pair[0].ci_half_width + pair[1].ci_half_width;
        assert!(
            pair[1].capacity_bits_per_use < pair[0].capacity_bits_per_use + slack,
            "capacity must decrease as noise grows"
        );
    }
}

#[test]
fn ba_grid_refinement_approaches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
scenario = "ba"
seed = 11

[dims]
tx = 1
rx = 1

[noise]
sigma2 = 1.0

[constraint]
gamma = 1.0

[fading]
kind = "explicit"
mean = [["1"]]
cov = [["0"]]

[csi]
kind = "awgn"

[task]
kind = "ba"
grid = "ring"
grid_phases = 8
grid_max_amp = 2.5
n_samples = 800
iters = 4000
tol = 2e-3
"#;
    let cfg = write_config(dir.path(), "ba.toml", body);
    let out = dir.path().join("ba.csv");
    let r = run(
        &[
            "sweep",
            cfg.to_str().unwrap(),
            "--param",
            "grid_levels",
            "--values",
            "2,3,5",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let rows = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let target = 1.0; // log2(1 + gamma |h|^2 / sigma2) at gamma = |h| = sigma2 = 1
    for pair in rows.windows(2) {
        assert!(
            pair[1].capacity_bits_per_use >= pair[0].capacity_bits_per_use - 0.02,
            "refining the grid should not lose capacity"
        );
    }
    let last = rows.last().unwrap();
    assert!(
        (last.capacity_bits_per_use - target).abs() < 0.05,
        "finest grid reached {} vs {target}",
        last.capacity_bits_per_use
    );
    assert!(last.capacity_bits_per_use <= target + 1e-6, "grid value cannot exceed the optimum");
}

#[test]
fn exit_codes_follow_the_documented_taxonomy() {
    let dir = tempfile::tempdir().unwrap();

    // 2: unreadable file and malformed TOML.
    let r = run(&["run", dir.path().join("missing.toml").to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(2));
    let bad = write_config(dir.path(), "bad.toml", "this is not toml [");
    let r = run(&["run", bad.to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&r.stderr).starts_with("error kind=parse msg="),
        "diagnostic line: {}",
        String::from_utf8_lossy(&r.stderr)
    );

    // 3: structurally valid config describing an invalid scenario.
    let cfg = write_config(dir.path(), "wf.toml", WATERFILL_CFG);
    let r = run(&["run", cfg.to_str().unwrap(), "--set", "dims.tx=0"], &[]);
    assert_eq!(r.status.code(), Some(3));
    let r = run(&["run", cfg.to_str().unwrap(), "--set", "task.kind=nonsense"], &[]);
    assert_eq!(r.status.code(), Some(3));
    // Zero channel matrix: water-filling refuses it.
    let r = run(
        &["run", cfg.to_str().unwrap(), "--set", "fading.mean=[['0','0'],['0','0']]"],
        &[],
    );
    assert_eq!(r.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&r.stderr));

    // 4: solver budget exhausted.
    let erg = write_config(dir.path(), "erg.toml", ERGODIC_CFG);
    let r = run(
        &[
            "run",
            erg.to_str().unwrap(),
            "--set",
            "task.kind=optimize-cov",
            "--set",
            "task.iters=1",
            "--set",
            "task.mc_samples=500",
            "--set",
            "task.tol=1e-12",
        ],
        &[],
    );
    assert_eq!(r.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error kind=non-convergence"));

    // 5: internal failure (unwritable report path).
    let r = run(
        &["run", cfg.to_str().unwrap(), "--out", "/nonexistent-dir/x.csv"],
        &[],
    );
    assert_eq!(r.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error kind=numerical"));

    println!("[PASS] exit codes: 2 parse / 3 validation / 4 non-convergence / 5 internal");
}

#[test]
fn kronecker_identity_matches_iid_rayleigh_byte_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let iid = write_config(dir.path(), "iid.toml", ERGODIC_CFG);
    let kron_body = ERGODIC_CFG.replace(
        "kind = \"iid-rayleigh\"",
        "kind = \"kronecker\"\nrtx = [[\"1\", \"0\"], [\"0\", \"1\"]]\nrrx = [[\"1\", \"0\"], [\"0\", \"1\"]]",
    );
    let kron = write_config(dir.path(), "kron.toml", &kron_body);
    let out_a = dir.path().join("iid.csv");
    let out_b = dir.path().join("kron.csv");
    assert!(run(&["run", iid.to_str().unwrap(), "--out", out_a.to_str().unwrap()], &[])
        .status
        .success());
    assert!(run(&["run", kron.to_str().unwrap(), "--out", out_b.to_str().unwrap()], &[])
        .status
        .success());
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap(),
        "kronecker(I, I) must reproduce the i.i.d. Rayleigh output bit-exactly"
    );
}
