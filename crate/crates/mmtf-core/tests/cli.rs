use mmtf_core::cli::run_from;
use std::fs;
use std::path::Path;
use std::process::Command;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut v = vec!["mmtf".to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    v.push("--out-dir".into());
    v.push(dir.display().to_string());
    run_from(v)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn nonlocal_sweep_of_uniform_field_has_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        dir.path(),
        &["sweep", "--regime", "nonlocal", "--set", "field.init=uniform", "--set", "grid.n=24", "--set", "grid.n_s=256"],
    );
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(header, ["eps", "G_eps", "offset", "limit", "gap", "R_perp", "R_par"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[4] == 0.0));
    assert!(dir.path().join("run_config.json").exists());
}

#[test]
fn asymptotics_slope_is_four_pi() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        dir.path(),
        &["asymptotics", "--eps-from", "0.0625", "--eps-to", "0.000244140625", "--eps-steps", "9", "--set", "grid.n_s=512"],
    );
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&dir.path().join("asymptotics.csv"));
    assert_eq!(&header[..3], ["eps", "abs_ln_eps", "D_eps"]);
    // least squares D = a|ln eps| + c + k eps
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for r in &rows {
        let x = [r[1], 1.0, r[0]];
        for i in 0..3 {
            atb[i] += x[i] * r[2];
            for j in 0..3 {
                ata[i][j] += x[i] * x[j];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let mut num = ata;
    for i in 0..3 {
        num[i][0] = atb[i];
    }
    let slope = det(&num) / det(&ata);
    let tail = (rows[8][2] - rows[7][2]) / (rows[8][1] - rows[7][1]);
    let four_pi = 4.0 * std::f64::consts::PI;
    assert!((slope - four_pi).abs() < 1e-2 * four_pi, "{slope}");
    assert!((tail - four_pi).abs() < 1e-2 * four_pi, "{tail}");
}

#[test]
fn unknown_command_exits_two_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mmtf"))
        .args(["frobnicate", "--out-dir", "."])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn validation_and_resolution_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["domain", "--set", "domain.kidn=disk"]), 2);
    assert_eq!(run(dir.path(), &["energy", "--regime", "bogus"]), 2);
    assert_eq!(run(dir.path(), &["meanfield", "--beta", "2"]), 2);
    let code = run(
        dir.path(),
        &["minimize", "--set", "minimize.functional=g_eps", "--set", "grid.n=24", "--set", "regime.eps=0.05", "--max-iter", "2"],
    );
    assert_eq!(code, 3);
}

#[test]
fn config_file_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "# ellipse run\ndomain.kind = ellipse\ndomain.a = 1.5\ndomain.b = 1\ngrid.n = 32\ngrid.n_s = 256\n").unwrap();
    let c = cfg.display().to_string();
    assert_eq!(run(dir.path(), &["domain", "--config", &c]), 0);
    let dom: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("domain.json")).unwrap()).unwrap();
    let len = dom["length"].as_f64().unwrap();
    assert!((len - 7.932_719_794_645_295).abs() < 1e-10, "{len}");
    let rc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run_config.json")).unwrap()).unwrap();
    assert_eq!(rc["command"], "domain");
    assert_eq!(rc["config"]["domain"]["kind"], "ellipse");

    assert_eq!(run(dir.path(), &["energy", "--config", &c, "--eps", "0.05", "--regime", "ks"]), 0);
    let e: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("energy.json")).unwrap()).unwrap();
    assert!(e.to_string().contains("total"));

    let code = run(
        dir.path(),
        &["minimize", "--config", &c, "--regime", "gj", "--init", "skyrmion", "--lambda", "2", "--max-iter", "20"],
    );
    assert_eq!(code, 0);
    let (h, rows) = read_csv(&dir.path().join("energy_history.csv"));
    assert_eq!(h, ["iteration", "energy"]);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
    assert!(dir.path().join("field.csv").exists() && dir.path().join("minimize.json").exists());

    assert_eq!(run(dir.path(), &["meanfield", "--beta", "6"]), 0);
    let (h, rows) = read_csv(&dir.path().join("profile.csv"));
    assert_eq!(h.len(), 2);
    assert_eq!(rows[0][1], 0.0);
    assert_eq!(run(dir.path(), &["meanfield", "--beta-from", "2", "--beta-to", "4", "--steps", "5"]), 0);
    let (h, rows) = read_csv(&dir.path().join("bifurcation.csv"));
    assert_eq!(h, ["beta_T", "s0"]);
    assert_eq!(rows.len(), 5);
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["sweep", "--seed", "42", "--set", "field.init=random_smooth", "--set", "grid.n=24", "--set", "grid.n_s=256", "--eps-steps", "3"];
    assert_eq!(run(a.path(), &args), 0);
    assert_eq!(run(b.path(), &args), 0);
    for f in ["sweep.csv", "run_config.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    let other = ["sweep", "--seed", "43", "--set", "field.init=random_smooth", "--set", "grid.n=24", "--set", "grid.n_s=256", "--eps-steps", "3"];
    assert_eq!(run(c.path(), &other), 0);
    assert_ne!(fs::read(a.path().join("sweep.csv")).unwrap(), fs::read(c.path().join("sweep.csv")).unwrap());
}

#[test]
fn thread_cap_does_not_change_results() {
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let st = Command::new(env!("CARGO_BIN_EXE_mmtf"))
            .args(["energy", "--set", "grid.n=32", "--set", "grid.n_s=256", "--set", "field.init=random", "--eps", "0.05"])
            .arg("--out-dir")
            .arg(dir.path())
            .env("MMTF_THREADS", threads)
            .status()
            .unwrap();
        assert!(st.success());
        outs.push(fs::read(dir.path().join("energy.json")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}
