use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metaboson"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn spectrum_writes_bands_rapidities_and_sidecars() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--task", "spectrum", "--model", "dbkc", "--N", "25", "--grid", "nk=64"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(names(d.path()), ["bands.csv", "bands.csv.meta.json", "rapidities.csv", "rapidities.csv.meta.json"]);
    let rap = fs::read_to_string(d.path().join("rapidities.csv")).unwrap();
    assert!(rap.starts_with("# metaboson"));
    let rows = data_rows(&rap);
    // 2N OBC and 2N PBC rapidities
    assert_eq!(rows.len(), 100);
    // OBC rapidities of the reference chain sit on Re λ = −κ
    for r in rows.iter().filter(|r| r.contains(",obc,")) {
        let re: f64 = r.split(',').nth(3).unwrap().parse().unwrap();
        assert!((re + 0.3).abs() < 1e-8, "{r}");
    }
    let bands = fs::read_to_string(d.path().join("bands.csv")).unwrap();
    assert_eq!(data_rows(&bands).len(), 2 * 64);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("bands.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["model"], "dbkc");
    assert_eq!(meta["config"]["params"]["kappa"], 0.3);
    assert_eq!(meta["config"]["grid"]["nk"], "64");
    assert!(meta["library_version"].is_string());
}

#[test]
fn pdmc_obc_rapidities_lie_on_a_vertical_line() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--task", "spectrum", "--model", "pdmc", "--N", "10"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rap = fs::read_to_string(d.path().join("rapidities.csv")).unwrap();
    let re: Vec<f64> = data_rows(&rap)
        .iter()
        .filter(|r| r.contains(",obc,"))
        .map(|r| r.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(re.len(), 20);
    for x in &re {
        assert!((x - re[0]).abs() < 1e-8, "{re:?}");
    }
}

#[test]
fn invalid_size_fails_without_files() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("run");
    let o = run(&["--task", "spectrum", "--model", "dbkc", "--N", "2"], &out);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--N"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_parameter_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--task", "spectrum", "--model", "dbkc", "--params", "kapa=0.3"], d.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--params: unknown parameter 'kapa'"), "{}", stderr(&o));
    assert!(names(d.path()).is_empty());
}

#[test]
fn config_file_errors_are_line_precise() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.json");
    fs::write(&cfg, "{\n  \"task\": \"spectrum\",\n  \"model\": \"dbkc\",\n  \"sizes\": [10],\n  \"seeed\": 3\n}\n").unwrap();
    let out = d.path().join("out");
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run.json:5:"), "{}", stderr(&o));
    fs::write(&cfg, "{\n  \"task\": \"spectrum\",\n  \"model\": \"dbkc\",\n  \"params\": {\"kapa\": 1}\n}\n").unwrap();
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run.json:4:"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn output_is_deterministic_and_sidecars_rerun() {
    let d = tempfile::tempdir().unwrap();
    let args = ["--task", "transient", "--model", "dbkc", "--N", "8", "--seed", "11", "--grid", "t=0:5:6,samples=40"];
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(code(&run(&args, &a)), 0);
    let o = bin().env("METABOSON_THREADS", "1").args(args).arg("--out").arg(&b).output().unwrap();
    assert_eq!(code(&o), 0);
    let csv_a = fs::read(a.join("transient_N8.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("transient_N8.csv")).unwrap());
    let c = d.path().join("c");
    let o = bin().arg("--config").arg(a.join("transient_N8.csv.meta.json")).arg("--out").arg(&c).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv_a, fs::read(c.join("transient_N8.csv")).unwrap());
    let other = d.path().join("other");
    let mut args2 = args.to_vec();
    args2[7] = "12";
    assert_eq!(code(&run(&args2, &other)), 0);
    assert_ne!(csv_a, fs::read(other.join("transient_N8.csv")).unwrap());
}

#[test]
fn phase_diagram_records_ill_defined_points() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    let args = ["--task", "phase-diagram", "--model", "dbkc", "--N", "20", "--grid", "x=kappa:0.1:1.5:3,y=gamma:0:0.1:2"];
    let o = run(&args, &a);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(a.join("phase.csv")).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 6);
    // κ = 0.1 < 2Γ = 0.2 is outside the model's domain
    assert!(rows[3].starts_with("20,1e-1,1e-1,IllDefined"), "{}", rows[3]);
    assert!(rows[0].contains("TopologicallyMetastable"), "{}", rows[0]);
    assert!(rows[2].contains("AnomalouslyRelaxing"), "{}", rows[2]);
    let b = d.path().join("b");
    let o = bin().env("METABOSON_THREADS", "3").args(args).arg("--out").arg(&b).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(text, fs::read_to_string(b.join("phase.csv")).unwrap());
}

#[test]
fn modes_writes_four_mode_files_and_pair_table() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--task", "modes", "--model", "dbkc", "--params", "j=1,delta=1,kappa=0.5", "--N", "25"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let all = names(d.path());
    let modes: Vec<&String> = all.iter().filter(|n| n.starts_with("mode_") && n.ends_with(".json") && !n.ends_with(".meta.json")).collect();
    assert_eq!(modes.len(), 4);
    assert_eq!(all.iter().filter(|n| n.ends_with(".meta.json")).count(), 5);
    let pairs = fs::read_to_string(d.path().join("pairs.csv")).unwrap();
    for r in data_rows(&pairs) {
        let f: Vec<&str> = r.split(',').collect();
        let (cr, ci): (f64, f64) = (f[8].parse().unwrap(), f[9].parse().unwrap());
        assert!(cr.abs() < 1e-10 && (ci - 1.0).abs() < 1e-10, "{r}");
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join(modes[0])).unwrap()).unwrap();
    assert_eq!(m["coefficients"].as_array().unwrap().len(), 50);
}

#[test]
fn missing_midgap_is_a_precondition_failure() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--task", "modes", "--model", "dbkc", "--params", "kappa=0.7", "--N", "25"], d.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(names(d.path()).is_empty());
}

#[test]
fn correlate_writes_one_file_per_operator_pair() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        &["--task", "correlate", "--model", "dbkc", "--params", "j=0.05,delta=0.05,kappa=0.02", "--N", "25", "--grid", "tau=0:5:11"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let corr: Vec<String> = names(d.path()).into_iter().filter(|n| n.starts_with("corr_") && n.ends_with(".csv")).collect();
    assert_eq!(corr.len(), 4);
    let lr = corr.iter().find(|n| n.contains("left_s") && n.contains("right.csv")).expect("left ZM with right SG");
    let text = fs::read_to_string(d.path().join(lr)).unwrap();
    for r in data_rows(&text) {
        let f: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[3] - 1.0).abs() < 0.01 && f[4].abs() < 0.01, "{r}");
    }
}

#[test]
fn parity_curves_per_size_and_phase() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--task", "parity", "--model", "dbkc-pure-ss", "--N", "20,25", "--grid", "t=0:10:5"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("parity.csv")).unwrap();
    let rows = data_rows(&text);
    // two sizes, two edges, three phases, five times
    assert_eq!(rows.len(), 2 * 2 * 3 * 5);
    let at_pi_zero: Vec<&&str> = rows.iter().filter(|r| r.contains(",3.141592653589793e0,0e0,")).collect();
    assert_eq!(at_pi_zero.len(), 4);
    assert!(at_pi_zero.iter().all(|r| r.ends_with(",-1e0")));
}

#[test]
fn parity_needs_the_pure_steady_state_model() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--task", "parity", "--model", "dbkc"], d.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn pseudospectrum_grid_and_boundary_precondition() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--task", "pseudospec", "--model", "dbkc", "--N", "10", "--grid", "nx=5,ny=4,re=-1:0.5,im=-3:3"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("pseudospec_N10.csv")).unwrap();
    assert_eq!(data_rows(&text).len(), 20);
    let e = d.path().join("pbc");
    let o = run(&["--task", "pseudospec", "--model", "dbkc", "--bc", "pbc", "--N", "10"], &e);
    assert_eq!(code(&o), 4);
    assert!(!e.exists());
}

#[test]
fn steady_state_task_on_unstable_chain_is_a_precondition_failure() {
    let d = tempfile::tempdir().unwrap();
    let e = d.path().join("out");
    let o = run(&["--task", "correlate", "--model", "pdmc", "--params", "mu=1", "--N", "20", "--grid", "kind=ss"], &e);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(!e.exists());
}

#[test]
fn custom_model_round_trips_through_json() {
    let d = tempfile::tempdir().unwrap();
    let model = metaboson::models::make_dbkc(2.0, 0.5, 0.0, 0.3, 0.0).unwrap();
    let path = d.path().join("bulk.json");
    fs::write(&path, model.to_json()).unwrap();
    let spec = format!("custom:{}", path.display());
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(code(&run(&["--task", "spectrum", "--model", &spec, "--N", "12"], &a)), 0);
    assert_eq!(code(&run(&["--task", "spectrum", "--model", "dbkc", "--N", "12"], &b)), 0);
    let strip = |p: &Path| data_rows(&fs::read_to_string(p).unwrap()).join("\n");
    assert_eq!(strip(&a.join("rapidities.csv")), strip(&b.join("rapidities.csv")));
}

#[test]
fn bad_thread_count_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = bin().env("METABOSON_THREADS", "zero").args(["--task", "spectrum", "--model", "dbkc", "--out"]).arg(d.path()).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(names(d.path()).is_empty());
}
