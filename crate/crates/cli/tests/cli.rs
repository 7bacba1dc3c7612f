use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;
use tunnelsim_cli::config::{apply_override, parse, RunConfig};
use tunnelsim_cli::validate::validate;
use tunnelsim_cli::{execute, resolve, Args, CliError, Outcome};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tunnelsim"))
}

fn args(command: &str, sets: &[&str], out: &Path) -> Args {
    Args {
        command: Some(command.into()),
        config: None,
        overrides: sets.iter().map(|s| s.to_string()).collect(),
        seed: None,
        workers: None,
        out: Some(out.to_path_buf()),
    }
}

fn run(command: &str, sets: &[&str], out: &Path) -> Vec<String> {
    match execute(&args(command, sets, out)).unwrap() {
        Outcome::Ran { warnings, .. } => warnings.into_iter().map(|w| w.kind).collect(),
        Outcome::Validated(_) => panic!("expected a run"),
    }
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const C2: [&str; 5] = [
    "plan.dt=0.5",
    "plan.ordering=keven-p-kodd",
    "experiment.steps=12000",
    "experiment.stride=100",
    "seed=7",
];

#[test]
fn flat_pair_spectrum() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    run("spectrum", &["chain.sites=2", r#"chain.potential={"family":"custom","values":[0,0]}"#], &out);
    let e = column(&out.join("energies.csv"), "energy");
    assert_eq!(e.len(), 2);
    assert!((e[0] + 0.5).abs() < 1e-14 && (e[1] - 0.5).abs() < 1e-14, "{e:?}");
}

#[test]
fn validate_examples() {
    let cosine = r#"chain.potential={"family":"cosine","p":1.25}"#;
    let tmp = TempDir::new().unwrap();
    let cfg = resolve(&args("validate", &["plan.dt=5", cosine], tmp.path())).unwrap();
    let d = validate(&cfg, None);
    assert!(d.ok());
    assert!(d.warnings.iter().any(|w| w.kind == "locality"));

    let cfg = resolve(&args("validate", &["plan.dt=0.2", cosine], tmp.path())).unwrap();
    let d = validate(&cfg, None);
    assert!(d.ok() && d.warnings.is_empty() && d.advisories.is_empty(), "{d:?}");

    let cfg = resolve(&args("validate", &["plan.ordering=split", "plan.split_alpha=1.5"], tmp.path())).unwrap();
    let d = validate(&cfg, None);
    assert!(d.errors.iter().any(|e| e.starts_with("plan.split_alpha")), "{d:?}");
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let ok = bin().args(["validate", "--set", "plan.dt=0.2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = bin().args(["validate", "--set", "plan.ordering=split", "--set", "plan.split_alpha=-0.1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let out = tmp.path().join("x");
    let unknown = bin().args(["spectrum", "--set", "chain.colour=1", "--out"]).arg(&out).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("chain.colour"));
    assert!(!out.exists());
    let split = bin().args(["rabi", "--set", "plan.ordering=split", "--set", "plan.split_alpha=2", "--out"]).arg(&out).output().unwrap();
    assert_eq!(split.status.code(), Some(1));
    let good = bin().args(["spectrum", "--set", "chain.sites=6", "--out"]).arg(&out).output().unwrap();
    assert_eq!(good.status.code(), Some(0));
    assert_eq!(CliError::Numerical("x".into()).exit_code(), 2);
}

#[test]
fn strict_parsing_names_the_field() {
    let doc: Value = serde_json::from_str(r#"{"plan": {"dt": 0.1, "ordring": "split"}}"#).unwrap();
    let err = parse(doc).unwrap_err().to_string();
    assert!(err.contains("plan") && err.contains("ordring"), "{err}");
    let doc: Value = serde_json::from_str(r#"{"chain": {"potential": {"family": "cosine", "p": 1.0, "w": 3}}}"#).unwrap();
    assert!(parse(doc).is_err());
    let doc: Value = serde_json::from_str(r#"{"command": "spectra"}"#).unwrap();
    assert!(parse(doc).is_err());
}

#[test]
fn dotted_overrides() {
    let mut doc = serde_json::to_value(RunConfig::default()).unwrap();
    apply_override(&mut doc, "plan.dt=0.125").unwrap();
    apply_override(&mut doc, "experiment.dt_grid=[0.5,1]").unwrap();
    apply_override(&mut doc, "output_dir=some/where").unwrap();
    let cfg = parse(doc.clone()).unwrap();
    assert_eq!(cfg.plan.dt, 0.125);
    assert_eq!(cfg.experiment.dt_grid, vec![0.5, 1.0]);
    assert_eq!(cfg.output_dir, Path::new("some/where"));
    assert!(apply_override(&mut doc, "plan.dt.x=1").is_err());
    assert!(apply_override(&mut doc, "plan..dt=1").is_err());
    assert!(apply_override(&mut doc, "plan.dt").is_err());
}

#[test]
fn manifest_is_self_describing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("a");
    run("rabi", &C2, &out);
    let m = manifest(&out);
    assert_eq!(m["command"], "rabi");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    // resolved defaults are echoed
    assert_eq!(m["config"]["experiment"]["doublet_index"], 10);
    assert_eq!(m["config"]["chain"]["potential"]["w"], 8.0);
    let again = tmp.path().join("b");
    let a = Args {
        command: None,
        config: Some(out.join("manifest.json")),
        overrides: vec![],
        seed: None,
        workers: None,
        out: Some(again.clone()),
    };
    execute(&a).unwrap();
    for f in ["trace.csv", "spectrum.csv", "summary.json"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run("rabi", &C2, &a);
    run("rabi", &C2, &b);
    let mut other = C2.to_vec();
    other.push("seed=8");
    run("rabi", &other, &c);
    let ta = std::fs::read(a.join("trace.csv")).unwrap();
    assert_eq!(ta, std::fs::read(b.join("trace.csv")).unwrap());
    assert_ne!(ta, std::fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn rabi_matches_golden_trace() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    run("rabi", &C2, &out);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/rabi_c2_trace.csv");
    let period: f64 = manifest_summary(&out)["exact_period"].as_f64().unwrap();
    let (t, n) = (column(&out.join("trace.csv"), "t"), column(&out.join("trace.csv"), "n_left"));
    let (tg, ng) = (column(&golden, "t"), column(&golden, "n_left"));
    assert_eq!(t, tg);
    let first: Vec<usize> = (0..t.len()).filter(|&k| t[k] <= period).collect();
    assert!(first.len() > 50);
    let rms = (first.iter().map(|&k| (n[k] - ng[k]).powi(2)).sum::<f64>() / first.len() as f64).sqrt();
    assert!(rms < 1e-3, "rms {rms}");
    // one full exchange within the first period
    let lo = first.iter().map(|&k| n[k]).fold(f64::INFINITY, f64::min);
    assert!(n[0] > 0.9 && lo < 0.1, "start {} min {lo}", n[0]);
}

fn manifest_summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn sweep_writes_density_and_peaks_independent_of_workers() {
    let tmp = TempDir::new().unwrap();
    let sets = ["experiment.steps=6000", "experiment.stride=100", "experiment.dt_grid=[0.5,1.0,1.5,2.0]"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut one = args("sweep", &sets, &a);
    one.workers = Some(1);
    execute(&one).unwrap();
    let mut three = args("sweep", &sets, &b);
    three.workers = Some(3);
    execute(&three).unwrap();
    for f in ["density.csv", "peaks.csv", "visibility.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let peaks = read_csv(&a.join("peaks.csv"));
    assert_eq!(peaks.len(), 4);
    assert_eq!(read_csv(&a.join("density.csv")).len(), 4 * 60);
    assert_eq!(manifest(&b)["config"]["workers"], 3);
}

#[test]
fn floats_have_seventeen_digits() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    run("spectrum", &["chain.sites=8"], &out);
    for row in read_csv(&out.join("energies.csv")) {
        let mant = row[1].trim_start_matches('-').split('e').next().unwrap().replace('.', "");
        assert_eq!(mant.len(), 17, "{}", row[1]);
    }
}

#[test]
fn effective_ham_artifacts_and_folding_warning() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("h");
    let cosine = r#"chain.potential={"family":"cosine","p":1.25}"#;
    let w = run("effective-ham", &["chain.sites=10", cosine, "plan.dt=0.3", "plan.ordering=keven-kodd-p"], &out);
    assert!(w.is_empty(), "{w:?}");
    let s = manifest_summary(&out);
    assert!(s["bch_residual"].as_f64().unwrap() < 1e-3);
    assert!(!s["folded"].as_bool().unwrap());
    assert_eq!(read_csv(&out.join("quasienergies.csv")).len(), 10);
    let text = std::fs::read_to_string(out.join("heff.txt")).unwrap();
    let op = tunnelsim::DenseOperator::read_text(text.as_bytes()).unwrap();
    assert_eq!(op.dim(), 10);
    let folded = tmp.path().join("f");
    let w = run("effective-ham", &["chain.sites=10", cosine, "plan.dt=2.5"], &folded);
    assert!(w.contains(&"folding".to_string()), "{w:?}");
    assert!(manifest(&folded)["warnings"].as_array().unwrap().iter().any(|x| x["kind"] == "folding"));
}

#[test]
fn defect_table_scales_with_step() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("d");
    let cosine = r#"chain.potential={"family":"cosine","p":1.25}"#;
    run("defect", &["chain.sites=40", cosine, "plan.dt=0.1", "plan.ordering=keven-kodd-p", "analysis.dt_list=[0.2]", "analysis.levels=8"], &out);
    let rows = read_csv(&out.join("defect.csv"));
    assert_eq!(rows.len(), 16);
    let dp = column(&out.join("defect.csv"), "dp_direct");
    // level 5 at both steps: roughly (0.2/0.1)^4
    let r = dp[8 + 5] / dp[5];
    assert!(r > 10.0 && r < 25.0, "ratio {r}");
}

#[test]
fn semiclassics_and_portrait_run() {
    let tmp = TempDir::new().unwrap();
    let cosine = r#"chain.potential={"family":"cosine","p":1.25}"#;
    let out = tmp.path().join("s");
    run("semiclassics", &[cosine, "plan.dt=0.2", "analysis.well.hi=25.5", "analysis.well.partner=37.75"], &out);
    let e = column(&out.join("levels.csv"), "energy");
    let exact = column(&out.join("exact.csv"), "energy");
    assert!(e.len() >= 3);
    // the lowest two exact levels are the ground doublet
    assert!((e[0] - exact[0]).abs() < 0.02, "{} vs {}", e[0], exact[0]);
    assert!(column(&out.join("shifts.csv"), "de").iter().all(|v| v.is_finite()));
    let big = tmp.path().join("b");
    let w = run("semiclassics", &[cosine, "plan.dt=1.2", "analysis.well.hi=25.5"], &big);
    assert!(w.contains(&"perturbative-regime-exceeded".to_string()), "{w:?}");

    let p = tmp.path().join("p");
    run("portrait", &[cosine, "plan.dt=1.49707035", "analysis.kinetic=large-step", "analysis.energies=[-1.0,0.0]"], &p);
    let regions = read_csv(&p.join("regions.csv"));
    assert!(!regions.is_empty());
    assert!(column(&p.join("contours.csv"), "p").iter().all(|v| (0.0..=std::f64::consts::PI + 1e-12).contains(v)));
}

#[test]
fn overlap_map_and_noise_run() {
    let tmp = TempDir::new().unwrap();
    let cosine = r#"chain.potential={"family":"cosine","p":1.25}"#;
    let o = tmp.path().join("o");
    run("overlap-map", &["chain.sites=30", cosine, "plan.dt=0.2", "analysis.levels=6"], &o);
    assert_eq!(read_csv(&o.join("overlap.csv")).len(), 36);
    assert_eq!(read_csv(&o.join("ridges.csv")).len(), 6);

    let n = tmp.path().join("n");
    run("noise", &["plan.dt=0.5", "experiment.steps=12000", "experiment.stride=100", "experiment.trials=10", "experiment.phase_sigma=0"], &n);
    let v = column(&n.join("visibilities.csv"), "visibility");
    assert_eq!(v.len(), 10);
    let s = manifest_summary(&n);
    let clean = s["noiseless"].as_f64().unwrap();
    assert!(v.iter().all(|x| (x - clean).abs() < 1e-12));
}

#[test]
fn experiment_commands_need_the_experimental_family() {
    let tmp = TempDir::new().unwrap();
    let a = args("rabi", &[r#"chain.potential={"family":"cosine","p":1.25}"#], &tmp.path().join("r"));
    let err = execute(&a).err().expect("rejected");
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("experimental"));
}

#[test]
fn default_sweep_peak_list() {
    // defaults are the symmetric density-map setup: L=50, P=1.25, w=8, doublet 10, 60000 steps
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("f");
    run("sweep", &[], &out);
    let dt = column(&out.join("peaks.csv"), "dt");
    let period = column(&out.join("peaks.csv"), "period");
    assert_eq!(dt.len(), 9);
    assert!(period.windows(2).all(|w| w[1] < w[0]), "{period:?}");
    assert!(period[0] > 4e3 && period[0] < 6.5e3, "{}", period[0]);
    assert!(period[8] > 0.8e3 && period[8] < 1.6e3, "{}", period[8]);
    assert_eq!(read_csv(&out.join("density.csv")).len(), 9 * 300);
}
