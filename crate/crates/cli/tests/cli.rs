use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mhdiff_core::io::parse_plan;
use mhdiff_core::optimizer::{verify_feasible, Budgets, Variant};
use mhdiff_core::scenario::Experiment;
use tempfile::TempDir;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn mhdiff(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhdiff")).args(args).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn run_ok(args: &[&str], out: &Path) -> String {
    let o = mhdiff(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn path_scenario() -> String {
    scenarios().join("path_scenario.toml").to_string_lossy().into_owned()
}

fn tree_scenario() -> String {
    scenarios().join("tree.toml").to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

/// Copies the path scenario into `dir` and applies `edit` to the scenario text.
fn edited_path_scenario(dir: &Path, edit: impl FnOnce(String) -> String) -> String {
    for f in ["path.toml", "path_profiles.toml"] {
        fs::copy(scenarios().join(f), dir.join(f)).unwrap();
    }
    let text = fs::read_to_string(scenarios().join("path_scenario.toml")).unwrap();
    let path = dir.join("scenario.toml");
    fs::write(&path, edit(text)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_one_trace_row_per_iteration() {
    let dir = TempDir::new().unwrap();
    let cfg = path_scenario();
    run_ok(&["simulate", "-c", &cfg, "--runs", "20", "--iters", "60"], dir.path());
    for label in ["noncoop", "atc", "matc_planned"] {
        let (header, rows) = read_csv(&dir.path().join(format!("trace_{label}.csv")));
        assert_eq!(header, ["iteration", "msd_db_sim", "msd_db_theory", "energy_cum"]);
        assert_eq!(rows.len(), 60);
    }
    let (header, rows) = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(header[0], "strategy");
    assert_eq!(rows.len(), 3);
}

#[test]
fn simulate_is_deterministic_for_a_seed() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = path_scenario();
    let args = ["simulate", "-c", &cfg, "--runs", "10", "--iters", "40", "--seed", "5"];
    run_ok(&args, a.path());
    run_ok(&args, b.path());
    for name in ["summary.csv", "trace_atc.csv", "trace_matc_planned.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let c = TempDir::new().unwrap();
    run_ok(&["simulate", "-c", &cfg, "--runs", "10", "--iters", "40", "--seed", "6"], c.path());
    assert_ne!(fs::read(a.path().join("trace_atc.csv")).unwrap(), fs::read(c.path().join("trace_atc.csv")).unwrap());
}

#[test]
fn linear_flag_drops_db_marker() {
    let dir = TempDir::new().unwrap();
    let cfg = path_scenario();
    run_ok(&["simulate", "-c", &cfg, "--runs", "5", "--iters", "20", "--linear"], dir.path());
    let (header, rows) = read_csv(&dir.path().join("trace_atc.csv"));
    assert_eq!(header, ["iteration", "msd_sim", "msd_theory", "energy_cum"]);
    assert!(column(&header, &rows, "msd_sim").iter().all(|&x| x > 0.0));
}

#[test]
fn optimize_plan_passes_feasibility_check() {
    let dir = TempDir::new().unwrap();
    let cfg = path_scenario();
    let exp = Experiment::load(Path::new(&cfg)).unwrap();
    for variant in ["p2", "p3"] {
        for method in ["exact", "algorithm1"] {
            for budget in ["0", "2", "5"] {
                let stdout = run_ok(
                    &["optimize", "-c", &cfg, "--variant", variant, "--method", method, "--budgets", budget],
                    dir.path(),
                );
                assert!(stdout.contains("objective"));
                let text = fs::read_to_string(dir.path().join(format!("plan_{variant}_{method}.toml"))).unwrap();
                let plan = parse_plan(&text).unwrap();
                let v: Variant = variant.parse().unwrap();
                let selection = plan.to_selection(&exp.net, &exp.gammas()).unwrap();
                let budgets = Budgets { local: exp.budgets().local, network: budget.parse().unwrap() };
                let report = verify_feasible(&selection, &exp.net, &budgets, v);
                assert!(report.is_feasible(), "{variant} {method} {budget}: {:?}", report.violations);
            }
        }
    }
}

#[test]
fn tradeoff_objective_is_monotone_with_known_endpoints() {
    let dir = TempDir::new().unwrap();
    let cfg = tree_scenario();
    run_ok(&["tradeoff", "-c", &cfg, "--runs", "5", "--iters", "200", "--budgets", "0,2,5,29"], dir.path());
    let (header, rows) = read_csv(&dir.path().join("tradeoff.csv"));
    assert_eq!(column(&header, &rows, "budget"), [0.0, 2.0, 5.0, 29.0]);
    let objective = column(&header, &rows, "objective");
    assert!(objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{objective:?}");
    assert_eq!(column(&header, &rows, "broadcasts")[0], 0.0);

    let theory = TempDir::new().unwrap();
    run_ok(&["theory", "-c", &cfg], theory.path());
    let (th, tr) = read_csv(&theory.path().join("theory_summary.csv"));
    let steady = column(&th, &tr, "steady_msd_db");
    let label = |name: &str| tr.iter().position(|r| r[0] == name).unwrap();
    let msd = column(&header, &rows, "steady_msd_db");
    assert!((msd[0] - steady[label("noncoop")]).abs() < 1e-6);
    assert!((msd[3] - steady[label("centralized")]).abs() < 1e-6);
}

#[test]
fn compare_exact_never_worse_than_rounding() {
    let dir = TempDir::new().unwrap();
    let cfg = path_scenario();
    run_ok(&["compare", "-c", &cfg, "--variant", "p3"], dir.path());
    let (header, rows) = read_csv(&dir.path().join("compare.csv"));
    assert_eq!(rows.len(), 5);
    let exact = column(&header, &rows, "exact_objective");
    let rounded = column(&header, &rows, "algorithm1_objective");
    let bound = column(&header, &rows, "lp_bound");
    let diagonal = column(&header, &rows, "diagonal_objective");
    for i in 0..rows.len() {
        assert!(bound[i] <= exact[i] * (1.0 + 1e-9));
        assert!(exact[i] <= rounded[i] * (1.0 + 1e-9));
        assert!(rounded[i] <= diagonal[i] * (1.0 + 1e-9));
    }
}

#[test]
fn theory_reports_balance_and_bounds() {
    let dir = TempDir::new().unwrap();
    let cfg = path_scenario();
    let stdout = run_ok(&["theory", "-c", &cfg, "--iters", "30"], dir.path());
    assert!(stdout.starts_with("alpha = "));
    let (header, rows) = read_csv(&dir.path().join("theory_summary.csv"));
    assert_eq!(rows.len(), 3);
    let steady = column(&header, &rows, "steady_msd_db");
    for name in ["bound_bar_db", "bound_a_db", "bound_b_db"] {
        let bound = column(&header, &rows, name);
        for i in 0..rows.len() {
            assert!(steady[i] <= bound[i] + 1e-9, "{name} row {i}");
        }
    }
    let (_, curve) = read_csv(&dir.path().join("theory_atc.csv"));
    assert_eq!(curve.len(), 30);
}

#[test]
fn bad_configuration_exits_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(mhdiff(&["simulate", "-c", missing.to_str().unwrap()], dir.path()).status.code(), Some(1));
    let cfg = path_scenario();
    assert_eq!(mhdiff(&["simulate", "-c", &cfg, "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(mhdiff(&["optimize", "-c", &cfg, "--budgets", "1,2"], dir.path()).status.code(), Some(1));
    let broken = edited_path_scenario(dir.path(), |t| t.replace("kind = \"atc\"", "kind = \"atc\"\nh = \"two\""));
    assert_eq!(mhdiff(&["simulate", "-c", &broken], dir.path()).status.code(), Some(1));
}

#[test]
fn infeasible_plan_exits_two() {
    let dir = TempDir::new().unwrap();
    let plan = "variant = \"p3\"\nmethod = \"exact\"\nobjective = 1.0\ntotal_cost = 0.0\n\n\
        [[node]]\nid = 1\nconsults = [1, 3]\nrelays = []\ncost = 0.0\n\n\
        [[node]]\nid = 2\nconsults = [2]\nrelays = []\ncost = 0.0\n\n\
        [[node]]\nid = 3\nconsults = [3]\nrelays = []\ncost = 0.0\n\n\
        [[node]]\nid = 4\nconsults = [4]\nrelays = []\ncost = 0.0\n";
    fs::write(dir.path().join("bad_plan.toml"), plan).unwrap();
    let cfg = edited_path_scenario(dir.path(), |t| {
        t.replace("label = \"matc_planned\"", "label = \"matc_planned\"\nplan = \"bad_plan.toml\"")
    });
    let o = mhdiff(&["simulate", "-c", &cfg, "--runs", "2", "--iters", "5"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unstable_step_size_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = edited_path_scenario(dir.path(), |t| t);
    let profiles = dir.path().join("path_profiles.toml");
    let text = fs::read_to_string(&profiles).unwrap().replace("mu = 0.05", "mu = 5.0");
    fs::write(&profiles, text).unwrap();
    assert_eq!(mhdiff(&["theory", "-c", &cfg], dir.path()).status.code(), Some(3));
    assert_eq!(mhdiff(&["simulate", "-c", &cfg, "--runs", "2", "--iters", "5"], dir.path()).status.code(), Some(3));
}
