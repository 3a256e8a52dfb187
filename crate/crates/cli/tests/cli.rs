use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use leadtime_cli::policy_file;
use leadtime_core::{eval_social_rate, solve, Problem, Scenario};

const BASE: &str = "# base case\nR = 15\np = 10\nc = 8\nl = 3\nr = 0.5\nlambda = 10\nmu = 12\n";

fn leadtime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leadtime")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV file written with a `#` header block.
fn csv_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (text, rows)
}

#[test]
fn solve_prints_headline_results() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario(dir.path(), "base.txt", BASE);
    let o = leadtime(&["solve", arg(&base)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for line in ["threshold bounds: n_lo=6, n_hi=10", "n_P=9, P*=94.91", "n_Sc=8, S*_c=105.80"] {
        assert!(out.contains(line), "missing `{line}` in\n{out}");
    }
    let o = leadtime(&["solve", arg(&base), "--problem", "social-single"]);
    assert!(stdout(&o).contains("n_Sc=8, S*_c=105.80"));
    assert!(!stdout(&o).contains("n_P="));
}

#[test]
fn infeasible_service_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("mu = 12", "mu = 2").replace("r = 0.5", "r = 1").replace("l = 3", "l = 5");
    let path = scenario(dir.path(), "slow.txt", &text);
    for cmd in ["solve", "quote-table"] {
        let o = leadtime(&[cmd, arg(&path)]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains("infeasible service"), "{}", stderr(&o));
    }
}

#[test]
fn parse_errors_exit_with_one_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "typo.txt", &format!("{BASE}lamda = 3\n"));
    let o = leadtime(&["solve", arg(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("typo.txt:9: unknown key 'lamda'"), "{}", stderr(&o));

    let path = scenario(dir.path(), "bad_fee.txt", &BASE.replace("p = 10", "p = 16"));
    let o = leadtime(&["solve", arg(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad_fee.txt:3:"), "{}", stderr(&o));

    let o = leadtime(&["solve", arg(&dir.path().join("absent.txt"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_rows_and_single_point_agree_with_solve() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario(dir.path(), "base.txt", BASE);
    let csv = dir.path().join("sweep.csv");
    let o = leadtime(&["sweep", arg(&base), "--axis", "p", "--grid", "5:14:1", "--csv", arg(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (text, rows) = csv_rows(&csv);
    assert_eq!(rows.len(), 10);
    assert!(text.starts_with("# leadtime "));
    assert!(text.contains("# scenario_sha256: "));
    assert!(text.lines().any(|l| l.starts_with("p,n_lo,n_hi,provider-dynamic.threshold")));

    let one = dir.path().join("one.csv");
    let o = leadtime(&["sweep", arg(&base), "--axis", "p", "--grid", "10", "--csv", arg(&one)]);
    assert!(o.status.success());
    let (_, rows) = csv_rows(&one);
    assert_eq!(rows.len(), 1);
    let s = Scenario::base();
    for (i, problem) in Problem::ALL.into_iter().enumerate() {
        let r = solve(&s, problem).unwrap();
        assert_eq!(rows[0][3 + 3 * i], r.threshold().to_string());
        assert_eq!(rows[0][4 + 3 * i].parse::<f64>().unwrap(), r.objective, "{problem}");
    }
}

#[test]
fn sweep_reads_axis_and_grid_from_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(
        dir.path(),
        "s.txt",
        &format!("{BASE}sweep.axis = l\nsweep.grid = 0,4\nsweep.problems = provider-dynamic\n"),
    );
    let o = leadtime(&["sweep", arg(&path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("sweep over l"));
    assert!(!out.contains("n_Sc"));
    assert_eq!(out.lines().filter(|l| l.trim_start().starts_with(['0', '4'])).count(), 2);
}

#[test]
fn simulation_is_reproducible_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario(dir.path(), "base.txt", BASE);
    let run = |seed: &str, threads: &str| {
        let o = leadtime(&[
            "--threads",
            threads,
            "simulate",
            arg(&base),
            "--problem",
            "provider-dynamic",
            "--seed",
            seed,
            "--replications",
            "6",
            "--events",
            "20000",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        o.stdout
    };
    let a = run("11", "1");
    assert_eq!(a, run("11", "4"));
    assert_ne!(a, run("12", "1"));
}

#[test]
fn saved_policy_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario(dir.path(), "base.txt", BASE);
    let s = Scenario::base();
    for problem in Problem::ALL {
        let path = dir.path().join(format!("{problem}.policy"));
        let o = leadtime(&["solve", arg(&base), "--problem", problem.name(), "--policy-out", arg(&path)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let saved = policy_file::load(&path).unwrap();
        assert_eq!(saved.problem, Some(problem));
        saved.policy.verify(&s).unwrap();
        let fresh = solve(&s, problem).unwrap();
        let value = fresh.reevaluate(&s).unwrap();
        let again = if problem.is_social() {
            eval_social_rate(&s, &saved.policy).unwrap()
        } else {
            leadtime_core::eval_profit_rate(&s, &saved.policy).unwrap()
        };
        assert!((again - value).abs() <= 1e-10, "{problem}: {again} vs {value}");

        let o = leadtime(&["simulate", arg(&base), "--policy", arg(&path), "--replications", "2", "--events", "5000"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains(&format!("policy: {problem}")));
    }
    let o = leadtime(&["solve", arg(&base), "--policy-out", arg(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn quote_table_marks_balking_states() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario(dir.path(), "base.txt", BASE);
    let csv = dir.path().join("q.csv");
    let o = leadtime(&["quote-table", arg(&base), "--csv", arg(&csv)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["n0", "9", "8", "8", "8"]), "{out}");
    let (_, rows) = csv_rows(&csv);
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][1], "inf");
    assert_eq!(rows[9], ["9", "balk", "balk", "balk", "balk"]);
}

#[test]
fn min_capacity_works_without_mu() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = BASE.lines().filter(|l| !l.starts_with("mu")).map(|l| format!("{l}\n")).collect();
    let path = scenario(dir.path(), "nomu.txt", &text);
    let csv = dir.path().join("cap.csv");
    let o = leadtime(&["min-capacity", arg(&path), "--d-grid", "0,1,inf", "--r", "0,0.5", "--csv", arg(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = csv_rows(&csv);
    assert_eq!(rows.len(), 6);
    let at =
        |d: &str, r: &str| -> f64 { rows.iter().find(|row| row[0] == d && row[1] == r).unwrap()[2].parse().unwrap() };
    assert!((at("inf", "0") - 1.6).abs() < 1e-9);
    assert!(at("0", "0.5") > at("0", "0") && at("inf", "0.5") > at("1", "0.5"));

    let o = leadtime(&["solve", arg(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing key 'mu'"));
}
