mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{max_abs_diff, subset_shapley};
use polyshap::games::{FileGame, LookupGame};
use polyshap::{Coalition, Game, MobiusGame};
use serde_json::Value;

fn polyshap_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyshap")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn shapley_of(out: &Output) -> Vec<f64> {
    let v: Value = serde_json::from_slice(&out.stdout).expect("json on stdout");
    v["shapley"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn explain_full_lookup_game_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mobius = MobiusGame::random(4, 4, 9, 21).unwrap();
    let table = LookupGame::tabulate(&mobius).unwrap();
    assert!(table.is_complete());
    let path = dir.path().join("game.csv");
    table.save(&path).unwrap();

    let out = polyshap_cmd(&["explain", "--game", path_str(&path), "--budget", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("resolved config") && stderr.contains("\"seed\":0") && stderr.contains("k=2"));
    let phi = shapley_of(&out);
    assert!(max_abs_diff(&phi, &subset_shapley(&table)) < 1e-10);
}

#[test]
fn paired_order_one_recovers_degree_two_game() {
    let dir = tempfile::tempdir().unwrap();
    let game = MobiusGame::random(6, 2, 15, 5).unwrap();
    let path = dir.path().join("deg2.mobius");
    game.save(&path).unwrap();
    let truth = subset_shapley(&game);

    let base = ["explain", "--game", path_str(&path), "--method", "polyshap", "--order", "1", "--budget", "40"];
    let paired = polyshap_cmd(&[&base[..], &["--paired"]].concat());
    assert_eq!(paired.status.code(), Some(0));
    let unpaired = polyshap_cmd(&base);
    assert_eq!(unpaired.status.code(), Some(0));

    assert!(max_abs_diff(&shapley_of(&paired), &truth) < 1e-8);
    assert!(max_abs_diff(&shapley_of(&unpaired), &truth) > 1e-6);
}

#[test]
fn malformed_game_is_parse_error_without_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "d=3\n100,1.0\n01x,2.0\n").unwrap();
    let out_path = dir.path().join("result.json");
    let out = polyshap_cmd(&["explain", "--game", path_str(&path), "--budget", "8", "--out", path_str(&out_path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_path.exists());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["kind"], "parse");
    assert!(v.get("shapley").is_none());

    let missing = polyshap_cmd(&["explain", "--game", path_str(&dir.path().join("nope.csv")), "--budget", "8"]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn budget_and_flag_errors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.mobius");
    MobiusGame::random(4, 2, 5, 1).unwrap().save(&path).unwrap();
    let p = path_str(&path);
    for args in [
        vec!["explain", "--game", p, "--budget", "17"],
        vec!["explain", "--game", p, "--budget", "4"],
        vec!["explain", "--game", p, "--budget", "10", "--method", "kernelshap", "--order", "2"],
        vec!["explain", "--game", p, "--budget", "10", "--method", "permutation", "--paired"],
        vec!["explain", "--game", p, "--budget", "10", "--frontier", "nonsense"],
    ] {
        let out = polyshap_cmd(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn permutation_and_kernelshap_methods_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.mobius");
    let game = MobiusGame::random(5, 3, 10, 2).unwrap();
    game.save(&path).unwrap();
    for method in ["kernelshap", "permutation"] {
        let out = polyshap_cmd(&["explain", "--game", path_str(&path), "--budget", "30", "--method", method, "--seed", "4"]);
        assert_eq!(out.status.code(), Some(0), "{method}");
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["diagnostics"]["method"], method);
        let phi = shapley_of(&out);
        let full = game.evaluate(&Coalition::full(5).unwrap()).unwrap();
        assert!((phi.iter().sum::<f64>() - full).abs() < 1e-8);
    }
}

const SMALL_SWEEP: &str = r#"
budgets = [12, 20, 40]
seeds = [0, 1, 2]

[[games]]
kind = "random_mobius"
id = "small"
d = 5
max_order = 3
n_terms = 12
instances = 3
seed = 9

[[methods]]
estimator = "kernelshap"
paired = true

[[methods]]
estimator = "polyshap"
frontier = "2"
paired = true

[[methods]]
estimator = "permutation"
"#;

#[test]
fn benchmark_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, SMALL_SWEEP).unwrap();
    let mut outputs = Vec::new();
    for (run, jobs) in [("a", "1"), ("b", "4")] {
        let out_path = dir.path().join(format!("{run}.csv"));
        let out = polyshap_cmd(&["benchmark", "--config", path_str(&cfg), "--out", path_str(&out_path), "--jobs", jobs]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let read = |suffix: &str| std::fs::read(dir.path().join(format!("{run}{suffix}"))).unwrap();
        outputs.push((read(".csv"), read(".instances.csv"), read(".plot.json")));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert!(csv.starts_with("game,method,frontier,paired,budget,metric,mean,sem,n_runs\n"));
    // 2-additive on 5 players needs 15 columns, so m = 12 is absent for it.
    assert!(csv.contains("small,polyshap,k=2,true,12,mse,absent,absent,0"));
}

#[test]
fn benchmark_without_methods_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    let games = &SMALL_SWEEP[SMALL_SWEEP.find("[[games]]").unwrap()..SMALL_SWEEP.find("[[methods]]").unwrap()];
    std::fs::write(&cfg, format!("methods = []\nbudgets = [12]\nseeds = [0]\n\n{games}")).unwrap();
    let out_path = dir.path().join("out.csv");
    let out = polyshap_cmd(&["benchmark", "--config", path_str(&cfg), "--out", path_str(&out_path)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_path.exists());
}

#[test]
fn verify_projection_lemma_passes() {
    let out = polyshap_cmd(&["verify", "--suite", "projection-lemma"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS") && !text.contains("FAIL"));
    let out = polyshap_cmd(&["verify", "--suite", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_game_rows_determinism_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mobius");
    let b = dir.path().join("b.mobius");
    for p in [&a, &b] {
        let out = polyshap_cmd(&[
            "gen-game", "--players", "8", "--max-order", "3", "--n-terms", "20", "--seed", "1", "--out", path_str(p),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let text = String::from_utf8(bytes).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with("d=")).collect();
    assert_eq!(rows.len(), 20);
    for row in rows {
        let term = row.split(',').next().unwrap();
        assert!(term.chars().filter(|&c| c == '1').count() <= 3);
    }

    let game = MobiusGame::random(8, 3, 20, 1).unwrap();
    let loaded = match FileGame::load(&a).unwrap() {
        FileGame::Mobius(g) => g,
        FileGame::Lookup(_) => panic!("expected a Möbius game"),
    };
    for bits in 0..256u128 {
        let s = Coalition::from_bits(8, bits).unwrap();
        assert_eq!(game.evaluate(&s).unwrap().to_bits(), loaded.evaluate(&s).unwrap().to_bits());
    }
}

#[test]
fn gen_game_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.mobius");
    let out = polyshap_cmd(&["gen-game", "-d", "3", "--max-order", "2", "--n-terms", "50", "--out", path_str(&p)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!p.exists());
}
