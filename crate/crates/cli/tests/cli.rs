use std::process::{Command, Output};

use serde_json::Value;

fn tmtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmtrace"))
        .args(args)
        .env_remove("TM_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn eval_h1_at_two_with_zero_coupling() {
    let out = tmtrace(&["eval", "--n", "1", "--x", "2", "--lambda", "0"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["result"]["value"]["decimal"], "2");
    assert_eq!(v["result"]["oracle"], "2");
    assert_eq!(v["status"], "ok");
}

#[test]
fn eval_csv() {
    let out = tmtrace(&["eval", "--n", "2", "--x", "1/2", "--lambda", "0", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let row = r.records().next().unwrap().unwrap();
    // h_2(1/2) = 1/16 - 1 + 2 at λ = 0
    assert_eq!(&row[2], "1.0625");
}

#[test]
fn constants_check_prints_exact_sides() {
    let out = tmtrace(&["constants-check"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let checks = v["result"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    let lhs: Vec<&str> = checks.iter().map(|c| c["lhs"].as_str().unwrap()).collect();
    assert_eq!(lhs, ["1/500", "12/390625", "25/2305843009213693952"]);
    assert!(checks.iter().all(|c| c["holds"] == true));
    assert_eq!(checks[2]["strict"], true);
}

#[test]
fn dim_bound_for_full_schedule() {
    let out = tmtrace(&["dim-bound", "--K", "140"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!(v["result"]["bound"]["decimal"].as_str().unwrap().starts_with("0.0066731"));
    assert_eq!(v["result"]["formula"], "ln2/(K ln 2.1)");
}

#[test]
fn germ_check_far_iterate_is_strong() {
    let out = tmtrace(&["germ-check", "--lambda", "3", "--k", "140"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["result"]["level"], "strong");
    assert_eq!(v["result"]["pair"], serde_json::json!([144, 145]));
}

#[test]
fn base_germ_check_is_weak() {
    let out = tmtrace(&["germ-check", "--lambda", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["result"]["level"], "weak");
}

#[test]
fn roots_accept_negative_window() {
    let out = tmtrace(&["roots", "--n", "1", "--window", "-3:3", "--lambda", "0"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let zeros = v["result"]["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 2);
    assert!(zeros[0]["midpoint"].as_str().unwrap().starts_with("-1.41421356"));
    assert!(zeros[1]["midpoint"].as_str().unwrap().starts_with("1.41421356"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&tmtrace(&["eval", "--n", "1", "--x", "2", "--bogus"])), 1);
    assert_eq!(code(&tmtrace(&["frobnicate"])), 1);
    assert_eq!(code(&tmtrace(&["eval", "--n", "1"])), 1);
}

#[test]
fn bad_values_name_the_field() {
    let out = tmtrace(&["eval", "--n", "1", "--x", "2", "--lambda", "three"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lambda"));
    let out = tmtrace(&["roots", "--n", "1", "--window", "3"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--window"));
    let out = tmtrace(&["eval", "--n", "1", "--x", "2", "--precision-bits", "32"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn precision_flag_overrides_environment() {
    let run = |args: &[&str]| {
        let out =
            Command::new(env!("CARGO_BIN_EXE_tmtrace")).args(args).env("TM_PRECISION_BITS", "320").output().unwrap();
        json(&out)["config"]["precision_bits"].as_u64().unwrap()
    };
    assert_eq!(run(&["eval", "--n", "1", "--x", "2"]), 320);
    assert_eq!(run(&["eval", "--n", "1", "--x", "2", "--precision-bits", "192"]), 192);
}

#[test]
fn tree_output_is_byte_deterministic() {
    let args = ["cantor-build", "--K", "8", "--depth", "2", "--skip-cascade"];
    let first = tmtrace(&args);
    let second = tmtrace(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    let v = json(&first);
    assert_eq!(v["result"]["node_count"], 7);
    assert_eq!(v["result"]["exploratory"], true);
    let csv_out = tmtrace(&["cantor-build", "--K", "8", "--depth", "2", "--skip-cascade", "--format", "csv"]);
    let rows = csv::Reader::from_reader(csv_out.stdout.as_slice()).records().count();
    assert_eq!(rows, 7);
}

#[test]
fn failed_tree_assertion_exits_two_with_word() {
    // Below the full schedule the endpoint pairs only reach the close level.
    let out = tmtrace(&["cantor-build", "--K", "8", "--depth", "1"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("node 0:") && err.contains("node 1:"), "{err}");
    assert_eq!(json(&out)["status"], "flagged");
}

#[test]
fn plot_data_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plot.csv");
    let out = tmtrace(&[
        "cantor-build",
        "--K",
        "8",
        "--depth",
        "1",
        "--skip-cascade",
        "--emit-plot-data",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let mut r = csv::Reader::from_path(&path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["word", "m", "x", "h"]);
    assert_eq!(r.records().count(), 3 * 65);
}

#[test]
fn plot_data_io_error_names_path() {
    let out = tmtrace(&[
        "bands",
        "--n",
        "1",
        "--window",
        "-3:3",
        "--lambda",
        "0",
        "--resolution",
        "256",
        "--emit-plot-data",
        "/nonexistent-dir/plot.csv",
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/plot.csv"));
}

#[test]
fn bands_of_h1() {
    let out = tmtrace(&["bands", "--n", "1", "--window", "-3:3", "--lambda", "0", "--resolution", "256"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let bands = v["result"]["bands"].as_array().unwrap();
    assert_eq!(bands.len(), 1);
    assert!(bands[0]["lo"].as_str().unwrap().starts_with("-2"));
    assert!(bands[0]["hi"].as_str().unwrap().starts_with("2"));
}

#[test]
fn sigma_and_boxdim_run() {
    let out = tmtrace(&["sigma", "--n", "3", "--window", "-5:5", "--lambda", "1"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["result"]["count"].as_u64().unwrap() >= 8);
    let out = tmtrace(&["boxdim", "--source", "tree", "--K", "8", "--depth", "4", "--counting", "cover"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let counts: Vec<u64> =
        v["result"]["counts"].as_array().unwrap().iter().map(|c| c["count"].as_u64().unwrap()).collect();
    assert_eq!(counts, [2, 4, 8, 16]);
}
