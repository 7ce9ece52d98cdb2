use efl_cli::{run_with, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};
use efl_core::hypercore::{verify_coloring, EdgeColoring, LinearHypergraph};

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("efl").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn gen_color_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("fano.lhg");
    let col = dir.path().join("fano.json");
    let (inst_s, col_s) = (inst.to_str().unwrap(), col.to_str().unwrap());
    assert_eq!(cli(&["gen", "--family", "projective-plane", "--q", "2", "--out", inst_s]).0, EXIT_OK);
    let (code, _, err) = cli(&["color", "--algo", "pipeline", "--in", inst_s, "--seed", "1", "--out", col_s]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(err.contains("7 colors"), "{err}");
    let h = LinearHypergraph::from_lhg(&std::fs::read_to_string(&inst).unwrap(), false).unwrap();
    let c = EdgeColoring::from_json(&std::fs::read_to_string(&col).unwrap()).unwrap();
    verify_coloring(&h, &c).unwrap();
    let (code, out, _) = cli(&["verify", "--in", inst_s, "--coloring", col_s]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("proper"));
}

#[test]
fn improper_coloring_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("fano.lhg");
    let col = dir.path().join("bad.json");
    cli(&["gen", "--family", "projective-plane", "--q", "2", "--out", inst.to_str().unwrap()]);
    std::fs::write(&col, EdgeColoring::from_colors(vec![0; 7]).to_json()).unwrap();
    let (code, _, err) = cli(&["verify", "--in", inst.to_str().unwrap(), "--coloring", col.to_str().unwrap()]);
    assert_eq!(code, EXIT_VERIFY);
    assert!(err.contains("intersect"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("k5.lhg");
    cli(&["gen", "--family", "complete", "--n", "5", "--out", inst.to_str().unwrap()]);
    assert_eq!(cli(&["color", "--algo", "pipeline", "--in", inst.to_str().unwrap()]).0, EXIT_USAGE);
    assert_eq!(cli(&["color", "--algo", "nope", "--in", inst.to_str().unwrap()]).0, EXIT_USAGE);
    assert_eq!(cli(&["verify", "--in", "/does/not/exist", "--coloring", "x"]).0, EXIT_USAGE);
    assert_eq!(cli(&["gen", "--family", "projective-plane", "--q", "6"]).0, EXIT_USAGE);
}

#[test]
fn exact_reports_chromatic_index() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("k5.lhg");
    cli(&["gen", "--family", "complete", "--n", "5", "--out", inst.to_str().unwrap()]);
    let (code, out, _) = cli(&["exact", "--in", inst.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["chromatic_index"], 5);
}

#[test]
fn bench_csv_is_reproducible() {
    let args =
        ["bench", "--families", "projective-plane:3,degenerate:12", "--seeds", "0..2", "--algos", "dsatur", "--no-timing"];
    let (code, first, _) = cli(&args);
    assert_eq!(code, EXIT_OK);
    let mut lines = first.lines();
    assert_eq!(lines.next(), Some("family,n,m,algo,seed,colors,proper,wall_ms"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.ends_with(",true,0")), "{rows:?}");
    assert_eq!(cli(&args).1, first);
}

#[test]
fn order_output_has_no_failures() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("rl.lhg");
    let gen = ["gen", "--family", "random-linear", "--n", "40", "--m", "60", "--sizes", "2:2,3:1", "--seed", "3"];
    let mut args = gen.to_vec();
    args.extend(["--out", inst.to_str().unwrap()]);
    assert_eq!(cli(&args).0, EXIT_OK);
    let (code, out, _) = cli(&["order", "--in", inst.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["audit_failures"], serde_json::json!([]));
    assert!(v["postconditions"].get("Ok").is_some(), "{}", v["postconditions"]);
}
