use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn slhz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slhz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bench_args(out: &Path) -> Vec<&str> {
    vec![
        "iid-bench",
        "--sizes",
        "6,12",
        "--epsilons",
        "0.1,0.2",
        "--decoders",
        "bf,bp,mcmc",
        "--trials",
        "200",
        "--seed",
        "7",
        "--output-dir",
        dir_arg(out),
    ]
}

#[test]
fn iid_bench_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(slhz(&bench_args(&a)).status.success());
    let mut args = bench_args(&b);
    args.extend(["--threads", "1"]);
    assert!(slhz(&args).status.success());
    let x = fs::read(a.join("iid_bench.csv")).unwrap();
    let y = fs::read(b.join("iid_bench.csv")).unwrap();
    assert!(!x.is_empty());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("# experiment: iid_bench"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 2 * 3);
}

#[test]
fn config_file_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    let out = tmp.path().join("out");
    fs::write(
        &cfg,
        format!(
            "kind = \"iid_bench\"\nseed = 3\noutput_dir = \"{}\"\n\n[iid]\nsizes = [6]\nepsilons = [0.1]\ndecoders = [\"bf\"]\ntrials = 50\n",
            out.display()
        ),
    )
    .unwrap();
    let o = slhz(&["--config", dir_arg(&cfg), "run"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("iid_bench.csv")).unwrap();
    assert!(text.contains("# seed: 3"));

    let o = slhz(&["--config", dir_arg(&cfg), "--seed", "4", "run"]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("iid_bench.csv")).unwrap();
    assert!(text.contains("# seed: 4"));
}

#[test]
fn invalid_parameters_exit_with_category() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dir_arg(tmp.path());
    let o = slhz(&["iid-bench", "--sizes", "3", "--trials", "5", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = slhz(&["iid-bench", "--decoders", "nope", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = slhz(&["iid-bench", "--sizes", "30", "--decoders", "mwd", "--trials", "1", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn decode_one_reports_parse_position() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("r.csv");
    fs::write(&input, "1,1,1,1\n1,1,-1,1\n1,-1,1,0\n1,1,1,1\n").unwrap();
    let o = slhz(&["decode-one", "--input", dir_arg(&input), "--output-dir", dir_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3") && err.contains("column 4"), "{err}");
}

#[test]
fn decode_one_writes_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let k = 8;
    let mut rows = vec![vec![1i8; k]; k];
    rows[2][5] = -1;
    rows[5][2] = -1;
    let text: String = rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let input = tmp.path().join("r.csv");
    fs::write(&input, text).unwrap();
    for decoder in ["bf", "bp", "mwd"] {
        let out = tmp.path().join(decoder);
        let o = slhz(&[
            "decode-one",
            "--input",
            dir_arg(&input),
            "--decoder",
            decoder,
            "--output-dir",
            dir_arg(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let outcome = fs::read_to_string(out.join("decode_outcome.csv")).unwrap();
        assert!(outcome.contains("converged_code_state"), "{outcome}");
        assert!(out.join("decode_frames.csv").exists());
        assert!(out.join("decode_trace.csv").exists());
    }
}

#[test]
fn gen_instances_then_decode_against_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    let o = slhz(&[
        "gen-instances",
        "--k",
        "6",
        "--count",
        "2",
        "--instance-dir",
        dir_arg(&inst),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = inst.join("instance_00.toml");
    assert!(first.exists());
    assert!(inst.join("instance_01.toml").exists());

    let input = tmp.path().join("ones.csv");
    fs::write(&input, "1,1,1,1,1,1\n".repeat(6)).unwrap();
    let out = tmp.path().join("out");
    let o = slhz(&[
        "decode-one",
        "--input",
        dir_arg(&input),
        "--instance",
        dir_arg(&first),
        "--output-dir",
        dir_arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(out.join("decode_trace.csv")).unwrap();
    assert!(trace.lines().any(|l| l.starts_with("0,")));
}

#[test]
fn error_matrix_requires_landscape() {
    let tmp = tempfile::tempdir().unwrap();
    let o = slhz(&["error-matrix", "--output-dir", dir_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}
