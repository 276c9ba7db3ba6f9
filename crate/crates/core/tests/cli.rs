use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use prunekit::cli;
use prunekit::pipeline::{self, PruneConfig};
use prunekit::repmax;
use prunekit::synth::{self, SynthSpec};
use prunekit::tokenset::{self, FileFormat, Modality, Selection, TokenMatrix};
use serde_json::Value;

const SUBCOMMANDS: [&str; 10] = [
    "score", "prune", "objective", "exact", "baseline", "ablation", "synth", "diagnose", "bench", "sweep",
];

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("prunekit").chain(args.iter().copied());
    let code = cli::run_with(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares `actual` with a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; rerun with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, expected, "help text drifted from {}", path.display());
}

fn write_pair(dir: &Path, spec: &SynthSpec) -> (PathBuf, PathBuf, TokenMatrix, TokenMatrix) {
    let (v, t) = synth::generate(spec).unwrap();
    let (vp, tp) = (dir.join("v.tpk"), dir.join("t.tpk"));
    tokenset::write_token_file(&v, &vp, FileFormat::Binary).unwrap();
    tokenset::write_token_file(&t, &tp, FileFormat::Binary).unwrap();
    (vp, tp, v, t)
}

fn small_spec() -> SynthSpec {
    SynthSpec {
        n_visual: 40,
        n_textual: 6,
        dim: 12,
        ..SynthSpec::default()
    }
}

fn without_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings_ms");
    v
}

#[test]
fn help_matches_golden_files() {
    let top = run(&["--help"]);
    assert_eq!(top.code, 0);
    check_golden("help.txt", &top.stdout);
    for sub in SUBCOMMANDS {
        let r = run(&[sub, "--help"]);
        assert_eq!(r.code, 0, "{sub}");
        check_golden(&format!("help-{sub}.txt"), &r.stdout);
    }
}

#[test]
fn help_lists_paper_defaults() {
    let text = run(&["prune", "--help"]).stdout;
    for needle in [
        "--stage1-ratio <STAGE1_RATIO>  Fraction of tokens surviving stage 1 [default: 0.8]",
        "[default: l2]",
        "[default: cos]",
        "Neighbours for the mi-knn metric [default: 3]",
    ] {
        assert!(text.contains(needle), "missing {needle:?} in\n{text}");
    }
}

#[test]
fn prune_writes_report_matching_library() {
    let dir = tempfile::tempdir().unwrap();
    let (vp, tp, v, t) = write_pair(dir.path(), &small_spec());
    let out = dir.path().join("report.json");
    let r = run(&[
        "prune",
        "--visual",
        vp.to_str().unwrap(),
        "--text",
        tp.to_str().unwrap(),
        "--keep",
        "8",
        "--stage1-ratio",
        "0.8",
        "--cross-metric",
        "l2",
        "--intra-metric",
        "cos",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());

    let from_cli: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let report = pipeline::prune(&v, &t, &PruneConfig::new(8).with_ratio(0.8)).unwrap();
    let from_lib = serde_json::to_value(&report).unwrap();
    assert_eq!(without_timings(from_cli.clone()), without_timings(from_lib));
    assert_eq!(from_cli["stage1_indices"].as_array().unwrap().len(), 32);
    assert_eq!(from_cli["stage2_indices"].as_array().unwrap().len(), 8);
}

#[test]
fn exact_on_thirty_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = synth::standard_normal(Modality::Visual, 30, 6, 9);
    let path = dir.path().join("v.tpk");
    tokenset::write_token_file(&tokens, &path, FileFormat::Binary).unwrap();
    let r = run(&["exact", "--tokens", path.to_str().unwrap(), "--keep", "4"]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let sim = repmax::build_similarity(&tokens, &Selection::all(30)).unwrap();
    let expected = repmax::exact_solve(&sim, 4).unwrap();
    let got: Selection = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(got, expected);
    assert_eq!(r.stdout, format!("{}\n", serde_json::to_string_pretty(&expected).unwrap()));
}

#[test]
fn exact_over_cap_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = synth::standard_normal(Modality::Visual, 30, 6, 9);
    let path = dir.path().join("v.tpk");
    tokenset::write_token_file(&tokens, &path, FileFormat::Binary).unwrap();
    let r = run(&["exact", "--tokens", path.to_str().unwrap(), "--keep", "4", "--cap", "1000"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("27405"), "{}", r.stderr);
}

#[test]
fn mismatched_dims_exit_two_naming_both() {
    let dir = tempfile::tempdir().unwrap();
    let v = synth::standard_normal(Modality::Visual, 10, 8, 1);
    let t = synth::standard_normal(Modality::Textual, 3, 12, 2);
    let (vp, tp) = (dir.path().join("v.tpk"), dir.path().join("t.tpk"));
    tokenset::write_token_file(&v, &vp, FileFormat::Binary).unwrap();
    tokenset::write_token_file(&t, &tp, FileFormat::Binary).unwrap();
    let r = run(&["prune", "--visual", vp.to_str().unwrap(), "--text", tp.to_str().unwrap(), "--keep", "4"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains('8') && r.stderr.contains("12"), "{}", r.stderr);
}

#[test]
fn exit_code_classes() {
    // Usage errors.
    assert_eq!(run(&[]).code, 1);
    assert_eq!(run(&["prune", "--bogus"]).code, 1);
    assert_eq!(run(&["score", "--visual", "a", "--text", "b", "--cross-metric", "hamming"]).code, 1);

    // Data errors: missing file, zero-norm token.
    let missing = run(&["exact", "--tokens", "/nonexistent/v.tpk", "--keep", "2"]);
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let zero = TokenMatrix::from_rows(Modality::Visual, &[[1.0f32, 0.0], [0.0, 0.0], [0.0, 1.0]]).unwrap();
    let path = dir.path().join("z.tpk");
    tokenset::write_token_file(&zero, &path, FileFormat::Binary).unwrap();
    let r = run(&["baseline", "--tokens", path.to_str().unwrap(), "--keep", "2"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("row 1"), "{}", r.stderr);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let (vp, tp, _, _) = write_pair(dir.path(), &small_spec());
    let args = |threads: &'static str| {
        let r = run(&[
            "--threads",
            threads,
            "ablation",
            "--visual",
            vp.to_str().unwrap(),
            "--text",
            tp.to_str().unwrap(),
            "--keep",
            "6",
            "--order",
            "repmax-align",
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        without_timings(serde_json::from_str(&r.stdout).unwrap())
    };
    assert_eq!(args("1"), args("3"));
}

#[test]
fn score_csv_marks_selection() {
    let dir = tempfile::tempdir().unwrap();
    let (vp, tp, v, t) = write_pair(dir.path(), &small_spec());
    let r = run(&[
        "score",
        "--format",
        "csv",
        "--visual",
        vp.to_str().unwrap(),
        "--text",
        tp.to_str().unwrap(),
        "--keep",
        "5",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "index,score,selected");
    assert_eq!(lines.len(), 41);
    let scores = prunekit::alignment::score_l2(&v, &t).unwrap();
    let top = prunekit::alignment::select_top(&scores, 5).unwrap();
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), scores.values[i]);
        assert_eq!(fields[2] == "1", top.indices().contains(&i));
    }
}

#[test]
fn objective_of_saved_selection() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = synth::standard_normal(Modality::Visual, 12, 5, 4);
    let tp = dir.path().join("v.csv");
    tokenset::write_token_file(&tokens, &tp, FileFormat::Csv).unwrap();
    let sel = Selection::new(12, vec![3, 0, 7], None).unwrap();
    let sp = dir.path().join("sel.json");
    tokenset::write_selection(&sel, &sp).unwrap();

    let r = run(&["objective", "--tokens", tp.to_str().unwrap(), "--selection", sp.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let got: Value = serde_json::from_str(&r.stdout).unwrap();
    let reread = tokenset::read_token_file(&tp).unwrap();
    let want = pipeline::set_objective(&reread, sel.indices(), repmax::IntraMetric::CosineDissim)
        .unwrap()
        .unwrap();
    assert_eq!(got["objective"].as_f64().unwrap(), want);
    assert_eq!(got["tokens"], 3);
}

#[test]
fn synth_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let r = run(&["synth", "--n-visual", "50", "--n-textual", "5", "--dim", "6", "--dir", d]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = tokenset::read_token_file(dir.path().join("visual.tpk")).unwrap();
    assert_eq!((v.rows(), v.dim(), v.modality()), (50, 6, Modality::Visual));

    let r = run(&[
        "diagnose",
        "--visual",
        &format!("{d}/visual.tpk"),
        "--text",
        &format!("{d}/textual.tpk"),
        "--pairs",
        "500",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["per_dim_std"].as_array().unwrap().len(), 6);
}

#[test]
fn binary_honours_thread_env_fallback() {
    let exe = env!("CARGO_BIN_EXE_prunekit");
    let bad = Command::new(exe)
        .args(["bench", "--n", "20", "--m", "2", "--d", "4", "--keep", "3", "--repeats", "3"])
        .env("PRUNEKIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("PRUNEKIT_THREADS"));

    let ok = Command::new(exe)
        .args(["--format", "csv", "bench", "--n", "20", "--m", "2", "--d", "4", "--keep", "3", "--repeats", "3"])
        .env("PRUNEKIT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("n,m,d,"));
}
