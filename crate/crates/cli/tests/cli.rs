use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[model]
d_p = 8
k = 4
c = 1
n_phonemes = 12
attention_pace = 5.0

[train]
lr = 3e-3
epochs = 2
noise_std = 0.5

[synth]
max_frames = 40

[fit]
iterations = 5
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftbuf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A generated corpus, a config and trained weights in a temp dir.
struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    manifest: PathBuf,
    weights: PathBuf,
}

fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let config = root.join("run.toml");
    fs::write(&config, SMALL).unwrap();
    let corpus = root.join("corpus");
    ok(&["gen-corpus", "--config", s(&config), "--sentences", "3", "--seed", "4", "--out", s(&corpus)]);
    let manifest = corpus.join("manifest.tsv");
    let weights = root.join("model.vlw");
    ok(&["train", "--config", s(&config), "--manifest", s(&manifest), "--seed", "1", "--out", s(&weights)]);
    Workspace { _dir: dir, root, config, manifest, weights }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["inspect", "--no-such-flag"]), 1);
    assert_eq!(code(&["synth", "--out", "x.vlf"]), 1);
    assert_eq!(code(&["synth", "--phonemes", "1 2", "--weights", "w.vlw"]), 1);
    assert_eq!(code(&["eval-id"]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.vlw");
    fs::write(&junk, b"not weights").unwrap();
    let out = dir.path().join("o.vlf");
    assert_eq!(code(&["synth", "--weights", s(&junk), "--phonemes", "1", "--out", s(&out)]), 2);
    assert_eq!(code(&["inspect", "--weights", s(&dir.path().join("missing.vlw"))]), 2);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nwidth = 3\n").unwrap();
    assert_eq!(code(&["inspect", "--config", s(&cfg)]), 2);
    fs::write(&cfg, "[model]\nk = 0\n").unwrap();
    assert_eq!(code(&["inspect", "--config", s(&cfg)]), 2);
    assert!(!out.exists());
}

#[test]
fn inspect_reports_the_default_size() {
    let text = ok(&["inspect"]);
    assert!(text.lines().any(|l| l == "parameters\t12995661"), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains('x') && l.contains('\t')).count(), 16);
}

#[test]
fn gradcheck_exit_status_follows_the_tolerance() {
    let text = ok(&["gradcheck", "--seed", "1"]);
    assert!(text.contains("PASS"), "{text}");
    assert_eq!(code(&["gradcheck", "--seed", "1", "--per-tensor", "3", "--tol", "0"]), 3);
}

#[test]
fn bench_prints_throughput() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.toml");
    fs::write(&cfg, "[model]\nd_p = 16\nd_o = 8\nk = 5\n").unwrap();
    let text = ok(&["bench", "--config", s(&cfg), "--phonemes", "10", "--frames", "50"]);
    for key in ["parameters", "frames_per_sec", "real_time_factor"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "{key} missing:\n{text}");
    }
    assert!(text.contains("frames\t50"));
}

#[test]
fn end_to_end_on_a_synthetic_corpus() {
    let w = workspace();
    let (cfg, weights, manifest) = (s(&w.config), s(&w.weights), s(&w.manifest));
    let inspect = ok(&["inspect", "--weights", weights]);
    assert!(inspect.contains("d_p 8 d_o 8 k 4 c 1 n_phonemes 12 n_speakers 2"), "{inspect}");

    let a = w.root.join("a.vlf");
    let b = w.root.join("b.vlf");
    let trace = w.root.join("a.trace");
    ok(&[
        "synth",
        "--config",
        cfg,
        "--weights",
        weights,
        "--phonemes",
        "1 2 3",
        "--speaker",
        "1",
        "--trace",
        s(&trace),
        "--out",
        s(&a),
    ]);
    ok(&["synth", "--config", cfg, "--weights", weights, "--phonemes", "1,2,3", "--speaker", "1", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(fs::metadata(&trace).unwrap().len() > 16);

    let same = ok(&["eval-mcd", s(&a), s(&b)]);
    assert!(same.starts_with("mcd_dtw\t0.000000"), "{same}");
    let other = w.root.join("c.vlf");
    ok(&["synth", "--config", cfg, "--weights", weights, "--phonemes", "4 5", "--speaker", "0", "--out", s(&other)]);
    let diff = ok(&["eval-mcd", s(&a), s(&other), "--range", "1..8"]);
    let v: f64 = diff.lines().next().unwrap().split('\t').nth(1).unwrap().parse().unwrap();
    assert!(v > 0.0);

    let id = ok(&["eval-id", "--manifest", manifest, s(&a), s(&other), "--expect", "1"]);
    assert_eq!(id.lines().count(), 3, "{id}");

    let z = w.root.join("z.txt");
    ok(&[
        "fit-speaker",
        "--config",
        cfg,
        "--weights",
        weights,
        "--manifest",
        manifest,
        "--speaker",
        "0",
        "--out",
        s(&z),
    ]);
    assert_eq!(fs::read_to_string(&z).unwrap().split_whitespace().count(), 8);
    let fitted = w.root.join("fitted.vlf");
    ok(&[
        "synth",
        "--config",
        cfg,
        "--weights",
        weights,
        "--phonemes",
        "1 2 3",
        "--speaker-file",
        s(&z),
        "--out",
        s(&fitted),
    ]);

    let primed = w.root.join("primed.vlf");
    ok(&[
        "prime-synth",
        "--config",
        cfg,
        "--weights",
        weights,
        "--prime-phonemes",
        "7 8 9",
        "--phonemes",
        "1 2 3",
        "--speaker",
        "1",
        "--out",
        s(&primed),
    ]);
    assert_ne!(fs::read(&primed).unwrap(), fs::read(&a).unwrap());

    let sig = ok(&["significance", "--weights", weights]);
    assert_eq!(sig.lines().count(), 5);
    assert!(sig.starts_with("column\tn_u\tn_a\tn_o"));
}

#[test]
fn text_input_goes_through_the_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    fs::write(&cfg, "[model]\nd_p = 8\nd_o = 4\nk = 3\nc = 1\nn_speakers = 1\n[synth]\nmax_frames = 5\n").unwrap();
    let dict = dir.path().join("dict.txt");
    fs::write(&dict, "HELLO  HH AH0 L OW1\n").unwrap();
    let weights = dir.path().join("w.vlw");
    let corpus = dir.path().join("c");
    ok(&["gen-corpus", "--speakers", "1", "--sentences", "1", "--d-o", "4", "--n-phonemes", "42", "--out", s(&corpus)]);
    ok(&[
        "train",
        "--config",
        s(&cfg),
        "--manifest",
        s(&corpus.join("manifest.tsv")),
        "--lr",
        "0",
        "--out",
        s(&weights),
    ]);
    let out = dir.path().join("h.vlf");
    let text = ok(&[
        "synth",
        "--weights",
        s(&weights),
        "--config",
        s(&cfg),
        "--dict",
        s(&dict),
        "--text",
        "hello",
        "--out",
        s(&out),
    ]);
    assert!(text.starts_with("6 phonemes -> 5 frames"), "{text}");
    assert_eq!(code(&["synth", "--weights", s(&weights), "--text", "hello", "--out", s(&out)]), 1);
    assert_eq!(
        code(&["synth", "--weights", s(&weights), "--dict", s(&dict), "--text", "goodbye", "--out", s(&out)]),
        2
    );
}

#[test]
fn resumed_training_writes_the_same_weights() {
    let w = workspace();
    let (cfg, manifest) = (s(&w.config), s(&w.manifest));
    let straight = w.root.join("straight.vlw");
    ok(&["train", "--config", cfg, "--manifest", manifest, "--seed", "2", "--epochs", "3", "--out", s(&straight)]);

    let ck = w.root.join("ck.bin");
    let half = w.root.join("half.vlw");
    let log = w.root.join("log.tsv");
    ok(&[
        "train",
        "--config",
        cfg,
        "--manifest",
        manifest,
        "--seed",
        "2",
        "--epochs",
        "1",
        "--checkpoint",
        s(&ck),
        "--log",
        s(&log),
        "--out",
        s(&half),
    ]);
    assert!(fs::read_to_string(&log).unwrap().starts_with("# seed 2\nepoch\t"));
    let resumed = w.root.join("resumed.vlw");
    ok(&[
        "train",
        "--config",
        cfg,
        "--manifest",
        manifest,
        "--seed",
        "2",
        "--epochs",
        "3",
        "--resume",
        s(&ck),
        "--out",
        s(&resumed),
    ]);
    assert_eq!(fs::read(&straight).unwrap(), fs::read(&resumed).unwrap());
    assert_ne!(fs::read(&straight).unwrap(), fs::read(&half).unwrap());
    assert_eq!(
        code(&["train", "--manifest", manifest, "--resume", s(&ck), "--weights", s(&half), "--out", s(&resumed)]),
        1
    );
}

#[test]
fn divergence_exits_with_three() {
    let w = workspace();
    let cfg = w.root.join("diverge.toml");
    fs::write(&cfg, SMALL.replace("epochs = 2\n", "epochs = 2\ndivergence_threshold = 0.0\n")).unwrap();
    let out = w.root.join("d.vlw");
    assert_eq!(code(&["train", "--config", s(&cfg), "--manifest", s(&w.manifest), "--out", s(&out)]), 3);
    assert!(!out.exists());
}
