use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[model]
ssl_dim = 8
fusion_hidden = 8
spk_dim = 16
memory_dim = 8
memory_heads = 2
memory_blocks = 1
context_dim = 8
context_heads = 2
context_blocks = 1
context_ff = 16
unet_hidden = 8
unet_levels = 2
unet_blocks = 1
time_dim = 8
norm_groups = 2

[rvq]
codebook_size = 16

[train]
batch_size = 2
crop_samples = 10240
steps = 50

[reference]
min_secs = 1.0
max_secs = 1.5

[eval]
griffin_lim_iters = 4
"#;

fn vcflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcflow")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_round_through_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let o = vcflow(&["synth-corpus", "--out", s(&corpus), "--speakers", "2", "--utts", "3", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(corpus.join("spk01_utt002.wav").exists());
    assert!(corpus.join("spk01_utt002.lab").exists());

    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let ckpt = dir.path().join("model.ckpt");
    let o = vcflow(&["train", "--config", s(&cfg), "--corpus", s(&corpus), "--out", s(&ckpt), "--steps", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(dir.path().join("model.ckpt.loss.tsv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "step\tL_total\tL_cfm\tL_vq");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split('\t').count() == 4));

    let out = dir.path().join("out.wav");
    let src = corpus.join("spk00_utt000.wav");
    let refw = corpus.join("spk01_utt000.wav");
    let args = [
        "convert", "--ckpt", s(&ckpt), "--source", s(&src), "--ref", s(&refw), "--out", s(&out), "--steps", "4",
        "--cfg", "0.5", "--seed", "9",
    ];
    let o = vcflow(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = fs::read(&out).unwrap();
    assert_eq!(code(&vcflow(&args)), 0);
    assert_eq!(fs::read(&out).unwrap(), first);

    let report = dir.path().join("report.tsv");
    let o = vcflow(&["eval", "--ckpt", s(&ckpt), "--corpus", s(&corpus), "--report", s(&report)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    for key in ["secs_proxy", "f0_ratio", "content_acc", "mel_l2", "rtf_total"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{key}\t"))), "{key} missing");
    }
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(code(&vcflow(&[])), 2);
    assert_eq!(code(&vcflow(&["synth-corpus", "--out", "x"])), 2);
    assert_eq!(code(&vcflow(&["convert", "--bogus"])), 2);
    assert_eq!(code(&vcflow(&["synth-corpus", "--out", "x", "--speakers", "one", "--utts", "1", "--seed", "1"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    assert_eq!(code(&vcflow(&["synth-corpus", "--out", s(&out), "--speakers", "1", "--utts", "2", "--seed", "1"])), 2);
}

#[test]
fn invalid_inputs_exit_3_and_bad_checkpoints_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.wav");
    fs::write(&junk, b"not a wav file").unwrap();
    let ckpt = dir.path().join("junk.ckpt");
    fs::write(&ckpt, b"VCFLOWCK but truncated").unwrap();

    let missing = dir.path().join("missing");
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[train]\nsteps = 1\n").unwrap();
    let o = vcflow(&["train", "--config", s(&cfg), "--corpus", s(&missing), "--out", s(&ckpt)]);
    assert_eq!(code(&o), 3);
    fs::write(&cfg, "[train]\nno_such_key = 1\n").unwrap();
    let o = vcflow(&["train", "--config", s(&cfg), "--corpus", s(&missing), "--out", s(&ckpt)]);
    assert_eq!(code(&o), 3);

    let o = vcflow(&["eval", "--ckpt", s(&ckpt), "--corpus", s(&missing), "--report", s(&junk)]);
    assert_eq!(code(&o), 4);
    let o = vcflow(&["convert", "--ckpt", s(&missing), "--source", s(&junk), "--ref", s(&junk), "--out", s(&junk)]);
    assert_eq!(code(&o), 4);

    // a valid checkpoint with an unreadable source wav
    let corpus = dir.path().join("corpus");
    assert_eq!(code(&vcflow(&["synth-corpus", "--out", s(&corpus), "--speakers", "2", "--utts", "3", "--seed", "1"])), 0);
    fs::write(&cfg, TINY).unwrap();
    let good = dir.path().join("good.ckpt");
    let o = vcflow(&["train", "--config", s(&cfg), "--corpus", s(&corpus), "--out", s(&good), "--steps", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("o.wav");
    let o = vcflow(&["convert", "--ckpt", s(&good), "--source", s(&junk), "--ref", s(&junk), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let src = corpus.join("spk00_utt000.wav");
    let o = vcflow(&["convert", "--ckpt", s(&good), "--source", s(&src), "--ref", s(&src), "--out", s(&out), "--steps", "0"]);
    assert_eq!(code(&o), 2);
}
