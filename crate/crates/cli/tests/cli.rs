use std::path::Path;
use std::process::{Command, Output};

use momuse::data::synth_visual_features;
use momuse::io::{read_manifest, wav_read, wav_write, FeatureFile};
use momuse::{ModelConfig, ModelParams};

fn momuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momuse")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = momuse(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Tiny checkpoint plus a mixture of `seconds` and matching features.
fn fixture(dir: &Path, seconds: f64) {
    let cfg = ModelConfig::tiny();
    ModelParams::init(&cfg, 2).unwrap().to_checkpoint().save(dir.join("m.momu")).unwrap();
    let n = (seconds * cfg.sample_rate as f64) as usize;
    let y: Vec<f32> = (0..n).map(|i| ((i as f32 * 0.013).sin() * (i as f32 * 0.0007).sin()) * 0.5).collect();
    wav_write(dir.join("mix.wav"), &y, cfg.sample_rate).unwrap();
    let feats = synth_visual_features(&y, &cfg);
    FeatureFile::new(feats, cfg.video_fps as f32).unwrap().save(dir.join("f.momv")).unwrap();
}

#[test]
fn stream_logs_one_record_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 3.0);
    let (ckpt, mix, feat) = (d.join("m.momu"), d.join("mix.wav"), d.join("f.momv"));
    let (out, log) = (d.join("o.wav"), d.join("att.txt"));
    ok(&["stream", "--ckpt", p(&ckpt), "--mix", p(&mix), "--feat", p(&feat), "--out", p(&out), "--log-attention", p(&log)]);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# step a_c_mean.0 replaced.0 a_c_mean.1 replaced.1");
    assert_eq!(lines.len() - 1, 11);
    assert_eq!(lines[1], "1 - init - init");
    for (i, line) in lines[2..].iter().enumerate() {
        let f: Vec<&str> = line.split(' ').collect();
        assert_eq!(f.len(), 5, "{line}");
        assert_eq!(f[0], (i + 2).to_string());
        for pair in f[1..].chunks(2) {
            assert!((0.0..=1.0).contains(&pair[0].parse::<f64>().unwrap()));
            assert!(pair[1] == "0" || pair[1] == "1");
        }
    }
    assert_eq!(wav_read(&out).unwrap().0.len(), 48_000);

    ok(&["stream", "--ckpt", p(&ckpt), "--mix", p(&mix), "--feat", p(&feat), "--out", p(&out), "--log-attention", p(&log), "--no-bank"]);
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().nth(2).unwrap(), "2 - off - off");
}

#[test]
fn extract_keeps_length_and_metrics_cap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 1.3);
    let out = d.join("o.wav");
    ok(&["extract", "--ckpt", p(&d.join("m.momu")), "--mix", p(&d.join("mix.wav")), "--feat", p(&d.join("f.momv")), "--out", p(&out)]);
    assert_eq!(wav_read(&out).unwrap().0.len(), 20_800);

    let mix = d.join("mix.wav");
    let text = ok(&["metrics", "--ref", p(&mix), "--est", p(&mix)]);
    assert!(text.starts_with("si-snr 80.0000 dB\n"), "{text}");
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--out", p(out), "--count", "3", "--seed", "7", "--duration", "1.0"]);
    }
    let records = read_manifest(a.join("manifest.jsonl")).unwrap();
    assert_eq!(records.len(), 3);
    for r in &records {
        for rel in [&r.mixture, &r.target, &r.features] {
            assert_eq!(std::fs::read(a.join(rel)).unwrap(), std::fs::read(b.join(rel)).unwrap(), "{rel}");
        }
        assert!((-10.0..=10.0).contains(&r.snr_db));
        assert!(r.requested_ratio < 0.8);
        let f = FeatureFile::load(a.join(&r.features)).unwrap();
        assert_eq!(f.frames.cols(), 25);
    }
}

#[test]
fn errors_are_single_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 1.0);
    std::fs::write(d.join("bad.momu"), b"MOMX").unwrap();
    let out = momuse(&["extract", "--ckpt", p(&d.join("bad.momu")), "--mix", p(&d.join("mix.wav")), "--feat", p(&d.join("f.momv")), "--out", p(&d.join("o.wav"))]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: reading "), "{err}");
    assert!(err.contains("not a checkpoint"), "{err}");
    assert_eq!(err.lines().count(), 1);

    std::fs::write(d.join("run.cfg"), "stream.theta = 0.7\nstream.bogus = 1\n").unwrap();
    let out = momuse(&["stream", "--ckpt", p(&d.join("m.momu")), "--mix", p(&d.join("mix.wav")), "--feat", p(&d.join("f.momv")), "--out", p(&d.join("o.wav")), "--config", p(&d.join("run.cfg"))]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2") && err.contains("stream.bogus"), "{err}");
}

#[test]
fn stream_rejects_features_at_the_wrong_rate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 1.0);
    let f = FeatureFile::load(d.join("f.momv")).unwrap();
    FeatureFile::new(f.frames, 30.0).unwrap().save(d.join("g.momv")).unwrap();
    let out = momuse(&["stream", "--ckpt", p(&d.join("m.momu")), "--mix", p(&d.join("mix.wav")), "--feat", p(&d.join("g.momv")), "--out", p(&d.join("o.wav"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("30 frames/s, model expects 25"));
}
