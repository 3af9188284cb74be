use std::path::Path;
use std::process::{Command, Output};

use speechkit::audio::{read_wav, write_wav, AudioClip, WavEncoding};
use speechkit::synth;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speechkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_model(dir: &Path, rate: u32) -> std::path::PathBuf {
    let path = dir.join(format!("m{rate}.ctn"));
    let out = run(&[
        "init-model", "--rate", &rate.to_string(), "--output", s(&path),
        "--encoder-filters", "64", "--bottleneck", "16", "--conv-channels", "32",
        "--blocks-per-repeat", "2", "--repeats", "1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

#[test]
fn enhance_resamples_to_the_model_rate_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path(), 8000);
    let input = dir.path().join("in48.wav");
    write_wav(&synth::speech_like(48000, 1.0, 1), &input, WavEncoding::Pcm16).unwrap();
    let output = dir.path().join("out.wav");
    let out = run(&["enhance", "--model", s(&model), "--input", s(&input), "--output", s(&output)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("resampling 48000 Hz -> 8000 Hz"), "{}", stdout(&out));
    let y = read_wav(&output).unwrap();
    assert_eq!(y.sample_rate(), 48000);
    assert_eq!(y.len(), 48000);

    let input8 = dir.path().join("in8.wav");
    write_wav(&synth::speech_like(8000, 1.0, 1), &input8, WavEncoding::Pcm16).unwrap();
    let out = run(&["enhance", "--model", s(&model), "--input", s(&input8), "--output", s(&output)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("no resampling"));
}

#[test]
fn missing_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.wav");
    write_wav(&synth::sine(200.0, 0.5, 8000, 8000), &input, WavEncoding::Pcm16).unwrap();
    let out = run(&[
        "enhance", "--model", s(&dir.path().join("nope.ctn")), "--input", s(&input),
        "--output", s(&dir.path().join("o.wav")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--model"), "{}", stderr(&out));
}

#[test]
fn unknown_flags_and_missing_arguments_exit_two() {
    assert_eq!(code(&run(&["spectrum", "--bogus"])), 2);
    assert_eq!(code(&run(&["evaluate"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

fn voiced(rate: u32, seconds: f64) -> AudioClip {
    let len = (seconds * rate as f64) as usize;
    let tone = synth::harmonic_tone(160.0, &[0.5, 0.08, 0.04], rate, len);
    let env = synth::speech_like(rate, seconds, 3);
    let mixed: Vec<f32> = tone.samples().iter().zip(env.samples()).map(|(a, b)| a + 0.3 * b).collect();
    AudioClip::new(mixed, rate).unwrap()
}

#[test]
fn evaluate_identity_and_triple() {
    let dir = tempfile::tempdir().unwrap();
    let clean48 = dir.path().join("clean48.wav");
    let x = voiced(48000, 2.0);
    write_wav(&x, &clean48, WavEncoding::Float32).unwrap();
    let json = dir.path().join("r.json");
    let out = run(&[
        "evaluate", "--reference", s(&clean48), "--degraded", s(&clean48), "--ref48k", s(&clean48),
        "--out-json", s(&json),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&json).unwrap();
    assert!(text.contains("\"thd_norm\": 0.0"), "{text}");
    assert!(text.contains("\"si_sdr_db\": \"inf\""));

    let clean16 = speechkit::dsp::downsample(&x, 16000).unwrap();
    let noisy = synth::add_noise_at_snr(&clean16, 10.0, 4);
    let (r, d) = (dir.path().join("c16.wav"), dir.path().join("n16.wav"));
    write_wav(&clean16, &r, WavEncoding::Float32).unwrap();
    write_wav(&noisy, &d, WavEncoding::Float32).unwrap();
    let csv = dir.path().join("r.csv");
    let out = run(&[
        "evaluate", "--reference", s(&r), "--degraded", s(&d), "--ref48k", s(&clean48), "--out-csv", s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "si_sdr_db,stoi,thd_percent,thd_norm,warpq_distance,warpq_norm");
    assert_eq!(lines[1].split(',').filter(|f| !f.is_empty()).count(), 6);
}

#[test]
fn evaluate_length_mismatch_names_metric() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    write_wav(&synth::speech_like(16000, 1.0, 1), &a, WavEncoding::Pcm16).unwrap();
    write_wav(&synth::speech_like(16000, 1.2, 1), &b, WavEncoding::Pcm16).unwrap();
    let out = run(&["evaluate", "--reference", s(&a), "--degraded", s(&b)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("LengthMismatch: si_sdr"), "{}", stderr(&out));
}

fn mix_corpus(root: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let (sp, nz) = (root.join("speech"), root.join("noise"));
    std::fs::create_dir_all(&sp).unwrap();
    std::fs::create_dir_all(&nz).unwrap();
    for i in 0..4 {
        write_wav(&synth::speech_like(16000, 0.5, i), sp.join(format!("s{i}.wav")), WavEncoding::Pcm16).unwrap();
    }
    write_wav(&synth::white_noise(3000, 0.1, 16000, 9), nz.join("n.wav"), WavEncoding::Pcm16).unwrap();
    (sp, nz)
}

#[test]
fn mix_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let (sp, nz) = mix_corpus(dir.path());
    let out_a = dir.path().join("a");
    let out = run(&[
        "--seed", "5", "mix", "--speech-dir", s(&sp), "--noise-dir", s(&nz), "--out-dir", s(&out_a), "--snr-db", "0:0",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("train:"));
    let manifest = std::fs::read_to_string(out_a.join("manifest.csv")).unwrap();
    for line in manifest.lines().skip(1) {
        assert_eq!(line.split(',').nth(3).unwrap(), "0.0");
    }
    let out_b = dir.path().join("b");
    let again = run(&[
        "--seed", "5", "mix", "--speech-dir", s(&sp), "--noise-dir", s(&nz), "--out-dir", s(&out_b), "--snr-db", "0:0",
    ]);
    assert_eq!(code(&again), 0);
    assert_eq!(manifest, std::fs::read_to_string(out_b.join("manifest.csv")).unwrap());

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let out = run(&["mix", "--speech-dir", s(&sp), "--noise-dir", s(&empty), "--out-dir", s(&out_b)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("EmptyCorpus"));
    let out = run(&["mix", "--speech-dir", s(&sp), "--noise-dir", s(&nz), "--out-dir", s(&out_b), "--snr-db", "5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bench_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path(), 8000);
    let json = dir.path().join("bench.json");
    let out = run(&["bench", "--model", s(&model), "--repeats", "1", "--out-json", s(&json)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    for row in ["10 s", "5 s", "1 s", "model/s"] {
        assert!(table.lines().any(|l| l.starts_with(row)), "{table}");
    }
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for r in reports {
        assert_eq!(r["theoretical_ms_per_second"], 12.5);
        assert_eq!(r["repeats"], 1);
        let t = &r["measured_ms"];
        assert_eq!(t["min"], t["max"]);
        assert_eq!(t["median"], t["mean"]);
    }
}

#[test]
fn spectrum_and_harmonics_csv() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("tone.wav");
    write_wav(&synth::harmonic_tone(200.0, &[0.8, 0.08], 48000, 96000), &wav, WavEncoding::Float32).unwrap();
    let spec_csv = dir.path().join("spec.csv");
    let out = run(&["spectrum", "--input", s(&wav), "--output", s(&spec_csv), "--fft-size", "4096"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&spec_csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "frequency_hz,magnitude_db");
    assert_eq!(text.lines().count() - 1, 4096 / 2 + 1);

    let h_csv = dir.path().join("h.csv");
    let out = run(&["harmonics", "--input", s(&wav), "--output", s(&h_csv)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&h_csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows[0][0], 1.0);
    assert!((rows[0][1] - 200.0).abs() < 1.0);
    assert_eq!(rows[0][2], 0.0);
    assert_eq!(rows[1][0], 2.0);
    assert!((rows[1][2] + 20.0).abs() < 0.5, "{}", rows[1][2]);

    let silent = dir.path().join("silent.wav");
    write_wav(&AudioClip::zeros(16384, 16000).unwrap(), &silent, WavEncoding::Pcm16).unwrap();
    let out = run(&["harmonics", "--input", s(&silent), "--output", s(&h_csv)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("NoFundamental"));
}

#[test]
fn resample_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    write_wav(&synth::sine(300.0, 0.5, 48000, 48000), &a, WavEncoding::Pcm16).unwrap();
    let out = run(&["resample", "--input", s(&a), "--output", s(&b), "--rate", "8000"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let y = read_wav(&b).unwrap();
    assert_eq!((y.sample_rate(), y.len()), (8000, 8000));
}

#[test]
fn seeded_model_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (p, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let out = run(&[
            "--seed", seed, "init-model", "--rate", "16000", "--output", s(p), "--blocks-per-repeat", "2",
            "--repeats", "1",
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(code(&run(&["init-model", "--rate", "16000", "--output", s(&a), "--repeats", "0"])), 2);
}
