//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speechkit::audio::{read_wav, write_wav, WavEncoding};
use speechkit::bench::{self, Enhancer, REALTIME_THRESHOLD_MS};
use speechkit::dsp::{self, Window};
use speechkit::metrics::{si_sdr_slices, stoi, thd, thd_norm, warpq, warpq_norm, ThdConfig, WarpqConfig};
use speechkit::mixer::{self, MixtureManifest, MixtureSpec, Split};
use speechkit::separator::{self, MaskActivation, NormKind, SeparatorConfig, SeparatorError, SeparatorModel};
use speechkit::synth;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_processing_time_model() -> Check {
    let mut got = Vec::new();
    for (rate, want) in [(8000, 12.5), (16000, 25.0), (48000, 75.0)] {
        let (_, per_second) = bench::theoretical_frame_time(256, rate, 0.4).map_err(|e| e.to_string())?;
        ensure(per_second == want, || format!("{rate} Hz: {per_second} != {want}"))?;
        got.push(per_second);
    }
    Ok(format!("{got:?} ms per second of audio"))
}

fn c2_thd() -> Check {
    let cfg = ThdConfig::default();
    let mut notes = Vec::new();
    for rate in [8000u32, 16000, 48000] {
        let len = 2 * rate as usize;
        let pure = thd(&synth::sine(200.0, 0.8, rate, len), &cfg).map_err(|e| e.to_string())?;
        let two = thd(&synth::harmonic_tone(200.0, &[1.0, 0.1], rate, len), &cfg).map_err(|e| e.to_string())?;
        let three =
            thd(&synth::harmonic_tone(200.0, &[1.0, 0.1, 0.1], rate, len), &cfg).map_err(|e| e.to_string())?;
        let want3 = 100.0 * 0.02f64.sqrt();
        ensure(pure <= 0.1, || format!("{rate} Hz pure tone THD {pure:.4}%"))?;
        ensure((two - 10.0).abs() <= 0.2, || format!("{rate} Hz 2nd harmonic THD {two:.4}%"))?;
        ensure((three - want3).abs() <= 0.3, || format!("{rate} Hz 2nd+3rd THD {three:.4}%"))?;
        notes.push(format!("{rate} Hz: pure {pure:.3}%, h2 {two:.3}%, h2+h3 {three:.3}%"));
    }
    Ok(notes.join("; "))
}

fn c3_normalizations() -> Check {
    ensure(thd_norm(5.0, 2.0) == 3.0, || "thd_norm(5,2)".into())?;
    ensure(warpq_norm(2.0, 1.0) == 0.5, || "warpq_norm(2,1)".into())?;
    for x in [0.0, 0.37, 4.25, 123.0] {
        ensure(thd_norm(x, x) == 0.0, || format!("thd_norm({x},{x})"))?;
        ensure(warpq_norm(x, x) == 1.0, || format!("warpq_norm({x},{x})"))?;
    }
    Ok("thd_norm(5,2)=3, warpq_norm(2,1)=0.5, identities exact".into())
}

/// Textbook SI-SDR on raw vectors, no centring.
fn si_sdr_oracle(est: &[f64], reference: &[f64]) -> f64 {
    let dot: f64 = est.iter().zip(reference).map(|(a, b)| a * b).sum();
    let energy: f64 = reference.iter().map(|r| r * r).sum();
    let alpha = dot / energy;
    let target: f64 = reference.iter().map(|r| (alpha * r).powi(2)).sum();
    let noise: f64 = est.iter().zip(reference).map(|(e, r)| (e - alpha * r).powi(2)).sum();
    10.0 * (target / noise).log10()
}

fn c4_si_sdr() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for _ in 0..1000 {
        let r: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mix = rng.gen_range(0.0..1.0);
        let e: Vec<f64> = r.iter().map(|v| mix * v + rng.gen_range(-1.0..1.0)).collect();
        let ours = si_sdr_slices(&e, &r, false).map_err(|x| x.to_string())?;
        worst = worst.max((ours - si_sdr_oracle(&e, &r)).abs());
        let centred = si_sdr_slices(&e, &r, true).map_err(|x| x.to_string())?;
        for c in [0.1, 1.0, 7.3] {
            let scaled: Vec<f64> = e.iter().map(|v| c * v).collect();
            let v = si_sdr_slices(&scaled, &r, true).map_err(|x| x.to_string())?;
            worst_scale = worst_scale.max((v - centred).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("oracle deviation {worst:e} dB"))?;
    ensure(worst_scale <= 1e-9, || format!("scale deviation {worst_scale:e} dB"))?;
    Ok(format!("max |oracle diff| {worst:.2e} dB, max scale drift {worst_scale:.2e} dB"))
}

fn c5_stoi() -> Check {
    let signals = [
        synth::speech_like(16000, 1.5, 1),
        synth::speech_like(8000, 2.0, 2),
        synth::speech_like(48000, 1.2, 3),
    ];
    let mut selfs = Vec::new();
    for x in &signals {
        let v = stoi(x, x).map_err(|e| e.to_string())?;
        ensure(v >= 0.999, || format!("stoi(x,x) = {v}"))?;
        selfs.push(v);
    }
    let x = synth::speech_like(16000, 3.0, 7);
    let mut scores = Vec::new();
    for snr in [-10.0, 0.0, 10.0, 20.0] {
        scores.push(stoi(&synth::add_noise_at_snr(&x, snr, 11), &x).map_err(|e| e.to_string())?);
    }
    ensure(scores.windows(2).all(|w| w[0] < w[1]), || format!("not increasing: {scores:?}"))?;
    Ok(format!(
        "self {:?}; -10/0/10/20 dB -> {:.3?}",
        selfs.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
        scores
    ))
}

fn c6_warpq() -> Check {
    let cfg = WarpqConfig::default();
    let x = synth::speech_like(16000, 3.0, 4);
    let own = warpq(&x, &x, &cfg).map_err(|e| e.to_string())?;
    ensure(own <= 1e-6, || format!("warpq(x,x) = {own}"))?;
    let delayed = warpq(&x, &synth::delayed(&x, 1600), &cfg).map_err(|e| e.to_string())?;
    let noisy = warpq(&x, &synth::add_noise_at_snr(&x, 0.0, 2), &cfg).map_err(|e| e.to_string())?;
    ensure(delayed < noisy, || format!("delayed {delayed} >= noisy {noisy}"))?;
    Ok(format!("self {own:.1e}, 100 ms delay {delayed:.3}, 0 dB noise {noisy:.3}"))
}

fn brute_force_frames(t: usize, l: usize, s: usize) -> usize {
    (0..)
        .map(|i| i * s)
        .take_while(|start| start + l <= t)
        .count()
}

fn c7_separator() -> Check {
    let start = Instant::now();
    let mut lengths_checked = 0;
    for rate in [8000u32, 16000, 48000] {
        let model = SeparatorModel::init_random(SeparatorConfig::preset(rate), 0).map_err(|e| e.to_string())?;
        for secs in [1usize, 5, 10] {
            let x = synth::speech_like(rate, secs as f64, secs as u64);
            let y = model.enhance(&x).map_err(|e| e.to_string())?;
            ensure(y.len() == x.len(), || format!("{rate} Hz {secs} s: {} != {}", y.len(), x.len()))?;
            lengths_checked += 1;
        }
    }

    let cfg = SeparatorConfig::preset(16000);
    let x = synth::speech_like(16000, 1.0, 9);
    let a = SeparatorModel::init_random(cfg.clone(), 42).map_err(|e| e.to_string())?;
    let b = SeparatorModel::init_random(cfg, 42).map_err(|e| e.to_string())?;
    let (ya, yb) = (a.enhance(&x).map_err(|e| e.to_string())?, b.enhance(&x).map_err(|e| e.to_string())?);
    ensure(
        ya.samples().iter().zip(yb.samples()).all(|(p, q)| p.to_bits() == q.to_bits()),
        || "same seed gave different outputs".into(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for i in 0..100u64 {
        let rate = [8000, 16000, 48000][rng.gen_range(0..3)];
        let cfg = SeparatorConfig {
            encoder_filters: rng.gen_range(8..64),
            bottleneck: rng.gen_range(4..32),
            conv_channels: rng.gen_range(4..48),
            kernel_size: [3, 5][rng.gen_range(0..2)],
            blocks_per_repeat: rng.gen_range(1..4),
            repeats: rng.gen_range(1..3),
            norm_kind: [NormKind::Global, NormKind::Cumulative, NormKind::Channel][rng.gen_range(0..3)],
            mask_activation: MaskActivation::Sigmoid,
            ..SeparatorConfig::preset(rate)
        };
        let model = SeparatorModel::init_random(cfg, i).map_err(|e| e.to_string())?;
        let len = rng.gen_range(1..3000);
        let amp = 10f64.powf(rng.gen_range(-3.0..1.0));
        let x = synth::white_noise(len, amp, rate, 1000 + i);
        let frames = model.encode(&x).map_err(|e| e.to_string())?;
        let mask = model.estimate_mask(frames.view()).map_err(|e| e.to_string())?;
        ensure(mask.dim() == frames.dim(), || "mask shape differs from frames".into())?;
        for &m in mask.iter() {
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    ensure((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi), || format!("mask range [{lo}, {hi}]"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let l = 2 * rng.gen_range(1..64);
        let t = rng.gen_range(1..20000);
        let cfg = SeparatorConfig { kernel_len: l, ..SeparatorConfig::preset(8000) };
        let want = brute_force_frames(cfg.padded_len(t), l, l / 2);
        ensure(cfg.num_frames(t) == want, || format!("T={t} L={l}: {} vs {want}", cfg.num_frames(t)))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{lengths_checked} length checks, bit-identical reruns, 100 masks within [{lo:.3}, {hi:.3}], 50 frame counts"
    ))
}

fn c8_resampling() -> Check {
    let x = synth::sine(300.0, 0.5, 48000, 96000);
    let down = dsp::downsample(&x, 8000).map_err(|e| e.to_string())?;
    let up = dsp::upsample_poly(&down, 48000).map_err(|e| e.to_string())?;
    let spec = dsp::magnitude_spectrum(&up, 65536, Window::Hann).map_err(|e| e.to_string())?;
    let peak = spec.peak_in(20.0, 24000.0).ok_or("no peak")?;
    ensure((peak.frequency_hz - 300.0).abs() <= 1.0, || format!("peak at {} Hz", peak.frequency_hz))?;

    let hi = synth::sine(5000.0, 0.5, 48000, 96000);
    let hi_down = dsp::downsample(&hi, 8000).map_err(|e| e.to_string())?;
    let atten = 20.0 * (hi_down.rms() / hi.rms()).log10();
    ensure(atten <= -40.0, || format!("5 kHz attenuation only {atten:.1} dB"))?;
    Ok(format!("300 Hz round trip peak {:.3} Hz, 5 kHz attenuated {atten:.1} dB", peak.frequency_hz))
}

fn write_corpus(root: &Path, n_speech: usize, n_noise: usize) -> MixtureSpec {
    let (sp, nz) = (root.join("speech"), root.join("noise"));
    std::fs::create_dir_all(&sp).unwrap();
    std::fs::create_dir_all(&nz).unwrap();
    for i in 0..n_speech {
        let clip = synth::speech_like(16000, 0.4 + 0.01 * (i % 20) as f64, i as u64);
        write_wav(&clip, sp.join(format!("s{i:03}.wav")), WavEncoding::Pcm16).unwrap();
    }
    for i in 0..n_noise {
        let clip = synth::white_noise(3000 + 1700 * i, 0.05 + 0.02 * i as f64, 16000, 500 + i as u64);
        write_wav(&clip, nz.join(format!("n{i:02}.wav")), WavEncoding::Pcm16).unwrap();
    }
    MixtureSpec::new(sp, nz, root.join("out"))
}

fn c9_mixer() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = MixtureSpec {
        snr_range_db: (-10.0, 30.0),
        seed: 9,
        ..write_corpus(&dir.path().join("big"), 100, 7)
    };
    let manifest = mixer::generate_dataset(&spec).map_err(|e| e.to_string())?;
    ensure(manifest.rows.len() == 100, || format!("{} rows", manifest.rows.len()))?;
    let mut worst: f64 = 0.0;
    for row in &manifest.rows {
        let clean = read_wav(spec.output_dir.join(&row.clean_path)).map_err(|e| e.to_string())?;
        let mixture = read_wav(spec.output_dir.join(&row.mixture_path)).map_err(|e| e.to_string())?;
        worst = worst.max((mixer::measured_snr_db(&clean, &mixture) - row.snr_db).abs());
    }
    ensure(worst < 0.01, || format!("worst SNR error {worst} dB"))?;

    let small = write_corpus(&dir.path().join("small"), 10, 10);
    let m = mixer::generate_dataset(&small).map_err(|e| e.to_string())?;
    let counts = [m.count(Split::Train), m.count(Split::Eval), m.count(Split::Test)];
    ensure(counts == [8, 1, 1], || format!("split {counts:?}"))?;
    let first = std::fs::read(small.output_dir.join("manifest.csv")).map_err(|e| e.to_string())?;
    let rerun = MixtureSpec { output_dir: dir.path().join("small/out2"), ..small.clone() };
    mixer::generate_dataset(&rerun).map_err(|e| e.to_string())?;
    let second = std::fs::read(rerun.output_dir.join("manifest.csv")).map_err(|e| e.to_string())?;
    ensure(first == second, || "manifests differ across reruns".into())?;
    let parsed = MixtureManifest::read_csv(&small.output_dir.join("manifest.csv")).map_err(|e| e.to_string())?;
    ensure(parsed == m, || "manifest does not parse back".into())?;
    Ok(format!("100 mixtures within {worst:.1e} dB, split {counts:?}, manifests byte-identical"))
}

fn c10_bench_ordering() -> Check {
    // Fixed widths at every rate; only the encoder kernel tracks the rate.
    let family = |rate| SeparatorConfig {
        encoder_filters: 512,
        bottleneck: 32,
        conv_channels: 64,
        blocks_per_repeat: 2,
        repeats: 1,
        ..SeparatorConfig::preset(rate)
    };
    let rates = [8000u32, 16000, 48000];
    let models: Vec<SeparatorModel> = rates
        .iter()
        .map(|&r| SeparatorModel::init_random(family(r), 10))
        .collect::<Result<_, SeparatorError>>()
        .map_err(|e| e.to_string())?;
    let refs: Vec<&dyn Enhancer> = models.iter().map(|m| m as &dyn Enhancer).collect();
    let reports = bench::measure_interleaved(&refs, &[5.0], 15, 1).map_err(|e| e.to_string())?;
    let per_second: Vec<f64> = reports.iter().map(|r| r.median_ms_per_second).collect();

    let presets: Vec<SeparatorModel> = rates
        .iter()
        .map(|&r| SeparatorModel::init_random(SeparatorConfig::preset(r), 10))
        .collect::<Result<_, SeparatorError>>()
        .map_err(|e| e.to_string())?;
    let preset_refs: Vec<&dyn Enhancer> = presets.iter().map(|m| m as &dyn Enhancer).collect();
    let full = bench::measure_interleaved(&preset_refs, &[1.0], 3, 1).map_err(|e| e.to_string())?;
    let full_ms: Vec<String> = full
        .iter()
        .map(|r| format!("{:.0}{}", r.median_ms_per_second, if r.realtime_ok { "" } else { "*" }))
        .collect();
    for r in reports.iter().chain(&full) {
        ensure(
            r.realtime_ok == (r.median_ms_per_second <= REALTIME_THRESHOLD_MS),
            || "realtime flag disagrees with threshold".into(),
        )?;
    }
    let detail = format!(
        "narrow family {:.2?} ms/s at 8/16/48 kHz; default presets {} ms/s (* = over {REALTIME_THRESHOLD_MS} ms)",
        per_second,
        full_ms.join("/")
    );
    ensure(per_second[0] < per_second[1] && per_second[1] < per_second[2], || detail.clone())?;
    Ok(detail)
}

fn c11_container() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m48.ctn");
    let model = SeparatorModel::init_random(SeparatorConfig::preset(48000), 11).map_err(|e| e.to_string())?;
    model.save(&path).map_err(|e| e.to_string())?;
    let back = SeparatorModel::load(&path).map_err(|e| e.to_string())?;
    ensure(back.config() == model.config(), || "config changed".into())?;
    let mut values = 0usize;
    for (name, t) in model.weights().iter() {
        let u = back.weights().get(name).ok_or_else(|| format!("{name} missing"))?;
        ensure(t.shape == u.shape, || format!("{name} shape"))?;
        ensure(
            t.data.iter().zip(&u.data).all(|(a, b)| a.to_bits() == b.to_bits()),
            || format!("{name} differs"),
        )?;
        values += t.data.len();
    }
    let mut bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let target = 8 + header_len + (bytes.len() - 16 - header_len) / 2;
    bytes[target] ^= 0x01;
    match separator::decode_container(&bytes) {
        Err(SeparatorError::ChecksumMismatch) => {}
        other => return Err(format!("corruption not caught: {:?}", other.map(|_| ()))),
    }
    Ok(format!("{} tensors / {values} values bit-exact, flipped bit rejected", model.weights().len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("processing-time model 12.5/25/75 ms", c1_processing_time_model),
        ("THD analytic conformance", c2_thd),
        ("normalization formulas", c3_normalizations),
        ("SI-SDR oracle and scale invariance", c4_si_sdr),
        ("STOI sanity", c5_stoi),
        ("WARP-Q properties", c6_warpq),
        ("separator shape and determinism", c7_separator),
        ("resampling pipeline", c8_resampling),
        ("mixer SNR, split and determinism", c9_mixer),
        ("bench ordering and real-time flag", c10_bench_ordering),
        ("weight container round trip", c11_container),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
