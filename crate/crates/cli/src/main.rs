use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use speechkit::audio::{self, AudioClip, WavEncoding};
use speechkit::bench::{self, Enhancer};
use speechkit::dsp::{self, Window};
use speechkit::metrics::{self, EvalConfig, ThdConfig};
use speechkit::mixer::{self, MixtureSpec, Split};
use speechkit::separator::{self, NormKind, SeparatorConfig, SeparatorModel};

#[derive(Parser, Debug)]
#[command(name = "speechkit", version, about = "Speech enhancement and audio quality toolkit")]
struct Cli {
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enhance a WAV file, resampling to the model rate and back if needed.
    Enhance(EnhanceArgs),
    /// Compute SI-SDR, STOI, THD and WARP-Q for a reference/degraded pair.
    Evaluate(EvaluateArgs),
    /// Build a noisy-speech dataset and manifest.
    Mix(MixArgs),
    /// Time the forward pass on synthesized clips.
    Bench(BenchArgs),
    /// Write the averaged magnitude spectrum as CSV.
    Spectrum(SpectrumArgs),
    /// Write fundamental and harmonic levels as CSV.
    Harmonics(HarmonicsArgs),
    /// Resample a WAV file.
    Resample(ResampleArgs),
    /// Write a randomly initialized (or identity) model container.
    InitModel(InitModelArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Encoding {
    Pcm16,
    Float32,
}

impl From<Encoding> for WavEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Pcm16 => WavEncoding::Pcm16,
            Encoding::Float32 => WavEncoding::Float32,
        }
    }
}

#[derive(Args, Debug)]
struct EnhanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    segment_s: f64,
    #[arg(long, default_value_t = separator::DEFAULT_OVERLAP_S)]
    overlap_s: f64,
    #[arg(long, value_enum, default_value = "float32")]
    encoding: Encoding,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    degraded: PathBuf,
    /// Clean 48 kHz reference; enables the normalized THD and WARP-Q fields.
    #[arg(long)]
    ref48k: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MixArgs {
    #[arg(long)]
    speech_dir: PathBuf,
    #[arg(long)]
    noise_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 16000)]
    sample_rate: u32,
    /// `low:high` in dB.
    #[arg(long, default_value = "-3:12", allow_hyphen_values = true)]
    snr_db: String,
    /// `train,eval,test` fractions.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    split: String,
    #[arg(long)]
    target_hours: Option<f64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Model container; repeat for one column per model.
    #[arg(long)]
    model: Vec<PathBuf>,
    /// Benchmark a randomly initialized default model at this rate; repeatable.
    #[arg(long)]
    random_rate: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    clip_seconds: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 8192)]
    fft_size: usize,
    #[arg(long, default_value = "hamming")]
    window: Window,
}

#[derive(Args, Debug)]
struct HarmonicsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 10)]
    max_harmonics: usize,
}

#[derive(Args, Debug)]
struct ResampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    rate: u32,
    #[arg(long, value_enum, default_value = "float32")]
    encoding: Encoding,
}

#[derive(Args, Debug)]
struct InitModelArgs {
    #[arg(long)]
    rate: u32,
    #[arg(long)]
    output: PathBuf,
    /// Pass-through weights instead of random ones.
    #[arg(long)]
    identity: bool,
    #[arg(long, default_value = "global")]
    norm: NormKind,
    #[arg(long)]
    encoder_filters: Option<usize>,
    #[arg(long)]
    bottleneck: Option<usize>,
    #[arg(long)]
    conv_channels: Option<usize>,
    #[arg(long)]
    blocks_per_repeat: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
}

/// Exit 2: bad invocation. Exit 1: the work itself failed.
enum Failure {
    Usage(String),
    Processing(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Processing(e)
    }
}

type Outcome = Result<(), Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn require_file(flag: &str, path: &Path) -> Outcome {
    if !path.is_file() {
        return usage(format!("{flag}: file not found: {}", path.display()));
    }
    Ok(())
}

fn require_dir(flag: &str, path: &Path) -> Outcome {
    if !path.is_dir() {
        return usage(format!("{flag}: directory not found: {}", path.display()));
    }
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<AudioClip> {
    audio::read_wav(path).with_context(|| format!("reading {}", path.display()))
}

fn write(clip: &AudioClip, path: &Path, encoding: WavEncoding) -> anyhow::Result<()> {
    audio::write_wav(clip, path, encoding).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn enhance(args: EnhanceArgs) -> Outcome {
    require_file("--model", &args.model)?;
    require_file("--input", &args.input)?;
    if !(args.segment_s > 2.0 * args.overlap_s && args.overlap_s >= 0.0) {
        return usage("--segment-s must exceed twice --overlap-s, which must be >= 0");
    }
    let model = SeparatorModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let clip = read(&args.input)?;
    let model_rate = model.config().sample_rate;
    if clip.sample_rate() == model_rate {
        println!("input at {model_rate} Hz matches the model: no resampling");
    } else {
        println!(
            "resampling {} Hz -> {model_rate} Hz for the model, then back to {} Hz",
            clip.sample_rate(),
            clip.sample_rate()
        );
    }
    let out = model
        .enhance_any_rate_with(&clip, args.segment_s, args.overlap_s)
        .map_err(anyhow::Error::from)?;
    write(&out.clip, &args.output, args.encoding.into())?;
    info!("wrote {} ({} samples at {} Hz)", args.output.display(), out.clip.len(), out.clip.sample_rate());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Outcome {
    require_file("--reference", &args.reference)?;
    require_file("--degraded", &args.degraded)?;
    if let Some(p) = &args.ref48k {
        require_file("--ref48k", p)?;
    }
    let reference = read(&args.reference)?;
    let mut degraded = read(&args.degraded)?;
    if degraded.sample_rate() != reference.sample_rate() {
        info!("resampling degraded clip to {} Hz", reference.sample_rate());
        degraded = dsp::resample(&degraded, reference.sample_rate()).map_err(anyhow::Error::from)?;
    }
    let ref48k = args.ref48k.as_deref().map(read).transpose()?;
    let report = metrics::evaluate_pair(&reference, &degraded, ref48k.as_ref(), &EvalConfig::default())
        .map_err(|e| anyhow!("{e}"))?;
    let json = report.to_json();
    if let Some(p) = &args.out_json {
        std::fs::write(p, &json).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.out_csv {
        std::fs::write(p, report.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("{json}");
    Ok(())
}

fn parse_snr_range(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("--snr-db: expected `low:high`, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_split(s: &str) -> Result<[f64; 3], Failure> {
    let bad = || Failure::Usage(format!("--split: expected three fractions summing to 1, got `{s}`"));
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let arr: [f64; 3] = parts.try_into().map_err(|_| bad())?;
    if (arr.iter().sum::<f64>() - 1.0).abs() > 1e-9 || arr.iter().any(|f| *f < 0.0) {
        return Err(bad());
    }
    Ok(arr)
}

fn mix(args: MixArgs, seed: u64) -> Outcome {
    require_dir("--speech-dir", &args.speech_dir)?;
    require_dir("--noise-dir", &args.noise_dir)?;
    if args.sample_rate == 0 {
        return usage("--sample-rate must be positive");
    }
    let spec = MixtureSpec {
        sample_rate: args.sample_rate,
        snr_range_db: parse_snr_range(&args.snr_db)?,
        seed,
        split: parse_split(&args.split)?,
        target_hours: args.target_hours,
        ..MixtureSpec::new(&args.speech_dir, &args.noise_dir, &args.out_dir)
    };
    let manifest = mixer::generate_dataset(&spec).map_err(|e| anyhow!("{e}"))?;
    let mean_snr = manifest.rows.iter().map(|r| r.snr_db).sum::<f64>() / manifest.rows.len().max(1) as f64;
    for split in Split::ALL {
        println!("{split}: {}", manifest.count(split));
    }
    println!("mean snr: {mean_snr:.3} dB");
    println!("manifest: {}", args.out_dir.join("manifest.csv").display());
    Ok(())
}

fn run_bench(args: BenchArgs, seed: u64) -> Outcome {
    if args.repeats == 0 {
        return usage("--repeats must be >= 1");
    }
    if args.clip_seconds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return usage("--clip-seconds values must be positive");
    }
    for p in &args.model {
        require_file("--model", p)?;
    }
    if args.model.is_empty() && args.random_rate.is_empty() {
        return usage("give at least one --model or --random-rate");
    }
    let mut models = Vec::new();
    for p in &args.model {
        models.push(SeparatorModel::load(p).with_context(|| format!("loading {}", p.display()))?);
    }
    for &rate in &args.random_rate {
        if rate == 0 {
            return usage("--random-rate must be positive");
        }
        models.push(SeparatorModel::init_random(SeparatorConfig::preset(rate), seed).map_err(anyhow::Error::from)?);
    }
    let refs: Vec<&dyn Enhancer> = models.iter().map(|m| m as &dyn Enhancer).collect();
    let reports =
        bench::measure_interleaved(&refs, &args.clip_seconds, args.repeats, seed).map_err(anyhow::Error::from)?;
    print!("{}", bench::format_table(&reports));
    for r in &reports {
        info!(
            "{} Hz, {} s: median {:.2} ms ({:.2} ms per second of audio), realtime {}",
            r.sample_rate, r.clip_seconds, r.measured_ms.median, r.median_ms_per_second, r.realtime_ok
        );
    }
    if let Some(p) = &args.out_json {
        std::fs::write(p, bench::to_json(&reports)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> Outcome {
    require_file("--input", &args.input)?;
    if !args.fft_size.is_power_of_two() || args.fft_size < 2 {
        return usage("--fft-size must be a power of two");
    }
    let clip = read(&args.input)?;
    let spec = dsp::magnitude_spectrum(&clip, args.fft_size, args.window).map_err(anyhow::Error::from)?;
    let mut out = String::from("frequency_hz,magnitude_db\n");
    for (k, db) in spec.magnitudes_db().iter().enumerate() {
        out.push_str(&format!("{},{}\n", spec.frequency(k), db));
    }
    std::fs::write(&args.output, out).with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}

fn harmonics(args: HarmonicsArgs) -> Outcome {
    require_file("--input", &args.input)?;
    if args.max_harmonics == 0 {
        return usage("--max-harmonics must be >= 1");
    }
    let clip = read(&args.input)?;
    let cfg = ThdConfig {
        max_harmonics: args.max_harmonics,
        ..ThdConfig::default()
    };
    let h = metrics::harmonics(&clip, &cfg).map_err(|e| anyhow!("{e}"))?;
    let mut out = String::from("harmonic_index,frequency_hz,magnitude_db\n");
    for x in &h {
        out.push_str(&format!("{},{},{}\n", x.index, x.frequency_hz, x.magnitude_db));
    }
    std::fs::write(&args.output, out).with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}

fn resample(args: ResampleArgs) -> Outcome {
    require_file("--input", &args.input)?;
    if args.rate == 0 {
        return usage("--rate must be positive");
    }
    let clip = read(&args.input)?;
    let out = dsp::resample(&clip, args.rate).map_err(anyhow::Error::from)?;
    write(&out, &args.output, args.encoding.into())?;
    Ok(())
}

fn init_model(args: InitModelArgs, seed: u64) -> Outcome {
    let base = SeparatorConfig::preset(args.rate);
    let cfg = SeparatorConfig {
        norm_kind: args.norm,
        encoder_filters: args.encoder_filters.unwrap_or(base.encoder_filters),
        bottleneck: args.bottleneck.unwrap_or(base.bottleneck),
        conv_channels: args.conv_channels.unwrap_or(base.conv_channels),
        blocks_per_repeat: args.blocks_per_repeat.unwrap_or(base.blocks_per_repeat),
        repeats: args.repeats.unwrap_or(base.repeats),
        ..base
    };
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    let model = if args.identity {
        let w = separator::identity_weights(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
        SeparatorModel::new(cfg, w).map_err(anyhow::Error::from)?
    } else {
        SeparatorModel::init_random(cfg, seed).map_err(anyhow::Error::from)?
    };
    model.save(&args.output).with_context(|| format!("writing {}", args.output.display()))?;
    println!("wrote {} ({} tensors)", args.output.display(), model.weights().len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new().filter_level(cli.log_level).init();
    let seed = cli.seed;
    let result = match cli.command {
        Command::Enhance(a) => enhance(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Mix(a) => mix(a, seed),
        Command::Bench(a) => run_bench(a, seed),
        Command::Spectrum(a) => spectrum(a),
        Command::Harmonics(a) => harmonics(a),
        Command::Resample(a) => resample(a),
        Command::InitModel(a) => init_model(a, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Processing(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
