use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};

use momuse::data::{sdr_metric, si_snr_metric, simulate_item, SimConfig};
use momuse::io::{wav_read, wav_write, write_manifest, Checkpoint, FeatureFile, ManifestRecord, RunConfig};
use momuse::streaming::EmittedChunk;
use momuse::training::{demo_data, model_grad_check, train_demo, DemoConfig, ModelCheckConfig, Precision, LOSS_LOG_HEADER};
use momuse::{extract, ModelConfig, ModelParams, StreamConfig, StreamEngine, VisualSlice};

#[derive(Parser)]
#[command(name = "momuse", version, about = "Audio-visual target speaker extraction with a momentum memory bank")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a simulated two-speaker corpus with impaired visual features.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        snr_min: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        snr_max: f64,
        #[arg(long, default_value_t = 0.8)]
        ratio_max: f64,
        /// Utterance length in seconds.
        #[arg(long, default_value_t = 4.0)]
        duration: f64,
        /// Run configuration supplying the model geometry.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extracts the target from a whole mixture in one window.
    Extract {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        mix: PathBuf,
        #[arg(long)]
        feat: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extracts the target online, window by window, with the memory bank.
    Stream {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        mix: PathBuf,
        #[arg(long)]
        feat: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        l_init: Option<f64>,
        #[arg(long)]
        l_win: Option<f64>,
        #[arg(long)]
        l_shift: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        /// Runs every window without the memory bank.
        #[arg(long)]
        no_bank: bool,
        /// Writes one line per window step: mean current-embedding attention
        /// and replacement flag of every block.
        #[arg(long)]
        log_attention: Option<PathBuf>,
        /// Run configuration for the stream settings; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Overfits one fixed simulated mixture and writes a loss log.
    TrainDemo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_ckpt: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Defaults to the checkpoint path with a `.loss.txt` extension.
        #[arg(long)]
        loss_log: Option<PathBuf>,
        /// Also writes the training mixture, both sources and their clean
        /// features here.
        #[arg(long)]
        data_out: Option<PathBuf>,
    },
    /// Compares tape gradients with finite differences on a tiny model.
    Gradcheck {
        /// Overrides the model geometry and loss weights.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "dd")]
        precision: String,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Prints SI-SNR and a plain energy-ratio SDR of an estimate.
    Metrics {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        est: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { out, count, seed, snr_min, snr_max, ratio_max, duration, config } => {
            let model = load_config(config.as_deref(), RunConfig::default())?.model;
            let sim = SimConfig { seed, duration, snr_range: (snr_min, snr_max), ratio_max, ..SimConfig::default() };
            simulate(&out, count, &sim, &model)
        }
        Command::Extract { ckpt, mix, feat, out } => {
            let params = load_model(&ckpt)?;
            let (y, frames) = load_inputs(&params.config, &mix, &feat)?;
            let est = extract(&params, &y, &VisualSlice::aligned(frames), None)?;
            wav_write(&out, &est.waveform, params.config.sample_rate)
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Stream { ckpt, mix, feat, out, l_init, l_win, l_shift, theta, no_bank, log_attention, config } => {
            let params = load_model(&ckpt)?;
            let mut cfg = load_config(config.as_deref(), RunConfig::default())?.stream;
            cfg.l_init = l_init.unwrap_or(cfg.l_init);
            cfg.l_win = l_win.unwrap_or(cfg.l_win);
            cfg.l_shift = l_shift.unwrap_or(cfg.l_shift);
            cfg.theta = theta.unwrap_or(cfg.theta);
            cfg.use_bank &= !no_bank;
            cfg.sample_rate = params.config.sample_rate;
            let (y, frames) = load_inputs(&params.config, &mix, &feat)?;
            let chunks = stream(&params, cfg, &y, &frames)?;
            let est: Vec<f32> = chunks.iter().flat_map(|c| c.samples.iter().copied()).collect();
            wav_write(&out, &est, params.config.sample_rate).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = log_attention {
                fs::write(&path, attention_log(&chunks, params.config.blocks))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::TrainDemo { config, out_ckpt, steps, loss_log, data_out } => {
            let run = load_config(config.as_deref(), RunConfig::demo())?;
            let log_path = loss_log.unwrap_or_else(|| out_ckpt.with_extension("loss.txt"));
            train(&run, steps, &out_ckpt, &log_path, data_out.as_deref())
        }
        Command::Gradcheck { config, seed, precision, tolerance } => {
            let mut check = ModelCheckConfig { seed, precision: precision.parse::<Precision>()?, ..Default::default() };
            if let Some(path) = config {
                let run = load_config(Some(&path), RunConfig { model: check.model.clone(), ..RunConfig::default() })?;
                check.model = run.model;
                check.lambda = run.loss.lambda;
                check.gamma = run.loss.gamma;
            }
            let report = model_grad_check(&check)?;
            for (name, r) in [("utt", &report.utt), ("seg", &report.seg)] {
                let worst = r.worst.as_ref().map_or("-".to_owned(), |(p, i)| format!("{p}[{i}]"));
                println!("{name}: max rel err {:.3e} at {worst} over {} entries", r.max_rel_err, r.entries_checked);
            }
            let max = report.max_rel_err();
            println!("max rel err {max:.3e}");
            ensure!(max < tolerance, "max relative error {max:.3e} exceeds {tolerance:e}");
            Ok(())
        }
        Command::Metrics { reference, est } => {
            let (x, sr_x) = wav_read(&reference).with_context(|| format!("reading {}", reference.display()))?;
            let (x_hat, sr_e) = wav_read(&est).with_context(|| format!("reading {}", est.display()))?;
            ensure!(sr_x == sr_e, "sample rates differ: reference {sr_x} Hz, estimate {sr_e} Hz");
            println!("si-snr {:.4} dB", si_snr_metric(&x, &x_hat)?);
            println!("sdr (energy ratio, not BSS-Eval) {:.4} dB", sdr_metric(&x, &x_hat)?);
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>, base: RunConfig) -> Result<RunConfig> {
    match path {
        None => Ok(base),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::parse_over(base, &text).with_context(|| format!("in {}", p.display()))
        }
    }
}

fn load_model(path: &Path) -> Result<ModelParams> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("reading {}", path.display()))?;
    ModelParams::from_checkpoint(&ckpt).with_context(|| format!("loading {}", path.display()))
}

fn load_inputs(model: &ModelConfig, mix: &Path, feat: &Path) -> Result<(Vec<f32>, momuse::Tensor)> {
    let (y, sr) = wav_read(mix).with_context(|| format!("reading {}", mix.display()))?;
    ensure!(sr == model.sample_rate, "{}: {sr} Hz, model expects {} Hz", mix.display(), model.sample_rate);
    let f = FeatureFile::load(feat).with_context(|| format!("reading {}", feat.display()))?;
    ensure!(
        f.fps == model.video_fps as f32,
        "{}: {} frames/s, model expects {}",
        feat.display(),
        f.fps,
        model.video_fps
    );
    Ok((y, f.frames))
}

fn stream(params: &ModelParams, cfg: StreamConfig, y: &[f32], frames: &momuse::Tensor) -> Result<Vec<EmittedChunk>> {
    let mut engine = StreamEngine::new(params, cfg)?;
    let mut chunks = engine.push(y, frames)?;
    chunks.extend(engine.flush()?);
    Ok(chunks)
}

fn attention_log(chunks: &[EmittedChunk], blocks: usize) -> String {
    let mut out = String::from("# step");
    for r in 0..blocks {
        out += &format!(" a_c_mean.{r} replaced.{r}");
    }
    out.push('\n');
    for c in chunks {
        out += &c.plan.step.to_string();
        match &c.decision {
            Some(d) => {
                for b in &d.blocks {
                    out += &format!(" {:.6} {}", b.a_c_mean, u8::from(b.replaced));
                }
            }
            None => {
                let tag = if c.plan.step == 1 { "init" } else { "off" };
                for _ in 0..blocks {
                    out += &format!(" - {tag}");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn simulate(out: &Path, count: u64, sim: &SimConfig, model: &ModelConfig) -> Result<()> {
    for sub in ["mix", "target", "feat"] {
        fs::create_dir_all(out.join(sub)).with_context(|| format!("creating {}", out.join(sub).display()))?;
    }
    let mut records = Vec::new();
    for i in 0..count {
        let item = simulate_item(sim, model, i)?;
        let rel = |dir: &str, ext: &str| format!("{dir}/{i:05}.{ext}");
        let (mix, target, feat) = (rel("mix", "wav"), rel("target", "wav"), rel("feat", "momv"));
        wav_write(out.join(&mix), &item.mixture, model.sample_rate)?;
        wav_write(out.join(&target), &item.target, model.sample_rate)?;
        FeatureFile::new(item.features, model.video_fps as f32)?.save(out.join(&feat))?;
        records.push(ManifestRecord {
            mixture: mix,
            target,
            features: feat,
            label: item.label,
            impairment: item.impairment.kind,
            requested_ratio: item.impairment.ratio,
            realized_ratio: item.realized_ratio,
            snr_db: item.snr_db,
        });
    }
    write_manifest(out.join("manifest.jsonl"), &records)?;
    Ok(())
}

fn train(run: &RunConfig, steps: usize, ckpt: &Path, log_path: &Path, data_out: Option<&Path>) -> Result<()> {
    if steps == 0 {
        bail!("--steps must be positive");
    }
    let data = demo_data(&run.model, 4.0, run.data_seed)?;
    if let Some(dir) = data_out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        wav_write(dir.join("mixture.wav"), &data.mixture, run.model.sample_rate)?;
        for (r, (src, feat)) in data.sources.iter().zip(&data.visuals).enumerate() {
            wav_write(dir.join(format!("source{r}.wav")), src, run.model.sample_rate)?;
            FeatureFile::new(feat.clone(), run.model.video_fps as f32)?.save(dir.join(format!("features{r}.momv")))?;
        }
    }
    let mut params = ModelParams::init(&run.model, run.model_seed)?;
    let cfg = DemoConfig { steps, lr: run.lr, weights: run.loss, seed: run.data_seed, ..DemoConfig::default() };
    let mut log = fs::File::create(log_path).with_context(|| format!("creating {}", log_path.display()))?;
    writeln!(log, "{LOSS_LOG_HEADER}")?;
    let mut io_err = None;
    train_demo(&mut params, &data, &cfg, |rec| {
        if io_err.is_none() {
            io_err = writeln!(log, "{}", rec.line()).err();
        }
        log::info!("{}", rec.line());
    })?;
    if let Some(e) = io_err {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }
    params.to_checkpoint().save(ckpt).with_context(|| format!("writing {}", ckpt.display()))?;
    Ok(())
}
