//! Command-line front end: `generate`, `train`, `eval`, `compare`, `baseline`.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 1 for
//! failures while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::classical::{music_with_order, periodogram, OrderRule, Window};
use crate::error::{Error, Result};
use crate::eval::{
    psnr, psnr_vs_snr, resolution_sweep, sidelobe_experiment, Estimator, ExperimentConfig, Method, Model, Trial,
};
use crate::fsutil::write_atomic;
use crate::model::{ModelConfig, ParameterStore, Variant};
use crate::rng::{label, stream};
use crate::signal::io::{read_dataset, read_signal_file, write_dataset, write_spectrum_file};
use crate::signal::{render_target, sample_scene, synthesize};
use crate::train::{train, TrainConfig, TrainOptions};

#[derive(Parser, Debug)]
#[command(name = "swinfreq", version, about = "Line-spectra super-resolution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed for every random draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Synthesize a dataset of (noisy signal, target spectrum) records.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of records.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Fixed SNR in dB; by default drawn per record from the training range.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
    },
    /// Train a model; the checkpoint is written to --out after every epoch.
    Train {
        #[command(flatten)]
        common: Common,
        /// Model variant when the config has no [model] table.
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from the checkpoint at --out.
        #[arg(long)]
        resume: bool,
    },
    /// Mean PSNR of one method over a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Classical method; ignored when --checkpoint is given.
        #[arg(long, default_value = "periodogram", value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Monte Carlo comparison of several methods; writes <out>.json and <out>.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "periodogram,music,omp", value_parser = parse_method)]
        methods: Vec<Method>,
        /// Trained models to include (repeatable).
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Experiment::Psnr)]
        experiment: Experiment,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run a classical estimator on one signal file; writes a spectrum record.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = BaselineMethod::Periodogram)]
        method: BaselineMethod,
        /// Output grid size (defaults to the config's n_sr).
        #[arg(long)]
        n_sr: Option<usize>,
        #[arg(long, default_value = "rect", value_parser = parse_window)]
        window: Window,
        /// Model order for MUSIC and sparsity for OMP; AIC when omitted.
        #[arg(long)]
        order: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Psnr,
    Resolution,
    Sidelobe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BaselineMethod {
    Periodogram,
    Music,
    Omp,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_window(s: &str) -> std::result::Result<Window, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Contents of a `--config` file. Every table is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelConfig>,
    pub train: TrainConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    /// Parse TOML, or JSON when the path ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))?
        };
        cfg.train.validate()?;
        cfg.experiment.validate()?;
        if let Some(m) = &cfg.model {
            m.validate()?;
        }
        Ok(cfg)
    }
}

/// Errors that map to exit code 2.
fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::InvalidArgument(_) | Error::Toml(_) | Error::Json(_))
}

/// Run the CLI on `argv` (program name first) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match command_common(&cli.command).config.as_deref().map(RunConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: bad config: {e}\n\n{}", usage(&cli.command));
            return 2;
        }
    };
    let command = cli.command;
    match execute(command.clone(), config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                eprintln!("\n{}", usage(&command));
                2
            } else {
                1
            }
        }
    }
}

fn usage(c: &Command) -> String {
    let name = match c {
        Command::Generate { .. } => "generate",
        Command::Train { .. } => "train",
        Command::Eval { .. } => "eval",
        Command::Compare { .. } => "compare",
        Command::Baseline { .. } => "baseline",
    };
    let mut cmd = Cli::command();
    cmd.build();
    cmd.find_subcommand_mut(name).map(|s| s.render_usage().to_string()).unwrap_or_default()
}

fn command_common(c: &Command) -> &Common {
    match c {
        Command::Generate { common, .. }
        | Command::Train { common, .. }
        | Command::Eval { common, .. }
        | Command::Compare { common, .. }
        | Command::Baseline { common, .. } => common,
    }
}

fn execute(command: Command, cfg: RunConfig) -> Result<()> {
    match command {
        Command::Generate { common, n, snr } => generate(&common, &cfg, n, snr),
        Command::Train { common, variant, epochs, resume } => run_train(&common, cfg, variant, epochs, resume),
        Command::Eval { common, data, method, checkpoint } => eval(&common, &cfg, &data, method, checkpoint.as_deref()),
        Command::Compare { common, methods, checkpoint, experiment, trials } => {
            compare(&common, cfg, &methods, &checkpoint, experiment, trials)
        }
        Command::Baseline { common, input, method, n_sr, window, order } => {
            baseline(&common, &input, method, n_sr.unwrap_or(cfg.experiment.n_sr), window, order)
        }
    }
}

fn generate(common: &Common, cfg: &RunConfig, count: usize, snr: Option<f64>) -> Result<()> {
    let exp = &cfg.experiment;
    let scene_cfg = exp.scene_config();
    let sigma_f = exp.sigma_f();
    let [lo, hi] = cfg.train.snr_range_db;
    let items = (0..count)
        .map(|i| {
            let mut rng = stream(common.seed, &[label("generate"), i as u64]);
            let scene = sample_scene(&mut rng, &scene_cfg)?;
            let snr = snr.unwrap_or_else(|| if lo == hi { lo } else { rand::Rng::random_range(&mut rng, lo..hi) });
            Ok((synthesize(&scene, exp.n, snr, &mut rng)?, render_target(&scene, exp.n_sr, sigma_f)?))
        })
        .collect::<Result<Vec<_>>>()?;
    write_dataset(&common.out, &items)?;
    log::info!("wrote {count} records to {}", common.out.display());
    Ok(())
}

fn run_train(common: &Common, cfg: RunConfig, variant: Option<Variant>, epochs: Option<usize>, resume: bool) -> Result<()> {
    let model = match (cfg.model, variant) {
        (Some(m), None) => m,
        (Some(m), Some(v)) if m.variant == v => m,
        (Some(_), Some(v)) => return Err(Error::invalid(format!("--variant {v} contradicts the config's model table"))),
        (None, v) => ModelConfig::default_for(v.unwrap_or(Variant::SwinFreq)),
    };
    let mut tcfg = TrainConfig { seed: common.seed, ..cfg.train };
    if let Some(e) = epochs {
        tcfg.epochs = e;
    }
    let resume = if resume { Some(ParameterStore::load_expecting(&common.out, &model).map_err(|e| e.at(&common.out))?) } else { None };
    let opts = TrainOptions {
        checkpoint: Some(common.out.clone()),
        log: Some(sibling(&common.out, "log.csv")),
        resume,
        stop_after_epoch: None,
    };
    let (store, history) = train(&model, &tcfg, opts)?;
    store.save(&common.out)?;
    let summary = serde_json::json!({ "model": model, "train": tcfg, "history": history });
    write_text(&sibling(&common.out, "history.json"), &pretty(&summary)?)
}

fn load_model(path: &Path) -> Result<Model> {
    Ok(Model { store: ParameterStore::load(path).map_err(|e| e.at(path))? })
}

fn eval(common: &Common, cfg: &RunConfig, data: &Path, method: Method, checkpoint: Option<&Path>) -> Result<()> {
    let items = read_dataset(data).map_err(|e| e.at(data))?;
    let estimator: Box<dyn Estimator> = match checkpoint {
        Some(p) => Box::new(load_model(p)?),
        None => method.build(items.first().map_or(cfg.experiment.n_sr, |(_, t)| t.len())),
    };
    let mut sum = 0.0;
    let mut ok = 0usize;
    let mut failures = 0usize;
    for (signal, target) in &items {
        let trial = Trial { signal, components: None, target: Some(target) };
        match estimator.estimate(&trial).and_then(|e| psnr(&e, target)) {
            Ok(v) => {
                sum += v;
                ok += 1;
            }
            Err(e) => {
                log::warn!("{}: {e}", estimator.name());
                failures += 1;
            }
        }
    }
    let report = serde_json::json!({
        "format": "swinfreq-eval",
        "version": 1,
        "method": estimator.name(),
        "data": data.display().to_string(),
        "records": items.len(),
        "failures": failures,
        "mean_psnr_db": if ok > 0 { Some(sum / ok as f64) } else { None },
        "seed": common.seed,
    });
    write_text(&common.out, &pretty(&report)?)
}

fn compare(
    common: &Common,
    cfg: RunConfig,
    methods: &[Method],
    checkpoints: &[PathBuf],
    experiment: Experiment,
    trials: Option<usize>,
) -> Result<()> {
    let mut exp = cfg.experiment;
    if let Some(t) = trials {
        exp.trials = t;
    }
    exp.validate()?;
    let mut owned: Vec<Box<dyn Estimator>> = methods.iter().map(|m| m.build(exp.n_sr)).collect();
    for path in checkpoints {
        let model = load_model(path)?;
        let mc = model.store.config();
        if mc.n != exp.n || mc.n_sr != exp.n_sr {
            return Err(Error::invalid(format!(
                "checkpoint {} expects n={}, n_sr={} but the experiment uses n={}, n_sr={}",
                path.display(),
                mc.n,
                mc.n_sr,
                exp.n,
                exp.n_sr
            )));
        }
        owned.push(Box::new(model));
    }
    if owned.is_empty() {
        return Err(Error::invalid("no methods to compare"));
    }
    let refs: Vec<&dyn Estimator> = owned.iter().map(|b| b.as_ref()).collect();
    match experiment {
        Experiment::Psnr => psnr_vs_snr(&refs, &exp, common.seed)?.write(&common.out),
        Experiment::Resolution => resolution_sweep(&refs, &exp, common.seed)?.write(&common.out),
        Experiment::Sidelobe => {
            let conds = sidelobe_experiment(&refs, &exp, common.seed)?;
            std::fs::create_dir_all(&common.out)?;
            for c in &conds {
                write_text(&common.out.join(format!("{}.csv", c.stem())), &c.to_csv())?;
            }
            let meta = serde_json::json!({
                "format": "swinfreq-sidelobe",
                "version": 1,
                "seed": common.seed,
                "config": exp,
                "conditions": conds.iter().map(|c| serde_json::json!({
                    "file": format!("{}.csv", c.stem()),
                    "separation": c.separation,
                    "snr_db": c.snr_db,
                    "freqs": c.freqs,
                    "methods": c.methods,
                })).collect::<Vec<_>>(),
            });
            write_text(&common.out.join("sidelobe.json"), &pretty(&meta)?)
        }
    }
}

fn baseline(
    common: &Common,
    input: &Path,
    method: BaselineMethod,
    n_sr: usize,
    window: Window,
    order: Option<usize>,
) -> Result<()> {
    let signal = read_signal_file(input).map_err(|e| e.at(input))?;
    let rule = order.map_or(OrderRule::Aic, OrderRule::Known);
    let spectrum = match method {
        BaselineMethod::Periodogram => periodogram(&signal, n_sr, window)?,
        BaselineMethod::Music => music_with_order(&signal, rule, (signal.len() / 2).max(2), n_sr)?.1,
        BaselineMethod::Omp => {
            crate::eval::Omp { n_sr }.estimate(&Trial { signal: &signal, components: order, target: None })?
        }
    };
    log::debug!("baseline seed {} (unused by deterministic estimators)", common.seed);
    write_spectrum_file(&common.out, &spectrum)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{name}.{suffix}"))
}

fn pretty(v: &serde_json::Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}
