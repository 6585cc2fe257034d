mod config;

use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use backtalk_core::balance::{downsample, split, SampledDataset, SplitUnit};
use backtalk_core::control::{Dials, Dimension, QuantileMap};
use backtalk_core::corpus::{
    generate_synthetic_corpus, parse_transcript, prepare_conversation, read_windows_jsonl, sort_windows,
    write_windows_jsonl, Conversation, Lexicon, Parsed, TranscriptFormat, Window,
};
use backtalk_core::engine::{decision_log_jsonl, replay, DialChange, ReplayOptions};
use backtalk_core::eval::{dial_sweep, evaluate, spearman, trace, trace_csv, trace_jsonl, trace_svg};
use backtalk_core::model::{train, Checkpoint, Example, FilmClassifier};
use backtalk_core::service::{Server, ServiceContext};
use backtalk_core::Label;
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::PipelineConfig;

#[derive(Parser)]
#[command(name = "backtalk", version, about = "Controllable backchannel and turn-taking prediction")]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus as one native JSON file per conversation.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        conversations: Option<usize>,
        #[arg(long)]
        conversation_ms: Option<u64>,
    },
    /// Parse transcripts and extract labeled windows with raw controls.
    Prepare {
        /// Files or directories.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, default_value = "native")]
        format: TranscriptFormat,
        /// One backchannel phrase per line; the built-in list otherwise.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Balance windows per word-count bin and split into train/val/test.
    Balance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        split_unit: Option<SplitUnit>,
    },
    /// Fit the control quantile map and normalize window files in place.
    Controls {
        /// Windows whose raw controls define the reference distribution.
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Window files to rewrite with normalized controls.
        #[arg(long)]
        apply: Vec<PathBuf>,
        #[arg(long)]
        n_quantiles: Option<usize>,
    },
    /// Train the conditioned classifier and write a checkpoint.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        quantile_map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Score a checkpoint on labeled windows.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        theta_bc: Option<f64>,
        #[arg(long)]
        theta_tc: Option<f64>,
    },
    /// Per-word class probabilities over one conversation.
    Trace {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        conversation: PathBuf,
        #[arg(long, default_value = "native")]
        format: TranscriptFormat,
        /// The listening participant.
        #[arg(long)]
        agent: String,
        #[arg(long, default_value_t = 0.5)]
        c_bc: f64,
        #[arg(long, default_value_t = 0.5)]
        c_tc: f64,
        /// Writes `<prefix>.jsonl`, `<prefix>.csv` and `<prefix>.svg`.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Mean class probabilities while one dial is swept over [0, 1].
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        dimension: Dimension,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// Use only the first N probes in window order.
        #[arg(long)]
        limit: Option<usize>,
        /// `.json` writes the table as JSON, anything else as CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream a recorded conversation through the engine.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        conversation: PathBuf,
        #[arg(long, default_value = "native")]
        format: TranscriptFormat,
        #[arg(long)]
        agent: String,
        /// JSON array of `{t_ms, c_bc, c_tc}`.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        c_bc: f64,
        #[arg(long, default_value_t = 0.5)]
        c_tc: f64,
        /// Pace as a multiple of real time; unpaced when omitted.
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve live sessions over newline-delimited JSON on TCP.
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    let seed = cfg.seed(cli.seed);
    match cli.command {
        Command::Synth { out, conversations, conversation_ms } => {
            let mut spec = cfg.synth.clone();
            if let Some(n) = conversations {
                spec.conversations = n;
            }
            if let Some(ms) = conversation_ms {
                spec.conversation_ms = ms;
            }
            cmd_synth(&spec, seed, &out)
        }
        Command::Prepare { input, format, lexicon, out } => cmd_prepare(&cfg, &input, format, lexicon.as_deref(), &out),
        Command::Balance { input, out_dir, split_unit } => cmd_balance(&cfg, seed, &input, &out_dir, split_unit),
        Command::Controls { fit, out, apply, n_quantiles } => {
            cmd_controls(n_quantiles.unwrap_or(cfg.controls.n_quantiles), &fit, &out, &apply)
        }
        Command::Train { train, val, quantile_map, out, learning_rate, epochs, batch_size } => {
            let mut cfg = cfg;
            cfg.train.seed = seed;
            cfg.model.init_seed = seed;
            if let Some(v) = learning_rate {
                cfg.train.learning_rate = v;
            }
            if let Some(v) = epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = batch_size {
                cfg.train.batch_size = v;
            }
            cmd_train(&cfg, &train, val.as_deref(), quantile_map.as_deref(), &out)
        }
        Command::Eval { checkpoint, test, out, theta_bc, theta_tc } => {
            let mut rule = cfg.engine.policy.rule;
            rule.theta_bc = theta_bc.or(rule.theta_bc);
            rule.theta_tc = theta_tc.or(rule.theta_tc);
            let ckpt = Checkpoint::load(&checkpoint)?;
            let windows = read_windows_jsonl(&test)?;
            let report = evaluate(&ckpt.model, &windows, &rule)?;
            println!("n={} accuracy={:.4} macro_f1={:.4}", report.n, report.accuracy, report.macro_f1);
            for c in &report.per_class {
                println!(
                    "{:<12} precision={:.4} recall={:.4} f1={:.4} support={}",
                    c.label.as_str(),
                    c.precision,
                    c.recall,
                    c.f1,
                    c.support
                );
            }
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
            Ok(())
        }
        Command::Trace { checkpoint, conversation, format, agent, c_bc, c_tc, out_prefix } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let conv = load_conversation(&conversation, format)?;
            let records = trace(
                Arc::new(ckpt.model),
                ckpt.quantile_map.map(Arc::new),
                &conv,
                &agent,
                Dials::new(c_bc, c_tc)?,
                cfg.engine,
            )?;
            write_text(&out_prefix.with_extension("jsonl"), &trace_jsonl(&records)?)?;
            write_text(&out_prefix.with_extension("csv"), &trace_csv(&records)?)?;
            write_text(&out_prefix.with_extension("svg"), &trace_svg(&records))?;
            log::info!("traced {} words", records.len());
            Ok(())
        }
        Command::Sweep { checkpoint, probes, dimension, steps, limit, out } => {
            cmd_sweep(&checkpoint, &probes, dimension, steps, limit, &out)
        }
        Command::Replay { checkpoint, conversation, format, agent, schedule, c_bc, c_tc, speed, out } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let conv = load_conversation(&conversation, format)?;
            let schedule: Vec<DialChange> = match schedule {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => Vec::new(),
            };
            let options = ReplayOptions { config: cfg.engine, initial: Dials::new(c_bc, c_tc)?, speed };
            let log = replay(
                Arc::new(ckpt.model),
                ckpt.quantile_map.map(Arc::new),
                &conv,
                &agent,
                &schedule,
                &options,
            )?;
            write_text(&out, &decision_log_jsonl(&log)?)?;
            log::info!("{} decisions", log.len());
            Ok(())
        }
        Command::Serve { checkpoint, addr } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let ctx = ServiceContext {
                model: Arc::new(ckpt.model),
                quantile_map: ckpt.quantile_map.map(Arc::new),
                engine: cfg.engine,
            };
            let server = Server::bind(addr.as_str(), ctx)?;
            println!("listening on {}", server.local_addr()?);
            server.run(Arc::new(AtomicBool::new(false)))?;
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn cmd_synth(spec: &backtalk_core::corpus::SynthSpec, seed: u64, out: &Path) -> Result<()> {
    let convs = generate_synthetic_corpus(spec, seed)?;
    std::fs::create_dir_all(out)?;
    for c in &convs {
        write_text(&out.join(format!("{}.json", c.id)), &serde_json::to_string(&c.to_native())?)?;
    }
    log::info!("wrote {} conversations to {}", convs.len(), out.display());
    Ok(())
}

fn extensions(format: TranscriptFormat) -> &'static [&'static str] {
    match format {
        TranscriptFormat::Native => &["json"],
        TranscriptFormat::CandorLike => &["csv"],
        TranscriptFormat::Mmf2fLike => &["csv", "tsv", "txt"],
    }
}

/// Files in path order; directories contribute their matching entries.
fn collect_inputs(paths: &[PathBuf], format: TranscriptFormat) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            entries.retain(|e| {
                e.is_file()
                    && e.extension()
                        .and_then(|x| x.to_str())
                        .is_some_and(|x| extensions(format).contains(&x.to_ascii_lowercase().as_str()))
            });
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    ensure!(!files.is_empty(), "no input files found");
    Ok(files)
}

fn file_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "conversation".into(), |s| s.to_string_lossy().into_owned())
}

fn load_conversation(path: &Path, format: TranscriptFormat) -> Result<Conversation> {
    let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match parse_transcript(&raw, format, &file_id(path))? {
        Parsed::Conversation(c) => Ok(c),
        Parsed::Windows(_) => bail!("{format:?} transcripts carry no timing"),
    }
}

fn cmd_prepare(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    format: TranscriptFormat,
    lexicon: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let lexicon = match lexicon {
        Some(p) => Lexicon::from_file(p)?,
        None => Lexicon::default(),
    };
    let mut windows: Vec<Window> = Vec::new();
    for path in collect_inputs(inputs, format)? {
        let raw = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = parse_transcript(&raw, format, &file_id(&path)).with_context(|| format!("parsing {}", path.display()))?;
        match parsed {
            Parsed::Conversation(c) => {
                let prepared = prepare_conversation(&c, &lexicon, &cfg.prepare)
                    .with_context(|| format!("preparing {}", path.display()))?;
                windows.extend(prepared.windows);
            }
            Parsed::Windows(w) => windows.extend(w),
        }
    }
    sort_windows(&mut windows);
    write_windows_jsonl(out, &windows)?;
    let mut counts = [0usize; 3];
    for w in &windows {
        counts[w.label.index()] += 1;
    }
    log::info!(
        "{} windows: turn_claim={} backchannel={} stay_silent={}",
        windows.len(),
        counts[0],
        counts[1],
        counts[2]
    );
    Ok(())
}

#[derive(Serialize)]
struct BinCount {
    bin: String,
    label: Label,
    count: usize,
}

#[derive(Serialize)]
struct BalanceSummary {
    seed: u64,
    split_unit: SplitUnit,
    input_windows: usize,
    balanced_windows: usize,
    class_totals: [usize; 3],
    per_bin: Vec<BinCount>,
    split_sizes: [usize; 3],
}

fn cmd_balance(
    cfg: &PipelineConfig,
    seed: u64,
    input: &Path,
    out_dir: &Path,
    unit: Option<SplitUnit>,
) -> Result<()> {
    let windows = read_windows_jsonl(input)?;
    let bins = cfg.balance.bins()?;
    let unit = unit.unwrap_or(cfg.balance.split_unit);
    let ds = downsample(&windows, &bins, seed);
    let parts: [SampledDataset; 3] = split(&ds, cfg.balance.ratio, unit, seed)?;
    std::fs::create_dir_all(out_dir)?;
    for (name, part) in ["train", "val", "test"].iter().zip(&parts) {
        write_windows_jsonl(&out_dir.join(format!("{name}.jsonl")), &part.windows)?;
    }
    let summary = BalanceSummary {
        seed,
        split_unit: unit,
        input_windows: windows.len(),
        balanced_windows: ds.len(),
        class_totals: ds.class_totals(),
        per_bin: ds
            .per_bin_counts
            .iter()
            .map(|(&(bin, label), &count)| BinCount { bin: bins.name(bin), label, count })
            .collect(),
        split_sizes: [parts[0].len(), parts[1].len(), parts[2].len()],
    };
    write_json(&out_dir.join("balance.json"), &summary)?;
    log::info!(
        "{} -> {} windows, split {:?}",
        summary.input_windows,
        summary.balanced_windows,
        summary.split_sizes
    );
    Ok(())
}

fn cmd_controls(n_quantiles: usize, fit: &Path, out: &Path, apply: &[PathBuf]) -> Result<()> {
    let reference = read_windows_jsonl(fit)?;
    let map = QuantileMap::fit_windows(&reference, n_quantiles)?;
    map.save(out)?;
    for path in apply {
        let mut windows = read_windows_jsonl(path)?;
        map.apply_to_windows(&mut windows);
        write_windows_jsonl(path, &windows)?;
        log::info!("normalized {} windows in {}", windows.len(), path.display());
    }
    Ok(())
}

fn examples(model: &FilmClassifier, windows: &[Window]) -> Vec<Example<<backtalk_core::model::ReferenceEncoder as backtalk_core::model::TextEncoder>::Input>> {
    windows
        .iter()
        .map(|w| Example { input: model.prepare(&w.text), controls: w.dials(), label: w.label })
        .collect()
}

fn cmd_train(
    cfg: &PipelineConfig,
    train_path: &Path,
    val_path: Option<&Path>,
    map_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let train_windows = read_windows_jsonl(train_path)?;
    let val_windows = match val_path {
        Some(p) => read_windows_jsonl(p)?,
        None => Vec::new(),
    };
    let map = map_path.map(QuantileMap::load).transpose()?;
    let model = FilmClassifier::new(&cfg.model);
    let train_set = examples(&model, &train_windows);
    let val_set = examples(&model, &val_windows);
    log::info!(
        "training on {} windows ({} validation), {} parameters",
        train_set.len(),
        val_set.len(),
        model.param_count()
    );
    let outcome = train(model, &train_set, &val_set, &cfg.train)?;
    for r in &outcome.history {
        log::info!(
            "epoch {} train_loss={:.4} val_loss={} lr={:.2e}",
            r.epoch,
            r.train_loss,
            r.val_loss.map_or("-".into(), |v| format!("{v:.4}")),
            r.learning_rate
        );
    }
    let mut ckpt = Checkpoint::new(outcome.model, cfg.model, cfg.train, map);
    ckpt.best_epoch = outcome.best_epoch;
    ckpt.history = outcome.history;
    ckpt.save(out)?;
    log::info!("best epoch {}; wrote {}", ckpt.best_epoch, out.display());
    Ok(())
}

fn cmd_sweep(
    checkpoint: &Path,
    probes: &Path,
    dimension: Dimension,
    steps: usize,
    limit: Option<usize>,
    out: &Path,
) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut windows = read_windows_jsonl(probes)?;
    sort_windows(&mut windows);
    if let Some(n) = limit {
        windows.truncate(n);
    }
    ensure!(!windows.is_empty(), "no probe windows");
    let table = dial_sweep(&ckpt.model, &windows, dimension, steps)?;
    if out.extension().is_some_and(|e| e == "json") {
        write_json(out, &table)?;
    } else {
        write_text(out, &table.to_csv())?;
    }
    let values = table.values();
    for label in Label::ALL {
        let rho = spearman(&values, &table.column(label.index()));
        println!("{dimension} {:<12} spearman={}", label.as_str(), rho.map_or("n/a".into(), |r| format!("{r:.3}")));
    }
    Ok(())
}
