//! `hsaw`: synthesize scenes, build GAN hierarchies, detect and evaluate.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::Settings;
use hsaw::autodiff::gradcheck;
use hsaw::detector::{abnormality_signal, AbnormalitySignal, DetectOptions, Pooling};
use hsaw::eval::{compare, evaluate_signal, roc_svg, train_single, Evaluation};
use hsaw::gan::{EpochLog, TrainConfig};
use hsaw::hierarchy::{build_hierarchy, BuildConfig, BuildEvent, Hierarchy, ThetaPolicy};
use hsaw::scene::{split_subset, synthesize_scenario, ActivityLabel, ScenarioConfig};
use hsaw::som::SomTrainConfig;
use hsaw::store::{load_dataset, load_model, save_dataset, save_model, Dataset};

#[derive(Debug)]
pub enum Fail {
    Usage(String),
    Runtime(String),
}

impl From<hsaw::Error> for Fail {
    fn from(e: hsaw::Error) -> Self {
        match e {
            hsaw::Error::Config(m) => Fail::Usage(format!("invalid configuration: {m}")),
            other => Fail::Runtime(other.to_string()),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Fail + '_ {
    move |e| Fail::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "hsaw", version, about = "Hierarchical cross-modal GAN anomaly detection on synthetic patrol scenes")]
struct Cli {
    /// Seed for scene synthesis and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `key = value` settings file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Subset {
    Straight,
    Curve,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PoolingArg {
    Mean,
    Max,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a scenario into a dataset directory.
    Synth {
        #[arg(long)]
        scenario: Option<u8>,
        #[arg(long)]
        laps: Option<usize>,
        #[arg(long)]
        frames_per_segment: Option<usize>,
        #[arg(long)]
        pedestrian_segment: Option<usize>,
        #[arg(long)]
        episode_frames: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train only the base level on a labelled subset.
    TrainBase {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "straight")]
        subset: Subset,
        /// `auto`, `auto:K` or a fixed number.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the full hierarchy.
    Build {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "straight")]
        subset: Subset,
        /// `auto`, `auto:K` or a fixed number.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        max_levels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Route a dataset through a model and write the abnormality signal.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        pooling: Option<PoolingArg>,
        /// Override the model's final threshold.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROC, AUC and EER of a signal against a dataset's labels.
    Evaluate {
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a single GAN and a hierarchy on one dataset and compare them on another.
    Compare {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every differentiable operator.
    Gradcheck {
        /// Number of seeds; each seed draws fresh shapes for every operator.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

fn parse_theta(s: &str) -> Result<ThetaPolicy, Fail> {
    let bad = || Fail::Usage(format!("theta must be `auto`, `auto:K` or a number, got {s:?}"));
    match s {
        "auto" => Ok(ThetaPolicy::Auto(match BuildConfig::default().theta {
            ThetaPolicy::Auto(k) => k,
            ThetaPolicy::Fixed(_) => unreachable!("default theta is auto"),
        })),
        "inf" => Ok(ThetaPolicy::Fixed(f64::INFINITY)),
        _ => match s.strip_prefix("auto:") {
            Some(k) => k.parse().map(ThetaPolicy::Auto).map_err(|_| bad()),
            None => s.parse().map(ThetaPolicy::Fixed).map_err(|_| bad()),
        },
    }
}

fn build_config(s: &Settings, seed: u64, theta: Option<String>, max_levels: Option<usize>) -> Result<BuildConfig, Fail> {
    let d = BuildConfig::default();
    let (t, m) = (TrainConfig::default(), SomTrainConfig::default());
    let theta = match s.opt::<String>("theta", theta)? {
        Some(v) => parse_theta(&v)?,
        None => d.theta,
    };
    Ok(BuildConfig {
        theta,
        max_levels: s.pick("max_levels", max_levels, d.max_levels)?,
        min_cluster_frac: s.pick("min_cluster_frac", None, d.min_cluster_frac)?,
        seed,
        train: TrainConfig {
            epochs: s.pick("epochs", None, t.epochs)?,
            batch_size: s.pick("batch_size", None, t.batch_size)?,
            lr: s.pick("lr", None, t.lr)?,
            beta1: s.pick("beta1", None, t.beta1)?,
            beta2: s.pick("beta2", None, t.beta2)?,
            lambda_l1: s.pick("lambda_l1", None, t.lambda_l1)?,
            seed: 0,
        },
        som: SomTrainConfig {
            rows: s.pick("som_rows", None, m.rows)?,
            cols: s.pick("som_cols", None, m.cols)?,
            epochs: s.pick("som_epochs", None, m.epochs)?,
            alpha0: s.pick("som_alpha0", None, m.alpha0)?,
            sigma0: s.opt("som_sigma0", None)?,
            seed: 0,
        },
    })
}

fn detect_options(s: &Settings, pooling: Option<PoolingArg>, tau: Option<f64>) -> Result<DetectOptions, Fail> {
    let pooling = match pooling {
        Some(PoolingArg::Mean) => Pooling::Mean,
        Some(PoolingArg::Max) => Pooling::Max,
        None => match s.raw("pooling") {
            None | Some("mean") => Pooling::Mean,
            Some("max") => Pooling::Max,
            Some(o) => return Err(Fail::Usage(format!("pooling must be mean or max, got {o:?}"))),
        },
    };
    Ok(DetectOptions { pooling, tau: s.opt("tau", tau)? })
}

fn subset_indices(ds: &Dataset, subset: Subset) -> Result<Vec<usize>, Fail> {
    let filter: &[ActivityLabel] = match subset {
        Subset::Straight => &[ActivityLabel::Straight],
        Subset::Curve => &[ActivityLabel::Curve],
        Subset::All => &ActivityLabel::ALL,
    };
    Ok(split_subset(&ds.labels, filter)?)
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    fs::write(path, text).map_err(io(path))
}

/// Builds with progress on stderr; returns the model and its training log.
fn build_logged(ds: &Dataset, v0: &[usize], cfg: &BuildConfig, tag: &str) -> Result<(Hierarchy, String), Fail> {
    let x = ds.couple_set()?;
    let mut log = format!("level,{}\n", EpochLog::CSV_HEADER);
    let h = build_hierarchy(&x, v0, cfg, |e| match e {
        BuildEvent::Epoch { level, log: l } => log += &format!("{level},{}\n", l.csv_row()),
        BuildEvent::Level { level, subset, theta, normal_clusters, spawn } => eprintln!(
            "{tag}level {level}: trained on {subset}, theta {theta:.5}, {normal_clusters} normal clusters, {spawn} frames spawn the next level"
        ),
        BuildEvent::Skipped { level, members, need } => {
            eprintln!("{tag}level {level} skipped: {members} frames, need {need}")
        }
    })?;
    Ok((h, log))
}

fn save_with_log(dir: &Path, h: &Hierarchy, log: &str) -> Result<(), Fail> {
    save_model(dir, h)?;
    write(&dir.join("train_log.csv"), log)
}

fn write_report(out: &Path, name: &str, ev: &Evaluation) -> Result<(), Fail> {
    write(&out.join(format!("{name}roc.csv")), &ev.roc.to_csv())
}

fn run(cli: Cli) -> Result<(), Fail> {
    let s = Settings::load(cli.config.as_deref())?;
    let seed = s.pick("seed", cli.seed, 0u64)?;
    match cli.command {
        Command::Synth {
            scenario,
            laps,
            frames_per_segment,
            pedestrian_segment,
            episode_frames,
            noise_sigma,
            height,
            width,
            out,
        } => {
            let d = ScenarioConfig::default();
            let cfg = ScenarioConfig {
                scenario: s.pick("scenario", scenario, d.scenario)?,
                frames_per_segment: s.pick("frames_per_segment", frames_per_segment, d.frames_per_segment)?,
                laps: s.pick("laps", laps, d.laps)?,
                height: s.pick("height", height, d.height)?,
                width: s.pick("width", width, d.width)?,
                pedestrian_segment: s.pick("pedestrian_segment", pedestrian_segment, d.pedestrian_segment)?,
                episode_frames: s.pick("episode_frames", episode_frames, d.episode_frames)?,
                noise_sigma: s.pick("noise_sigma", noise_sigma, d.noise_sigma)?,
                seed,
            };
            let ds = Dataset::from_sequence(&synthesize_scenario(&cfg)?)?;
            save_dataset(&out, &ds)?;
            let c = &ds.manifest.counts;
            println!(
                "{}: scenario {} with {} frames ({} straight, {} curve, {} pedestrian)",
                out.display(),
                cfg.scenario,
                ds.len(),
                c.straight,
                c.curve,
                c.pedestrian
            );
        }
        Command::TrainBase { data, subset, theta, out } => {
            let ds = load_dataset(&data)?;
            let cfg = BuildConfig { max_levels: 1, ..build_config(&s, seed, theta, None)? };
            let (h, log) = build_logged(&ds, &subset_indices(&ds, subset)?, &cfg, "")?;
            save_with_log(&out, &h, &log)?;
            println!("{}: base level, theta {}", out.display(), h.tau);
        }
        Command::Build { data, subset, theta, max_levels, out } => {
            let ds = load_dataset(&data)?;
            let cfg = build_config(&s, seed, theta, max_levels)?;
            let (h, log) = build_logged(&ds, &subset_indices(&ds, subset)?, &cfg, "")?;
            save_with_log(&out, &h, &log)?;
            println!("{}: {} levels, tau {}", out.display(), h.levels.len(), h.tau);
        }
        Command::Detect { model, data, pooling, tau, out } => {
            let h = load_model(&model)?;
            let ds = load_dataset(&data)?;
            let sig = abnormality_signal(&h, &ds.couple_set()?, detect_options(&s, pooling, tau)?)?;
            write(&out, &sig.to_csv())?;
            let abnormal = sig.verdicts.iter().filter(|v| v.is_abnormal).count();
            println!("{}: {} frames, {abnormal} abnormal", out.display(), sig.len());
        }
        Command::Evaluate { signal, data, out } => {
            let text = fs::read_to_string(&signal).map_err(io(&signal))?;
            let sig = AbnormalitySignal::from_csv(&text)?;
            let ds = load_dataset(&data)?;
            if sig.len() != ds.len() {
                return Err(Fail::Runtime(format!(
                    "{} has {} rows but {} has {} frames",
                    signal.display(),
                    sig.len(),
                    data.display(),
                    ds.len()
                )));
            }
            let ev = evaluate_signal(sig, &ds.labels)?;
            write_report(&out, "", &ev)?;
            let m = ev.roc.summary();
            write(&out.join("metrics.json"), &(serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n"))?;
            write(&out.join("roc.svg"), &roc_svg(&[("signal", &ev.roc)]))?;
            println!("AUC {:.4}  EER {:.4}  curve false positives {}", m.auc, m.eer, ev.curve_false_positives);
        }
        Command::Compare { train, test, theta, out } => {
            let (tr, te) = (load_dataset(&train)?, load_dataset(&test)?);
            let cfg = build_config(&s, seed, theta, None)?;
            let v0 = subset_indices(&tr, Subset::Straight)?;
            let (hier, hlog) = build_logged(&tr, &v0, &cfg, "hierarchy ")?;
            save_with_log(&out.join("hierarchy"), &hier, &hlog)?;
            let mut slog = format!("level,{}\n", EpochLog::CSV_HEADER);
            let single = train_single(&tr.couple_set()?, &cfg, |e| {
                if let BuildEvent::Epoch { level, log } = e {
                    slog += &format!("{level},{}\n", log.csv_row());
                }
            })?;
            save_with_log(&out.join("single"), &single, &slog)?;
            let cmp = compare(&single, &hier, &te.couple_set()?, &te.labels, detect_options(&s, None, None)?)?;
            for (name, ev) in [("single_", &cmp.single), ("hierarchy_", &cmp.hierarchy)] {
                write(&out.join(format!("{name}signal.csv")), &ev.signal.to_csv())?;
                write_report(&out, name, ev)?;
            }
            let m = cmp.metrics(hier.levels.len());
            write(&out.join("metrics.json"), &(serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n"))?;
            write(&out.join("roc.svg"), &roc_svg(&[("single GAN", &cmp.single.roc), ("hierarchy", &cmp.hierarchy.roc)]))?;
            println!("{:<10} {:>8} {:>8} {:>10}", "model", "AUC", "EER", "curve FP");
            println!("{:<10} {:>8.4} {:>8.4} {:>10}", "single", m.single.auc, m.single.eer, m.single_curve_false_positives);
            println!(
                "{:<10} {:>8.4} {:>8.4} {:>10}",
                "hierarchy", m.hierarchy.auc, m.hierarchy.eer, m.hierarchy_curve_false_positives
            );
        }
        Command::Gradcheck { seeds } => {
            let reports = gradcheck::run_suite(seed, seeds.max(1))?;
            let mut failed = 0;
            for r in &reports {
                let ok = r.passed();
                failed += usize::from(!ok);
                println!("{:<5} {:<28} seed {:<4} max rel err {:.3e}", if ok { "ok" } else { "FAIL" }, r.name, r.seed, r.max_rel_err);
            }
            println!("{} cases, {failed} failed (tolerance {:e})", reports.len(), gradcheck::TOLERANCE);
            if failed > 0 {
                return Err(Fail::Runtime(format!("{failed} gradient checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}\n\nRun `hsaw --help` for usage.");
            ExitCode::from(1)
        }
        Err(Fail::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
