use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use argmine::client::EndpointConfig;
use argmine::merger::{self, DifficultyTier, TierAssignment};
use argmine::pipeline::{self, Run, RunConfig, SourceSpec, StageStatus};
use argmine::prompt::PromptMode;
use argmine::{DatasetId, TaskId};

#[derive(Parser)]
#[command(name = "argmine", version, about = "Argument-mining experiment pipeline")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (overrides `run_dir` from the config).
    #[arg(long = "run", global = true)]
    run_dir: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct TaskSel {
    /// Task ids (ACC, CD, ED, AR, ET, SD, FD, AQ) or `all`.
    #[arg(long = "task", value_delimiter = ',')]
    tasks: Vec<String>,
}

#[derive(Args, Clone, Default)]
struct EndpointArgs {
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Request timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    max_parallel: Option<usize>,
    #[arg(long)]
    retries: Option<u32>,
    /// Completions per instance (extra ones feed multi-prediction scoring).
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw dataset files into unified corpus records.
    Ingest {
        #[arg(long)]
        dataset: Option<DatasetId>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Column manifest for delimited-text datasets.
        #[arg(long)]
        columns: Option<PathBuf>,
    },
    /// Build per-task instances from the ingested corpus.
    Extract {
        #[command(flatten)]
        tasks: TaskSel,
        #[arg(long)]
        relation_map: Option<PathBuf>,
    },
    /// 60/20/20 split per dataset.
    Split {
        #[command(flatten)]
        tasks: TaskSel,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Class-balanced sampling of every split.
    Sample {
        #[command(flatten)]
        tasks: TaskSel,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_train: Option<u64>,
        #[arg(long)]
        n_val: Option<u64>,
        #[arg(long)]
        n_test: Option<u64>,
        /// Shrink sizes to what the smallest class allows instead of failing.
        #[arg(long)]
        cap: bool,
    },
    /// Render prompts for the sampled test split.
    Render {
        #[command(flatten)]
        tasks: TaskSel,
        #[arg(long)]
        mode: Option<PromptMode>,
        #[arg(long)]
        seed: Option<u64>,
        /// Template file replacing the built-in one (single task only).
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Query the chat-completions endpoint.
    Infer {
        #[command(flatten)]
        tasks: TaskSel,
        #[arg(long)]
        mode: Option<PromptMode>,
        #[command(flatten)]
        endpoint: EndpointArgs,
    },
    /// Parse generations and write the report.
    Score {
        #[command(flatten)]
        tasks: TaskSel,
        #[arg(long)]
        mode: Option<PromptMode>,
        /// Row label in the report; defaults to the endpoint model.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Score `<TASK>.gold.jsonl` + `<TASK>.predictions.jsonl` files in this directory instead.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Merge fine-tuned checkpoints into the base model.
    Merge {
        #[arg(long)]
        base: PathBuf,
        /// `TASK=path`, repeatable.
        #[arg(long = "model", required = true)]
        models: Vec<String>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// JSON object mapping task ids to hard/medium/easy.
        #[arg(long)]
        tiers: Option<PathBuf>,
    },
    /// Print a merge preset (or all of them) as JSON.
    EmitConfig {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// Write fine-tuning data and a trainer recipe.
    TrainRecipe {
        #[command(flatten)]
        tasks: TaskSel,
        #[arg(long)]
        multi_task: bool,
        #[arg(long, default_value = "meta-llama/Llama-3.1-8B-Instruct")]
        base_model: String,
    },
    /// Every stage from ingest to score, as configured.
    Pipeline,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new("run"),
    };
    if let Some(d) = &cli.run_dir {
        cfg.run_dir = d.clone();
    }
    Ok(cfg)
}

fn tasks(sel: &TaskSel, cfg: &RunConfig) -> Result<Vec<TaskId>> {
    if sel.tasks.is_empty() {
        if cfg.tasks.is_empty() {
            bail!("no tasks selected (use --task or \"tasks\" in the config)");
        }
        return Ok(cfg.tasks.clone());
    }
    let mut out = Vec::new();
    for t in &sel.tasks {
        if t.eq_ignore_ascii_case("all") {
            out.extend(TaskId::ALL);
        } else {
            out.push(t.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn seed(flag: Option<u64>, cfg: &RunConfig) -> Result<u64> {
    Ok(match flag {
        Some(s) => s,
        None => cfg.seed()?,
    })
}

fn endpoint(args: &EndpointArgs, cfg: &RunConfig) -> Result<EndpointConfig> {
    let mut e = match (&cfg.endpoint, &args.base_url, &args.model) {
        (Some(e), _, _) => e.clone(),
        (None, Some(url), Some(model)) => EndpointConfig::new(url, model),
        _ => bail!("endpoint needs --base-url and --model (or \"endpoint\" in the config)"),
    };
    if let Some(v) = &args.base_url {
        e.base_url = v.clone();
    }
    if let Some(v) = &args.model {
        e.model = v.clone();
    }
    if let Some(v) = args.temperature {
        e.temperature = v;
    }
    if let Some(v) = args.max_tokens {
        e.max_tokens = v;
    }
    if let Some(v) = args.timeout {
        e.timeout_secs = v;
    }
    if let Some(v) = args.max_parallel {
        e.max_parallel = v;
    }
    if let Some(v) = args.retries {
        e.retries = v;
    }
    if let Some(v) = args.samples {
        e.samples = v;
    }
    e.validate()?;
    Ok(e)
}

fn report(stage: &str, status: StageStatus) {
    match status {
        StageStatus::Ran => println!("{stage}: done"),
        StageStatus::Skipped => println!("{stage}: up to date"),
    }
}

fn template_override(
    flag: &Option<PathBuf>,
    tasks: &[TaskId],
    cfg: &RunConfig,
    task: TaskId,
) -> Result<Option<PathBuf>> {
    if let Some(p) = flag {
        if tasks.len() != 1 {
            bail!("--template applies to a single --task");
        }
        return Ok(Some(p.clone()));
    }
    Ok(cfg.template(task).map(Path::to_path_buf))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Ingest {
            dataset,
            input,
            columns,
        } => {
            let sources = match (dataset, input) {
                (Some(d), Some(p)) => vec![SourceSpec {
                    dataset: *d,
                    path: p.clone(),
                    manifest: columns.clone(),
                }],
                (None, None) if !cfg.sources.is_empty() => cfg.sources.clone(),
                _ => bail!("ingest needs --dataset and --input (or \"sources\" in the config)"),
            };
            let mut run = Run::open(&cfg.run_dir)?;
            for s in &sources {
                if !s.path.exists() {
                    bail!("{} does not exist", s.path.display());
                }
                report(&format!("ingest {}", s.dataset), pipeline::ingest(&mut run, s)?);
            }
        }
        Command::Extract {
            tasks: sel,
            relation_map,
        } => {
            let mut run = Run::open(&cfg.run_dir)?;
            let map = relation_map.clone().or(cfg.relation_map.clone());
            for t in tasks(sel, &cfg)? {
                report(&format!("extract {t}"), pipeline::extract(&mut run, t, map.as_deref())?);
            }
        }
        Command::Split { tasks: sel, seed: s } => {
            let seed = seed(*s, &cfg)?;
            let mut run = Run::open(&cfg.run_dir)?;
            for t in tasks(sel, &cfg)? {
                report(&format!("split {t}"), pipeline::split(&mut run, t, seed)?);
            }
        }
        Command::Sample {
            tasks: sel,
            seed: s,
            n_train,
            n_val,
            n_test,
            cap,
        } => {
            let seed = seed(*s, &cfg)?;
            let mut sizes = cfg.sizes;
            sizes.train = n_train.unwrap_or(sizes.train);
            sizes.val = n_val.unwrap_or(sizes.val);
            sizes.test = n_test.unwrap_or(sizes.test);
            let mut run = Run::open(&cfg.run_dir)?;
            for t in tasks(sel, &cfg)? {
                let st = pipeline::sample(&mut run, t, sizes, seed, *cap || cfg.cap_sizes)?;
                report(&format!("sample {t}"), st);
            }
        }
        Command::Render {
            tasks: sel,
            mode,
            seed: s,
            template,
        } => {
            let seed = seed(*s, &cfg)?;
            let mode = mode.unwrap_or(cfg.mode);
            let selected = tasks(sel, &cfg)?;
            let mut run = Run::open(&cfg.run_dir)?;
            for t in &selected {
                let tpl = template_override(template, &selected, &cfg, *t)?;
                report(
                    &format!("render {t}"),
                    pipeline::render(&mut run, *t, mode, seed, tpl.as_deref())?,
                );
            }
        }
        Command::Infer {
            tasks: sel,
            mode,
            endpoint: e,
        } => {
            let mode = mode.unwrap_or(cfg.mode);
            let endpoint = endpoint(e, &cfg)?;
            let mut run = Run::open(&cfg.run_dir)?;
            let mut failed = Vec::new();
            for t in tasks(sel, &cfg)? {
                match pipeline::infer(&mut run, t, mode, &endpoint, cfg.template(t)) {
                    Ok(st) => report(&format!("infer {t}"), st),
                    Err(err) => {
                        eprintln!("infer {t}: {err}");
                        failed.push(t);
                    }
                }
            }
            if !failed.is_empty() {
                bail!("inference incomplete for {failed:?}");
            }
        }
        Command::Score {
            tasks: sel,
            mode,
            model,
            seed: s,
            dir,
        } => {
            if let Some(d) = dir {
                let name = model.clone().unwrap_or_else(|| "model".into());
                let r = pipeline::score_dir(d, &name)?;
                print!("{}", argmine::metrics::render_table(&[(&name, &r)]));
                return Ok(());
            }
            let mode = mode.unwrap_or(cfg.mode);
            let name = match (model, &cfg.endpoint) {
                (Some(m), _) => m.clone(),
                (None, Some(e)) => e.model.clone(),
                (None, None) => "model".into(),
            };
            let seed = s.or(cfg.seed).unwrap_or(0);
            let mut run = Run::open(&cfg.run_dir)?;
            let st = pipeline::score(&mut run, &tasks(sel, &cfg)?, mode, &name, seed)?;
            report("score", st);
            let txt = run.report_dir(mode).join("report.txt");
            print!(
                "{}",
                std::fs::read_to_string(&txt).with_context(|| txt.display().to_string())?
            );
        }
        Command::Merge {
            base,
            models,
            preset,
            seed: s,
            out,
            tiers,
        } => {
            let seed = seed(*s, &cfg)?;
            let name = preset.clone().or(cfg.preset.clone()).context("merge needs --preset")?;
            let preset = merger::emit_preset(&name)?;
            let mut paths = BTreeMap::new();
            for m in models {
                let (task, path) = m
                    .split_once('=')
                    .with_context(|| format!("expected TASK=path, got {m:?}"))?;
                let task: TaskId = task.parse()?;
                if paths.insert(task, PathBuf::from(path)).is_some() {
                    bail!("{task} given twice");
                }
            }
            let tiers: TierAssignment = match tiers {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| p.display().to_string())?;
                    let t: BTreeMap<TaskId, DifficultyTier> = serde_json::from_str(&text)?;
                    t
                }
                None => merger::default_tiers(),
            };
            let m = merger::merge_run(base, &paths, &preset, &tiers, seed, out)?;
            println!("wrote {} (sha256 {})", out.display(), m.output_sha256);
        }
        Command::EmitConfig { preset, all } => {
            let value = if *all {
                let presets = merger::PRESET_NAMES
                    .iter()
                    .map(|n| merger::emit_preset(n))
                    .collect::<argmine::Result<Vec<_>>>()?;
                serde_json::to_value(presets)?
            } else {
                let name = preset
                    .clone()
                    .or(cfg.preset.clone())
                    .context("emit-config needs --preset or --all")?;
                serde_json::to_value(merger::emit_preset(&name)?)?
            };
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::TrainRecipe {
            tasks: sel,
            multi_task,
            base_model,
        } => {
            let selected = if sel.tasks.is_empty() && cfg.tasks.is_empty() && *multi_task {
                TaskId::ALL.to_vec()
            } else {
                tasks(sel, &cfg)?
            };
            let mut run = Run::open(&cfg.run_dir)?;
            for p in pipeline::train_recipe(&mut run, &selected, *multi_task, base_model)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Pipeline => {
            let r = pipeline::run_all(&cfg)?;
            let name = cfg.endpoint.as_ref().map(|e| e.model.as_str()).unwrap_or("model");
            print!("{}", argmine::metrics::render_table(&[(name, &r)]));
        }
    }
    Ok(())
}
