use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use forecrew::bench::{run_bench, summary_table, BenchMode, ScenarioGenerator};
use forecrew::model::{apply_deltas, load_instance, DeltaDocument, Plan, ProblemInstance};
use forecrew::narrative::{evaluate, generate_corpus, ExtractionRecord, Extractor, HttpChatClient, TaskKnowledgeBase};
use forecrew::{build_program, plan_delta, replan, solve, verify_plan, ReplanContext, SolveLimits};
use forecrew_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "forecrew", version, about = "Robot task allocation, replanning and narrative updates")]
struct Cli {
    /// Seed for corpus and scenario generation.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Use the rule parser instead of a language model.
    #[arg(long, global = true)]
    offline: bool,
    /// Output file, or directory for `bench`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Budget {
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 120.0)]
    time_limit: f64,
    /// Node budget; runs that stop on it are reproducible.
    #[arg(long)]
    nodes: Option<u64>,
}

impl Budget {
    fn limits(&self) -> SolveLimits {
        SolveLimits {
            time_budget: Duration::from_secs_f64(self.time_limit),
            node_budget: self.nodes.unwrap_or(u64::MAX),
            ..SolveLimits::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance document.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        budget: Budget,
    },
    /// Replan the part of a plan that has not started by `--at-minutes`.
    Replan {
        /// The updated instance.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        at_minutes: i64,
        /// A `{"changes": [...]}` file applied to the instance first.
        #[arg(long)]
        deltas: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Check a plan against an instance.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Turn a narrative into constraint changes.
    Extract {
        #[arg(long)]
        narrative: String,
        /// Defaults to the bundled case study.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
    },
    /// Generate a labelled narrative corpus.
    GenCorpus {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        groups: usize,
        #[arg(long, default_value_t = 100)]
        per_group: usize,
    },
    /// Re-extract a corpus and score the result.
    EvalLlm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        /// Where the three metrics go; `--out` receives the scored records.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
    },
    /// Solve seeded random scenarios and summarize them.
    Bench {
        /// original, windows, conflicts, replanning or all.
        #[arg(long, default_value = "all")]
        mode: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 120.0)]
        time_limit: f64,
        /// Node budget per solve; keeps seeded runs byte-identical.
        #[arg(long, default_value_t = 200_000)]
        nodes: u64,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::from_default_env()).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_instance(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn read_plan(path: &Path) -> Result<Plan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Plan::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

fn knowledge_base(instance: Option<&Path>) -> Result<TaskKnowledgeBase> {
    Ok(match instance {
        Some(p) => TaskKnowledgeBase::from_instance(&read_instance(p)?),
        None => TaskKnowledgeBase::case_study(),
    })
}

fn extractor(offline: bool, model: Option<&str>) -> Result<Extractor> {
    if offline {
        return Ok(Extractor::Rules);
    }
    let client = HttpChatClient::from_env(model).context("no model endpoint configured (or pass --offline)")?;
    Ok(Extractor::Model(Arc::new(client)))
}

/// Writes to `--out` or prints.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Solve { instance, budget } => {
            let instance = read_instance(&instance)?;
            let (plan, stats) = solve(&build_program(&instance)?, &budget.limits())?;
            eprintln!(
                "{:?}: makespan {} min, objective {}, {} nodes in {:.2} s",
                plan.status, plan.makespan, plan.objective, stats.nodes, stats.wall_time_secs
            );
            if !plan.status.is_feasible() {
                return Ok(false);
            }
            let report = verify_plan(&instance, &plan);
            emit(out, &plan.to_json())?;
            if !report.is_empty() {
                eprintln!("{report}");
            }
            Ok(report.is_empty())
        }
        Command::Replan { instance, plan, at_minutes, deltas, budget } => {
            let mut instance = read_instance(&instance)?;
            if let Some(path) = deltas {
                let doc: DeltaDocument = serde_json::from_str(&fs::read_to_string(&path)?)?;
                instance = apply_deltas(&instance, &doc.to_deltas()?)?;
            }
            let original = read_plan(&plan)?;
            let ctx = ReplanContext::new(original.clone(), at_minutes, instance.clone());
            let (_, future) = ctx.partition();
            let (revised, _) = replan(&ctx, &budget.limits())?;
            let (dx, dt) = plan_delta(&original, &revised, &future)?;
            eprintln!(
                "{:?}: makespan {} -> {} min, reassignments {dx}, retiming {dt} min",
                revised.status, original.makespan, revised.makespan
            );
            emit(out, &revised.to_json())?;
            Ok(verify_plan(&instance, &revised).is_empty())
        }
        Command::Verify { instance, plan } => {
            let report = verify_plan(&read_instance(&instance)?, &read_plan(&plan)?);
            println!("{report}");
            Ok(report.is_empty())
        }
        Command::Extract { narrative, instance, model } => {
            let kb = knowledge_base(instance.as_deref())?;
            let extraction = extractor(cli.offline, model.as_deref())?.extract(&narrative, &kb)?;
            for d in &extraction.diagnostics {
                eprintln!("dropped {d}");
            }
            emit(out, &DeltaDocument::from_deltas(&extraction.deltas).to_json())?;
            Ok(extraction.diagnostics.is_empty())
        }
        Command::GenCorpus { instance, groups, per_group } => {
            let kb = knowledge_base(instance.as_deref())?;
            let corpus = generate_corpus(&kb, cli.seed, groups, per_group);
            emit(out, &serde_json::to_string_pretty(&corpus)?)?;
            Ok(true)
        }
        Command::EvalLlm { corpus, instance, model, report, parallelism } => {
            let kb = knowledge_base(instance.as_deref())?;
            let records: Vec<ExtractionRecord> = serde_json::from_str(&fs::read_to_string(&corpus)?)?;
            let extractor = extractor(cli.offline, model.as_deref())?;
            let scored = extractor.run_corpus(&kb, &records, parallelism);
            let metrics = evaluate(&scored)?;
            let text = serde_json::to_string_pretty(&metrics)?;
            match report {
                Some(p) => fs::write(&p, &text)?,
                None => println!("{text}"),
            }
            if let Some(p) = out {
                fs::write(p, serde_json::to_string_pretty(&scored)?)?;
            }
            Ok(true)
        }
        Command::Bench { mode, count, time_limit, nodes } => {
            let modes = match mode.as_str() {
                "all" => BenchMode::ALL.to_vec(),
                m => vec![m.parse::<BenchMode>().map_err(anyhow::Error::msg)?],
            };
            let limits = SolveLimits {
                time_budget: Duration::from_secs_f64(time_limit),
                node_budget: nodes,
                ..SolveLimits::default()
            };
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
            }
            let generator = ScenarioGenerator::new(cli.seed);
            let mut rows = Vec::new();
            let mut clean = true;
            for mode in modes {
                let report = run_bench(&generator, mode, count, &limits);
                if let Some(dir) = out {
                    fs::write(dir.join(format!("{mode}.csv")), report.csv())?;
                    fs::write(dir.join(format!("{mode}_timing.csv")), report.timing_csv())?;
                }
                let summary = report.summary();
                clean &= summary.failures == 0;
                rows.push(summary);
            }
            let table = summary_table(&rows);
            print!("{table}");
            if let Some(dir) = out {
                fs::write(dir.join("summary.txt"), &table)?;
            }
            Ok(clean)
        }
        Command::Serve { addr, data_dir, ui_dir } => {
            let mut config = ServiceConfig::from_env();
            if cli.offline {
                config.offline = true;
            }
            config.data_dir = data_dir.or(config.data_dir);
            config.ui_dir = ui_dir.or(config.ui_dir);
            let state = AppState::new(config)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(forecrew_service::serve(state, addr))?;
            Ok(true)
        }
    }
}

