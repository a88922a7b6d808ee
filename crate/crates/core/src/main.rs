use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kbvqa::pipeline::{Pipeline, PipelineConfig, Split};
use kbvqa::synth::{write_world, WorldConfig};
use kbvqa::vqalstm::Modalities;
use kbvqa::{Error, Result};

#[derive(Parser)]
#[command(name = "kbvqa", version, about = "Knowledge-assisted visual question answering")]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true, default_value = "kbvqa.toml")]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// SPARQL endpoint URL, overriding the config.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Knowledge cache file, overriding the config.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Enabled inputs, e.g. `att,cap,know` or `att+know`.
    #[arg(long, global = true)]
    modalities: Option<String>,
    /// Only print errors and command results.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize question files and build the answer vocabulary.
    Prepare,
    /// Train the region attribute classifier.
    TrainAttr,
    /// Train the attribute-conditioned caption model.
    TrainCaptioner,
    /// Train paragraph vectors on the fetched knowledge corpus.
    TrainDoc2vec,
    /// Query the knowledge base for every attribute term.
    FetchKb,
    /// Compute attribute, caption and knowledge vectors per image.
    Precompute,
    /// Train the answer model on the enabled modalities.
    TrainVqa,
    /// Answer a split and write the accuracy/WUPS report.
    Eval {
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Answer one question about a precomputed image.
    Ask {
        #[arg(long)]
        image: String,
        /// Question text; read from stdin when omitted.
        question: Option<String>,
    },
    /// Write a generated dataset with a ready config into a directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        entities: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(endpoint) = &cli.endpoint {
        config.knowledge.endpoint = endpoint.clone();
    }
    if let Some(cache) = &cli.cache {
        config.paths.cache = cache.clone();
    }
    if let Some(m) = &cli.modalities {
        config.modalities = m.parse::<Modalities>()?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Synth { out, entities } = &cli.command {
        let world = WorldConfig { entities: *entities, ..WorldConfig::default() };
        let w = write_world(out, &world, cli.seed.unwrap_or(1))?;
        println!("{}", w.config_path.display());
        return Ok(());
    }
    let pipeline = Pipeline::new(load_config(&cli)?)?;
    match &cli.command {
        Command::Prepare => print_json(&pipeline.prepare()?),
        Command::TrainAttr => print_curve("attr", &pipeline.train_attr()?),
        Command::TrainCaptioner => {
            let r = pipeline.train_captioner()?;
            print_curve("captioner", &r.losses)?;
            println!("token accuracy {:.4}", r.final_accuracy);
            Ok(())
        }
        Command::TrainDoc2vec => print_curve("doc2vec", &pipeline.train_doc2vec()?),
        Command::FetchKb => print_json(&pipeline.fetch_kb()?),
        Command::Precompute => print_json(&pipeline.precompute()?),
        Command::TrainVqa => print_curve("vqa", &pipeline.train_vqa()?.losses),
        Command::Eval { split } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            print!("{}", pipeline.eval(split)?.render());
            Ok(())
        }
        Command::Ask { image, question } => {
            let question = match question {
                Some(q) => q.clone(),
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s).map_err(|e| Error::Io { path: "<stdin>".into(), source: e })?;
                    s
                }
            };
            let ans = pipeline.ask(image, &question)?;
            println!("{}\t{:.4}", ans.tokens.join(" "), ans.log_prob);
            Ok(())
        }
        Command::Synth { .. } => unreachable!(),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn print_curve(name: &str, losses: &[f32]) -> Result<()> {
    match (losses.first(), losses.last()) {
        (Some(a), Some(b)) => println!("{name}: {} epochs, loss {a:.4} -> {b:.4}", losses.len()),
        _ => println!("{name}: no epochs run"),
    }
    Ok(())
}
