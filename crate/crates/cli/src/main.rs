use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use patcorp::bpe::{self, BpeVocab};
use patcorp::corpus::write_jsonl;
use patcorp::filters::{FilterConfig, Filters};
use patcorp::minhash::MinHashSeeds;
use patcorp::par::Execution;
use patcorp::pipeline::{
    self, read_field_docs, run_dedup, run_filter, run_mlm_prep, run_phase1, run_tok_train, write_seeds, DedupOutputs, PipelineConfig,
    ReductionReport, RunManifest, RunOptions, Stage,
};
use patcorp::synth::{self, SynthConfig};
use patcorp::{Error, Result};

/// Patent corpus pipeline: cleaning, filtering, near-dedup, tokenizer training
/// and MLM example preparation.
#[derive(Parser)]
#[command(name = "patcorp", version)]
struct Cli {
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline TOML; only the sections the command needs are read.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig> {
        match &self.config {
            Some(p) => PipelineConfig::load(p),
            None => PipelineConfig::from_toml_str(""),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Clean raw records and keep one publication per family.
    Phase1 {
        #[arg(long, visible_alias = "in")]
        input: PathBuf,
        #[arg(long, visible_alias = "out")]
        output: PathBuf,
        #[arg(long, default_value = "rejects.jsonl")]
        rejects: PathBuf,
        /// Boilerplate prefix file; overrides the config.
        #[arg(long)]
        boilerplate: Option<PathBuf>,
        /// Also write the stage summary here.
        #[arg(long)]
        stats: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Apply the heuristic filter cascade to field documents.
    Filter {
        #[arg(long, visible_alias = "in")]
        input: PathBuf,
        #[arg(long, visible_alias = "out")]
        kept: PathBuf,
        #[arg(long)]
        dropped: PathBuf,
        /// Also write the verdict trail of every kept document.
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Filter-only TOML (`order`, `[language]`, `[repetition]`, ...); overrides the config.
        #[arg(long)]
        filters: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// MinHash-LSH near-duplicate removal per field kind.
    Dedup {
        #[arg(long, visible_alias = "in")]
        input: PathBuf,
        #[arg(long, visible_alias = "out")]
        output: PathBuf,
        /// Removed documents with their representatives.
        #[arg(long, visible_alias = "manifest")]
        duplicates: PathBuf,
        /// Survivors regrouped into records.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        signatures: Option<PathBuf>,
        /// Seed file: read if it exists, otherwise derived from the config and written.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Tokenizer training, encoding and statistics.
    Tok {
        #[command(subcommand)]
        cmd: TokCommand,
    },
    /// Encode, pack and mask records into binary example shards.
    MlmPrep {
        #[arg(long, visible_alias = "in")]
        input: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "train")]
        stem: String,
        /// Work partitions; never changes the output.
        #[arg(long, default_value_t = 8)]
        shards: usize,
        /// Mask rate; overrides the config.
        #[arg(long)]
        mask: Option<f64>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Run stages from a pipeline config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset, e.g. `filter,dedup`.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
        /// Skip stages whose digests still match the manifest.
        #[arg(long)]
        resume: bool,
        /// Re-run stages whose recorded outputs changed instead of failing.
        #[arg(long)]
        force: bool,
    },
    /// Print the reductions table.
    Report {
        /// A run manifest.
        #[arg(long, conflicts_with_all = ["docs", "tokens"])]
        manifest: Option<PathBuf>,
        /// Phase-1 document counts `BEFORE,AFTER`.
        #[arg(long, value_delimiter = ',', requires = "tokens")]
        docs: Vec<u64>,
        /// Phase-2 token counts `BEFORE,AFTER`.
        #[arg(long, value_delimiter = ',', requires = "docs")]
        tokens: Vec<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic raw corpus.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1000)]
        docs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum TokCommand {
    /// Train a vocabulary on records or field documents.
    Train {
        #[arg(long, visible_alias = "in")]
        input: PathBuf,
        #[arg(long, visible_alias = "out")]
        output: PathBuf,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        min_freq: Option<u64>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Encode text from `--text` or stdin lines; prints one JSON id list per line.
    Encode {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        text: Option<String>,
    },
    /// Token entropy and UNK rate of a document sample.
    Stats {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, visible_alias = "sample")]
        input: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_or_write_seeds(path: Option<&Path>, master: u64) -> Result<MinHashSeeds> {
    match path {
        Some(p) if p.exists() => MinHashSeeds::load(p),
        Some(p) => {
            let s = MinHashSeeds::from_master(master);
            write_seeds(p, &s)?;
            Ok(s)
        }
        None => Ok(MinHashSeeds::from_master(master)),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.cmd {
        Command::Phase1 { input, output, rejects, boilerplate, stats, config } => {
            let mut cfg = config.load()?;
            if boilerplate.is_some() {
                cfg.phase1.boilerplate = boilerplate;
            }
            let s = run_phase1(&input, &cfg.fields, &cfg.phase1_config()?, &output, &rejects, exec)?;
            if let Some(p) = stats {
                std::fs::write(&p, serde_json::to_string_pretty(&s)?).map_err(|e| Error::io(&p, e))?;
            }
            print_json(&s)
        }
        Command::Filter { input, kept, dropped, audit, filters, config } => {
            let cfg = config.load()?;
            let filters = match filters {
                Some(p) => Filters::new(FilterConfig::load(&p)?)?,
                None => cfg.filters()?,
            };
            let stats = run_filter(&input, &filters, &kept, &dropped, audit.as_deref(), exec)?;
            print_json(&stats)
        }
        Command::Dedup { input, output, duplicates, records, signatures, seeds, config } => {
            let cfg = config.load()?;
            let seeds = load_or_write_seeds(seeds.as_deref(), cfg.dedup.seed)?;
            let outs = DedupOutputs {
                unique: &output,
                records: records.as_deref(),
                duplicates: &duplicates,
                signatures: signatures.as_deref(),
            };
            print_json(&run_dedup(&input, &cfg.dedup, &seeds, &outs, exec)?)
        }
        Command::Tok { cmd } => tok(cmd, exec),
        Command::MlmPrep { input, vocab, out_dir, stem, shards, mask, max_len, seed, config } => {
            let mut cfg = config.load()?;
            cfg.mlm.mask_rate = mask.unwrap_or(cfg.mlm.mask_rate);
            cfg.mlm.max_len = max_len.unwrap_or(cfg.mlm.max_len);
            cfg.mlm.seed = seed.unwrap_or(cfg.mlm.seed);
            if shards == 0 {
                return Err(Error::config("shards", "must be positive"));
            }
            let vocab = BpeVocab::load(&vocab)?;
            print_json(&run_mlm_prep(&input, &vocab, &cfg.mlm, shards, &out_dir, &stem, exec)?)
        }
        Command::Run { config, stages, resume, force } => {
            let stages = stages
                .iter()
                .map(|s| Stage::parse(s.trim()).ok_or_else(|| Error::config("stages", format!("unknown stage `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            let opts = RunOptions { stages, resume, force, exec };
            let s = pipeline::run(&config, &opts)?;
            for st in &s.skipped {
                info!("skipped {st}");
            }
            eprintln!(
                "executed [{}], skipped [{}]",
                s.executed.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "),
                s.skipped.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
            );
            print_json(&s.manifest.stats())
        }
        Command::Report { manifest, docs, tokens, json } => {
            let report = match manifest {
                Some(p) => ReductionReport::from_manifest(&RunManifest::load(&p)?)?,
                None if docs.len() == 2 && tokens.len() == 2 => {
                    ReductionReport::from_counts((docs[0], docs[1]), (tokens[0], tokens[1]))?
                }
                None => return Err(Error::config("report", "pass --manifest or both --docs and --tokens")),
            };
            if json {
                println!("{}", report.to_json()?);
            } else {
                print!("{}", report.to_text());
            }
            Ok(())
        }
        Command::Synth { output, docs, seed } => {
            let recs = synth::records(&SynthConfig { docs, seed, ..Default::default() });
            let n = write_jsonl(&output, &recs)?;
            info!("wrote {n} records to {}", output.display());
            Ok(())
        }
    }
}

fn tok(cmd: TokCommand, exec: Execution) -> Result<()> {
    match cmd {
        TokCommand::Train { input, output, vocab_size, min_freq, config } => {
            let mut cfg = config.load()?.tokenizer;
            if let Some(v) = vocab_size {
                cfg.vocab_size = v;
            }
            if let Some(m) = min_freq {
                cfg.min_freq = m;
            }
            let (_, summary) = run_tok_train(&input, &cfg, &output, exec)?;
            print_json(&summary)
        }
        TokCommand::Encode { vocab, text } => {
            let vocab = BpeVocab::load(&vocab)?;
            let lines: Vec<String> = match text {
                Some(t) => vec![t],
                None => std::io::stdin().lock().lines().collect::<std::io::Result<_>>()?,
            };
            let mut out = std::io::stdout().lock();
            for l in lines {
                let ids = bpe::encode(&l, &vocab).ids;
                writeln!(out, "{}", serde_json::to_string(&ids)?)?;
            }
            Ok(())
        }
        TokCommand::Stats { vocab, input } => {
            let vocab = BpeVocab::load(&vocab)?;
            let texts: Vec<String> = read_field_docs(&input)?.into_iter().map(|d| d.text).collect();
            print_json(&serde_json::json!({
                "documents": texts.len(),
                "token_entropy_bits": bpe::token_entropy(&texts, &vocab)?,
                "unk_rate": bpe::unk_rate(&texts, &vocab)?,
            }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
