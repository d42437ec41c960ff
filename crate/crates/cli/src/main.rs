use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stvision::pipeline::{Pipeline, PipelineConfig};
use stvision::synthgen::{color_action_dataset, default_action_classes, write_dataset};

#[derive(Parser)]
#[command(
    name = "stvision",
    version,
    about = "Space-time interest points, HoGHoF/HueSTIP descriptors and bag-of-features classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic four-class colour/motion dataset with a manifest.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Detect interest points and compute descriptors for every clip.
    Extract(Common),
    /// Sample the visual vocabulary from training descriptors.
    Vocab(Common),
    /// Encode every clip as a bag-of-features histogram.
    Encode(Common),
    /// Train the one-vs-one classifiers.
    Train(Common),
    /// Evaluate on the test split and write per-class reports.
    Eval(Common),
    /// All five steps for every selected descriptor kind.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// stip, huestip or both.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    /// Any other config key, as key=value; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        let mut set = |k: &str, v: String| cfg.set(k, &v).with_context(|| format!("--{k}"));
        if let Some(v) = &self.manifest {
            set("manifest", v.display().to_string())?;
        }
        if let Some(v) = &self.output {
            set("output", v.display().to_string())?;
        }
        if let Some(v) = &self.kind {
            set("kind", v.clone())?;
        }
        if let Some(v) = self.seed {
            set("seed", v.to_string())?;
        }
        if let Some(v) = self.vocab_size {
            set("vocab_size", v.to_string())?;
        }
        if let Some(v) = self.c {
            set("c", v.to_string())?;
        }
        for o in &self.overrides {
            let Some((k, v)) = o.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {o:?}");
            };
            cfg.set(k, v).with_context(|| format!("--set {o}"))?;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Upto {
    Extract,
    Vocab,
    Encode,
    Train,
    Eval,
}

fn run_stages(common: &Common, upto: Upto) -> Result<()> {
    let pipeline = Pipeline::new(common.config()?)?;
    let cfg = pipeline.config();
    for &kind in &cfg.kinds {
        let clips = pipeline.extract(kind)?;
        let n: usize = clips.iter().map(|c| c.records.len()).sum();
        println!("{kind}: {} clips, {n} descriptors", clips.len());
        if upto == Upto::Extract {
            continue;
        }
        let (vkey, vocab) = pipeline.vocabulary(kind, &clips)?;
        println!("{kind}: vocabulary of {} words ({vkey})", vocab.len());
        if upto == Upto::Vocab {
            continue;
        }
        let (ekey, hists) = pipeline.encode(kind, &clips, &vkey, &vocab)?;
        let empty = hists.iter().filter(|h| h.is_empty()).count();
        println!(
            "{kind}: encoded {} clips, {empty} without features ({ekey})",
            hists.len()
        );
        if upto == Upto::Encode {
            continue;
        }
        let (mkey, model) = pipeline.train(&clips, &ekey, &hists)?;
        println!(
            "{kind}: {} pairwise models, C = {} ({mkey})",
            model.pairs.len(),
            model.c
        );
        if upto == Upto::Train {
            continue;
        }
        let (report, path) = pipeline.evaluate(kind, &mkey, &model, &clips, &hists)?;
        println!(
            "{kind}: report written to {}\n{}",
            path.display(),
            report.to_text()
        );
    }
    print_stats(&pipeline);
    Ok(())
}

fn print_stats(pipeline: &Pipeline) {
    for (stage, s) in pipeline.stats() {
        if s.hits + s.misses > 0 {
            eprintln!("cache {stage}: {} hits, {} misses", s.hits, s.misses);
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            per_class,
            seed,
        } => {
            let clips = color_action_dataset(per_class, &default_action_classes(), seed)?;
            write_dataset(&out, &clips)?;
            println!(
                "wrote {} clips and {}",
                clips.len(),
                out.join("manifest.tsv").display()
            );
            Ok(())
        }
        Command::Extract(c) => run_stages(&c, Upto::Extract),
        Command::Vocab(c) => run_stages(&c, Upto::Vocab),
        Command::Encode(c) => run_stages(&c, Upto::Encode),
        Command::Train(c) => run_stages(&c, Upto::Train),
        Command::Eval(c) => run_stages(&c, Upto::Eval),
        Command::Run(c) => {
            let pipeline = Pipeline::new(c.config()?)?;
            let out = pipeline.run()?;
            for r in &out.results {
                println!("== {} (C = {}) ==\n{}", r.kind, r.c, r.report.to_text());
            }
            println!("{}", out.comparison);
            print_stats(&pipeline);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            for cause in e.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::FAILURE
        }
    }
}
