mod args;
mod commands;
mod config;
mod manifest;

use std::fs;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use skillgraph_core::pathfinder::PathError;

use args::{Cli, Command};
use commands::Run;
use manifest::{FileDigest, RunManifest};

/// Analysis-level failures exit with 1; everything else is an input or usage
/// problem and exits with 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    let no_path = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<PathError>(), Some(PathError::NoPath { .. })));
    if no_path {
        1
    } else {
        2
    }
}

fn run(argv: Vec<String>, cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let started_at = chrono::Utc::now().to_rfc3339();
    let mut r = Run {
        out: cli.out.clone(),
        seed: cli.seed,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    if let Some(c) = &cli.config {
        r.inputs.push(c.clone());
    }
    match &cli.command {
        Command::Build(a) => commands::build(&mut r, a)?,
        Command::Enrich(a) => commands::enrich_graph(&mut r, a)?,
        Command::GenFixture(a) => commands::gen_fixture(&mut r, a)?,
        Command::Stats(a) => commands::stats(&mut r, a)?,
        Command::Linkpred(c) => commands::linkpred(&mut r, c)?,
        Command::Path(a) => commands::path(&mut r, a)?,
        Command::Distances(a) => commands::distances(&mut r, a)?,
        Command::Nearest(a) => commands::nearest(&mut r, a)?,
        Command::Relevance(a) => commands::relevance(&mut r, a)?,
    }
    let manifest = RunManifest {
        tool: "skillgraph",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        command_line: argv,
        config: serde_json::to_value(&cli)?,
        seed: cli.seed,
        threads: cli.threads,
        inputs: r.inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
        outputs: r.outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
    };
    let path = manifest.write(&cli.out)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let resolved = match config::apply(argv.clone()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&resolved) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(argv, cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
