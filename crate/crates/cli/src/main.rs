use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inkportrait::{cmd_plot, cmd_run, cmd_sketch, cmd_train, CliResult, PipelineConfig};

/// Turn an aligned portrait photo into a pen-plotter drawing.
///
/// Exit status: 0 success, 2 configuration error, 3 data error, 1 anything else.
#[derive(Parser)]
#[command(name = "inkportrait", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a decoder checkpoint and write the loss log.
    Train(Common),
    /// Synthesize and post-process the sketch.
    Sketch(Common),
    /// Compile the binary sketch into G-code, SVG and a simulation report.
    Plot(Common),
    /// Sketch then plot, with a hashed manifest.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Train without the sparsity term.
    #[arg(long)]
    no_sparsity: bool,
    /// Skip eyebrow, eyeball and hair fusion.
    #[arg(long)]
    no_fusion: bool,
    /// Skip fill loops.
    #[arg(long)]
    no_fills: bool,
}

impl Common {
    fn load(&self) -> CliResult<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        if let Some(o) = &self.out {
            cfg.paths.out = o.clone();
        }
        cfg.toggles.sparsity &= !self.no_sparsity;
        cfg.toggles.fusion &= !self.no_fusion;
        cfg.toggles.fills &= !self.no_fills;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(c) => {
            let out = cmd_train(&c.load()?)?;
            if let Some(last) = out.log.last() {
                println!(
                    "trained {} iterations, final loss {:.6}",
                    out.log.len(),
                    last.terms.total
                );
            }
        }
        Command::Sketch(c) => {
            let out = cmd_sketch(&c.load()?)?;
            println!("sketch written: {} ink pixels", out.sketch.ink_count());
        }
        Command::Plot(c) => {
            let r = cmd_plot(&c.load()?)?.report;
            println!(
                "{} strokes, {:.1} mm drawn, {:.1} mm travel, {:.1} s, jaccard {:.4}",
                r.strokes, r.draw_mm, r.travel_mm, r.estimated_seconds, r.jaccard
            );
        }
        Command::Run(c) => {
            let m = cmd_run(&c.load()?)?;
            println!("run {}: {} artifacts", m.status, m.artifacts.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("inkportrait: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
