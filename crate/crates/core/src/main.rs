use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ttdreach::bws::BwsResult;
use ttdreach::frontend::{emit_tts, generate_random_ttd, run, FrontendError, Mode, RunConfig, TtsDocument};
use ttdreach::model::ThreadState;
use ttdreach::reach::Verdict;

#[derive(Parser)]
#[command(name = "ttdreach", version, about = "Coverability checker for thread-transition diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the target thread state is coverable.
    Check {
        file: PathBuf,
        /// Target thread state `s,l`.
        #[arg(long, value_parser = parse_state)]
        target: Option<ThreadState>,
        /// Initial thread state `s,l`; repeat for a box-shaped set.
        #[arg(long = "init", value_parser = parse_state)]
        init: Vec<ThreadState>,
        #[arg(long, value_enum, default_value_t = Mode::Symbolic)]
        mode: Mode,
        #[arg(long, default_value_t = 4096)]
        max_paths: usize,
        #[arg(long, default_value_t = 16)]
        max_models: usize,
        #[arg(long)]
        no_prune: bool,
        /// Print the witness run of a reachable verdict.
        #[arg(long)]
        witness: bool,
        /// Write one SMT-LIB file per path and refinement stage.
        #[arg(long, value_name = "DIR")]
        emit_smt: Option<PathBuf>,
    },
    /// Print a random TTD.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        shared: u32,
        #[arg(long)]
        local: u32,
        #[arg(long)]
        edges: usize,
    },
}

fn parse_state(s: &str) -> Result<ThreadState, String> {
    let (a, b) = s.split_once(',').ok_or("expected `s,l`")?;
    let shared = a.trim().parse().map_err(|_| format!("bad shared state `{a}`"))?;
    let local = b.trim().parse().map_err(|_| format!("bad local state `{b}`"))?;
    Ok(ThreadState::new(shared, local))
}

fn fail(e: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::init();
    match Cli::parse().command {
        Command::Gen {
            seed,
            shared,
            local,
            edges,
        } => match generate_random_ttd(seed, shared, local, edges) {
            Ok(ttd) => {
                print!("{}", emit_tts(&ttd));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e, 3),
        },
        Command::Check {
            file,
            target,
            init,
            mode,
            max_paths,
            max_models,
            no_prune,
            witness,
            emit_smt,
        } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", file.display()), 3),
            };
            let doc = match TtsDocument::parse(&text) {
                Ok(d) => d,
                Err(e) => return fail(format!("{}: {e}", file.display()), 3),
            };
            let config = RunConfig {
                mode,
                target,
                initial: init,
                max_paths,
                max_models,
                prune: !no_prune,
                emit_smt,
                witness,
                ..RunConfig::default()
            };
            let outcome = match run(&doc, &config) {
                Ok(o) => o,
                Err(e @ FrontendError::Contradiction { .. }) => return fail(e, 4),
                Err(e) => return fail(e, 3),
            };
            println!("{}", outcome.verdict_name());
            if let Some(report) = &outcome.report {
                if let Verdict::Unknown(why) = &report.verdict {
                    println!("reason: {why}");
                }
                if let (true, Verdict::Reachable(w)) = (config.witness, &report.verdict) {
                    print!("{w}");
                }
            }
            if let (None, Some(BwsResult::Coverable(c))) = (&outcome.report, &outcome.bws) {
                println!("minimal initial state: shared {} counts {:?}", c.shared, c.counts);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
    }
}
