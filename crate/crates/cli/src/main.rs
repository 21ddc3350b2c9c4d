mod args;
mod commands;
mod error;
mod pipeline;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use tunescape::report::Report;

use args::{threads_from_env, Cli, Command, Common, Format};
use commands::Outcome;
use error::{CliError, CliResult, Status};

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Features(a) => &a.inner.common,
        Command::Dominate(a) => &a.inner.common,
        Command::Fidelity(a) => &a.common,
        Command::Influence(a) => &a.inner.common,
        Command::Tune(a) => &a.inner.common,
        Command::Records(a) => &a.inner.common,
        Command::RankTrain(a) => &a.common,
        Command::RankPredict(a) => &a.common,
        Command::RankEval(a) => &a.common,
        Command::Synth(a) => &a.common,
    }
}

fn dispatch(cmd: &Command) -> CliResult<Outcome> {
    match cmd {
        Command::Features(a) => commands::features(a),
        Command::Dominate(a) => commands::dominate(a),
        Command::Fidelity(a) => commands::fidelity(a),
        Command::Influence(a) => commands::influence(a),
        Command::Tune(a) => commands::tune(a),
        Command::Records(a) => commands::records(a),
        Command::RankTrain(a) => commands::rank_train(a),
        Command::RankPredict(a) => commands::rank_predict(a),
        Command::RankEval(a) => commands::rank_eval(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn emit(outcome: Outcome, opts: &Common) -> CliResult<Status> {
    let text = match opts.format {
        Format::Table => outcome.table,
        Format::Machine => Report::new(outcome.command, outcome.manifest, outcome.result).to_machine()?,
    };
    match &opts.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::internal(e.to_string()))?;
        }
    }
    Ok(match outcome.degenerate {
        Some(reason) => {
            error!("{reason}");
            Status::Degenerate
        }
        None => Status::Ok,
    })
}

fn run(cli: &Cli) -> CliResult<Status> {
    if let Some(n) = threads_from_env()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let outcome = dispatch(&cli.command)?;
    emit(outcome, common(&cli.command))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => status.into(),
        Err(e) => {
            error!("{e}");
            e.status.into()
        }
    }
}
