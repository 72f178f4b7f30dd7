mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use commands::{Globals, Outcome};
use plshoot::Error;

fn report(code: &str, message: &str, witness: Option<&plshoot::Witness>) {
    let rec = json!({ "code": code, "message": message, "witness": witness });
    eprintln!("{rec}");
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn run() -> u8 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            report("usage", first, None);
            return 2;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            report("usage", "--threads must be positive", None);
            return 2;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            report("usage", &e.to_string(), None);
            return 2;
        }
    };
    let g = Globals { rmax: cli.rmax };
    let result = pool.install(|| match cli.command {
        Command::Check(a) => commands::check(a),
        Command::Integrate(a) => commands::integrate(&g, a),
        Command::Classify(a) => commands::classify_cmd(&g, a),
        Command::GroundState(a) => commands::ground_state(&g, a),
        Command::Dirichlet(a) => commands::dirichlet(&g, a),
        Command::Variational(a) => commands::variational(&g, a),
        Command::Transform(a) => commands::transform(a),
        Command::Verify(a) => commands::verify(&g, a),
    });
    match result {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::VerifyFailed) => {
            report("verify_failed", "one or more verification checks failed", None);
            3
        }
        Err(e) => {
            report(e.code(), &e.to_string(), e.witness());
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run())
}
