use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qhnf::config::{Config, Tolerances};
use qhnf::document::MatrixDocument;
use qhnf::error::Error;
use qhnf::normal_form::normal_form;
use qhnf::report::{check, check_to_text, error_json, to_json, to_text};
use qhnf::scan::{scan_two_mode, Axis};

/// Normal forms of quadratic bosonic Hamiltonians.
#[derive(Parser)]
#[command(name = "qhnf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the normal form, transform and stability verdict of a matrix document.
    Analyze {
        /// Matrix document; `-` or omitted reads standard input.
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        tolerances: ToleranceFlags,
        /// Always run the general pipeline, even for stable spectra.
        #[arg(long)]
        no_fast_path: bool,
    },
    /// Validate a document and print its spectrum without building a transform.
    Check {
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        tolerances: ToleranceFlags,
    },
    /// Sample the two-oscillator stability diagram on an (eta, lambda) grid.
    Scan {
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        eta_min: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        eta_max: f64,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        lambda_min: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        lambda_max: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 41)]
        steps: usize,
        /// Table destination; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Also write the boundary-flagged cells to this file.
        #[arg(long)]
        boundaries: Option<PathBuf>,
        #[command(flatten)]
        tolerances: ToleranceFlags,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct ToleranceFlags {
    /// Relative eigenvalue clustering threshold.
    #[arg(long)]
    cluster_tol: Option<f64>,
    /// Relative numerical-rank threshold.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Relative tolerance of the final block verification.
    #[arg(long)]
    verify_tol: Option<f64>,
    /// Relative tolerance of the symplectic condition.
    #[arg(long)]
    symplectic_tol: Option<f64>,
}

impl ToleranceFlags {
    fn apply(&self, mut tol: Tolerances) -> Tolerances {
        if let Some(v) = self.cluster_tol {
            tol.cluster = v;
        }
        if let Some(v) = self.rank_tol {
            tol.rank = v;
        }
        if let Some(v) = self.verify_tol {
            tol.verify = v;
        }
        if let Some(v) = self.symplectic_tol {
            tol.symplectic = v;
        }
        tol
    }
}

enum Failure {
    Pipeline(Error),
    Io { context: String, source: io::Error, exit: u8 },
    Usage(String),
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    let mut text = String::new();
    match path {
        None => io::stdin().read_to_string(&mut text).map(|_| text),
        Some(p) if p == Path::new("-") => io::stdin().read_to_string(&mut text).map(|_| text),
        Some(p) => fs::read_to_string(p),
    }
    .map_err(|source| Failure::Io {
        context: format!("cannot read {}", path.map_or("standard input".into(), |p| p.display().to_string())),
        source,
        exit: 1,
    })
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|source| Failure::Io {
        context: format!("cannot write {}", path.display()),
        source,
        exit: 2,
    })
}

/// Document tolerances first, then command-line overrides.
fn load(input: Option<&Path>, flags: &ToleranceFlags) -> Result<(MatrixDocument, Tolerances), Failure> {
    let doc = MatrixDocument::parse(&read_input(input)?).map_err(Failure::Pipeline)?;
    let tol = flags.apply(doc.effective_tolerances(&Tolerances::default()));
    Ok((doc, tol))
}

fn run(command: Command) -> Result<String, (Failure, Format)> {
    match command {
        Command::Analyze { input, format, tolerances, no_fast_path } => {
            let fail = |f| (f, format);
            let (doc, tol) = load(input.as_deref(), &tolerances).map_err(fail)?;
            let config = Config { tolerances: tol, bogoliubov_fast_path: !no_fast_path };
            let report =
                doc.hamiltonian(&tol).and_then(|m| normal_form(&m, &config)).map_err(|e| fail(Failure::Pipeline(e)))?;
            Ok(match format {
                Format::Text => to_text(&report),
                Format::Json => to_json(&report) + "\n",
            })
        }
        Command::Check { input, format, tolerances } => {
            let fail = |f| (f, format);
            let (doc, tol) = load(input.as_deref(), &tolerances).map_err(fail)?;
            let report = doc.hamiltonian(&tol).and_then(|m| check(&m, &tol)).map_err(|e| fail(Failure::Pipeline(e)))?;
            Ok(match format {
                Format::Text => check_to_text(&report),
                Format::Json => serde_json::to_string_pretty(&report).expect("check report serializes") + "\n",
            })
        }
        Command::Scan { eta_min, eta_max, lambda_min, lambda_max, steps, output, boundaries, tolerances } => {
            let fail = |f| (f, Format::Text);
            let finite = [eta_min, eta_max, lambda_min, lambda_max].iter().all(|x| x.is_finite());
            if !finite || steps == 0 {
                return Err(fail(Failure::Usage("scan ranges must be finite and steps positive".into())));
            }
            let config = Config { tolerances: tolerances.apply(Tolerances::default()), ..Config::default() };
            let grid =
                scan_two_mode(Axis::new(eta_min, eta_max, steps), Axis::new(lambda_min, lambda_max, steps), &config);
            if let Some(path) = boundaries {
                write_output(&path, &grid.boundary_table()).map_err(fail)?;
            }
            match output {
                Some(path) => {
                    write_output(&path, &grid.to_table()).map_err(fail)?;
                    Ok(String::new())
                }
                None => Ok(grid.to_table()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err((Failure::Pipeline(e), format)) => {
            match format {
                Format::Json => println!("{}", error_json(&e)),
                Format::Text => eprintln!("error ({} stage): {e}", e.stage()),
            }
            ExitCode::from(e.stage().exit_code() as u8)
        }
        Err((Failure::Io { context, source, exit }, _)) => {
            eprintln!("error: {context}: {source}");
            ExitCode::from(exit)
        }
        Err((Failure::Usage(message), _)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
