use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chaundy_bullard::campaign::{list_identities, run_campaign, CampaignConfig, CampaignError};
use clap::{Args, Parser, Subcommand};

/// Seeded numerical verification of Chaundy-Bullard type identities.
#[derive(Parser, Debug)]
#[command(name = "cbverify", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print every identity name with a short description.
    List,
}

/// Every flag overrides the config key of the same name.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated identity names, or `all`.
    #[arg(long)]
    identities: Option<String>,
    #[arg(long)]
    m_min: Option<String>,
    #[arg(long)]
    m_max: Option<String>,
    #[arg(long)]
    n_min: Option<String>,
    #[arg(long)]
    n_max: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// Mantissa bits; 53 uses f64.
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    guard: Option<String>,
    #[arg(long)]
    xabc_min: Option<String>,
    #[arg(long)]
    xabc_max: Option<String>,
    #[arg(long)]
    q_min: Option<String>,
    #[arg(long)]
    q_max: Option<String>,
    #[arg(long)]
    p_min: Option<String>,
    /// Largest nome modulus; 0 samples p = 0 only.
    #[arg(long)]
    p_max: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs: [(&'static str, &Option<String>); 16] = [
            ("identities", &self.identities),
            ("m_min", &self.m_min),
            ("m_max", &self.m_max),
            ("n_min", &self.n_min),
            ("n_max", &self.n_max),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("tol", &self.tol),
            ("precision", &self.precision),
            ("guard", &self.guard),
            ("xabc_min", &self.xabc_min),
            ("xabc_max", &self.xabc_max),
            ("q_min", &self.q_min),
            ("q_max", &self.q_max),
            ("p_min", &self.p_min),
            ("p_max", &self.p_max),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }
}

fn config_from(args: &RunArgs) -> Result<CampaignConfig, CampaignError> {
    let mut config = CampaignConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| CampaignError::Io(format!("{}: {e}", path.display())))?;
        config.apply_text(&text)?;
    }
    for (k, v) in args.overrides() {
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &RunArgs) -> Result<i32, CampaignError> {
    let config = config_from(args)?;
    let report = run_campaign(&config)?;
    let text = report.to_jsonl();
    match &args.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| CampaignError::Io(format!("{}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CampaignError::Io(e.to_string()))?,
    }
    let s = &report.summary;
    eprintln!("{} records, {} failures", s.records, s.failures);
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Some(Command::List) => {
            for (name, anchor) in list_identities() {
                println!("{name}\t{anchor}");
            }
            0
        }
        None => match run(&cli.run) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("cbverify: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
