use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvdtr::study::{
    analyze, appendix_b, dtr_study, var_study, AnalyzeConfig, AppendixBConfig, DtrStudyConfig, ExperimentConfig,
    Overrides, StudyReport, VarStudyConfig,
};
use cvdtr::Error;

const VAR_HELP: &str = "\
Outputs in <out>/var-study/<name>/:
  summary.csv     one row per (scenario, n): scenario, s, n, reps, av_r_cv, var_star
                  (NA when reps = 1), rho_half, var_rho_half, rho_adj, var_rho_adj,
                  var_rho0, var_rhoq, var_half, var_matched_n2
  replicates.csv  one row per (scenario, n, replicate) with the same estimates plus
                  s_r_sq, s_u_sq, inflation and J
  run-config.json the effective configuration";

const DTR_HELP: &str = "\
Outputs in <out>/dtr-study/<name>/:
  summary.csv     one row per (case, method): mean and SD of stage 1, stage 2 and joint
                  decision accuracy, percent of replicates choosing the tree at each
                  stage (- for fixed methods), mean and SD of the regime value
  replicates.csv  one row per (case, method, replicate): value, value_se, accuracies
                  and tree choices (1/0, - for fixed methods)
  run-config.json the effective configuration";

const ANALYZE_HELP: &str = "\
Outputs in <out>/analyze/<name>/:
  summary.csv     per stage, one row per candidate (R_cv, SD, rho_adj, p-value) and one
                  pairwise row (preferred minus best challenger); chosen models carry *
                  and rows without split dispersion are flagged
  regime.json     fitted rules and per-stage selection reports
  run-config.json the effective configuration";

const APPB_HELP: &str = "\
Outputs in <out>/appendix-b/<name>/:
  summary.csv     one row per model or comparison: row, label, av_r_cv, var_star,
                  var_rho (variance with the fixed correlation rho)
  replicates.csv  one row per (row, replicate): r_cv, s_r_sq, var_rho
  run-config.json the effective configuration";

#[derive(Parser)]
#[command(
    name = "cvdtr",
    version,
    about = "Cross-validated model selection for treatment contrasts and dynamic treatment regimes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Variance of the cross-validation metric on single-stage simulations.
    #[command(after_help = VAR_HELP)]
    VarStudy(Common),
    /// Regime accuracy of the selection methods on two-stage simulations.
    #[command(after_help = DTR_HELP)]
    DtrStudy(Common),
    /// Model selection and regime estimation on a trial CSV.
    #[command(after_help = ANALYZE_HELP)]
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Trial CSV (overrides the config's `input`).
        input: Option<PathBuf>,
    },
    /// Variance of the cross-validation metric in a plain regression setting.
    #[command(name = "appendix-b", after_help = APPB_HELP)]
    AppendixB(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config with one section per subcommand; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Monte Carlo replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Output root directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run name (default: seed-<seed>).
    #[arg(long)]
    name: Option<String>,
    /// Number of random splits J.
    #[arg(long)]
    j: Option<usize>,
    /// Validation fraction q.
    #[arg(long)]
    q: Option<f64>,
    /// Half-and-half repetitions B.
    #[arg(long)]
    b: Option<usize>,
    /// p-value threshold for keeping the preferred model.
    #[arg(long)]
    p0: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            threads: self.threads,
            reps: self.reps,
            out: self.out.clone(),
            j: self.j,
            q: self.q,
            b: self.b,
            p0: self.p0,
            name: self.name.clone(),
        }
    }

    fn file(&self) -> Result<ExperimentConfig, Error> {
        match &self.config {
            Some(p) => ExperimentConfig::from_path(p),
            None => Ok(ExperimentConfig::default()),
        }
    }
}

enum Failure {
    Config(Error),
    Run(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(e) if e.is_data_error() || matches!(e.root(), Error::Io(_)) => 3,
            Failure::Run(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => format!("config error: {e}"),
            Failure::Run(e) if self.code() == 3 => format!("data error: {e}"),
            Failure::Run(e) => format!("numerical failure: {e}"),
        }
    }
}

fn progress(msg: &str) {
    eprintln!("{msg}");
}

fn configure<T: Default>(
    common: &Common,
    section: impl FnOnce(ExperimentConfig) -> Option<T>,
    apply: impl FnOnce(&mut T, &Overrides) -> Result<(), Error>,
    validate: impl FnOnce(&T) -> Result<(), Error>,
) -> Result<T, Failure> {
    let mut cfg = section(common.file().map_err(Failure::Config)?).unwrap_or_default();
    apply(&mut cfg, &common.overrides()).map_err(Failure::Config)?;
    validate(&cfg).map_err(Failure::Config)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<StudyReport, Failure> {
    let mut sink = progress;
    match cli.command {
        Command::VarStudy(c) => {
            let cfg = configure(&c, |f| f.var_study, VarStudyConfig::apply, VarStudyConfig::validate)?;
            var_study(&cfg, &mut sink).map_err(Failure::Run)
        }
        Command::DtrStudy(c) => {
            let cfg = configure(&c, |f| f.dtr_study, DtrStudyConfig::apply, DtrStudyConfig::validate)?;
            dtr_study(&cfg, &mut sink).map_err(Failure::Run)
        }
        Command::AppendixB(c) => {
            let cfg = configure(&c, |f| f.appendix_b, AppendixBConfig::apply, AppendixBConfig::validate)?;
            appendix_b(&cfg, &mut sink).map_err(Failure::Run)
        }
        Command::Analyze { common, input } => {
            let cfg = configure(
                &common,
                |f| f.analyze,
                |cfg: &mut AnalyzeConfig, o| {
                    if input.is_some() {
                        cfg.input = input.clone();
                    }
                    cfg.apply(o)
                },
                AnalyzeConfig::validate,
            )?;
            analyze(&cfg, &mut sink).map(|(r, _)| r).map_err(Failure::Run)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(report.summary.render().as_bytes());
            eprintln!("wrote {}", report.dir.display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
