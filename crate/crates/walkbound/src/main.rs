use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use walkbound::config::{self, RunConfig};
use walkbound::pipeline::{self, ReportBundle};

#[derive(Parser)]
#[command(
    name = "walkbound",
    version,
    about = "Asymptotic invariants of random walks on groups: census, exact \
             convolution, Monte Carlo, sharp entropy bounds, and boundary checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config's schema and semantics without running any stage
    Validate(ValidateArgs),
    /// Run the enabled stages and write the report bundle
    Run(RunArgs),
    /// Re-render bounds.md and the CSV artifacts from a saved report.json
    Report(ReportArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Path to a TOML (or .json) run config
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a TOML (or .json) run config
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json, bounds.md, and the CSVs
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated stages to enable, disabling all others: census,
    /// exact-walk, monte-carlo, bounds, chebyshev, boundary
    #[arg(long)]
    stages: Option<String>,
    /// Override the memory budget, in bytes
    #[arg(long = "budget-mem")]
    budget_mem: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a previously written report.json
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the re-rendered artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn apply_stage_list(cfg: &mut RunConfig, list: &str) -> Result<(), String> {
    let s = &mut cfg.stages;
    s.census = false;
    s.exact_walk = false;
    s.monte_carlo = false;
    s.bounds = false;
    s.chebyshev = false;
    s.boundary = false;
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match token {
            "census" => s.census = true,
            "exact-walk" | "exact_walk" => s.exact_walk = true,
            "monte-carlo" | "monte_carlo" => s.monte_carlo = true,
            "bounds" => s.bounds = true,
            "chebyshev" => s.chebyshev = true,
            "boundary" => s.boundary = true,
            other => return Err(format!("unknown stage {other} in --stages")),
        }
    }
    Ok(())
}

fn print_summary(bundle: &ReportBundle) {
    if let Some(bounds) = &bundle.bounds {
        for row in &bounds.rows {
            let slack = row
                .slack
                .map(|s| format!("{s:.3e}"))
                .unwrap_or_else(|| "-".into());
            println!("{:<28} {:<28} slack {}", row.name, verdict_word(row), slack);
        }
    }
    if let Some(g) = &bundle.growth {
        println!("l   <= {:.9}", g.bounds.ell_max);
        println!("h   <= {:.9}", g.bounds.h_max);
        println!("rho >= {:.9}", g.bounds.rho_min);
        if let Some(hf) = g.h_floor {
            println!("h   >= {hf:.9}");
        }
        if let Some(lf) = g.ell_floor {
            println!("l   >= {lf:.9}");
        }
    }
    if let Some(b) = &bundle.boundary {
        if let Some(det) = &b.detector {
            println!(
                "boundary ({}): two_valued = {}, alpha = {:.6}",
                b.method, det.two_valued, det.alpha
            );
        }
    }
    for n in &bundle.stage_notes {
        println!("note [{}]: {}", n.stage, n.note);
    }
    for e in &bundle.stage_errors {
        eprintln!("stage error [{}]: {}", e.stage, e.message);
    }
}

fn verdict_word(row: &walkbound::bounds::BoundRow) -> String {
    use walkbound::bounds::Verdict;
    match &row.verdict {
        Verdict::SatisfiedStrict => "satisfied-strict".into(),
        Verdict::SatisfiedEquality { tol } => format!("satisfied-equality({tol:.1e})"),
        Verdict::Violated => "violated".into(),
        Verdict::Skipped { reason } => format!("skipped({reason})"),
    }
}

fn cmd_validate(args: &ValidateArgs) -> ExitCode {
    let cfg = match config::load(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let problems = cfg.diagnostics();
    if problems.is_empty() {
        println!("ok: {}", cfg.name);
        ExitCode::SUCCESS
    } else {
        for p in &problems {
            eprintln!("diagnostic: {p}");
        }
        ExitCode::from(2)
    }
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let mut cfg = match config::load(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.budgets.seed = Some(seed);
    }
    if let Some(mem) = args.budget_mem {
        cfg.budgets.mem_bytes = mem;
    }
    if let Some(list) = &args.stages {
        if let Err(e) = apply_stage_list(&mut cfg, list) {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    }
    let bundle = match pipeline::run(&cfg) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = pipeline::write_bundle(&bundle, &args.out) {
        eprintln!("{e}");
        return ExitCode::FAILURE;
    }
    print_summary(&bundle);
    println!("wrote {}", args.out.join("report.json").display());
    if bundle.exit_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cmd_report(args: &ReportArgs) -> ExitCode {
    let bundle = match pipeline::load_bundle(&args.config) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = pipeline::write_bundle(&bundle, &args.out) {
        eprintln!("{e}");
        return ExitCode::FAILURE;
    }
    print_summary(&bundle);
    println!("re-rendered into {}", args.out.display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Report(args) => cmd_report(&args),
    }
}
