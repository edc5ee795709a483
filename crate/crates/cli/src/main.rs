use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gramdiff_core::campaign::{generate_report, run_campaign, Algorithm, CampaignConfig, CampaignError};
use gramdiff_core::difftest::{differential_test, CompileOutcome, CompilerSpec, DiffError};
use gramdiff_core::evolution::DistanceKind;
use gramdiff_core::refc::{run_file, BugProfile};

const EXIT_CONFIG: u8 = 2;
const EXIT_SPAWN: u8 = 3;
const EXIT_DEFECT: u8 = 10;
const OUT_ENV: &str = "GRAMDIFF_OUT";

#[derive(Parser)]
#[command(name = "gramdiff", version, about = "Grammar-based differential compiler fuzzing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a fuzzing campaign.
    Fuzz(FuzzArgs),
    /// Write CSV tables and a text summary for a finished run.
    Report { run_dir: PathBuf },
    /// Run one differential test on a program file.
    Difftest(DifftestArgs),
    /// The bundled reference checker.
    Refc(RefcArgs),
}

#[derive(Args)]
struct CompilerArgs {
    /// Campaign config file (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Command template for compiler A, with one {input} placeholder.
    #[arg(long, value_name = "COMMAND")]
    compiler_a: Option<String>,
    /// Command template for compiler B, with one {input} placeholder.
    #[arg(long, value_name = "COMMAND")]
    compiler_b: Option<String>,
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    compilers: CompilerArgs,
    /// Search algorithm: rs, sodga or modga.
    #[arg(long, value_name = "ALGO")]
    algo: Option<Algorithm>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Stop after this many programs.
    #[arg(long)]
    max_programs: Option<u64>,
    /// Simplicity bias of the sampler, in [0, 1].
    #[arg(long)]
    bias: Option<f64>,
    /// Distance used by sodga: l2 or linf.
    #[arg(long)]
    distance: Option<DistanceKind>,
    /// Population size.
    #[arg(long)]
    pop: Option<usize>,
    /// Tournament size.
    #[arg(long)]
    tournament: Option<usize>,
    /// Seconds between snapshots.
    #[arg(long)]
    snapshot_interval: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parent directory for run directories [env: GRAMDIFF_OUT, default: runs].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Name of the run directory.
    #[arg(long)]
    run_id: Option<String>,
    /// Concurrent compiler invocations; defaults to the CPU count.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DifftestArgs {
    file: PathBuf,
    #[command(flatten)]
    compilers: CompilerArgs,
}

#[derive(Args)]
struct RefcArgs {
    file: PathBuf,
    /// Seeded defects to enable: none, D1, D2, D3 or all.
    #[arg(long, default_value = "none")]
    profile: BugProfile,
    /// Seed declarations to use as the prelude instead of the shipped one.
    #[arg(long, value_name = "FILE")]
    context_seed: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Fuzz(args) => fuzz(args),
        Command::Report { run_dir } => report(&run_dir),
        Command::Difftest(args) => difftest(args),
        Command::Refc(args) => {
            let code = run_file(
                &args.file,
                args.profile,
                args.context_seed.as_deref(),
                &mut std::io::stderr(),
            );
            ExitCode::from(code as u8)
        }
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("gramdiff: {msg}");
    ExitCode::from(code)
}

fn campaign_exit(e: &CampaignError) -> u8 {
    match e {
        CampaignError::Config(_) => EXIT_CONFIG,
        CampaignError::Compiler(DiffError::Spawn { .. }) => EXIT_SPAWN,
        _ => 1,
    }
}

/// Words that invoke the bundled checker: the sibling `refc` binary when it
/// exists, otherwise this executable's `refc` subcommand.
fn bundled_refc() -> Vec<String> {
    let Ok(exe) = std::env::current_exe() else {
        return vec!["refc".into()];
    };
    let sibling = exe.with_file_name(format!("refc{}", std::env::consts::EXE_SUFFIX));
    if sibling.is_file() {
        vec![sibling.display().to_string()]
    } else {
        vec![exe.display().to_string(), "refc".into()]
    }
}

/// Loads the config file if any and applies the compiler overrides.
fn base_config(args: &CompilerArgs) -> Result<CampaignConfig, CampaignError> {
    let mut cfg = match &args.config {
        Some(path) => CampaignConfig::load(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(cmd) = &args.compiler_a {
        cfg.compiler_a.command = cmd.clone();
    }
    if let Some(cmd) = &args.compiler_b {
        cfg.compiler_b.command = cmd.clone();
    }
    let refc = bundled_refc();
    for spec in [&mut cfg.compiler_a, &mut cfg.compiler_b] {
        spec.replace_program("refc", &refc)?;
    }
    Ok(cfg)
}

fn fuzz_config(args: &FuzzArgs) -> Result<CampaignConfig, CampaignError> {
    let mut cfg = base_config(&args.compilers)?;
    if let Some(v) = args.algo {
        cfg.algorithm = v;
    }
    if let Some(v) = args.budget {
        cfg.budget = v;
    }
    if let Some(v) = args.max_programs {
        cfg.max_programs = Some(v);
    }
    if let Some(v) = args.bias {
        cfg.sampler.simplicity_bias = v;
    }
    if let Some(v) = args.distance {
        cfg.ga.distance = v;
    }
    if let Some(v) = args.pop {
        cfg.ga.population = v;
    }
    if let Some(v) = args.tournament {
        cfg.ga.tournament = v;
    }
    if let Some(v) = args.snapshot_interval {
        cfg.snapshot_interval = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.run_id {
        cfg.run_id = Some(v.clone());
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = &args.out {
        cfg.output = Some(v.clone());
    } else if cfg.output.is_none() {
        cfg.output = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fuzz(args: FuzzArgs) -> ExitCode {
    let result = fuzz_config(&args).and_then(|cfg| {
        let (grammar, ctx) = cfg.load_inputs()?;
        run_campaign(&cfg, &grammar, &ctx)
    });
    match result {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(campaign_exit(&e), e),
    }
}

fn report(run_dir: &Path) -> ExitCode {
    match generate_report(run_dir) {
        Ok(_) => {
            let text = std::fs::read_to_string(run_dir.join("report/summary.txt")).unwrap_or_default();
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(campaign_exit(&e), e),
    }
}

fn print_outcome(out: &mut impl Write, spec: &CompilerSpec, o: &CompileOutcome) -> std::io::Result<()> {
    writeln!(
        out,
        "{} [{}]: {} (exit {}, {:.2}s)",
        spec.label, spec.command, o.verdict, o.exit_code, o.wall_time
    )?;
    for line in o.stderr.lines().filter(|l| !l.trim().is_empty()) {
        writeln!(out, "    {line}")?;
    }
    Ok(())
}

fn difftest(args: DifftestArgs) -> ExitCode {
    if !args.file.is_file() {
        return fail(EXIT_CONFIG, format!("{} does not exist", args.file.display()));
    }
    let cfg = match base_config(&args.compilers) {
        Ok(cfg) => cfg,
        Err(e) => return fail(campaign_exit(&e), e),
    };
    let result = match differential_test(&args.file, &cfg.compiler_a, &cfg.compiler_b) {
        Ok(r) => r,
        Err(e) => {
            let code = match e {
                DiffError::Spawn { .. } => EXIT_SPAWN,
                DiffError::InvalidSpec { .. } | DiffError::MissingProgram(_) => EXIT_CONFIG,
                _ => 1,
            };
            return fail(code, e);
        }
    };
    let mut out = std::io::stdout().lock();
    let _ = print_outcome(&mut out, &cfg.compiler_a, &result.a).and_then(|_| {
        print_outcome(&mut out, &cfg.compiler_b, &result.b)?;
        writeln!(out, "classification: {}", result.classification.name())?;
        if let Some(sig) = &result.signature {
            writeln!(out, "signature: {sig}")?;
        }
        Ok(())
    });
    if result.classification.is_defect() {
        ExitCode::from(EXIT_DEFECT)
    } else {
        ExitCode::SUCCESS
    }
}
