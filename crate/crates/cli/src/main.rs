use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use basket_core::borrowing::DEFAULT_CPP_DRAWS;
use basket_core::inference::McmcConfig;
use basket_core::model::{analyze, AnalysisReport, AnalysisSettings, Model};
use basket_core::simulation::{
    run_study, summary_table, write_plot_data_csv, write_tidy_csv, OperatingCharacteristics, StudyConfig,
};
use basket_core::trial::{read_trial_csv, resolve_scenario, Scenario};
use basket_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "basket", version, about = "Bayesian analysis and simulation of randomised basket trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios (and any defined in --config).
    Scenarios {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Simulate replicated trials and report operating characteristics.
    Simulate(SimulateArgs),
    /// Analyse one trial dataset.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct CommonArgs {
    /// Efficacy threshold.
    #[arg(long = "delta-u", default_value_t = 0.25)]
    delta_u: f64,
    /// Evidence level for a Go decision.
    #[arg(long, default_value_t = 0.975)]
    zeta: f64,
    /// Softmax scale of the borrowing weights.
    #[arg(long, default_value_t = 0.15)]
    s0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "BASKET_OUTPUT_DIR", default_value = "basket-output")]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// MCMC chains.
    #[arg(long)]
    chains: Option<usize>,
    /// Post-burn-in iterations per chain.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    /// TOML file with scenario definitions.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated models: hm, none, exnex, proposed.
    #[arg(long, value_delimiter = ',', default_value = "hm,none,exnex,proposed")]
    model: Vec<String>,
    /// Number of replicates.
    #[arg(long = "M", default_value_t = 1000)]
    replicates: usize,
    /// Use the full MCMC and Monte Carlo budget instead of the desk-scale one.
    #[arg(long)]
    full_scale: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV with columns subtrial,y,z1..zq,T.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "proposed")]
    model: String,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scenarios { config, format } => cmd_scenarios(config.as_deref(), format),
        Command::Simulate(args) => with_threads(args.common.threads, || cmd_simulate(&args)),
        Command::Analyze(args) => with_threads(args.common.threads, || cmd_analyze(&args)),
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidState(e.to_string()))?;
    pool.install(f)
}

fn cmd_scenarios(config: Option<&Path>, format: Option<Format>) -> Result<()> {
    let mut scenarios = Scenario::presets();
    if let Some(path) = config {
        for s in basket_core::trial::load_scenarios(path)? {
            match scenarios.iter_mut().find(|p| p.name == s.name) {
                Some(p) => *p = s,
                None => scenarios.push(s),
            }
        }
    }
    let mut out = io::stdout().lock();
    match format {
        Some(Format::Json) => writeln!(out, "{}", to_json(&scenarios)?)?,
        Some(Format::Csv) => {
            writeln!(out, "scenario,subtrial,n,theta")?;
            for s in &scenarios {
                for (j, (n, t)) in s.n.iter().zip(&s.theta).enumerate() {
                    writeln!(out, "{},{},{n},{t}", s.name, j + 1)?;
                }
            }
        }
        None => {
            for s in &scenarios {
                let theta: Vec<String> = s.theta.iter().map(|t| format!("{t:.2}")).collect();
                let n: Vec<String> = s.n.iter().map(usize::to_string).collect();
                writeln!(out, "{:<6} theta = ({})  n = ({})", s.name, theta.join(", "), n.join(", "))?;
            }
        }
    }
    Ok(())
}

fn mcmc_config(base: McmcConfig, common: &CommonArgs) -> McmcConfig {
    McmcConfig {
        chains: common.chains.unwrap_or(base.chains),
        iterations: common.iterations.unwrap_or(base.iterations),
        burn_in: common.burn_in.unwrap_or(base.burn_in),
        seed: common.seed,
        ..base
    }
}

fn apply_common(settings: &mut AnalysisSettings, common: &CommonArgs) {
    settings.decision.delta_u = common.delta_u;
    settings.decision.zeta = common.zeta;
    settings.proposed.s0 = common.s0;
    settings.mcmc = mcmc_config(settings.mcmc, common);
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let scenario = resolve_scenario(&args.scenario, args.config.as_deref())?;
    let models = args.model.iter().map(|m| m.parse()).collect::<Result<Vec<Model>>>()?;
    let common = &args.common;
    let mut results: Vec<OperatingCharacteristics> = Vec::with_capacity(models.len());
    for model in models {
        let mut cfg = if args.full_scale {
            StudyConfig::full_scale(scenario.clone(), model)
        } else {
            StudyConfig::desk_scale(scenario.clone(), model)
        };
        cfg.replicates = args.replicates;
        cfg.master_seed = common.seed;
        apply_common(&mut cfg.settings, common);
        if !cfg.thresholds.contains(&common.delta_u) {
            cfg.thresholds.push(common.delta_u);
        }
        let study = run_study(&cfg)?;
        for (i, msg) in &study.failures {
            eprintln!("replicate {i} excluded: {msg}");
        }
        results.push(study.operating_characteristics(common.delta_u, common.zeta)?);
    }

    fs::create_dir_all(&common.output)?;
    let stem = &scenario.name;
    match common.format {
        Format::Csv => {
            write_tidy_csv(&results, create(&common.output.join(format!("{stem}_oc.csv")))?)?;
            write_plot_data_csv(&results, create(&common.output.join(format!("{stem}_plot_data.csv")))?)?;
        }
        Format::Json => {
            let mut f = create(&common.output.join(format!("{stem}_oc.json")))?;
            writeln!(f, "{}", to_json(&results)?)?;
            f.flush()?;
        }
    }
    let table = summary_table(&results);
    fs::write(common.output.join(format!("{stem}_summary.txt")), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let trial = read_trial_csv(File::open(&args.data)?)?;
    let model: Model = args.model.parse()?;
    let mut settings = AnalysisSettings::default();
    settings.proposed.cpp_draws = DEFAULT_CPP_DRAWS;
    apply_common(&mut settings, &args.common);
    let report = analyze(&trial, model, &settings)?;

    let out = &args.common.output;
    fs::create_dir_all(out)?;
    match args.common.format {
        Format::Json => {
            let mut f = create(&out.join("analysis.json"))?;
            writeln!(f, "{}", to_json(&report)?)?;
            f.flush()?;
        }
        Format::Csv => {
            write_subtrials_csv(&report, create(&out.join("subtrials.csv"))?)?;
            if let Some(h) = &report.hellinger {
                h.write_csv(create(&out.join("hellinger.csv"))?)?;
            }
            if let Some(w) = &report.weights {
                w.write_csv(create(&out.join("weights.csv"))?)?;
            }
        }
    }
    print_report(&report, settings.decision.delta_u);
    Ok(())
}

fn write_subtrials_csv(report: &AnalysisReport, writer: impl Write) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "subtrial,mean,sd,lower,upper,prob_exceeds,go,ex_probability")?;
    for s in &report.subtrials {
        let ex = s.ex_probability.map_or(String::new(), |p| p.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{},{},{ex}",
            s.k, s.summary.mean, s.summary.sd, s.summary.lower, s.summary.upper, s.prob_exceeds, s.go
        )?;
    }
    w.flush()?;
    Ok(())
}

fn print_report(report: &AnalysisReport, delta_u: f64) {
    println!("model: {}", report.model);
    println!(
        "{:>8} {:>9} {:>9} {:>20} {:>12} {:>6}",
        "subtrial",
        "mean",
        "sd",
        "95% interval",
        format!("P(>{delta_u})"),
        "go"
    );
    for s in &report.subtrials {
        let ci = format!("({:.3}, {:.3})", s.summary.lower, s.summary.upper);
        let go = if s.go { "Go" } else { "No-go" };
        print!(
            "{:>8} {:>9.4} {:>9.4} {ci:>20} {:>12.4} {go:>6}",
            s.k, s.summary.mean, s.summary.sd, s.prob_exceeds
        );
        match s.ex_probability {
            Some(p) => println!("  P(EX) = {p:.3}"),
            None => println!(),
        }
    }
    let print_matrix = |title: &str, m: &[Vec<f64>]| {
        println!("{title}:");
        for row in m {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            println!("  {}", cells.join("  "));
        }
    };
    if let Some(h) = &report.hellinger {
        print_matrix("Hellinger distances", &h.d);
    }
    if let Some(w) = &report.weights {
        print_matrix("weights (row: source, column: target)", &w.p);
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::InvalidState(e.to_string()))
}
