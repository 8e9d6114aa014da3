use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use mediator_core::experiment::{ExperimentConfig, ExperimentResult, ModeSpec, Scenario};
use mediator_core::interest::{DEFAULT_INTEREST_THRESHOLD, DEFAULT_POI_RADIUS_M};
use mediator_core::metrics::{
    emit_csv, emit_hops_comparison, emit_plot_data, giant_series, irn_by_hop, irn_series, mean_hops_comparison,
    modes_at, Averaging, MetricSeries,
};
use mediator_core::pipeline::{self, GraphParams, IngestParams};
use mediator_core::siot::{ModelCatalog, DEFAULT_CLOR_RADIUS_M, DEFAULT_MODEL_COUNT, DEFAULT_SOR_MEET_THRESHOLD};
use mediator_core::synth::{generate, SyntheticScenarioSpec};
use mediator_core::trace::{
    DEFAULT_COLOCATION_RADIUS_M, DEFAULT_COLOCATION_WINDOW_S, DEFAULT_HOME_CELL_DEG, DEFAULT_MIN_CHECKINS,
    DEFAULT_MIN_PLACES,
};
use mediator_core::Error;

#[derive(Parser, Debug)]
#[command(name = "mediator", version, about = "Friendship vs Social-IoT reachability simulator")]
struct Cli {
    /// Seed for every stochastic step; overrides seeds in config/spec files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse traces, detect co-locations, compute home-points and interest descriptors.
    Ingest(IngestArgs),
    /// Build the friendship graph and the SIoT device graph from ingest artifacts.
    BuildGraph(BuildGraphArgs),
    /// Generate a synthetic community scenario.
    Synth(SynthArgs),
    /// Run an experiment campaign.
    Run(RunArgs),
    /// Re-aggregate the CSV exports of a finished run.
    Report(ReportArgs),
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("file `{s}` does not exist"))
    }
}

fn existing_dir(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_dir() {
        Ok(p)
    } else {
        Err(format!("directory `{s}` does not exist"))
    }
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Check-in file (Brightkite TSV).
    #[arg(long, value_parser = existing_file)]
    checkins: PathBuf,
    /// Friendship edge list.
    #[arg(long, value_parser = existing_file)]
    friendships: PathBuf,
    /// PoI catalog CSV `poi_id,lat,lon,keyword`.
    #[arg(long, value_parser = existing_file)]
    poi: PathBuf,
    /// Macro-category CSV `macro_id,name,keyword`.
    #[arg(long, value_parser = existing_file)]
    macros: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_CHECKINS)]
    min_checkins: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_PLACES)]
    min_places: usize,
    /// Co-location radius in meters.
    #[arg(long, default_value_t = DEFAULT_COLOCATION_RADIUS_M)]
    radius: f64,
    /// Co-location window in seconds.
    #[arg(long, default_value_t = DEFAULT_COLOCATION_WINDOW_S)]
    window: i64,
    #[arg(long, default_value_t = DEFAULT_POI_RADIUS_M)]
    poi_radius: f64,
    /// Meetings needed to hold an interest.
    #[arg(long, default_value_t = DEFAULT_INTEREST_THRESHOLD)]
    interest_threshold: u32,
    /// Home-point grid cell size in degrees.
    #[arg(long, default_value_t = DEFAULT_HOME_CELL_DEG)]
    cell_deg: f64,
}

#[derive(Args, Debug)]
struct BuildGraphArgs {
    /// Directory written by `ingest`.
    #[arg(long, value_parser = existing_dir)]
    ingest: PathBuf,
    /// Model catalog CSV `model_id,probability`; uniform otherwise.
    #[arg(long, value_parser = existing_file)]
    models: Option<PathBuf>,
    /// Number of equiprobable models when no catalog is given.
    #[arg(long, default_value_t = DEFAULT_MODEL_COUNT)]
    model_count: usize,
    #[arg(long, default_value_t = DEFAULT_CLOR_RADIUS_M)]
    clor_radius: f64,
    /// Co-locations needed for a social object relationship.
    #[arg(long, default_value_t = DEFAULT_SOR_MEET_THRESHOLD)]
    sor_threshold: usize,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Spec file of `key = value` lines; defaults otherwise.
    #[arg(long, value_parser = existing_file)]
    spec: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long, value_parser = existing_file)]
    config: PathBuf,
    /// Scenario directory; overrides `scenario` in the config.
    #[arg(long, value_parser = existing_dir)]
    scenario: Option<PathBuf>,
    /// Pool all runs instead of averaging sources within replicates first.
    #[arg(long)]
    pooled: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory written by `run`.
    #[arg(long, value_parser = existing_dir)]
    results: PathBuf,
    /// Largest hop for cumulative hop curves.
    #[arg(long, default_value_t = 6)]
    max_hops: u32,
    #[arg(long)]
    pooled: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let out = cli.out.clone();
    let res = match cli.command {
        Command::Ingest(a) => ingest(&a, &out),
        Command::BuildGraph(a) => build_graph(&a, &out, cli.seed.unwrap_or(0)),
        Command::Synth(a) => synth(&a, &out, cli.seed),
        Command::Run(a) => run(&a, &out, cli.seed),
        Command::Report(a) => report(&a, &out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn ingest(a: &IngestArgs, out: &Path) -> Result<(), Error> {
    let params = IngestParams {
        min_checkins: a.min_checkins,
        min_places: a.min_places,
        radius_m: a.radius,
        window_s: a.window,
        poi_radius_m: a.poi_radius,
        interest_threshold: a.interest_threshold,
        cell_deg: a.cell_deg,
    };
    let o = pipeline::ingest(&a.checkins, &a.friendships, &a.poi, &a.macros, &params)?;
    info!(
        "{} check-in lines ({} malformed), {} friendship lines ({} dropped)",
        o.checkin_stats.lines, o.checkin_stats.malformed, o.friendship_stats.lines, o.friendship_stats.dropped
    );
    o.write(out)?;
    println!(
        "users={} checkins={} friendships={} colocations={} interest_matches={}",
        o.corpus.users.len(),
        o.corpus.checkins.len(),
        o.corpus.friendships.len(),
        o.colocations.len(),
        o.interest_matches
    );
    Ok(())
}

fn build_graph(a: &BuildGraphArgs, out: &Path, seed: u64) -> Result<(), Error> {
    let params = GraphParams {
        models: match &a.models {
            Some(p) => ModelCatalog::load(p)?,
            None => ModelCatalog::uniform(a.model_count),
        },
        clor_radius_m: a.clor_radius,
        sor_threshold: a.sor_threshold,
        seed,
    };
    let scenario = pipeline::build_scenario(&a.ingest, &params)?;
    pipeline::write_scenario(&scenario, out)?;
    print!("{}", pipeline::edge_stats(&scenario));
    Ok(())
}

fn synth(a: &SynthArgs, out: &Path, seed: Option<u64>) -> Result<(), Error> {
    let mut spec = match &a.spec {
        Some(p) => SyntheticScenarioSpec::load(p)?,
        None => SyntheticScenarioSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let scenario = generate(&spec)?;
    pipeline::write_scenario(&scenario, out)?;
    print!("{}", pipeline::edge_stats(&scenario));
    Ok(())
}

fn run(a: &RunArgs, out: &Path, seed: Option<u64>) -> Result<(), Error> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let dir = a
        .scenario
        .clone()
        .or_else(|| config.scenario.clone())
        .ok_or_else(|| Error::Config("no scenario given (config key `scenario` or --scenario)".into()))?;
    let scenario = Scenario::load(&dir)?;
    let result = mediator_core::run_campaign(&config, &scenario)?;
    create_dir(out)?;
    result.write_runs_csv(&out.join("results.csv"))?;
    result.write_hops_csv(&out.join("hops.csv"))?;
    result.write_giant_csv(&out.join("giant.csv"))?;
    let how = if a.pooled { Averaging::Pooled } else { Averaging::SourcesThenReplicates };
    let max_hops = result.points.iter().map(|p| p.max_hops).max().unwrap_or(0);
    write_series(&result, out, how, max_hops)?;

    let cior_on = ModeSpec::Enhanced;
    let baseline = if config.modes.contains(&ModeSpec::EnhancedNoCior) {
        Some(ModeSpec::EnhancedNoCior)
    } else if config.modes.contains(&ModeSpec::Friendships) {
        Some(ModeSpec::Friendships)
    } else {
        None
    };
    if let (true, Some(base)) = (config.modes.contains(&cior_on), baseline) {
        for (pi, point) in result.points.iter().enumerate() {
            let with = cior_on.resolve(point.kinds);
            let without = base.resolve(point.kinds);
            let cmp = mean_hops_comparison(result.runs_for(with, pi), result.runs_for(without, pi));
            let name = if result.points.len() == 1 {
                "hops_comparison.csv".to_string()
            } else {
                format!("hops_comparison_{pi}.csv")
            };
            emit_hops_comparison(&cmp, &result.user_names, &out.join(name))?;
        }
    }
    print_summary(&result, how);
    Ok(())
}

fn write_series(result: &ExperimentResult, out: &Path, how: Averaging, max_hops: u32) -> Result<(), Error> {
    let irn = irn_series(result, how);
    emit_csv(&irn, &out.join("irn.csv"))?;
    emit_plot_data(&irn, &out.join("irn.dat"))?;
    let mut curves: Vec<MetricSeries> = Vec::new();
    for (pi, point) in result.points.iter().enumerate() {
        for mode in modes_at(result, pi) {
            let label = format!("{}@{}", mode.series_label(), point.label);
            let runs: Vec<_> = result.runs_for(mode, pi).collect();
            curves.push(irn_by_hop(label, runs.iter().copied(), max_hops, how));
        }
    }
    emit_csv(&curves, &out.join("irn_by_hop.csv"))?;
    emit_plot_data(&curves, &out.join("irn_by_hop.dat"))?;
    if !result.giant.is_empty() {
        let g = giant_series(result);
        emit_csv(&g, &out.join("giant_series.csv"))?;
        emit_plot_data(&g, &out.join("giant_series.dat"))?;
    }
    Ok(())
}

fn print_summary(result: &ExperimentResult, how: Averaging) {
    for s in irn_series(result, how) {
        for i in 0..s.len() {
            let ci = s.ci[i].map(|c| format!(" +/- {c:.3}")).unwrap_or_default();
            println!("{:<32} x={:<8} irn={:.3}%{ci}", s.label, s.x[i], s.y[i]);
        }
    }
}

fn report(a: &ReportArgs, out: &Path) -> Result<(), Error> {
    let giant = a.results.join("giant.csv");
    let result = ExperimentResult::from_csv(
        &a.results.join("results.csv"),
        &a.results.join("hops.csv"),
        giant.is_file().then_some(giant.as_path()),
    )?;
    create_dir(out)?;
    let how = if a.pooled { Averaging::Pooled } else { Averaging::SourcesThenReplicates };
    write_series(&result, out, how, a.max_hops)?;
    print_summary(&result, how);
    Ok(())
}
