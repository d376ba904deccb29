//! `pagetime` — fit last-mile network profiles and predict end-user web
//! page response times.
//!
//! Results go to standard output with fixed two-decimal formatting and a
//! stable ordering, so identical inputs always produce identical bytes.
//! Exit codes: 0 success, 1 domain/input error, 2 usage error.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pagetime_core::browser::{bpe, BpeInput, RenderClass, RenderModel, Rounding};
use pagetime_core::fitting::{
    build_profile, read_measurements, read_pairs_csv, read_server_times_csv, validate,
};
use pagetime_core::manifest::{parse_har, parse_worksheet_csv, PageManifest};
use pagetime_core::predict::{
    predict_from_sizes, predict_worksheet, BpeSource, DnsConnectMode, PredictionBreakdown,
    PredictionConfig,
};
use pagetime_core::profile::{load_profile, save_profile};
use pagetime_core::waterfall::{
    effective_parallelism, read_sim_csv, schedule_csv, sim_components_from_manifest, simulate,
    sweep, SimComponent,
};

#[derive(Parser)]
#[command(
    name = "pagetime",
    about = "Predict end-user web page response time from page composition and country network profiles",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Add the CDN DNS/connect constants once per page.
    SingleCdn,
    /// Add them once per unique static domain, divided by the parallel efficiency.
    PerDomainOverBpe,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a country profile from a last-mile measurement CSV.
    Fit(FitArgs),
    /// Predict a page's response time from a manifest and a profile.
    Predict(PredictArgs),
    /// Compute the browser parallel-download efficiency.
    Bpe(BpeArgs),
    /// Estimate rendering time from page weight and request count.
    Render(RenderArgs),
    /// Simulate the download waterfall over k parallel connections.
    Simulate(SimulateArgs),
    /// Compare predicted response times against measured values.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Measurement CSV (url,domain,kind,size_bytes,dns_ms,connect_ms,fb_ms,cd_ms)
    #[arg(long)]
    measurements: PathBuf,
    /// Country code stored in the profile
    #[arg(long)]
    country: String,
    /// Where to write the fitted profile
    #[arg(long)]
    out: PathBuf,
    /// Optional server-time CSV (url,server_ms) subtracted from base-page first byte
    #[arg(long)]
    server_times: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Page manifest: worksheet CSV or HAR
    #[arg(long)]
    manifest: PathBuf,
    /// Network profile file
    #[arg(long)]
    profile: PathBuf,
    /// Explicit parallel efficiency; derived from the inputs when omitted
    #[arg(long)]
    bpe: Option<f64>,
    /// Add the rendering estimate to the total
    #[arg(long)]
    include_render: bool,
    /// DNS/connect accounting mode
    #[arg(long, value_enum, default_value = "single-cdn")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
struct BpeArgs {
    /// First byte time in milliseconds
    #[arg(long)]
    fb: f64,
    /// Average content download time in milliseconds
    #[arg(long)]
    avg_cd: f64,
    /// Round to a whole connection count
    #[arg(long)]
    round: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// Total page weight in KB
    #[arg(long)]
    total_kb: f64,
    /// Total HTTP request count, base page included
    #[arg(long)]
    requests: u32,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("connection_spec").required(true).args(["connections", "sweep"]))]
struct SimulateArgs {
    /// Component list: worksheet CSV/HAR manifest, or a sim CSV
    /// (doc_order,fb_ms,cd_ms,is_js)
    #[arg(long)]
    manifest: PathBuf,
    /// Simulate with exactly this many connections
    #[arg(long)]
    connections: Option<usize>,
    /// Simulate for every connection count 1..=N
    #[arg(long)]
    sweep: Option<usize>,
    /// Also write the schedule CSV to this path
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
struct ValidateArgs {
    /// Pairs CSV (predicted_ms,measured_ms)
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Predict(args) => run_predict(args),
        Command::Bpe(args) => run_bpe(args),
        Command::Render(args) => run_render(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Validate(args) => run_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn load_manifest(path: &Path) -> Result<PageManifest, String> {
    let bytes = read_file(path)?;
    let parsed = if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        parse_har(&bytes)
    } else {
        parse_worksheet_csv(&bytes)
    };
    parsed.map_err(|e| format!("{}: {e}", path.display()))
}

fn run_fit(args: FitArgs) -> Result<(), String> {
    let server_times: HashMap<String, f64> = match &args.server_times {
        Some(path) => {
            let bytes = read_file(path)?;
            read_server_times_csv(&bytes).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => HashMap::new(),
    };
    let file = fs::File::open(&args.measurements)
        .map_err(|e| format!("cannot read {}: {e}", args.measurements.display()))?;
    let records = read_measurements(std::io::BufReader::new(file))
        .map_err(|e| format!("{}: {e}", args.measurements.display()))?;
    let profile = build_profile(records, &server_times, &args.country)
        .map_err(|e| format!("{}: {e}", args.measurements.display()))?;
    let encoded = save_profile(&profile);
    fs::write(&args.out, &encoded)
        .map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    print!("{}", String::from_utf8_lossy(&encoded));
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), String> {
    let manifest = load_manifest(&args.manifest)?;
    let profile_bytes = read_file(&args.profile)?;
    let profile =
        load_profile(&profile_bytes).map_err(|e| format!("{}: {e}", args.profile.display()))?;
    let config = PredictionConfig {
        bpe_source: match args.bpe {
            Some(value) => BpeSource::Explicit(value),
            None => BpeSource::Computed,
        },
        dns_connect_mode: match args.mode {
            Mode::SingleCdn => DnsConnectMode::SingleCdn,
            Mode::PerDomainOverBpe => DnsConnectMode::PerDomainOverBpe,
        },
        include_render: args.include_render,
        include_server: true,
    };
    // Worksheet mode when every component carries measured timings,
    // otherwise synthesize from the profile's size models.
    let fully_measured = manifest.components().iter().all(|c| c.has_measured_times());
    let breakdown: PredictionBreakdown = if fully_measured {
        predict_worksheet(&manifest, &profile, &config)
    } else {
        predict_from_sizes(&manifest, &profile, &config)
    }
    .map_err(|e| e.to_string())?;
    match args.format {
        OutputFormat::Table => print!("{}", breakdown.to_table()),
        OutputFormat::Csv => print!("{}", breakdown.to_csv()),
    }
    Ok(())
}

fn run_bpe(args: BpeArgs) -> Result<(), String> {
    let rounding = if args.round {
        Rounding::NearestInt
    } else {
        Rounding::Raw
    };
    let value = bpe(BpeInput {
        first_byte_ms: args.fb,
        avg_cd_ms: args.avg_cd,
        rounding,
    })
    .map_err(|e| e.to_string())?;
    if args.round {
        println!("{}", value as i64);
    } else {
        println!("{value:.2}");
    }
    Ok(())
}

fn run_render(args: RenderArgs) -> Result<(), String> {
    if args.requests == 0 {
        return Err("request count must be at least 1".into());
    }
    if args.total_kb.is_nan() || args.total_kb <= 0.0 {
        return Err("total page weight must be positive".into());
    }
    let n = args.total_kb / args.requests as f64;
    let class = RenderClass::from_avg_kb(n);
    let ms = RenderModel::default().eval_ms(n, args.total_kb);
    println!("avg_kb_per_request {n:.2}");
    println!("class {}", class.as_str());
    println!("render_ms {ms:.2}");
    Ok(())
}

fn load_sim_components(path: &Path) -> Result<Vec<SimComponent>, String> {
    let bytes = read_file(path)?;
    let first_line = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    if first_line.starts_with(b"doc_order,") {
        return read_sim_csv(&bytes[..]).map_err(|e| format!("{}: {e}", path.display()));
    }
    let manifest = load_manifest(path)?;
    sim_components_from_manifest(&manifest).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_simulate(args: SimulateArgs) -> Result<(), String> {
    let components = load_sim_components(&args.manifest)?;
    match (args.connections, args.sweep) {
        (_, Some(k_max)) => {
            let curve = sweep(&components, k_max).map_err(|e| e.to_string())?;
            match args.format {
                OutputFormat::Table => {
                    println!("{:>3}  {:>12}", "k", "makespan_ms");
                    for (k, makespan) in curve {
                        println!("{k:>3}  {makespan:>12.2}");
                    }
                }
                OutputFormat::Csv => {
                    println!("k,makespan_ms");
                    for (k, makespan) in curve {
                        println!("{k},{makespan:.2}");
                    }
                }
            }
            Ok(())
        }
        (Some(k), None) => {
            let result = simulate(&components, k).map_err(|e| e.to_string())?;
            let efficiency = effective_parallelism(&components, k).map_err(|e| e.to_string())?;
            if let Some(path) = &args.schedule {
                fs::write(path, schedule_csv(&result))
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            match args.format {
                OutputFormat::Table => {
                    println!(
                        "{:>9}  {:>10}  {:>10}  {:>10}",
                        "doc_order", "start_ms", "end_ms", "conn"
                    );
                    for entry in &result.per_component {
                        println!(
                            "{:>9}  {:>10.2}  {:>10.2}  {:>10}",
                            entry.doc_order, entry.start_ms, entry.end_ms, entry.connection
                        );
                    }
                    println!("makespan_ms {:.2}", result.makespan_ms);
                    println!("effective_parallelism {efficiency:.2}");
                    println!("connections_used {}", result.connections_used);
                }
                OutputFormat::Csv => {
                    print!("{}", schedule_csv(&result));
                }
            }
            Ok(())
        }
        (None, None) => unreachable!("clap enforces the connection group"),
    }
}

fn run_validate(args: ValidateArgs) -> Result<(), String> {
    let bytes = read_file(&args.pairs)?;
    let pairs = read_pairs_csv(&bytes).map_err(|e| format!("{}: {e}", args.pairs.display()))?;
    let stats = validate(&pairs).map_err(|e| e.to_string())?;
    match args.format {
        OutputFormat::Table => {
            println!(
                "{:>12}  {:>12}  {:>9}",
                "predicted_ms", "measured_ms", "error_pct"
            );
            for (&(predicted, measured), error) in pairs.iter().zip(&stats.per_row_error_pct) {
                println!("{predicted:>12.2}  {measured:>12.2}  {error:>9.2}");
            }
            println!(
                "mean {:.2}% stddev {:.2}%",
                stats.mean_error_pct, stats.stddev_error_pct
            );
        }
        OutputFormat::Csv => {
            println!("predicted_ms,measured_ms,error_pct");
            for (&(predicted, measured), error) in pairs.iter().zip(&stats.per_row_error_pct) {
                println!("{predicted:.2},{measured:.2},{error:.2}");
            }
            println!("mean_error_pct,{:.2}", stats.mean_error_pct);
            println!("stddev_error_pct,{:.2}", stats.stddev_error_pct);
            println!("n_pairs,{}", stats.n_pairs);
        }
    }
    Ok(())
}
