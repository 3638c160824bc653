use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF, Gamma};

use spq::eval::{entropy_bits, ks_one_sample, noise_floor_bins, tv_against, Grid};
use spq::formats::{self, columns, CsvOut};
use spq::par::{collect_shards, threads};
use spq::partition::partition_grid;
use spq::presets::{self, BuildSpec, Preset};
use spq::suite::{self, Settings, Suite};
use spq_core::bounds::{ball_bounds, reproduce_paper_table, ReferenceRow};
use spq_core::dissect::DissectConfig;
use spq_core::dither::DitheredChannel;
use spq_core::layered::{unit_ball_quantizer, EllipticalDensity, LayeredChannel};
use spq_core::rng::DEFAULT_SEED;
use spq_core::Vector;

/// Shift-periodic quantizers with prescribed error distributions.
#[derive(Parser, Debug)]
#[command(name = "spq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct a quantizer and write it as JSON.
    Build(BuildArgs),
    /// Quantize CSV rows of vectors.
    Quantize(QuantizeArgs),
    /// Draw errors x − Q(x) for x uniform over the basic cell.
    SampleError(SampleErrorArgs),
    /// Send a fixed input through the subtractively dithered channel.
    DitherChannel(DitherArgs),
    /// Layered ensemble with Gaussian or geo-Laplace error.
    LayeredDemo(LayeredArgs),
    /// Print entropy bounds.
    Bounds(BoundsArgs),
    /// Run the statistical validation suite.
    Validate(ValidateArgs),
    /// Recompute the published numbers; fails if any row is off.
    Reproduce(ReproduceArgs),
    /// Dense grid of cell assignments for plotting.
    PartitionExport(PartitionArgs),
}

#[derive(Args, Debug, Serialize)]
struct SeedArg {
    /// Seed for every random stream of the run.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct BudgetArgs {
    /// Maximum number of quantization cells per basic cell.
    #[arg(short = 'k', long, default_value_t = 64)]
    k: usize,
    /// Points per cloud tracking the piece volumes.
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    /// Monte Carlo samples for the region volumes.
    #[arg(long, default_value_t = 1_000_000)]
    volume_budget: usize,
}

impl BudgetArgs {
    fn config(&self, seed: u64) -> DissectConfig {
        DissectConfig {
            max_pieces: self.k,
            budget: self.budget,
            volume_budget: self.volume_budget,
            seed,
            ..DissectConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args, Debug, Serialize)]
struct BuildArgs {
    /// Shipped construction.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    preset: Option<Preset>,
    /// JSON file with lattice, cell, target and variant.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    budgets: BudgetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    seed: SeedArg,
    /// Quantizer JSON to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Report format on standard output.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
struct QuantizeArgs {
    #[arg(short, long)]
    quantizer: PathBuf,
    /// CSV of input vectors (`-` for standard input).
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// CSV to write (`-` for standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SampleErrorArgs {
    #[arg(short, long)]
    quantizer: PathBuf,
    #[arg(short = 'n', long, default_value_t = 100_000)]
    count: usize,
    #[command(flatten)]
    #[serde(flatten)]
    seed: SeedArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DitherArgs {
    #[arg(short, long)]
    quantizer: PathBuf,
    /// Input vector, e.g. "7.3,-2.1".
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[command(flatten)]
    #[serde(flatten)]
    seed: SeedArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Dist {
    Gaussian,
    GeoLaplace,
}

#[derive(Args, Debug, Serialize)]
struct LayeredArgs {
    #[arg(long, value_enum, default_value_t = Dist::Gaussian)]
    dist: Dist,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(short = 'n', long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    /// Input vector; defaults to the origin.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// Unit-ball quantizer JSON; built from the shipped lattice for `n` when absent.
    #[arg(short, long)]
    quantizer: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    budgets: BudgetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    seed: SeedArg,
    /// CSV of trials (`-` for standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// JSON summary file; printed to standard error when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Report {
    /// Published bounds and their recomputation.
    Paper,
    /// Bounds for error uniform over the unit ball.
    Ball,
}

#[derive(Args, Debug, Serialize)]
struct BoundsArgs {
    #[arg(long, value_enum, default_value_t = Report::Paper)]
    report: Report,
    /// Dimension for the ball report.
    #[arg(short = 'n', long, default_value_t = 2)]
    n: usize,
    /// Monte Carlo samples per complement volume.
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
    #[command(flatten)]
    #[serde(flatten)]
    seed: SeedArg,
    /// Also write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = Suite::Full)]
    suite: Suite,
    #[command(flatten)]
    #[serde(flatten)]
    seed: SeedArg,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ReproduceArgs {
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
    #[command(flatten)]
    #[serde(flatten)]
    seed: SeedArg,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
struct PartitionArgs {
    #[arg(short, long)]
    quantizer: PathBuf,
    /// Points per axis over the basic cell's bounding box.
    #[arg(long, default_value_t = 400)]
    grid: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn config<T: Serialize>(command: &str, args: &T) -> Value {
    let mut v = json!({ "command": command, "threads": threads() });
    if let (Value::Object(map), Ok(Value::Object(extra))) = (&mut v, serde_json::to_value(args)) {
        map.extend(extra);
    }
    v
}

fn announce_seed(seed: u64) {
    eprintln!("seed: {seed} ({seed:#x})");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Quantize(a) => cmd_quantize(a),
        Command::SampleError(a) => cmd_sample_error(a),
        Command::DitherChannel(a) => cmd_dither(a),
        Command::LayeredDemo(a) => cmd_layered(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::PartitionExport(a) => cmd_partition(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_build(a: BuildArgs) -> Result<bool> {
    announce_seed(a.seed.seed);
    let cfg = a.budgets.config(a.seed.seed);
    let spec: BuildSpec = match (&a.preset, &a.spec) {
        (Some(p), _) => presets::preset_spec(*p)?,
        (None, Some(path)) => formats::read_json(path)?,
        (None, None) => bail!("pass --preset or --spec"),
    };
    let started = std::time::Instant::now();
    let q = presets::build(&spec, &cfg)?;
    let seconds = started.elapsed().as_secs_f64();
    formats::save_quantizer(&a.output, &q)?;
    let summary = presets::summarize(&q, &cfg)?;
    let conf = config("build", &a);
    match a.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(
                &json!({ "config": conf, "summary": summary, "seconds": seconds })
            )?
        ),
        _ => {
            println!("# config: {conf}");
            println!("wrote {} in {seconds:.1}s", a.output.display());
            println!("variant               {:?}", summary.variant);
            println!(
                "cells per basic cell  {}{}",
                summary.pieces,
                if summary.truncated {
                    " (truncated)"
                } else {
                    ""
                }
            );
            println!(
                "normalized entropy    {:.6} bits",
                summary.normalized_entropy
            );
            println!("lower bound           {:.6} bits", summary.lower_bound);
            if let Some(u) = summary.upper_bound {
                println!("upper bound           {u:.6} bits");
            }
            println!("TV truncation bound   {:.6}", summary.tv_bound);
            println!("max error radius      {:.6}", summary.max_error_radius);
        }
    }
    Ok(true)
}

fn cmd_quantize(a: QuantizeArgs) -> Result<bool> {
    let q = formats::load_quantizer(&a.quantizer)?;
    let n = q.dim();
    let table = formats::read_csv_path(a.input.as_deref())?;
    let mut header = columns("x", n);
    header.extend(columns("q", n));
    header.extend(columns("e", n));
    header.extend(["piece".to_owned(), "residual".to_owned()]);
    let mut out = CsvOut::create(a.output.as_deref(), &config("quantize", &a), &header)?;
    for (i, row) in table.rows.iter().enumerate() {
        ensure!(
            row.len() >= n,
            "row {} has {} values, the quantizer is {n}-dimensional",
            i + 1,
            row.len()
        );
        let x = Vector::from_slice(&row[..n]);
        let r = q
            .try_quantize(&x)
            .with_context(|| format!("row {}", i + 1))?;
        let mut values = x.to_vec();
        values.extend(r.q.as_slice());
        values.extend((x - r.q).as_slice());
        out.mixed_row(
            &values,
            &[r.cell.piece.to_string(), u8::from(r.residual).to_string()],
        )?;
    }
    out.finish()?;
    Ok(true)
}

fn cmd_sample_error(a: SampleErrorArgs) -> Result<bool> {
    announce_seed(a.seed.seed);
    let q = formats::load_quantizer(&a.quantizer)?;
    let errors = spq::eval::sample_errors(&q, a.count, a.seed.seed)?;
    let mut out = CsvOut::create(
        a.output.as_deref(),
        &config("sample-error", &a),
        &columns("e", q.dim()),
    )?;
    for e in &errors {
        out.row(e.as_slice())?;
    }
    out.finish()?;
    Ok(true)
}

fn cmd_dither(a: DitherArgs) -> Result<bool> {
    announce_seed(a.seed.seed);
    let q = formats::load_quantizer(&a.quantizer)?;
    let n = q.dim();
    let x = formats::parse_vector(&a.x)?;
    ensure!(
        x.len() == n,
        "--x has {} components, the quantizer is {n}-dimensional",
        x.len()
    );
    let channel = DitheredChannel::with_voronoi_dither(&q);
    let results = collect_shards(a.trials, a.seed.seed, |rng| channel.transmit(&x, rng));
    let header: Vec<String> = ["w", "q", "y", "e"]
        .iter()
        .flat_map(|p| columns(p, n))
        .collect();
    let mut out = CsvOut::create(a.output.as_deref(), &config("dither-channel", &a), &header)?;
    for t in &results {
        let mut values = t.w.to_vec();
        values.extend(t.q.q.as_slice());
        values.extend(t.y.as_slice());
        values.extend(t.error(&x).as_slice());
        out.row(&values)?;
    }
    out.finish()?;
    Ok(true)
}

fn cmd_layered(a: LayeredArgs) -> Result<bool> {
    announce_seed(a.seed.seed);
    let n = a.n;
    let density = match a.dist {
        Dist::Gaussian => EllipticalDensity::gaussian(n, a.sigma)?,
        Dist::GeoLaplace => EllipticalDensity::geo_laplace(n, a.epsilon)?,
    };
    let q = match &a.quantizer {
        Some(p) => formats::load_quantizer(p)?,
        None => unit_ball_quantizer(n, &a.budgets.config(a.seed.seed))?,
    };
    let channel = LayeredChannel::new(&density, &q)?;
    let x = match &a.x {
        Some(s) => formats::parse_vector(s)?,
        None => Vector::zeros(n),
    };
    ensure!(x.len() == n, "--x has {} components, expected {n}", x.len());
    let trials = collect_shards(a.trials, a.seed.seed, |rng| channel.transmit(&x, rng));

    let conf = config("layered-demo", &a);
    let header: Vec<String> = columns("x", n)
        .into_iter()
        .chain(["r".to_owned()])
        .chain(columns("y", n))
        .chain(columns("e", n))
        .collect();
    let mut out = CsvOut::create(a.output.as_deref(), &conf, &header)?;
    for t in &trials {
        let mut values = x.to_vec();
        values.push(t.level.r);
        values.extend(t.transmission.y.as_slice());
        values.extend(t.transmission.error(&x).as_slice());
        out.row(&values)?;
    }
    out.finish()?;

    let errors: Vec<Vector> = trials.iter().map(|t| t.transmission.error(&x)).collect();
    let radii: Vec<f64> = errors.iter().map(|e| e.norm()).collect();
    let nf = n as f64;
    let (ks, half) = match a.dist {
        Dist::Gaussian => {
            let chi = ChiSquared::new(nf)?;
            (
                ks_one_sample(&radii, |r| chi.cdf(r * r / (a.sigma * a.sigma))),
                4.0 * a.sigma,
            )
        }
        Dist::GeoLaplace => {
            let g = Gamma::new(nf, a.epsilon)?;
            (
                ks_one_sample(&radii, |r| g.cdf(r.max(0.0))),
                (nf + 4.0 * nf.sqrt()) / a.epsilon,
            )
        }
    };
    let grid = Grid::centered(n, half, noise_floor_bins(n, a.trials.max(1), 0.01))?;
    let masses = grid.integrate(|e| density.density(e), a.seed.seed ^ 0x7A);
    let tv = tv_against(&grid.histogram(&errors), &masses);

    // Rate: entropy of the cell index within ten level buckets of equal size.
    let mut by_level: Vec<(f64, _)> = trials
        .iter()
        .map(|t| (t.level.r, t.transmission.q.cell))
        .collect();
    by_level.sort_by(|p, q| p.0.total_cmp(&q.0));
    let buckets: Vec<Value> = by_level
        .chunks(by_level.len().div_ceil(10).max(1))
        .map(|c| {
            let h = entropy_bits(c.iter().map(|p| p.1));
            json!({ "r_min": c[0].0, "r_max": c[c.len() - 1].0, "trials": c.len(), "entropy_bits": h.miller_madow })
        })
        .collect();
    let mean_rate = buckets
        .iter()
        .filter_map(|b| b["entropy_bits"].as_f64())
        .sum::<f64>()
        / buckets.len().max(1) as f64;
    let summary = json!({
        "config": conf,
        "trials": a.trials,
        "ks_radial": ks,
        "tv": tv,
        "tv_bins_per_axis": grid.bins(),
        "mean_rate_bits": mean_rate,
        "rate_by_level": buckets,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    match &a.summary {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?
        }
        None => eprintln!("{text}"),
    }
    Ok(true)
}

fn print_table(rows: &[ReferenceRow]) {
    println!(
        "{:<52} {:>12} {:>12} {:>10}  pass",
        "quantity", "reference", "computed", "tolerance"
    );
    for r in rows {
        println!(
            "{:<52} {:>12.5} {:>12.5} {:>10.2e}  {}",
            r.quantity,
            r.reference,
            r.computed,
            r.tolerance,
            if r.pass { "yes" } else { "NO" }
        );
    }
}

fn cmd_bounds(a: BoundsArgs) -> Result<bool> {
    let conf = config("bounds", &a);
    println!("# config: {conf}");
    let (report, ok) = match a.report {
        Report::Paper => {
            announce_seed(a.seed.seed);
            let rows = reproduce_paper_table(a.budget, a.seed.seed)?;
            print_table(&rows);
            let ok = rows.iter().all(|r| r.pass);
            (json!({ "config": conf, "rows": rows }), ok)
        }
        Report::Ball => {
            let reports = ball_bounds(a.n);
            for b in &reports {
                println!("{:<40} {:>12.6}", b.name, b.value);
            }
            (json!({ "config": conf, "bounds": reports }), true)
        }
    };
    let text = serde_json::to_string_pretty(&report)?;
    match &a.json {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?
        }
        None => println!("{text}"),
    }
    Ok(ok)
}

fn cmd_validate(a: ValidateArgs) -> Result<bool> {
    announce_seed(a.seed.seed);
    let settings = match a.suite {
        Suite::Quick => Settings::quick(a.seed.seed),
        _ => Settings::full(a.seed.seed),
    };
    let conf = config("validate", &a);
    println!("# config: {conf}");
    let reports = suite::run(a.suite, &settings)?;
    print!("{}", suite::render(&reports));
    let ok = reports.iter().all(|r| r.pass);
    if let Some(p) = &a.json {
        formats::write_json(
            p,
            &json!({ "config": conf, "settings": settings, "pass": ok, "reports": reports }),
        )?;
    }
    Ok(ok)
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<bool> {
    announce_seed(a.seed.seed);
    let rows = reproduce_paper_table(a.budget, a.seed.seed)?;
    let conf = config("reproduce", &a);
    match a.format {
        Format::Text => {
            println!("# config: {conf}");
            print_table(&rows);
        }
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "config": conf, "rows": rows }))?
        ),
        Format::Csv => {
            let header =
                ["quantity", "reference", "computed", "tolerance", "pass"].map(String::from);
            let mut out = CsvOut::create(None, &conf, &header)?;
            for r in &rows {
                out.mixed_row(
                    &[],
                    &[
                        r.quantity.clone(),
                        formats::fmt_f64(r.reference),
                        formats::fmt_f64(r.computed),
                        formats::fmt_f64(r.tolerance),
                        r.pass.to_string(),
                    ],
                )?;
            }
            out.finish()?;
        }
    }
    Ok(rows.iter().all(|r| r.pass))
}

fn cmd_partition(a: PartitionArgs) -> Result<bool> {
    let q = formats::load_quantizer(&a.quantizer)?;
    let n = q.dim();
    let points = partition_grid(&q, a.grid)?;
    let mut header = columns("x", n);
    header.extend(columns("t", n));
    header.extend(columns("image", n));
    header.extend(["piece".to_owned(), "residual".to_owned()]);
    let mut out = CsvOut::create(
        a.output.as_deref(),
        &config("partition-export", &a),
        &header,
    )?;
    for p in &points {
        let mut values = p.x.to_vec();
        values.extend(p.translation.as_slice());
        values.extend(p.image.as_slice());
        out.mixed_row(
            &values,
            &[p.cell.piece.to_string(), u8::from(p.residual).to_string()],
        )?;
    }
    out.finish()?;
    Ok(true)
}
