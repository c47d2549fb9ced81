use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bordism::ahss::{replay, Scenario};
use bordism::barss::{
    aahss_mod3_ledger, aahss_pages, bar_homology, check_expectations, mod3_rules, thom_mod2_expectations,
    CoefficientChart,
};
use bordism::bazaikin::{census, homeomorphic, BazaikinTuple, DIFFEOMORPHISM_BOUND};
use bordism::fplin::Prime;
use bordism::modbuild::{builtin, relation_sweep, ModulePresentation, BUILTIN_NAMES};
use bordism::resolve::{minimal_resolution, ExtChart};
use bordism::steenrod::Subalgebra;

/// Directory for cached Ext charts of builtin modules.
const CACHE_ENV: &str = "BORDISM_CACHE_DIR";

#[derive(Parser)]
#[command(name = "bordism", version, about = "Steenrod-algebra charts, spectral-sequence ledgers and Bazaikin invariants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChartFormat {
    Tsv,
    Svg,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Tsv,
    Json,
}

#[derive(clap::Args)]
struct ModuleArgs {
    /// `builtin:NAME` or a path to a module JSON file.
    module: String,
    /// Parameter k for the Thom-twisted builtins.
    #[arg(long, default_value_t = 7, allow_negative_numbers = true)]
    k: i64,
    /// Parameter m for the mod-3 builtins.
    #[arg(long, default_value_t = 0)]
    m: u8,
}

#[derive(clap::Args)]
struct RangeArgs {
    /// A1, A2 or full.
    #[arg(long, default_value = "A2")]
    subalgebra: String,
    #[arg(long, default_value_t = 6)]
    smax: u32,
    #[arg(long, default_value_t = 14)]
    tmax: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Basis sizes per degree and the operator-relation sweep.
    Module {
        #[command(flatten)]
        source: ModuleArgs,
    },
    /// Ext chart from a minimal resolution.
    Ext {
        #[command(flatten)]
        source: ModuleArgs,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long, value_enum, default_value = "tsv")]
        format: ChartFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tor dimensions from the bar complex.
    Tor {
        #[command(flatten)]
        source: ModuleArgs,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long, value_enum, default_value = "tsv")]
        format: ChartFormat,
    },
    /// Algebraic Atiyah–Hirzebruch pages for a module over A2 (p = 2) or the
    /// coefficient ledger (p = 3).
    Aahss {
        #[command(flatten)]
        source: ModuleArgs,
        #[arg(long, default_value_t = 3)]
        smax: u32,
        #[arg(long, default_value_t = 15)]
        tmax: u32,
        /// Total stem bound for the p = 3 ledger.
        #[arg(long, default_value_t = 14)]
        stem_max: u32,
        /// Compare against the bundled expectations and print pass/fail lines.
        #[arg(long)]
        lemma_check: bool,
    },
    /// Replay a topological AHSS scenario (`builtin:mo8`, `builtin:ko` or a path).
    Ahss {
        scenario: String,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Bazaikin tuple invariants, pairwise decisions and census.
    Bazaikin {
        #[command(subcommand)]
        command: BazaikinCommand,
    },
}

#[derive(Subcommand)]
enum BazaikinCommand {
    Invariants {
        #[arg(allow_hyphen_values = true)]
        q: String,
    },
    Classify {
        #[arg(allow_hyphen_values = true)]
        q: String,
        #[arg(allow_hyphen_values = true)]
        q2: String,
    },
    Census {
        #[arg(long)]
        bound: u64,
        #[arg(long, value_enum, default_value = "tsv")]
        format: TableFormat,
    },
}

fn load_module(a: &ModuleArgs) -> Result<ModulePresentation> {
    if let Some(name) = a.module.strip_prefix("builtin:") {
        if !BUILTIN_NAMES.contains(&name) {
            bail!("unknown builtin {name:?}; available: {}", BUILTIN_NAMES.join(", "));
        }
        return Ok(builtin(name, a.k, a.m)?);
    }
    ModulePresentation::load(Path::new(&a.module)).with_context(|| format!("loading module {}", a.module))
}

fn parse_sub(text: &str) -> Result<Subalgebra> {
    Subalgebra::parse(text).with_context(|| format!("unknown subalgebra {text:?} (use A1, A2 or full)"))
}

fn prime_label(p: Prime) -> u32 {
    p.value()
}

fn render_chart(chart: &ExtChart, format: ChartFormat) -> Result<String> {
    Ok(match format {
        ChartFormat::Tsv => chart.to_tsv(),
        ChartFormat::Svg => chart.to_svg(),
        ChartFormat::Json => serde_json::to_string_pretty(chart)? + "\n",
    })
}

fn cache_path(a: &ModuleArgs, sub: &str, r: &RangeArgs) -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_ENV)?;
    let name = a.module.strip_prefix("builtin:")?;
    Some(PathBuf::from(dir).join(format!("ext-{name}-k{}-m{}-{sub}-s{}-t{}.tsv", a.k, a.m, r.smax, r.tmax)))
}

fn cmd_ext(source: &ModuleArgs, range: &RangeArgs, format: ChartFormat, out: Option<&Path>) -> Result<()> {
    let sub = parse_sub(&range.subalgebra)?;
    let cached = cache_path(source, &range.subalgebra.to_ascii_lowercase(), range);
    let hit = cached.as_ref().and_then(|p| std::fs::read_to_string(p).ok());
    let chart = match hit {
        Some(text) => ExtChart::from_tsv(&text)?,
        None => {
            let m = load_module(source)?;
            let res = minimal_resolution(&m, sub, range.smax, range.tmax)?;
            let chart = res.chart();
            if let Some(p) = &cached {
                if let Some(dir) = p.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(p, chart.to_tsv())?;
            }
            chart
        }
    };
    let text = render_chart(&chart, format)?;
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    eprintln!("reliable for s ≤ {}, t ≤ {}", range.smax, range.tmax);
    Ok(())
}

fn cmd_tor(source: &ModuleArgs, range: &RangeArgs, format: ChartFormat) -> Result<()> {
    let sub = parse_sub(&range.subalgebra)?;
    let m = load_module(source)?;
    let chart = bar_homology(&m, sub, range.smax, range.tmax)?;
    print!("{}", render_chart(&chart, format)?);
    Ok(())
}

fn cmd_module(source: &ModuleArgs) -> Result<()> {
    let m = load_module(source)?;
    println!("prime {}", prime_label(m.prime));
    match m.truncation() {
        Some(t) => println!("known through degree {t}"),
        None => println!("finite, top degree {}", m.top_degree()),
    }
    for n in 0..=m.top_degree() {
        if m.dim(n) > 0 {
            println!("{n}\t{}\t{}", m.dim(n), m.names(n).join(" "));
        }
    }
    let checked = relation_sweep(&m)?;
    println!("relation sweep: {checked} relations hold");
    Ok(())
}

fn cmd_aahss(source: &ModuleArgs, smax: u32, tmax: u32, stem_max: u32, lemma_check: bool) -> Result<bool> {
    let m = load_module(source)?;
    match m.prime {
        Prime::Two => {
            let pages = aahss_pages(&m, Subalgebra::A2, smax, tmax)?;
            if !lemma_check {
                print!("{}", pages.to_tsv());
                return Ok(true);
            }
            let mut ok = true;
            for g in check_expectations(&pages, &thom_mod2_expectations()) {
                ok &= g.passed;
                println!("{} {} ({} skipped outside the range)", if g.passed { "PASS" } else { "FAIL" }, g.name, g.skipped);
                for f in &g.failures {
                    println!("    {f}");
                }
            }
            Ok(ok)
        }
        Prime::Three => {
            if lemma_check {
                bail!("--lemma-check is available for the mod-2 Thom module only");
            }
            let pages = aahss_mod3_ledger(&m, &CoefficientChart::mo8_mod3(), &mod3_rules(), smax, stem_max)?;
            print!("{}", pages.to_tsv());
            Ok(true)
        }
    }
}

fn cmd_ahss(scenario: &str, format: ReportFormat) -> Result<bool> {
    let sc = match scenario {
        "builtin:mo8" => Scenario::mo8_meta(),
        "builtin:ko" => Scenario::ko_meta(),
        path => Scenario::load(Path::new(path)).with_context(|| format!("loading scenario {path}"))?,
    };
    let report = replay(&sc)?;
    match format {
        ReportFormat::Text => print!("{}", report.to_text()),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(report.passed())
}

fn parse_tuple(text: &str) -> Result<BazaikinTuple> {
    Ok(text.parse::<BazaikinTuple>()?)
}

fn cmd_bazaikin(c: &BazaikinCommand) -> Result<()> {
    match c {
        BazaikinCommand::Invariants { q } => {
            let t = parse_tuple(q)?;
            let inv = t.invariants()?;
            let c = t.chern_classes()?;
            println!("tuple {t}, canonical {}", t.canonical());
            println!("s = {}", inv.s);
            println!("σ2 = {}", inv.sigma2);
            println!("σ3 = {}", inv.sigma3);
            println!("σ4 mod s = {}", inv.sigma4_mod_s);
            println!("σ5 mod s = {}", inv.sigma5_mod_s);
            println!("chern coefficients c2..c5 = {} {} {} {}", c[0], c[1], c[2], c[3]);
        }
        BazaikinCommand::Classify { q, q2 } => {
            let (a, b) = (parse_tuple(q)?, parse_tuple(q2)?);
            let d = homeomorphic(&a, &b)?;
            println!("{} vs {}: {d}", a.canonical(), b.canonical());
            println!("at most {DIFFEOMORPHISM_BOUND} smooth structures per homeomorphism type");
        }
        BazaikinCommand::Census { bound, format } => {
            if *bound < 5 {
                bail!("census bound must be at least 5");
            }
            let r = census(*bound);
            match format {
                TableFormat::Tsv => print!("{}", r.to_tsv()),
                TableFormat::Json => println!("{}", serde_json::to_string_pretty(&r)?),
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Module { source } => cmd_module(source).map(|_| true),
        Command::Ext { source, range, format, out } => cmd_ext(source, range, *format, out.as_deref()).map(|_| true),
        Command::Tor { source, range, format } => cmd_tor(source, range, *format).map(|_| true),
        Command::Aahss { source, smax, tmax, stem_max, lemma_check } => {
            cmd_aahss(source, *smax, *tmax, *stem_max, *lemma_check)
        }
        Command::Ahss { scenario, format } => cmd_ahss(scenario, *format),
        Command::Bazaikin { command } => cmd_bazaikin(command).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
