//! `dnt`: robust double no-touch pricing from the command line.
//!
//! Exit codes: 0 clean, 2 weak or WFLVR arbitrage, 3 model-free arbitrage,
//! 4 a failed `verify`, 1 any error.

mod config;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dnt_core::arbitrage::{check_digitals, check_quotes, ArbitrageReport, Verdict};
use dnt_core::bounds::{continuum_bounds, finite_bounds, p_surface, BarrierGrid};
use dnt_core::fmt_sig;
use dnt_core::market::*;
use dnt_core::simulate::{backtest, realize_embedding, BacktestConfig, EmbeddingKind, McConfig};

#[derive(Parser)]
#[command(name = "dnt", version, about = "Model-free bounds and hedges for double no-touch options")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check call (and digital) quotes for arbitrage.
    Check {
        quotes: PathBuf,
        #[arg(long)]
        digitals: Option<PathBuf>,
        /// Barriers `b,b̄`; defaults to the digital levels.
        #[arg(long, value_parser = parse_barriers)]
        barriers: Option<Barriers>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sharp price bounds and the hedges that attain them.
    Bounds {
        quotes: PathBuf,
        #[arg(long, value_parser = parse_barriers)]
        barriers: Barriers,
        #[arg(long, conflicts_with = "continuum")]
        digitals: Option<PathBuf>,
        /// Extend the quotes linearly and treat them as a full call curve.
        #[arg(long)]
        continuum: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the extremal embeddings and compare with the bounds.
    Verify {
        quotes: PathBuf,
        #[arg(long, value_parser = parse_barriers)]
        barriers: Barriers,
        #[command(flatten)]
        mc: McArgs,
        /// Also simulate the mixture that uses Perkins with this probability.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heston hedging backtest: robust hedge against delta/vega.
    Backtest {
        /// `key = value` file; every key is required. Built-in default if omitted.
        config: Option<PathBuf>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report.txt, cdf.tsv and cdf.svg.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the default configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Bound surfaces over a grid of barrier pairs.
    Surface {
        quotes: PathBuf,
        /// Grid points per barrier.
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = McConfig::default().seed)]
    seed: u64,
}

fn parse_barriers(s: &str) -> Result<Barriers, String> {
    let (a, b) = s.split_once(',').ok_or("expected `lower,upper`")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Barriers::new(num(a)?, num(b)?).map_err(|e| e.to_string())
}

fn read_quotes(path: &Path) -> Result<CallQuoteSet> {
    let f = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_quotes(BufReader::new(f)).with_context(|| format!("in {}", path.display()))
}

fn read_digitals(path: &Path) -> Result<DigitalQuotes> {
    let f = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_digitals(BufReader::new(f)).with_context(|| format!("in {}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    print!("{text}");
    if let Some(p) = out {
        fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::None => 0,
        Verdict::Weak | Verdict::Wflvr => 2,
        Verdict::ModelFree => 3,
    }
}

/// The most severe finding over the calls and, if given, the digitals.
fn arbitrage(q: &CallQuoteSet, d: Option<&DigitalQuotes>, bars: Option<&Barriers>) -> Result<ArbitrageReport> {
    let calls = check_quotes(q);
    let (Some(d), false) = (d, calls.verdict != Verdict::None) else { return Ok(calls) };
    let bars = match bars {
        Some(b) => *b,
        None => match (d.lower, d.upper) {
            (Some((b, _)), Some((bu, _))) => Barriers::new(b, bu)?,
            _ => bail!("--barriers is required unless both digitals are quoted"),
        },
    };
    Ok(check_digitals(q, d, &bars)?)
}

fn cmd_check(quotes: &Path, digitals: Option<&Path>, bars: Option<&Barriers>, out: Option<&Path>) -> Result<u8> {
    let q = read_quotes(quotes)?;
    let d = digitals.map(read_digitals).transpose()?;
    let r = arbitrage(&q, d.as_ref(), bars)?;
    emit(&r.to_string(), out)?;
    Ok(exit_code(r.verdict))
}

fn cmd_bounds(
    quotes: &Path,
    bars: &Barriers,
    digitals: Option<&Path>,
    continuum: bool,
    out: Option<&Path>,
) -> Result<u8> {
    let q = read_quotes(quotes)?;
    bars.check_spot(q.spot)?;
    let d = digitals.map(read_digitals).transpose()?;
    let r = arbitrage(&q, d.as_ref(), Some(bars))?;
    if r.verdict != Verdict::None {
        emit(&r.to_string(), out)?;
        return Ok(exit_code(r.verdict));
    }
    let res = if continuum {
        continuum_bounds(&extend_piecewise_linear(&q, &[], Some(bars.upper))?, bars)?
    } else {
        finite_bounds(&q, d.as_ref(), bars)?
    };
    emit(&res.to_string(), out)?;
    Ok(0)
}

fn cmd_verify(quotes: &Path, bars: &Barriers, mc: &McArgs, lambda: Option<f64>, out: Option<&Path>) -> Result<u8> {
    let q = read_quotes(quotes)?;
    let curve = extend_piecewise_linear(&q, &[], Some(bars.upper))?;
    let mu = implied_measure(&curve)?;
    let bounds = continuum_bounds(&curve, bars)?;
    let cfg = McConfig { paths: mc.paths, dt: mc.dt, seed: mc.seed, ..McConfig::default() };
    let mut text = String::new();
    let mut pass = true;
    let runs = [
        ("upper", EmbeddingKind::Perkins, bounds.upper.value),
        ("lower", EmbeddingKind::TiltedJacka, bounds.lower.value),
    ];
    for (side, kind, target) in runs {
        let r = realize_embedding(&mu, bars, kind, &cfg)?;
        let ok = r.estimate.within(target, 3.0);
        pass &= ok;
        text += &format!("{side}_bound {}\n", fmt_sig(target));
        text += &format!("{kind:?} {}\n", r.estimate);
        text += &format!("{side}_within_3se {}\n", if ok { "yes" } else { "no" });
        text += &format!("{side}_stopped_law_tv {}\n", fmt_sig(r.tv_distance));
        for w in &r.warnings {
            text += &format!("warning {w}\n");
        }
    }
    if let Some(l) = lambda {
        let r = realize_embedding(&mu, bars, EmbeddingKind::Mix(l), &cfg)?;
        let slack = 3.0 * r.estimate.std_err;
        let inside = r.estimate.value >= bounds.lower.value - slack && r.estimate.value <= bounds.upper.value + slack;
        text += &format!("mix {} {}\n", fmt_sig(l), r.estimate);
        text += &format!("mix_inside_bounds {}\n", if inside { "yes" } else { "no" });
    }
    text += &format!("verdict {}\n", if pass { "PASS" } else { "FAIL" });
    emit(&text, out)?;
    Ok(if pass { 0 } else { 4 })
}

fn cmd_backtest(config: Option<&Path>, paths: Option<usize>, seed: Option<u64>, out: Option<&Path>) -> Result<u8> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            config::parse_backtest(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => BacktestConfig::default(),
    };
    cfg.paths = paths.unwrap_or(cfg.paths);
    cfg.seed = seed.unwrap_or(cfg.seed);
    let r = backtest(&cfg)?;
    let text = r.to_string();
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        fs::write(dir.join("report.txt"), &text)?;
        fs::write(dir.join("cdf.tsv"), r.cdf_table(201))?;
        fs::write(dir.join("cdf.svg"), r.to_svg())?;
    }
    Ok(0)
}

fn cmd_surface(quotes: &Path, n: usize, out: Option<&Path>) -> Result<u8> {
    if n == 0 {
        bail!("--n must be positive");
    }
    let q = read_quotes(quotes)?;
    let mu = implied_measure(&extend_piecewise_linear(&q, &[], None)?)?;
    let s = p_surface(&mu, &BarrierGrid::spanning(&mu, n))?;
    let mut text = String::from("lower_barrier\tupper_barrier\tp_lower\tp_upper\n");
    for (i, b) in s.lowers.iter().enumerate() {
        for (j, bu) in s.uppers.iter().enumerate() {
            text += &format!(
                "{}\t{}\t{}\t{}\n",
                fmt_sig(*b),
                fmt_sig(*bu),
                fmt_sig(s.lower_at(i, j)),
                fmt_sig(s.upper_at(i, j))
            );
        }
    }
    emit(&text, out)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Check { quotes, digitals, barriers, out } => {
            cmd_check(&quotes, digitals.as_deref(), barriers.as_ref(), out.as_deref())
        }
        Cmd::Bounds { quotes, barriers, digitals, continuum, out } => {
            cmd_bounds(&quotes, &barriers, digitals.as_deref(), continuum, out.as_deref())
        }
        Cmd::Verify { quotes, barriers, mc, lambda, out } => {
            cmd_verify(&quotes, &barriers, &mc, lambda, out.as_deref())
        }
        Cmd::Backtest { print_config: true, .. } => {
            print!("{}", config::DEFAULT_CONFIG);
            Ok(0)
        }
        Cmd::Backtest { config, paths, seed, out, .. } => cmd_backtest(config.as_deref(), paths, seed, out.as_deref()),
        Cmd::Surface { quotes, n, out } => cmd_surface(&quotes, n, out.as_deref()),
    }
}

fn main() -> ExitCode {
    // clap reports usage errors with 2, which is taken by weak arbitrage
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
