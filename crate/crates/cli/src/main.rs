use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use spherepack::bound::{BoundAssembly, BoundConfig};
use spherepack::study::{self, CSV_HEADER, NP_CAP};
use spherepack::{Channel, ChannelModel, Distribution};

mod grid;

/// Sphere-packing exponents and refined lower bounds for DMCs.
#[derive(Parser)]
#[command(name = "spherepack", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// E_SP(R), rho*_R and the maximizing compositions over a rate grid.
    Exponent {
        #[arg(long)]
        channel: PathBuf,
        /// Rates in nats: `0.1,0.2` or `a:b:n`.
        #[arg(long = "R")]
        rates: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Refined lower bound over a blocklength grid, with the exact
    /// hypothesis-testing error for small N.
    Bound {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long = "R")]
        rate: f64,
        #[arg(long = "N")]
        ns: String,
        #[arg(long, default_value_t = 0.1)]
        zeta: f64,
        /// Composition, e.g. `0.5,0.5`. Defaults to the exponent maximizer.
        #[arg(long)]
        p: Option<String>,
        /// Largest N compared against the exact trade-off.
        #[arg(long, default_value_t = NP_CAP)]
        np_cap: usize,
        #[arg(long, default_value_t = 1.5)]
        a: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Exact sphere-radius chain for BSC(p).
    BscStudy {
        #[arg(long)]
        p: f64,
        #[arg(long = "R")]
        rate: f64,
        #[arg(long = "N")]
        ns: String,
        #[arg(long, default_value_t = 0.1)]
        zeta: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Gap left by a composition-independent output law on Z-channels,
    /// with a BSC control.
    ZchannelStudy {
        #[arg(long, default_value = "0.3")]
        q: String,
        /// Rates; eight interior rates per channel when omitted.
        #[arg(long = "R")]
        rates: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        control_p: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Output directory; CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config(msg: impl Into<String>) -> spherepack::Error {
    spherepack::Error::Config(msg.into())
}

fn load_model(path: &Path) -> Result<ChannelModel> {
    let ch = Channel::load(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    Ok(ChannelModel::new(ch)?)
}

fn sink(out: &OutArgs, name: &str) -> Result<Box<dyn Write>> {
    match &out.out {
        None => Ok(Box::new(io::stdout().lock())),
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| config(format!("{}: {e}", dir.display())))?;
            let path = dir.join(name);
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
    }
}

fn write_csv<T: serde::Serialize>(out: &OutArgs, name: &str, meta: &[(&str, String)], rows: &[T]) -> Result<()> {
    let mut w = sink(out, name)?;
    writeln!(w, "{CSV_HEADER}")?;
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

fn write_json<T: serde::Serialize + ?Sized>(out: &OutArgs, name: &str, value: &T) -> Result<()> {
    if out.out.is_some() {
        let mut w = sink(out, name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
    }
    Ok(())
}

fn real_grid(s: &str) -> Result<Vec<f64>> {
    grid::real_grid(s).map_err(|e| config(format!("{e:#}")).into())
}

fn int_grid(s: &str) -> Result<Vec<usize>> {
    grid::int_grid(s).map_err(|e| config(format!("{e:#}")).into())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Exponent { channel, rates, out } => {
            let model = load_model(&channel)?;
            let rates = real_grid(&rates)?;
            let rows = study::exponent_table(&model, &rates, None)?;
            let meta = [("command", "exponent".to_string()), ("channel", channel.display().to_string())];
            write_csv(&out, "exponent.csv", &meta, &rows)
        }
        Cmd::Bound { channel, rate, ns, zeta, p, np_cap, a, out } => {
            let model = load_model(&channel)?;
            let ns = int_grid(&ns)?;
            let cfg = BoundConfig { a, ..Default::default() };
            let asm = BoundAssembly::new(&model, rate, &cfg)?;
            let p = match p {
                Some(s) => {
                    let v = grid::composition(&s).map_err(|e| config(format!("{e:#}")))?;
                    Distribution::new(v).map_err(|e| config(e.to_string()))?
                }
                None => asm.esp().best().composition.clone(),
            };
            let res = study::bound_table(&asm, &model, &ns, zeta, &p, np_cap)?;
            let meta = [
                ("command", "bound".to_string()),
                ("channel", channel.display().to_string()),
                ("R", rate.to_string()),
                ("zeta", zeta.to_string()),
                ("P", p.probs().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")),
                ("compositions", "rounded to the nearest N-type per row".to_string()),
            ];
            let rows: Vec<_> = res.iter().map(|r| &r.1).collect();
            write_csv(&out, "bound.csv", &meta, &rows)?;
            let reports: Vec<_> = res.iter().map(|r| &r.0).collect();
            write_json(&out, "bound_reports.json", &reports)?;
            let constants = json!({
                "R": rate,
                "esp": asm.esp().value,
                "rho_star": asm.esp().rho_star(),
                "a": a,
                "nu": asm.nu(),
                "constants": asm.constants(),
            });
            write_json(&out, "constants.json", &constants)
        }
        Cmd::BscStudy { p, rate, ns, zeta, out } => {
            let ns = int_grid(&ns)?;
            let rows = study::bsc_study(p, rate, &ns, zeta, &BoundConfig::default())?;
            let meta = [
                ("command", "bsc-study".to_string()),
                ("p", p.to_string()),
                ("R", rate.to_string()),
                ("zeta", zeta.to_string()),
            ];
            write_csv(&out, "bsc_study.csv", &meta, &rows)
        }
        Cmd::ZchannelStudy { q, rates, control_p, out } => {
            let qs = real_grid(&q)?;
            let rates = rates.as_deref().map(real_grid).transpose()?;
            let rows = study::zchannel_study(&qs, rates.as_deref(), control_p)?;
            let meta = [
                ("command", "zchannel-study".to_string()),
                (
                    "q_fixed",
                    "output law of the saddle point at the exponent-maximizing composition, held fixed over all compositions"
                        .to_string(),
                ),
                ("control", format!("BSC({control_p})")),
            ];
            write_csv(&out, "zchannel_study.csv", &meta, &rows)
        }
    }
}

/// 3 for configuration and I/O problems, 2 for everything the library
/// rejects on mathematical grounds.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<spherepack::Error>() {
            return match err {
                spherepack::Error::Config(_) | spherepack::Error::Io(_) | spherepack::Error::Json(_) => 3,
                _ => 2,
            };
        }
    }
    3
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SPHEREPACK_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| config(format!("SPHEREPACK_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|_| run(cli.cmd)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
