//! Command-line parsing and dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use crate::checks::{self, parse_targets, report_table, HiStatus, Target, ValidateOptions};
use crate::config::{parse_n_list, parse_p_list, parse_variants, ExperimentConfig, Format, Order};
use crate::experiments::{self as ex, Profile};
use crate::svg::Chart;
use crate::table::{fmt_sig, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    DepthDiscrepancy,
    DepthHeight,
    RankTies,
    JitBits,
    VaryP,
    Biased,
    PersistSpace,
    HiCheck,
    Validate,
}

#[derive(Debug, Parser)]
#[command(name = "zipzip", about = "Zip tree experiments and checks")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Comma-separated variants or structures.
    #[arg(long)]
    pub variant: Option<String>,
    /// Sizes: `256..65536` (powers of two), a comma list or one value.
    #[arg(long)]
    pub n: Option<String>,
    /// Trials per cell (sequence pairs for hi-check).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Exponent of the uniform and secondary rank ranges.
    #[arg(long, default_value_t = 3)]
    pub c: u32,
    /// Geometric parameter; a comma list for vary-p.
    #[arg(long)]
    pub p: Option<String>,
    /// `sequential` or `random`; jit-bits runs both when omitted.
    #[arg(long)]
    pub order: Option<String>,
    /// Output file; the extension is replaced by .csv or .svg.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Break one structure mid-run (validate only).
    #[arg(long)]
    pub inject_fault: bool,
    /// Operations per structure (validate only).
    #[arg(long, default_value_t = 100_000)]
    pub ops: usize,
    /// Skip the exhaustive oracle and persistence checks (validate only).
    #[arg(long)]
    pub quick: bool,
}

/// Parses `argv` and runs the command; returns the exit code.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match dispatch(&args, out, err) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if e.is::<UsageError>() {
                EXIT_USAGE
            } else {
                EXIT_FAILED
            }
        }
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| anyhow::Error::new(UsageError(format!("{e:#}"))))
}

fn config(args: &Args, default_n: &str, default_trials: usize) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig {
        n_list: parse_n_list(args.n.as_deref().unwrap_or(default_n))?,
        trials: args.trials.unwrap_or(default_trials),
        seed: args.seed,
        c: args.c,
        order: args.order.as_deref().unwrap_or("sequential").parse::<Order>()?,
        ..ExperimentConfig::default()
    };
    if let Some(v) = &args.variant {
        cfg.variants = parse_variants(v)?;
    }
    if args.command != Command::VaryP {
        if let Some(p) = &args.p {
            cfg.p = p.trim().parse().with_context(|| format!("bad probability {p:?}"))?;
        }
    }
    cfg.check()?;
    Ok(cfg)
}

struct Output {
    format: Format,
    path: Option<PathBuf>,
}

impl Output {
    fn from_args(args: &Args) -> Result<Self> {
        let format: Format = args.format.parse()?;
        if format != Format::Csv && args.out.is_none() {
            bail!("--format {} needs --out", args.format);
        }
        Ok(Output {
            format,
            path: args.out.clone(),
        })
    }

    fn path_with(&self, suffix: &str, ext: &str) -> Option<PathBuf> {
        self.path.as_ref().map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            p.with_file_name(format!("{stem}{suffix}.{ext}"))
        })
    }

    /// Writes the main table (and chart), plus any extra tables next to it.
    fn emit(&self, out: &mut dyn Write, table: &Table, chart: Option<&Chart>, extra: &[(&str, &Table)]) -> Result<()> {
        if self.format != Format::Svg {
            match self.path_with("", "csv") {
                Some(p) => write_file(&p, table.to_csv_string())?,
                None => table.write_csv(&mut *out)?,
            }
            for (suffix, t) in extra {
                match self.path_with(&format!("_{suffix}"), "csv") {
                    Some(p) => write_file(&p, t.to_csv_string())?,
                    None => {
                        writeln!(out)?;
                        t.write_csv(&mut *out)?;
                    }
                }
            }
        }
        if self.format != Format::Csv {
            if let (Some(chart), Some(p)) = (chart, self.path_with("", "svg")) {
                write_file(&p, chart.render())?;
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, body: String) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn dispatch(args: &Args, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    let output = usage(Output::from_args(args))?;
    match args.command {
        Command::DepthDiscrepancy | Command::DepthHeight => {
            let cfg = usage(config(args, "256..65536", 100))?;
            usage(ex::check_depth_variants(&cfg))?;
            let rows = ex::depth_rows(&cfg)?;
            if args.command == Command::DepthDiscrepancy {
                output.emit(
                    out,
                    &ex::discrepancy_table(&rows),
                    Some(&ex::discrepancy_chart(&rows)),
                    &[],
                )?;
            } else {
                output.emit(
                    out,
                    &ex::depth_height_table(&rows),
                    Some(&ex::depth_height_chart(&rows)),
                    &[],
                )?;
            }
        }
        Command::RankTies => {
            let mut cfg = usage(config(args, "256..65536", 100))?;
            if args.variant.is_none() {
                cfg.variants = vec![zipzip::Variant::Uniform, zipzip::Variant::ZipZip];
            }
            let res = usage(ex::rank_ties(&cfg))?;
            for (v, f) in &res.fits {
                writeln!(err, "{v}: slope {} (r^2 {})", fmt_sig(f.slope), fmt_sig(f.r_squared))?;
            }
            output.emit(
                out,
                &ex::ties_table(&res),
                Some(&ex::ties_chart(&res)),
                &[("fit", &ex::ties_fit_table(&res))],
            )?;
        }
        Command::JitBits => {
            let cfg = usage(config(args, "256..65536", 100))?;
            let orders = if args.order.is_some() {
                vec![cfg.order]
            } else {
                vec![Order::Sequential, Order::Random]
            };
            let rows = ex::jit_bits(&cfg, &orders)?;
            output.emit(out, &ex::jit_table(&rows), Some(&ex::jit_chart(&rows)), &[])?;
        }
        Command::VaryP => {
            let cfg = usage(config(args, "65536", 100))?;
            let ps = match &args.p {
                Some(p) => usage(parse_p_list(p))?,
                None => ex::DEFAULT_P_LIST.to_vec(),
            };
            let rows = ex::vary_p(&cfg, &ps)?;
            output.emit(out, &ex::vary_p_table(&rows), Some(&ex::vary_p_chart(&rows)), &[])?;
        }
        Command::Biased => {
            let cfg = usage(config(args, "16384", 100))?;
            let res = ex::biased(&cfg, &Profile::ALL)?;
            if let Some(f) = res.fit {
                writeln!(
                    err,
                    "heavy-key depth = {} + {} * log2(W/w) (r^2 {})",
                    fmt_sig(f.intercept),
                    fmt_sig(f.slope),
                    fmt_sig(f.r_squared)
                )?;
            }
            output.emit(out, &ex::biased_table(&res), Some(&ex::biased_chart(&res)), &[])?;
        }
        Command::PersistSpace => {
            let cfg = usage(config(args, "16384", 10))?;
            let rows = ex::persist_space(&cfg)?;
            output.emit(out, &ex::persist_table(&rows), Some(&ex::persist_chart(&rows)), &[])?;
            let bad: usize = rows.iter().map(|r| r.mismatches).sum();
            if bad > 0 {
                writeln!(err, "{bad} historical queries disagree with the recorded snapshots")?;
                return Ok(false);
            }
        }
        Command::HiCheck => {
            let targets = match &args.variant {
                Some(v) => usage(parse_targets(v))?,
                None => Target::HISTORY_INDEPENDENT.to_vec(),
            };
            let rows = checks::hi_check(&targets, args.trials.unwrap_or(1000), args.seed)?;
            output.emit(out, &checks::hi_table(&rows), None, &[])?;
            let mut ok = true;
            for r in &rows {
                match r.status {
                    HiStatus::Pass => {}
                    HiStatus::Exempt => writeln!(err, "{}: exempt (ranks depend on the comparison history)", r.target)?,
                    HiStatus::Fail { first_seed } => {
                        ok = false;
                        writeln!(
                            err,
                            "{}: {} of {} pairs differ; first at pair seed {first_seed}",
                            r.target, r.failures, r.pairs
                        )?;
                    }
                }
            }
            return Ok(ok);
        }
        Command::Validate => {
            let targets = match &args.variant {
                Some(v) => usage(parse_targets(v))?,
                None => Target::ALL.to_vec(),
            };
            let opts = ValidateOptions {
                targets,
                ops: args.ops,
                seed: args.seed,
                inject_fault: args.inject_fault,
                exhaustive: !args.quick,
            };
            let reports = checks::validate(&opts)?;
            output.emit(out, &report_table(&reports, args.seed), None, &[])?;
            let mut ok = true;
            for r in reports.iter().filter(|r| !r.passed()) {
                ok = false;
                for f in &r.failures {
                    writeln!(err, "{}: {f}", r.name)?;
                }
            }
            return Ok(ok);
        }
    }
    Ok(true)
}
