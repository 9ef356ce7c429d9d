use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collage_synth::assets::{builtin_catalog, export_builtin, load_catalog, validate_asset, AssetKind};
use collage_synth::config::GenConfig;
use collage_synth::dataset::validate_run;
use collage_synth::pipeline::{self, MAX_ERROR_RATE};
use collage_synth::taskgen::TaskKind;
use collage_synth::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "collage-synth", version, about = "Deterministic collage data for image generation and editing")]
struct Cli {
    /// More log output (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sharded dataset
    Gen(GenArgs),
    /// Replay a generated dataset and compare every file
    Validate {
        out_dir: PathBuf,
    },
    /// Render a contact sheet of a few samples of one task
    Preview {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, value_parser = |s: &str| s.parse::<TaskKind>().map_err(|e| e.to_string()))]
        task: TaskKind,
        #[arg(short, default_value_t = 8)]
        n: usize,
        #[arg(short, long, default_value = "preview.png")]
        output: PathBuf,
    },
    /// Asset library tools
    Assets {
        #[command(subcommand)]
        command: AssetsCommand,
    },
}

#[derive(Subcommand)]
enum AssetsCommand {
    /// Load an asset directory (or the built-in library) and report problems
    Check { root: Option<PathBuf> },
    /// Write the built-in library to a directory
    Export { root: PathBuf },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Per-task count, `task=n`; also accepted as `--count.<task> n`
    #[arg(long = "count", value_parser = parse_count)]
    counts: Vec<(TaskKind, u64)>,
}

fn parse_count(s: &str) -> Result<(TaskKind, u64), String> {
    let (task, n) = s.split_once('=').ok_or("expected task=n")?;
    let n = n.parse().map_err(|e| format!("count for {task}: {e}"))?;
    Ok((task.parse().map_err(|e: Error| e.to_string())?, n))
}

/// Rewrites `--count.<task>=n` and `--count.<task> n` into `--count <task>=n`.
fn expand_count_flags(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.strip_prefix("--count.") {
            Some(rest) => {
                out.push("--count".to_owned());
                match rest.split_once('=') {
                    Some(_) => out.push(rest.to_owned()),
                    None => out.push(format!("{rest}={}", it.next().unwrap_or_default())),
                }
            }
            None => out.push(a),
        }
    }
    out
}

struct Style {
    color: bool,
}

impl Style {
    fn detect() -> Self {
        let no_color = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
        Style {
            color: !no_color && std::io::stdout().is_terminal(),
        }
    }

    fn status(&self, ok: bool) -> String {
        match (ok, self.color) {
            (true, true) => "\x1b[32mPASS\x1b[0m".into(),
            (false, true) => "\x1b[31mFAIL\x1b[0m".into(),
            (true, false) => "PASS".into(),
            (false, false) => "FAIL".into(),
        }
    }
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::Config { .. })
}

fn load_config(args: &ConfigArgs) -> collage_synth::Result<GenConfig> {
    let mut cfg = match &args.config {
        Some(p) => GenConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::Config {
                field: "config".into(),
                message: e.to_string(),
            },
            e => e,
        })?,
        None => GenConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn cmd_gen(args: GenArgs, style: &Style) -> Result<u8, Error> {
    let mut cfg = load_config(&args.common)?;
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    for (t, n) in args.counts {
        cfg.counts.insert(t, n);
    }
    cfg.validate()?;
    let summary = pipeline::run(&cfg)?;
    println!("out: {}", summary.out_dir.display());
    println!("config hash: {}", summary.config_hash);
    for t in TaskKind::ALL {
        let req = summary.requested.get(&t).copied().unwrap_or(0);
        let got = summary.written.get(&t).copied().unwrap_or(0);
        println!("  {:<15} {got:>8} / {req}", t.tag());
    }
    println!(
        "{} samples in {:.2}s ({:.1} samples/s), {} shard(s) written, {} kept",
        summary.generated(),
        summary.elapsed.as_secs_f64(),
        summary.samples_per_sec(),
        summary.shards_written,
        summary.shards_skipped
    );
    if summary.polish_warnings > 0 {
        println!("{} prompt(s) kept unpolished after polisher errors", summary.polish_warnings);
    }
    if !summary.failures.is_empty() {
        println!("{} sample(s) failed:", summary.failures.len());
        for f in summary.failures.iter().take(10) {
            println!("  {} #{}: {}", f.task, f.task_index, f.error);
        }
    }
    if summary.succeeded() {
        Ok(0)
    } else {
        println!(
            "{} error rate {:.2}% exceeds {:.0}%",
            style.status(false),
            summary.error_rate() * 100.0,
            MAX_ERROR_RATE * 100.0
        );
        Ok(EXIT_FAILURE)
    }
}

fn cmd_validate(out_dir: &Path, style: &Style) -> Result<u8, Error> {
    let report = validate_run(out_dir)?;
    for (t, tally) in &report.per_task {
        println!(
            "{} {:<15} {}/{}",
            style.status(tally.passed == tally.total),
            t.tag(),
            tally.passed,
            tally.total
        );
    }
    println!("{} shard(s), {} record(s), {} failure(s)", report.shards, report.records, report.failure_count);
    for f in &report.failures {
        match (f.sample_id, f.task) {
            (Some(id), Some(t)) => println!("  {} #{id} ({t}): {}", f.shard, f.reason),
            _ => println!("  {}: {}", f.shard, f.reason),
        }
    }
    println!("{}", style.status(report.passed()));
    Ok(if report.passed() { 0 } else { EXIT_FAILURE })
}

fn cmd_assets_check(root: Option<&Path>) -> Result<u8, Error> {
    let (catalog, warnings) = match root {
        Some(r) => load_catalog(r)?,
        None => (builtin_catalog(), Vec::new()),
    };
    let mut problems = warnings.len();
    for w in &warnings {
        println!("warning: {w}");
    }
    for asset in catalog.iter() {
        let report = validate_asset(asset);
        if !report.is_valid() {
            problems += 1;
            println!("invalid: {}: {report:?}", asset.id);
        }
    }
    for kind in [AssetKind::Sticker, AssetKind::Background, AssetKind::Glyph] {
        println!("{:<12} {}", kind.label(), catalog.count_of_kind(kind));
    }
    println!("fonts: {}", catalog.fonts().collect::<Vec<_>>().join(", "));
    println!("fingerprint: {}", catalog.fingerprint());
    Ok(if problems == 0 { 0 } else { EXIT_FAILURE })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(expand_count_flags(std::env::args())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .write_style(if std::env::var_os("NO_COLOR").is_some() {
            env_logger::WriteStyle::Never
        } else {
            env_logger::WriteStyle::Auto
        })
        .init();
    let style = Style::detect();
    // a run that cannot be opened at all is a usage error
    let validating = matches!(cli.command, Command::Validate { .. });
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args, &style),
        Command::Validate { out_dir } => cmd_validate(&out_dir, &style),
        Command::Preview {
            common,
            task,
            n,
            output,
        } => load_config(&common)
            .and_then(|cfg| pipeline::preview(&cfg, task, n))
            .and_then(|sheet| {
                sheet.save(&output).map_err(|e| Error::Image {
                    path: output.clone(),
                    source: e,
                })?;
                println!("wrote {}", output.display());
                Ok(0)
            }),
        Command::Assets { command } => match command {
            AssetsCommand::Check { root } => cmd_assets_check(root.as_deref()),
            AssetsCommand::Export { root } => export_builtin(&root).map(|_| {
                println!("exported built-in assets to {}", root.display());
                0
            }),
        },
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if validating || is_usage(&e) { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn count_flags_are_expanded() {
        assert_eq!(
            expand_count_flags(strs(&["x", "gen", "--count.inpaint=5", "--count.seg_det", "7", "--jobs", "2"])),
            strs(&["x", "gen", "--count", "inpaint=5", "--count", "seg_det=7", "--jobs", "2"])
        );
    }

    #[test]
    fn counts_parse() {
        assert_eq!(parse_count("drag_edit=3").unwrap(), (TaskKind::DragEdit, 3));
        assert!(parse_count("drag_edit").is_err());
        assert!(parse_count("nope=3").is_err());
        assert!(parse_count("inpaint=-1").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
