//! `cisguard`: profile listings, compare them, and run cluster scenarios.
//!
//! Every command goes through the HTTP service. With `--server` (or
//! `CISGUARD_SERVER`) the CLI talks to that instance; otherwise it starts a
//! private one on a loopback port for the duration of the command.
//!
//! Exit codes: 0 success, 1 a `run` finished with at least one attack,
//! 2 usage or input error.

mod render;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cisguard_client::Client;
use cisguard_core::api::{DiffRequest, InjectRequest, NamedSource, ProfileRequest, RunRequest, StatsRequest};
use cisguard_core::sim::{Scenario, TamperPatch, TimingChoice};
use cisguard_core::NodeId;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Timing {
    Modeled,
    Measured,
}

#[derive(Debug, Parser)]
#[command(name = "cisguard", version, about = "Insider attack detection from control instruction sequences")]
struct Cli {
    /// Service to use instead of an embedded one.
    #[arg(long, global = true, env = "CISGUARD_SERVER")]
    server: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    json: bool,
    /// Write the output (for `run`, the JSON-lines report) to a file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation seed. `RS_SEED` takes precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Keep operands in control-flow tokens.
    #[arg(long, global = true)]
    include_operands: bool,
    #[arg(long, global = true)]
    rotation_ms: Option<u64>,
    #[arg(long, global = true)]
    key_history: Option<usize>,
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
    #[arg(long, global = true, value_enum)]
    timing: Option<Timing>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fingerprint and instruction mix of one listing.
    Profile { file: PathBuf },
    /// Instruction mix of a listing or of every file under a directory.
    Stats { path: PathBuf },
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        /// Include the event trace in JSON output.
        #[arg(long)]
        trace: bool,
    },
    /// Add a tamper patch to a scenario and print the result.
    Inject {
        scenario: PathBuf,
        #[arg(long)]
        node: u32,
        #[arg(long)]
        process: String,
        /// JSON `{"insertions": [[pos, "line"]], "deletions": [pos]}`.
        #[arg(long)]
        patch_file: PathBuf,
    },
    /// Compare two listings the way a worker would.
    Diff { a: PathBuf, b: PathBuf },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Deserialize)]
struct PatchFile {
    #[serde(default)]
    insertions: Vec<(usize, String)>,
    #[serde(default)]
    deletions: Vec<usize>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("RS_SEED") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("RS_SEED={v:?} is not an unsigned integer"))?)),
        Err(_) => Ok(None),
    }
}

impl Cli {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else {
            self.format
        }
    }

    fn apply_overrides(&self, scenario: &mut Scenario) -> Result<()> {
        let c = &mut scenario.config;
        if let Some(seed) = env_seed()?.or(self.seed) {
            c.seed = seed;
        }
        if let Some(v) = self.rotation_ms {
            c.rotation_ms = v;
        }
        if let Some(v) = self.key_history {
            c.key_history = v;
        }
        if let Some(v) = self.timeout_ms {
            c.timeout_ms = v;
        }
        if let Some(t) = self.timing {
            c.timing = match t {
                Timing::Modeled => TimingChoice::Modeled,
                Timing::Measured => TimingChoice::Measured,
            };
        }
        if self.include_operands {
            c.include_operands = true;
        }
        Ok(())
    }
}

async fn execute(cli: &Cli, client: &Client) -> Result<ExitCode> {
    let format = cli.format();
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Profile { file } => {
            let req = ProfileRequest {
                source: read(file)?,
                process_id: file.display().to_string(),
                include_operands: cli.include_operands,
            };
            let resp = client.profile(&req).await?;
            emit(out, &render::profile(&resp, format == Format::Json))?;
        }
        Command::Stats { path } => {
            let files = collect_files(path)?;
            let resp = client.stats(&StatsRequest { files }).await?;
            emit(out, &render::stats(&resp, format == Format::Json))?;
        }
        Command::Diff { a, b } => {
            let req = DiffRequest {
                a: read(a)?,
                b: read(b)?,
                include_operands: cli.include_operands,
            };
            let resp = client.diff(&req).await?;
            emit(out, &render::diff(&resp, format == Format::Json))?;
        }
        Command::Run { scenario, trace } => {
            let mut s = Scenario::load(scenario)?;
            cli.apply_overrides(&mut s)?;
            let outcome = client.run(&RunRequest { scenario: s }).await?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(path) = out {
                let lines = outcome.report.as_ref().map(|r| r.to_json_lines()).unwrap_or_default();
                std::fs::write(path, lines).with_context(|| format!("cannot write {}", path.display()))?;
            }
            print!("{}", render::run(&outcome, format == Format::Json, *trace));
            if outcome.attack_detected() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Inject {
            scenario,
            node,
            process,
            patch_file,
        } => {
            let raw = Scenario::from_json(&read(scenario)?)?;
            let pf: PatchFile = serde_json::from_str(&read(patch_file)?)
                .with_context(|| format!("bad patch file {}", patch_file.display()))?;
            let patch = TamperPatch {
                target_node: NodeId(*node),
                process_id: process.clone(),
                insertions: pf.insertions,
                deletions: pf.deletions,
            };
            let mut resolved = raw.clone();
            resolved.resolve_sources(scenario.parent().unwrap_or(Path::new(".")))?;
            client
                .inject(&InjectRequest {
                    scenario: resolved,
                    patch: patch.clone(),
                })
                .await?;
            let mut patched = raw;
            patched.patches.push(patch);
            let mut text = serde_json::to_string_pretty(&patched)?;
            text.push('\n');
            emit(out, &text)?;
        }
        Command::Serve { .. } => unreachable!("handled before connecting"),
    }
    Ok(ExitCode::SUCCESS)
}

fn collect_files(path: &Path) -> Result<Vec<NamedSource>> {
    if !path.is_dir() {
        return Ok(vec![NamedSource {
            name: path.display().to_string(),
            source: read(path)?,
        }]);
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.with_context(|| format!("cannot walk {}", path.display()))?;
        if entry.file_type().is_file() {
            let name = entry.path().strip_prefix(path).unwrap_or(entry.path());
            files.push(NamedSource {
                name: name.display().to_string(),
                source: read(entry.path())?,
            });
        }
    }
    if files.is_empty() {
        bail!("no files under {}", path.display());
    }
    Ok(files)
}

async fn main_async(cli: Cli) -> Result<ExitCode> {
    if let Command::Serve { addr } = cli.command {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        cisguard_service::serve(listener, cisguard_service::ctrl_c()).await?;
        return Ok(ExitCode::SUCCESS);
    }
    let client = match &cli.server {
        Some(url) => Client::new(url.clone()),
        None => {
            let (addr, _) = cisguard_service::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
                .await
                .context("cannot start embedded service")?;
            Client::new(format!("http://{addr}"))
        }
    };
    execute(&cli, &client).await
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match runtime.block_on(main_async(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
