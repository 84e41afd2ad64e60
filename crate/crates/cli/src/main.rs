use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};
use vesicle_core::app::{self, Output, RunConfig};
use vesicle_core::Error;

#[derive(Parser)]
#[command(name = "vesicle", version, about = "Bifurcation analysis of two-phase vesicles")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Characteristic roots per degree.
    Roots(Common),
    /// Mode data (sigma, tau, slope) at each transversal root.
    ModeTable(Common),
    /// Fixed-space direction and nodal mesh.
    Direction(Common),
    /// Nodal-set meshes only.
    NodalExport(Common),
    /// Residual on the trivial branch, and at an optional state.
    ResidualCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Detect, switch and continue branches.
    Continue(Common),
    /// Cross-module invariant suite.
    Selfcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated degrees.
    #[arg(long, value_delimiter = ',')]
    l: Option<Vec<usize>>,
    #[arg(long)]
    subgroup: Option<String>,
    #[arg(long)]
    lmax: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json(&fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = &self.l {
            cfg.l = l.clone();
        }
        if let Some(g) = &self.subgroup {
            cfg.subgroup = g.clone();
        }
        if let Some(l) = self.lmax {
            cfg.model.l_max = l;
        }
        if let Some(o) = &self.out {
            cfg.out = o.to_string_lossy().into_owned();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sha256_hex(s: &str) -> String {
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_outputs(dir: &Path, cfg: &RunConfig, verb: &str, out: &Output) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let config = cfg.to_json()?;
    let mut files: Vec<(String, String)> = out.files.clone();
    files.push(("config.json".into(), config.clone()));
    let mut entries: Vec<_> = files.iter().map(|(n, c)| json!({ "name": n, "sha256": sha256_hex(c) })).collect();
    entries.sort_by(|a, b| a["name"].as_str().cmp(&b["name"].as_str()));
    let manifest = json!({
        "tool": "vesicle",
        "version": env!("CARGO_PKG_VERSION"),
        "verb": verb,
        "seed": cfg.seed,
        "config_sha256": sha256_hex(&config),
        "ok": out.ok,
        "files": entries,
    });
    files.push(("manifest.json".into(), serde_json::to_string_pretty(&manifest)? + "\n"));
    for (name, content) in &files {
        let p = dir.join(name);
        fs::write(&p, content).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, (i32, anyhow::Error)> {
    let (verb, common) = match &cli.verb {
        Verb::Roots(c) => ("roots", c),
        Verb::ModeTable(c) => ("mode-table", c),
        Verb::Direction(c) => ("direction", c),
        Verb::NodalExport(c) => ("nodal-export", c),
        Verb::ResidualCheck { common, .. } => ("residual-check", common),
        Verb::Continue(c) => ("continue", c),
        Verb::Selfcheck { common, .. } => ("selfcheck", common),
    };
    let fail = |e: Error| (app::exit_code(&e), anyhow::Error::new(e).context(format!("{verb} failed")));
    let cfg = common.load().map_err(fail)?;
    let out = match &cli.verb {
        Verb::Roots(_) => app::cmd_roots(&cfg),
        Verb::ModeTable(_) => app::cmd_mode_table(&cfg),
        Verb::Direction(_) => app::cmd_direction(&cfg),
        Verb::NodalExport(_) => app::cmd_nodal_export(&cfg),
        Verb::ResidualCheck { state, .. } => {
            let sf = match state {
                Some(p) => Some(
                    fs::read_to_string(p)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))
                        .and_then(|s| app::read_state(&s))
                        .map_err(fail)?,
                ),
                None => None,
            };
            app::cmd_residual_check(&cfg, sf.as_ref())
        }
        Verb::Continue(_) => app::cmd_continue(&cfg),
        Verb::Selfcheck { corrupt, .. } => app::cmd_selfcheck(&cfg, *corrupt),
    }
    .map_err(fail)?;
    write_outputs(Path::new(&cfg.out), &cfg, verb, &out).map_err(|e| (1, e))?;
    print!("{}", out.stdout);
    Ok(if out.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(c) => c,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
