use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use helmono::pipeline::{self, RunConfig};
use helmono::reconstruct::Variant;
use helmono::{Error, Result};

/// Monotonicity-based shape reconstruction for the Helmholtz equation on the unit disk.
#[derive(Parser)]
#[command(name = "helmono", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate V, V^delta and the sensitivity stack.
    Gen {
        #[command(flatten)]
        loc: Location,
        /// Noise level as a fraction of ||V||_F.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Count negative eigenvalues of K - k^2 M over the configured r0 sweep.
    Dtilde {
        #[command(flatten)]
        loc: Location,
    },
    /// Per-pixel monotonicity bounds.
    Beta {
        #[command(flatten)]
        loc: Location,
        /// Noise level as a fraction of ||V||_F (default: the generated one).
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        /// Also write the negative-count field for this contrast.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Box-constrained convex reconstruction.
    Reconstruct {
        #[command(flatten)]
        loc: Location,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
    },
    /// Rasterize a per-pixel CSV field to a PPM image.
    Render {
        /// Per-pixel CSV (beta.csv, recon.csv, negcount.csv).
        #[arg(long)]
        field: PathBuf,
        /// Column to draw (default: the last one).
        #[arg(long)]
        column: Option<String>,
        /// Inversion mesh (default: mesh_inv.json next to the field).
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Output image path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
}

#[derive(Args)]
struct Location {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output/data directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Location {
    fn config(&self) -> Result<RunConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("--config is required".into()))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(out) = &self.out {
            cfg.run.out_dir = out.clone();
        }
        Ok(cfg)
    }

    fn data_dir(&self) -> Result<PathBuf> {
        match (&self.out, &self.config) {
            (Some(out), _) => Ok(out.clone()),
            (None, Some(_)) => Ok(self.config()?.run.out_dir),
            (None, None) => Err(Error::InvalidInput("need --out or --config".into())),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { loc, delta, seed } => {
            let mut cfg = loc.config()?;
            if let Some(d) = delta {
                cfg.scenario.delta = d;
            }
            if let Some(s) = seed {
                cfg.scenario.noise_seed = s;
            }
            let g = pipeline::cmd_gen(&cfg)?;
            println!(
                "wrote {} (N = {}, M = {}, asymmetry {:.3e})",
                cfg.run.out_dir.display(),
                g.meta.n,
                g.meta.m,
                g.meta.asymmetry
            );
        }
        Command::Dtilde { loc } => {
            let cfg = loc.config()?;
            let sc = &cfg.scenario;
            let rows = pipeline::cmd_dtilde(sc.k, sc.q0, sc.q_inclusion, &cfg.run.r0_sweep, cfg.run.dtilde_h)?;
            std::fs::create_dir_all(&cfg.run.out_dir).map_err(|e| Error::Io {
                path: cfg.run.out_dir.display().to_string(),
                source: e,
            })?;
            let path = cfg.run.out_dir.join(pipeline::DTILDE_CSV);
            pipeline::write_dtilde_csv(&path, &rows)?;
            for (r0, c) in rows {
                println!("r0 = {r0}: {}", c.map_or("near resonance".to_string(), |c| c.to_string()));
            }
        }
        Command::Beta { loc, delta, d, alpha } => {
            let dir = loc.data_dir()?;
            let map = pipeline::cmd_beta(&dir, delta, d, alpha)?;
            let [closed, capped, fallback] = map.method_counts();
            println!(
                "wrote {} ({} pixels: {closed} closed form, {capped} capped, {fallback} bisection)",
                dir.join(pipeline::BETA_CSV).display(),
                map.len()
            );
        }
        Command::Reconstruct { loc, delta, variant } => {
            let dir = loc.data_dir()?;
            let s = pipeline::cmd_reconstruct(&dir, delta, variant)?;
            println!(
                "{}: objective {:.6e}, {} iterations, {} support pixels in {} components{}",
                s.variant,
                s.objective,
                s.iterations,
                s.support_pixels,
                s.components.len(),
                if s.converged { "" } else { " (not converged)" }
            );
        }
        Command::Render {
            field,
            column,
            mesh,
            out,
            resolution,
        } => {
            let mesh = mesh.unwrap_or_else(|| field.parent().unwrap_or(Path::new(".")).join(pipeline::MESH_INV));
            pipeline::cmd_render(&field, column.as_deref(), &mesh, &out, resolution)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", pipeline::error_line(&e));
            ExitCode::from(pipeline::exit_code(&e) as u8)
        }
    }
}
