//! Pipeline driver for the near-field photometric stereo face
//! reconstruction toolkit.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::CmdError;
use config::PipelineConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nearps",
    version,
    about = "Near-field point-light photometric stereo for face surfaces"
)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Plan without writing anything (where supported).
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus described by the config.
    Generate,
    /// Run calibration, refinement and surface recovery for one record.
    Reconstruct {
        /// Record id (for example rec0000).
        #[arg(long)]
        record: String,
        /// Use the ground-truth lights from the record instead of
        /// calibrating.
        #[arg(long)]
        lights_known: bool,
        /// Light subset, comma separated (for example S1 or S1,S3).
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<String>>,
        /// Override the height-field depth-prior weight.
        #[arg(long)]
        w1: Option<f64>,
        /// Override the height-field smoothness weight.
        #[arg(long)]
        w2: Option<f64>,
    },
    /// Compare a reconstruction against the record's ground truth.
    Evaluate {
        #[arg(long)]
        record: Option<String>,
        /// Evaluate every record in the corpus manifest.
        #[arg(long)]
        all: bool,
        /// Evaluate the ground truth against itself (all errors zero).
        #[arg(long)]
        self_check: bool,
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<String>>,
    },
    /// Estimate light positions and illuminations for one record.
    Calibrate {
        #[arg(long)]
        record: String,
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<String>>,
    },
    /// Forward-render a mesh under a light configuration.
    Render {
        /// Mesh (OBJ with per-vertex colors) in camera space.
        #[arg(long)]
        mesh: PathBuf,
        /// Lights JSON: `{"lights":[{"position":[x,y,z],"beta":b},...]}`.
        #[arg(long)]
        lights: PathBuf,
        /// Output prefix for `<prefix>_<i>.pfm/.png` and `<prefix>_mask.pfm`.
        #[arg(long)]
        out: String,
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Focal length as a multiple of the image size.
        #[arg(long, default_value_t = 1.6)]
        focal: f64,
        /// Extra +z translation applied to the mesh (mm).
        #[arg(long, default_value_t = 0.0)]
        translate_z: f64,
        /// Per-triangle constant shading instead of smooth interpolation.
        #[arg(long)]
        per_face: bool,
        /// Ray-cast cast shadows.
        #[arg(long)]
        shadows: bool,
    },
    /// Write the procedural toy face model container.
    MakeModel {
        #[arg(long)]
        out: PathBuf,
        /// Grid resolution as COLSxROWS (for example 28x31).
        #[arg(long)]
        grid: Option<String>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CmdError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        CmdError::Usage(anyhow::anyhow!("--config <path> is required for this command"))
    })?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn parse_grid(s: &str) -> Result<(usize, usize), CmdError> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() == 2 {
        if let (Ok(a), Ok(b)) = (parts[0].parse(), parts[1].parse()) {
            return Ok((a, b));
        }
    }
    Err(CmdError::Usage(anyhow::anyhow!(
        "grid must look like 28x31, got `{s}`"
    )))
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CmdError::Usage(anyhow::anyhow!("--jobs: {e}")))?;
    }
    match &cli.command {
        Command::Generate => {
            let config = load_config(cli)?;
            commands::cmd_generate(&config, cli.dry_run)
        }
        Command::Reconstruct {
            record,
            lights_known,
            subset,
            w1,
            w2,
        } => {
            let mut config = load_config(cli)?;
            if let Some(w1) = w1 {
                config.integration.w1 = *w1;
            }
            if let Some(w2) = w2 {
                config.integration.w2 = *w2;
            }
            if !(config.integration.w1 >= 0.0 && config.integration.w1.is_finite())
                || !(config.integration.w2 >= 0.0 && config.integration.w2.is_finite())
            {
                return Err(CmdError::Usage(anyhow::anyhow!(
                    "--w1/--w2 must be finite and >= 0"
                )));
            }
            commands::cmd_reconstruct(&config, record, subset.as_deref(), *lights_known)
        }
        Command::Evaluate {
            record,
            all,
            self_check,
            subset,
        } => {
            let config = load_config(cli)?;
            commands::cmd_evaluate(&config, record.as_deref(), *all, subset.as_deref(), *self_check)
        }
        Command::Calibrate { record, subset } => {
            let config = load_config(cli)?;
            commands::cmd_calibrate(&config, record, subset.as_deref())
        }
        Command::Render {
            mesh,
            lights,
            out,
            size,
            focal,
            translate_z,
            per_face,
            shadows,
        } => commands::cmd_render(
            mesh,
            lights,
            out,
            *size,
            *focal,
            *translate_z,
            *per_face,
            *shadows,
        ),
        Command::MakeModel { out, grid } => {
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            commands::cmd_make_model(out, cli.seed.unwrap_or(0), grid)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error());
            ExitCode::from(e.exit_code())
        }
    }
}
