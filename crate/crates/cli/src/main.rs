use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use phasefield::annot::{compose_mask, load_annotation};
use phasefield::energy::ModelParams;
use phasefield::learn::GradientMode;
use phasefield::raster::{save_mask_png, GrayImage};
use phasefield::sim::{Channel, PhaseState};
use phasefield::slic::{slic_segment, SuperpixelMap, DEFAULT_MAX_ITER};
use phasefield::workflow::{self, LearnOptions, PredictOptions, SynthOptions};

/// Void phase-field simulation, parameter learning and annotation tools.
#[derive(Parser)]
#[command(name = "pfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected a non-negative number, got `{s}`")),
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected an integer >= 1, got `{s}`")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-void trajectory with masks and training pairs
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_parser = at_least_one)]
        steps: usize,
        #[arg(long, value_parser = at_least_one)]
        snapshot_every: usize,
        /// Generating parameters (JSON); the built-in reference set otherwise
        #[arg(long)]
        params: Option<PathBuf>,
        /// Number of consecutive snapshot pairs to list in pairs.json
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Run a simulation from a saved state
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long, value_parser = positive, allow_negative_numbers = true)]
        dt: f64,
        #[arg(long, value_parser = at_least_one)]
        steps: usize,
        #[arg(long, value_parser = at_least_one)]
        snapshot_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit model parameters to the annotated pairs of a data directory
    Learn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        bounds: PathBuf,
        #[arg(long, default_value_t = 1e3, value_parser = non_negative, allow_negative_numbers = true)]
        lambda1: f64,
        #[arg(long, default_value_t = 1e3, value_parser = non_negative, allow_negative_numbers = true)]
        lambda2: f64,
        #[arg(long, default_value_t = 0.02, value_parser = positive, allow_negative_numbers = true)]
        lr: f64,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value = "adjoint")]
        grad: GradientMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Starting parameters; box midpoints and 1.0 elsewhere by default
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Compute a SLIC superpixel map of a grayscale image
    Segment {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 10.0, value_parser = positive, allow_negative_numbers = true)]
        m: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn an annotation into a binary mask PNG
    Compose {
        #[arg(long)]
        superpixels: PathBuf,
        #[arg(long)]
        annotation: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict masks at later steps from an annotated frame
    Predict {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        init_annotation: PathBuf,
        #[arg(long)]
        superpixels: PathBuf,
        #[arg(long, value_parser = positive, allow_negative_numbers = true)]
        dt: f64,
        /// Comma-separated, strictly increasing step indices
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<usize>,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        threshold: f64,
        #[arg(long, default_value_t = 2.0, value_parser = positive)]
        interface_width: f64,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        dx: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render trajectory snapshots as grayscale PNG frames
    Render {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value = "eta")]
        channel: Channel,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-frame IOU and pixel accuracy of predicted against reference masks
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn read_params(path: &Path) -> phasefield::Result<ModelParams> {
    workflow::read_params(path)
}

fn run(command: Command) -> phasefield::Result<()> {
    match command {
        Command::Synth {
            out,
            seed,
            steps,
            snapshot_every,
            params,
            pairs,
        } => {
            let mut opts = SynthOptions::new(seed, steps, snapshot_every);
            if let Some(p) = params {
                opts.theta = read_params(&p)?;
            }
            opts.pairs = pairs;
            let traj = workflow::synth(&out, &opts)?;
            eprintln!(
                "wrote {} snapshots (dt = {}) to {}",
                traj.snapshots.len(),
                traj.dt,
                out.display()
            );
        }
        Command::Simulate {
            params,
            init,
            dt,
            steps,
            snapshot_every,
            out,
        } => {
            let theta = read_params(&params)?;
            let state = PhaseState::load(&init)?;
            workflow::simulate(&theta, &state, dt, steps, snapshot_every, &out, |_| {})?;
        }
        Command::Learn {
            data,
            bounds,
            lambda1,
            lambda2,
            lr,
            iters,
            grad,
            seed,
            init,
            out,
            history,
        } => {
            let bounds = workflow::read_bounds(&bounds)?;
            let opts = LearnOptions {
                lambda1,
                lambda2,
                learning_rate: lr,
                iterations: iters,
                gradient_mode: grad,
                seed,
                init: init.as_deref().map(read_params).transpose()?,
            };
            let (theta, hist) = workflow::learn(&data, &bounds, &opts, |p| {
                if p.iteration % 50 == 0 || p.iteration == p.iterations {
                    eprintln!("iteration {:>5}  total {:.6e}", p.iteration, p.report.total);
                }
            })?;
            workflow::write_learn_outputs(&out, history.as_deref(), &theta, &hist)?;
        }
        Command::Segment {
            image,
            k,
            m,
            iters,
            out,
        } => {
            let img = GrayImage::load_png(&image)?;
            let map = slic_segment(&img, k, m, iters)?;
            map.save(&out)?;
            eprintln!("{} superpixels", map.n_labels());
        }
        Command::Compose {
            superpixels,
            annotation,
            out,
        } => {
            let map = SuperpixelMap::load(&superpixels)?;
            let ann = load_annotation(&annotation, Some(&map))?;
            save_mask_png(&out, &compose_mask(&map, &ann)?)?;
        }
        Command::Predict {
            params,
            init_annotation,
            superpixels,
            dt,
            steps,
            threshold,
            interface_width,
            dx,
            out,
        } => {
            let theta = read_params(&params)?;
            let map = SuperpixelMap::load(&superpixels)?;
            let ann = load_annotation(&init_annotation, Some(&map))?;
            let opts = PredictOptions {
                dt,
                steps,
                threshold,
                dx,
                interface_width,
            };
            workflow::predict(&theta, &map, &ann, &opts, &out)?;
        }
        Command::Render {
            traj,
            channel,
            out,
        } => {
            workflow::render(&traj, channel, &out)?;
        }
        Command::Metrics { pred, truth } => {
            let rows = workflow::metrics(&pred, &truth)?;
            print!("{}", workflow::metrics_csv(&rows));
        }
        Command::Serve {
            data,
            port,
            workers,
        } => {
            let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port));
            let workers = workers.unwrap_or_else(phasefield_service::default_workers);
            eprintln!("serving {} on http://{addr} with {workers} workers", data.display());
            phasefield_service::serve_blocking(data, addr, workers)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(phasefield::Error::Schema { path, message }) => {
            eprintln!("error: invalid value for `{path}`: {message}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
