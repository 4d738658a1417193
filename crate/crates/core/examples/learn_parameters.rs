//! Recovers model parameters from thresholded snapshots of a synthetic run.
//!
//! A shorter version of the full recovery: 8 training pairs and 150
//! iterations, which takes a few seconds with optimizations on.

use phasefield::energy::{ModelParams, ParamBounds, DEFAULT_BOUNDED};
use phasefield::learn::{fit_with_progress, loss, Frame, TrainConfig, TrainPair};
use phasefield::sim::synth_two_voids;

fn main() -> phasefield::Result<()> {
    let truth = ModelParams::reference();
    let every = 50;
    let (traj, masks) = synth_two_voids(3, &truth, 9 * every, every)?;
    let pairs = masks
        .windows(2)
        .map(|m| TrainPair {
            initial: Frame::Mask(m[0].clone()),
            target: Frame::Mask(m[1].clone()),
            k: every,
        })
        .collect();

    let bounds = ParamBounds::around(&truth, 0.5, &DEFAULT_BOUNDED)?;
    let mut config = TrainConfig::new(pairs, bounds, traj.dt);
    config.iterations = 150;
    let init = config.bounds.midpoint_init(1.0);
    let (theta, history) = fit_with_progress(&config, &init, |p| {
        if p.iteration % 25 == 0 {
            println!("iteration {:4}  loss {:.4e}", p.iteration, p.report.total);
        }
    })?;

    // thresholded masks pin some parameters only loosely, so the fit can
    // beat the generating parameters on this loss
    println!(
        "\nloss {:.4e} learned, {:.4e} at the true parameters",
        history.last().map_or(f64::NAN, |r| r.total),
        loss(&truth, &config)?.total
    );
    println!("\n{:>10} {:>10} {:>10}", "", "learned", "true");
    let (a, b) = (theta.to_array(), truth.to_array());
    for p in DEFAULT_BOUNDED {
        let i = p.index();
        println!("{:>10} {:>10.4} {:>10.4}", p.name(), a[i], b[i]);
    }
    Ok(())
}
