//! Compares the adjoint gradient of the training loss with central
//! differences on a small problem.

use phasefield::energy::{ModelParams, Param, ParamBounds};
use phasefield::learn::{grad, Frame, GradientMode, TrainConfig, TrainPair};
use phasefield::sim::{synth_two_voids_with, SynthConfig};

fn main() -> phasefield::Result<()> {
    let truth = ModelParams::reference();
    let cfg = SynthConfig {
        size: 64,
        radii: (6.0, 10.0),
        ..SynthConfig::default()
    };
    let (traj, masks) = synth_two_voids_with(&cfg, 2, &truth, 20, 10)?;
    let pairs = masks
        .windows(2)
        .map(|m| TrainPair {
            initial: Frame::Mask(m[0].clone()),
            target: Frame::Mask(m[1].clone()),
            k: 10,
        })
        .collect();
    let mut config = TrainConfig::new(pairs, ParamBounds::unbounded(), traj.dt);
    let theta = ModelParams::from_array(truth.to_array().map(|v| 1.05 * v));

    config.gradient_mode = GradientMode::Adjoint;
    let adjoint = grad(&theta, &config)?;
    config.gradient_mode = GradientMode::CentralFd;
    let fd = grad(&theta, &config)?;

    println!("{:>10} {:>14} {:>14} {:>10}", "param", "adjoint", "central", "rel err");
    for p in Param::ALL {
        let (a, f) = (adjoint[p.index()], fd[p.index()]);
        let rel = if f == 0.0 { (a - f).abs() } else { ((a - f) / f).abs() };
        println!("{:>10} {a:>14.6e} {f:>14.6e} {rel:>10.2e}", p.name());
    }
    Ok(())
}
