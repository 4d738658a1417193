use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::ParamBounds;
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::sim::PhaseState;

/// One end of a training pair: an annotated mask, or a full state when one
/// is known (synthetic data).
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Mask(Mask),
    State(PhaseState),
}

impl Frame {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Frame::Mask(m) => (m.width(), m.height()),
            Frame::State(s) => (s.width(), s.height()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub initial: Frame,
    pub target: Frame,
    /// Simulation steps between the two frames.
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    CentralFd,
    #[default]
    Adjoint,
}

impl GradientMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GradientMode::CentralFd => "central_fd",
            GradientMode::Adjoint => "adjoint",
        }
    }
}

impl fmt::Display for GradientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central_fd" => Ok(GradientMode::CentralFd),
            "adjoint" => Ok(GradientMode::Adjoint),
            _ => Err(Error::schema(
                "gradient_mode",
                format!("expected central_fd or adjoint, got `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub pairs: Vec<TrainPair>,
    pub bounds: ParamBounds,
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub dt: f64,
    /// Grid spacing used when a mask is turned into a state.
    pub dx: f64,
    /// Diffuse-interface width for mask extraction, in length units.
    pub interface_width: f64,
    pub gradient_mode: GradientMode,
    pub seed: u64,
}

/// Default hinge weight for both sides of a bound.
pub const DEFAULT_LAMBDA: f64 = 1e3;

impl TrainConfig {
    /// Config with the default weights and step size around `pairs`.
    pub fn new(pairs: Vec<TrainPair>, bounds: ParamBounds, dt: f64) -> Self {
        Self {
            pairs,
            bounds,
            lambda1: DEFAULT_LAMBDA,
            lambda2: DEFAULT_LAMBDA,
            learning_rate: 0.02,
            iterations: 500,
            dt,
            dx: 1.0,
            interface_width: 2.0,
            gradient_mode: GradientMode::Adjoint,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::schema("pairs", "at least one pair is required"));
        }
        for (n, pair) in self.pairs.iter().enumerate() {
            if pair.k == 0 {
                return Err(Error::schema(format!("pairs[{n}].k"), "must be at least 1"));
            }
            if pair.initial.dims() != pair.target.dims() {
                let (a, b) = (pair.initial.dims(), pair.target.dims());
                return Err(Error::schema(
                    format!("pairs[{n}]"),
                    format!("initial is {}x{}, target is {}x{}", a.0, a.1, b.0, b.1),
                ));
            }
        }
        let non_negative = [("lambda1", self.lambda1), ("lambda2", self.lambda2)];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::schema(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("dt", self.dt),
            ("dx", self.dx),
            ("interface_width", self.interface_width),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::schema(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Loss split into its terms; the penalties are already weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub mismatch: f64,
    pub penalty_lo: f64,
    pub penalty_hi: f64,
    pub total: f64,
    /// Set when the simulation blew up; mismatch and total are then infinite.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub diverged: bool,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        !self.diverged && self.total.is_finite()
    }
}
