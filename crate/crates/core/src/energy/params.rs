use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_PARAMS: usize = 14;

/// Index into the 14-vector of model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    MobilityV,
    MobilityI,
    MobilityEta,
    KappaV,
    KappaI,
    KappaEta,
    SolidWellV,
    SolidWellI,
    VoidWellV,
    VoidWellI,
    EquilibriumV,
    EquilibriumI,
    Recombination,
    Generation,
}

impl Param {
    pub const ALL: [Param; N_PARAMS] = [
        Param::MobilityV,
        Param::MobilityI,
        Param::MobilityEta,
        Param::KappaV,
        Param::KappaI,
        Param::KappaEta,
        Param::SolidWellV,
        Param::SolidWellI,
        Param::VoidWellV,
        Param::VoidWellI,
        Param::EquilibriumV,
        Param::EquilibriumI,
        Param::Recombination,
        Param::Generation,
    ];

    /// The JSON key for this parameter.
    pub fn name(self) -> &'static str {
        match self {
            Param::MobilityV => "M_v",
            Param::MobilityI => "M_i",
            Param::MobilityEta => "L",
            Param::KappaV => "kappa_v",
            Param::KappaI => "kappa_i",
            Param::KappaEta => "kappa_eta",
            Param::SolidWellV => "A_v",
            Param::SolidWellI => "A_i",
            Param::VoidWellV => "B_v",
            Param::VoidWellI => "B_i",
            Param::EquilibriumV => "cv_eq",
            Param::EquilibriumI => "ci_eq",
            Param::Recombination => "R",
            Param::Generation => "P",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The 14 scalar coefficients of the void model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Vacancy diffusivity.
    #[serde(rename = "M_v")]
    pub m_v: f64,
    /// Interstitial diffusivity.
    #[serde(rename = "M_i")]
    pub m_i: f64,
    /// Order-parameter mobility.
    #[serde(rename = "L")]
    pub l: f64,
    pub kappa_v: f64,
    pub kappa_i: f64,
    pub kappa_eta: f64,
    /// Solid-well curvatures.
    #[serde(rename = "A_v")]
    pub a_v: f64,
    #[serde(rename = "A_i")]
    pub a_i: f64,
    /// Void-well curvatures.
    #[serde(rename = "B_v")]
    pub b_v: f64,
    #[serde(rename = "B_i")]
    pub b_i: f64,
    /// Equilibrium concentrations in the solid phase.
    pub cv_eq: f64,
    pub ci_eq: f64,
    /// Vacancy-interstitial recombination rate.
    #[serde(rename = "R")]
    pub r: f64,
    /// Uniform defect generation rate.
    #[serde(rename = "P")]
    pub p: f64,
}

impl ModelParams {
    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [
            self.m_v,
            self.m_i,
            self.l,
            self.kappa_v,
            self.kappa_i,
            self.kappa_eta,
            self.a_v,
            self.a_i,
            self.b_v,
            self.b_i,
            self.cv_eq,
            self.ci_eq,
            self.r,
            self.p,
        ]
    }

    pub fn from_array(a: [f64; N_PARAMS]) -> Self {
        Self {
            m_v: a[0],
            m_i: a[1],
            l: a[2],
            kappa_v: a[3],
            kappa_i: a[4],
            kappa_eta: a[5],
            a_v: a[6],
            a_i: a[7],
            b_v: a[8],
            b_i: a[9],
            cv_eq: a[10],
            ci_eq: a[11],
            r: a[12],
            p: a[13],
        }
    }

    pub fn get(&self, p: Param) -> f64 {
        self.to_array()[p.index()]
    }

    pub fn with(&self, p: Param, value: f64) -> Self {
        let mut a = self.to_array();
        a[p.index()] = value;
        Self::from_array(a)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Sign constraints: rates and coefficients non-negative, equilibrium
    /// concentrations in `[0, 1]`.
    pub fn is_physical(&self) -> bool {
        self.is_finite()
            && Param::ALL.iter().all(|&p| {
                let v = self.get(p);
                match p {
                    Param::EquilibriumV | Param::EquilibriumI => (0.0..=1.0).contains(&v),
                    _ => v >= 0.0,
                }
            })
    }

    /// Reference parameter set used for synthetic data.
    pub fn reference() -> Self {
        Self {
            m_v: 1.0,
            m_i: 2.0,
            l: 1.0,
            kappa_v: 1.0,
            kappa_i: 0.5,
            kappa_eta: 1.0,
            a_v: 0.5,
            a_i: 0.3,
            b_v: 0.5,
            b_i: 0.3,
            cv_eq: 0.1,
            ci_eq: 0.05,
            r: 1.0,
            p: 0.005,
        }
    }
}

/// Optional `[min, max]` box per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamBounds {
    boxes: [Option<(f64, f64)>; N_PARAMS],
}

/// Parameters bounded by default in recovery experiments.
pub const DEFAULT_BOUNDED: [Param; 9] = [
    Param::MobilityV,
    Param::MobilityI,
    Param::MobilityEta,
    Param::KappaV,
    Param::KappaI,
    Param::KappaEta,
    Param::SolidWellV,
    Param::VoidWellV,
    Param::Recombination,
];

impl ParamBounds {
    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn set(&mut self, p: Param, min: f64, max: f64) -> Result<()> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::schema(p.name(), "bounds must be finite"));
        }
        if min > max {
            return Err(Error::schema(
                p.name(),
                format!("min {min} exceeds max {max}"),
            ));
        }
        self.boxes[p.index()] = Some((min, max));
        Ok(())
    }

    pub fn with(mut self, p: Param, min: f64, max: f64) -> Result<Self> {
        self.set(p, min, max)?;
        Ok(self)
    }

    /// Boxes `[(1 - frac)·θ, (1 + frac)·θ]` (ordered) around `center` for
    /// each listed parameter.
    pub fn around(center: &ModelParams, frac: f64, params: &[Param]) -> Result<Self> {
        let mut b = Self::default();
        for &p in params {
            let v = center.get(p);
            let (lo, hi) = ((1.0 - frac) * v, (1.0 + frac) * v);
            b.set(p, lo.min(hi), lo.max(hi))?;
        }
        Ok(b)
    }

    pub fn get(&self, p: Param) -> Option<(f64, f64)> {
        self.boxes[p.index()]
    }

    pub fn bounded(&self) -> impl Iterator<Item = (Param, f64, f64)> + '_ {
        Param::ALL
            .into_iter()
            .filter_map(|p| self.get(p).map(|(lo, hi)| (p, lo, hi)))
    }

    pub fn n_bounded(&self) -> usize {
        self.boxes.iter().filter(|b| b.is_some()).count()
    }

    pub fn contains(&self, theta: &ModelParams) -> bool {
        self.bounded().all(|(p, lo, hi)| {
            let v = theta.get(p);
            v >= lo && v <= hi
        })
    }

    /// Unweighted hinge sums `(Σ max{0, min-θ}, Σ max{0, θ-max})`.
    pub fn violations(&self, theta: &ModelParams) -> (f64, f64) {
        let mut below = 0.0;
        let mut above = 0.0;
        for (p, lo, hi) in self.bounded() {
            let v = theta.get(p);
            below += (lo - v).max(0.0);
            above += (v - hi).max(0.0);
        }
        (below, above)
    }

    /// Gradient of `λ1·below + λ2·above`; zero on the closed box.
    pub fn penalty_gradient(
        &self,
        theta: &ModelParams,
        lambda1: f64,
        lambda2: f64,
    ) -> [f64; N_PARAMS] {
        let mut g = [0.0; N_PARAMS];
        for (p, lo, hi) in self.bounded() {
            let v = theta.get(p);
            if v < lo {
                g[p.index()] = -lambda1;
            } else if v > hi {
                g[p.index()] = lambda2;
            }
        }
        g
    }

    /// Midpoint of every bounded box; `fallback` elsewhere.
    pub fn midpoint_init(&self, fallback: f64) -> ModelParams {
        let mut a = [fallback; N_PARAMS];
        for (p, lo, hi) in self.bounded() {
            a[p.index()] = 0.5 * (lo + hi);
        }
        ModelParams::from_array(a)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(s).map_err(|e| Error::schema("bounds", e.to_string()))?;
        let mut b = Self::default();
        for (name, value) in raw {
            let p = Param::from_name(&name)
                .ok_or_else(|| Error::schema(format!("bounds.{name}"), "unknown parameter"))?;
            let pair: [f64; 2] = serde_json::from_value(value).map_err(|_| {
                Error::schema(format!("bounds.{name}"), "expected a [min, max] pair")
            })?;
            b.set(p, pair[0], pair[1])
                .map_err(|e| Error::schema(format!("bounds.{name}"), e.to_string()))?;
        }
        Ok(b)
    }
}

impl Serialize for ParamBounds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.n_bounded()))?;
        for (p, lo, hi) in self.bounded() {
            map.serialize_entry(p.name(), &[lo, hi])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ParamBounds {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, [f64; 2]>::deserialize(d)?;
        let mut b = Self::default();
        for (name, [lo, hi]) in raw {
            let p = Param::from_name(&name)
                .ok_or_else(|| D::Error::custom(format!("unknown parameter `{name}`")))?;
            b.set(p, lo, hi).map_err(D::Error::custom)?;
        }
        Ok(b)
    }
}
