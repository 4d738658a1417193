use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{read_header, write_header, FieldReader, ScalarField};

const PFS_MAGIC: &[u8; 4] = b"PFS1";

/// Vacancy concentration, interstitial concentration and void order
/// parameter at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub c_v: ScalarField,
    pub c_i: ScalarField,
    pub eta: ScalarField,
    pub time: f64,
}

/// Which field to look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Cv,
    Ci,
    Eta,
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cv" => Ok(Channel::Cv),
            "ci" => Ok(Channel::Ci),
            "eta" => Ok(Channel::Eta),
            other => Err(Error::Config(format!("unknown channel `{other}`"))),
        }
    }
}

impl PhaseState {
    pub fn new(c_v: ScalarField, c_i: ScalarField, eta: ScalarField, time: f64) -> Result<Self> {
        if !c_v.same_shape(&c_i) || !c_v.same_shape(&eta) {
            return Err(Error::InvalidGrid(
                "phase fields must share shape and spacing".into(),
            ));
        }
        if !time.is_finite() {
            return Err(Error::InvalidGrid("time must be finite".into()));
        }
        Ok(Self {
            c_v,
            c_i,
            eta,
            time,
        })
    }

    /// Spatially uniform state.
    pub fn uniform(
        width: usize,
        height: usize,
        dx: f64,
        cv: f64,
        ci: f64,
        eta: f64,
    ) -> Result<Self> {
        Self::new(
            ScalarField::filled(width, height, dx, cv)?,
            ScalarField::filled(width, height, dx, ci)?,
            ScalarField::filled(width, height, dx, eta)?,
            0.0,
        )
    }

    pub fn width(&self) -> usize {
        self.eta.width()
    }

    pub fn height(&self) -> usize {
        self.eta.height()
    }

    pub fn dx(&self) -> f64 {
        self.eta.dx()
    }

    pub fn field(&self, channel: Channel) -> &ScalarField {
        match channel {
            Channel::Cv => &self.c_v,
            Channel::Ci => &self.c_i,
            Channel::Eta => &self.eta,
        }
    }

    pub fn mirrored_x(&self) -> PhaseState {
        PhaseState {
            c_v: self.c_v.mirrored_x(),
            c_i: self.c_i.mirrored_x(),
            eta: self.eta.mirrored_x(),
            time: self.time,
        }
    }

    pub fn rolled(&self, di: usize, dj: usize) -> PhaseState {
        PhaseState {
            c_v: self.c_v.rolled(di, dj),
            c_i: self.c_i.rolled(di, dj),
            eta: self.eta.rolled(di, dj),
            time: self.time,
        }
    }

    /// `.pfs` bytes: magic `PFS1`, u32 width, u32 height, f64 dx, f64 time,
    /// then `c_v`, `c_i`, `η` row-major, all little-endian.
    pub fn encode(&self) -> Vec<u8> {
        let n = self.eta.len();
        let mut out = Vec::with_capacity(28 + 24 * n);
        write_header(&mut out, PFS_MAGIC, self.width(), self.height(), self.dx());
        out.extend_from_slice(&self.time.to_le_bytes());
        for field in [&self.c_v, &self.c_i, &self.eta] {
            for v in field.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = FieldReader::new(bytes);
        let (w, h, dx) = read_header(&mut r, PFS_MAGIC)?;
        let time = r.f64()?;
        let c_v = ScalarField::new(w, h, dx, r.values(w * h)?)?;
        let c_i = ScalarField::new(w, h, dx, r.values(w * h)?)?;
        let eta = ScalarField::new(w, h, dx, r.values(w * h)?)?;
        r.finish()?;
        Self::new(c_v, c_i, eta, time)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}
