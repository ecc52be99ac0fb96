//! Built-in parameter sets for the five characterised emitter regions, with
//! the reference values measured or computed for each.

use crate::error::{Error, Result};
use crate::model::{EmitterParams, FluxSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    R1,
    R2,
    R3,
    R4,
    R5,
}

struct RegionData {
    n_emitters: u32,
    gamma: f64,
    beta: f64,
    rho: f64,
    lambda_per_ns: f64,
    min_entropy: f64,
    speed_mbit_s: f64,
    frequency_of_zero: f64,
}

const DATA: [RegionData; 5] = [
    RegionData {
        n_emitters: 1,
        gamma: 0.020,
        beta: 1.126,
        rho: 0.96531,
        lambda_per_ns: 0.0000216,
        min_entropy: 0.999975,
        speed_mbit_s: 0.173,
        frequency_of_zero: 0.500012,
    },
    RegionData {
        n_emitters: 2,
        gamma: 0.029,
        beta: 1.218,
        rho: 0.96816,
        lambda_per_ns: 0.0000123,
        min_entropy: 0.999972,
        speed_mbit_s: 0.197,
        frequency_of_zero: 0.500000,
    },
    RegionData {
        n_emitters: 4,
        gamma: 0.040,
        beta: 1.623,
        rho: 0.97251,
        lambda_per_ns: 0.0000086,
        min_entropy: 0.999961,
        speed_mbit_s: 0.274,
        frequency_of_zero: 0.500002,
    },
    RegionData {
        n_emitters: 17,
        gamma: 0.066,
        beta: 1.455,
        rho: 0.99708,
        lambda_per_ns: 0.0000212,
        min_entropy: 0.999586,
        speed_mbit_s: 2.88,
        frequency_of_zero: 0.500000,
    },
    RegionData {
        n_emitters: 49,
        gamma: 0.063,
        beta: 1.671,
        rho: 0.99839,
        lambda_per_ns: 0.0000122,
        min_entropy: 0.999314,
        speed_mbit_s: 4.77,
        frequency_of_zero: 0.500003,
    },
];

impl Region {
    pub const ALL: [Region; 5] = [Region::R1, Region::R2, Region::R3, Region::R4, Region::R5];

    pub fn from_index(index: u32) -> Result<Self> {
        match index {
            1 => Ok(Region::R1),
            2 => Ok(Region::R2),
            3 => Ok(Region::R3),
            4 => Ok(Region::R4),
            5 => Ok(Region::R5),
            _ => Err(Error::param("region", format!("expected 1..=5, got {index}"))),
        }
    }

    pub fn index(self) -> u32 {
        self as u32 + 1
    }

    fn data(self) -> &'static RegionData {
        &DATA[self as usize]
    }

    /// Fitted parameters with γ₂ = γ/20.
    pub fn params(self) -> EmitterParams {
        let d = self.data();
        EmitterParams::with_standard_shelving(d.n_emitters, d.gamma, d.beta, d.rho)
            .expect("built-in region parameters are valid")
    }

    /// Measured mean photon flux per emitter, ns⁻¹.
    pub fn lambda_per_ns(self) -> f64 {
        self.data().lambda_per_ns
    }

    pub fn flux(self) -> FluxSpec {
        FluxSpec::new(self.lambda_per_ns(), &self.params()).expect("built-in flux is valid")
    }

    /// Reference min-entropy per bit at the measured flux.
    pub fn reference_min_entropy(self) -> f64 {
        self.data().min_entropy
    }

    /// Reference generation rate, Mbit/s.
    pub fn reference_speed_mbit_s(self) -> f64 {
        self.data().speed_mbit_s
    }

    /// Reference relative frequency of zero bits in a 800 Mbit sample.
    pub fn reference_frequency_of_zero(self) -> f64 {
        self.data().frequency_of_zero
    }
}

impl std::str::FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        let digits = trimmed
            .strip_prefix("region")
            .or_else(|| trimmed.strip_prefix("Region"))
            .unwrap_or(trimmed)
            .trim_start_matches(['-', '_', ' ']);
        let index: u32 = digits
            .parse()
            .map_err(|_| Error::param("region", format!("cannot parse `{s}`")))?;
        Region::from_index(index)
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "region {}", self.index())
    }
}
