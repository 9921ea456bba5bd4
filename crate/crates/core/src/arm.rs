use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compression::{CompressionSpec, Strategy};

/// Default chunk width, in characters, for the entropy-adaptive arm.
pub const DEFAULT_CHUNK_CHARS: usize = 200;

/// One of the six treatment conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Light,
    Moderate,
    Aggressive,
    Adaptive,
    Recency,
}

impl Arm {
    pub const ALL: [Arm; 6] = [
        Arm::Control,
        Arm::Light,
        Arm::Moderate,
        Arm::Aggressive,
        Arm::Adaptive,
        Arm::Recency,
    ];

    /// The four arms that use uniform truncation (control included as r = 1).
    pub const UNIFORM: [Arm; 4] = [Arm::Control, Arm::Light, Arm::Moderate, Arm::Aggressive];

    pub const TREATMENTS: [Arm; 5] = [Arm::Light, Arm::Moderate, Arm::Aggressive, Arm::Adaptive, Arm::Recency];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Light => "light",
            Arm::Moderate => "moderate",
            Arm::Aggressive => "aggressive",
            Arm::Adaptive => "adaptive",
            Arm::Recency => "recency",
        }
    }

    pub fn index(self) -> usize {
        Arm::ALL.iter().position(|a| *a == self).unwrap()
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Arm::Control => Strategy::None,
            Arm::Light | Arm::Moderate | Arm::Aggressive => Strategy::Uniform,
            Arm::Adaptive => Strategy::Adaptive,
            Arm::Recency => Strategy::Recency,
        }
    }

    /// Nominal target retention.
    pub fn target_r(self) -> f64 {
        match self {
            Arm::Control => 1.0,
            Arm::Light => 0.8,
            Arm::Moderate | Arm::Adaptive | Arm::Recency => 0.5,
            Arm::Aggressive => 0.2,
        }
    }

    pub fn compression_spec(self) -> CompressionSpec {
        CompressionSpec::new(self.strategy(), self.target_r(), DEFAULT_CHUNK_CHARS)
            .expect("arm table holds valid specs")
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown arm `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for arm in Arm::ALL {
            assert_eq!(arm.name().parse::<Arm>().unwrap(), arm);
            assert_eq!(Arm::ALL[arm.index()], arm);
        }
        assert!("bogus".parse::<Arm>().is_err());
    }

    #[test]
    fn control_is_uncompressed() {
        let spec = Arm::Control.compression_spec();
        assert_eq!(spec.strategy, Strategy::None);
        assert_eq!(spec.target_r, 1.0);
    }
}
