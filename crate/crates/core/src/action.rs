//! Quarter-turn actions and the cyclic group they form.
//!
//! An [`Action`] is the heading change a traveller makes at a node between an
//! incoming and an outgoing edge, quantized to one of four values. Encoded as
//! quarter turns counter-clockwise (`F = 0`, `L = 1`, `T = 2`, `R = 3`), the
//! group operation is addition mod 4.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("angle {0} is outside (-pi, pi]")]
    AngleOutOfDomain(f64),
    #[error("threshold {0} is outside the open interval (0, pi/2)")]
    InvalidThreshold(f64),
    #[error("unknown action token {0:?}, expected one of F, L, R, T")]
    UnknownToken(String),
}

/// A heading change at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "F")]
    Forward,
    #[serde(rename = "L")]
    TurnLeft,
    #[serde(rename = "R")]
    TurnRight,
    #[serde(rename = "T")]
    TurnAround,
}

impl Action {
    pub const ALL: [Action; 4] = [
        Action::Forward,
        Action::TurnLeft,
        Action::TurnAround,
        Action::TurnRight,
    ];

    /// Quantizes a signed deviation angle (left positive) into an action.
    ///
    /// The angle must already be normalized into `(-pi, pi]`. Boundaries at
    /// `±theta` belong to `Forward` and boundaries at `±(pi - theta)` belong
    /// to `TurnAround`.
    pub fn from_angle(angle: f64, theta: AngleThreshold) -> Result<Action, ActionError> {
        if !angle.is_finite() || angle <= -PI || angle > PI {
            return Err(ActionError::AngleOutOfDomain(angle));
        }
        let theta = theta.radians();
        let magnitude = angle.abs();
        Ok(if magnitude <= theta {
            Action::Forward
        } else if magnitude >= PI - theta {
            Action::TurnAround
        } else if angle > 0.0 {
            Action::TurnLeft
        } else {
            Action::TurnRight
        })
    }

    /// Group product: performing `self` and then `other`.
    pub fn compose(self, other: Action) -> Action {
        Action::from_quarter_turns(self.quarter_turns() + other.quarter_turns())
    }

    pub fn inverse(self) -> Action {
        Action::from_quarter_turns(4 - self.quarter_turns())
    }

    pub fn quarter_turns(self) -> u8 {
        match self {
            Action::Forward => 0,
            Action::TurnLeft => 1,
            Action::TurnAround => 2,
            Action::TurnRight => 3,
        }
    }

    /// Inverse of [`Action::quarter_turns`]; any integer is reduced mod 4.
    pub fn from_quarter_turns(q: u8) -> Action {
        match q % 4 {
            0 => Action::Forward,
            1 => Action::TurnLeft,
            2 => Action::TurnAround,
            _ => Action::TurnRight,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Action::Forward => "F",
            Action::TurnLeft => "L",
            Action::TurnRight => "R",
            Action::TurnAround => "T",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Action {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "F" => Ok(Action::Forward),
            "L" => Ok(Action::TurnLeft),
            "R" => Ok(Action::TurnRight),
            "T" => Ok(Action::TurnAround),
            other => Err(ActionError::UnknownToken(other.to_string())),
        }
    }
}

/// The half-width of the `Forward` sector, in radians. Always in `(0, pi/2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct AngleThreshold(f64);

impl AngleThreshold {
    pub fn new(theta: f64) -> Result<Self, ActionError> {
        if theta.is_finite() && theta > 0.0 && theta < FRAC_PI_2 {
            Ok(AngleThreshold(theta))
        } else {
            Err(ActionError::InvalidThreshold(theta))
        }
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Distance from `angle` to the nearest sector boundary.
    pub fn boundary_margin(self, angle: f64) -> f64 {
        let a = angle.abs();
        (a - self.0).abs().min((a - (PI - self.0)).abs())
    }
}

impl Default for AngleThreshold {
    fn default() -> Self {
        AngleThreshold(FRAC_PI_4)
    }
}

impl<'de> Deserialize<'de> for AngleThreshold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let theta = f64::deserialize(d)?;
        AngleThreshold::new(theta).map_err(serde::de::Error::custom)
    }
}

/// Wraps any finite angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}
