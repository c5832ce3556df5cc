//! Right-hand sides of the biharmonic problem.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown source term '{0}' (expected const1, const:<value>, quadrant, sinsin or zero)")]
pub struct UnknownSource(pub String);

pub type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SourceTerm {
    Constant(f64),
    /// `1` on `x >= 0, y >= 0`, `0` on `x < 0, y >= 0`, `-1` on `y < 0`.
    Quadrant,
    /// `4 pi^4 sin(pi x) sin(pi y)`, whose biharmonic solution with Navier
    /// conditions on the unit square is `sin(pi x) sin(pi y)`.
    SineProduct,
    Callback(SourceFn),
}

impl SourceTerm {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            SourceTerm::Constant(c) => *c,
            SourceTerm::Quadrant => quadrant_value(x, y),
            SourceTerm::SineProduct => 4.0 * PI.powi(4) * (PI * x).sin() * (PI * y).sin(),
            SourceTerm::Callback(f) => f(x, y),
        }
    }

    /// Constant on every triangle of a mesh whose edges follow the
    /// coordinate axes; such sources are evaluated once per triangle at its
    /// centroid.
    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self, SourceTerm::Constant(_) | SourceTerm::Quadrant)
    }

    pub fn scaled(&self, factor: f64) -> SourceTerm {
        match self {
            SourceTerm::Constant(c) => SourceTerm::Constant(c * factor),
            other => {
                let inner = other.clone();
                SourceTerm::Callback(Arc::new(move |x, y| factor * inner.eval(x, y)))
            }
        }
    }
}

fn quadrant_value(x: f64, y: f64) -> f64 {
    if y < 0.0 {
        -1.0
    } else if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTerm::Constant(c) if *c == 1.0 => f.write_str("const1"),
            SourceTerm::Constant(c) if *c == 0.0 => f.write_str("zero"),
            SourceTerm::Constant(c) => write!(f, "const:{c}"),
            SourceTerm::Quadrant => f.write_str("quadrant"),
            SourceTerm::SineProduct => f.write_str("sinsin"),
            SourceTerm::Callback(_) => f.write_str("callback"),
        }
    }
}

impl FromStr for SourceTerm {
    type Err = UnknownSource;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t {
            "const1" | "one" => Ok(SourceTerm::Constant(1.0)),
            "zero" | "0" => Ok(SourceTerm::Constant(0.0)),
            "quadrant" | "f3" => Ok(SourceTerm::Quadrant),
            "sinsin" => Ok(SourceTerm::SineProduct),
            _ => t
                .strip_prefix("const:")
                .and_then(|v| v.parse::<f64>().ok())
                .map(SourceTerm::Constant)
                .ok_or_else(|| UnknownSource(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for name in ["const1", "quadrant", "sinsin", "zero", "const:2.5"] {
            let s: SourceTerm = name.parse().unwrap();
            assert_eq!(s.to_string(), name);
        }
        assert!("nope".parse::<SourceTerm>().is_err());
    }

    #[test]
    fn quadrant_branches() {
        let f = SourceTerm::Quadrant;
        assert_eq!(f.eval(1.0, 1.0), 1.0);
        assert_eq!(f.eval(0.0, 0.0), 1.0);
        assert_eq!(f.eval(-1.0, 1.0), 0.0);
        assert_eq!(f.eval(-1.0, -1.0), -1.0);
        assert_eq!(f.scaled(-2.0).eval(-1.0, -1.0), 2.0);
    }
}
