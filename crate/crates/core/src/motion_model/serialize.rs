//! Plain-text `key=value` dump of a motion model.
//!
//! ```text
//! family=spline
//! frames=9
//! degree=3
//! knots=-1,-1,-1,-1,1,1,1,1
//! L=4
//! control.0=θ1,…,θ12
//! ```
//!
//! Floats are printed in shortest round-trip form, so parsing a dump gives
//! back the identical model.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::basis::{PolyTimeBasis, SplineBasis, TemporalBasis};
use super::model::{MotionModel, PolyTimeMotionModel, SplineMotionModel};
use super::QuadraticParams;

#[derive(Debug, Error, PartialEq)]
pub enum ModelParseError {
    #[error("line {0}: expected key=value")]
    Syntax(usize),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("bad value for `{key}`: {value}")]
    Value { key: String, value: String },
    #[error("unknown model family `{0}`")]
    Family(String),
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for MotionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MotionModel::Spline(m) => {
                let b = m.basis();
                writeln!(f, "family=spline")?;
                writeln!(f, "frames={}", b.frame_count())?;
                writeln!(f, "degree={}", b.degree())?;
                writeln!(f, "knots={}", join(b.knots().iter().copied()))?;
            }
            MotionModel::PolyTime(m) => {
                writeln!(f, "family=polytime")?;
                writeln!(f, "frames={}", m.basis().frame_count())?;
                writeln!(f, "degree={}", m.basis().degree())?;
            }
        }
        let controls = self.controls();
        writeln!(f, "L={}", controls.len())?;
        for (l, c) in controls.iter().enumerate() {
            writeln!(f, "control.{l}={}", join(c.0))?;
        }
        Ok(())
    }
}

/// Parses one model block; blank lines and `#` comments are ignored.
pub fn parse_model(text: &str) -> Result<MotionModel, ModelParseError> {
    let mut kv = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ModelParseError::Syntax(n + 1))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| ModelParseError::Missing(k.to_string()));
    let bad = |k: &str, v: &str| ModelParseError::Value { key: k.to_string(), value: v.to_string() };
    let usize_of = |k: &str| get(k).and_then(|v| v.parse::<usize>().map_err(|_| bad(k, v)));
    let floats = |k: &str| -> Result<Vec<f64>, ModelParseError> {
        let v = get(k)?;
        v.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad(k, v))).collect()
    };

    let frames = usize_of("frames")?;
    let degree = usize_of("degree")?;
    let count = usize_of("L")?;
    if frames == 0 {
        return Err(bad("frames", "0"));
    }
    let controls = (0..count)
        .map(|l| {
            let key = format!("control.{l}");
            let vals = floats(&key)?;
            let arr: [f64; 12] = vals.try_into().map_err(|_| bad(&key, get(&key).unwrap()))?;
            Ok(QuadraticParams(arr))
        })
        .collect::<Result<Vec<_>, ModelParseError>>()?;

    match get("family")?.as_str() {
        "spline" => {
            let knots = floats("knots")?;
            if knots.len() != count + degree + 1 || knots.windows(2).any(|w| w[0] > w[1]) {
                return Err(ModelParseError::Inconsistent(format!(
                    "{} knots for L={count}, degree={degree}",
                    knots.len()
                )));
            }
            let basis = SplineBasis::from_knots(frames, degree, knots);
            SplineMotionModel::new(basis, controls)
                .map(MotionModel::Spline)
                .map_err(|e| ModelParseError::Inconsistent(e.to_string()))
        }
        "polytime" => PolyTimeMotionModel::new(PolyTimeBasis::new(frames, degree), controls)
            .map(MotionModel::PolyTime)
            .map_err(|e| ModelParseError::Inconsistent(e.to_string())),
        other => Err(ModelParseError::Family(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion_model::build_basis;
    use proptest::prelude::*;

    #[test]
    fn dump_layout() {
        let m = MotionModel::Spline(SplineMotionModel::constant(
            build_basis(9, 3, 3),
            QuadraticParams::translation(1.5, -2.0),
        ));
        let text = m.to_string();
        assert!(text.starts_with("family=spline\nframes=9\ndegree=3\nknots=-1,-1,-1,-1,1,1,1,1\nL=4\n"));
        assert!(text.contains("control.3=1.5,0,0,-2,0,0,0,0,0,0,0,0\n"));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_model("family=spline\nnonsense").unwrap_err(), ModelParseError::Syntax(2));
        assert!(matches!(parse_model("family=spline"), Err(ModelParseError::Missing(_))));
        let text = "family=cubic\nframes=3\ndegree=1\nL=0\n";
        assert_eq!(parse_model(text).unwrap_err(), ModelParseError::Family("cubic".into()));
    }

    proptest! {
        #[test]
        fn dump_parse_round_trip(frames in 2usize..40, nu in 1usize..5, seed in any::<u64>(), poly in any::<bool>()) {
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1); (s >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0 };
            let model = if poly {
                let basis = PolyTimeBasis::new(frames, 2);
                let c = (0..3).map(|_| QuadraticParams(std::array::from_fn(|_| next()))).collect();
                MotionModel::PolyTime(PolyTimeMotionModel::new(basis, c).unwrap())
            } else {
                let basis = build_basis(frames, nu, 3);
                let c = (0..basis.len()).map(|_| QuadraticParams(std::array::from_fn(|_| next()))).collect();
                MotionModel::Spline(SplineMotionModel::new(basis, c).unwrap())
            };
            prop_assert_eq!(parse_model(&model.to_string()).unwrap(), model);
        }
    }
}
