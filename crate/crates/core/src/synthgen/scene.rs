//! `SceneSpec` text format.
//!
//! ```text
//! width=64
//! height=48
//! frames=9
//! noise=0.1
//! seed=7
//! region.0.shape=rest
//! region.0.motion=translation 5 0
//! region.1.shape=ellipse 30 20 10 8
//! region.1.drift=0.5 0
//! region.1.motion=random-spline 2 3 3
//! region.2.shape=rect 0 0 8 8
//! region.2.motion=model
//! region.2.model.family=spline
//! region.2.model.frames=9
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{MotionSource, RegionSpec, SceneSpec, Shape, SynthError};
use crate::motion_model::{parse_model, QuadraticParams};

fn floats(text: &str) -> Option<Vec<f64>> {
    text.split_whitespace().map(|s| s.parse().ok()).collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Rest => f.write_str("rest"),
            Shape::Rect { x0, y0, x1, y1 } => write!(f, "rect {}", join(&[x0, y0, x1, y1])),
            Shape::Ellipse { cx, cy, rx, ry } => write!(f, "ellipse {}", join(&[cx, cy, rx, ry])),
            Shape::Voronoi => f.write_str("voronoi"),
        }
    }
}

impl FromStr for Shape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.trim().split_once(' ').unwrap_or((s.trim(), ""));
        let nums = floats(rest).ok_or_else(|| format!("bad numbers in shape `{s}`"))?;
        match (kind, nums.as_slice()) {
            ("rest", []) => Ok(Shape::Rest),
            ("voronoi", []) => Ok(Shape::Voronoi),
            ("rect", &[x0, y0, x1, y1]) => Ok(Shape::Rect { x0, y0, x1, y1 }),
            ("ellipse", &[cx, cy, rx, ry]) => Ok(Shape::Ellipse { cx, cy, rx, ry }),
            _ => Err(format!("unknown shape `{s}` (rest | voronoi | rect x0 y0 x1 y1 | ellipse cx cy rx ry)")),
        }
    }
}

impl fmt::Display for SceneSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "width={}", self.width)?;
        writeln!(f, "height={}", self.height)?;
        writeln!(f, "frames={}", self.frames)?;
        writeln!(f, "noise={}", self.noise)?;
        writeln!(f, "seed={}", self.seed)?;
        for (k, r) in self.regions.iter().enumerate() {
            writeln!(f, "region.{k}.shape={}", r.shape)?;
            if r.drift != (0.0, 0.0) {
                writeln!(f, "region.{k}.drift={} {}", r.drift.0, r.drift.1)?;
            }
            match &r.motion {
                MotionSource::Quadratic(p) => writeln!(f, "region.{k}.motion=quadratic {}", join(&p.0))?,
                MotionSource::RandomSpline { magnitude, nu, degree } => {
                    writeln!(f, "region.{k}.motion=random-spline {magnitude} {nu} {degree}")?
                }
                MotionSource::Model(m) => {
                    writeln!(f, "region.{k}.motion=model")?;
                    for line in m.to_string().lines() {
                        writeln!(f, "region.{k}.model.{line}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl FromStr for SceneSpec {
    type Err = SynthError;

    /// Blank lines and `#` comments are ignored.
    fn from_str(text: &str) -> Result<Self, SynthError> {
        let mut top = BTreeMap::new();
        let mut regions: BTreeMap<usize, BTreeMap<String, String>> = BTreeMap::new();
        let mut models: BTreeMap<usize, String> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |m: &str| SynthError::Parse { line: n + 1, message: m.to_string() };
            let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(rest) = key.strip_prefix("region.") {
                let (idx, field) = rest.split_once('.').ok_or_else(|| syntax("expected region.<k>.<field>"))?;
                let idx: usize = idx.parse().map_err(|_| syntax("bad region index"))?;
                if let Some(model_key) = field.strip_prefix("model.") {
                    let block = models.entry(idx).or_default();
                    block.push_str(&format!("{model_key}={value}\n"));
                } else if regions.entry(idx).or_default().insert(field.to_string(), value.to_string()).is_some() {
                    return Err(syntax("duplicate key"));
                }
            } else if top.insert(key.to_string(), value.to_string()).is_some() {
                return Err(syntax("duplicate key"));
            }
        }

        let invalid = |m: String| SynthError::Invalid(m);
        let get = |k: &str| top.get(k).ok_or_else(|| invalid(format!("missing `{k}`")));
        let num = |k: &str| get(k).and_then(|v| v.parse::<usize>().map_err(|_| invalid(format!("bad `{k}`: {v}"))));
        let width = num("width")?;
        let height = num("height")?;
        let frames = num("frames")?;
        let noise = match top.get("noise") {
            Some(v) => v.parse().map_err(|_| invalid(format!("bad `noise`: {v}")))?,
            None => 0.0,
        };
        let seed = match top.get("seed") {
            Some(v) => v.parse().map_err(|_| invalid(format!("bad `seed`: {v}")))?,
            None => 0,
        };
        if let Some(k) = top.keys().find(|k| !["width", "height", "frames", "noise", "seed"].contains(&k.as_str())) {
            return Err(invalid(format!("unknown key `{k}`")));
        }

        if let Some((&k, _)) = models.iter().find(|(k, _)| !regions.contains_key(k)) {
            return Err(invalid(format!("model block for undeclared region {k}")));
        }
        let mut out = Vec::new();
        for (expect, (k, fields)) in regions.iter().enumerate() {
            if *k != expect {
                return Err(invalid(format!("region indices must be 0..K-1, found {k}")));
            }
            let field = |f: &str| fields.get(f).ok_or_else(|| invalid(format!("region {k}: missing `{f}`")));
            let shape: Shape = field("shape")?.parse().map_err(|e| invalid(format!("region {k}: {e}")))?;
            let drift = match fields.get("drift") {
                Some(v) => match floats(v).as_deref() {
                    Some(&[dx, dy]) => (dx, dy),
                    _ => return Err(invalid(format!("region {k}: bad drift `{v}`"))),
                },
                None => (0.0, 0.0),
            };
            let motion_text = field("motion")?;
            let (kind, args) = motion_text.split_once(' ').unwrap_or((motion_text.as_str(), ""));
            let bad_motion = || invalid(format!("region {k}: bad motion `{motion_text}`"));
            let motion = match kind {
                "translation" => match floats(args).as_deref() {
                    Some(&[u, v]) => MotionSource::Quadratic(QuadraticParams::translation(u, v)),
                    _ => return Err(bad_motion()),
                },
                "quadratic" => {
                    let vals = floats(args).ok_or_else(bad_motion)?;
                    MotionSource::Quadratic(QuadraticParams(vals.try_into().map_err(|_| bad_motion())?))
                }
                "random-spline" => {
                    let parts: Vec<&str> = args.split_whitespace().collect();
                    let magnitude = parts.first().and_then(|s| s.parse().ok()).ok_or_else(bad_motion)?;
                    let nu = parts.get(1).map_or(Some(3), |s| s.parse().ok()).ok_or_else(bad_motion)?;
                    let degree = parts.get(2).map_or(Some(3), |s| s.parse().ok()).ok_or_else(bad_motion)?;
                    if parts.len() > 3 {
                        return Err(bad_motion());
                    }
                    MotionSource::RandomSpline { magnitude, nu, degree }
                }
                "model" => {
                    let block = models.get(k).ok_or_else(|| invalid(format!("region {k}: missing model block")))?;
                    MotionSource::Model(parse_model(block).map_err(|e| invalid(format!("region {k}: {e}")))?)
                }
                _ => return Err(bad_motion()),
            };
            if let Some(extra) = fields.keys().find(|f| !["shape", "drift", "motion"].contains(&f.as_str())) {
                return Err(invalid(format!("region {k}: unknown key `{extra}`")));
            }
            out.push(RegionSpec { shape, drift, motion });
        }
        let spec = SceneSpec { width, height, frames, noise, seed, regions: out };
        spec.validate()?;
        Ok(spec)
    }
}
