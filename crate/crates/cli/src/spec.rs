//! Parsers for the short textual specs accepted on the command line.

use std::path::PathBuf;

use rbmo_core::geometry::Cube;
use rbmo_core::measures::{gen_cantor, gen_lebesgue_grid, AtomicMeasure};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    /// `lebesgue:N[:m]`: midpoint grid on `[0,1]^m`, `N` atoms per side.
    Lebesgue { per_side: usize, dim: usize },
    /// `cantor:depth[:ratio]`.
    Cantor { depth: u32, ratio: f64 },
    /// Anything else is a path to a measure JSON file.
    File(PathBuf),
}

const MAX_GRID_ATOMS: usize = 1 << 22;

pub fn parse_measure_spec(text: &str) -> Result<MeasureSpec, CliError> {
    let bad = |why: &str| CliError::Validation(format!("measure spec '{text}': {why}"));
    let mut parts = text.split(':');
    match parts.next() {
        Some("lebesgue") => {
            let per_side: usize =
                parts.next().ok_or_else(|| bad("missing atom count"))?.parse().map_err(|_| bad("bad atom count"))?;
            let dim: usize = match parts.next() {
                Some(m) => m.parse().map_err(|_| bad("bad dimension"))?,
                None => 1,
            };
            if parts.next().is_some() {
                return Err(bad("too many fields"));
            }
            if per_side < 2 || dim == 0 {
                return Err(bad("need at least 2 atoms per side and dimension >= 1"));
            }
            let total = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(per_side));
            if total.map_or(true, |t| t > MAX_GRID_ATOMS) {
                return Err(bad("grid too large"));
            }
            Ok(MeasureSpec::Lebesgue { per_side, dim })
        }
        Some("cantor") => {
            let depth: u32 =
                parts.next().ok_or_else(|| bad("missing depth"))?.parse().map_err(|_| bad("bad depth"))?;
            let ratio: f64 = match parts.next() {
                Some(r) => r.parse().map_err(|_| bad("bad ratio"))?,
                None => 1.0 / 3.0,
            };
            if parts.next().is_some() {
                return Err(bad("too many fields"));
            }
            if !(1..=24).contains(&depth) || !(ratio > 0.0 && ratio < 0.5) {
                return Err(bad("depth must be 1..=24 and ratio in (0, 1/2)"));
            }
            Ok(MeasureSpec::Cantor { depth, ratio })
        }
        _ if text.is_empty() => Err(bad("empty")),
        _ => Ok(MeasureSpec::File(PathBuf::from(text))),
    }
}

impl MeasureSpec {
    pub fn load(&self) -> Result<AtomicMeasure, CliError> {
        match self {
            MeasureSpec::Lebesgue { per_side, dim } => Ok(gen_lebesgue_grid(&vec![(0.0, 1.0); *dim], *per_side)?),
            MeasureSpec::Cantor { depth, ratio } => Ok(gen_cantor(*depth, *ratio)?),
            MeasureSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
                Ok(AtomicMeasure::from_json_str(&text)?)
            }
        }
    }
}

/// `c1,c2,...@side`.
pub fn parse_cube_spec(text: &str) -> Result<Cube, CliError> {
    let bad = |why: &str| CliError::Validation(format!("cube spec '{text}': {why}"));
    let (center, side) = text.split_once('@').ok_or_else(|| bad("expected center@side"))?;
    let center: Vec<f64> = center
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| bad("bad coordinate")))
        .collect::<Result<_, _>>()?;
    let side: f64 = side.trim().parse().map_err(|_| bad("bad side"))?;
    if center.iter().any(|c| !c.is_finite()) || !side.is_finite() {
        return Err(bad("values must be finite"));
    }
    Ok(Cube::with_side(center, side)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Constant(f64),
    IndicatorLeftHalf,
    FirstCoordinate,
    LogDistanceToCenter,
    RandomSigns(u64),
    Phi(usize),
}

pub fn parse_function_spec(text: &str) -> Result<FunctionSpec, CliError> {
    let bad = |why: &str| CliError::Validation(format!("function spec '{text}': {why}"));
    let (head, arg) = match text.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (text, None),
    };
    let need = || arg.ok_or_else(|| bad("missing argument"));
    let none = |a: Option<&str>, f: FunctionSpec| if a.is_some() { Err(bad("unexpected argument")) } else { Ok(f) };
    match head {
        "const" => {
            let v: f64 = need()?.parse().map_err(|_| bad("bad value"))?;
            if !v.is_finite() {
                return Err(bad("value must be finite"));
            }
            Ok(FunctionSpec::Constant(v))
        }
        "indicator-left-half" => none(arg, FunctionSpec::IndicatorLeftHalf),
        "first-coordinate" => none(arg, FunctionSpec::FirstCoordinate),
        "log-distance-to-center" => none(arg, FunctionSpec::LogDistanceToCenter),
        "random-signs" => Ok(FunctionSpec::RandomSigns(need()?.parse().map_err(|_| bad("bad seed"))?)),
        "phi" => Ok(FunctionSpec::Phi(need()?.parse().map_err(|_| bad("bad atom index"))?)),
        _ => Err(bad("unknown function")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_specs() {
        assert_eq!(parse_measure_spec("lebesgue:1000").unwrap(), MeasureSpec::Lebesgue { per_side: 1000, dim: 1 });
        assert_eq!(parse_measure_spec("lebesgue:3:2").unwrap(), MeasureSpec::Lebesgue { per_side: 3, dim: 2 });
        assert_eq!(parse_measure_spec("cantor:8").unwrap(), MeasureSpec::Cantor { depth: 8, ratio: 1.0 / 3.0 });
        assert!(matches!(parse_measure_spec("data/mu.json").unwrap(), MeasureSpec::File(_)));
        for bad in ["lebesgue", "lebesgue:1", "lebesgue:x", "lebesgue:4096:4", "cantor:0", "cantor:3:0.6", ""] {
            assert!(parse_measure_spec(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn cube_specs() {
        let q = parse_cube_spec("0.5@0.25").unwrap();
        assert_eq!(q.center, vec![0.5]);
        assert_eq!(q.side(), 0.25);
        assert_eq!(parse_cube_spec("0.1, 0.2@1").unwrap().center, vec![0.1, 0.2]);
        for bad in ["0.5", "0.5@0", "a@1", "0.5@inf", "@1"] {
            assert!(parse_cube_spec(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn function_specs() {
        assert_eq!(parse_function_spec("phi:3").unwrap(), FunctionSpec::Phi(3));
        assert_eq!(parse_function_spec("const:2.5").unwrap(), FunctionSpec::Constant(2.5));
        assert!(parse_function_spec("first-coordinate:1").is_err());
        assert!(parse_function_spec("sine").is_err());
    }
}
