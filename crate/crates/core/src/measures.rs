//! Finite atomic measures on `R^m` with a declared growth dimension `n`.
//!
//! Every integral against a measure becomes a weighted sum over atoms. Atoms
//! are merged on exact coordinate equality and the total mass is normalized
//! to one at construction; the original mass is kept in [`AtomicMeasure::scale`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cube, CubeFamily};

/// Ratio above which [`growth_check`] reports a divergent growth constant.
pub const DEFAULT_GROWTH_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    ambient_dim: usize,
    growth_dim: f64,
    coords: Vec<f64>,
    weights: Vec<f64>,
    total_mass: f64,
    scale: f64,
}

impl AtomicMeasure {
    /// Builds a measure from `(point, weight)` pairs, merging duplicate points
    /// and normalizing the total mass to one.
    pub fn new(ambient_dim: usize, growth_dim: f64, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        Self::with_scale(ambient_dim, growth_dim, 1.0, atoms)
    }

    fn with_scale(
        ambient_dim: usize,
        growth_dim: f64,
        prior_scale: f64,
        atoms: Vec<(Vec<f64>, f64)>,
    ) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidMeasure("ambient dimension must be >= 1".into()));
        }
        if !(growth_dim > 0.0 && growth_dim <= ambient_dim as f64) {
            return Err(Error::InvalidMeasure(format!(
                "growth dimension {growth_dim} outside (0, {ambient_dim}]"
            )));
        }
        if !(prior_scale.is_finite() && prior_scale > 0.0) {
            return Err(Error::InvalidMeasure(format!("scale {prior_scale} must be positive")));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }

        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(atoms.len());
        let mut coords = Vec::with_capacity(atoms.len() * ambient_dim);
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (point, weight) in atoms {
            if point.len() != ambient_dim {
                return Err(Error::DimensionMismatch { expected: ambient_dim, got: point.len() });
            }
            if point.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::InvalidMeasure(format!("atom weight {weight} must be positive")));
            }
            // -0.0 and 0.0 are the same point
            let key: Vec<u64> = point.iter().map(|&c| (c + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&i) => weights[i] += weight,
                None => {
                    index.insert(key, weights.len());
                    coords.extend(point.iter().map(|&c| c + 0.0));
                    weights.push(weight);
                }
            }
        }

        let raw_total: f64 = weights.iter().sum();
        if !(raw_total.is_finite() && raw_total > 0.0) {
            return Err(Error::InvalidMeasure("total mass must be finite and positive".into()));
        }
        // already normalized input (a saved measure) is kept bit for bit
        let normalized = (raw_total - 1.0).abs() <= 4.0 * f64::EPSILON * weights.len() as f64;
        let raw_total = if normalized { 1.0 } else { raw_total };
        for w in &mut weights {
            *w /= raw_total;
        }
        let total_mass = weights.iter().sum();
        Ok(Self {
            ambient_dim,
            growth_dim,
            coords,
            weights,
            total_mass,
            scale: prior_scale * raw_total,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn growth_dim(&self) -> f64 {
        self.growth_dim
    }

    /// Copy of the measure with a different declared growth dimension.
    pub fn with_growth_dim(&self, growth_dim: f64) -> Result<Self> {
        if !(growth_dim > 0.0 && growth_dim <= self.ambient_dim as f64) {
            return Err(Error::InvalidMeasure(format!(
                "growth dimension {growth_dim} outside (0, {}]",
                self.ambient_dim
            )));
        }
        Ok(Self { growth_dim, ..self.clone() })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.ambient_dim)
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Total mass of the input before normalization.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Indices of the atoms lying in the closed cube `q`.
    pub fn atoms_in(&self, q: &Cube) -> Vec<usize> {
        (0..self.len()).filter(|&i| q.contains_point(self.point(i))).collect()
    }

    /// Coordinatewise bounds of the support.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.ambient_dim];
        for p in self.points() {
            for (b, &c) in bounds.iter_mut().zip(p) {
                b.0 = b.0.min(c);
                b.1 = b.1.max(c);
            }
        }
        bounds
    }

    /// l-infinity diameter of the support.
    pub fn diameter(&self) -> f64 {
        self.bounding_box().iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max)
    }

    /// Smallest l-infinity distance between two distinct atoms, the
    /// discretization resolution. `None` for a single atom.
    pub fn min_gap(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        if self.ambient_dim == 1 {
            let mut xs: Vec<f64> = self.coords.clone();
            xs.sort_by(f64::total_cmp);
            return xs.windows(2).map(|w| w[1] - w[0]).reduce(f64::min);
        }
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.min(linf_dist(self.point(i), self.point(j)));
            }
        }
        Some(best)
    }

    /// Image of the measure under `x -> lambda * x`. Weights are unchanged.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("dilation {lambda} must be positive")));
        }
        Ok(Self {
            coords: self.coords.iter().map(|c| c * lambda).collect(),
            ..self.clone()
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: MeasureFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_measure()
    }

    pub fn to_file(&self) -> MeasureFile {
        MeasureFile {
            m: self.ambient_dim,
            n: self.growth_dim,
            scale: self.scale,
            atoms: self
                .points()
                .zip(&self.weights)
                .map(|(x, &w)| AtomRecord { x: x.to_vec(), w })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("measure serializes")
    }
}

/// On-disk measure format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub m: usize,
    pub n: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    pub atoms: Vec<AtomRecord>,
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub x: Vec<f64>,
    pub w: f64,
}

impl MeasureFile {
    pub fn into_measure(self) -> Result<AtomicMeasure> {
        let atoms = self.atoms.into_iter().map(|a| (a.x, a.w)).collect();
        AtomicMeasure::with_scale(self.m, self.n, self.scale, atoms)
    }
}

pub fn linf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn linf_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `mu(Q)`: total weight of atoms in the closed cube `q`.
pub fn mass_of_cube(mu: &AtomicMeasure, q: &Cube) -> Result<f64> {
    q.validate()?;
    if q.dim() != mu.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: mu.ambient_dim(), got: q.dim() });
    }
    Ok(mass_unchecked(mu, q))
}

pub(crate) fn mass_unchecked(mu: &AtomicMeasure, q: &Cube) -> f64 {
    mu.points()
        .zip(mu.weights())
        .filter(|(p, _)| q.contains_point(p))
        .map(|(_, &w)| w)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    /// `max mu(Q) / l(Q)^n` over the scanned family.
    pub constant: f64,
    /// Set when the ratio exceeded the cap; `witness_cube` is then the offender.
    pub divergent: bool,
    pub witness_cube: Cube,
    pub scanned_family_size: usize,
    pub cap: f64,
}

/// Scans `family` for the growth constant of `mu`, with the default cap.
pub fn growth_check(mu: &AtomicMeasure, family: &CubeFamily) -> Result<GrowthCertificate> {
    growth_check_with_cap(mu, family, DEFAULT_GROWTH_CAP)
}

pub fn growth_check_with_cap(
    mu: &AtomicMeasure,
    family: &CubeFamily,
    cap: f64,
) -> Result<GrowthCertificate> {
    let cubes = family.cubes();
    if cubes.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let n = mu.growth_dim();
    let mut best: Option<(f64, usize)> = None;
    for (i, q) in cubes.iter().enumerate() {
        let ratio = mass_of_cube(mu, q)? / q.side().powf(n);
        if best.map_or(true, |(b, _)| ratio > b) {
            best = Some((ratio, i));
        }
    }
    let (constant, idx) = best.expect("nonempty family");
    Ok(GrowthCertificate {
        constant,
        divergent: constant > cap,
        witness_cube: cubes[idx].clone(),
        scanned_family_size: cubes.len(),
        cap,
    })
}

/// Midpoint-rule discretization of the uniform measure on a box, with
/// `atoms_per_side` atoms along each axis. The growth dimension is `m`.
pub fn gen_lebesgue_grid(interval_box: &[(f64, f64)], atoms_per_side: usize) -> Result<AtomicMeasure> {
    if atoms_per_side < 2 {
        return Err(Error::InvalidParameter("atoms_per_side must be >= 2".into()));
    }
    let m = interval_box.len();
    if m == 0 {
        return Err(Error::InvalidParameter("empty box".into()));
    }
    if interval_box.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(Error::InvalidParameter("box sides must satisfy lo < hi".into()));
    }
    let total = atoms_per_side
        .checked_pow(m as u32)
        .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
    let weight = 1.0 / total as f64;
    let mut atoms = Vec::with_capacity(total);
    let mut digits = vec![0usize; m];
    for _ in 0..total {
        let point = digits
            .iter()
            .zip(interval_box)
            .map(|(&d, &(lo, hi))| lo + (hi - lo) * (d as f64 + 0.5) / atoms_per_side as f64)
            .collect();
        atoms.push((point, weight));
        for d in digits.iter_mut() {
            *d += 1;
            if *d < atoms_per_side {
                break;
            }
            *d = 0;
        }
    }
    AtomicMeasure::new(m, m as f64, atoms)
}

/// Two-part self-similar Cantor measure on `[0, 1]`: `2^depth` atoms at the
/// centers of the depth-level construction intervals, growth dimension
/// `log 2 / log(1 / ratio)`.
pub fn gen_cantor(depth: u32, ratio: f64) -> Result<AtomicMeasure> {
    if depth == 0 || depth > 24 {
        return Err(Error::InvalidParameter("cantor depth must be in 1..=24".into()));
    }
    if !(ratio > 0.0 && ratio < 0.5) {
        return Err(Error::InvalidParameter("cantor ratio must lie in (0, 1/2)".into()));
    }
    let mut lefts = vec![0.0f64];
    let mut len = 1.0f64;
    for _ in 0..depth {
        let next_len = len * ratio;
        lefts = lefts.iter().flat_map(|&a| [a, a + len - next_len]).collect();
        len = next_len;
    }
    let weight = 0.5f64.powi(depth as i32);
    let atoms = lefts.into_iter().map(|a| (vec![a + len / 2.0], weight)).collect();
    AtomicMeasure::new(1, 2f64.ln() / (1.0 / ratio).ln(), atoms)
}
