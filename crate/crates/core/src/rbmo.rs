//! RBMO seminorms of sampled functions, restricted to a finite cube family.
//!
//! Both flavors minimize, over one constant `f_Q` per cube, the least `C`
//! with
//!
//! ```text
//!     (1 / D_Q) sum_{a in Q} w_a |f(a) - f_Q| <= C
//!     |f_Q - f_R| <= C K(Q, R)                      for nested Q ⊂ R
//! ```
//!
//! where `D_Q = mu(Q)` for the doubling-cube flavor `E` and `D_Q = mu(rho Q)`
//! for the all-cubes flavor `A`. The value is exact for the family and a lower
//! bound for the seminorm over all cubes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::{KTable, NestedPair};
use crate::error::{Error, Result};
use crate::geometry::{Cube, CubeFamily};
use crate::lp::{self, CubeRows, PairRow};
use crate::measures::{linf_dist, mass_unchecked, AtomicMeasure};

/// A function known through its values at the atoms of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub values: Vec<f64>,
    pub label: String,
}

impl SampledFunction {
    pub fn new(mu: &AtomicMeasure, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != mu.len() {
            return Err(Error::DimensionMismatch { expected: mu.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("sampled values must be finite".into()));
        }
        Ok(Self { values, label: label.into() })
    }

    pub fn constant(mu: &AtomicMeasure, c: f64) -> Self {
        Self { values: vec![c; mu.len()], label: format!("const({c})") }
    }

    pub fn from_fn(mu: &AtomicMeasure, label: impl Into<String>, f: impl Fn(&[f64]) -> f64) -> Self {
        Self { values: mu.points().map(f).collect(), label: label.into() }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * lambda).collect(),
            label: format!("{}*{lambda}", self.label),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            label: format!("{}+{c}", self.label),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            label: format!("{}+{}", self.label, other.label),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

/// `||f||_{L^1(mu)}`.
pub fn l1_norm(mu: &AtomicMeasure, f: &SampledFunction) -> f64 {
    f.values.iter().zip(mu.weights()).map(|(v, w)| w * v.abs()).sum()
}

/// Mean of `f` over the atoms of `q`; `None` when `mu(Q) = 0`.
pub fn cube_average(mu: &AtomicMeasure, f: &[f64], q: &Cube) -> Option<f64> {
    let mut mass = 0.0;
    let mut acc = 0.0;
    for (i, p) in mu.points().enumerate() {
        if q.contains_point(p) {
            mass += mu.weight(i);
            acc += mu.weight(i) * f[i];
        }
    }
    (mass > 0.0).then(|| acc / mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    /// Doubling cubes, oscillation normalized by `mu(Q)`.
    E,
    /// All cubes, oscillation normalized by `mu(rho Q)`.
    A,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub cube: Cube,
    pub f_q: f64,
    /// `(1 / D_Q) sum_{a in Q} w_a |f(a) - f_Q|`.
    pub osc_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResidual {
    pub inner: usize,
    pub outer: usize,
    pub k: f64,
    /// `|f_Q - f_R| / K(Q, R)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormWitness {
    pub seminorm: f64,
    pub constants: Vec<WitnessEntry>,
    pub pair_residuals: Vec<PairResidual>,
    pub flavor: Flavor,
    pub rho: Option<f64>,
    pub family_id: String,
    /// Always true: the value is the minimum over the given finite family.
    pub family_restricted: bool,
}

impl SeminormWitness {
    pub fn constant_values(&self) -> Vec<f64> {
        self.constants.iter().map(|e| e.f_q).collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("witness serializes")
    }
}

/// A seminorm program assembled once for a measure and family, reusable for
/// many functions.
#[derive(Debug, Clone)]
pub struct SeminormProblem {
    flavor: Flavor,
    rho: Option<f64>,
    cubes: Vec<Cube>,
    rows: Vec<CubeRows>,
    nested: Vec<NestedPair>,
    family_id: String,
    atoms: usize,
}

impl SeminormProblem {
    /// Flavor `E` over a family of doubling cubes. Every cube must carry mass.
    pub fn doubling(mu: &AtomicMeasure, doubling_family: &CubeFamily) -> Result<Self> {
        if doubling_family.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let mut rows = Vec::with_capacity(doubling_family.len());
        for q in doubling_family.iter() {
            let atoms = mu.atoms_in(q);
            let denom: f64 = atoms.iter().map(|&a| mu.weight(a)).sum();
            if denom <= 0.0 {
                return Err(Error::ZeroMassCube);
            }
            rows.push(CubeRows { atoms, denom });
        }
        Self::assemble(mu, doubling_family, rows, Flavor::E, None)
    }

    /// Flavor `A` with dilation `rho > 1` over an arbitrary family.
    pub fn all_cubes(mu: &AtomicMeasure, family: &CubeFamily, rho: f64) -> Result<Self> {
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must exceed 1, got {rho}")));
        }
        if family.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let rows = family
            .iter()
            .map(|q| CubeRows { atoms: mu.atoms_in(q), denom: mass_unchecked(mu, &q.scaled(rho)) })
            .collect();
        Self::assemble(mu, family, rows, Flavor::A, Some(rho))
    }

    fn assemble(
        mu: &AtomicMeasure,
        family: &CubeFamily,
        rows: Vec<CubeRows>,
        flavor: Flavor,
        rho: Option<f64>,
    ) -> Result<Self> {
        let table = KTable::new(mu, family.cubes())?;
        Ok(Self {
            flavor,
            rho,
            cubes: family.cubes().to_vec(),
            rows,
            nested: table.pairs().to_vec(),
            family_id: family.id(),
            atoms: mu.len(),
        })
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn nested_pairs(&self) -> &[NestedPair] {
        &self.nested
    }

    fn pair_rows(&self) -> Vec<PairRow> {
        self.nested.iter().map(|p| PairRow { inner: p.inner, outer: p.outer, width: p.k }).collect()
    }

    fn check_len(&self, f: &SampledFunction) -> Result<()> {
        if f.values.len() != self.atoms {
            return Err(Error::DimensionMismatch { expected: self.atoms, got: f.values.len() });
        }
        Ok(())
    }

    pub fn solve(&self, mu: &AtomicMeasure, f: &SampledFunction) -> Result<SeminormWitness> {
        self.check_len(f)?;
        let sol = lp::solve_minimax(&f.values, mu.weights(), &self.rows, &self.pair_rows())?;
        Ok(self.witness(sol.value, &sol.constants, &sol.cube_residuals, &sol.pair_residuals))
    }

    /// Largest residual of externally supplied constants, with the per-row
    /// breakdown. Used to check plug-in witnesses.
    pub fn evaluate(
        &self,
        mu: &AtomicMeasure,
        f: &SampledFunction,
        constants: &[f64],
    ) -> Result<SeminormWitness> {
        self.check_len(f)?;
        if constants.len() != self.cubes.len() {
            return Err(Error::DimensionMismatch { expected: self.cubes.len(), got: constants.len() });
        }
        let (cube_res, pair_res) =
            lp::residuals(&f.values, mu.weights(), &self.rows, &self.pair_rows(), constants);
        let value = cube_res.iter().chain(&pair_res).copied().fold(0.0, f64::max);
        Ok(self.witness(value, constants, &cube_res, &pair_res))
    }

    fn witness(&self, value: f64, constants: &[f64], cube_res: &[f64], pair_res: &[f64]) -> SeminormWitness {
        SeminormWitness {
            seminorm: value,
            constants: self
                .cubes
                .iter()
                .zip(constants)
                .zip(cube_res)
                .map(|((cube, &f_q), &osc_residual)| WitnessEntry { cube: cube.clone(), f_q, osc_residual })
                .collect(),
            pair_residuals: self
                .nested
                .iter()
                .zip(pair_res)
                .map(|(p, &residual)| PairResidual { inner: p.inner, outer: p.outer, k: p.k, residual })
                .collect(),
            flavor: self.flavor,
            rho: self.rho,
            family_id: self.family_id.clone(),
            family_restricted: true,
        }
    }
}

/// `||f||_E` over a family of doubling cubes.
pub fn seminorm_e(mu: &AtomicMeasure, f: &SampledFunction, doubling_family: &CubeFamily) -> Result<SeminormWitness> {
    SeminormProblem::doubling(mu, doubling_family)?.solve(mu, f)
}

/// `||f||_{A, rho}` over an arbitrary family.
pub fn seminorm_a(mu: &AtomicMeasure, f: &SampledFunction, family: &CubeFamily, rho: f64) -> Result<SeminormWitness> {
    SeminormProblem::all_cubes(mu, family, rho)?.solve(mu, f)
}

/// `||f||_* = ||f||_E + ||f||_{L^1}`.
pub fn norm_star(mu: &AtomicMeasure, f: &SampledFunction, doubling_family: &CubeFamily) -> Result<f64> {
    Ok(seminorm_e(mu, f, doubling_family)?.seminorm + l1_norm(mu, f))
}

/// `||f||_*` against a prepared flavor-`E` problem.
pub fn norm_star_with(problem: &SeminormProblem, mu: &AtomicMeasure, f: &SampledFunction) -> Result<f64> {
    Ok(problem.solve(mu, f)?.seminorm + l1_norm(mu, f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub label: String,
    pub seminorm_e: f64,
    pub seminorm_a: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub rho: f64,
    pub rows: Vec<EquivalenceRow>,
    /// Labels skipped because both seminorms vanish.
    pub skipped: Vec<String>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

/// Ratios `||f||_E / ||f||_{A, rho}` over a basket of functions.
pub fn equivalence_probe(
    mu: &AtomicMeasure,
    basket: &[SampledFunction],
    doubling_family: &CubeFamily,
    family: &CubeFamily,
    rho: f64,
) -> Result<EquivalenceReport> {
    if basket.is_empty() {
        return Err(Error::InvalidParameter("empty basket".into()));
    }
    let e = SeminormProblem::doubling(mu, doubling_family)?;
    let a = SeminormProblem::all_cubes(mu, family, rho)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for f in basket {
        if f.is_constant() {
            skipped.push(f.label.clone());
            continue;
        }
        let se = e.solve(mu, f)?.seminorm;
        let sa = a.solve(mu, f)?.seminorm;
        if sa == 0.0 {
            skipped.push(f.label.clone());
            continue;
        }
        rows.push(EquivalenceRow { label: f.label.clone(), seminorm_e: se, seminorm_a: sa, ratio: se / sa });
    }
    let min_ratio = rows.iter().map(|r| r.ratio).reduce(f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).reduce(f64::max);
    Ok(EquivalenceReport { rho, rows, skipped, min_ratio, max_ratio })
}

/// A deterministic mix of test functions: a constant, a half-space
/// indicator, the first coordinate, a logarithmic singularity and
/// `random` seeded sign patterns.
pub fn standard_basket(mu: &AtomicMeasure, random: usize, seed: u64) -> Vec<SampledFunction> {
    let bbox = mu.bounding_box();
    let mid: Vec<f64> = bbox.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let floor = mu.min_gap().unwrap_or(1.0).max(1e-12);
    let mut basket = vec![
        SampledFunction::constant(mu, 1.0),
        SampledFunction::from_fn(mu, "indicator-left-half", |p| if p[0] <= mid[0] { 1.0 } else { 0.0 }),
        SampledFunction::from_fn(mu, "first-coordinate", |p| p[0]),
        SampledFunction::from_fn(mu, "log-distance-to-center", |p| linf_dist(p, &mid).max(floor).ln()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..random {
        let values = (0..mu.len()).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        basket.push(SampledFunction { values, label: format!("random-signs-{k}") });
    }
    basket
}
