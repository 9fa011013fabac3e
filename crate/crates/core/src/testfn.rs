//! The radial tail function
//!
//! ```text
//!     phi_x(y) = 1 + sum_{t : |t - x| > |y - x|} w_t / |t - x|^n
//! ```
//!
//! (l-infinity norms), its normalized family `c_x phi_x` with `||c_x phi_x||_* = 1`,
//! and the split `f = f_{2Q} + (f - f_{2Q}) chi_{2Q} + (f - f_{2Q}) chi_{outside 2Q}`
//! with its constants `b_{2,Q} = 0`, `b_{3,Q}`.

use serde::{Deserialize, Serialize};

use crate::coefficients::{k_of_cube, KTable};
use crate::error::{Error, Result};
use crate::geometry::{Cube, CubeFamily};
use crate::measures::{linf_dist, AtomicMeasure};
use crate::operators::TruncatedOperator;
use crate::rbmo::{cube_average, l1_norm, SampledFunction, SeminormProblem};

/// `phi` with base point `x_base`, evaluated at `y` by a direct sum.
pub fn phi_value(mu: &AtomicMeasure, x_base: &[f64], y: &[f64]) -> f64 {
    phi_at_radius(mu, x_base, linf_dist(y, x_base))
}

/// `phi` at any point of l-infinity distance `radius` from the base point.
pub fn phi_at_radius(mu: &AtomicMeasure, x_base: &[f64], radius: f64) -> f64 {
    let n = mu.growth_dim();
    1.0 + mu
        .points()
        .zip(mu.weights())
        .filter_map(|(t, &w)| {
            let d = linf_dist(t, x_base);
            (d > radius).then(|| w / d.powf(n))
        })
        .sum::<f64>()
}

/// `phi` with base point `x_base` at every atom, via sorted tail sums.
pub fn phi_field(mu: &AtomicMeasure, x_base: &[f64]) -> Vec<f64> {
    let n = mu.growth_dim();
    let dist: Vec<f64> = mu.points().map(|t| linf_dist(t, x_base)).collect();
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));

    let mut out = vec![0.0; mu.len()];
    let mut tail = 0.0;
    let mut k = 0;
    while k < order.len() {
        // atoms at equal distance do not see each other
        let d = dist[order[k]];
        let mut end = k;
        while end < order.len() && dist[order[end]] == d {
            end += 1;
        }
        for &i in &order[k..end] {
            out[i] = 1.0 + tail;
        }
        if d > 0.0 {
            for &i in &order[k..end] {
                tail += mu.weight(i) / d.powf(n);
            }
        }
        k = end;
    }
    out
}

/// Both sides of the Fubini identity for `||phi_x - 1||_{L^1}`:
/// `sum_y w_y sum_{|t-x| > |y-x|} w_t / |t-x|^n` and
/// `sum_t w_t mu({y : |y-x| < |t-x|}) / |t-x|^n`.
pub fn fubini_sides(mu: &AtomicMeasure, x_base: &[f64]) -> (f64, f64) {
    let n = mu.growth_dim();
    let dist: Vec<f64> = mu.points().map(|t| linf_dist(t, x_base)).collect();
    let mut lhs = 0.0;
    for (y, &dy) in dist.iter().enumerate() {
        let inner: f64 = dist
            .iter()
            .enumerate()
            .filter(|(_, &dt)| dt > dy)
            .map(|(t, &dt)| mu.weight(t) / dt.powf(n))
            .sum();
        lhs += mu.weight(y) * inner;
    }
    let mut rhs = 0.0;
    for (t, &dt) in dist.iter().enumerate() {
        if dt == 0.0 {
            continue;
        }
        let inside: f64 = dist.iter().enumerate().filter(|(_, &dy)| dy < dt).map(|(y, _)| mu.weight(y)).sum();
        rhs += mu.weight(t) * inside / dt.powf(n);
    }
    (lhs, rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiKRow {
    pub radius: f64,
    pub phi: f64,
    /// `K(Q)` for the cube of half-side `radius` at the base point.
    pub k: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiKProbe {
    pub base: Vec<f64>,
    pub rows: Vec<PhiKRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Ratios `phi(y) / K(Q(x_base, |y|))` for `|y| = radius`, where the cube has
/// side `2 |y|`.
pub fn phi_vs_k_probe(mu: &AtomicMeasure, x_base: &[f64], radii: &[f64]) -> Result<PhiKProbe> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("no radii".into()));
    }
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let q = Cube::new(x_base.to_vec(), radius)?;
        let k = k_of_cube(mu, &q)?.value;
        let phi = phi_at_radius(mu, x_base, radius);
        rows.push(PhiKRow { radius, phi, k, ratio: phi / k });
    }
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(PhiKProbe { base: x_base.to_vec(), rows, min_ratio, max_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeAverage {
    pub cube: Cube,
    /// `K(2Q)`.
    pub k_2q: f64,
    /// Mean of `c phi_x` over `2Q`.
    pub avg_2q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub base_atom: Option<usize>,
    pub base_point: Vec<f64>,
    /// Normalizing factor `c = 1 / ||phi_x||_*`.
    pub scale: f64,
    /// `c phi_x` at the atoms.
    pub values: SampledFunction,
    /// `c phi_x(y_Q)` for each doubling cube, `|y_Q - x| = |x_Q - x| + l(Q)/2`.
    pub witness_constants: Vec<(Cube, f64)>,
    /// Averages over `2Q` for the doubling cubes centered at the base point.
    pub averages: Vec<CubeAverage>,
}

/// The constants `phi_x(y_Q)` for each cube of a family, scaled by `scale`.
pub fn step_one_constants(mu: &AtomicMeasure, x_base: &[f64], scale: f64, family: &CubeFamily) -> Vec<f64> {
    family
        .iter()
        .map(|q| scale * phi_at_radius(mu, x_base, linf_dist(&q.center, x_base) + q.half_side))
        .collect()
}

/// Builds `c_x phi_x` for each base atom, normalized in `||.||_*` over the
/// doubling family, with the witness constants `phi(y_Q)` and the `2Q` averages.
pub fn build_test_family(
    mu: &AtomicMeasure,
    base_atoms: &[usize],
    doubling_family: &CubeFamily,
) -> Result<Vec<TestFunction>> {
    let problem = SeminormProblem::doubling(mu, doubling_family)?;
    base_atoms
        .iter()
        .map(|&atom| {
            if atom >= mu.len() {
                return Err(Error::InvalidParameter(format!("base atom {atom} out of range")));
            }
            let mut t = test_function_at(mu, mu.point(atom), &problem, doubling_family)?;
            t.base_atom = Some(atom);
            Ok(t)
        })
        .collect()
}

/// `c_x phi_x` for an arbitrary base point, against a prepared flavor-`E`
/// problem over `doubling_family`.
pub fn test_function_at(
    mu: &AtomicMeasure,
    x: &[f64],
    problem: &SeminormProblem,
    doubling_family: &CubeFamily,
) -> Result<TestFunction> {
    if x.len() != mu.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: mu.ambient_dim(), got: x.len() });
    }
    let raw = SampledFunction { values: phi_field(mu, x), label: format!("phi{x:?}") };
    let norm = problem.solve(mu, &raw)?.seminorm + l1_norm(mu, &raw);
    let scale = 1.0 / norm;
    let values = raw.scaled(scale);

    let witness_constants =
        doubling_family.iter().cloned().zip(step_one_constants(mu, x, scale, doubling_family)).collect();
    let mut averages = Vec::new();
    for (_, q) in doubling_family.centered_at(x) {
        let twice = q.scaled(2.0);
        let avg_2q = cube_average(mu, &values.values, &twice).ok_or(Error::ZeroMassCube)?;
        averages.push(CubeAverage { cube: q.clone(), k_2q: k_of_cube(mu, &twice)?.value, avg_2q });
    }
    Ok(TestFunction { base_atom: None, base_point: x.to_vec(), scale, values, witness_constants, averages })
}

/// Lower bound `avg >= c1 K - c2` over a set of `(K, avg)` points: `c1` is the
/// least-squares slope, `c2` the smallest offset making the bound hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundFit {
    pub c1: f64,
    pub c2: f64,
    pub points: usize,
}

impl LowerBoundFit {
    /// `K` above which `c1 K - c2` is at least `c1 K / 2 + 1`, i.e. the
    /// "sufficiently large" regime.
    pub fn threshold(&self) -> f64 {
        2.0 * (self.c2 + 1.0) / self.c1
    }
}

pub fn fit_lower_bound(points: &[(f64, f64)]) -> Result<LowerBoundFit> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("need at least two points to fit".into()));
    }
    let m = points.len() as f64;
    let mk = points.iter().map(|p| p.0).sum::<f64>() / m;
    let ma = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mk).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all K values coincide".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mk) * (p.1 - ma)).sum();
    let c1 = sxy / sxx;
    let c2 = points.iter().map(|p| c1 * p.0 - p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(LowerBoundFit { c1, c2, points: points.len() })
}

/// `(K(2Q), <phi_x>_{2Q})` over a test family.
pub fn average_points(family: &[TestFunction]) -> Vec<(f64, f64)> {
    family.iter().flat_map(|t| t.averages.iter().map(|a| (a.k_2q, a.avg_2q))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub anchor: Cube,
    /// `f_1 = f_{2Q}`.
    pub f1: f64,
    /// `(f - f_{2Q}) chi_{2Q}`.
    pub f2: SampledFunction,
    /// `(f - f_{2Q}) chi_{outside 2Q}`.
    pub f3: SampledFunction,
    pub b2: f64,
    pub b3: f64,
    /// Atoms of the anchor cube.
    pub atoms: Vec<usize>,
    /// `T f_2` and `T f_3` at the anchor's atoms, zero elsewhere.
    pub t_f2: Vec<f64>,
    pub t_f3: Vec<f64>,
}

/// Splits `f` around `2Q` with the constant `f2q` and computes
/// `b_{3,Q} = (1 / mu(Q)) sum_{a in Q} w_a (T f_3)(a)`.
pub fn decompose(
    mu: &AtomicMeasure,
    f: &SampledFunction,
    f2q: f64,
    q: &Cube,
    op: &TruncatedOperator,
) -> Result<Decomposition> {
    if f.values.len() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: f.values.len() });
    }
    let twice = q.scaled(2.0);
    let mut f2 = vec![0.0; mu.len()];
    let mut f3 = vec![0.0; mu.len()];
    for (i, p) in mu.points().enumerate() {
        let d = f.values[i] - f2q;
        if twice.contains_point(p) {
            f2[i] = d;
        } else {
            f3[i] = d;
        }
    }
    let atoms = mu.atoms_in(q);
    let mass: f64 = atoms.iter().map(|&a| mu.weight(a)).sum();
    if mass <= 0.0 {
        return Err(Error::ZeroMassCube);
    }
    let t_f2 = op.apply_on(mu, &f2, &atoms);
    let t_f3 = op.apply_on(mu, &f3, &atoms);
    let b3 = atoms.iter().map(|&a| mu.weight(a) * t_f3[a]).sum::<f64>() / mass;
    Ok(Decomposition {
        anchor: q.clone(),
        f1: f2q,
        f2: SampledFunction { values: f2, label: format!("{}_2", f.label) },
        f3: SampledFunction { values: f3, label: format!("{}_3", f.label) },
        b2: 0.0,
        b3,
        atoms,
        t_f2,
        t_f3,
    })
}

impl Decomposition {
    /// `(1 / mu(Q)) sum_{a in Q} w_a |T f_k(a) - b_{k,Q}|` for `k = 2, 3`.
    pub fn oscillations(&self, mu: &AtomicMeasure) -> (f64, f64) {
        let mass: f64 = self.atoms.iter().map(|&a| mu.weight(a)).sum();
        let osc = |vals: &[f64], b: f64| {
            self.atoms.iter().map(|&a| mu.weight(a) * (vals[a] - b).abs()).sum::<f64>() / mass
        };
        (osc(&self.t_f2, self.b2), osc(&self.t_f3, self.b3))
    }
}

/// The constants `f_{2Q}` from the `rho = 2` all-cubes witness over `{2Q}`.
pub fn two_q_constants(mu: &AtomicMeasure, f: &SampledFunction, doubling_family: &CubeFamily) -> Result<Vec<f64>> {
    let doubled = doubling_family.dilated(2.0)?;
    let witness = SeminormProblem::all_cubes(mu, &doubled, 2.0)?.solve(mu, f)?;
    Ok(witness.constant_values())
}

/// Decomposition of `f` around every cube of the doubling family.
pub fn decompose_family(
    mu: &AtomicMeasure,
    f: &SampledFunction,
    doubling_family: &CubeFamily,
    op: &TruncatedOperator,
) -> Result<Vec<Decomposition>> {
    let constants = two_q_constants(mu, f, doubling_family)?;
    doubling_family.iter().zip(constants).map(|(q, c)| decompose(mu, f, c, q, op)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationRow {
    pub cube: Cube,
    pub ratio2: f64,
    pub ratio3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationLemmaReport {
    pub norm: f64,
    pub rows: Vec<OscillationRow>,
    pub max_ratio: f64,
    pub median_ratio: f64,
}

impl OscillationLemmaReport {
    /// `max / median` of the per-cube ratios; `None` when the median vanishes.
    pub fn stability(&self) -> Option<f64> {
        (self.median_ratio > 0.0).then(|| self.max_ratio / self.median_ratio)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Per doubling cube, `(1 / mu(Q)) sum_Q |T f_k - b_{k,Q}| / ||f||_*` for
/// `k = 2, 3`.
pub fn oscillation_lemma_check(
    mu: &AtomicMeasure,
    f: &SampledFunction,
    doubling_family: &CubeFamily,
    op: &TruncatedOperator,
) -> Result<OscillationLemmaReport> {
    let norm = SeminormProblem::doubling(mu, doubling_family)?.solve(mu, f)?.seminorm + l1_norm(mu, f);
    let decs = decompose_family(mu, f, doubling_family, op)?;
    let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    let rows: Vec<OscillationRow> = decs
        .iter()
        .map(|d| {
            let (o2, o3) = d.oscillations(mu);
            OscillationRow { cube: d.anchor.clone(), ratio2: o2 * scale, ratio3: o3 * scale }
        })
        .collect();
    let all: Vec<f64> = rows.iter().flat_map(|r| [r.ratio2, r.ratio3]).collect();
    let max_ratio = all.iter().copied().fold(0.0, f64::max);
    Ok(OscillationLemmaReport { norm, rows, max_ratio, median_ratio: median(all) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLemmaRow {
    pub inner: usize,
    pub outer: usize,
    pub k: f64,
    /// `|b_{3,Q} - b_{3,R}| / (||f||_* K(Q, R))`; the `k = 2` ratio is zero.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLemmaReport {
    pub norm: f64,
    pub rows: Vec<KLemmaRow>,
    pub max_ratio: f64,
}

/// `|b_{k,Q} - b_{k,R}| / (||f||_* K(Q, R))` over the nested pairs of the
/// doubling family.
pub fn lemma_k_check(
    mu: &AtomicMeasure,
    f: &SampledFunction,
    doubling_family: &CubeFamily,
    op: &TruncatedOperator,
) -> Result<KLemmaReport> {
    let norm = SeminormProblem::doubling(mu, doubling_family)?.solve(mu, f)?.seminorm + l1_norm(mu, f);
    let decs = decompose_family(mu, f, doubling_family, op)?;
    let table = KTable::new(mu, doubling_family.cubes())?;
    let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    let rows: Vec<KLemmaRow> = table
        .pairs()
        .iter()
        .map(|p| KLemmaRow {
            inner: p.inner,
            outer: p.outer,
            k: p.k,
            ratio: (decs[p.inner].b3 - decs[p.outer].b3).abs() * scale / p.k,
        })
        .collect();
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(KLemmaReport { norm, rows, max_ratio })
}
