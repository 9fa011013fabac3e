//! Dyadic coefficients `K(Q, R)` and `K(Q)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{contains, Cube};
use crate::measures::{mass_unchecked, AtomicMeasure};

/// Relative tolerance when comparing `2^k l(Q)` against `l(R)`, so exact
/// powers of two land on the `>=` side.
const LADDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KResult {
    pub value: f64,
    /// `N_{Q,R}`.
    pub n_steps: usize,
    /// `mu(2^j Q) / l(2^j Q)^n` for `j = 1..=N`.
    pub terms: Vec<f64>,
}

impl KResult {
    fn from_terms(terms: Vec<f64>) -> Self {
        Self { value: 1.0 + terms.iter().sum::<f64>(), n_steps: terms.len(), terms }
    }
}

/// `N_{Q,R}`: least `k >= 0` with `l(2^k Q) >= l(R)`.
pub fn ladder_steps(q: &Cube, r: &Cube) -> usize {
    let target = r.side() * (1.0 - LADDER_TOL);
    let mut side = q.side();
    let mut k = 0;
    while side < target {
        side *= 2.0;
        k += 1;
    }
    k
}

/// `mu(2^j Q) / l(2^j Q)^n`.
pub fn dyadic_term(mu: &AtomicMeasure, q: &Cube, j: usize) -> f64 {
    let dilated = q.scaled(2f64.powi(j as i32));
    mass_unchecked(mu, &dilated) / dilated.side().powf(mu.growth_dim())
}

/// `K(Q, R) = 1 + sum_{j=1}^{N_{Q,R}} mu(2^j Q) / l(2^j Q)^n`.
pub fn k_coefficient(mu: &AtomicMeasure, q: &Cube, r: &Cube) -> Result<KResult> {
    q.validate()?;
    r.validate()?;
    if !contains(r, q) {
        return Err(Error::NotNested);
    }
    let n = ladder_steps(q, r);
    Ok(KResult::from_terms((1..=n).map(|j| dyadic_term(mu, q, j)).collect()))
}

/// Upper bound `max(C, 1) * (1 + N_{Q,R})` for `K(Q, R)`, where `C` is a
/// growth constant valid on the dilates `2^j Q`.
pub fn k_log_bound(q: &Cube, r: &Cube, growth_constant: f64) -> Result<f64> {
    if !contains(r, q) {
        return Err(Error::NotNested);
    }
    if !(growth_constant >= 0.0) {
        return Err(Error::InvalidParameter("growth constant must be nonnegative".into()));
    }
    Ok(growth_constant.max(1.0) * (1.0 + ladder_steps(q, r) as f64))
}

/// `K(Q) = K(Q, 2^k Q)` with `k >= 1` minimal such that `mu(2^k Q)` exceeds
/// half the total mass. `n_steps` of the result is that `k`.
pub fn k_of_cube(mu: &AtomicMeasure, q: &Cube) -> Result<KResult> {
    q.validate()?;
    let half = mu.total_mass() / 2.0;
    let mut terms = Vec::new();
    let mut j = 1;
    loop {
        let dilated = q.scaled(2f64.powi(j));
        let mass = mass_unchecked(mu, &dilated);
        terms.push(mass / dilated.side().powf(mu.growth_dim()));
        if mass > half {
            return Ok(KResult::from_terms(terms));
        }
        if j > 2000 {
            return Err(Error::InvalidParameter("cube dilates never capture half the mass".into()));
        }
        j += 1;
    }
}

/// Cached `K` values over a fixed list of cubes: `K(Q)` for every cube and
/// `K(Q, R)` for every nested pair.
#[derive(Debug, Clone)]
pub struct KTable {
    /// Prefix sums of dyadic terms, `prefix[i][N] = K(Q_i, R)` when `N_{Q_i,R} = N`.
    prefix: Vec<Vec<f64>>,
    k_of: Vec<f64>,
    pairs: Vec<NestedPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedPair {
    pub inner: usize,
    pub outer: usize,
    pub k: f64,
}

impl KTable {
    pub fn new(mu: &AtomicMeasure, cubes: &[Cube]) -> Result<Self> {
        let mut steps_needed = vec![0usize; cubes.len()];
        let mut raw_pairs = Vec::new();
        for (i, q) in cubes.iter().enumerate() {
            q.validate()?;
            for (j, r) in cubes.iter().enumerate() {
                if i != j && contains(r, q) {
                    let n = ladder_steps(q, r);
                    steps_needed[i] = steps_needed[i].max(n);
                    raw_pairs.push((i, j, n));
                }
            }
        }
        let mut prefix = Vec::with_capacity(cubes.len());
        let mut k_of = Vec::with_capacity(cubes.len());
        for (q, &need) in cubes.iter().zip(&steps_needed) {
            let mut acc = vec![1.0];
            for j in 1..=need {
                acc.push(acc[j - 1] + dyadic_term(mu, q, j));
            }
            prefix.push(acc);
            k_of.push(k_of_cube(mu, q)?.value);
        }
        let pairs = raw_pairs
            .into_iter()
            .map(|(inner, outer, n)| NestedPair { inner, outer, k: prefix[inner][n] })
            .collect();
        Ok(Self { prefix, k_of, pairs })
    }

    /// `K(Q_i)`.
    pub fn k_of(&self, i: usize) -> f64 {
        self.k_of[i]
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k_of
    }

    /// All ordered pairs `(Q_inner ⊂ Q_outer)` of distinct cubes, with `K`.
    pub fn pairs(&self) -> &[NestedPair] {
        &self.pairs
    }

    /// `K(Q_i, R)` for `N_{Q_i,R} = steps`, if cached.
    pub fn k_steps(&self, i: usize, steps: usize) -> Option<f64> {
        self.prefix[i].get(steps).copied()
    }
}
