//! Calderón–Zygmund kernels, truncated operators over atomic measures, and
//! sampled checks of the size, Hölder and cancellation conditions.
//!
//! Distances are l-infinity. The truncation `T_eps` removes the closed cube of
//! side `eps` centered at the evaluation point, so the evaluation atom itself
//! never contributes.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::within;
use crate::measures::{linf_dist, AtomicMeasure};
use crate::rbmo::SampledFunction;

/// Default bound for the cancellation check.
pub const DEFAULT_CANCELLATION_CAP: f64 = 10.0;

type KernelFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A kernel `k(x, y)` defined off the diagonal.
#[derive(Clone)]
pub struct KernelSpec {
    pub name: String,
    /// Size exponent; matches the measure's growth dimension.
    pub n: f64,
    /// Hölder regularity in `(0, 1]`.
    pub delta: f64,
    pub antisymmetric: bool,
    eval: Arc<KernelFn>,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("delta", &self.delta)
            .field("antisymmetric", &self.antisymmetric)
            .finish()
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl KernelSpec {
    pub fn custom(
        name: impl Into<String>,
        n: f64,
        delta: f64,
        antisymmetric: bool,
        eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(format!("kernel exponent n = {n} must be positive")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("regularity delta = {delta} outside (0, 1]")));
        }
        Ok(Self { name: name.into(), n, delta, antisymmetric, eval: Arc::new(eval) })
    }

    /// `1 / (x - y)` in the first coordinate.
    pub fn cauchy1d() -> Self {
        Self::custom("cauchy1d", 1.0, 1.0, true, |x, y| 1.0 / (x[0] - y[0])).expect("valid")
    }

    /// `(x_j - y_j) / |x - y|_2^{n+1}`, the `component`-th Riesz kernel.
    pub fn riesz(n: f64, component: usize) -> Result<Self> {
        Self::custom(format!("riesz[{component}]"), n, 1.0, true, move |x, y| {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let diff = x.get(component).copied().unwrap_or(0.0) - y.get(component).copied().unwrap_or(0.0);
            diff / d2.sqrt().powf(n + 1.0)
        })
    }

    /// `sign(x_1 - y_1) |x - y|^{-n}`.
    pub fn signed_power(n: f64) -> Result<Self> {
        Self::custom("signed-power", n, 1.0, true, move |x, y| {
            sign(x[0] - y[0]) * linf_dist(x, y).powf(-n)
        })
    }

    /// `|x - y|^{-n}`: satisfies the size and smoothness bounds but has no
    /// cancellation.
    pub fn unsigned_power(n: f64) -> Result<Self> {
        Self::custom("unsigned-power", n, 1.0, false, move |x, y| linf_dist(x, y).powf(-n))
    }

    pub fn zero(n: f64) -> Result<Self> {
        Self::custom("zero", n, 1.0, true, |_, _| 0.0)
    }

    /// Built-in kernel by CLI name. `n` is the measure's growth dimension.
    pub fn by_name(name: &str, n: f64, component: usize) -> Result<Self> {
        match name {
            "cauchy1d" => Ok(Self::cauchy1d()),
            "riesz" => Self::riesz(n, component),
            "signed-power" => Self::signed_power(n),
            "unsigned-power" => Self::unsigned_power(n),
            "zero" => Self::zero(n),
            other => Err(Error::Parse(format!("unknown kernel '{other}'"))),
        }
    }

    /// `lambda * k`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let inner = Arc::clone(&self.eval);
        Self {
            name: format!("{}*{lambda}", self.name),
            eval: Arc::new(move |x, y| lambda * inner(x, y)),
            ..self.clone()
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.eval)(x, y)
    }
}

/// Sums positive and negative terms separately, each in increasing
/// magnitude, so that mirror-image contributions cancel exactly.
pub(crate) fn balanced_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut pos, mut neg): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for t in terms {
        if t >= 0.0 {
            pos.push(t);
        } else {
            neg.push(-t);
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    pos.iter().sum::<f64>() - neg.iter().sum::<f64>()
}

/// `T_eps` for a kernel.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    pub kernel: KernelSpec,
    pub eps: f64,
}

impl TruncatedOperator {
    pub fn new(kernel: KernelSpec, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("truncation eps = {eps} must be positive")));
        }
        Ok(Self { kernel, eps })
    }

    pub fn apply_at(&self, mu: &AtomicMeasure, f: &[f64], x: &[f64]) -> f64 {
        let half = self.eps / 2.0;
        balanced_sum(
            mu.points()
                .enumerate()
                .filter(|(_, a)| !within(linf_dist(a, x), half))
                .map(|(i, a)| mu.weight(i) * self.kernel.eval(x, a) * f[i]),
        )
    }

    /// `T_eps f` at every atom.
    pub fn apply(&self, mu: &AtomicMeasure, f: &SampledFunction) -> SampledFunction {
        let values = mu.points().map(|x| self.apply_at(mu, &f.values, x)).collect();
        SampledFunction { values, label: format!("T[{}]({})", self.kernel.name, f.label) }
    }

    /// `T_eps f` at the listed atoms only; other entries are zero.
    pub fn apply_on(&self, mu: &AtomicMeasure, f: &[f64], atoms: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; mu.len()];
        for &i in atoms {
            out[i] = self.apply_at(mu, f, mu.point(i));
        }
        out
    }
}

/// `T_eps f(x) = sum over atoms a outside Q(x, eps) of w_a k(x, a) f(a)`.
pub fn truncated_apply(
    mu: &AtomicMeasure,
    kernel: &KernelSpec,
    f: &SampledFunction,
    x: &[f64],
    eps: f64,
) -> Result<f64> {
    if x.len() != mu.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: mu.ambient_dim(), got: x.len() });
    }
    Ok(TruncatedOperator::new(kernel.clone(), eps)?.apply_at(mu, &f.values, x))
}

/// `T_eps 1` at every atom.
pub fn t1_field(mu: &AtomicMeasure, kernel: &KernelSpec, eps: f64) -> Result<SampledFunction> {
    let op = TruncatedOperator::new(kernel.clone(), eps)?;
    let mut out = op.apply(mu, &SampledFunction::constant(mu, 1.0));
    out.label = format!("T1[{}, eps={eps}]", kernel.name);
    Ok(out)
}

/// Strictly increasing truncation parameters bracketing the atom spacing and
/// the support diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationGrid {
    pub epsilons: Vec<f64>,
}

impl TruncationGrid {
    pub fn new(mu: &AtomicMeasure, epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.is_empty() {
            return Err(Error::InvalidParameter("empty truncation grid".into()));
        }
        if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) || epsilons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("epsilons must be positive and strictly increasing".into()));
        }
        let gap = mu.min_gap().unwrap_or(f64::INFINITY);
        if epsilons[0] >= gap {
            return Err(Error::InvalidParameter(format!(
                "smallest eps {} must lie below the atom gap {gap}",
                epsilons[0]
            )));
        }
        if *epsilons.last().expect("nonempty") <= mu.diameter() {
            return Err(Error::InvalidParameter("largest eps must exceed the support diameter".into()));
        }
        Ok(Self { epsilons })
    }

    /// `count >= 2` geometric steps from half the atom gap to four diameters.
    pub fn geometric(mu: &AtomicMeasure, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidParameter("grid needs at least two epsilons".into()));
        }
        let diam = mu.diameter().max(f64::MIN_POSITIVE);
        let lo = mu.min_gap().map_or(diam, |g| g / 2.0);
        let hi = 4.0 * diam;
        let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
        let epsilons = (0..count).map(|k| lo * ratio.powi(k as i32)).collect();
        Self::new(mu, epsilons)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstRatio {
    pub ratio: f64,
    /// Atom indices attaining the ratio.
    pub witness: Vec<usize>,
    pub samples: usize,
}

/// `max |k(x, y)| dist(x, y)^n` over the pairs.
pub fn size_check(kernel: &KernelSpec, mu: &AtomicMeasure, pairs: &[(usize, usize)]) -> Result<WorstRatio> {
    let mut best = WorstRatio { ratio: 0.0, witness: vec![], samples: pairs.len() };
    for &(i, j) in pairs {
        let (x, y) = (mu.point(i), mu.point(j));
        let d = linf_dist(x, y);
        if d == 0.0 {
            return Err(Error::SamePoint(i, j));
        }
        let r = kernel.eval(x, y).abs() * d.powf(kernel.n);
        if r > best.ratio || best.witness.is_empty() {
            best.ratio = r;
            best.witness = vec![i, j];
        }
    }
    Ok(best)
}

/// Admissible triples satisfy `2 dist(x1, x2) <= dist(x1, y)` and `x1 != x2`.
fn admissible(mu: &AtomicMeasure, (a, b, c): (usize, usize, usize)) -> bool {
    let d12 = linf_dist(mu.point(a), mu.point(b));
    d12 > 0.0 && 2.0 * d12 <= linf_dist(mu.point(a), mu.point(c))
}

/// Worst Hölder quotient over the admissible members of `triples`.
pub fn hoelder_check(
    kernel: &KernelSpec,
    mu: &AtomicMeasure,
    triples: &[(usize, usize, usize)],
) -> Result<WorstRatio> {
    let mut best = WorstRatio { ratio: 0.0, witness: vec![], samples: 0 };
    for &t in triples {
        if !admissible(mu, t) {
            continue;
        }
        best.samples += 1;
        let (x1, x2, y) = (mu.point(t.0), mu.point(t.1), mu.point(t.2));
        let d12 = linf_dist(x1, x2);
        let d1y = linf_dist(x1, y);
        let diff = (kernel.eval(x1, y) - kernel.eval(x2, y)).abs() + (kernel.eval(y, x1) - kernel.eval(y, x2)).abs();
        let r = diff * d1y.powf(kernel.n + kernel.delta) / d12.powf(kernel.delta);
        if r > best.ratio || best.witness.is_empty() {
            best.ratio = r;
            best.witness = vec![t.0, t.1, t.2];
        }
    }
    if best.samples == 0 {
        return Err(Error::NoAdmissibleTriples);
    }
    Ok(best)
}

/// Every ordered pair of distinct atoms.
pub fn all_pairs(mu: &AtomicMeasure) -> Vec<(usize, usize)> {
    let n = mu.len();
    (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect()
}

/// `count` seeded random pairs of distinct atoms.
pub fn sample_pairs(mu: &AtomicMeasure, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let n = mu.len();
    if n < 2 {
        return vec![];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

/// Admissible triples: all of them for at most 64 atoms, otherwise `count`
/// seeded samples drawn by rejection.
pub fn admissible_triples(mu: &AtomicMeasure, count: usize, seed: u64) -> Vec<(usize, usize, usize)> {
    let n = mu.len();
    if n <= 64 {
        let mut all = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if admissible(mu, (a, b, c)) {
                        all.push((a, b, c));
                    }
                }
            }
        }
        if count < all.len() {
            all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            all.truncate(count);
        }
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 1000 * count.max(1) {
        attempts += 1;
        let t = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        if admissible(mu, t) {
            out.push(t);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    pub worst_abs: f64,
    /// `(r, R)` attaining `worst_abs`.
    pub worst_annulus: (f64, f64),
    pub cap: f64,
    pub passes: bool,
}

/// `max |sum_{a in Q(x,R) \ Q(x,r)} w_a k(x, a)|` over the annuli, where
/// `Q(x, s)` is the closed cube of half-side `s` centered at `x`.
pub fn cancellation_check(
    kernel: &KernelSpec,
    mu: &AtomicMeasure,
    x: &[f64],
    annuli: &[(f64, f64)],
    cap: f64,
) -> Result<CancellationReport> {
    if annuli.is_empty() {
        return Err(Error::InvalidParameter("no annuli".into()));
    }
    let mut report = CancellationReport { worst_abs: 0.0, worst_annulus: annuli[0], cap, passes: true };
    for &(r, big_r) in annuli {
        if !(r > 0.0 && r < big_r) {
            return Err(Error::BadAnnulus(r, big_r));
        }
        let acc = balanced_sum(mu.points().enumerate().filter_map(|(i, a)| {
            let d = linf_dist(a, x);
            (within(d, big_r) && !within(d, r)).then(|| mu.weight(i) * kernel.eval(x, a))
        }));
        if acc.abs() > report.worst_abs {
            report.worst_abs = acc.abs();
            report.worst_annulus = (r, big_r);
        }
    }
    report.passes = report.worst_abs <= cap;
    Ok(report)
}

/// Annuli `(r_i, r_j)`, `i < j`, over `radii` halving from `outer` down to
/// roughly the atom gap.
pub fn dyadic_annuli(mu: &AtomicMeasure, outer: f64) -> Vec<(f64, f64)> {
    let floor = mu.min_gap().unwrap_or(outer) / 2.0;
    let mut radii = vec![outer];
    while *radii.last().expect("nonempty") / 2.0 > floor {
        let next = radii.last().expect("nonempty") / 2.0;
        radii.push(next);
    }
    let mut out = Vec::new();
    for (i, &big) in radii.iter().enumerate() {
        for &small in &radii[i + 1..] {
            out.push((small, big));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::gen_lebesgue_grid;

    fn two_atoms() -> AtomicMeasure {
        AtomicMeasure::new(1, 1.0, vec![(vec![0.0], 0.5), (vec![1.0], 0.5)]).unwrap()
    }

    #[test]
    fn hand_sum_two_atoms() {
        let mu = two_atoms();
        let one = SampledFunction::constant(&mu, 1.0);
        let v = truncated_apply(&mu, &KernelSpec::cauchy1d(), &one, &[0.0], 1.0).unwrap();
        assert_eq!(v, -0.5);
        // eps beyond twice the diameter removes everything
        assert_eq!(truncated_apply(&mu, &KernelSpec::cauchy1d(), &one, &[0.0], 2.5).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_cancellation_is_exact() {
        let mu = AtomicMeasure::new(
            1,
            1.0,
            vec![(vec![-2.0], 0.2), (vec![-1.0], 0.3), (vec![0.0], 0.1), (vec![1.0], 0.3), (vec![2.0], 0.2)],
        )
        .unwrap();
        let one = SampledFunction::constant(&mu, 1.0);
        for eps in [0.1, 1.0, 2.5, 3.0] {
            let v = truncated_apply(&mu, &KernelSpec::cauchy1d(), &one, &[0.0], eps).unwrap();
            assert_eq!(v, 0.0);
        }
        let rep = cancellation_check(&KernelSpec::cauchy1d(), &mu, &[0.0], &[(0.5, 1.5), (0.5, 3.0)], 1.0).unwrap();
        assert_eq!(rep.worst_abs, 0.0);
    }

    #[test]
    fn size_check_cases() {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 20).unwrap();
        let pairs = all_pairs(&mu);
        let r = size_check(&KernelSpec::cauchy1d(), &mu, &pairs).unwrap();
        assert!((r.ratio - 1.0).abs() <= 4.0 * f64::EPSILON);
        let r7 = size_check(&KernelSpec::cauchy1d().scaled(7.0), &mu, &pairs).unwrap();
        assert!((r7.ratio - 7.0 * r.ratio).abs() <= 1e-12);
        assert_eq!(size_check(&KernelSpec::cauchy1d(), &mu, &[(3, 3)]), Err(Error::SamePoint(3, 3)));
    }

    #[test]
    fn hoelder_needs_admissible_triples() {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 10).unwrap();
        assert_eq!(hoelder_check(&KernelSpec::cauchy1d(), &mu, &[(1, 1, 5)]), Err(Error::NoAdmissibleTriples));
        let triples = admissible_triples(&mu, 500, 3);
        let r = hoelder_check(&KernelSpec::cauchy1d(), &mu, &triples).unwrap();
        let r2 = hoelder_check(&KernelSpec::cauchy1d().scaled(2.0), &mu, &triples).unwrap();
        assert!(r.ratio <= 8.0);
        assert!((r2.ratio - 2.0 * r.ratio).abs() <= 1e-12 * r.ratio);
    }

    #[test]
    fn bad_annulus_rejected() {
        let mu = two_atoms();
        assert_eq!(
            cancellation_check(&KernelSpec::cauchy1d(), &mu, &[0.0], &[(0.5, 0.5)], 1.0),
            Err(Error::BadAnnulus(0.5, 0.5))
        );
    }

    #[test]
    fn truncation_grid_brackets() {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 100).unwrap();
        let grid = TruncationGrid::geometric(&mu, 6).unwrap();
        assert!(grid.epsilons[0] < mu.min_gap().unwrap());
        assert!(*grid.epsilons.last().unwrap() > mu.diameter());
        assert!(TruncationGrid::new(&mu, vec![0.5, 2.0]).is_err());
        assert!(TruncationGrid::new(&mu, vec![0.001, 0.0005, 2.0]).is_err());
    }

    #[test]
    fn named_kernels() {
        for name in ["cauchy1d", "riesz", "signed-power", "unsigned-power", "zero"] {
            assert!(KernelSpec::by_name(name, 1.0, 0).is_ok());
        }
        assert!(KernelSpec::by_name("hilbert", 1.0, 0).is_err());
        let x = [0.3];
        let y = [0.7];
        let c = KernelSpec::cauchy1d().eval(&x, &y);
        assert!((KernelSpec::signed_power(1.0).unwrap().eval(&x, &y) - c).abs() < 1e-15);
        assert!((KernelSpec::riesz(1.0, 0).unwrap().eval(&x, &y) - c).abs() < 1e-12);
    }
}
