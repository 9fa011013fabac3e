//! Closed l-infinity cubes, dilations, and finite cube families anchored at
//! atoms of a measure.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{linf_dist, mass_unchecked, AtomicMeasure};

/// Relative slack on boundary comparisons, so that points produced by
/// floating-point dilation land on the closed boundary.
const BOUNDARY_SLACK: f64 = 1e-12;

#[inline]
pub(crate) fn within(dist: f64, half_side: f64) -> bool {
    dist <= half_side * (1.0 + BOUNDARY_SLACK)
}

/// Closed cube with sides parallel to the axes. `l(Q) = 2 * half_side`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub half_side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, half_side: f64) -> Result<Self> {
        let q = Self { center, half_side };
        q.validate()?;
        Ok(q)
    }

    pub fn with_side(center: Vec<f64>, side: f64) -> Result<Self> {
        Self::new(center, side / 2.0)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.half_side > 0.0 && self.half_side.is_finite()) {
            return Err(Error::DegenerateCube(self.half_side));
        }
        if self.center.is_empty() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("cube center must be finite and nonempty".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn side(&self) -> f64 {
        2.0 * self.half_side
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        within(linf_dist(&self.center, p), self.half_side)
    }

    /// Concentric dilation `alpha * Q`, without argument checks.
    pub fn scaled(&self, alpha: f64) -> Cube {
        Cube { center: self.center.clone(), half_side: self.half_side * alpha }
    }

    fn key(&self) -> (Vec<u64>, u64) {
        (self.center.iter().map(|c| (c + 0.0).to_bits()).collect(), self.half_side.to_bits())
    }
}

/// `alpha * Q`: same center, half-side multiplied by `alpha >= 1`.
pub fn dilate(q: &Cube, alpha: f64) -> Result<Cube> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::BadDilation(alpha));
    }
    Ok(q.scaled(alpha))
}

/// `Q ⊆ R` as closed sets.
pub fn contains(r: &Cube, q: &Cube) -> bool {
    r.center.len() == q.center.len()
        && r.center.iter().zip(&q.center).all(|(rc, qc)| {
            let lo_ok = qc - q.half_side >= rc - r.half_side - r.half_side * BOUNDARY_SLACK;
            let hi_ok = qc + q.half_side <= rc + r.half_side + r.half_side * BOUNDARY_SLACK;
            lo_ok && hi_ok
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorPolicy {
    /// Centers at atoms only.
    Atoms,
    /// Atoms plus the midpoint between each atom and its nearest neighbour.
    AtomsAndMidpoints,
    /// Hand-assembled family.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    /// Smallest side length `l_min` of the ladder.
    pub ladder_base: f64,
    /// Number of rungs; sides are `l_min * 2^k` for `0 <= k < levels`.
    pub levels: usize,
    pub anchor_policy: AnchorPolicy,
    /// Use every `anchor_stride`-th atom as an anchor.
    #[serde(default = "one")]
    pub anchor_stride: usize,
}

fn one() -> usize {
    1
}

impl FamilyParams {
    pub fn new(ladder_base: f64, levels: usize) -> Self {
        Self { ladder_base, levels, anchor_policy: AnchorPolicy::Atoms, anchor_stride: 1 }
    }

    pub fn stride(mut self, anchor_stride: usize) -> Self {
        self.anchor_stride = anchor_stride;
        self
    }

    pub fn policy(mut self, anchor_policy: AnchorPolicy) -> Self {
        self.anchor_policy = anchor_policy;
        self
    }
}

/// Ordered, duplicate-free finite family of cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeFamily {
    cubes: Vec<Cube>,
    pub ladder_base: f64,
    pub ladder_levels: usize,
    pub anchor_policy: AnchorPolicy,
}

impl CubeFamily {
    /// Family from an explicit cube list; duplicates are dropped, order kept.
    pub fn from_cubes(cubes: Vec<Cube>) -> Self {
        let ladder_base = cubes.iter().map(Cube::side).fold(f64::INFINITY, f64::min);
        let mut seen = HashSet::new();
        let cubes: Vec<Cube> = cubes.into_iter().filter(|q| seen.insert(q.key())).collect();
        Self { cubes, ladder_base, ladder_levels: 0, anchor_policy: AnchorPolicy::Custom }
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Cube> {
        self.cubes.iter()
    }

    /// The family `{alpha * Q}` in the same order.
    pub fn dilated(&self, alpha: f64) -> Result<Self> {
        let cubes = self.cubes.iter().map(|q| dilate(q, alpha)).collect::<Result<Vec<_>>>()?;
        Ok(Self { cubes, ladder_base: self.ladder_base * alpha, ..self.clone() })
    }

    /// Short deterministic description used to tag witnesses and reports.
    pub fn id(&self) -> String {
        format!(
            "{:?}:base={}:levels={}:cubes={}",
            self.anchor_policy,
            self.ladder_base,
            self.ladder_levels,
            self.cubes.len()
        )
    }

    /// Subfamily of cubes satisfying `keep`, order preserved.
    pub fn filter(&self, mut keep: impl FnMut(&Cube) -> bool) -> Self {
        Self { cubes: self.cubes.iter().filter(|q| keep(q)).cloned().collect(), ..self.clone() }
    }

    /// Cubes in the family whose center is `x`.
    pub fn centered_at<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = (usize, &'a Cube)> + 'a {
        self.cubes.iter().enumerate().filter(move |(_, q)| q.center == x)
    }
}

/// Builds the ladder family: one cube per anchor and rung.
///
/// Every top-rung cube must contain the bounding box of the support, otherwise
/// `TopLevelTooSmall` is returned.
pub fn build_family(mu: &AtomicMeasure, params: &FamilyParams) -> Result<CubeFamily> {
    if !(params.ladder_base > 0.0 && params.ladder_base.is_finite()) {
        return Err(Error::InvalidParameter("ladder_base must be positive".into()));
    }
    if params.levels == 0 {
        return Err(Error::InvalidParameter("levels must be >= 1".into()));
    }
    if params.anchor_stride == 0 {
        return Err(Error::InvalidParameter("anchor_stride must be >= 1".into()));
    }
    let mut anchors: Vec<Vec<f64>> =
        (0..mu.len()).step_by(params.anchor_stride).map(|i| mu.point(i).to_vec()).collect();
    if params.anchor_policy == AnchorPolicy::AtomsAndMidpoints && mu.len() > 1 {
        let base: Vec<usize> = (0..mu.len()).step_by(params.anchor_stride).collect();
        for &i in &base {
            let nearest = (0..mu.len())
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    linf_dist(mu.point(i), mu.point(a)).total_cmp(&linf_dist(mu.point(i), mu.point(b)))
                })
                .expect("at least two atoms");
            anchors.push(mu.point(i).iter().zip(mu.point(nearest)).map(|(a, b)| 0.5 * (a + b)).collect());
        }
    }

    let top_half = params.ladder_base * 2f64.powi(params.levels as i32 - 1) / 2.0;
    let bbox = mu.bounding_box();
    for (k, anchor) in anchors.iter().enumerate() {
        let reach = anchor
            .iter()
            .zip(&bbox)
            .map(|(c, (lo, hi))| (c - lo).max(hi - c))
            .fold(0.0, f64::max);
        if !within(reach, top_half) {
            return Err(Error::TopLevelTooSmall { side: 2.0 * top_half, anchor: k });
        }
    }

    let mut cubes = Vec::with_capacity(anchors.len() * params.levels);
    for anchor in &anchors {
        for level in 0..params.levels {
            let side = params.ladder_base * 2f64.powi(level as i32);
            cubes.push(Cube { center: anchor.clone(), half_side: side / 2.0 });
        }
    }
    let mut fam = CubeFamily::from_cubes(cubes);
    fam.ladder_base = params.ladder_base;
    fam.ladder_levels = params.levels;
    fam.anchor_policy = params.anchor_policy;
    Ok(fam)
}

/// The default doubling constant `beta = 2 * alpha^n`.
pub fn default_beta(alpha: f64, n: f64) -> f64 {
    2.0 * alpha.powf(n)
}

pub(crate) fn check_doubling_params(alpha: f64, beta: f64, n: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha.is_finite() && beta.is_finite() && beta > alpha.powf(n)) {
        return Err(Error::BadBeta { alpha, beta, n });
    }
    Ok(())
}

/// `mu(alpha Q) < beta mu(Q)`. Cubes of zero mass are never doubling.
pub fn is_doubling(mu: &AtomicMeasure, q: &Cube, alpha: f64, beta: f64) -> Result<bool> {
    check_doubling_params(alpha, beta, mu.growth_dim())?;
    q.validate()?;
    let inner = mass_unchecked(mu, q);
    if inner <= 0.0 {
        return Ok(false);
    }
    Ok(mass_unchecked(mu, &q.scaled(alpha)) < beta * inner)
}

/// The `(alpha, beta)`-doubling cubes of `family`, order preserved.
pub fn doubling_subfamily(
    mu: &AtomicMeasure,
    family: &CubeFamily,
    alpha: f64,
    beta: f64,
) -> Result<CubeFamily> {
    check_doubling_params(alpha, beta, mu.growth_dim())?;
    let mut flags = Vec::with_capacity(family.len());
    for q in family.iter() {
        flags.push(is_doubling(mu, q, alpha, beta)?);
    }
    let mut it = flags.into_iter();
    Ok(family.filter(|_| it.next().unwrap_or(false)))
}
