//! Condition (ii) certificates for `T1`, the constants `b_Q = gamma_Q / phi_{2Q}`
//! built from test functions, and an empirical probe of boundedness on RBMO.

use serde::{Deserialize, Serialize};

use crate::coefficients::{k_of_cube, KTable, NestedPair};
use crate::error::{Error, Result};
use crate::geometry::{Cube, CubeFamily};
use crate::lp::{self, CubeRows, PairRow};
use crate::measures::{linf_dist, AtomicMeasure};
use crate::operators::{
    cancellation_check, dyadic_annuli, t1_field, CancellationReport, KernelSpec, TruncatedOperator, TruncationGrid,
    DEFAULT_CANCELLATION_CAP,
};
use crate::rbmo::{l1_norm, standard_basket, SampledFunction, SeminormProblem};
use crate::testfn::{decompose, fit_lower_bound, test_function_at, LowerBoundFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCube {
    pub cube: Cube,
    #[serde(rename = "K")]
    pub k: f64,
    pub b_q: f64,
    /// `K(Q) / mu(Q) * sum_{a in Q} w_a |T1(a) - b_Q|`.
    pub osc_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificatePair {
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "K_QR")]
    pub k_qr: f64,
    /// `|b_Q - b_R| K(Q) / K(Q, R)`.
    pub diff_residual: f64,
}

/// Certificate at one truncation parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCertificate {
    pub epsilon: f64,
    #[serde(rename = "best_C")]
    pub best_c: f64,
    pub cubes: Vec<CertificateCube>,
    pub pairs: Vec<CertificatePair>,
}

impl EpsilonCertificate {
    pub fn constants(&self) -> Vec<f64> {
        self.cubes.iter().map(|c| c.b_q).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Certificate {
    pub per_epsilon: Vec<EpsilonCertificate>,
    /// Supremum of `best_C` over the grid.
    #[serde(rename = "best_C")]
    pub best_c: f64,
    pub epsilon_grid: Vec<f64>,
    /// True when `best_C` is a supremum over more than one `eps`.
    pub sup_over_eps: bool,
    pub family_id: String,
    pub cancellation: Option<CancellationReport>,
    /// Set when the kernel failed the cancellation check under the warn policy.
    pub cancellation_warning: bool,
}

/// The condition (ii) program over a fixed doubling family:
///
/// ```text
///     sum_{a in Q} w_a |T1(a) - b_Q| <= C mu(Q) / K(Q)
///     |b_Q - b_R|                    <= C K(Q, R) / K(Q)      (Q in R)
/// ```
#[derive(Debug, Clone)]
pub struct ConditionTwo {
    cubes: Vec<Cube>,
    rows: Vec<CubeRows>,
    k: Vec<f64>,
    pairs: Vec<NestedPair>,
    atoms: usize,
}

impl ConditionTwo {
    pub fn new(mu: &AtomicMeasure, doubling_family: &CubeFamily) -> Result<Self> {
        if doubling_family.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let table = KTable::new(mu, doubling_family.cubes())?;
        let mut rows = Vec::with_capacity(doubling_family.len());
        for (i, q) in doubling_family.iter().enumerate() {
            let atoms = mu.atoms_in(q);
            let mass: f64 = atoms.iter().map(|&a| mu.weight(a)).sum();
            if mass <= 0.0 {
                return Err(Error::ZeroMassCube);
            }
            rows.push(CubeRows { atoms, denom: mass / table.k_of(i) });
        }
        Ok(Self {
            cubes: doubling_family.cubes().to_vec(),
            rows,
            k: table.k_values().to_vec(),
            pairs: table.pairs().to_vec(),
            atoms: mu.len(),
        })
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k
    }

    fn pair_rows(&self) -> Vec<PairRow> {
        self.pairs.iter().map(|p| PairRow { inner: p.inner, outer: p.outer, width: p.k / self.k[p.inner] }).collect()
    }

    fn check_len(&self, t1: &SampledFunction) -> Result<()> {
        if t1.values.len() != self.atoms {
            return Err(Error::DimensionMismatch { expected: self.atoms, got: t1.values.len() });
        }
        Ok(())
    }

    /// Optimal `C` and constants `b_Q` for one sampled `T1`.
    pub fn solve(&self, mu: &AtomicMeasure, t1: &SampledFunction, epsilon: f64) -> Result<EpsilonCertificate> {
        self.check_len(t1)?;
        let sol = lp::solve_minimax(&t1.values, mu.weights(), &self.rows, &self.pair_rows())?;
        Ok(self.certificate(epsilon, sol.value, &sol.constants, &sol.cube_residuals, &sol.pair_residuals))
    }

    /// Residuals of supplied constants; `best_C` is their maximum.
    pub fn evaluate(
        &self,
        mu: &AtomicMeasure,
        t1: &SampledFunction,
        epsilon: f64,
        constants: &[f64],
    ) -> Result<EpsilonCertificate> {
        self.check_len(t1)?;
        if constants.len() != self.cubes.len() {
            return Err(Error::DimensionMismatch { expected: self.cubes.len(), got: constants.len() });
        }
        let (cube_res, pair_res) = lp::residuals(&t1.values, mu.weights(), &self.rows, &self.pair_rows(), constants);
        let value = cube_res.iter().chain(&pair_res).copied().fold(0.0, f64::max);
        Ok(self.certificate(epsilon, value, constants, &cube_res, &pair_res))
    }

    fn certificate(
        &self,
        epsilon: f64,
        best_c: f64,
        constants: &[f64],
        cube_res: &[f64],
        pair_res: &[f64],
    ) -> EpsilonCertificate {
        EpsilonCertificate {
            epsilon,
            best_c,
            cubes: self
                .cubes
                .iter()
                .enumerate()
                .map(|(i, q)| CertificateCube {
                    cube: q.clone(),
                    k: self.k[i],
                    b_q: constants[i],
                    osc_residual: cube_res[i],
                })
                .collect(),
            pairs: self
                .pairs
                .iter()
                .zip(pair_res)
                .map(|(p, &r)| CertificatePair { q: p.inner, r: p.outer, k_qr: p.k, diff_residual: r })
                .collect(),
        }
    }
}

/// Certifies condition (ii) for precomputed `T_eps 1` fields, one per `eps`.
pub fn certify_condition_ii(
    mu: &AtomicMeasure,
    fields: &[(f64, SampledFunction)],
    doubling_family: &CubeFamily,
) -> Result<T1Certificate> {
    if fields.is_empty() {
        return Err(Error::InvalidParameter("no T1 fields supplied".into()));
    }
    let problem = ConditionTwo::new(mu, doubling_family)?;
    let per_epsilon = fields
        .iter()
        .map(|(eps, t1)| problem.solve(mu, t1, *eps))
        .collect::<Result<Vec<_>>>()?;
    let best_c = per_epsilon.iter().map(|c| c.best_c).fold(0.0, f64::max);
    Ok(T1Certificate {
        best_c,
        epsilon_grid: fields.iter().map(|f| f.0).collect(),
        sup_over_eps: fields.len() > 1,
        per_epsilon,
        family_id: doubling_family.id(),
        cancellation: None,
        cancellation_warning: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CancellationPolicy {
    #[default]
    Warn,
    Refuse,
}

/// Cancellation check at the atom closest to the center of the bounding box,
/// over dyadic annuli up to the support diameter.
pub fn default_cancellation(kernel: &KernelSpec, mu: &AtomicMeasure, cap: f64) -> Result<CancellationReport> {
    let mid: Vec<f64> = mu.bounding_box().iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let x = mu
        .points()
        .min_by(|a, b| linf_dist(a, &mid).total_cmp(&linf_dist(b, &mid)))
        .expect("measure has atoms")
        .to_vec();
    let outer = mu.diameter().max(f64::MIN_POSITIVE);
    let annuli = dyadic_annuli(mu, outer);
    if annuli.is_empty() {
        return Ok(CancellationReport { worst_abs: 0.0, worst_annulus: (0.0, outer), cap, passes: true });
    }
    cancellation_check(kernel, mu, &x, &annuli, cap)
}

/// Samples `T_eps 1` over the grid and certifies condition (ii), after the
/// cancellation check dictated by `policy`.
pub fn certify_kernel(
    mu: &AtomicMeasure,
    kernel: &KernelSpec,
    grid: &TruncationGrid,
    doubling_family: &CubeFamily,
    policy: CancellationPolicy,
) -> Result<T1Certificate> {
    let report = default_cancellation(kernel, mu, DEFAULT_CANCELLATION_CAP)?;
    if !report.passes && policy == CancellationPolicy::Refuse {
        return Err(Error::InvalidParameter(format!(
            "kernel '{}' fails the cancellation check ({} > {})",
            kernel.name, report.worst_abs, report.cap
        )));
    }
    let fields = grid
        .epsilons
        .iter()
        .map(|&eps| Ok((eps, t1_field(mu, kernel, eps)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut cert = certify_condition_ii(mu, &fields, doubling_family)?;
    cert.cancellation_warning = !report.passes;
    cert.cancellation = Some(report);
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sect4Row {
    pub cube: Cube,
    pub k_2q: f64,
    pub beta_q: f64,
    pub b2_q: f64,
    pub b3_q: f64,
    pub gamma_q: f64,
    pub phi_2q: f64,
    /// `gamma_Q / phi_{2Q}`; `None` on excluded cubes.
    pub b_q: Option<f64>,
    /// `phi_{2Q} / mu(Q) * sum_{a in Q} w_a |T1(a) - b_Q|`.
    pub transfer_lhs: Option<f64>,
    /// Mean over `Q` of `|T phi - beta_Q + b_2 - T phi_2 + b_3 - T phi_3|`.
    pub transfer_rhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sect4Constants {
    pub epsilon: f64,
    pub fit: Option<LowerBoundFit>,
    /// Cubes with `K(2Q)` below this are excluded.
    pub k_min: f64,
    pub rows: Vec<Sect4Row>,
    /// Indices of excluded rows.
    pub excluded: Vec<usize>,
}

impl Sect4Constants {
    pub fn eligible(&self) -> impl Iterator<Item = (usize, &Sect4Row)> {
        self.rows.iter().enumerate().filter(|(_, r)| r.b_q.is_some())
    }

    /// The eligible cubes as a family, with their `b_Q`.
    pub fn eligible_family(&self) -> (CubeFamily, Vec<f64>) {
        let (cubes, b): (Vec<Cube>, Vec<f64>) =
            self.eligible().map(|(_, r)| (r.cube.clone(), r.b_q.expect("eligible"))).unzip();
        (CubeFamily::from_cubes(cubes), b)
    }
}

/// Builds `b_Q = (beta_Q - b_{2,Q} - b_{3,Q}) / phi_{2Q}` on each doubling cube,
/// with `phi` centered at the cube's center. `k_min` defaults to the threshold
/// `2 (c2 + 1) / c1` of the fit of `<phi_x>_{2Q}` against `K(2Q)`.
pub fn construct_b_from_phi(
    mu: &AtomicMeasure,
    op: &TruncatedOperator,
    doubling_family: &CubeFamily,
    k_min: Option<f64>,
) -> Result<Sect4Constants> {
    let e_problem = SeminormProblem::doubling(mu, doubling_family)?;
    let a_problem = SeminormProblem::all_cubes(mu, &doubling_family.dilated(2.0)?, 2.0)?;
    let t1 = op.apply(mu, &SampledFunction::constant(mu, 1.0));

    struct Partial {
        row: Sect4Row,
        avg_2q: f64,
        atoms: Vec<usize>,
        t_phi: Vec<f64>,
        t_f2: Vec<f64>,
        t_f3: Vec<f64>,
    }

    let mut partial: Vec<Option<Partial>> = (0..doubling_family.len()).map(|_| None).collect();
    let mut done_centers: Vec<Vec<f64>> = Vec::new();
    for q in doubling_family.iter() {
        if done_centers.iter().any(|c| c == &q.center) {
            continue;
        }
        done_centers.push(q.center.clone());
        let tf = test_function_at(mu, &q.center, &e_problem, doubling_family)?;
        let t_phi = op.apply(mu, &tf.values);
        let beta = e_problem.solve(mu, &t_phi)?.constant_values();
        let phi_2q = a_problem.solve(mu, &tf.values)?.constant_values();
        for (i, cube) in doubling_family.centered_at(&q.center) {
            let dec = decompose(mu, &tf.values, phi_2q[i], cube, op)?;
            let avg = tf.averages.iter().find(|a| &a.cube == cube).expect("centered cube has an average");
            partial[i] = Some(Partial {
                row: Sect4Row {
                    cube: cube.clone(),
                    k_2q: avg.k_2q,
                    beta_q: beta[i],
                    b2_q: dec.b2,
                    b3_q: dec.b3,
                    gamma_q: beta[i] - dec.b2 - dec.b3,
                    phi_2q: phi_2q[i],
                    b_q: None,
                    transfer_lhs: None,
                    transfer_rhs: None,
                },
                avg_2q: avg.avg_2q,
                atoms: dec.atoms,
                t_phi: t_phi.values.clone(),
                t_f2: dec.t_f2,
                t_f3: dec.t_f3,
            });
        }
    }
    let partial: Vec<Partial> = partial.into_iter().map(|p| p.expect("every cube visited")).collect();

    let points: Vec<(f64, f64)> = partial.iter().map(|p| (p.row.k_2q, p.avg_2q)).collect();
    let fit = fit_lower_bound(&points).ok();
    let k_min = match (k_min, fit) {
        (Some(k), _) => k,
        (None, Some(f)) if f.c1 > 0.0 => f.threshold(),
        _ => f64::INFINITY,
    };

    let mut rows = Vec::with_capacity(partial.len());
    let mut excluded = Vec::new();
    for (i, p) in partial.into_iter().enumerate() {
        let mut row = p.row;
        if row.k_2q >= k_min && row.phi_2q != 0.0 {
            let b = row.gamma_q / row.phi_2q;
            let mass: f64 = p.atoms.iter().map(|&a| mu.weight(a)).sum();
            let lhs = row.phi_2q * p.atoms.iter().map(|&a| mu.weight(a) * (t1.values[a] - b).abs()).sum::<f64>() / mass;
            let rhs = p
                .atoms
                .iter()
                .map(|&a| {
                    let v = p.t_phi[a] - row.beta_q + row.b2_q - p.t_f2[a] + row.b3_q - p.t_f3[a];
                    mu.weight(a) * v.abs()
                })
                .sum::<f64>()
                / mass;
            row.b_q = Some(b);
            row.transfer_lhs = Some(lhs);
            row.transfer_rhs = Some(rhs);
        } else {
            excluded.push(i);
        }
        rows.push(row);
    }
    if excluded.len() == rows.len() {
        return Err(Error::NoEligibleCubes);
    }
    Ok(Sect4Constants { epsilon: op.eps, fit, k_min, rows, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub label: String,
    pub epsilon: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub kernel: String,
    pub rows: Vec<ProbeRow>,
    /// Largest ratio; an empirical lower bound on the operator norm.
    pub supremum: f64,
    /// Labels skipped because `||f||_* = 0`.
    pub skipped: Vec<String>,
}

/// Probe functions: normalized `phi_x` at `centers` atoms spread over the
/// support, plus the standard basket (constants dropped), each scaled to
/// `||f||_* = 1`.
pub fn probe_basket(
    mu: &AtomicMeasure,
    doubling_family: &CubeFamily,
    centers: usize,
    random: usize,
    seed: u64,
) -> Result<Vec<SampledFunction>> {
    let problem = SeminormProblem::doubling(mu, doubling_family)?;
    let mut out = Vec::new();
    let step = (mu.len() / centers.max(1)).max(1);
    for i in (0..mu.len()).step_by(step).take(centers) {
        out.push(test_function_at(mu, mu.point(i), &problem, doubling_family)?.values);
    }
    for f in standard_basket(mu, random, seed) {
        if f.is_constant() {
            continue;
        }
        let norm = problem.solve(mu, &f)?.seminorm + l1_norm(mu, &f);
        if norm > 0.0 {
            let label = f.label.clone();
            out.push(SampledFunction { label, ..f.scaled(1.0 / norm) });
        }
    }
    Ok(out)
}

/// `||T_eps f||_* / ||f||_*` over a basket and truncation grid.
pub fn boundedness_probe(
    mu: &AtomicMeasure,
    kernel: &KernelSpec,
    basket: &[SampledFunction],
    doubling_family: &CubeFamily,
    grid: &TruncationGrid,
) -> Result<BoundednessReport> {
    let problem = SeminormProblem::doubling(mu, doubling_family)?;
    let norm = |f: &SampledFunction| -> Result<f64> { Ok(problem.solve(mu, f)?.seminorm + l1_norm(mu, f)) };
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let norms = basket.iter().map(norm).collect::<Result<Vec<_>>>()?;
    for &eps in &grid.epsilons {
        let op = TruncatedOperator::new(kernel.clone(), eps)?;
        for (f, &nf) in basket.iter().zip(&norms) {
            if nf <= 0.0 {
                if !skipped.contains(&f.label) {
                    skipped.push(f.label.clone());
                }
                continue;
            }
            let ratio = norm(&op.apply(mu, f))? / nf;
            rows.push(ProbeRow { label: f.label.clone(), epsilon: eps, ratio });
        }
    }
    let supremum = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(BoundednessReport { kernel: kernel.name.clone(), rows, supremum, skipped })
}

/// Built-in kernels for regression comparisons: the zero kernel and the
/// basic antisymmetric kernel at three scales.
pub fn kernel_suite(mu: &AtomicMeasure) -> Result<Vec<KernelSpec>> {
    let n = mu.growth_dim();
    let base = if mu.ambient_dim() == 1 && n == 1.0 { KernelSpec::cauchy1d() } else { KernelSpec::signed_power(n)? };
    let mut out = vec![KernelSpec::zero(n)?];
    out.extend([0.5, 1.0, 2.0].map(|l| base.scaled(l)));
    Ok(out)
}

/// `K(Q)` for every cube of a family.
pub fn k_values(mu: &AtomicMeasure, family: &CubeFamily) -> Result<Vec<f64>> {
    family.iter().map(|q| Ok(k_of_cube(mu, q)?.value)).collect()
}
