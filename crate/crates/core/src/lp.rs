//! Minimax linear programs over per-cube constants.
//!
//! Every seminorm and certificate in this crate reduces to the same problem:
//! given values `v_a` with weights `w_a`, cubes `Q` with denominators `D_Q`
//! and nested pairs `(Q, R)` with widths `W_QR`, find constants `c_Q` and the
//! least `t` such that
//!
//! ```text
//!     sum_{a in Q} w_a |v_a - c_Q| <= t D_Q        for every cube
//!     |c_Q - c_R|                  <= t W_QR       for every pair
//! ```
//!
//! The absolute values are linearized by supporting cuts: for any sign
//! pattern `s_a`, `sum w_a s_a (v_a - c) <= sum w_a |v_a - c|`, with equality
//! at the pattern of the current `c`. Cuts and pair rows are generated lazily
//! and the LP is re-solved warm until no row is violated, which gives the
//! optimum of the full program.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, Variable};

use crate::error::{Error, Result};

const MAX_ROUNDS: usize = 2000;
const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub(crate) struct CubeRows {
    pub atoms: Vec<usize>,
    pub denom: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PairRow {
    pub inner: usize,
    pub outer: usize,
    pub width: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct MinimaxSolution {
    /// Largest residual of the returned constants, over every row.
    pub value: f64,
    pub constants: Vec<f64>,
    pub cube_residuals: Vec<f64>,
    pub pair_residuals: Vec<f64>,
}

pub(crate) fn oscillation(values: &[f64], weights: &[f64], atoms: &[usize], c: f64) -> f64 {
    atoms.iter().map(|&a| weights[a] * (values[a] - c).abs()).sum()
}

/// Residuals of given constants, `g_Q(c_Q) / D_Q` and `|c_Q - c_R| / W_QR`.
pub(crate) fn residuals(
    values: &[f64],
    weights: &[f64],
    cubes: &[CubeRows],
    pairs: &[PairRow],
    constants: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let cube_res = cubes
        .iter()
        .zip(constants)
        .map(|(q, &c)| {
            if q.atoms.is_empty() {
                0.0
            } else {
                oscillation(values, weights, &q.atoms, c) / q.denom
            }
        })
        .collect();
    let pair_res = pairs
        .iter()
        .map(|p| (constants[p.inner] - constants[p.outer]).abs() / p.width)
        .collect();
    (cube_res, pair_res)
}

fn weighted_median(values: &[f64], weights: &[f64], atoms: &[usize]) -> f64 {
    let mut order: Vec<usize> = atoms.to_vec();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let half = atoms.iter().map(|&a| weights[a]).sum::<f64>() / 2.0;
    let mut acc = 0.0;
    for &a in &order {
        acc += weights[a];
        if acc >= half {
            return values[a];
        }
    }
    values[*order.last().expect("nonempty cube")]
}

struct Model {
    solution: Option<Solution>,
    t: Variable,
    c: Vec<Variable>,
}

impl Model {
    fn add(&mut self, terms: &[(Variable, f64)], rhs: f64) -> Result<()> {
        let mut expr = LinearExpr::empty();
        for &(v, coef) in terms {
            expr.add(v, coef);
        }
        let sol = self.solution.take().expect("model holds a solution");
        let outcome = sol
            .add_constraint(expr, ComparisonOp::Le, rhs)
            .map_err(|e| Error::SolverFailure(e.to_string()))?;
        self.solution = Some(
            outcome
                .into_solution()
                .map_err(|_| Error::SolverFailure("solve interrupted".into()))?,
        );
        Ok(())
    }

    fn t(&self) -> f64 {
        self.solution.as_ref().expect("solution").var_value_raw(self.t)
    }

    fn c(&self, i: usize) -> f64 {
        self.solution.as_ref().expect("solution").var_value_raw(self.c[i])
    }
}

/// Cut `sum_a w_a s_a (v_a - c_Q) / D_Q <= t` for the sign pattern of `pivot`.
fn cut_terms(
    values: &[f64],
    weights: &[f64],
    cube: &CubeRows,
    pivot: f64,
    all_sign: Option<f64>,
) -> (f64, f64) {
    let mut slope = 0.0;
    let mut offset = 0.0;
    for &a in &cube.atoms {
        let s = all_sign.unwrap_or(if values[a] >= pivot { 1.0 } else { -1.0 });
        slope += weights[a] * s;
        offset += weights[a] * s * values[a];
    }
    (slope / cube.denom, offset / cube.denom)
}

pub(crate) fn solve_minimax(
    values: &[f64],
    weights: &[f64],
    cubes: &[CubeRows],
    pairs: &[PairRow],
) -> Result<MinimaxSolution> {
    for q in cubes {
        if !q.atoms.is_empty() && !(q.denom > 0.0 && q.denom.is_finite()) {
            return Err(Error::InvalidParameter("cube denominator must be positive".into()));
        }
    }
    for p in pairs {
        if !(p.width > 0.0 && p.width.is_finite()) {
            return Err(Error::InvalidParameter("pair width must be positive".into()));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("sampled values must be finite".into()));
    }

    let used = || cubes.iter().flat_map(|q| q.atoms.iter().map(|&a| values[a]));
    let lo = used().fold(f64::INFINITY, f64::min);
    let hi = used().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        let constants = vec![c; cubes.len()];
        let (cube_residuals, pair_residuals) = residuals(values, weights, cubes, pairs, &constants);
        return Ok(MinimaxSolution { value: 0.0, constants, cube_residuals, pair_residuals });
    }

    // Affine rescaling to [-1/2, 1/2]; the program is equivariant under it.
    let mid = 0.5 * (lo + hi);
    let spread = hi - lo;
    let scaled: Vec<f64> = values.iter().map(|v| (v - mid) / spread).collect();

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let t = problem.add_var(1.0, (0.0, f64::INFINITY));
    let c: Vec<Variable> = cubes.iter().map(|_| problem.add_var(0.0, (-0.5, 0.5))).collect();
    let first = problem.solve().map_err(|e| Error::SolverFailure(e.to_string()))?;
    let mut model = Model {
        solution: Some(
            first
                .into_solution()
                .map_err(|_| Error::SolverFailure("solve interrupted".into()))?,
        ),
        t,
        c,
    };

    for (i, q) in cubes.iter().enumerate() {
        if q.atoms.is_empty() {
            continue;
        }
        let median = weighted_median(&scaled, weights, &q.atoms);
        for sign in [Some(1.0), Some(-1.0), None] {
            let (slope, offset) = cut_terms(&scaled, weights, q, median, sign);
            model.add(&[(model.c[i], -slope), (model.t, -1.0)], -offset)?;
        }
    }

    let mut constants = vec![0.0; cubes.len()];
    for round in 0.. {
        if round == MAX_ROUNDS {
            return Err(Error::SolverFailure("cutting-plane loop did not converge".into()));
        }
        let t_now = model.t();
        for (i, slot) in constants.iter_mut().enumerate() {
            *slot = model.c(i);
        }
        let bar = t_now * (1.0 + REL_TOL) + ABS_TOL;
        let (cube_res, pair_res) = residuals(&scaled, weights, cubes, pairs, &constants);

        let mut added = 0;
        for (i, q) in cubes.iter().enumerate() {
            if cube_res[i] > bar {
                let (slope, offset) = cut_terms(&scaled, weights, q, constants[i], None);
                model.add(&[(model.c[i], -slope), (model.t, -1.0)], -offset)?;
                added += 1;
            }
        }
        let mut violated: Vec<(usize, f64)> =
            pair_res.iter().copied().enumerate().filter(|&(_, r)| r > bar).collect();
        violated.sort_by(|a, b| b.1.total_cmp(&a.1));
        for &(k, _) in violated.iter().take(4 * cubes.len().max(16)) {
            let p = pairs[k];
            let (hi_i, lo_i) = if constants[p.inner] >= constants[p.outer] {
                (p.inner, p.outer)
            } else {
                (p.outer, p.inner)
            };
            let inv = 1.0 / p.width;
            model.add(&[(model.c[hi_i], inv), (model.c[lo_i], -inv), (model.t, -1.0)], 0.0)?;
            added += 1;
        }
        if added == 0 {
            break;
        }
    }

    let constants: Vec<f64> = constants.iter().map(|c| mid + spread * c).collect();
    let (cube_residuals, pair_residuals) = residuals(values, weights, cubes, pairs, &constants);
    let value = cube_residuals.iter().chain(&pair_residuals).copied().fold(0.0, f64::max);
    Ok(MinimaxSolution { value, constants, cube_residuals, pair_residuals })
}
