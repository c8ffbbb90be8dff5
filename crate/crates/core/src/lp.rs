//! Small linear-programming kernels used by the box geometry.
//!
//! Two solvers live here:
//!
//! * a parametric solver for `max c.b  s.t.  t.b = level, 0 <= b <= 1`,
//!   which is the continuous-knapsack greedy when all `t_i > 0` and a
//!   breakpoint search over the Lagrange multiplier in general;
//! * a bounded-variable phase-1 simplex for the 4-row feasibility system
//!   `A b = p, 0 <= b <= 1`, plus a Dykstra refinement that moves a feasible
//!   point to the one closest to `b = 1/2`.

use nalgebra::{Matrix4, Vector4};

/// Outcome of the single-equality box LP.
pub(crate) struct KnapsackSolution {
    pub value: f64,
    pub beta: Vec<f64>,
    /// Multiplier of the equality constraint (the marginal ratio at the cut).
    pub multiplier: f64,
}

/// Maximizes `c.b` subject to `t.b = level` and `0 <= b <= 1`.
///
/// Atoms are activated in decreasing order of `c_i - mu t_i` as the
/// multiplier `mu` sweeps upward; the activated mass `h(mu)` is monotone
/// non-increasing, so the optimum sits at the breakpoint where `h` crosses
/// `level`. Exactly one atom of the crossing group ends up fractional; ties
/// are resolved by atom index. Returns `None` when the constraint is
/// infeasible.
pub(crate) fn knapsack_support(c: &[f64], t: &[f64], level: f64) -> Option<KnapsackSolution> {
    let m = c.len();
    debug_assert_eq!(t.len(), m);

    let mut beta = vec![0.0; m];
    let mut base_value = 0.0;
    // atoms that do not touch the constraint are set by the sign of c
    let mut movers: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        if t[i] == 0.0 {
            if c[i] > 0.0 {
                beta[i] = 1.0;
                base_value += c[i];
            }
        } else {
            movers.push(i);
        }
    }

    let h_max: f64 = movers.iter().map(|&i| t[i].max(0.0)).sum();
    let h_min: f64 = movers.iter().map(|&i| t[i].min(0.0)).sum();
    let slack = 1e-12 * (1.0 + level.abs());
    if level > h_max + slack || level < h_min - slack {
        return None;
    }

    // sweep breakpoints mu = c_i / t_i in ascending order; positive-t atoms
    // start active and deactivate at their breakpoint, negative-t atoms
    // activate at theirs. Both transitions decrease the active mass.
    movers.sort_by(|&a, &b| {
        let ra = c[a] / t[a];
        let rb = c[b] / t[b];
        ra.partial_cmp(&rb).unwrap().then(a.cmp(&b))
    });
    let mut mass = h_max;
    let mut value = base_value + movers.iter().filter(|&&i| t[i] > 0.0).map(|&i| c[i]).sum::<f64>();
    // active set right now: all positive-t atoms
    for &i in movers.iter().filter(|&&i| t[i] > 0.0) {
        beta[i] = 1.0;
    }
    if mass <= level + slack {
        // constraint already at its maximum attainable value
        return Some(KnapsackSolution { value, beta, multiplier: f64::NEG_INFINITY });
    }

    let mut k = 0;
    while k < movers.len() {
        let mu = c[movers[k]] / t[movers[k]];
        // whole group sharing this breakpoint (within exact float equality;
        // index order within the group fixes the fractional atom)
        let mut group_end = k;
        while group_end < movers.len() && c[movers[group_end]] / t[movers[group_end]] == mu {
            group_end += 1;
        }
        // mass and value change if the whole group transitions
        let mut group_mass = 0.0;
        for &i in &movers[k..group_end] {
            group_mass += t[i].abs();
        }
        if mass - group_mass >= level - slack {
            // fully transition the group
            for &i in &movers[k..group_end] {
                if t[i] > 0.0 {
                    beta[i] = 0.0;
                    value -= c[i];
                } else {
                    beta[i] = 1.0;
                    value += c[i];
                }
                mass -= t[i].abs();
            }
            if (mass - level).abs() <= slack {
                return Some(KnapsackSolution { value, beta, multiplier: mu });
            }
            k = group_end;
        } else {
            // the crossing happens inside this group: transition atoms in
            // index order until the remaining deficit fits in one atom
            let mut need = mass - level; // > 0, amount of |t| still to remove
            let mut idx: Vec<usize> = movers[k..group_end].to_vec();
            idx.sort_unstable();
            for &i in &idx {
                let step = t[i].abs();
                if step <= need + slack && (step - need).abs() > slack {
                    if t[i] > 0.0 {
                        beta[i] = 0.0;
                        value -= c[i];
                    } else {
                        beta[i] = 1.0;
                        value += c[i];
                    }
                    need -= step;
                } else {
                    let frac = need / step;
                    if t[i] > 0.0 {
                        beta[i] = 1.0 - frac;
                        value -= frac * c[i];
                    } else {
                        beta[i] = frac;
                        value += frac * c[i];
                    }
                    return Some(KnapsackSolution { value, beta, multiplier: mu });
                }
            }
            // exhausted by exact cancellation
            return Some(KnapsackSolution { value, beta, multiplier: mu });
        }
    }
    // mass == level at the end of the sweep
    Some(KnapsackSolution { value, beta, multiplier: f64::INFINITY })
}

/// Result of the 4-row box feasibility solve.
pub(crate) struct FeasibilityResult {
    pub feasible: bool,
    pub beta: Vec<f64>,
    pub residual: f64,
}

const FEAS_TOL: f64 = 1e-11;

/// Phase-1 bounded-variable simplex for `A b = p, 0 <= b <= 1` where `A` is
/// given by its `m` columns in R^4. Minimizes the L1 norm of artificial
/// variables; feasible iff the optimum is (numerically) zero. Bland's rule
/// keeps the pivoting finite.
pub(crate) fn box_feasibility(columns: &[Vector4<f64>], p: &Vector4<f64>) -> FeasibilityResult {
    let m = columns.len();
    // variable layout: 0..m structural (bounds [0,1]),
    // m..m+4 artificial + (bounds [0,inf), sign +1), m+4..m+8 artificial -
    let n_total = m + 8;
    let col = |j: usize| -> Vector4<f64> {
        if j < m {
            columns[j]
        } else if j < m + 4 {
            let mut e = Vector4::zeros();
            e[j - m] = 1.0;
            e
        } else {
            let mut e = Vector4::zeros();
            e[j - m - 4] = -1.0;
            e
        }
    };
    let cost = |j: usize| -> f64 { if j < m { 0.0 } else { 1.0 } };
    let upper = |j: usize| -> f64 { if j < m { 1.0 } else { f64::INFINITY } };

    // start: structurals at lower bound, artificials matched to the sign of p
    let mut basis = [0usize; 4];
    for i in 0..4 {
        basis[i] = if p[i] >= 0.0 { m + i } else { m + 4 + i };
    }
    let mut at_upper = vec![false; n_total];
    let mut in_basis = vec![false; n_total];
    for &j in &basis {
        in_basis[j] = true;
    }

    let basis_matrix = |basis: &[usize; 4]| -> Matrix4<f64> {
        Matrix4::from_columns(&[col(basis[0]), col(basis[1]), col(basis[2]), col(basis[3])])
    };

    let max_iters = 200 * (m + 8);
    for _ in 0..max_iters {
        let bmat = basis_matrix(&basis);
        let lu = bmat.lu();
        // basic values: B x_B = p - N x_N (nonbasic at bounds)
        let mut rhs = *p;
        for j in 0..n_total {
            if !in_basis[j] && at_upper[j] {
                rhs -= col(j) * upper(j);
            }
        }
        let x_b = match lu.solve(&rhs) {
            Some(x) => x,
            None => break,
        };
        // duals: B^T y = c_B
        let c_b = Vector4::new(cost(basis[0]), cost(basis[1]), cost(basis[2]), cost(basis[3]));
        let y = match bmat.transpose().lu().solve(&c_b) {
            Some(y) => y,
            None => break,
        };
        // pricing with Bland's rule
        let mut entering = None;
        for j in 0..n_total {
            if in_basis[j] {
                continue;
            }
            let d = cost(j) - y.dot(&col(j));
            let improving = if at_upper[j] { d > FEAS_TOL } else { d < -FEAS_TOL };
            if improving {
                entering = Some((j, d));
                break;
            }
        }
        let (j_in, d_in) = match entering {
            Some(e) => e,
            None => break, // optimal
        };
        // direction of basic variables as the entering variable moves
        let a_in = col(j_in);
        let dir = match lu.solve(&a_in) {
            Some(d) => d,
            None => break,
        };
        // entering moves up from lower bound (sign +1) or down from upper (-1)
        let sign = if at_upper[j_in] { -1.0 } else { 1.0 };
        let _ = d_in;
        // ratio test
        let mut limit = upper(j_in); // bound-to-bound flip
        let mut leaving: Option<(usize, bool)> = None; // (basis slot, leaves at upper?)
        for i in 0..4 {
            let delta = -sign * dir[i]; // change of basic i per unit of entering
            if delta < -1e-13 {
                // basic decreases toward 0
                let step = x_b[i] / (-delta);
                if step < limit - 1e-13 {
                    limit = step;
                    leaving = Some((i, false));
                }
            } else if delta > 1e-13 {
                let ub = upper(basis[i]);
                if ub.is_finite() {
                    let step = (ub - x_b[i]) / delta;
                    if step < limit - 1e-13 {
                        limit = step;
                        leaving = Some((i, true));
                    }
                }
            }
        }
        if !limit.is_finite() {
            break; // unbounded phase-1 cannot happen; bail defensively
        }
        match leaving {
            None => {
                // entering flips bound to bound
                at_upper[j_in] = !at_upper[j_in];
            }
            Some((slot, leaves_at_upper)) => {
                let j_out = basis[slot];
                in_basis[j_out] = false;
                at_upper[j_out] = leaves_at_upper;
                basis[slot] = j_in;
                in_basis[j_in] = true;
                at_upper[j_in] = false;
            }
        }
    }

    // recover the full solution
    let bmat = basis_matrix(&basis);
    let mut rhs = *p;
    for j in 0..n_total {
        if !in_basis[j] && at_upper[j] {
            rhs -= col(j) * upper(j);
        }
    }
    let x_b = bmat
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| bmat.svd(true, true).solve(&rhs, 1e-14).unwrap());
    let mut beta = vec![0.0; m];
    for j in 0..m {
        if at_upper[j] && !in_basis[j] {
            beta[j] = 1.0;
        }
    }
    for i in 0..4 {
        if basis[i] < m {
            beta[basis[i]] = x_b[i].clamp(0.0, 1.0);
        }
    }
    let mut recon = Vector4::zeros();
    for (j, b) in beta.iter().enumerate() {
        recon += columns[j] * *b;
    }
    let residual = (recon - p).norm();
    FeasibilityResult { feasible: residual <= 1e-9, beta, residual }
}

/// Dykstra alternating projections onto `{A b = p}` and `[0,1]^m`, starting
/// from `b = 1/2`; converges to the feasible point nearest the center, which
/// makes the response for `-x` the exact row swap of the response for `x`.
/// Returns `None` if the target residual is not reached.
pub(crate) fn center_seeking_feasible(
    columns: &[Vector4<f64>],
    p: &Vector4<f64>,
    max_iters: usize,
) -> Option<Vec<f64>> {
    let m = columns.len();
    let mut gram = Matrix4::zeros();
    for c in columns {
        gram += c * c.transpose();
    }
    let lu = gram.lu();
    if !lu.is_invertible() {
        return None;
    }
    let apply = |b: &[f64]| -> Vector4<f64> {
        let mut out = Vector4::zeros();
        for (c, &v) in columns.iter().zip(b) {
            out += c * v;
        }
        out
    };
    let mut b = vec![0.5; m];
    let mut corr = vec![0.0; m];
    let mut y = vec![0.0; m];
    for iter in 0..max_iters {
        // project onto the affine set
        let resid = apply(&b) - p;
        let mult = lu.solve(&resid)?;
        for (j, cj) in columns.iter().enumerate() {
            y[j] = b[j] - cj.dot(&mult);
        }
        // project onto the box with Dykstra's correction
        let mut clipped = false;
        for j in 0..m {
            let z = y[j] + corr[j];
            let w = z.clamp(0.0, 1.0);
            corr[j] = z - w;
            if w != z {
                clipped = true;
            }
            b[j] = w;
        }
        if !clipped || iter % 32 == 31 {
            let r = (apply(&b) - p).norm();
            if r <= 1e-10 {
                return Some(b);
            }
        }
    }
    let r = (apply(&b) - p).norm();
    if r <= 1e-10 {
        Some(b)
    } else {
        None
    }
}
