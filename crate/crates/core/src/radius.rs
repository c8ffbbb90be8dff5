//! Principal and critical radii of local hidden state models.
//!
//! The principal radius of an ansatz is the largest factor by which the
//! steering ellipsoid can be inflated about its center while staying inside
//! the box section; in the pulled-back frame this is the minimum of the
//! section's support function over unit directions. The critical radius is
//! the supremum of the principal radius over all ansatz measures: exact in
//! closed form for T-states, lower-bounded by projected supergradient ascent
//! on grid weights otherwise. A state is unsteerable precisely when its
//! critical radius reaches 1.

use crate::ansatz::{fibonacci_grid, normalize_jevtic, AnsatzError, SphereMeasure};
use crate::geometry::{build_box, pull_back, section_support_solution, GeomError, PulledBackSection};
use crate::qstate::{EprMap, StateError, TStateForm, TwoQubitState, TSTATE_TOL};
use crate::{Vec3, Vec4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RadiusError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// How a radius value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact closed form for a T-state with the proven-optimal ansatz.
    TstateClosedForm,
    /// Principal radius of one explicit discrete ansatz (a lower bound).
    DiscreteAnsatz,
    /// Best ansatz found by weight optimization (a lower bound).
    OptimizedLowerBound,
    /// Degenerate state map: the state is separable, hence unsteerable.
    DegenerateSeparable,
}

impl Method {
    fn is_exact(self) -> bool {
        matches!(self, Method::TstateClosedForm | Method::DegenerateSeparable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Steerable,
    Unsteerable,
    Marginal,
}

/// A radius value with its provenance, error band, and steerability verdict.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusResult {
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
    pub verdict: Verdict,
    /// Direction achieving the minimum support, in the pulled-back frame.
    pub min_direction: Option<[f64; 3]>,
    /// Identifier of the ansatz behind the value.
    pub ansatz: String,
}

/// Exact methods may certify either side of the threshold; lower bounds may
/// only ever certify unsteerability.
fn verdict_for(method: Method, value: f64, err: f64) -> Verdict {
    if value - err >= 1.0 {
        Verdict::Unsteerable
    } else if method.is_exact() && value + err < 1.0 {
        Verdict::Steerable
    } else {
        Verdict::Marginal
    }
}

/// Knobs for [`critical_radius`] and [`optimize_ansatz`].
#[derive(Debug, Clone)]
pub struct OptimizerBudget {
    pub grid: usize,
    pub iters: usize,
    pub seed: u64,
    pub directions: usize,
    pub tstate_tol: f64,
    pub quad_rel_tol: f64,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self {
            grid: 1024,
            iters: 200,
            seed: 0,
            directions: 512,
            tstate_tol: TSTATE_TOL,
            quad_rel_tol: 1e-8,
        }
    }
}

/// Quasi-uniform direction set for support sampling.
fn direction_set(count: usize) -> Vec<Vec3> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (i as f64) / golden;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

fn support_value(section: &PulledBackSection, d: &Vec3) -> Result<f64, GeomError> {
    section_support_solution(section, d).map(|s| s.value)
}

/// Pattern search on the sphere around `start`, shrinking the step until the
/// support stops improving.
fn polish_direction(
    section: &PulledBackSection,
    start: Vec3,
    start_value: f64,
) -> Result<(Vec3, f64), GeomError> {
    let mut best_d = start;
    let mut best_v = start_value;
    let mut step = 0.2;
    while step > 1e-5 {
        // tangent frame at the current best direction
        let helper = if best_d.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = best_d.cross(&helper).normalize();
        let w = best_d.cross(&u);
        let mut improved = false;
        for cand in [
            (best_d + step * u).normalize(),
            (best_d - step * u).normalize(),
            (best_d + step * w).normalize(),
            (best_d - step * w).normalize(),
        ] {
            let v = support_value(section, &cand)?;
            if v < best_v {
                best_v = v;
                best_d = cand;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((best_d, best_v))
}

/// Minimum of the section support over the sphere: coarse quasi-uniform
/// sweep, then local polish around the best candidates. Returns the value,
/// the minimizing direction, and a refinement-based error estimate.
fn min_support(
    section: &PulledBackSection,
    directions: usize,
) -> Result<(f64, Vec3, f64), GeomError> {
    let dirs = direction_set(directions.max(16));
    let values: Vec<f64> = dirs
        .par_iter()
        .map(|d| support_value(section, d))
        .collect::<Result<_, _>>()?;
    // minimum of the coarse sweep restricted to the first quarter, as a
    // refinement reference
    let quarter = values
        .iter()
        .take((dirs.len() / 4).max(1))
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..dirs.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let grid_min = values[order[0]];

    let mut best = (dirs[order[0]], grid_min);
    for &i in order.iter().take(10) {
        let (d, v) = polish_direction(section, dirs[i], values[i])?;
        if v < best.1 {
            best = (d, v);
        }
    }
    let err = (quarter - best.1).abs().max(grid_min - best.1).max(1e-12);
    Ok((best.1, best.0, err))
}

/// Principal radius of a discrete ansatz: the largest scaling of the
/// steering ellipsoid that fits inside the box section.
///
/// The measure's weights are first re-projected onto the exact normalization
/// and barycenter constraints so the principal vertex coincides with Bob's
/// reduced state.
pub fn principal_radius(
    measure: &SphereMeasure,
    map: &EprMap,
    directions: usize,
) -> Result<RadiusResult, RadiusError> {
    if map.degenerate() {
        return Err(GeomError::DegenerateMap.into());
    }
    let mut measure = measure.clone();
    measure.project_weights(map.bob_bloch());
    let bx = build_box(&measure, map)?;
    let section = pull_back(&bx, map)?;
    let (value, dir, err) = min_support(&section, directions)?;
    let value = value.max(0.0);
    Ok(RadiusResult {
        value,
        method: Method::DiscreteAnsatz,
        error_estimate: err,
        verdict: verdict_for(Method::DiscreteAnsatz, value, err),
        min_direction: Some([dir.x, dir.y, dir.z]),
        ansatz: format!("discrete[{} atoms]", measure.len()),
    })
}

/// Closed-form critical radius of a T-state: `2 pi N_T |t1 t2 t3|`,
/// with the normalization constant certified by quadrature.
pub fn tstate_critical_radius(form: &TStateForm) -> Result<RadiusResult, RadiusError> {
    tstate_critical_radius_with_tol(form, 1e-8)
}

pub fn tstate_critical_radius_with_tol(
    form: &TStateForm,
    quad_rel_tol: f64,
) -> Result<RadiusResult, RadiusError> {
    let density = normalize_jevtic(form.t_diag, quad_rel_tol)?;
    let det = (form.t_diag.x * form.t_diag.y * form.t_diag.z).abs();
    let value = 2.0 * std::f64::consts::PI * density.n_t() * det;
    let err = (quad_rel_tol.max(density.quad_error()) * value).max(1e-14);
    Ok(RadiusResult {
        value,
        method: Method::TstateClosedForm,
        error_estimate: err,
        verdict: verdict_for(Method::TstateClosedForm, value, err),
        min_direction: None,
        ansatz: "jevtic-closed-form".into(),
    })
}

/// Critical radius of an arbitrary two-qubit state.
///
/// Dispatch: degenerate state map means the state is separable and therefore
/// unsteerable; maximally mixed marginals route to the exact T-state value;
/// everything else gets the optimized lower bound, which can certify
/// unsteerability but never steerability.
pub fn critical_radius(
    state: &TwoQubitState,
    budget: &OptimizerBudget,
) -> Result<RadiusResult, RadiusError> {
    let map = state.epr_map();
    if map.degenerate() {
        return Ok(RadiusResult {
            value: f64::INFINITY,
            method: Method::DegenerateSeparable,
            error_estimate: 0.0,
            verdict: Verdict::Unsteerable,
            min_direction: None,
            ansatz: "none (separable)".into(),
        });
    }
    match map.canonicalize_tstate(budget.tstate_tol) {
        Ok(form) => tstate_critical_radius_with_tol(&form, budget.quad_rel_tol),
        Err(StateError::NotTState { .. }) => {
            let (_, mut result) = optimize_ansatz(&map, budget.grid, budget.iters, budget.seed)?;
            result.verdict = verdict_for(Method::OptimizedLowerBound, result.value, result.error_estimate);
            Ok(result)
        }
        Err(e) => Err(e.into()),
    }
}

/// Pullback coordinates of the unweighted lifted atoms `(1, n_i)`;
/// generator `i` of a weighted box is `w_i` times this.
fn unit_pullbacks(measure: &SphereMeasure, map: &EprMap) -> Result<(Vec<f64>, Vec<Vec3>), RadiusError> {
    let inv = map
        .phi()
        .try_inverse()
        .ok_or(GeomError::DegenerateMap)?;
    let mut taus = Vec::with_capacity(measure.len());
    let mut us = Vec::with_capacity(measure.len());
    for a in measure.atoms() {
        let pb = inv * Vec4::new(1.0, a.n.x, a.n.y, a.n.z);
        taus.push(pb[0]);
        us.push(Vec3::new(pb[1], pb[2], pb[3]));
    }
    Ok((taus, us))
}

/// Maximizes the principal radius over atom weights on a fixed grid by
/// projected supergradient ascent.
///
/// The objective `w -> min_d h(d; w)` is concave (each support value is the
/// optimum of a linear program in which the weights only tighten the upper
/// bounds), so the ascent converges globally. The supergradient at the
/// minimizing direction is the vector of reduced costs of the saturated
/// atoms; projection restores `sum w = 1`, `w >= 0`, and the barycenter
/// constraint after every step. Deterministic for a fixed seed.
pub fn optimize_ansatz(
    map: &EprMap,
    grid: usize,
    iters: usize,
    seed: u64,
) -> Result<(SphereMeasure, RadiusResult), RadiusError> {
    if map.degenerate() {
        return Err(GeomError::DegenerateMap.into());
    }
    let mut measure = fibonacci_grid(grid, grid % 2 == 0, None)?;
    let target = *map.bob_bloch();
    measure.project_weights(&target);
    let (taus, us) = unit_pullbacks(&measure, map)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grad_dirs = direction_set(128);

    let mut w = measure.weights();
    let mut best_w = w.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut ascended = false;

    for k in 0..iters {
        // seeded random rotation of the direction set decorrelates grid
        // artifacts between iterations
        let rot = random_rotation(&mut rng);
        let section = PulledBackSection {
            gen_t: w.iter().zip(&taus).map(|(w, t)| w * t).collect(),
            gen_v: w.iter().zip(&us).map(|(w, u)| *w * u).collect(),
            level: 1.0,
        };
        let evals: Vec<(f64, Vec<f64>, f64, Vec3)> = grad_dirs
            .par_iter()
            .map(|d0| {
                let d = rot * d0;
                let sol = section_support_solution(&section, &d)?;
                Ok((sol.value, sol.beta, sol.multiplier, d))
            })
            .collect::<Result<_, GeomError>>()?;
        let (value, beta, mu, d) = evals
            .into_iter()
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .expect("non-empty direction set");

        if value > best_val {
            if value > best_val + 1e-12 && k > 0 {
                ascended = true;
            }
            best_val = value;
            best_w = w.clone();
        }

        // reduced costs of the saturated atoms
        let mut g = vec![0.0; w.len()];
        let mut gnorm2 = 0.0;
        for i in 0..w.len() {
            if beta[i] > 0.0 && mu.is_finite() {
                g[i] = beta[i] * (d.dot(&us[i]) - mu * taus[i]);
                gnorm2 += g[i] * g[i];
            }
        }
        let gnorm = gnorm2.sqrt();
        if gnorm < 1e-14 {
            break;
        }
        let step = 0.05 / (gnorm * ((k + 1) as f64).sqrt());
        for i in 0..w.len() {
            w[i] += step * g[i];
        }
        let mut trial = measure.with_weights(&w);
        trial.project_weights(&target);
        w = trial.weights();
    }

    let best = measure.with_weights(&best_w);
    let mut result = principal_radius(&best, map, 512)?;
    result.method = Method::OptimizedLowerBound;
    result.verdict = verdict_for(Method::OptimizedLowerBound, result.value, result.error_estimate);
    result.ansatz = format!(
        "optimized[grid {grid}, iters {iters}, seed {seed}{}]",
        if ascended { "" } else { ", no ascent" }
    );
    Ok((best, result))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> nalgebra::Rotation3<f64> {
    let axis = loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() > 1e-3 && v.norm() <= 1.0 {
            break v.normalize();
        }
    };
    let angle = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
}

/// Outcome of the ansatz-optimality property check.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub trials: usize,
    pub violations: usize,
    pub base_radius: f64,
    pub closed_form: f64,
    pub tolerance: f64,
    /// Largest observed `r(J+v) - r(J)` over all trials.
    pub max_excess: f64,
}

/// Verifies that random centrally symmetric zero-sum weight perturbations of
/// the discretized optimal density never raise the principal radius beyond
/// the discretization budget (three times the observed discretization error).
pub fn perturbation_test(
    form: &TStateForm,
    trials: usize,
    seed: u64,
) -> Result<PerturbationReport, RadiusError> {
    const GRID: usize = 1024;
    const DIRECTIONS: usize = 256;
    let map = form.canonical_map();
    let density = normalize_jevtic(form.t_diag, 1e-8)?;
    let base_measure = fibonacci_grid(GRID, true, Some(&density))?;
    let base = principal_radius(&base_measure, &map, DIRECTIONS)?;
    let closed = tstate_critical_radius(form)?;
    let disc_err = (base.value - closed.value).abs() + base.error_estimate;
    let tolerance = 3.0 * disc_err.max(1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = base_measure.weights();
    let half = GRID / 2;
    let mut max_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        // one coefficient per antipodal pair, recentered to zero sum and
        // scaled so all weights stay positive
        let mut delta: Vec<f64> = (0..half).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean: f64 = delta
            .iter()
            .zip(&weights[..half])
            .map(|(d, w)| d * 2.0 * w)
            .sum();
        for d in delta.iter_mut() {
            *d -= mean;
        }
        let max_mag = delta.iter().map(|d| d.abs()).fold(0.0f64, f64::max);
        let scale = 0.45 / max_mag.max(1e-12);
        let v: Vec<f64> = (0..GRID)
            .map(|i| weights[i] * scale * delta[i % half])
            .collect();
        let perturbed = base_measure.perturbed(&v)?;
        let r = principal_radius(&perturbed, &map, DIRECTIONS)?;
        let excess = r.value - base.value;
        if excess > max_excess {
            max_excess = excess;
        }
        if excess > tolerance {
            violations += 1;
        }
    }
    Ok(PerturbationReport {
        trials,
        violations,
        base_radius: base.value,
        closed_form: closed.value,
        tolerance,
        max_excess,
    })
}
