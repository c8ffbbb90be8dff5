//! Convex geometry of the polyhedral box spanned by hidden-state atoms.
//!
//! An ansatz measure with atoms `(w_i, n_i)` generates the zonotope
//! `{sum beta_i w_i (1, n_i) : 0 <= beta_i <= 1}` in operator coordinates.
//! Steerability questions reduce to sections of this box by the trace-one
//! hyperplane. Pulling everything back through the inverse state map turns
//! the tilted hyperplane into `{x_0 = 1}` and the steering ellipsoid into the
//! unit ball, so one code path serves T-states and general states alike.

use crate::ansatz::SphereMeasure;
use crate::lp;
use crate::qstate::EprMap;
use crate::{Vec3, Vec4};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("state map is degenerate; the box section is not defined")]
    DegenerateMap,
    #[error("hyperplane section is empty")]
    EmptySection,
}

/// The zonotope generated by the lifted atoms `w_i (1, n_i)`.
#[derive(Debug, Clone)]
pub struct SteeringBox {
    generators: Vec<Vec4>,
    principal_vertex: Vec4,
}

impl SteeringBox {
    pub fn generators(&self) -> &[Vec4] {
        &self.generators
    }

    /// Sum of all generators; equals Bob's reduced-state coordinates when
    /// the measure satisfies the barycenter condition.
    pub fn principal_vertex(&self) -> &Vec4 {
        &self.principal_vertex
    }
}

/// Lifts a discrete measure to box generators.
pub fn build_box(measure: &SphereMeasure, _map: &EprMap) -> Result<SteeringBox, GeomError> {
    if measure.is_empty() {
        return Err(GeomError::EmptyMeasure);
    }
    let generators: Vec<Vec4> = measure
        .atoms()
        .iter()
        .map(|a| Vec4::new(a.weight, a.weight * a.n.x, a.weight * a.n.y, a.weight * a.n.z))
        .collect();
    let principal_vertex = generators.iter().sum();
    Ok(SteeringBox { generators, principal_vertex })
}

/// Box generators pulled back through the inverse state map.
///
/// In these coordinates the trace-one image hyperplane is `{x_0 = level}`
/// with `level = 1`, and the steering ellipsoid is the unit ball centered at
/// `(1, 0, 0, 0)`.
#[derive(Debug, Clone)]
pub struct PulledBackSection {
    pub gen_t: Vec<f64>,
    pub gen_v: Vec<Vec3>,
    pub level: f64,
}

/// Maps every generator through the inverse of the state map.
pub fn pull_back(bx: &SteeringBox, map: &EprMap) -> Result<PulledBackSection, GeomError> {
    if map.degenerate() {
        return Err(GeomError::DegenerateMap);
    }
    let inv = map.phi().try_inverse().ok_or(GeomError::DegenerateMap)?;
    let mut gen_t = Vec::with_capacity(bx.generators.len());
    let mut gen_v = Vec::with_capacity(bx.generators.len());
    for g in &bx.generators {
        let pb = inv * g;
        gen_t.push(pb[0]);
        gen_v.push(Vec3::new(pb[1], pb[2], pb[3]));
    }
    Ok(PulledBackSection { gen_t, gen_v, level: 1.0 })
}

/// Support function of the hyperplane section relative to the section center.
///
/// Solves `max sum beta_i (d . v_i)` subject to `sum beta_i t_i = level` and
/// `0 <= beta_i <= 1`. With all `t_i > 0` this is the classic continuous
/// knapsack (sort by ratio, fill, split one atom); mixed signs go through the
/// same parametric multiplier sweep.
pub fn section_support(section: &PulledBackSection, direction: &Vec3) -> Result<f64, GeomError> {
    section_support_solution(section, direction).map(|s| s.value)
}

pub(crate) fn section_support_solution(
    section: &PulledBackSection,
    direction: &Vec3,
) -> Result<lp::KnapsackSolution, GeomError> {
    let c: Vec<f64> = section.gen_v.iter().map(|v| direction.dot(v)).collect();
    lp::knapsack_support(&c, &section.gen_t, section.level).ok_or(GeomError::EmptySection)
}

/// Outcome of a box membership test, with a recombination witness when
/// feasible and the best achieved residual otherwise.
#[derive(Debug, Clone)]
pub struct Membership {
    pub feasible: bool,
    pub beta: Vec<f64>,
    pub residual: f64,
}

/// Decides whether `point` lies in the box, i.e. whether
/// `sum beta_i g_i = point` has a solution with `beta in [0,1]^m`.
pub fn box_membership(bx: &SteeringBox, point: &Vec4) -> Membership {
    let r = lp::box_feasibility(&bx.generators, point);
    Membership { feasible: r.feasible, beta: r.beta, residual: r.residual }
}

/// Feasible point of the box-membership system closest to `beta = 1/2`,
/// when one can be certified; used to pick a canonical response.
pub(crate) fn centered_membership_witness(bx: &SteeringBox, point: &Vec4) -> Option<Vec<f64>> {
    lp::center_seeking_feasible(&bx.generators, point, 20_000)
}

/// Tie rule for atoms sitting exactly on the cut plane `n0 . n = lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GPolicy {
    AllZero,
    AllOne,
    Fraction(f64),
}

impl GPolicy {
    fn factor(&self) -> f64 {
        match self {
            GPolicy::AllZero => 0.0,
            GPolicy::AllOne => 1.0,
            GPolicy::Fraction(g) => *g,
        }
    }
}

const TIE_BAND: f64 = 1e-12;

/// Boundary point of the box: the sum of lifted atoms in the open cap
/// `n0 . n > lambda`, plus the tie-rule fraction of atoms on the cut plane.
pub fn boundary_point(measure: &SphereMeasure, n0: &Vec3, lambda: f64, g: GPolicy) -> Vec4 {
    let gf = g.factor();
    let mut out = Vec4::zeros();
    for a in measure.atoms() {
        let dot = n0.dot(&a.n);
        let f = if (dot - lambda).abs() <= TIE_BAND {
            gf
        } else if dot > lambda {
            1.0
        } else {
            0.0
        };
        if f != 0.0 {
            let w = f * a.weight;
            out += Vec4::new(w, w * a.n.x, w * a.n.y, w * a.n.z);
        }
    }
    out
}

/// Finds the cut level and tie fraction so the included mass equals `target`.
///
/// The included mass is monotone non-increasing in lambda, so a single pass
/// over the atoms sorted by `n0 . n` suffices. Atoms within 1e-12 of each
/// other count as one shell and share the returned fraction.
pub fn solve_lambda(measure: &SphereMeasure, n0: &Vec3, target: f64) -> (f64, f64) {
    debug_assert!((0.0..=1.0).contains(&target));
    let mut dots: Vec<(f64, f64)> = measure
        .atoms()
        .iter()
        .map(|a| (n0.dot(&a.n), a.weight))
        .collect();
    dots.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut acc = 0.0;
    let mut k = 0;
    while k < dots.len() {
        let lambda = dots[k].0;
        let mut shell_mass = 0.0;
        let mut end = k;
        while end < dots.len() && (dots[end].0 - lambda).abs() <= TIE_BAND {
            shell_mass += dots[end].1;
            end += 1;
        }
        if acc + shell_mass >= target - 1e-15 {
            let gamma = if shell_mass > 0.0 {
                ((target - acc) / shell_mass).clamp(0.0, 1.0)
            } else {
                0.0
            };
            return (lambda, gamma);
        }
        acc += shell_mass;
        k = end;
    }
    // target exceeds the total mass only through rounding; include everything
    (dots.last().map(|d| d.0).unwrap_or(0.0), 1.0)
}
