//! Operational local hidden state models and their sampling simulator.
//!
//! A response model assigns each atom of an ansatz a response probability
//! `beta_i` per measurement direction so that the weighted atom mix
//! reproduces Bob's conditioned states exactly. Sampling the model then
//! reproduces the joint outcome statistics of the state without any
//! communication from Alice's side.

use crate::ansatz::SphereMeasure;
use crate::geometry::{self, build_box, GeomError};
use crate::qstate::{EprMap, StateError};
use crate::{Vec3, Vec4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LhsError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("steering outcome lies outside the box (residual {residual:.3e}); the ansatz does not dominate this state")]
    OutcomeOutsideBox { residual: f64 },
}

/// Response probabilities reproducing one steering outcome from the ansatz.
#[derive(Debug, Clone)]
pub struct ResponseModel {
    /// Alice's measurement direction.
    pub direction: Vec3,
    /// Response probability of each atom for the `+` outcome.
    pub beta: Vec<f64>,
    /// The reproduced subnormalized state in operator coordinates.
    pub outcome: Vec4,
    /// Outcome probability of the `+` result, i.e. the trace component.
    pub p_plus: f64,
}

/// Builds the atom responses for Alice's projective measurement along `x`.
///
/// The `+` outcome must be a box point; among all valid responses the one
/// closest to `beta = 1/2` is chosen, which makes the model equivariant
/// under `x -> -x` (the two outcomes swap, `beta -> 1 - beta`).
pub fn build_response(
    measure: &SphereMeasure,
    map: &EprMap,
    x: &Vec3,
) -> Result<ResponseModel, LhsError> {
    let mut measure = measure.clone();
    measure.project_weights(map.bob_bloch());
    let outcome = map.steering_outcome(x)?;
    let bx = build_box(&measure, map)?;
    if let Some(beta) = geometry::centered_membership_witness(&bx, &outcome) {
        return Ok(ResponseModel { direction: *x, beta, outcome, p_plus: outcome[0] });
    }
    // fall back to the exact feasibility test for a certified residual
    let m = geometry::box_membership(&bx, &outcome);
    if m.feasible {
        Ok(ResponseModel { direction: *x, beta: m.beta, outcome, p_plus: outcome[0] })
    } else {
        Err(LhsError::OutcomeOutsideBox { residual: m.residual })
    }
}

/// Algebraic residual of a response model against the steering outcomes.
///
/// Checks both rows of the model: the `+` row must recombine to the image of
/// `(1, x)` and the complementary `1 - beta` row to the image of `(1, -x)`.
/// Returns the larger of the two recombination residuals.
pub fn verify_response(
    measure: &SphereMeasure,
    map: &EprMap,
    model: &ResponseModel,
) -> Result<f64, LhsError> {
    let mut measure = measure.clone();
    measure.project_weights(map.bob_bloch());
    let bx = build_box(&measure, map)?;
    let plus_target = map.steering_outcome(&model.direction)?;
    let minus_target = map.steering_outcome(&(-model.direction))?;
    let mut plus = Vec4::zeros();
    let mut minus = Vec4::zeros();
    for (g, &b) in bx.generators().iter().zip(&model.beta) {
        plus += g * b;
        minus += g * (1.0 - b);
    }
    Ok((plus - plus_target).norm().max((minus - minus_target).norm()))
}

/// Outcome statistics of one simulated measurement direction.
#[derive(Debug, Clone, Serialize)]
pub struct DirectionStats {
    pub direction: [f64; 3],
    pub p_plus_exact: f64,
    pub p_plus_observed: f64,
    /// Standardized deviation of the observed frequency under the binomial
    /// null; |z| beyond ~5 indicates a broken model rather than noise.
    pub z_score: f64,
    /// Bob's conditional Bloch vector given the `+` outcome.
    pub bloch_exact: [f64; 3],
    /// Mean hidden-state vector over the shots that answered `+`.
    pub bloch_observed: [f64; 3],
    /// Componentwise z-scores of the conditional Bloch estimate.
    pub bloch_z: [f64; 3],
    /// Algebraic recombination residual of the response row.
    pub residual: f64,
}

/// Report of a full simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub shots: u64,
    pub seed: u64,
    pub atoms: usize,
    pub directions: Vec<DirectionStats>,
    pub max_abs_z: f64,
    pub max_residual: f64,
}

/// Samples the hidden-state model: draws an atom from the ansatz and answers
/// `+` with the atom's response probability, tallying observed frequencies
/// for every requested direction from a single seeded stream.
pub fn simulate(
    measure: &SphereMeasure,
    map: &EprMap,
    directions: &[Vec3],
    shots: u64,
    seed: u64,
) -> Result<SimReport, LhsError> {
    let mut projected = measure.clone();
    projected.project_weights(map.bob_bloch());
    if shots == 0 {
        return Ok(SimReport {
            shots: 0,
            seed,
            atoms: projected.len(),
            directions: Vec::new(),
            max_abs_z: 0.0,
            max_residual: 0.0,
        });
    }
    // inverse-CDF table over atoms
    let mut cdf = Vec::with_capacity(projected.len());
    let mut acc = 0.0;
    for a in projected.atoms() {
        acc += a.weight;
        cdf.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(directions.len());
    let mut max_abs_z = 0.0f64;
    let mut max_residual = 0.0f64;
    for x in directions {
        let model = build_response(&projected, map, x)?;
        let residual = verify_response(&projected, map, &model)?;
        let mut hits = 0u64;
        let mut sum = Vec3::zeros();
        let mut sum_sq = Vec3::zeros();
        for _ in 0..shots {
            let u: f64 = rng.gen();
            let atom = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
            if rng.gen::<f64>() < model.beta[atom] {
                hits += 1;
                let n = projected.atoms()[atom].n;
                sum += n;
                sum_sq += n.component_mul(&n);
            }
        }
        let p = model.p_plus;
        let observed = hits as f64 / shots as f64;
        let sigma = (p * (1.0 - p) / shots as f64).sqrt();
        let z_score = if sigma > 0.0 { (observed - p) / sigma } else { 0.0 };
        // conditional Bloch vector given `+`: spatial part over the trace part
        let bloch_exact = Vec3::new(model.outcome[1], model.outcome[2], model.outcome[3]) / p;
        let mut bloch_observed = [0.0; 3];
        let mut bloch_z = [0.0; 3];
        if hits > 1 {
            let h = hits as f64;
            for k in 0..3 {
                let mean = sum[k] / h;
                let var = (sum_sq[k] / h - mean * mean).max(0.0);
                let stderr = (var / h).sqrt();
                bloch_observed[k] = mean;
                bloch_z[k] = if stderr > 0.0 { (mean - bloch_exact[k]) / stderr } else { 0.0 };
                max_abs_z = max_abs_z.max(bloch_z[k].abs());
            }
        }
        max_abs_z = max_abs_z.max(z_score.abs());
        max_residual = max_residual.max(residual);
        stats.push(DirectionStats {
            direction: [x.x, x.y, x.z],
            p_plus_exact: p,
            p_plus_observed: observed,
            z_score,
            bloch_exact: [bloch_exact.x, bloch_exact.y, bloch_exact.z],
            bloch_observed,
            bloch_z,
            residual,
        });
    }
    Ok(SimReport {
        shots,
        seed,
        atoms: projected.len(),
        directions: stats,
        max_abs_z,
        max_residual,
    })
}
