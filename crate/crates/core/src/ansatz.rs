//! Probability measures on Bob's Bloch sphere and the optimal T-state density.
//!
//! Discrete measures come from quasi-uniform Fibonacci grids, optionally
//! weighted by the density `J(n) = N_T / (n^T T^-2 n)^2` whose normalization
//! `N_T` is obtained by spherical quadrature with a convergence certificate.

use crate::Vec3;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("grid count must be >= 2 (and even when symmetric), got {count}")]
    BadCount { count: usize },
    #[error("degenerate correlation diagonal: smallest |t| = {t_min:.3e}")]
    DegenerateT { t_min: f64 },
    #[error("spherical quadrature did not converge to relative tolerance {rel_tol:.3e} (last delta {last_delta:.3e})")]
    QuadratureNotConverged { rel_tol: f64, last_delta: f64 },
    #[error("expected a unit vector, got norm {norm:.12}")]
    NotUnitVector { norm: f64 },
    #[error("perturbation must be centrally symmetric (pair {index} differs by {delta:.3e})")]
    NotCentrallySymmetric { index: usize, delta: f64 },
    #[error("perturbation must sum to zero, got {sum:.3e}")]
    NotZeroSum { sum: f64 },
    #[error("perturbation drives weight {index} negative ({value:.3e})")]
    NegativeWeight { index: usize, value: f64 },
}

/// One atom of a discrete measure: a weight on a unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub n: Vec3,
}

/// Discrete probability measure on the unit sphere.
///
/// Symmetric measures store their atoms as `(n_0..n_{m/2-1}, -n_0..-n_{m/2-1})`
/// so atom `i` pairs with atom `i + m/2`.
#[derive(Debug, Clone)]
pub struct SphereMeasure {
    atoms: Vec<Atom>,
    symmetric: bool,
    barycenter_target: Vec3,
}

impl SphereMeasure {
    /// Wraps raw atoms, normalizing the total weight to 1.
    pub fn from_atoms(atoms: Vec<Atom>, symmetric: bool, barycenter_target: Vec3) -> Self {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        let atoms = atoms
            .into_iter()
            .map(|a| Atom { weight: a.weight / total, n: a.n })
            .collect();
        Self { atoms, symmetric, barycenter_target }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn barycenter_target(&self) -> &Vec3 {
        &self.barycenter_target
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn barycenter(&self) -> Vec3 {
        self.atoms
            .iter()
            .fold(Vec3::zeros(), |acc, a| acc + a.weight * a.n)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// Replaces the weights, keeping the support points.
    pub fn with_weights(&self, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), self.atoms.len());
        let atoms = self
            .atoms
            .iter()
            .zip(weights)
            .map(|(a, &w)| Atom { weight: w, n: a.n })
            .collect();
        Self {
            atoms,
            symmetric: self.symmetric,
            barycenter_target: self.barycenter_target,
        }
    }

    /// Least-squares projection of the weights onto the exact constraints
    /// `sum w = 1` and `sum w n = target`, with non-negativity restored by
    /// clip-and-reproject rounds.
    ///
    /// Discrete grids satisfy the barycenter condition only to about 1e-3;
    /// this restores it to machine precision before any box is built, so the
    /// principal vertex lands exactly on Bob's reduced state.
    pub fn project_weights(&mut self, target: &Vec3) {
        let m = self.atoms.len();
        // constraint matrix rows: all-ones, then the three point coordinates
        let rows: [Vec<f64>; 4] = [
            vec![1.0; m],
            self.atoms.iter().map(|a| a.n.x).collect(),
            self.atoms.iter().map(|a| a.n.y).collect(),
            self.atoms.iter().map(|a| a.n.z).collect(),
        ];
        let rhs = [1.0, target.x, target.y, target.z];
        let mut w: Vec<f64> = self.atoms.iter().map(|a| a.weight).collect();
        for round in 0..3 {
            affine_project(&rows, &rhs, &mut w);
            let mut clipped = false;
            for v in w.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                    clipped = true;
                }
            }
            if !clipped && round > 0 {
                break;
            }
        }
        for (a, &v) in self.atoms.iter_mut().zip(&w) {
            a.weight = v.max(0.0);
        }
        self.barycenter_target = *target;
    }

    /// Applies a weight perturbation, validating that it is centrally
    /// symmetric, sums to zero, and keeps every weight non-negative.
    pub fn perturbed(&self, v: &[f64]) -> Result<Self, AnsatzError> {
        assert_eq!(v.len(), self.atoms.len());
        let sum: f64 = v.iter().sum();
        if sum.abs() > 1e-10 {
            return Err(AnsatzError::NotZeroSum { sum });
        }
        if self.symmetric {
            let half = self.atoms.len() / 2;
            for i in 0..half {
                let delta = (v[i] - v[i + half]).abs();
                if delta > 1e-12 {
                    return Err(AnsatzError::NotCentrallySymmetric { index: i, delta });
                }
            }
        }
        let mut atoms = self.atoms.clone();
        for (i, (a, dv)) in atoms.iter_mut().zip(v).enumerate() {
            a.weight += dv;
            if a.weight < 0.0 {
                return Err(AnsatzError::NegativeWeight { index: i, value: a.weight });
            }
        }
        Ok(Self {
            atoms,
            symmetric: self.symmetric,
            barycenter_target: self.barycenter_target,
        })
    }
}

/// Exact affine projection of `w` onto `{w : rows . w = rhs}`.
fn affine_project(rows: &[Vec<f64>; 4], rhs: &[f64; 4], w: &mut [f64]) {
    use nalgebra::{Matrix4, Vector4};
    let mut gram = Matrix4::zeros();
    let mut resid = Vector4::zeros();
    for i in 0..4 {
        for j in i..4 {
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            gram[(i, j)] = dot;
            gram[(j, i)] = dot;
        }
        let rw: f64 = rows[i].iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        resid[i] = rw - rhs[i];
    }
    let corr = gram
        .lu()
        .solve(&resid)
        .unwrap_or_else(|| gram.svd(true, true).solve(&resid, 1e-14).unwrap());
    for (k, v) in w.iter_mut().enumerate() {
        for i in 0..4 {
            *v -= corr[i] * rows[i][k];
        }
    }
}

/// Quasi-uniform spiral points on the unit sphere.
fn fibonacci_points(count: usize) -> Vec<Vec3> {
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

/// Builds a quasi-uniform discrete measure of `count` atoms.
///
/// With a density, weights are proportional to the density at each point and
/// renormalized. When `symmetric`, half the atoms are the antipodes of the
/// other half, so odd error terms cancel and the barycenter is exactly zero.
pub fn fibonacci_grid(
    count: usize,
    symmetric: bool,
    density: Option<&JevticDensity>,
) -> Result<SphereMeasure, AnsatzError> {
    if count < 2 || (symmetric && count % 2 != 0) {
        return Err(AnsatzError::BadCount { count });
    }
    let points = if symmetric {
        let mut pts = fibonacci_points(count / 2);
        let anti: Vec<Vec3> = pts.iter().map(|p| -p).collect();
        pts.extend(anti);
        pts
    } else {
        fibonacci_points(count)
    };
    let weights: Vec<f64> = match density {
        Some(d) => points.iter().map(|p| d.evaluate_unchecked(p)).collect(),
        None => vec![1.0; count],
    };
    let atoms = points
        .into_iter()
        .zip(weights)
        .map(|(n, weight)| Atom { weight, n })
        .collect();
    Ok(SphereMeasure::from_atoms(atoms, symmetric, Vec3::zeros()))
}

/// The density on the sphere that is optimal for a diagonal correlation
/// matrix, together with its quadrature-certified normalization constant.
#[derive(Debug, Clone)]
pub struct JevticDensity {
    t_diag: Vec3,
    n_t: f64,
    quad_error: f64,
}

impl JevticDensity {
    pub fn t_diag(&self) -> &Vec3 {
        &self.t_diag
    }

    pub fn n_t(&self) -> f64 {
        self.n_t
    }

    /// Relative error certificate from the last two quadrature levels.
    pub fn quad_error(&self) -> f64 {
        self.quad_error
    }

    /// `N_T / (n^T T^-2 n)^2` for a unit vector `n`.
    pub fn evaluate(&self, n: &Vec3) -> Result<f64, AnsatzError> {
        let norm = n.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(AnsatzError::NotUnitVector { norm });
        }
        Ok(self.evaluate_unchecked(n))
    }

    fn evaluate_unchecked(&self, n: &Vec3) -> f64 {
        let q = quadratic_form(&self.t_diag, n);
        self.n_t / (q * q)
    }
}

/// `n^T T^-2 n` for diagonal `T`.
fn quadratic_form(t_diag: &Vec3, n: &Vec3) -> f64 {
    n.x * n.x / (t_diag.x * t_diag.x)
        + n.y * n.y / (t_diag.y * t_diag.y)
        + n.z * n.z / (t_diag.z * t_diag.z)
}

/// Computes the normalization constant of the optimal density by nested
/// spherical quadrature; two successive levels must agree to `rel_tol`.
pub fn normalize_jevtic(t_diag: Vec3, rel_tol: f64) -> Result<JevticDensity, AnsatzError> {
    let t_min = t_diag.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min);
    if t_min < 1e-9 {
        return Err(AnsatzError::DegenerateT { t_min });
    }
    let f = |n: Vec3| {
        let q = quadratic_form(&t_diag, &n);
        1.0 / (q * q)
    };
    let (integral, err) = converged_sphere_integral(&f, rel_tol)?;
    Ok(JevticDensity {
        t_diag,
        n_t: 1.0 / integral,
        quad_error: err,
    })
}

/// Integrates a smooth function over the unit sphere (area measure) with a
/// Gauss-Legendre rule in the polar direction and a trapezoid rule in the
/// azimuth. The grid is antipodally symmetric for even azimuth counts.
pub fn sphere_integral(f: &(impl Fn(Vec3) -> f64 + Sync), n_polar: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n_polar);
    let n_phi = 2 * n_polar;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    nodes
        .par_iter()
        .zip(&weights)
        .map(|(&z, &wz)| {
            let r = (1.0 - z * z).max(0.0).sqrt();
            let mut acc = 0.0;
            for k in 0..n_phi {
                let phi = dphi * k as f64;
                acc += f(Vec3::new(r * phi.cos(), r * phi.sin(), z));
            }
            wz * acc * dphi
        })
        .sum()
}

/// Nested refinement: doubles the polar order until two levels agree.
fn converged_sphere_integral(
    f: &(impl Fn(Vec3) -> f64 + Sync),
    rel_tol: f64,
) -> Result<(f64, f64), AnsatzError> {
    let mut n = 16;
    let mut prev = sphere_integral(f, n);
    let mut last_delta = f64::INFINITY;
    while n <= 512 {
        n *= 2;
        let next = sphere_integral(f, n);
        last_delta = ((next - prev) / next).abs();
        if last_delta <= rel_tol {
            return Ok((next, last_delta.max(f64::EPSILON)));
        }
        prev = next;
    }
    Err(AnsatzError::QuadratureNotConverged { rel_tol, last_delta })
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
