//! Two-qubit states in Pauli coordinates and the state map to Bob's side.
//!
//! Every hermitian single-qubit operator `A` is written as
//! `A = (1/2) sum_i X_i(A) sigma_i` with `X_i(A) = Tr(A sigma_i)` and
//! `sigma_0` the identity. A two-qubit density operator then carries the
//! 4x4 real coordinate matrix `theta[i][j] = Tr[rho (sigma_i x sigma_j)]`,
//! and the linear map taking Alice's operators to Bob's conditioned states
//! is `(1/2) theta^T` in these coordinates.

use crate::{CMat2, CMat4, Mat3, Mat4, Vec3, Vec4};
use nalgebra::Complex;
use thiserror::Error;

/// Relative singular-value ratio below which the state map counts as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-9;

/// Default tolerance on the marginal Bloch vectors when canonicalizing a T-state.
pub const TSTATE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("matrix is not hermitian: max |rho - rho^dagger| element = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive semidefinite: smallest eigenvalue = {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("trace must be 1, got {trace:.12}")]
    BadTrace { trace: f64 },
    #[error("expected a unit vector, got norm {norm:.12}")]
    NotUnitVector { norm: f64 },
    #[error("not a T-state: marginal Bloch vector has norm {marginal_norm:.3e} (tolerance {tol:.3e})")]
    NotTState { marginal_norm: f64, tol: f64 },
    #[error("degenerate correlation matrix: smallest diagonal entry {t_min:.3e}")]
    DegenerateT { t_min: f64 },
}

/// The four Pauli matrices, identity first.
pub fn pauli(i: usize) -> CMat2 {
    let zero = Complex::new(0.0, 0.0);
    let one = Complex::new(1.0, 0.0);
    match i {
        0 => CMat2::new(one, zero, zero, one),
        1 => CMat2::new(zero, one, one, zero),
        2 => CMat2::new(zero, Complex::new(0.0, -1.0), Complex::new(0.0, 1.0), zero),
        3 => CMat2::new(one, zero, zero, -one),
        _ => panic!("pauli index out of range"),
    }
}

/// `sigma_i (x) sigma_j` as a 4x4 matrix.
pub fn pauli_pair(i: usize, j: usize) -> CMat4 {
    pauli(i).kronecker(&pauli(j))
}

/// A validated two-qubit density operator together with its Pauli coordinates.
///
/// Construction symmetrizes and trace-normalizes the input (within the stated
/// tolerances), so the stored `rho` and `theta` agree to machine precision.
#[derive(Debug, Clone)]
pub struct TwoQubitState {
    rho: CMat4,
    theta: Mat4,
}

impl TwoQubitState {
    /// Validates a density matrix and computes its 16 Pauli coordinates.
    ///
    /// Accepts hermiticity/trace deviations up to 1e-8 and eigenvalues down
    /// to -1e-8 (text inputs carry rounding); the stored state is cleaned up
    /// to satisfy the invariants exactly.
    pub fn from_matrix(rho: CMat4) -> Result<Self, StateError> {
        let adj = rho.adjoint();
        let herm_dev = (rho - adj)
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        if herm_dev > 1e-8 {
            return Err(StateError::NotHermitian { deviation: herm_dev });
        }
        let mut rho = (rho + rho.adjoint()) * Complex::new(0.5, 0.0);
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-8 {
            return Err(StateError::BadTrace { trace: trace.re });
        }
        rho /= Complex::new(trace.re, 0.0);

        let eig = rho.symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            return Err(StateError::NotPositive { min_eigenvalue: min_eig });
        }
        if min_eig < -1e-10 {
            // Rounding pushed an eigenvalue slightly negative; project back
            // onto the positive cone and renormalize.
            let mut vals = eig.eigenvalues.clone();
            for v in vals.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let total: f64 = vals.iter().sum();
            let q = &eig.eigenvectors;
            let d = CMat4::from_diagonal(&vals.map(|v| Complex::new(v / total, 0.0)));
            rho = q * d * q.adjoint();
        }

        let mut theta = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                theta[(i, j)] = (rho * pauli_pair(i, j)).trace().re;
            }
        }
        theta[(0, 0)] = 1.0;
        Ok(Self { rho, theta })
    }

    /// Builds a state from its coordinate matrix by reconstructing the
    /// density operator and validating it.
    pub fn from_theta(theta: &Mat4) -> Result<Self, StateError> {
        if (theta[(0, 0)] - 1.0).abs() > 1e-8 {
            return Err(StateError::BadTrace { trace: theta[(0, 0)] });
        }
        let mut rho = CMat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                rho += pauli_pair(i, j) * Complex::new(theta[(i, j)] / 4.0, 0.0);
            }
        }
        Self::from_matrix(rho)
    }

    pub fn rho(&self) -> &CMat4 {
        &self.rho
    }

    pub fn theta(&self) -> &Mat4 {
        &self.theta
    }

    /// The linear map from Alice's operator coordinates to Bob's.
    pub fn epr_map(&self) -> EprMap {
        EprMap::from_phi(0.5 * self.theta.transpose())
    }
}

/// The map sending Alice's measurement operators to Bob's conditioned
/// (subnormalized) states, in Pauli coordinates: `phi = (1/2) theta^T`.
#[derive(Debug, Clone)]
pub struct EprMap {
    phi: Mat4,
    alice_bloch: Vec3,
    bob_bloch: Vec3,
    correlation: Mat3,
    degenerate: bool,
}

impl EprMap {
    /// Builds the map directly from its 4x4 coordinate matrix.
    ///
    /// Mostly useful for synthetic maps in tests; physical maps come from
    /// [`TwoQubitState::epr_map`].
    pub fn from_phi(phi: Mat4) -> Self {
        let theta = 2.0 * phi.transpose();
        let alice_bloch = Vec3::new(theta[(1, 0)], theta[(2, 0)], theta[(3, 0)]);
        let bob_bloch = Vec3::new(theta[(0, 1)], theta[(0, 2)], theta[(0, 3)]);
        let correlation = theta.fixed_view::<3, 3>(1, 1).into_owned();
        let sv = phi.singular_values();
        let max_sv = sv.iter().cloned().fold(0.0f64, f64::max);
        let min_sv = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let degenerate = min_sv < DEGENERACY_RATIO * max_sv;
        Self { phi, alice_bloch, bob_bloch, correlation, degenerate }
    }

    pub fn phi(&self) -> &Mat4 {
        &self.phi
    }

    pub fn alice_bloch(&self) -> &Vec3 {
        &self.alice_bloch
    }

    pub fn bob_bloch(&self) -> &Vec3 {
        &self.bob_bloch
    }

    pub fn correlation(&self) -> &Mat3 {
        &self.correlation
    }

    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    /// Applies the map to arbitrary operator coordinates.
    pub fn apply(&self, coords: &Vec4) -> Vec4 {
        self.phi * coords
    }

    /// Bob's conditioned state for Alice's projective outcome along `x`.
    ///
    /// The projector has coordinates `(1, x)`; the complementary outcome is
    /// the image of `(1, -x)` and the two images sum to Bob's reduced state.
    pub fn steering_outcome(&self, x: &Vec3) -> Result<Vec4, StateError> {
        let norm = x.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(StateError::NotUnitVector { norm });
        }
        Ok(self.phi * Vec4::new(1.0, x.x, x.y, x.z))
    }

    /// Diagonalizes the correlation block of a state with maximally mixed
    /// marginals, using rotations only.
    ///
    /// Any reflection required by the decomposition is pushed into the signs
    /// of the diagonal entries, so both factors stay in SO(3). Entries come
    /// out ordered by decreasing magnitude.
    pub fn canonicalize_tstate(&self, tol: f64) -> Result<TStateForm, StateError> {
        let marginal = self.alice_bloch.norm().max(self.bob_bloch.norm());
        if marginal > tol {
            return Err(StateError::NotTState { marginal_norm: marginal, tol });
        }
        let svd = self.correlation.svd(true, true);
        let mut u = svd.u.expect("svd with u");
        let mut v = svd.v_t.expect("svd with v_t").transpose();
        let mut t = Vec3::new(svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]);
        if u.determinant() < 0.0 {
            u.column_mut(2).neg_mut();
            t[2] = -t[2];
        }
        if v.determinant() < 0.0 {
            v.column_mut(2).neg_mut();
            t[2] = -t[2];
        }
        if t[2].abs() < 1e-9 {
            return Err(StateError::DegenerateT { t_min: t[2].abs() });
        }
        Ok(TStateForm {
            t_diag: t,
            alice_rotation: u.transpose(),
            bob_rotation: v.transpose(),
        })
    }
}

/// Diagonal form of a T-state's correlation matrix with the SO(3) frames
/// that produce it: `alice_rotation^T * diag(t_diag) * bob_rotation = C`.
#[derive(Debug, Clone)]
pub struct TStateForm {
    pub t_diag: Vec3,
    pub alice_rotation: Mat3,
    pub bob_rotation: Mat3,
}

impl TStateForm {
    /// Rebuilds the correlation matrix from the factors.
    pub fn reconstruct(&self) -> Mat3 {
        self.alice_rotation.transpose() * Mat3::from_diagonal(&self.t_diag) * self.bob_rotation
    }

    /// The state map of the canonical-frame T-state: `diag(1/2, t/2)`.
    pub fn canonical_map(&self) -> EprMap {
        let mut phi = Mat4::zeros();
        phi[(0, 0)] = 0.5;
        for k in 0..3 {
            phi[(k + 1, k + 1)] = 0.5 * self.t_diag[k];
        }
        EprMap::from_phi(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Complex;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    /// |psi-><psi-| written out by hand.
    fn singlet() -> CMat4 {
        let mut m = CMat4::zeros();
        m[(1, 1)] = c(0.5, 0.0);
        m[(2, 2)] = c(0.5, 0.0);
        m[(1, 2)] = c(-0.5, 0.0);
        m[(2, 1)] = c(-0.5, 0.0);
        m
    }

    fn werner(p: f64) -> CMat4 {
        singlet() * c(p, 0.0) + CMat4::identity() * c((1.0 - p) / 4.0, 0.0)
    }

    #[test]
    fn maximally_mixed_theta() {
        let s = TwoQubitState::from_matrix(CMat4::identity() * c(0.25, 0.0)).unwrap();
        let expected = Mat4::from_diagonal(&Vec4::new(1.0, 0.0, 0.0, 0.0));
        assert_relative_eq!(*s.theta(), expected, epsilon = 1e-12);
    }

    #[test]
    fn singlet_theta() {
        let s = TwoQubitState::from_matrix(singlet()).unwrap();
        let expected = Mat4::from_diagonal(&Vec4::new(1.0, -1.0, -1.0, -1.0));
        assert_relative_eq!(*s.theta(), expected, epsilon = 1e-12);
    }

    #[test]
    fn werner_theta() {
        let s = TwoQubitState::from_matrix(werner(0.6)).unwrap();
        let expected = Mat4::from_diagonal(&Vec4::new(1.0, -0.6, -0.6, -0.6));
        assert_relative_eq!(*s.theta(), expected, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMat4::identity() * c(0.25, 0.0);
        m[(0, 1)] = c(0.1, 0.0); // no matching (1,0) entry
        assert!(matches!(
            TwoQubitState::from_matrix(m),
            Err(StateError::NotHermitian { .. })
        ));
    }

    #[test]
    fn rejects_bad_trace() {
        let m = CMat4::identity() * c(0.3, 0.0);
        assert!(matches!(
            TwoQubitState::from_matrix(m),
            Err(StateError::BadTrace { .. })
        ));
    }

    #[test]
    fn rejects_negative() {
        let mut m = CMat4::zeros();
        m[(0, 0)] = c(1.1, 0.0);
        m[(1, 1)] = c(-0.1, 0.0);
        assert!(matches!(
            TwoQubitState::from_matrix(m),
            Err(StateError::NotPositive { .. })
        ));
    }

    #[test]
    fn theta_round_trip() {
        let s = TwoQubitState::from_matrix(werner(0.37)).unwrap();
        let rebuilt = TwoQubitState::from_theta(s.theta()).unwrap();
        let dev = (rebuilt.rho() - s.rho())
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(dev < 1e-12, "round trip deviation {dev}");
    }

    #[test]
    fn degenerate_map_flag() {
        let s = TwoQubitState::from_matrix(CMat4::identity() * c(0.25, 0.0)).unwrap();
        assert!(s.epr_map().degenerate());
    }

    #[test]
    fn werner_map_blocks() {
        let s = TwoQubitState::from_matrix(werner(0.6)).unwrap();
        let m = s.epr_map();
        assert!(!m.degenerate());
        let expected = Mat4::from_diagonal(&Vec4::new(0.5, -0.3, -0.3, -0.3));
        assert_relative_eq!(*m.phi(), expected, epsilon = 1e-12);
        assert!(m.alice_bloch().norm() < 1e-12);
        assert!(m.bob_bloch().norm() < 1e-12);
    }

    #[test]
    fn singlet_flips_bloch_image() {
        let s = TwoQubitState::from_matrix(singlet()).unwrap();
        let m = s.epr_map();
        let x = Vec3::new(0.6, 0.0, 0.8);
        let img = m.apply(&Vec4::new(1.0, x.x, x.y, x.z));
        assert_relative_eq!(img, Vec4::new(0.5, -0.3, 0.0, -0.4), epsilon = 1e-12);
    }

    #[test]
    fn steering_outcomes_complete() {
        let s = TwoQubitState::from_matrix(werner(0.5)).unwrap();
        let m = s.epr_map();
        let x = Vec3::new(0.0, 0.0, 1.0);
        let plus = m.steering_outcome(&x).unwrap();
        let minus = m.steering_outcome(&(-x)).unwrap();
        assert_relative_eq!(plus, Vec4::new(0.5, 0.0, 0.0, -0.25), epsilon = 1e-12);
        let b = m.bob_bloch();
        assert_relative_eq!(plus + minus, Vec4::new(1.0, b.x, b.y, b.z), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_map_cannot_steer() {
        let s = TwoQubitState::from_matrix(CMat4::identity() * c(0.25, 0.0)).unwrap();
        let m = s.epr_map();
        let out = m.steering_outcome(&Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(out, Vec4::new(0.5, 0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn steering_outcome_requires_unit_vector() {
        let s = TwoQubitState::from_matrix(werner(0.5)).unwrap();
        assert!(matches!(
            s.epr_map().steering_outcome(&Vec3::new(0.0, 0.0, 0.5)),
            Err(StateError::NotUnitVector { .. })
        ));
    }

    fn rot_z(angle: f64) -> Mat3 {
        Mat3::new(
            angle.cos(), -angle.sin(), 0.0,
            angle.sin(), angle.cos(), 0.0,
            0.0, 0.0, 1.0,
        )
    }

    fn map_with_correlation(cmat: Mat3) -> EprMap {
        let mut theta = Mat4::zeros();
        theta[(0, 0)] = 1.0;
        for i in 0..3 {
            for j in 0..3 {
                theta[(i + 1, j + 1)] = cmat[(i, j)];
            }
        }
        EprMap::from_phi(0.5 * theta.transpose())
    }

    #[test]
    fn canonicalize_identity_frame() {
        let m = map_with_correlation(Mat3::from_diagonal(&Vec3::new(-0.5, -0.5, -0.5)));
        let f = m.canonicalize_tstate(TSTATE_TOL).unwrap();
        assert_relative_eq!(f.t_diag.map(f64::abs), Vec3::new(0.5, 0.5, 0.5), epsilon = 1e-12);
        assert_relative_eq!(f.reconstruct(), *m.correlation(), epsilon = 1e-10);
        assert_relative_eq!(f.alice_rotation.determinant(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(f.bob_rotation.determinant(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn canonicalize_rotated_frame() {
        let cmat = rot_z(0.3) * Mat3::from_diagonal(&Vec3::new(0.9, 0.8, 0.7));
        let m = map_with_correlation(cmat);
        let f = m.canonicalize_tstate(TSTATE_TOL).unwrap();
        let mut mags: Vec<f64> = f.t_diag.iter().map(|t| t.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_relative_eq!(mags[0], 0.9, epsilon = 1e-10);
        assert_relative_eq!(mags[1], 0.8, epsilon = 1e-10);
        assert_relative_eq!(mags[2], 0.7, epsilon = 1e-10);
        assert_relative_eq!(f.reconstruct(), cmat, epsilon = 1e-10);
    }

    #[test]
    fn canonicalize_negative_determinant() {
        let cmat = Mat3::from_diagonal(&Vec3::new(0.9, 0.8, -0.7));
        let m = map_with_correlation(cmat);
        let f = m.canonicalize_tstate(TSTATE_TOL).unwrap();
        let negatives = f.t_diag.iter().filter(|t| **t < 0.0).count();
        assert!(negatives == 1 || negatives == 3);
        assert_relative_eq!(f.reconstruct(), cmat, epsilon = 1e-10);
        assert_relative_eq!(f.alice_rotation.determinant(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(f.bob_rotation.determinant(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn canonicalize_rejects_biased_marginals() {
        let mut theta = Mat4::from_diagonal(&Vec4::new(1.0, -0.5, -0.5, -0.5));
        theta[(1, 0)] = 0.2;
        let m = EprMap::from_phi(0.5 * theta.transpose());
        assert!(matches!(
            m.canonicalize_tstate(TSTATE_TOL),
            Err(StateError::NotTState { .. })
        ));
    }

    #[test]
    fn canonicalize_rejects_degenerate_correlation() {
        let m = map_with_correlation(Mat3::from_diagonal(&Vec3::new(0.5, 0.5, 0.0)));
        assert!(matches!(
            m.canonicalize_tstate(TSTATE_TOL),
            Err(StateError::DegenerateT { .. })
        ));
    }
}
