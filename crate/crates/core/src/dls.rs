//! Damped-least-squares numerical IK over tip translation.
//!
//! Serves as the independent reference solver for validating the learned
//! model. Each iteration solves `(J·Jᵀ + λI)·y = e` for the 3-vector `y`
//! and steps by `Δq = Jᵀ·y`, with the step clamped and the configuration
//! clamped to joint limits. Non-convergence is reported as a status, never
//! an error. Everything here is a pure function of immutable inputs, so
//! concurrent solves are safe.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::chain::{forward_kinematics, jacobian, ChainError, JointConfig, KinematicChain};

/// Solver parameters. The defaults are conservative desk-scale settings.
#[derive(Debug, Clone, Copy)]
pub struct DlsSettings {
    /// Tikhonov damping added to `J·Jᵀ` (meters²-scale).
    pub damping: f64,
    pub max_iters: usize,
    /// Convergence threshold on the position error norm, meters.
    pub position_tol: f64,
    /// Per-iteration bound on each joint's step, radians. Large default
    /// clamps cause a bouncing cycle at the workspace boundary instead of
    /// settling on it; 0.1 rad keeps boundary best-effort errors tight.
    pub step_clamp: f64,
}

impl Default for DlsSettings {
    fn default() -> Self {
        Self {
            damping: 1e-4,
            max_iters: 500,
            position_tol: 1e-6,
            step_clamp: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlsStatus {
    Converged { iterations: usize },
    NotConverged,
}

impl DlsStatus {
    pub fn converged(&self) -> bool {
        matches!(self, DlsStatus::Converged { .. })
    }
}

/// Best iterate found by [`solve_dls`].
#[derive(Debug, Clone)]
pub struct DlsSolution {
    pub config: JointConfig,
    /// Position error norm of `config`, meters.
    pub error_norm: f64,
    pub status: DlsStatus,
    /// Best-so-far error norm per iteration, starting at the initial guess;
    /// non-increasing by construction.
    pub error_trace: Vec<f64>,
}

/// Iterate damped least squares from `q0` toward `target`.
///
/// The initial guess is clamped to the joint limits, as is every iterate,
/// so the returned configuration always respects them. When the target is
/// unreachable the best iterate is returned with
/// [`DlsStatus::NotConverged`].
pub fn solve_dls(
    chain: &KinematicChain,
    target: &Vector3<f64>,
    q0: &JointConfig,
    settings: &DlsSettings,
) -> Result<DlsSolution, ChainError> {
    let mut q = chain.clamped(q0)?;
    let error_at = |q: &JointConfig| -> Result<(Vector3<f64>, f64), ChainError> {
        let e = target - forward_kinematics(chain, q)?.translation;
        let norm = libm::sqrt(e.dot(&e));
        Ok((e, norm))
    };

    let (mut e, mut err) = error_at(&q)?;
    let mut best_q = q.clone();
    let mut best_err = err;
    let mut trace = Vec::with_capacity(settings.max_iters + 1);
    trace.push(best_err);

    for iteration in 0..settings.max_iters {
        if best_err < settings.position_tol {
            return Ok(DlsSolution {
                config: best_q,
                error_norm: best_err,
                status: DlsStatus::Converged {
                    iterations: iteration,
                },
                error_trace: trace,
            });
        }

        let jac = jacobian(chain, &q)?;
        let mut normal = &jac * jac.transpose();
        for i in 0..3 {
            normal[(i, i)] += settings.damping;
        }
        // Symmetric positive definite by construction (damping > 0).
        let y = match nalgebra::linalg::Cholesky::new(normal) {
            Some(chol) => chol.solve(&e),
            None => solve_spd_fallback(&normal, &e),
        };
        let mut dq: Vec<f64> = (jac.transpose() * y).iter().copied().collect();

        for v in &mut dq {
            *v = v.clamp(-settings.step_clamp, settings.step_clamp);
        }
        for (qi, di) in q.values.iter_mut().zip(&dq) {
            *qi += di;
        }
        q = chain.clamped(&q)?;

        let (e_new, err_new) = error_at(&q)?;
        e = e_new;
        err = err_new;
        if err < best_err {
            best_err = err;
            best_q = q.clone();
        }
        trace.push(best_err);
    }

    let status = if best_err < settings.position_tol {
        DlsStatus::Converged {
            iterations: settings.max_iters,
        }
    } else {
        DlsStatus::NotConverged
    };
    Ok(DlsSolution {
        config: best_q,
        error_norm: best_err,
        status,
        error_trace: trace,
    })
}

/// LU fallback for the 3×3 solve; only reachable if Cholesky fails on a
/// numerically degenerate matrix.
fn solve_spd_fallback(m: &Matrix3<f64>, rhs: &Vector3<f64>) -> Vector3<f64> {
    m.lu().solve(rhs).unwrap_or_else(Vector3::zeros)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_config, SampleRng};
    use crate::testutil::{five_dof_arm, planar_two_link};

    #[test]
    fn planar_target_converges_to_straight_configuration() {
        let chain = planar_two_link();
        let sol = solve_dls(
            &chain,
            &Vector3::new(2.0, 0.0, 0.0),
            &JointConfig::new(vec![0.1, -0.1]),
            &DlsSettings::default(),
        )
        .unwrap();
        assert!(sol.status.converged(), "status {:?}", sol.status);
        assert!(sol.error_norm < 1e-6);
        // The straight-out solution is the only one reaching the boundary;
        // a 1e-6 position error there corresponds to a ~2e-3 rad joint gap.
        assert!(sol.config.values[0].abs() < 5e-3);
        assert!(sol.config.values[1].abs() < 5e-3);
    }

    #[test]
    fn zero_initial_error_converges_in_zero_iterations() {
        let chain = planar_two_link();
        let q0 = JointConfig::new(vec![0.4, 0.8]);
        let target = forward_kinematics(&chain, &q0).unwrap().translation;
        let sol = solve_dls(&chain, &target, &q0, &DlsSettings::default()).unwrap();
        assert_eq!(sol.status, DlsStatus::Converged { iterations: 0 });
        assert_eq!(sol.config, q0);
    }

    #[test]
    fn unreachable_target_reports_boundary_distance() {
        let chain = planar_two_link();
        let target = Vector3::new(3.0, 0.0, 0.0);
        let sol = solve_dls(
            &chain,
            &target,
            &JointConfig::new(vec![0.3, 0.3]),
            &DlsSettings::default(),
        )
        .unwrap();
        assert_eq!(sol.status, DlsStatus::NotConverged);
        // Best effort ends at the workspace boundary, one meter short.
        assert!((sol.error_norm - 1.0).abs() < 1e-3, "error {}", sol.error_norm);
    }

    #[test]
    fn best_so_far_trace_is_non_increasing() {
        let chain = planar_two_link();
        let sol = solve_dls(
            &chain,
            &Vector3::new(0.3, 1.2, 0.0),
            &JointConfig::new(vec![2.0, -2.5]),
            &DlsSettings::default(),
        )
        .unwrap();
        for pair in sol.error_trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
        // And the solver actually made progress.
        assert!(sol.error_trace.last().unwrap() < &sol.error_trace[0]);
    }

    #[test]
    fn random_reachable_targets_converge_on_the_fixture_arm() {
        let chain = five_dof_arm();
        let mut rng = SampleRng::from_seed(2024);
        let q0 = chain.mid_config();
        let settings = DlsSettings::default();
        let mut converged = 0;
        let total = 100;
        for _ in 0..total {
            let q = sample_config(&chain, &mut rng);
            let target = forward_kinematics(&chain, &q).unwrap().translation;
            let sol = solve_dls(&chain, &target, &q0, &settings).unwrap();
            if sol.status.converged() && sol.error_norm < 1e-5 {
                converged += 1;
            }
            assert!(chain.within_limits(&sol.config).unwrap());
        }
        assert!(converged >= 95, "only {converged}/{total} targets converged");
    }
}
