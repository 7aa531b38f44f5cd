//! Weighted projection onto constraint cones.
//!
//! Solves `min (x - z)' W (x - z)` subject to per-coordinate constraints
//! from a [`ConeSpec`], with `W` symmetric positive definite. The algorithm
//! is a primal active-set method in the style of Lawson and Hanson's NNLS:
//! start from the fully-constrained vertex, repeatedly solve the
//! equality-restricted problem on the passive coordinates, clip infeasible
//! steps at the nearest blocking bound, and release active constraints whose
//! multiplier has the wrong sign. Ties are broken by lowest index (Bland's
//! rule), which makes the pivot sequence deterministic and cycle-free.
//!
//! Problem sizes here are tiny (a handful of parameters), so each
//! subproblem is solved by a fresh Cholesky factorization rather than
//! factor updates.

use crate::cone::{ConeSpec, Constraint};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};

/// Relative tolerance for the symmetry check on the weight matrix.
const SYMMETRY_TOL: f64 = 1e-10;

/// A weighted least-distance problem: `min (x - center)' weight (x - center)`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    weight: Mat,
    center: Vec<f64>,
}

impl QuadraticProblem {
    /// Builds a problem, checking that `weight` is square, matches the
    /// center's dimension, and is symmetric to within a relative tolerance
    /// of `1e-10`. Positive definiteness is verified by the solver when it
    /// factors the matrix.
    pub fn new(weight: Mat, center: Vec<f64>) -> Result<Self> {
        if weight.rows() != weight.cols() {
            return Err(Error::DimensionMismatch {
                context: "weight matrix must be square",
                expected: weight.rows(),
                got: weight.cols(),
            });
        }
        if weight.rows() != center.len() {
            return Err(Error::DimensionMismatch {
                context: "weight matrix vs center vector",
                expected: weight.rows(),
                got: center.len(),
            });
        }
        if !weight.is_empty() && weight.asymmetry() > SYMMETRY_TOL {
            return Err(Error::NotPositiveDefinite { context: "weight matrix is not symmetric" });
        }
        Ok(QuadraticProblem { weight, center })
    }

    /// Problem dimension.
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The weight matrix `W`.
    pub fn weight(&self) -> &Mat {
        &self.weight
    }

    /// The projection center `z`.
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Objective `(x - z)' W (x - z)` at an arbitrary point.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "objective_at dimension mismatch");
        let diff: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.weight.quad_form(&diff)
    }
}

/// Solution of a cone projection.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// The minimizing point, in the full coordinate space.
    pub minimizer: Vec<f64>,
    /// Objective value at the minimizer.
    pub objective: f64,
    /// Indices whose constraint holds with equality at the solution
    /// (pinned-to-zero coordinates and lower bounds that are attained),
    /// in increasing order.
    pub active_set: Vec<usize>,
    /// Number of equality-restricted subproblems solved.
    pub iterations: usize,
}

/// Projects the problem's center onto the cone in the `W`-metric.
pub fn project_onto_cone(problem: &QuadraticProblem, cone: &ConeSpec) -> Result<ProjectionResult> {
    let d = problem.dim();
    if cone.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "cone vs problem dimension",
            expected: d,
            got: cone.dim(),
        });
    }
    // Factoring the full weight both certifies positive definiteness and
    // covers the all-coordinates-passive subproblem.
    Cholesky::new(problem.weight(), "projection weight")?;

    // Coordinates pinned to zero are eliminated up front; the solver works
    // in the remaining coordinates against a shifted center.
    let pinned: Vec<usize> =
        (0..d).filter(|&i| cone.constraint(i) == Constraint::FixedZero).collect();
    let reduced: Vec<usize> =
        (0..d).filter(|&i| cone.constraint(i) != Constraint::FixedZero).collect();
    let r = reduced.len();

    let mut minimizer = vec![0.0; d];
    if r == 0 {
        return Ok(ProjectionResult {
            objective: problem.objective_at(&minimizer),
            minimizer,
            active_set: pinned,
            iterations: 0,
        });
    }

    let w_rr = problem.weight().submatrix(&reduced, &reduced);
    // Shifted center: with x_E pinned at zero, the objective restricted to
    // the remaining coordinates is (x_R - c)' W_RR (x_R - c) + const, where
    // c = z_R + W_RR^{-1} W_RE z_E.
    let center_r: Vec<f64> = reduced.iter().map(|&i| problem.center()[i]).collect();
    let chol_rr = Cholesky::new(&w_rr, "projection weight (reduced)")?;
    let shifted_center: Vec<f64> = if pinned.is_empty() {
        center_r.clone()
    } else {
        let rhs: Vec<f64> = reduced
            .iter()
            .map(|&i| pinned.iter().map(|&e| problem.weight()[(i, e)] * problem.center()[e]).sum())
            .collect();
        let u = chol_rr.solve_vec(&rhs);
        center_r.iter().zip(&u).map(|(c, v)| c + v).collect()
    };

    // Lower bounds in reduced coordinates; `None` marks a free coordinate.
    let bounds: Vec<Option<f64>> = reduced
        .iter()
        .map(|&i| match cone.constraint(i) {
            Constraint::LowerBound(l) => Some(l),
            Constraint::Free => None,
            Constraint::FixedZero => unreachable!("pinned coordinates were eliminated"),
        })
        .collect();
    let snap_tol = |l: f64| 1e-12 * (1.0 + l.abs());

    // Working set: `true` means the coordinate is held at its lower bound.
    // Start at the fully-constrained vertex.
    let mut active: Vec<bool> = bounds.iter().map(Option::is_some).collect();
    let mut x: Vec<f64> =
        bounds.iter().zip(&shifted_center).map(|(b, &c)| b.unwrap_or(c)).collect();

    let gradient_tol = 1e-8 * (1.0 + problem.weight().max_abs());
    let max_pivots = 50 * d.max(1);
    let mut iterations = 0usize;

    loop {
        iterations += 1;
        if iterations > max_pivots {
            return Err(Error::MaxIterationsExceeded { max_iterations: max_pivots, dim: d });
        }

        let passive_idx: Vec<usize> = (0..r).filter(|&i| !active[i]).collect();
        let active_idx: Vec<usize> = (0..r).filter(|&i| active[i]).collect();

        // Candidate: active coordinates at their bounds, passive coordinates
        // from the equality-restricted minimization
        //   W_PP (x_P - c_P) = -W_PA (l_A - c_A).
        let mut candidate: Vec<f64> = (0..r)
            .map(|i| if active[i] { bounds[i].expect("active implies bounded") } else { x[i] })
            .collect();
        if !passive_idx.is_empty() {
            let w_pp = w_rr.submatrix(&passive_idx, &passive_idx);
            let chol_pp = Cholesky::new(&w_pp, "projection weight (passive block)")?;
            let rhs: Vec<f64> = passive_idx
                .iter()
                .map(|&i| {
                    -active_idx
                        .iter()
                        .map(|&a| {
                            w_rr[(i, a)] * (bounds[a].expect("active implies bounded")
                                - shifted_center[a])
                        })
                        .sum::<f64>()
                })
                .collect();
            let u = chol_pp.solve_vec(&rhs);
            for (k, &i) in passive_idx.iter().enumerate() {
                candidate[i] = shifted_center[i] + u[k];
            }
        }

        // Ratio test: how far toward the candidate can we move without a
        // passive coordinate crossing its bound?
        let mut step = 1.0f64;
        let mut blocker: Option<usize> = None;
        for &i in &passive_idx {
            if let Some(l) = bounds[i] {
                if candidate[i] < l - snap_tol(l) {
                    let ratio = (x[i] - l) / (x[i] - candidate[i]);
                    // Strict comparison keeps the lowest-index blocker on ties.
                    if ratio < step {
                        step = ratio;
                        blocker = Some(i);
                    }
                }
            }
        }

        if let Some(b) = blocker {
            for &i in &passive_idx {
                x[i] += step * (candidate[i] - x[i]);
                if let Some(l) = bounds[i] {
                    // Guard against roundoff drifting a coordinate below its
                    // bound during the partial step.
                    if x[i] < l {
                        x[i] = l;
                    }
                }
            }
            active[b] = true;
            continue;
        }

        // Candidate is feasible: accept it, snapping marginal roundoff onto
        // the bounds so the feasibility contract holds exactly.
        for &i in &passive_idx {
            x[i] = candidate[i];
            if let Some(l) = bounds[i] {
                if x[i] < l {
                    x[i] = l;
                }
            }
        }
        for &i in &active_idx {
            x[i] = bounds[i].expect("active implies bounded");
        }

        // Multiplier check: at a constrained minimum the gradient must
        // vanish on passive coordinates (true by construction) and point
        // into the feasible region on active ones.
        let diff: Vec<f64> = x.iter().zip(&shifted_center).map(|(a, c)| a - c).collect();
        let gradient: Vec<f64> = w_rr.mul_vec(&diff).iter().map(|g| 2.0 * g).collect();
        let release = active_idx.iter().find(|&&i| gradient[i] < -gradient_tol);
        match release {
            Some(&i) => {
                active[i] = false;
            }
            None => break,
        }
    }

    for (k, &i) in reduced.iter().enumerate() {
        minimizer[i] = x[k];
    }
    let objective = problem.objective_at(&minimizer);
    let mut active_set = pinned;
    for (k, &i) in reduced.iter().enumerate() {
        if let Some(l) = bounds[k] {
            if x[k] == l {
                active_set.push(i);
            }
        }
    }
    active_set.sort_unstable();
    Ok(ProjectionResult { minimizer, objective, active_set, iterations })
}

/// The minimum of the weighted distance over the cone; equals
/// [`project_onto_cone`]'s objective.
pub fn infimum_over_cone(problem: &QuadraticProblem, cone: &ConeSpec) -> Result<f64> {
    project_onto_cone(problem, cone).map(|res| res.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nonneg_problem(weight: Mat, center: Vec<f64>) -> (QuadraticProblem, ConeSpec) {
        let d = center.len();
        (QuadraticProblem::new(weight, center).unwrap(), ConeSpec::nonnegative(d))
    }

    #[test]
    fn interior_center_projects_to_itself() {
        let (p, cone) = nonneg_problem(Mat::identity(2), vec![1.0, 2.0]);
        let res = project_onto_cone(&p, &cone).unwrap();
        assert_eq!(res.minimizer, vec![1.0, 2.0]);
        assert_eq!(res.objective, 0.0);
        assert!(res.active_set.is_empty());
    }

    #[test]
    fn fully_negative_center_projects_to_origin() {
        let (p, cone) = nonneg_problem(Mat::identity(2), vec![-1.0, -1.0]);
        let res = project_onto_cone(&p, &cone).unwrap();
        assert_eq!(res.minimizer, vec![0.0, 0.0]);
        assert_relative_eq!(res.objective, 2.0, max_relative = 1e-14);
        assert_eq!(res.active_set, vec![0, 1]);
    }

    #[test]
    fn correlated_weight_pulls_free_coordinate_off_center() {
        // W = inv([[1, 0.5], [0.5, 1]]) = [[4/3, -2/3], [-2/3, 4/3]].
        // Projecting z = (-1, 0.5) onto [0, inf) x R pins x0 = 0 and the
        // cross term drags x1 up to 1; the objective is 1 by direct
        // substitution.
        let w = Mat::from_rows(&[
            vec![4.0 / 3.0, -2.0 / 3.0],
            vec![-2.0 / 3.0, 4.0 / 3.0],
        ])
        .unwrap();
        let p = QuadraticProblem::new(w, vec![-1.0, 0.5]).unwrap();
        let cone =
            ConeSpec::new(vec![Constraint::LowerBound(0.0), Constraint::Free]).unwrap();
        let res = project_onto_cone(&p, &cone).unwrap();
        assert_relative_eq!(res.minimizer[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(res.minimizer[1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(res.objective, 1.0, max_relative = 1e-12);
        assert_eq!(res.active_set, vec![0]);
    }

    #[test]
    fn pinned_coordinate_shifts_the_reduced_center() {
        // With x0 pinned at zero and W = [[2, 1], [1, 2]], the coordinate
        // x1 sees an effective center -2 + (1/2)(1)(1) = -1.5, so it clips
        // to its bound at 0. Objective at (0, 0) from z = (1, -2) is 6.
        let w = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let p = QuadraticProblem::new(w, vec![1.0, -2.0]).unwrap();
        let cone =
            ConeSpec::new(vec![Constraint::FixedZero, Constraint::LowerBound(0.0)]).unwrap();
        let res = project_onto_cone(&p, &cone).unwrap();
        assert_eq!(res.minimizer, vec![0.0, 0.0]);
        assert_relative_eq!(res.objective, 6.0, max_relative = 1e-13);
        assert_eq!(res.active_set, vec![0, 1]);
    }

    #[test]
    fn negative_lower_bounds_are_respected() {
        let (w, z) = (Mat::identity(3), vec![-5.0, -0.25, 4.0]);
        let p = QuadraticProblem::new(w, z).unwrap();
        let cone = ConeSpec::new(vec![
            Constraint::LowerBound(-1.0),
            Constraint::LowerBound(-1.0),
            Constraint::LowerBound(-1.0),
        ])
        .unwrap();
        let res = project_onto_cone(&p, &cone).unwrap();
        assert_eq!(res.minimizer, vec![-1.0, -0.25, 4.0]);
        assert_relative_eq!(res.objective, 16.0, max_relative = 1e-14);
        assert_eq!(res.active_set, vec![0]);
    }

    #[test]
    fn all_pinned_cone_returns_origin() {
        let p = QuadraticProblem::new(Mat::identity(2), vec![3.0, -4.0]).unwrap();
        let cone = ConeSpec::new(vec![Constraint::FixedZero, Constraint::FixedZero]).unwrap();
        let res = project_onto_cone(&p, &cone).unwrap();
        assert_eq!(res.minimizer, vec![0.0, 0.0]);
        assert_relative_eq!(res.objective, 25.0, max_relative = 1e-14);
        assert_eq!(res.active_set, vec![0, 1]);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn asymmetric_weight_is_rejected() {
        let mut w = Mat::identity(2);
        w[(0, 1)] = 0.3;
        assert!(matches!(
            QuadraticProblem::new(w, vec![0.0, 0.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn indefinite_weight_is_rejected_at_solve_time() {
        let w = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let p = QuadraticProblem::new(w, vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            project_onto_cone(&p, &ConeSpec::nonnegative(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = QuadraticProblem::new(Mat::identity(2), vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            project_onto_cone(&p, &ConeSpec::nonnegative(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(QuadraticProblem::new(Mat::identity(2), vec![0.0; 3]).is_err());
    }

    #[test]
    fn infimum_matches_projection_objective() {
        let w = Mat::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let p = QuadraticProblem::new(w, vec![-1.0, -2.0]).unwrap();
        let cone = ConeSpec::nonnegative(2);
        let res = project_onto_cone(&p, &cone).unwrap();
        assert_eq!(infimum_over_cone(&p, &cone).unwrap(), res.objective);
    }
}
