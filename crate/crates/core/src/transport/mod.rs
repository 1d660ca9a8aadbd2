//! Entropy-regularized view-to-prototype assignment.
//!
//! Given a K x V similarity matrix S between K prototypes and V view
//! embeddings, the assignment problem maximizes
//!
//! ```text
//!     Tr(Z' S) + kappa * H(Z)
//! ```
//!
//! over nonnegative Z subject to two marginal constraints: every column of
//! Z sums to 1 (each view distributes exactly one unit of mass) and every
//! row sums to V/K (mass is equipartitioned over prototypes, preventing
//! collapse onto a single prototype). H is the elementwise entropy
//! -sum z log z, and kappa > 0 trades assignment sharpness for smoothness.
//!
//! The unique maximizer factorizes as `diag(mu) * exp(S/kappa) * diag(nu)`.
//! Two interchangeable solvers compute it: [`sinkhorn::sinkhorn_assign`]
//! (alternating log-domain rescaling) and [`apdagd::apdagd_assign`]
//! (accelerated primal-dual gradient descent on the dual). Both register
//! behind the [`AssignmentSolver`] trait and are selected by name at
//! runtime.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::linalg;

pub mod apdagd;
pub mod sinkhorn;

pub use apdagd::{apdagd_assign, ApdagdOutput};
pub use sinkhorn::{sinkhorn_assign, SinkhornOutput};

/// Solver outputs may overshoot the unit entry bound by roughly the
/// marginal tolerance; anything beyond this slack is a contract violation.
const ENTRY_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("matrix must be at least 1x1, got {rows}x{cols}")]
    InvalidShape { rows: usize, cols: usize },
    #[error("shape mismatch: similarity is {expected_rows}x{expected_cols}, assignment is {found_rows}x{found_cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("solver config invalid: {0}")]
    InvalidConfig(String),
    #[error(
        "no convergence after {iterations} iterations (row violation {row_violation:.3e}, column violation {col_violation:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        row_violation: f64,
        col_violation: f64,
        /// Best iterate reached before giving up.
        best: Box<AssignmentMatrix>,
    },
    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),
    #[error("unknown solver '{0}'")]
    UnknownSolver(String),
}

/// K x V matrix of prototype/view cosine similarities, `(Q^c)' H^c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self, TransportError> {
        let (rows, cols) = values.dim();
        if rows == 0 || cols == 0 {
            return Err(TransportError::InvalidShape { rows, cols });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(TransportError::InvalidConfig(
                "similarity matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Build from unit-normalized prototype rows (K x D) and view rows (V x D).
    pub fn from_embeddings(prototypes: &Array2<f64>, views: &Array2<f64>) -> Result<Self, TransportError> {
        if prototypes.ncols() != views.ncols() {
            return Err(TransportError::ShapeMismatch {
                expected_rows: prototypes.nrows(),
                expected_cols: prototypes.ncols(),
                found_rows: views.nrows(),
                found_cols: views.ncols(),
            });
        }
        let k = prototypes.nrows();
        let v = views.nrows();
        let mut values = Array2::zeros((k, v));
        for kk in 0..k {
            for vv in 0..v {
                values[[kk, vv]] = linalg::dot(prototypes.row(kk), views.row(vv));
            }
        }
        Self::new(values)
    }

    pub fn prototype_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn view_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// K x V assignment matrix Z: columns sum to 1, rows sum to V/K.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    values: Array2<f64>,
}

impl AssignmentMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self, TransportError> {
        let (rows, cols) = values.dim();
        if rows == 0 || cols == 0 {
            return Err(TransportError::InvalidShape { rows, cols });
        }
        Ok(Self { values })
    }

    pub fn prototype_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn view_count(&self) -> usize {
        self.values.ncols()
    }

    /// Target sum of every row: V/K as a real number.
    pub fn row_marginal(&self) -> f64 {
        self.view_count() as f64 / self.prototype_count() as f64
    }

    /// Target sum of every column.
    pub fn column_marginal(&self) -> f64 {
        1.0
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Scaling vectors of the factorization `diag(mu) * exp(S/kappa) * diag(nu)`.
#[derive(Debug, Clone)]
pub struct ScalingVectors {
    pub mu: Array1<f64>,
    pub nu: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Sinkhorn,
    Apdagd,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Sinkhorn => "sinkhorn",
            SolverKind::Apdagd => "apdagd",
        }
    }

    pub fn parse(name: &str) -> Result<Self, TransportError> {
        match name {
            "sinkhorn" => Ok(SolverKind::Sinkhorn),
            "apdagd" => Ok(SolverKind::Apdagd),
            other => Err(TransportError::UnknownSolver(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Entropy weight kappa > 0.
    pub kappa: f64,
    pub max_iters: usize,
    pub marginal_tolerance: f64,
    pub solver_kind: SolverKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kappa: 0.05,
            max_iters: 1000,
            marginal_tolerance: 1e-6,
            solver_kind: SolverKind::Sinkhorn,
        }
    }
}

impl SolverConfig {
    pub(crate) fn validate(&self) -> Result<(), TransportError> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(TransportError::InvalidConfig(format!(
                "kappa must be positive and finite, got {}",
                self.kappa
            )));
        }
        if !(self.marginal_tolerance > 0.0) {
            return Err(TransportError::InvalidConfig(format!(
                "marginal_tolerance must be positive, got {}",
                self.marginal_tolerance
            )));
        }
        if self.max_iters == 0 {
            return Err(TransportError::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Elementwise entropy H(Z) = -sum z log z with 0 log 0 = 0.
///
/// Entries must lie in [0, 1]; violating that is a contract error.
pub fn entropy(z: &AssignmentMatrix) -> f64 {
    let mut h = 0.0;
    for &x in z.values().iter() {
        assert!(
            (-ENTRY_SLACK..=1.0 + ENTRY_SLACK).contains(&x),
            "entropy: entry {x} outside [0, 1]"
        );
        let x = x.clamp(0.0, 1.0);
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

/// The maximand Tr(Z' S) + kappa * H(Z).
pub fn assignment_objective(
    s: &SimilarityMatrix,
    z: &AssignmentMatrix,
    kappa: f64,
) -> Result<f64, TransportError> {
    if s.values().dim() != z.values().dim() {
        return Err(TransportError::ShapeMismatch {
            expected_rows: s.prototype_count(),
            expected_cols: s.view_count(),
            found_rows: z.prototype_count(),
            found_cols: z.view_count(),
        });
    }
    let mut trace = 0.0;
    for (sv, zv) in s.values().iter().zip(z.values().iter()) {
        trace += sv * zv;
    }
    Ok(trace + kappa * entropy(z))
}

/// Max deviation of row sums from V/K and of column sums from 1.
pub fn marginal_violation(z: &AssignmentMatrix) -> (f64, f64) {
    violations_of(z.values())
}

pub(crate) fn violations_of(values: &Array2<f64>) -> (f64, f64) {
    let (k, v) = values.dim();
    let row_target = v as f64 / k as f64;
    let mut row_violation: f64 = 0.0;
    for row in values.rows() {
        let s: f64 = row.iter().sum();
        row_violation = row_violation.max((s - row_target).abs());
    }
    let mut col_violation: f64 = 0.0;
    for col in values.columns() {
        let s: f64 = col.iter().sum();
        col_violation = col_violation.max((s - 1.0).abs());
    }
    (row_violation, col_violation)
}

/// A solved assignment instance, independent of which solver produced it.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub assignment: AssignmentMatrix,
    /// Present for solvers that expose the diagonal-scaling factorization.
    pub scalings: Option<ScalingVectors>,
    pub iterations: usize,
}

/// One assignment algorithm behind a common interface, selectable by name.
pub trait AssignmentSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, s: &SimilarityMatrix, cfg: &SolverConfig) -> Result<SolverOutput, TransportError>;
}

pub struct SinkhornSolver;

impl AssignmentSolver for SinkhornSolver {
    fn name(&self) -> &'static str {
        "sinkhorn"
    }

    fn solve(&self, s: &SimilarityMatrix, cfg: &SolverConfig) -> Result<SolverOutput, TransportError> {
        let out = sinkhorn_assign(s, cfg)?;
        Ok(SolverOutput {
            assignment: out.assignment,
            scalings: Some(out.scalings),
            iterations: out.iterations,
        })
    }
}

pub struct ApdagdSolver;

impl AssignmentSolver for ApdagdSolver {
    fn name(&self) -> &'static str {
        "apdagd"
    }

    fn solve(&self, s: &SimilarityMatrix, cfg: &SolverConfig) -> Result<SolverOutput, TransportError> {
        let out = apdagd_assign(s, cfg)?;
        Ok(SolverOutput {
            assignment: out.assignment,
            scalings: None,
            iterations: out.iterations,
        })
    }
}

/// All registered solvers.
pub fn solvers() -> Vec<Box<dyn AssignmentSolver>> {
    vec![Box::new(SinkhornSolver), Box::new(ApdagdSolver)]
}

/// Look a solver up by its registered name.
pub fn solver_by_name(name: &str) -> Result<Box<dyn AssignmentSolver>, TransportError> {
    solvers()
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| TransportError::UnknownSolver(name.to_string()))
}

impl SolverKind {
    pub fn solver(self) -> Box<dyn AssignmentSolver> {
        match self {
            SolverKind::Sinkhorn => Box::new(SinkhornSolver),
            SolverKind::Apdagd => Box::new(ApdagdSolver),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn z(values: Array2<f64>) -> AssignmentMatrix {
        AssignmentMatrix::new(values).unwrap()
    }

    #[test]
    fn entropy_uniform_2x2() {
        let h = entropy(&z(array![[0.5, 0.5], [0.5, 0.5]]));
        assert_abs_diff_eq!(h, 2.0 * (2.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn entropy_hard_assignment_is_zero() {
        let h = entropy(&z(array![[1.0, 0.0], [0.0, 1.0]]));
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn entropy_matches_scalar_loop_oracle() {
        let m = array![[0.9, 0.2], [0.1, 0.8]];
        // Independent scalar-loop computation at double precision.
        let mut expected = 0.0f64;
        for &x in &[0.9, 0.2, 0.1, 0.8] {
            expected -= x * f64::ln(x);
        }
        assert_abs_diff_eq!(entropy(&z(m)), expected, epsilon = 1e-15);
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn entropy_rejects_out_of_range_entries() {
        entropy(&z(array![[1.5, 0.0], [0.0, 1.0]]));
    }

    #[test]
    fn objective_reduces_to_entropy_for_zero_similarity() {
        let s = SimilarityMatrix::new(Array2::zeros((2, 2))).unwrap();
        let zz = z(array![[0.5, 0.5], [0.5, 0.5]]);
        let expected = entropy(&zz);
        assert_abs_diff_eq!(assignment_objective(&s, &zz, 1.0).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn objective_trace_of_identity_product() {
        let s = SimilarityMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let zz = z(array![[1.0, 0.0], [0.0, 1.0]]);
        assert_abs_diff_eq!(assignment_objective(&s, &zz, 0.0).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn objective_matches_double_loop_oracle() {
        // Random-ish fixed 3x6 instance, checked against a scalar double loop.
        let s_values = array![
            [0.31, -0.22, 0.75, 0.10, -0.64, 0.42],
            [-0.18, 0.56, -0.33, 0.08, 0.91, -0.77],
            [0.05, 0.44, 0.27, -0.59, 0.13, 0.66]
        ];
        let z_values = array![
            [0.5, 0.1, 0.7, 0.3, 0.2, 0.2],
            [0.3, 0.6, 0.2, 0.3, 0.5, 0.1],
            [0.2, 0.3, 0.1, 0.4, 0.3, 0.7]
        ];
        let mut trace = 0.0;
        let mut h = 0.0;
        for kk in 0..3 {
            for vv in 0..6 {
                trace += z_values[[kk, vv]] * s_values[[kk, vv]];
                let x: f64 = z_values[[kk, vv]];
                h -= x * x.ln();
            }
        }
        let kappa = 0.7;
        let got = assignment_objective(
            &SimilarityMatrix::new(s_values).unwrap(),
            &z(z_values),
            kappa,
        )
        .unwrap();
        assert_abs_diff_eq!(got, trace + kappa * h, epsilon = 1e-12);
    }

    #[test]
    fn objective_rejects_shape_mismatch() {
        let s = SimilarityMatrix::new(Array2::zeros((2, 3))).unwrap();
        let zz = z(Array2::from_elem((2, 2), 0.5));
        assert!(matches!(
            assignment_objective(&s, &zz, 1.0),
            Err(TransportError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn violation_zero_for_exact_uniform() {
        let (rv, cv) = marginal_violation(&z(Array2::from_elem((2, 4), 0.5)));
        assert_eq!((rv, cv), (0.0, 0.0));
    }

    #[test]
    fn violation_counts_row_excess() {
        let (rv, cv) = marginal_violation(&z(array![[1.0, 1.0], [0.0, 0.0]]));
        assert_abs_diff_eq!(rv, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cv, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn similarity_from_embeddings_is_cosine() {
        let protos = array![[1.0, 0.0], [0.0, 1.0]];
        let views = array![[0.6, 0.8], [1.0, 0.0]];
        let s = SimilarityMatrix::from_embeddings(&protos, &views).unwrap();
        assert_abs_diff_eq!(s.values()[[0, 0]], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values()[[1, 0]], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values()[[0, 1]], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn registry_finds_both_solvers() {
        let names: Vec<_> = solvers().iter().map(|s| s.name()).collect();
        assert_eq!(names, vec!["sinkhorn", "apdagd"]);
        assert!(solver_by_name("sinkhorn").is_ok());
        assert!(solver_by_name("apdagd").is_ok());
        assert!(matches!(
            solver_by_name("lemon"),
            Err(TransportError::UnknownSolver(_))
        ));
    }

    #[test]
    fn solver_kind_round_trips_names() {
        for kind in [SolverKind::Sinkhorn, SolverKind::Apdagd] {
            assert_eq!(SolverKind::parse(kind.as_str()).unwrap(), kind);
        }
    }
}
