//! Adaptive primal-dual accelerated gradient descent on the dual of the
//! entropic assignment program.
//!
//! The primal `min <-S, Z> + kappa * sum z log z` subject to the two
//! marginal constraints has the smooth dual
//!
//! ```text
//!     f(y, w) = kappa * sum_kv exp((y_k + w_v + S_kv)/kappa - 1)
//!               - <y, r> - <w, 1>,        r_k = V/K,
//! ```
//!
//! whose gradient is the marginal residual of `Z(y, w) = exp(...)`. The
//! solver runs Nesterov-style acceleration with a line search that doubles
//! or halves the local Lipschitz estimate, and recovers the primal as the
//! running alpha-weighted average of the `Z(lambda_md)` iterates.

use ndarray::{Array1, Array2};

use super::{violations_of, AssignmentMatrix, SimilarityMatrix, SolverConfig, TransportError};

#[derive(Debug, Clone)]
pub struct ApdagdOutput {
    pub assignment: AssignmentMatrix,
    pub iterations: usize,
}

/// Exponent cap: dual overshoots during line search are reported as +inf
/// instead of overflowing (optimal exponents are below ln(V/K)).
const EXP_CAP: f64 = 300.0;
/// Floor on the Lipschitz estimate so successive halvings cannot push the
/// line search arbitrarily far below the true local curvature.
const LIPSCHITZ_FLOOR: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 400;

struct DualEval {
    value: f64,
    z: Array2<f64>,
    grad_y: Array1<f64>,
    grad_w: Array1<f64>,
}

struct Dual {
    /// S/kappa - 1, the lambda-independent part of the exponent.
    base: Array2<f64>,
    kappa: f64,
    row_target: f64,
}

impl Dual {
    fn new(s: &SimilarityMatrix, kappa: f64) -> Self {
        let (k, v) = s.values().dim();
        Self {
            base: s.values().mapv(|x| x / kappa - 1.0),
            kappa,
            row_target: v as f64 / k as f64,
        }
    }

    fn value(&self, y: &Array1<f64>, w: &Array1<f64>) -> f64 {
        let (k, v) = self.base.dim();
        let mut sum = 0.0;
        for kk in 0..k {
            for vv in 0..v {
                let e = y[kk] / self.kappa + w[vv] / self.kappa + self.base[[kk, vv]];
                if e > EXP_CAP {
                    return f64::INFINITY;
                }
                sum += e.exp();
            }
        }
        let lin_y: f64 = y.iter().map(|x| x * self.row_target).sum();
        let lin_w: f64 = w.iter().sum();
        self.kappa * sum - lin_y - lin_w
    }

    fn eval(&self, y: &Array1<f64>, w: &Array1<f64>) -> DualEval {
        let (k, v) = self.base.dim();
        let mut z = Array2::zeros((k, v));
        let mut sum = 0.0;
        let mut finite = true;
        for kk in 0..k {
            for vv in 0..v {
                let e = y[kk] / self.kappa + w[vv] / self.kappa + self.base[[kk, vv]];
                if e > EXP_CAP {
                    finite = false;
                    break;
                }
                let zv = e.exp();
                z[[kk, vv]] = zv;
                sum += zv;
            }
            if !finite {
                break;
            }
        }
        if !finite {
            return DualEval {
                value: f64::INFINITY,
                z,
                grad_y: Array1::zeros(k),
                grad_w: Array1::zeros(v),
            };
        }
        let mut grad_y = Array1::zeros(k);
        for kk in 0..k {
            grad_y[kk] = z.row(kk).iter().sum::<f64>() - self.row_target;
        }
        let mut grad_w = Array1::zeros(v);
        for vv in 0..v {
            grad_w[vv] = z.column(vv).iter().sum::<f64>() - 1.0;
        }
        let lin_y: f64 = y.iter().map(|x| x * self.row_target).sum();
        let lin_w: f64 = w.iter().sum();
        DualEval {
            value: self.kappa * sum - lin_y - lin_w,
            z,
            grad_y,
            grad_w,
        }
    }
}

/// Solve the same entropic program as the Sinkhorn solver, from the dual
/// side. Output satisfies the identical marginal tolerances.
pub fn apdagd_assign(
    s: &SimilarityMatrix,
    cfg: &SolverConfig,
) -> Result<ApdagdOutput, TransportError> {
    cfg.validate()?;
    let (k, v) = s.values().dim();
    let dual = Dual::new(s, cfg.kappa);

    let mut lipschitz = 1.0f64;
    let mut beta = 0.0f64;
    let mut eta_y = Array1::<f64>::zeros(k);
    let mut eta_w = Array1::<f64>::zeros(v);
    let mut zeta_y = Array1::<f64>::zeros(k);
    let mut zeta_w = Array1::<f64>::zeros(v);
    let mut x_hat = Array2::<f64>::zeros((k, v));

    let mut best: Option<(f64, Array2<f64>)> = None;

    for it in 1..=cfg.max_iters {
        let mut m = (lipschitz / 2.0).max(LIPSCHITZ_FLOOR);
        let mut accepted = None;
        for _ in 0..MAX_DOUBLINGS {
            m *= 2.0;
            let alpha = (1.0 + (1.0 + 4.0 * m * beta).sqrt()) / (2.0 * m);
            let beta_new = beta + alpha;
            let lam_y = combine(alpha, &zeta_y, beta, &eta_y, beta_new);
            let lam_w = combine(alpha, &zeta_w, beta, &eta_w, beta_new);
            let md = dual.eval(&lam_y, &lam_w);
            if !md.value.is_finite() {
                continue;
            }
            let zeta_y_new = &zeta_y - &(alpha * &md.grad_y);
            let zeta_w_new = &zeta_w - &(alpha * &md.grad_w);
            let eta_y_new = combine(alpha, &zeta_y_new, beta, &eta_y, beta_new);
            let eta_w_new = combine(alpha, &zeta_w_new, beta, &eta_w, beta_new);
            let f_eta = dual.value(&eta_y_new, &eta_w_new);
            if !f_eta.is_finite() {
                continue;
            }
            let dy = &eta_y_new - &lam_y;
            let dw = &eta_w_new - &lam_w;
            let lin: f64 = md
                .grad_y
                .iter()
                .zip(dy.iter())
                .chain(md.grad_w.iter().zip(dw.iter()))
                .map(|(g, d)| g * d)
                .sum();
            let sq: f64 = dy.iter().chain(dw.iter()).map(|d| d * d).sum();
            let rhs = md.value + lin + 0.5 * m * sq;
            if f_eta <= rhs + 1e-14 * (1.0 + md.value.abs()) {
                accepted = Some((alpha, beta_new, md.z, zeta_y_new, zeta_w_new, eta_y_new, eta_w_new));
                break;
            }
        }
        let Some((alpha, beta_new, z_md, zy, zw, ey, ew)) = accepted else {
            return Err(TransportError::NumericalOverflow(
                "apdagd line search exhausted its doubling budget".into(),
            ));
        };
        lipschitz = (m / 2.0).max(LIPSCHITZ_FLOOR);

        // Weighted primal average.
        x_hat = (alpha * &z_md + beta * &x_hat) / beta_new;
        beta = beta_new;
        zeta_y = zy;
        zeta_w = zw;
        eta_y = ey;
        eta_w = ew;

        // Either primal candidate may reach feasibility first; both
        // converge to the same unique optimum.
        for candidate in [&x_hat, &z_md] {
            let (rv, cv) = violations_of(candidate);
            if rv < cfg.marginal_tolerance && cv < cfg.marginal_tolerance {
                return Ok(ApdagdOutput {
                    assignment: AssignmentMatrix::new(candidate.clone())?,
                    iterations: it,
                });
            }
            let worst = rv.max(cv);
            if best.as_ref().map_or(true, |(b, _)| worst < *b) {
                best = Some((worst, candidate.clone()));
            }
        }
    }

    let (_, z) = best.expect("max_iters >= 1");
    let (rv, cv) = violations_of(&z);
    Err(TransportError::NonConvergence {
        iterations: cfg.max_iters,
        row_violation: rv,
        col_violation: cv,
        best: Box::new(AssignmentMatrix::new(z)?),
    })
}

fn combine(
    alpha: f64,
    za: &Array1<f64>,
    beta: f64,
    zb: &Array1<f64>,
    beta_new: f64,
) -> Array1<f64> {
    let mut out = Array1::zeros(za.len());
    for i in 0..za.len() {
        out[i] = (alpha * za[i] + beta * zb[i]) / beta_new;
    }
    out
}
