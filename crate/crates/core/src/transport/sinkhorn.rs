//! Log-domain Sinkhorn-Knopp iteration.
//!
//! Alternates closed-form updates of the row and column potentials f, g of
//! `Z = exp(f_k + S_kv/kappa + g_v)` until both marginals hold within
//! tolerance. Working with potentials instead of the scaling vectors keeps
//! kappa down to 1e-3 stable: `exp(S/kappa)` alone overflows f64 well
//! before that.

use ndarray::{Array1, Array2};

use super::{
    violations_of, AssignmentMatrix, ScalingVectors, SimilarityMatrix, SolverConfig, TransportError,
};
use crate::linalg::logsumexp;

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub assignment: AssignmentMatrix,
    pub scalings: ScalingVectors,
    pub iterations: usize,
}

/// Solve the entropic assignment problem by alternating marginal fits.
///
/// The result satisfies `Z = diag(mu) * exp(S/kappa) * diag(nu)` with
/// column sums 1 and row sums V/K within `cfg.marginal_tolerance`.
pub fn sinkhorn_assign(
    s: &SimilarityMatrix,
    cfg: &SolverConfig,
) -> Result<SinkhornOutput, TransportError> {
    cfg.validate()?;
    let (k, v) = s.values().dim();
    let a = s.values().mapv(|x| x / cfg.kappa);
    let ln_row_target = (v as f64 / k as f64).ln();

    let mut f = Array1::<f64>::zeros(k);
    let mut g = Array1::<f64>::zeros(v);
    let mut z = Array2::<f64>::zeros((k, v));
    let mut scratch = vec![0.0f64; k.max(v)];

    let mut best: Option<(f64, Array1<f64>, Array1<f64>)> = None;

    for it in 1..=cfg.max_iters {
        // Row potentials: fit row sums to V/K given g.
        for kk in 0..k {
            for vv in 0..v {
                scratch[vv] = a[[kk, vv]] + g[vv];
            }
            f[kk] = ln_row_target - logsumexp(&scratch[..v]);
        }
        // Column potentials: fit column sums to 1 given f.
        for vv in 0..v {
            for kk in 0..k {
                scratch[kk] = a[[kk, vv]] + f[kk];
            }
            g[vv] = -logsumexp(&scratch[..k]);
        }
        if f.iter().chain(g.iter()).any(|x| !x.is_finite()) {
            return Err(TransportError::NumericalOverflow(
                "sinkhorn potentials diverged to a non-finite value".into(),
            ));
        }

        realize(&a, &f, &g, &mut z);
        let (rv, cv) = violations_of(&z);
        let worst = rv.max(cv);
        if best.as_ref().map_or(true, |(b, _, _)| worst < *b) {
            best = Some((worst, f.clone(), g.clone()));
        }
        if rv < cfg.marginal_tolerance && cv < cfg.marginal_tolerance {
            let scalings = scalings_from_potentials(&f, &g)?;
            return Ok(SinkhornOutput {
                assignment: AssignmentMatrix::new(z)?,
                scalings,
                iterations: it,
            });
        }
    }

    let (_, bf, bg) = best.expect("max_iters >= 1");
    realize(&a, &bf, &bg, &mut z);
    let (rv, cv) = violations_of(&z);
    Err(TransportError::NonConvergence {
        iterations: cfg.max_iters,
        row_violation: rv,
        col_violation: cv,
        best: Box::new(AssignmentMatrix::new(z)?),
    })
}

fn realize(a: &Array2<f64>, f: &Array1<f64>, g: &Array1<f64>, z: &mut Array2<f64>) {
    let (k, v) = a.dim();
    for kk in 0..k {
        for vv in 0..v {
            z[[kk, vv]] = (f[kk] + a[[kk, vv]] + g[vv]).exp();
        }
    }
}

/// Turn potentials into strictly positive scaling vectors. A shared
/// constant moves freely between f and g (it cancels inside Z), so the
/// potentials are rebalanced first to keep both exponentials representable.
fn scalings_from_potentials(
    f: &Array1<f64>,
    g: &Array1<f64>,
) -> Result<ScalingVectors, TransportError> {
    let mean_f = f.iter().sum::<f64>() / f.len() as f64;
    let mean_g = g.iter().sum::<f64>() / g.len() as f64;
    let shift = (mean_g - mean_f) / 2.0;
    let mu = f.mapv(|x| (x + shift).exp());
    let nu = g.mapv(|x| (x - shift).exp());
    if mu.iter().chain(nu.iter()).any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(TransportError::NumericalOverflow(
            "scaling vectors left the representable positive range".into(),
        ));
    }
    Ok(ScalingVectors { mu, nu })
}
