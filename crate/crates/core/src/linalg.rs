//! Small shared numeric helpers. Reductions run in index order so that
//! identical inputs give bit-identical results.

use ndarray::{Array1, Array2, ArrayView1};

/// Numerically stable log(sum(exp(x_i))) over a slice.
/// Returns -inf for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += (x - max).exp();
    }
    max + sum.ln()
}

pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm(v: ArrayView1<f64>) -> f64 {
    dot(v, v).sqrt()
}

/// Normalize every row of `m` to unit l2 norm. Rows with norm <= `floor`
/// are reported via the returned index instead of being divided.
pub fn normalize_rows(m: &Array2<f64>, floor: f64) -> Result<Array2<f64>, usize> {
    let mut out = m.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n <= floor {
            return Err(i);
        }
        row.mapv_inplace(|x| x / n);
    }
    Ok(out)
}

/// Backward pass of y = u / ||u||: maps an upstream gradient g = dL/dy to
/// dL/du = (g - (g . y) y) / ||u||.
pub fn normalize_backward(y: ArrayView1<f64>, u_norm: f64, g: ArrayView1<f64>) -> Array1<f64> {
    let gy = dot(g, y);
    let mut out = Array1::zeros(g.len());
    for i in 0..g.len() {
        out[i] = (g[i] - gy * y[i]) / u_norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn logsumexp_matches_naive_on_small_values() {
        let xs = [0.3f64, -1.2, 0.7];
        let naive = xs.iter().map(|x| f64::exp(*x)).sum::<f64>().ln();
        assert_abs_diff_eq!(logsumexp(&xs), naive, epsilon = 1e-14);
    }

    #[test]
    fn logsumexp_survives_large_values() {
        let xs = [1000.0, 999.0];
        let expected = 1000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert_abs_diff_eq!(logsumexp(&xs), expected, epsilon = 1e-12);
    }

    #[test]
    fn logsumexp_empty_is_neg_inf() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn normalize_rows_unit_norm() {
        let m = array![[3.0, 4.0], [0.0, 2.0]];
        let n = normalize_rows(&m, 1e-12).unwrap();
        assert_abs_diff_eq!(norm(n.row(0)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n[[0, 0]], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn normalize_rows_reports_degenerate_row() {
        let m = array![[1.0, 0.0], [0.0, 0.0]];
        assert_eq!(normalize_rows(&m, 1e-12), Err(1));
    }

    #[test]
    fn normalize_backward_kills_parallel_component() {
        // Upstream gradient parallel to y projects to zero.
        let y = array![1.0, 0.0];
        let g = array![2.0, 0.0];
        let d = normalize_backward(y.view(), 1.0, g.view());
        assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn normalize_backward_passes_orthogonal_component() {
        let y = array![1.0, 0.0];
        let g = array![0.0, 3.0];
        let d = normalize_backward(y.view(), 1.0, g.view());
        assert_abs_diff_eq!(d[1], 3.0, epsilon = 1e-15);
    }
}
