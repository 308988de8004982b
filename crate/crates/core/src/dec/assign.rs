use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

use super::kmeans::sq_dist;

/// Floor applied to `q` inside the logarithm of the KL divergence.
pub const KL_EPSILON: f64 = 1e-12;

fn check_dims(z: ArrayView2<f64>, centers: ArrayView2<f64>) -> Result<()> {
    if z.ncols() != centers.ncols() {
        return Err(Error::Dimension(format!(
            "embedding width {} vs centre width {}",
            z.ncols(),
            centers.ncols()
        )));
    }
    if centers.nrows() == 0 {
        return Err(Error::Dimension("no cluster centres".into()));
    }
    Ok(())
}

/// Student-t kernel `(1 + ‖z_i − μ_j‖²)⁻¹` for every point/centre pair.
fn kernel(z: ArrayView2<f64>, centers: ArrayView2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((z.nrows(), centers.nrows()), |(i, j)| 1.0 / (1.0 + sq_dist(z.row(i), centers.row(j))))
}

fn normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Soft assignment `q_ij` under a Student-t kernel with one degree of freedom.
pub fn soft_assign(z: ArrayView2<f64>, centers: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_dims(z, centers)?;
    let mut q = kernel(z, centers);
    normalize_rows(&mut q);
    Ok(q)
}

/// Sharpened target `p_ij ∝ q_ij² / f_j` with cluster frequency `f_j = Σ_i q_ij`.
///
/// Columns with zero frequency contribute nothing.
pub fn target_distribution(q: ArrayView2<f64>) -> Array2<f64> {
    let freq = q.sum_axis(Axis(0));
    let mut p = Array2::from_shape_fn(q.dim(), |(i, j)| {
        if freq[j] > 0.0 {
            q[[i, j]] * q[[i, j]] / freq[j]
        } else {
            0.0
        }
    });
    normalize_rows(&mut p);
    p
}

/// Row-averaged `Σ_j p_ij ln(p_ij / q_ij)`, with `0·ln 0 = 0`.
///
/// Each term is evaluated as `p ln(p/q) − p + q`, which is non-negative on
/// its own and sums to the same value when rows are normalized, so rounding
/// can never push the result below zero.
pub fn kl_divergence(p: ArrayView2<f64>, q: ArrayView2<f64>) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension(format!("P {:?} vs Q {:?}", p.dim(), q.dim())));
    }
    let n = p.nrows().max(1) as f64;
    let total: f64 = p
        .iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| {
            let log_term = if pi > 0.0 { pi * (pi / qi.max(KL_EPSILON)).ln() } else { 0.0 };
            (log_term - pi + qi).max(0.0)
        })
        .sum();
    Ok(total / n)
}

/// KL(P‖Q(z, μ)) for a fixed target `P`, with gradients w.r.t. `z` and `μ`.
pub fn kl_loss_and_grads(
    z: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    p: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    check_dims(z, centers)?;
    let ker = kernel(z, centers);
    let mut q = ker.clone();
    normalize_rows(&mut q);
    let loss = kl_divergence(p, q.view())?;
    let n = z.nrows().max(1) as f64;
    let mut grad_z = Array2::zeros(z.dim());
    let mut grad_mu = Array2::zeros(centers.dim());
    for i in 0..z.nrows() {
        for j in 0..centers.nrows() {
            let w = 2.0 / n * (p[[i, j]] - q[[i, j]]) * ker[[i, j]];
            if w == 0.0 {
                continue;
            }
            for d in 0..z.ncols() {
                let diff = z[[i, d]] - centers[[j, d]];
                grad_z[[i, d]] += w * diff;
                grad_mu[[j, d]] -= w * diff;
            }
        }
    }
    Ok((loss, grad_z, grad_mu))
}

/// Index of the largest entry in each row, lowest index on ties.
pub fn hard_assignments(q: ArrayView2<f64>) -> Vec<usize> {
    q.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, RngStream};
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn limit_and_symmetry_cases() {
        let q = soft_assign(array![[0.0, 0.0]].view(), array![[0.0, 0.0], [1000.0, 0.0], [0.0, 1000.0]].view()).unwrap();
        assert!(q[[0, 0]] >= 0.999);
        let q = soft_assign(array![[0.0]].view(), array![[-1.0], [1.0]].view()).unwrap();
        assert_eq!(q.row(0).to_vec(), vec![0.5, 0.5]);
        let q = soft_assign(array![[0.0]].view(), array![[0.0], [1.0]].view()).unwrap();
        assert!((q[[0, 0]] - 2.0 / 3.0).abs() < 1e-15 && (q[[0, 1]] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn target_hand_values() {
        let one_hot = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(target_distribution(one_hot.view()), one_hot);
        let p = target_distribution(array![[2.0 / 3.0, 1.0 / 3.0]].view());
        assert!((p[[0, 0]] - 2.0 / 3.0).abs() < 1e-15);
        // empty column is guarded
        let p = target_distribution(array![[1.0, 0.0], [1.0, 0.0]].view());
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn kl_hand_values() {
        let q = array![[0.3, 0.7]];
        assert_eq!(kl_divergence(q.view(), q.view()).unwrap(), 0.0);
        let kl = kl_divergence(array![[1.0, 0.0]].view(), array![[0.5, 0.5]].view()).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-15);
        let kl = kl_divergence(array![[1.0, 0.0]].view(), array![[0.0, 1.0]].view()).unwrap();
        assert!(kl.is_finite());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(31, "klgrad");
        let z = Array2::from_shape_fn((6, 3), |_| rng.random_range(-2.0..2.0));
        let mu = Array2::from_shape_fn((3, 3), |_| rng.random_range(-2.0..2.0));
        let p = target_distribution(soft_assign(z.view(), mu.view()).unwrap().view());
        let (_, gz, gmu) = kl_loss_and_grads(z.view(), mu.view(), p.view()).unwrap();

        let fz = |x: &[f64]| {
            let zz = Array2::from_shape_vec((6, 3), x.to_vec()).unwrap();
            kl_divergence(p.view(), soft_assign(zz.view(), mu.view()).unwrap().view()).unwrap()
        };
        assert!(grad_check(fz, z.as_slice().unwrap(), gz.as_slice().unwrap(), 1e-5) <= 1e-4);
        let fmu = |x: &[f64]| {
            let m = Array2::from_shape_vec((3, 3), x.to_vec()).unwrap();
            kl_divergence(p.view(), soft_assign(z.view(), m.view()).unwrap().view()).unwrap()
        };
        assert!(grad_check(fmu, mu.as_slice().unwrap(), gmu.as_slice().unwrap(), 1e-5) <= 1e-4);
    }

    #[test]
    fn hard_assignment_is_row_argmax() {
        assert_eq!(hard_assignments(array![[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]].view()), vec![1, 0, 0]);
    }
}
