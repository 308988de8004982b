use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// Logistic function, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean squared error over all elements and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::Dimension(format!(
            "mse: prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len().max(1) as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

/// Mean binary cross-entropy on raw logits, with its gradient.
///
/// Uses `max(x, 0) − x·y + ln(1 + e^{−|x|})` so saturated logits never
/// overflow.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "bce: {} logits vs {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Validation(format!("label {bad} is not binary")));
    }
    if logits.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(&x, &y)| {
            loss += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
            (sigmoid(x) - y) / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Inverted dropout. Returns the output and the keep mask (1 kept, 0 dropped).
pub fn dropout<R: Rng + ?Sized>(
    input: &Array2<f64>,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), Array2::ones(input.dim())));
    }
    let mask = Array2::from_shape_fn(input.dim(), |_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 });
    let scale = 1.0 / (1.0 - rate);
    let out = input * &mask * scale;
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::grad_check;
    use crate::numerics::RngStream;
    use ndarray::array;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(1e3) == 1.0 && sigmoid(-1e3) >= 0.0);
        assert!(sigmoid(-1e3).is_finite() && sigmoid(1e3).is_finite());
        let mut rng = RngStream::new(1, "sig");
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-50.0..50.0);
            assert!((sigmoid(x) - (1.0 - sigmoid(-x))).abs() <= 1e-12);
        }
    }

    #[test]
    fn mse_hand_values() {
        let (l, g) = mse_loss(&array![[1.0, 2.0]], &array![[0.0, 0.0]]).unwrap();
        assert_eq!(l, 2.5);
        assert_eq!(g, array![[1.0, 2.0]]);
        let (l, g) = mse_loss(&array![[1.0, 2.0]], &array![[1.0, 2.0]]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(mse_loss(&array![[1.0]], &array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(2, "mse");
        let p = Array2::from_shape_fn((3, 4), |_| rng.random_range(-2.0..2.0));
        let t = Array2::from_shape_fn((3, 4), |_| rng.random_range(-2.0..2.0));
        let (_, g) = mse_loss(&p, &t).unwrap();
        let f = |x: &[f64]| mse_loss(&Array2::from_shape_vec((3, 4), x.to_vec()).unwrap(), &t).unwrap().0;
        let err = grad_check(f, p.as_slice().unwrap(), g.as_slice().unwrap(), 1e-5);
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn bce_reference_points() {
        let (l, g) = bce_with_logits(&[0.0], &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, vec![-0.5]);
        let (l, _) = bce_with_logits(&[40.0], &[1.0]).unwrap();
        assert!(l.is_finite() && l < 1e-15);
        let (l, _) = bce_with_logits(&[1e4, -1e4], &[0.0, 1.0]).unwrap();
        assert!((l - 1e4).abs() < 1e-9);
        assert!(matches!(bce_with_logits(&[0.0], &[0.5]), Err(Error::Validation(_))));
    }

    #[test]
    fn bce_matches_naive_form() {
        let mut rng = RngStream::new(3, "bce");
        for _ in 0..2000 {
            let x: f64 = rng.random_range(-30.0..30.0);
            let y = if rng.random::<bool>() { 1.0 } else { 0.0 };
            // 1 − σ(x) written as σ(−x) to avoid cancellation in the oracle itself
            let naive = -(y * sigmoid(x).ln() + (1.0 - y) * sigmoid(-x).ln());
            let (l, _) = bce_with_logits(&[x], &[y]).unwrap();
            assert!((l - naive).abs() <= 1e-10, "x={x} y={y} {l} vs {naive}");
        }
    }

    #[test]
    fn dropout_passthrough_cases() {
        let mut rng = RngStream::new(4, "drop");
        let x = array![[1.0, -2.0], [3.0, 4.0]];
        let (o, m) = dropout(&x, 0.0, &mut rng, true).unwrap();
        assert_eq!(o, x);
        assert!(m.iter().all(|&v| v == 1.0));
        let (o, _) = dropout(&x, 0.9, &mut rng, false).unwrap();
        assert_eq!(o, x);
        assert!(dropout(&x, 1.0, &mut rng, true).is_err());
    }

    #[test]
    fn dropout_survivor_fraction() {
        let mut rng = RngStream::new(5, "drop");
        let x = Array2::from_elem((1000, 100), 2.0);
        let (o, m) = dropout(&x, 0.5, &mut rng, true).unwrap();
        let kept = m.sum() / m.len() as f64;
        assert!((kept - 0.5).abs() < 0.01, "{kept}");
        let mean = o.mean().unwrap();
        assert!((mean - 2.0).abs() < 0.04, "{mean}");
    }
}
