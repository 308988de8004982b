/// Central finite-difference check of an analytic gradient.
///
/// Perturbs every coordinate of `params` by `±step`, evaluates `loss`, and
/// returns the largest relative error `|a − n| / max(|a|, |n|, 1e-7)` over
/// all coordinates.
pub fn grad_check<F>(mut loss: F, params: &[f64], analytic: &[f64], step: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "one analytic entry per parameter");
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = loss(&probe);
        probe[i] = orig - step;
        let down = loss(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dense_forward, Activation, LayerStack, RngStream};
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn linear_model_is_exact() {
        let coeffs = [1.5, -2.0, 0.25, 3.0];
        let loss = |p: &[f64]| p.iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>();
        let err = grad_check(loss, &[0.1, 0.2, 0.3, 0.4], &coeffs, 1e-5);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let loss = |p: &[f64]| p[0] * p[0];
        assert!(grad_check(loss, &[1.0], &[1.0], 1e-5) > 0.4);
    }

    #[test]
    fn two_layer_relu_net() {
        let mut rng = RngStream::new(11, "gc");
        let stack = LayerStack::init(&[4, 6, 3], &[Activation::Relu, Activation::Identity], &mut rng);
        let x = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
        let probe = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let (_, caches) = stack.forward(&x).unwrap();
        assert!(caches[0].preactivation.iter().all(|p| p.abs() > 1e-3));
        let (_, grads) = stack.backward(&probe, &caches).unwrap();
        let analytic: Vec<f64> = crate::numerics::dense::flatten_grads(&grads).concat();
        let flat = stack.flatten();
        let loss = |p: &[f64]| {
            let mut s = stack.clone();
            s.load_flat(p).unwrap();
            let mut h = x.clone();
            for l in &s.layers {
                h = dense_forward(&h, l).unwrap().0;
            }
            (&h * &probe).sum()
        };
        let err = grad_check(loss, &flat, &analytic, 1e-5);
        assert!(err <= 1e-4, "{err}");
    }
}
