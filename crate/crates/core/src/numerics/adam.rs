use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the weight-decay coefficient enters the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDecay {
    /// L2 penalty folded into the gradient (`g + λ·w`) before the moment
    /// estimates, as `torch.optim.Adam(weight_decay=λ)` does.
    #[default]
    Coupled,
    /// `w ← w − lr·λ·w` applied directly to parameters before the Adam update.
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    #[serde(default)]
    pub decay_mode: WeightDecay,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            decay_mode: WeightDecay::Coupled,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        // lr = 0 is accepted: a frozen optimizer is how plateau behaviour is exercised.
        let ok = self.lr.is_finite()
            && self.lr >= 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0
            && self.weight_decay.is_finite()
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// First/second moment buffers, one slot per parameter buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    fn ensure_shapes(&mut self, params: &[&mut [f64]]) -> Result<()> {
        if self.first_moment.is_empty() && self.step_count == 0 {
            self.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second_moment = self.first_moment.clone();
            return Ok(());
        }
        let same = self.first_moment.len() == params.len()
            && self.first_moment.iter().zip(params).all(|(m, p)| m.len() == p.len());
        if same {
            Ok(())
        } else {
            Err(Error::Dimension("parameter layout changed between Adam steps".into()))
        }
    }
}

/// One Adam update over every parameter buffer.
///
/// `params[i]` and `grads[i]` must have equal lengths, and the layout must
/// stay fixed across steps. The step counter advances by exactly one. No
/// parameter is touched when any gradient is non-finite.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension(format!(
            "{} parameter buffers vs {} gradient buffers",
            params.len(),
            grads.len()
        )));
    }
    for (slot, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(Error::Dimension(format!(
                "slot {slot}: {} parameters vs {} gradients",
                p.len(),
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { slot });
        }
    }
    state.ensure_shapes(params)?;

    state.step_count += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
        weight_decay,
        decay_mode,
    } = state.config;
    let t = state.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    for (slot, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first_moment[slot];
        let v = &mut state.second_moment[slot];
        for i in 0..p.len() {
            let mut gi = g[i];
            if weight_decay > 0.0 {
                match decay_mode {
                    WeightDecay::Coupled => gi += weight_decay * p[i],
                    WeightDecay::Decoupled => p[i] -= lr * weight_decay * p[i],
                }
            }
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_scalar(w: &mut f64, g: f64, state: &mut AdamState) -> Result<()> {
        let mut buf = [*w];
        {
            let mut params: Vec<&mut [f64]> = vec![&mut buf[..]];
            adam_step(&mut params, &[&[g]], state)?;
        }
        *w = buf[0];
        Ok(())
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamState::new(AdamConfig::default()).unwrap();
        let mut w = 1.25;
        for _ in 0..5 {
            step_scalar(&mut w, 0.0, &mut st).unwrap();
        }
        assert_eq!(w, 1.25);
        assert_eq!(st.step_count, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [1e-3, -0.7, 42.0] {
            let mut st = AdamState::new(AdamConfig::with_lr(0.01)).unwrap();
            let mut w = 0.5;
            step_scalar(&mut w, g, &mut st).unwrap();
            let moved = 0.5 - w;
            // m̂/√v̂ = sign(g); epsilon shifts the magnitude slightly for small |g|.
            let expected = 0.01 * g / (g.abs() + 1e-8);
            assert!((moved - expected).abs() < 1e-12, "{moved} vs {expected}");
            assert!((moved.abs() - 0.01).abs() < 1e-7);
        }
    }

    #[test]
    fn quadratic_converges() {
        let mut st = AdamState::new(AdamConfig::with_lr(0.1)).unwrap();
        let mut w = 3.0;
        for _ in 0..500 {
            let g = 2.0 * w;
            step_scalar(&mut w, g, &mut st).unwrap();
        }
        assert!(w.abs() < 1e-3, "{w}");
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let mut st = AdamState::new(AdamConfig::default()).unwrap();
        let mut w = 1.0;
        let err = step_scalar(&mut w, f64::NAN, &mut st).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { slot: 0 }));
        assert_eq!(w, 1.0);
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn decoupled_decay_shrinks_before_update() {
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.5,
            decay_mode: WeightDecay::Decoupled,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(cfg).unwrap();
        let mut w = 2.0;
        step_scalar(&mut w, 0.0, &mut st).unwrap();
        assert!((w - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn coupled_decay_acts_through_moments() {
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.5,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(cfg).unwrap();
        let mut w = 2.0;
        step_scalar(&mut w, 0.0, &mut st).unwrap();
        // effective gradient λ·w > 0, so the first step moves by ≈ lr
        assert!((w - 1.9).abs() < 1e-7, "{w}");
    }

    #[test]
    fn layout_change_is_rejected() {
        let mut st = AdamState::new(AdamConfig::default()).unwrap();
        let mut a = [0.0, 0.0];
        adam_step(&mut [&mut a[..]], &[&[1.0, 1.0]], &mut st).unwrap();
        let mut b = [0.0];
        assert!(adam_step(&mut [&mut b[..]], &[&[1.0]], &mut st).is_err());
    }

    #[test]
    fn trajectories_are_bit_identical() {
        let run = || {
            let mut st = AdamState::new(AdamConfig::with_lr(0.05)).unwrap();
            let mut w = [1.0f64, -2.0, 0.5];
            let mut trace = Vec::new();
            for k in 0..50 {
                let g: Vec<f64> = w.iter().map(|x| x.sin() + k as f64 * 1e-3).collect();
                adam_step(&mut [&mut w[..]], &[&g], &mut st).unwrap();
                trace.extend(w.iter().map(|v| v.to_bits()));
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(AdamState::new(AdamConfig { beta1: 1.0, ..AdamConfig::default() }).is_err());
        assert!(AdamState::new(AdamConfig { lr: -1.0, ..AdamConfig::default() }).is_err());
    }
}
