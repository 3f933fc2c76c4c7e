use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments, one pair per parameter of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, id: ParamId) -> &Tensor {
        &self.m[id.0]
    }

    pub fn second_moment(&self, id: ParamId) -> &Tensor {
        &self.v[id.0]
    }
}

/// One Adam update with learning rate `lr`. Parameters without a gradient
/// are left alone. Every gradient is checked before anything is written, so
/// a non-finite gradient leaves both `params` and `state` untouched.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &[(ParamId, &Tensor)],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    for &(id, g) in grads {
        let p = params.get(id);
        if g.shape() != p.shape() {
            return Err(Error::dim(format!(
                "gradient of {} has shape {:?}, parameter {:?}",
                params.name(id),
                g.shape(),
                p.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("gradient of {}", params.name(id))));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for &(id, g) in grads {
        let m = state.m[id.0].data_mut();
        let v = state.v[id.0].data_mut();
        let p = params.get_mut(id).data_mut();
        for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v).zip(g.data()) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}
