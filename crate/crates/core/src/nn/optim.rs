//! Averaged stochastic gradient descent with momentum.
//!
//! Each step applies momentum SGD with coupled L2 decay (embeddings exempt)
//! and maintains a running average of the iterates. The averaged weights are
//! the deliverable model; averaging engages once `step_count` reaches
//! `avg_start_step`, before which the average simply tracks the value.

use super::param::ParamSet;
use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct OptState<F: Scalar> {
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    velocity: Vec<Tensor<F>>,
    pub step_count: u64,
    pub avg_start_step: u64,
}

impl<F: Scalar> OptState<F> {
    pub fn new<P: ParamSet<F>>(
        params: &P,
        learning_rate: f64,
        momentum: f64,
        l2: f64,
        avg_start_step: u64,
    ) -> Self {
        let velocity = (0..params.param_count())
            .map(|i| Tensor::zeros(params.param(i).value.shape()))
            .collect();
        OptState {
            learning_rate,
            momentum,
            l2,
            velocity,
            step_count: 0,
            avg_start_step,
        }
    }
}

/// One optimizer step over all parameters.
///
/// Expects `grad` to hold the mini-batch mean gradient; grads are zeroed
/// after the update and `step_count` advances by one.
pub fn asgd_step<F: Scalar, P: ParamSet<F>>(params: &mut P, opt: &mut OptState<F>) {
    assert_eq!(opt.velocity.len(), params.param_count());
    let lr = F::from_f64(opt.learning_rate);
    let momentum = F::from_f64(opt.momentum);
    let l2 = F::from_f64(opt.l2);
    let averaging = opt.step_count >= opt.avg_start_step;
    let avg_weight = if averaging {
        F::from_f64(1.0 / (opt.step_count - opt.avg_start_step + 1) as f64)
    } else {
        F::ZERO
    };

    for i in 0..params.param_count() {
        let param = params.param_mut(i);
        let decay = if param.is_embedding { F::ZERO } else { l2 };
        let v = opt.velocity[i].data_mut();
        let value = param.value.data_mut();
        let grad = param.grad.data_mut();
        let avg = param.avg.data_mut();
        for j in 0..value.len() {
            let g = grad[j] + decay * value[j];
            v[j] = momentum * v[j] - lr * g;
            value[j] += v[j];
            if averaging {
                avg[j] += (value[j] - avg[j]) * avg_weight;
            } else {
                avg[j] = value[j];
            }
            grad[j] = F::ZERO;
        }
    }
    opt.step_count += 1;
}
