use super::scalar::Scalar;
use super::tensor::Tensor;

/// A learnable tensor together with its gradient and running ASGD average.
///
/// `is_embedding` exempts the tensor from L2 decay and marks it for the
/// embedding initialization range.
#[derive(Debug, Clone)]
pub struct Param<F: Scalar> {
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
    pub avg: Tensor<F>,
    pub is_embedding: bool,
}

impl<F: Scalar> Param<F> {
    pub fn new(value: Tensor<F>, is_embedding: bool) -> Self {
        let grad = Tensor::zeros(value.shape());
        let avg = value.clone();
        Param {
            value,
            grad,
            avg,
            is_embedding,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.zero();
    }
}

/// A fixed, ordered collection of parameters.
///
/// The index order is the canonical parameter order: initialization draws,
/// optimizer state, gradient buffers and the serialized model file all use
/// it, so it must never change for a given architecture.
pub trait ParamSet<F: Scalar> {
    fn param_count(&self) -> usize;
    fn param(&self, i: usize) -> &Param<F>;
    fn param_mut(&mut self, i: usize) -> &mut Param<F>;
    fn param_name(&self, i: usize) -> String;

    fn zero_grads(&mut self) {
        for i in 0..self.param_count() {
            self.param_mut(i).zero_grad();
        }
    }
}

/// Fresh gradient buffers matching a parameter set, in canonical order.
pub fn grad_buffers<F: Scalar, P: ParamSet<F>>(set: &P) -> Vec<Tensor<F>> {
    (0..set.param_count())
        .map(|i| Tensor::zeros(set.param(i).value.shape()))
        .collect()
}
