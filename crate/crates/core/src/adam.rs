//! Adaptive moment estimation over a flat parameter vector.

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    learning_rate: T,
    beta1: T,
    beta2: T,
    eps: T,
    m: Vec<T>,
    v: Vec<T>,
    beta1_t: T,
    beta2_t: T,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n_params: usize, learning_rate: T) -> Self {
        Adam {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            beta1_t: T::one(),
            beta2_t: T::one(),
        }
    }

    /// In-place descent step along `grad`.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.beta1_t *= self.beta1;
        self.beta2_t *= self.beta2;
        let c1 = T::one() - self.beta1_t;
        let c2 = T::one() - self.beta2_t;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (T::one() - self.beta1) * g;
            *v = self.beta2 * *v + (T::one() - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
