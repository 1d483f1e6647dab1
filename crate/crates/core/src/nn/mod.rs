//! Dense feed-forward networks with analytic backpropagation.
//!
//! Only what the transmitters and receivers need: fully connected layers,
//! ELU/ReLU/linear/softmax activations, and SGD/Adam. Everything is `f64`.

mod activation;
mod network;
mod optim;

pub use activation::{activation_apply, activation_grad, Activation};
pub use network::{Gradients, MlpNetwork, Trace};
pub use optim::{
    OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, DEFAULT_LEARNING_RATE,
};

/// A network together with the optimizer state that updates it.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub net: MlpNetwork,
    pub opt: OptimizerState,
}

impl Learner {
    pub fn new(net: MlpNetwork, kind: OptimizerKind, learning_rate: f64) -> Self {
        let opt = OptimizerState::new(kind, learning_rate, net.params().len());
        Self { net, opt }
    }

    pub fn apply(&mut self, grad: &[f64]) -> crate::Result<()> {
        self.opt.step(&mut self.net, grad)
    }
}
