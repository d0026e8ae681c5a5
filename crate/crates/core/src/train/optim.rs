use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Momentum { .. } => "momentum",
            Optimizer::Adam { .. } => "adam",
        }
    }

    pub(crate) fn code(&self) -> u32 {
        match self {
            Optimizer::Sgd => 0,
            Optimizer::Momentum { .. } => 1,
            Optimizer::Adam { .. } => 2,
        }
    }

    /// Coefficients as stored in checkpoints: `[beta1, beta2, eps]`.
    pub(crate) fn coefficients(&self) -> [f64; 3] {
        match *self {
            Optimizer::Sgd => [0.0; 3],
            Optimizer::Momentum { beta } => [beta, 0.0, 0.0],
            Optimizer::Adam { beta1, beta2, eps } => [beta1, beta2, eps],
        }
    }

    pub(crate) fn from_parts(code: u32, c: [f64; 3]) -> Result<Self> {
        let opt = match code {
            0 => Optimizer::Sgd,
            1 => Optimizer::Momentum { beta: c[0] },
            2 => Optimizer::Adam { beta1: c[0], beta2: c[1], eps: c[2] },
            other => return Err(Error::format(format!("unknown optimizer code {other}"))),
        };
        opt.validate().map_err(|e| Error::format(e.to_string()))?;
        Ok(opt)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        let ok = match *self {
            Optimizer::Sgd => true,
            Optimizer::Momentum { beta } => unit(beta),
            Optimizer::Adam { beta1, beta2, eps } => unit(beta1) && unit(beta2) && eps > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid optimizer coefficients {self:?}")))
        }
    }

    fn moments(&self) -> usize {
        match self {
            Optimizer::Sgd => 0,
            Optimizer::Momentum { .. } => 1,
            Optimizer::Adam { .. } => 2,
        }
    }
}

/// Step counter and moment buffers, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub optimizer: Optimizer,
    pub step: u64,
    pub moments: Vec<ModelParams>,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, params: &ModelParams) -> Self {
        let zeros = ModelParams::zeros(params.hyper).expect("validated hyper-parameters");
        Self { optimizer, step: 0, moments: vec![zeros; optimizer.moments()] }
    }

    /// Applies one update `params -= lr * direction(grads)`.
    pub fn apply(&mut self, lr: f64, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        match self.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                    for (p, g) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *p -= lr * g;
                    }
                }
            }
            Optimizer::Momentum { beta } => {
                let v = &mut self.moments[0];
                for ((p, g), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(v.tensors_mut()) {
                    for ((p, g), v) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(v.as_mut_slice()) {
                        *v = beta * *v + g;
                        *p -= lr * *v;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let (m, rest) = self.moments.split_at_mut(1);
                let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
                for ((p, g), (m, v)) in tensors.zip(m[0].tensors_mut().into_iter().zip(rest[0].tensors_mut())) {
                    let it = p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m.as_mut_slice()).zip(v.as_mut_slice());
                    for (((p, g), m), v) in it {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}
