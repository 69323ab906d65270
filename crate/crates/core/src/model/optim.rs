use super::params::{Gradients, ParamGroup, Parameters};
use super::tensor::Mat;

/// First/second-moment optimizer state for one tensor group.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(params: &Parameters) -> Self {
        let zeros = || params.iter().map(|(_, t)| Mat::zeros(t.rows, t.cols)).collect::<Vec<_>>();
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() }
    }
}

/// Two-group update: adaptive moments for encoder/knowledge/classifier
/// tensors, plain gradient descent for the recurrent encoders.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub lr_encoder: f64,
    pub lr_lstm: f64,
    /// Multiplies both rates; set by the schedule.
    pub scale: f64,
    adam: Adam,
}

impl Optimizer {
    pub fn new(params: &Parameters, lr_encoder: f64, lr_lstm: f64) -> Self {
        Optimizer { lr_encoder, lr_lstm, scale: 1.0, adam: Adam::new(params) }
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Gradients) {
        let a = &mut self.adam;
        a.step += 1;
        let c1 = 1.0 - a.beta1.powi(a.step as i32);
        let c2 = 1.0 - a.beta2.powi(a.step as i32);
        let (lr_lstm, lr_encoder) = (self.lr_lstm * self.scale, self.lr_encoder * self.scale);
        for id in 0..params.len() {
            let g = grads.tensor(id);
            match params.group(id) {
                ParamGroup::Lstm => {
                    if lr_lstm == 0.0 {
                        continue;
                    }
                    for (p, d) in params.tensor_mut(id).data.iter_mut().zip(&g.data) {
                        *p -= lr_lstm * d;
                    }
                }
                ParamGroup::Encoder => {
                    if lr_encoder == 0.0 {
                        continue;
                    }
                    let (m, v) = (&mut a.m[id], &mut a.v[id]);
                    let p = params.tensor_mut(id);
                    for i in 0..p.data.len() {
                        let d = g.data[i];
                        m.data[i] = a.beta1 * m.data[i] + (1.0 - a.beta1) * d;
                        v.data[i] = a.beta2 * v.data[i] + (1.0 - a.beta2) * d * d;
                        let mh = m.data[i] / c1;
                        let vh = v.data[i] / c2;
                        p.data[i] -= lr_encoder * mh / (vh.sqrt() + a.eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_follow_their_rules() {
        let mut p = Parameters::from_named(vec![
            ("gaze_lstm.b".into(), Mat::from_vec(1, 2, vec![1.0, 1.0])),
            ("cls.b".into(), Mat::from_vec(1, 1, vec![1.0])),
        ]);
        let mut g = p.zeros_like();
        g.tensor_mut(0).data = vec![2.0, -4.0];
        g.tensor_mut(1).data = vec![3.0];
        let mut opt = Optimizer::new(&p, 0.01, 0.1);
        opt.step(&mut p, &g);
        assert!((p.tensor(0).data[0] - 0.8).abs() < 1e-12);
        assert!((p.tensor(0).data[1] - 1.4).abs() < 1e-12);
        // the first bias-corrected moment step has magnitude lr
        assert!((p.tensor(1).data[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn zero_rates_freeze() {
        let mut p = Parameters::from_named(vec![
            ("pos_lstm.w_ih".into(), Mat::filled(2, 2, 0.3)),
            ("know.w".into(), Mat::filled(2, 2, -0.2)),
        ]);
        let before = p.clone();
        let mut g = p.zeros_like();
        g.tensor_mut(0).fill(1.0);
        g.tensor_mut(1).fill(1.0);
        Optimizer::new(&p, 0.0, 0.0).step(&mut p, &g);
        assert_eq!(p, before);
    }
}
