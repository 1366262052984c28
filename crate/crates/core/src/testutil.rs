//! Central-difference gradient oracle for unit tests.

use crate::autograd::{Tape, Var};
use crate::tensor::DenseTensor;

/// Builds a scalar loss on a fresh tape from leaf values.
pub type LossFn<'a> = dyn Fn(&mut Tape, &[Var]) -> Var + 'a;

/// Max relative error between tape gradients and central differences
/// (`h = 1e-6`) over every entry of every input.
pub fn max_grad_error(inputs: &[DenseTensor], loss: &LossFn<'_>) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let l = loss(&mut tape, &vars);
    let grads = tape.backward(l).unwrap();
    let eval = |vals: &[DenseTensor]| {
        let mut t = Tape::new();
        let v: Vec<Var> = vals.iter().map(|x| t.leaf(x.clone(), false)).collect();
        let l = loss(&mut t, &v);
        t.value(l).item()
    };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(&tape, vars[k]);
        for i in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}
