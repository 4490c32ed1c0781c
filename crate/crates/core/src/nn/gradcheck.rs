//! Central-difference gradient verification.

use super::params::ParamStore;
use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub coordinates: usize,
}

/// Denominator floor so near-zero gradients are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

fn loss_of(store: &ParamStore, f: &impl Fn(&mut Tape) -> Var) -> f64 {
    let mut t = Tape::new(store);
    let out = f(&mut t);
    t.scalar(out)
}

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences on every coordinate of every parameter.
pub fn grad_check(store: &mut ParamStore, eps: f64, f: impl Fn(&mut Tape) -> Var) -> GradCheckReport {
    let grads = {
        let mut t = Tape::new(store);
        let out = f(&mut t);
        t.backward(out).into_param_grads()
    };
    let mut report = GradCheckReport { max_relative_error: 0.0, max_absolute_error: 0.0, coordinates: 0 };
    for id in store.ids().collect::<Vec<_>>() {
        let len = store.value(id).data().len();
        for j in 0..len {
            let analytic = grads.get(id).map_or(0.0, |g| g.data()[j]);
            let orig = store.value(id).data()[j];
            store.get_mut(id).value.data_mut()[j] = orig + eps;
            let plus = loss_of(store, &f);
            store.get_mut(id).value.data_mut()[j] = orig - eps;
            let minus = loss_of(store, &f);
            store.get_mut(id).value.data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let abs = (analytic - numeric).abs();
            let rel = abs / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.max_relative_error = report.max_relative_error.max(rel);
            report.max_absolute_error = report.max_absolute_error.max(abs);
            report.coordinates += 1;
        }
    }
    report
}
