//! Central finite-difference verification of analytic gradients.
//!
//! Every trainable block ships with a check in its test suite; the helper
//! here perturbs each parameter element by +-h and compares the numeric
//! slope against the gradients accumulated by one backward pass.

use super::tensor::{zero_grads, ParamVisit, Tensor};

pub const DEFAULT_H: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-4);
    (analytic - numeric).abs() / denom
}

fn perturb<M: ParamVisit + ?Sized>(model: &mut M, target: &str, idx: usize, delta: f64) {
    model.visit_params("", &mut |name, value, _| {
        if name == target {
            value.data_mut()[idx] += delta;
        }
    });
}

/// Runs `loss` once with gradients (the closure must zero nothing itself;
/// grads are cleared here), then sweeps every parameter element with
/// central differences of step `h`.
pub fn check_gradients<M: ParamVisit + ?Sized>(
    model: &mut M,
    mut loss_with_backward: impl FnMut(&mut M) -> f64,
    mut loss_only: impl FnMut(&mut M) -> f64,
    h: f64,
) -> GradCheckReport {
    zero_grads(model);
    let _ = loss_with_backward(model);
    let mut analytic: Vec<(String, Tensor)> = Vec::new();
    model.visit_params("", &mut |name, _, grad| {
        analytic.push((name.to_string(), grad.clone()));
    });

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        checked: 0,
    };
    for (name, grads) in &analytic {
        for idx in 0..grads.numel() {
            perturb(model, name, idx, h);
            let up = loss_only(model);
            perturb(model, name, idx, -2.0 * h);
            let down = loss_only(model);
            perturb(model, name, idx, h);
            let numeric = (up - down) / (2.0 * h);
            let err = rel_err(grads.data()[idx], numeric);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_param = format!("{name}[{idx}]");
            }
        }
    }
    report
}

/// Wraps a layer together with an input treated as a parameter tensor, so
/// the same sweep also verifies dL/dx.
pub struct WithInput<L> {
    pub layer: L,
    pub input: Tensor,
    pub input_grad: Tensor,
}

impl<L> WithInput<L> {
    pub fn new(layer: L, input: Tensor) -> Self {
        let input_grad = Tensor::zeros(input.shape());
        WithInput { layer, input, input_grad }
    }
}

impl<L: ParamVisit> ParamVisit for WithInput<L> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        f(
            &super::tensor::join_name(prefix, "input"),
            &mut self.input,
            &mut self.input_grad,
        );
        self.layer.visit_params(prefix, f);
    }
}
