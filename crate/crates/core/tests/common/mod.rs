#![allow(dead_code)]

use mirror_triangles::{ProxSetup, Trace};

/// Largest violation of the per-step certificate
/// `A_{k+1} F(x_{k+1}) - A_k F(x_k) + V(x*, u_{k+1}) - V(x*, u_k)
///   <= alpha_{k+1} F(x*) + extra_{k+1}`
/// over the trace; positive values are violations.
///
/// Checking stops at the first record whose `V(x*, u_k)` is not
/// representable (an entropy state that underflowed); the second value is
/// the number of steps left unchecked.
pub fn certificate_violation(trace: &Trace, f_star: f64, extra: impl Fn(usize) -> f64) -> (f64, usize) {
    let mut worst = f64::NEG_INFINITY;
    for (i, w) in trace.records.windows(2).enumerate() {
        let (prev, next) = (&w[0], &w[1]);
        let (Some(v_prev), Some(v_next)) = (prev.v_to_opt, next.v_to_opt) else {
            return (worst, trace.records.len() - 1 - i);
        };
        // A_{k+1} - A_k = alpha_{k+1}, so subtracting alpha F* from the left
        // turns it into gaps, which avoids cancellation once A_k is large
        let lhs = next.a_sum * (next.f_x - f_star) - prev.a_sum * (prev.f_x - f_star) + v_next - v_prev;
        // one ulp of F is amplified by A: rounding floor of the evaluation
        let floor = 4.0
            * f64::EPSILON
            * (next.a_sum * (next.f_x.abs() + f_star.abs()) + prev.a_sum * prev.f_x.abs() + v_next + v_prev);
        let rhs = extra(next.k) + floor;
        worst = worst.max(lhs - rhs);
    }
    (worst, 0)
}

/// `max_k V(x*, u_k) - V(x*, u_0)` over the representable prefix, and the
/// number of records left unchecked.
pub fn boundedness_excess(trace: &Trace) -> (f64, usize) {
    let v0 = trace.records[0].v_to_opt.expect("V(x*, u_0) is finite");
    let mut worst = f64::NEG_INFINITY;
    for (i, r) in trace.records.iter().enumerate() {
        match r.v_to_opt {
            Some(v) => worst = worst.max(v - v0),
            None => return (worst, trace.records.len() - i),
        }
    }
    (worst, 0)
}

pub fn r_squared(setup: &ProxSetup, x_star: &[f64], x0: &[f64]) -> f64 {
    setup.bregman(x_star, x0).unwrap()
}

/// Two-sided normal 95% quantile.
pub const Z95: f64 = 1.96;

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
