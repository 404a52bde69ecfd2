use serde::Serialize;

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Denominator floor for relative error, so entries whose true gradient is
/// ~0 are judged on absolute error instead of amplified roundoff.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub index: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_entry: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub h: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compares analytic gradients against central differences.
///
/// `build` receives a fresh graph and one leaf per entry of `params` (in
/// order) and must return a scalar loss. It is called once for the analytic
/// pass and twice per parameter entry for the numeric pass, so it has to be
/// deterministic.
pub fn grad_check<F>(mut build: F, params: &mut [Tensor], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("step h must be positive, got {h}")));
    }

    let mut eval = |params: &[Tensor], grads: bool| -> Result<(f64, Vec<Option<Vec<f64>>>)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = params
            .iter()
            .map(|p| {
                let mut t = p.clone();
                t.set_requires_grad(grads);
                g.leaf(&t)
            })
            .collect();
        let loss = build(&mut g, &vars)?;
        let value = g.value(loss)[0];
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        if grads {
            g.backward(loss)?;
            Ok((value, vars.iter().map(|v| g.grad(*v).map(<[f64]>::to_vec)).collect()))
        } else {
            Ok((value, Vec::new()))
        }
    };

    let (_, analytic) = eval(params, true)?;
    let mut checks = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let n = params[pi].numel();
        let an = analytic[pi].clone().unwrap_or_else(|| vec![0.0; n]);
        let mut check = ParamCheck {
            index: pi,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_entry: 0,
        };
        for e in 0..n {
            let orig = params[pi].values()[e];
            params[pi].values_mut()[e] = orig + h;
            let plus = eval(params, false);
            params[pi].values_mut()[e] = orig - h;
            let minus = eval(params, false);
            params[pi].values_mut()[e] = orig;
            let numeric = (plus?.0 - minus?.0) / (2.0 * h);
            let abs = (an[e] - numeric).abs();
            let rel = abs / an[e].abs().max(numeric.abs()).max(REL_FLOOR);
            if rel > check.max_rel_error {
                check.max_rel_error = rel;
                check.worst_entry = e;
            }
            check.max_abs_error = check.max_abs_error.max(abs);
        }
        checks.push(check);
    }
    let max_rel_error = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        passed: max_rel_error <= tol,
        params: checks,
        max_rel_error,
        h,
        tol,
    })
}
