//! Central finite-difference verification of analytic gradients.

use super::backward::{loss_and_gradients, sequence_loss};
use super::model::{AgentModel, Param};
use super::NetError;

/// Denominators smaller than this are clamped, so coordinates whose true
/// gradient is ~0 are compared on an absolute scale.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: Param,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares every coordinate of the analytic gradient of the mean
/// cross-entropy with `(L(x+h) - L(x-h)) / 2h`.
pub fn check_gradients(
    model: &AgentModel,
    input: &[usize],
    target: &[usize],
    step: f64,
) -> Result<GradCheckReport, NetError> {
    let (_, grads) = loss_and_gradients(model, input, target)?;
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: Param::Embedding,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for p in Param::ALL {
        let range = model.layout().range(p);
        for (offset, i) in range.clone().enumerate() {
            let orig = probe.values()[i];
            probe.values_mut()[i] = orig + step;
            let up = sequence_loss(&probe, input, target)?;
            probe.values_mut()[i] = orig - step;
            let down = sequence_loss(&probe, input, target)?;
            probe.values_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads.values()[i];
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_relative_error {
                report = GradCheckReport {
                    max_relative_error: err,
                    worst_param: p,
                    worst_index: offset,
                    analytic,
                    numeric,
                    checked: report.checked,
                };
            }
        }
    }
    Ok(report)
}
