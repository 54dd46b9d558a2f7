use crate::error::{Result, ZoError};
use crate::linalg;
use crate::problems::CompositeProblem;

/// `||(x - prox(x - alpha grad f(x), alpha)) / alpha||`, from the reference
/// gradient (metric use only).
pub fn grad_map_norm(p: &CompositeProblem, x: &[f64], alpha: f64) -> Result<f64> {
    Ok(grad_map(p, x, alpha)?.iter().map(|v| v * v).sum::<f64>().sqrt())
}

pub fn grad_map(p: &CompositeProblem, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(ZoError::Parameter(format!("gradient mapping needs alpha > 0, got {alpha}")));
    }
    if !p.has_reference_gradient() {
        return Err(ZoError::Capability("gradient mapping needs a reference gradient".into()));
    }
    let mut y = x.to_vec();
    linalg::axpy(-alpha, &p.smooth_gradient(x)?, &mut y);
    let z = p.prox(&y, alpha)?;
    Ok(x.iter().zip(&z).map(|(a, b)| (a - b) / alpha).collect())
}
