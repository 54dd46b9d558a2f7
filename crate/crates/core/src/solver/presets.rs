//! Step sizes and smoothing radii prescribed by the convergence analysis.

use crate::error::{param_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    StronglyConvex,
    Convex,
    NonConvex,
}

impl Regime {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "strongly_convex" => Ok(Regime::StronglyConvex),
            "convex" => Ok(Regime::Convex),
            "nonconvex" | "non_convex" => Ok(Regime::NonConvex),
            other => param_err(format!("unknown regime `{other}`")),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::StronglyConvex => "strongly_convex",
            Regime::Convex => "convex",
            Regime::NonConvex => "nonconvex",
        }
    }
}

fn check_common(r: usize, d: usize, l: f64) -> Result<()> {
    if r == 0 || d == 0 {
        return param_err("R and d must be >= 1");
    }
    if !(l > 0.0 && l.is_finite()) {
        return param_err(format!("L must be positive, got {l}"));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma <= 1.0 {
        Ok(())
    } else {
        param_err(format!("sigma must lie in (0, 1], got {sigma}"))
    }
}

/// Preset step size for `regime`.
///
/// * strongly convex: `R / (2L(36d + R))`
/// * convex: `R / (2L(40d + R))`
/// * non-convex: `sqrt(R) sigma / (5 sqrt(d) L)`, valid only for `R <= d / sigma^2`
pub fn preset_alpha(regime: Regime, r: usize, d: usize, l: f64, sigma: f64) -> Result<f64> {
    check_common(r, d, l)?;
    let (rf, df) = (r as f64, d as f64);
    match regime {
        Regime::StronglyConvex => Ok(rf / (2.0 * l * (36.0 * df + rf))),
        Regime::Convex => Ok(rf / (2.0 * l * (40.0 * df + rf))),
        Regime::NonConvex => {
            check_sigma(sigma)?;
            let limit = df / (sigma * sigma);
            if rf > limit * (1.0 + 1e-12) {
                return param_err(format!(
                    "non-convex step size requires R <= d/sigma^2, got R = {r} > {limit:.6}"
                ));
            }
            Ok(rf.sqrt() * sigma / (5.0 * df.sqrt() * l))
        }
    }
}

/// Contraction factor `min{ mu R / (4L(36d + R)), sigma/4 }`.
pub fn preset_kappa(r: usize, d: usize, l: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_common(r, d, l)?;
    check_sigma(sigma)?;
    if !(mu > 0.0) {
        return param_err(format!("kappa needs mu > 0, got {mu}"));
    }
    let (rf, df) = (r as f64, d as f64);
    Ok((mu * rf / (4.0 * l * (36.0 * df + rf))).min(sigma / 4.0))
}

/// Constant smoothing radius from the corollaries for target accuracy `eps`.
///
/// * strongly convex: `sqrt(R mu^2 eps / (2 d^3 mu n^2 (36L + mu n) + 2 d L^2 R))`
/// * convex: `min{ eps / (sqrt(n) d), sqrt(R eps) / (n d^{3/2}) }` (the O-constant taken as 1)
/// * non-convex: `sqrt(eps n) R^{1/4} / (5 sqrt(d^{3/2} L (n^2 + R^2)))`
pub fn preset_beta(regime: Regime, n: usize, r: usize, d: usize, l: f64, mu: f64, eps: f64) -> Result<f64> {
    check_common(r, d, l)?;
    if n == 0 {
        return param_err("n must be >= 1");
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return param_err(format!("target accuracy must be positive, got {eps}"));
    }
    let (nf, rf, df) = (n as f64, r as f64, d as f64);
    let beta = match regime {
        Regime::StronglyConvex => {
            if !(mu > 0.0) {
                return param_err("strongly convex smoothing radius needs mu > 0");
            }
            let den = 2.0 * df.powi(3) * mu * nf * nf * (36.0 * l + mu * nf) + 2.0 * df * l * l * rf;
            (rf * mu * mu * eps / den).sqrt()
        }
        Regime::Convex => (eps / (nf.sqrt() * df)).min((rf * eps).sqrt() / (nf * df.powf(1.5))),
        Regime::NonConvex => {
            (eps * nf).sqrt() * rf.powf(0.25) / (5.0 * (df.powf(1.5) * l * (nf * nf + rf * rf)).sqrt())
        }
    };
    Ok(beta)
}
