//! Closed-form proximal operators for the non-smooth term `psi`.

use crate::error::{param_err, Result, ZoError};

/// The non-smooth part `psi` of a composite objective.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxSpec {
    /// `psi = 0`.
    Zero,
    /// `psi(x) = lambda * ||x||_1`.
    L1 { lambda: f64 },
    /// Indicator of the box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ProxSpec {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return param_err(format!("l1 weight must be finite and >= 0, got {lambda}"));
        }
        Ok(ProxSpec::L1 { lambda })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return param_err("box bounds have different lengths");
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return param_err("box bounds require lo <= hi elementwise");
        }
        Ok(ProxSpec::Box { lo, hi })
    }

    /// Value of `psi(x)`; `+inf` outside a box.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ProxSpec::Zero => 0.0,
            ProxSpec::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxSpec::Box { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(v, (l, h))| *l <= *v && *v <= *h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `prox_{t psi}(x) = argmin_y { 0.5 ||x - y||^2 + t psi(y) }`.
    pub fn prox(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        self.prox_in_place(&mut out, t)?;
        Ok(out)
    }

    pub fn prox_in_place(&self, x: &mut [f64], t: f64) -> Result<()> {
        if !(t > 0.0) {
            return param_err(format!("prox step must be > 0, got {t}"));
        }
        match self {
            ProxSpec::Zero => {}
            ProxSpec::L1 { lambda } => {
                let thr = t * lambda;
                if thr > 0.0 {
                    for v in x.iter_mut() {
                        *v = soft_threshold(*v, thr);
                    }
                }
            }
            ProxSpec::Box { lo, hi } => {
                if lo.len() != x.len() {
                    return Err(ZoError::Parameter(format!(
                        "box has dimension {}, point has {}",
                        lo.len(),
                        x.len()
                    )));
                }
                for (v, (l, h)) in x.iter_mut().zip(lo.iter().zip(hi)) {
                    *v = v.clamp(*l, *h);
                }
            }
        }
        Ok(())
    }
}

/// `sign(v) * max(|v| - thr, 0)`; ties `|v| == thr` map to exactly zero.
#[inline]
pub fn soft_threshold(v: f64, thr: f64) -> f64 {
    if v > thr {
        v - thr
    } else if v < -thr {
        v + thr
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn l1_closed_form() {
        let p = ProxSpec::l1(1.0).unwrap();
        assert_eq!(p.prox(&[2.0, -0.3, 0.0], 0.5).unwrap(), vec![1.5, 0.0, 0.0]);
    }

    #[test]
    fn l1_zero_weight_is_identity() {
        let p = ProxSpec::l1(0.0).unwrap();
        let x = [3.5, -1e-300, 0.0, -7.25];
        assert_eq!(p.prox(&x, 10.0).unwrap(), x.to_vec());
    }

    #[test]
    fn soft_threshold_tie_is_zero() {
        assert_eq!(soft_threshold(0.5, 0.5), 0.0);
        assert_eq!(soft_threshold(-0.5, 0.5), 0.0);
    }

    #[test]
    fn box_projection() {
        let p = ProxSpec::boxed(vec![-1.0], vec![1.0]).unwrap();
        assert_eq!(p.prox(&[3.0], 0.1).unwrap(), vec![1.0]);
        assert_eq!(p.value(&[3.0]), f64::INFINITY);
        assert!(ProxSpec::boxed(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(ProxSpec::Zero.prox(&[1.0], 0.0).is_err());
        assert!(ProxSpec::Zero.prox(&[1.0], -1.0).is_err());
    }

    fn arb_spec() -> impl Strategy<Value = ProxSpec> {
        prop_oneof![
            Just(ProxSpec::Zero),
            (0.0..3.0f64).prop_map(|lambda| ProxSpec::L1 { lambda }),
            Just(ProxSpec::Box {
                lo: vec![-1.0, -0.5, 0.0, -2.0],
                hi: vec![1.0, 0.5, 3.0, -1.0]
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn non_expansive(
            spec in arb_spec(),
            x in prop::collection::vec(-10.0..10.0f64, 4),
            y in prop::collection::vec(-10.0..10.0f64, 4),
            t in 1e-3..5.0f64,
        ) {
            let px = spec.prox(&x, t).unwrap();
            let py = spec.prox(&y, t).unwrap();
            let lhs = crate::linalg::dist_sq(&px, &py).sqrt();
            let rhs = crate::linalg::dist_sq(&x, &y).sqrt();
            prop_assert!(lhs <= rhs * (1.0 + 1e-15) + 1e-15);
        }

        #[test]
        fn l1_subgradient_optimality(
            lambda in 0.0..3.0f64,
            x in prop::collection::vec(-10.0..10.0f64, 6),
            t in 1e-3..5.0f64,
        ) {
            let p = ProxSpec::L1 { lambda }.prox(&x, t).unwrap();
            for (xi, pi) in x.iter().zip(&p) {
                let r = (xi - pi) / t;
                if *pi != 0.0 {
                    prop_assert!((r - lambda * pi.signum()).abs() <= 1e-12 * (1.0 + xi.abs() / t));
                } else {
                    prop_assert!(r.abs() <= lambda + 1e-12);
                }
            }
        }

        #[test]
        fn box_is_idempotent(x in prop::collection::vec(-10.0..10.0f64, 4), t in 1e-3..5.0f64) {
            let spec = ProxSpec::Box {
                lo: vec![-1.0, -0.5, 0.0, -2.0],
                hi: vec![1.0, 0.5, 3.0, -1.0],
            };
            let once = spec.prox(&x, t).unwrap();
            let twice = spec.prox(&once, t).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
