//! Composite finite-sum problems `h(x) = (1/n) sum_i f_i(x) + psi(x)`.
//!
//! Solvers only see a problem through a [`CountingOracle`], which returns
//! component values `f_i(x)` and counts every query. Metrics (objective,
//! gap, gradient mapping) go through the uncounted methods on
//! [`CompositeProblem`] and never touch a solver's budget.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, ZoError};
use crate::linalg;
use crate::proximal::ProxSpec;

mod cox;
mod logistic;
mod quadratic;
mod sigmoid;

pub use cox::{make_cox_elastic_net, CoxComponents};
pub use logistic::{make_logistic_elastic_net, LogisticComponents};
pub use quadratic::{make_synthetic_quadratic, synthetic_quadratic_components, QuadraticComponents};
pub use sigmoid::{make_sigmoid_loss, SigmoidComponents, SIGMOID_CURVATURE_BOUND};

/// The smooth finite sum `f = (1/n) sum_i f_i`.
pub trait Components: Send + Sync + fmt::Debug {
    /// Number of components `n`.
    fn count(&self) -> usize;

    /// Dimension `d`.
    fn dim(&self) -> usize;

    /// Zeroth-order oracle for `f_i`.
    fn value(&self, i: usize, x: &[f64]) -> f64;

    /// Analytic `grad f_i(x)`, for tests and metrics only.
    fn gradient(&self, _i: usize, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(ZoError::Capability("reference gradient".into()))
    }

    fn has_gradient(&self) -> bool {
        false
    }

    /// `f(x)`; implementations may override with a faster route.
    fn mean_value(&self, x: &[f64]) -> f64 {
        let n = self.count();
        (0..n).map(|i| self.value(i, x)).sum::<f64>() / n as f64
    }

    /// `grad f(x)`.
    fn mean_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.count();
        let mut buf = vec![0.0; self.dim()];
        out.fill(0.0);
        for i in 0..n {
            self.gradient(i, x, &mut buf)?;
            linalg::axpy(1.0, &buf, out);
        }
        out.iter_mut().for_each(|v| *v /= n as f64);
        Ok(())
    }
}

/// A known minimizer and minimum value.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// A composite problem: components, regularizer and the constants the
/// step-size presets need.
#[derive(Clone)]
pub struct CompositeProblem {
    components: Arc<dyn Components>,
    psi: ProxSpec,
    smoothness: f64,
    strong_convexity: f64,
    optimum: Option<KnownOptimum>,
    name: String,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("d", &self.d())
            .field("psi", &self.psi)
            .field("smoothness", &self.smoothness)
            .field("strong_convexity", &self.strong_convexity)
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(
        name: impl Into<String>,
        components: Arc<dyn Components>,
        psi: ProxSpec,
        smoothness: f64,
        strong_convexity: f64,
    ) -> Result<Self> {
        if components.count() == 0 || components.dim() == 0 {
            return Err(ZoError::Input("problem needs n >= 1 and d >= 1".into()));
        }
        if !(smoothness > 0.0 && smoothness.is_finite()) {
            return Err(ZoError::Parameter(format!(
                "smoothness constant must be positive, got {smoothness}"
            )));
        }
        if !(strong_convexity >= 0.0) {
            return Err(ZoError::Parameter(format!(
                "strong convexity must be >= 0, got {strong_convexity}"
            )));
        }
        if let ProxSpec::Box { lo, .. } = &psi {
            if lo.len() != components.dim() {
                return Err(ZoError::Parameter("box dimension mismatch".into()));
            }
        }
        Ok(Self {
            components,
            psi,
            smoothness,
            strong_convexity,
            optimum: None,
            name: name.into(),
        })
    }

    pub fn with_optimum(mut self, optimum: KnownOptimum) -> Self {
        self.optimum = Some(optimum);
        self
    }

    pub fn set_optimum(&mut self, optimum: Option<KnownOptimum>) {
        self.optimum = optimum;
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.components.count()
    }

    pub fn d(&self) -> usize {
        self.components.dim()
    }

    pub fn psi(&self) -> &ProxSpec {
        &self.psi
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.optimum.as_ref()
    }

    pub fn components(&self) -> &Arc<dyn Components> {
        &self.components
    }

    pub fn has_reference_gradient(&self) -> bool {
        self.components.has_gradient()
    }

    /// `prox_{t psi}(x)`.
    pub fn prox(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.psi.prox(x, t)
    }

    /// Uncounted `f_i(x)`.
    pub fn component_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        let v = self.components.value(i, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ZoError::Evaluation(format!("f_{i} returned {v}")))
        }
    }

    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d()];
        self.components.gradient(i, x, &mut out)?;
        Ok(out)
    }

    /// Smooth part `f(x)`.
    pub fn smooth_value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let v = self.components.mean_value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ZoError::Evaluation(format!("f(x) = {v}")))
        }
    }

    pub fn smooth_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = vec![0.0; self.d()];
        self.components.mean_gradient(x, &mut out)?;
        Ok(out)
    }

    /// `h(x) = f(x) + psi(x)` through the uncounted channel.
    pub fn objective_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.smooth_value(x)? + self.psi.value(x))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(ZoError::Parameter(format!(
                "point has dimension {}, problem has {}",
                x.len(),
                self.d()
            )));
        }
        if !linalg::all_finite(x) {
            return Err(ZoError::Evaluation("non-finite point".into()));
        }
        Ok(())
    }
}

/// Zeroth-order access to a problem that counts every component query.
#[derive(Debug)]
pub struct CountingOracle<'p> {
    problem: &'p CompositeProblem,
    calls: u64,
}

impl<'p> CountingOracle<'p> {
    pub fn new(problem: &'p CompositeProblem) -> Self {
        Self { problem, calls: 0 }
    }

    pub fn problem(&self) -> &'p CompositeProblem {
        self.problem
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn d(&self) -> usize {
        self.problem.d()
    }

    /// `f_i(x)`, one counted call.
    pub fn eval(&mut self, i: usize, x: &[f64]) -> Result<f64> {
        self.calls += 1;
        let v = self.problem.components.value(i, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ZoError::Evaluation(format!(
                "f_{i} returned {v} at oracle call {}",
                self.calls
            )))
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Only meaningful between runs.
    pub fn reset(&mut self) {
        self.calls = 0;
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[derive(Debug)]
    struct Blowup;
    impl Components for Blowup {
        fn count(&self) -> usize {
            1
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _i: usize, x: &[f64]) -> f64 {
            if x[0] > 1.0 {
                f64::NAN
            } else {
                x[0]
            }
        }
    }

    #[test]
    fn oracle_counts_each_query() {
        let p = linear_problem(vec![vec![1.0, 2.0]; 3]);
        let mut o = CountingOracle::new(&p);
        for _ in 0..5 {
            o.eval(1, &[1.0, 1.0]).unwrap();
        }
        assert_eq!(o.calls(), 5);
        // metric channel is free
        p.objective_value(&[1.0, 1.0]).unwrap();
        assert_eq!(o.calls(), 5);
        o.reset();
        assert_eq!(o.calls(), 0);
    }

    #[test]
    fn non_finite_value_is_an_evaluation_error() {
        let p = CompositeProblem::new("b", Arc::new(Blowup), ProxSpec::Zero, 1.0, 0.0).unwrap();
        let mut o = CountingOracle::new(&p);
        assert!(o.eval(0, &[0.5]).is_ok());
        assert!(matches!(o.eval(0, &[2.0]), Err(ZoError::Evaluation(_))));
        assert!(p.objective_value(&[f64::NAN]).is_err());
    }

    #[test]
    fn missing_gradient_is_a_capability_error() {
        let p = CompositeProblem::new("b", Arc::new(Blowup), ProxSpec::Zero, 1.0, 0.0).unwrap();
        assert!(matches!(
            p.component_gradient(0, &[0.0]),
            Err(ZoError::Capability(_))
        ));
    }
}
