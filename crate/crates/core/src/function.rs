//! Vector-valued functions with derivatives of every order on demand.
//!
//! Everything downstream (Wronskians, operator application, residual
//! scans) consumes the [`CVecFunction`] trait rather than concrete
//! closed forms, so chain members, Hamiltonian images and operator
//! images compose freely.

use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use crate::error::Result;
use crate::expr::Expr;
use crate::linalg::CMatrix;

/// A C^n-valued function of one real variable, differentiable to any
/// order. `deriv(comp, 0, x)` is the component value itself.
pub trait CVecFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn deriv(&self, comp: usize, order: usize, x: f64) -> Result<Complex64>;
}

/// All components at one derivative order.
pub fn vec_deriv(f: &dyn CVecFunction, order: usize, x: f64) -> Result<Vec<Complex64>> {
    (0..f.dim()).map(|c| f.deriv(c, order, x)).collect()
}

/// A matrix-valued coefficient field: the potential of a Hamiltonian,
/// evaluated with its x-derivatives. `eval_derivative(x, 0)` must agree
/// with `eval(x)`.
pub trait PotentialSource: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: f64) -> Result<CMatrix>;
    fn eval_derivative(&self, x: f64, order: usize) -> Result<CMatrix>;
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Vector function backed by expression trees, one per component.
/// Derivative towers grow lazily and are cached per component.
pub struct SymbolicVec {
    comps: Vec<RwLock<Vec<Arc<Expr>>>>,
}

impl SymbolicVec {
    pub fn new(exprs: Vec<Expr>) -> Self {
        let comps = exprs
            .into_iter()
            .map(|e| RwLock::new(vec![Arc::new(e)]))
            .collect();
        SymbolicVec { comps }
    }

    pub fn scalar(e: Expr) -> Self {
        SymbolicVec::new(vec![e])
    }

    /// The undifferentiated expression of one component.
    pub fn component_expr(&self, comp: usize) -> Arc<Expr> {
        self.comps[comp].read().unwrap()[0].clone()
    }

    fn expr_at(&self, comp: usize, order: usize) -> Arc<Expr> {
        {
            let tower = self.comps[comp].read().unwrap();
            if order < tower.len() {
                return tower[order].clone();
            }
        }
        let mut tower = self.comps[comp].write().unwrap();
        while tower.len() <= order {
            let next = tower.last().unwrap().differentiate();
            tower.push(Arc::new(next));
        }
        tower[order].clone()
    }
}

impl CVecFunction for SymbolicVec {
    fn dim(&self) -> usize {
        self.comps.len()
    }

    fn deriv(&self, comp: usize, order: usize, x: f64) -> Result<Complex64> {
        self.expr_at(comp, order).evaluate(x)
    }
}

/// The image (H - shift) f of a source function under a shifted
/// Hamiltonian with potential V:
///
///   g = -f'' + V f - shift * f
///
/// k-th derivatives come from the Leibniz expansion of V f, so they are
/// exact whenever the potential's derivatives are.
pub struct ShiftedHamiltonianAction {
    potential: Arc<dyn PotentialSource>,
    source: Arc<dyn CVecFunction>,
    shift: Complex64,
}

impl ShiftedHamiltonianAction {
    pub fn new(
        potential: Arc<dyn PotentialSource>,
        source: Arc<dyn CVecFunction>,
        shift: Complex64,
    ) -> Self {
        assert_eq!(potential.dim(), source.dim());
        ShiftedHamiltonianAction { potential, source, shift }
    }
}

impl CVecFunction for ShiftedHamiltonianAction {
    fn dim(&self) -> usize {
        self.source.dim()
    }

    fn deriv(&self, comp: usize, order: usize, x: f64) -> Result<Complex64> {
        let n = self.dim();
        let mut acc = -self.source.deriv(comp, order + 2, x)?;
        acc -= self.shift * self.source.deriv(comp, order, x)?;
        for p in 0..=order {
            let vp = self.potential.eval_derivative(x, p)?;
            let c = binom(order, p);
            for m in 0..n {
                let vpm = vp.get(comp, m);
                if vpm == Complex64::new(0.0, 0.0) {
                    continue;
                }
                acc += c * vpm * self.source.deriv(m, order - p, x)?;
            }
        }
        Ok(acc)
    }
}
