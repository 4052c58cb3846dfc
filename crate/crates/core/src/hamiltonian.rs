//! Matrix Hamiltonians H = -I d²/dx² + V(x), chains of formal associated
//! vector-functions, and the Jordan bookkeeping those chains induce: the
//! restriction matrix T⁺ and the per-eigenvalue block summary.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::function::{CVecFunction, PotentialSource, SymbolicVec};
use crate::linalg::CMatrix;

/// Eigenvalues closer than this (relative) collapse to one spectral entry.
const LAMBDA_MERGE_REL: f64 = 1e-12;

/// A C^n-valued function with exact expression components. Cheap to
/// clone; the derivative cache is shared.
#[derive(Clone)]
pub struct VectorFunction {
    sym: Arc<SymbolicVec>,
}

impl VectorFunction {
    pub fn new(components: Vec<Expr>) -> Self {
        VectorFunction { sym: Arc::new(SymbolicVec::new(components)) }
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    pub fn component(&self, i: usize) -> Expr {
        (*self.sym.component_expr(i)).clone()
    }

    pub fn as_fn(&self) -> Arc<dyn CVecFunction> {
        self.sym.clone()
    }

    pub fn eval(&self, order: usize, x: f64) -> Result<Vec<Complex64>> {
        (0..self.dim()).map(|c| self.sym.deriv(c, order, x)).collect()
    }

    pub fn sup_norm_on(&self, points: &[f64]) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for &x in points {
            for v in self.eval(0, x)? {
                sup = sup.max(v.norm());
            }
        }
        Ok(sup)
    }

    /// self + c * other, componentwise.
    pub fn scaled_add(&self, c: Complex64, other: &VectorFunction) -> VectorFunction {
        assert_eq!(self.dim(), other.dim());
        let comps = (0..self.dim())
            .map(|i| (self.component(i) + Expr::constant(c) * other.component(i)).fold())
            .collect();
        VectorFunction::new(comps)
    }
}

pub struct MatrixHamiltonian {
    n: usize,
    rows: Vec<SymbolicVec>,
}

impl MatrixHamiltonian {
    pub fn new(v: Vec<Vec<Expr>>) -> Result<Self> {
        let n = v.len();
        if n == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        for row in &v {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
        }
        let rows = v.into_iter().map(SymbolicVec::new).collect();
        Ok(MatrixHamiltonian { n, rows })
    }

    /// Potential-free Hamiltonian -I d²/dx².
    pub fn free(n: usize) -> Self {
        let v = (0..n)
            .map(|_| (0..n).map(|_| Expr::zero()).collect())
            .collect();
        MatrixHamiltonian::new(v).unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn potential_entry(&self, i: usize, j: usize) -> Expr {
        (*self.rows[i].component_expr(j)).clone()
    }

    /// H Φ = -Φ'' + V Φ with exact expression components.
    pub fn apply(&self, phi: &VectorFunction) -> Result<VectorFunction> {
        if phi.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: phi.dim() });
        }
        let comps = (0..self.n)
            .map(|i| {
                let mut acc = -phi.component(i).differentiate().differentiate();
                for j in 0..self.n {
                    let v = self.potential_entry(i, j);
                    if v.is_zero_const() {
                        continue;
                    }
                    acc = acc + v * phi.component(j);
                }
                acc.fold()
            })
            .collect();
        Ok(VectorFunction::new(comps))
    }

    /// (λ I - H) Φ, the minimization factor applied once.
    pub fn shifted_image(&self, phi: &VectorFunction, lambda: Complex64) -> Result<VectorFunction> {
        let h = self.apply(phi)?;
        let comps = (0..self.n)
            .map(|i| (Expr::constant(lambda) * phi.component(i) - h.component(i)).fold())
            .collect();
        Ok(VectorFunction::new(comps))
    }
}

impl PotentialSource for MatrixHamiltonian {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: f64) -> Result<CMatrix> {
        self.eval_derivative(x, 0)
    }

    fn eval_derivative(&self, x: f64, order: usize) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for j in 0..self.n {
                m.set(i, j, row.deriv(j, order, x)?);
            }
        }
        Ok(m)
    }
}

/// Jordan chain for H at λ: H Φ₀ = λ Φ₀ and (H - λ) Φᵢ = Φᵢ₋₁.
#[derive(Clone)]
pub struct AssociationChain {
    pub lambda: Complex64,
    pub members: Vec<VectorFunction>,
}

impl AssociationChain {
    pub fn new(lambda: Complex64, members: Vec<VectorFunction>) -> Self {
        AssociationChain { lambda, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Clone)]
pub struct ChainSet {
    pub chains: Vec<AssociationChain>,
}

impl ChainSet {
    pub fn new(chains: Vec<AssociationChain>) -> Self {
        ChainSet { chains }
    }

    /// Total member count d; the intertwiner contract requires d = nN.
    pub fn total_members(&self) -> usize {
        self.chains.iter().map(|c| c.len()).sum()
    }

    /// Members flattened in chain order, as trait objects.
    pub fn member_functions(&self) -> Vec<Arc<dyn CVecFunction>> {
        self.chains
            .iter()
            .flat_map(|c| c.members.iter().map(|m| m.as_fn()))
            .collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.chains
            .first()
            .and_then(|c| c.members.first())
            .map(|m| m.dim())
    }
}

/// Residual of every chain link on a grid. Link 0 measures H Φ₀ - λ Φ₀;
/// link i measures (H - λ) Φᵢ - Φᵢ₋₁.
pub struct ChainReport {
    pub link_residuals: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_chain(
    h: &MatrixHamiltonian,
    chain: &AssociationChain,
    points: &[f64],
    tolerance: f64,
) -> Result<ChainReport> {
    let lambda = chain.lambda;
    let mut link_residuals = Vec::with_capacity(chain.len());
    for (i, member) in chain.members.iter().enumerate() {
        let image = h.apply(member)?;
        let mut sup: f64 = 0.0;
        for &x in points {
            let hv = image.eval(0, x)?;
            let mv = member.eval(0, x)?;
            let prev = if i == 0 { None } else { Some(chain.members[i - 1].eval(0, x)?) };
            for c in 0..member.dim() {
                let mut r = hv[c] - lambda * mv[c];
                if let Some(p) = &prev {
                    r -= p[c];
                }
                sup = sup.max(r.norm());
            }
        }
        link_residuals.push(sup);
    }
    let pass = link_residuals.iter().all(|&r| r <= tolerance);
    Ok(ChainReport { link_residuals, tolerance, pass })
}

#[derive(Clone, Debug)]
pub struct SpectralEntry {
    pub lambda: Complex64,
    /// Jordan block orders at lambda, ascending.
    pub block_orders: Vec<usize>,
}

impl SpectralEntry {
    pub fn geometric_multiplicity(&self) -> usize {
        self.block_orders.len()
    }

    /// κ: the largest block order.
    pub fn kappa(&self) -> usize {
        *self.block_orders.last().unwrap()
    }

    pub fn min_order(&self) -> usize {
        self.block_orders[0]
    }

    pub fn total(&self) -> usize {
        self.block_orders.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct SpectralSummary {
    /// Entries sorted by (Re λ, Im λ); λ values pairwise distinct.
    pub entries: Vec<SpectralEntry>,
    pub warnings: Vec<String>,
}

impl SpectralSummary {
    pub fn total_blocks(&self) -> usize {
        self.entries.iter().map(|e| e.geometric_multiplicity()).sum()
    }

    pub fn total_members(&self) -> usize {
        self.entries.iter().map(|e| e.total()).sum()
    }
}

pub(crate) fn lambda_close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= LAMBDA_MERGE_REL * 1f64.max(a.norm()).max(b.norm())
}

/// Group chains by spectral value into Jordan-block data. Chains whose λ
/// agree within rounding merge under one entry; a block count above 2n
/// is flagged as a warning since no second-order system admits it.
pub fn spectral_summary(cs: &ChainSet) -> Result<SpectralSummary> {
    if cs.chains.is_empty() || cs.chains.iter().all(|c| c.is_empty()) {
        return Err(Error::EmptyChainSet);
    }
    let mut entries: Vec<SpectralEntry> = Vec::new();
    for chain in &cs.chains {
        if chain.is_empty() {
            continue;
        }
        match entries.iter_mut().find(|e| lambda_close(e.lambda, chain.lambda)) {
            Some(e) => e.block_orders.push(chain.len()),
            None => entries.push(SpectralEntry {
                lambda: chain.lambda,
                block_orders: vec![chain.len()],
            }),
        }
    }
    for e in &mut entries {
        e.block_orders.sort_unstable();
    }
    entries.sort_by(|a, b| {
        (a.lambda.re, a.lambda.im)
            .partial_cmp(&(b.lambda.re, b.lambda.im))
            .unwrap()
    });
    let mut warnings = Vec::new();
    if let Some(n) = cs.dim() {
        for e in &entries {
            if e.geometric_multiplicity() > 2 * n {
                warnings.push(format!(
                    "lambda {} carries {} blocks, more than the 2n = {} a second-order system admits",
                    e.lambda,
                    e.geometric_multiplicity(),
                    2 * n
                ));
            }
        }
    }
    Ok(SpectralSummary { entries, warnings })
}

/// Restriction of H to the chain span, in the flattened chain basis:
/// lower-bidiagonal Jordan blocks (λ on the diagonal, 1 at (i, i-1)),
/// one block per chain, concatenated in chain order.
pub struct TPlusMatrix {
    pub matrix: CMatrix,
    pub block_sizes: Vec<usize>,
}

pub fn t_plus_matrix(cs: &ChainSet) -> TPlusMatrix {
    let d = cs.total_members();
    let mut m = CMatrix::zeros(d, d);
    let mut offset = 0;
    let mut block_sizes = Vec::with_capacity(cs.chains.len());
    for chain in &cs.chains {
        let k = chain.len();
        for i in 0..k {
            m.set(offset + i, offset + i, chain.lambda);
            if i > 0 {
                m.set(offset + i, offset + i - 1, Complex64::new(1.0, 0.0));
            }
        }
        offset += k;
        block_sizes.push(k);
    }
    TPlusMatrix { matrix: m, block_sizes }
}
