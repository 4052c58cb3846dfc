//! Intertwining operators Q = Σ X_j(x) ∂^j built from chains.
//!
//! Coefficients are never expanded symbolically. At each x the Wronskian
//! matrix W of the generating members is assembled from exact derivative
//! towers and factored once; Cramer's rule turns every coefficient entry
//! into a solved linear system. Differentiating W y = b in x gives exact
//! coefficient derivatives of any order from the same factorization:
//!
//!   y⁽ᵖ⁾ = W⁻¹ ( b⁽ᵖ⁾ - Σ_{q=1..p} C(p,q) W⁽q⁾ y⁽ᵖ⁻q⁾ )
//!
//! since every entry of W differentiates to the entry one derivative
//! order higher.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::function::{binom, CVecFunction, PotentialSource, ShiftedHamiltonianAction};
use crate::grid::Grid;
use crate::hamiltonian::{AssociationChain, ChainSet, MatrixHamiltonian, VectorFunction};
use crate::linalg::{lu_det, lu_factor, CMatrix};

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A chain whose members are opaque functions, not expression trees.
/// Images of symbolic chains under operators live here.
#[derive(Clone)]
pub struct FunctionChain {
    pub lambda: Complex64,
    pub members: Vec<Arc<dyn CVecFunction>>,
}

impl FunctionChain {
    pub fn from_association(chain: &AssociationChain) -> Self {
        FunctionChain {
            lambda: chain.lambda,
            members: chain.members.iter().map(|m| m.as_fn()).collect(),
        }
    }
}

pub struct WronskianEvaluation {
    pub x: f64,
    pub matrix: CMatrix,
    pub det: Complex64,
}

/// Row l holds member l's components and derivatives, columns grouped by
/// derivative order k (outer) then component m (inner): entry
/// (l, k·n + m) = φ⁽k+shift⁾_{l,m}(x).
fn members_matrix(
    members: &[Arc<dyn CVecFunction>],
    n: usize,
    order: usize,
    x: f64,
    shift: usize,
) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(members.len(), n * order);
    for (l, f) in members.iter().enumerate() {
        for k in 0..order {
            for comp in 0..n {
                m.set(l, k * n + comp, f.deriv(comp, k + shift, x)?);
            }
        }
    }
    Ok(m)
}

/// Wronskian of a chain set at one point. The member count must be nN.
pub fn wronskian(cs: &ChainSet, n: usize, order: usize, x: f64) -> Result<WronskianEvaluation> {
    let members = cs.member_functions();
    if members.len() != n * order {
        return Err(Error::CountMismatch { expected: n * order, got: members.len() });
    }
    let matrix = members_matrix(&members, n, order, x, 0)?;
    let det = lu_det(&matrix);
    Ok(WronskianEvaluation { x, matrix, det })
}

pub struct MatrixDifferentialOperator {
    n: usize,
    order: usize,
    leading: CMatrix,
    members: Vec<Arc<dyn CVecFunction>>,
    chain_shape: Vec<(Complex64, usize)>,
    tol: Tolerances,
}

impl MatrixDifferentialOperator {
    /// Order-zero operator: pointwise multiplication by a constant
    /// matrix. Intertwining forces such coefficients constant.
    pub fn constant(x0: CMatrix, tol: &Tolerances) -> Self {
        assert!(x0.is_square());
        let n = x0.rows();
        MatrixDifferentialOperator {
            n,
            order: 0,
            leading: x0,
            members: Vec::new(),
            chain_shape: Vec::new(),
            tol: tol.clone(),
        }
    }

    /// Build the operator annihilating every chain member, with the given
    /// constant leading coefficient. The Wronskian must clear the
    /// singularity threshold at every window point.
    pub fn build_from_chains(
        chains: &[FunctionChain],
        leading: CMatrix,
        window: &Grid,
        tol: &Tolerances,
    ) -> Result<Self> {
        assert!(leading.is_square());
        let n = leading.rows();
        let members: Vec<Arc<dyn CVecFunction>> = chains
            .iter()
            .flat_map(|c| c.members.iter().cloned())
            .collect();
        let d = members.len();
        if d == 0 || d % n != 0 {
            return Err(Error::CountMismatch { expected: n * (d / n + 1), got: d });
        }
        for m in &members {
            if m.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
            }
        }
        let det = lu_det(&leading);
        let lead_threshold = tol.singular_rel * leading.scale_max_row().powi(n as i32);
        if det.norm() <= lead_threshold {
            return Err(Error::SingularLeading);
        }
        let chain_shape = chains.iter().map(|c| (c.lambda, c.members.len())).collect();
        let op = MatrixDifferentialOperator {
            n,
            order: d / n,
            leading,
            members,
            chain_shape,
            tol: tol.clone(),
        };
        for x in window.iter() {
            op.checked_lu(x)?;
        }
        Ok(op)
    }

    pub fn build_intertwiner(
        cs: &ChainSet,
        leading: CMatrix,
        window: &Grid,
        tol: &Tolerances,
    ) -> Result<Self> {
        let chains: Vec<FunctionChain> =
            cs.chains.iter().map(FunctionChain::from_association).collect();
        Self::build_from_chains(&chains, leading, window, tol)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn leading(&self) -> &CMatrix {
        &self.leading
    }

    pub fn members(&self) -> &[Arc<dyn CVecFunction>] {
        &self.members
    }

    /// (λ, length) of each generating chain, in build order.
    pub fn chain_shape(&self) -> &[(Complex64, usize)] {
        &self.chain_shape
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Same members, leading coefficient scaled: every coefficient
    /// scales with it (left-multiplication covariance).
    pub fn scaled(&self, s: Complex64) -> Self {
        MatrixDifferentialOperator {
            n: self.n,
            order: self.order,
            leading: self.leading.scale(s),
            members: self.members.clone(),
            chain_shape: self.chain_shape.clone(),
            tol: self.tol.clone(),
        }
    }

    fn wronskian_matrix_at(&self, x: f64, shift: usize) -> Result<CMatrix> {
        members_matrix(&self.members, self.n, self.order, x, shift)
    }

    pub fn wronskian_eval(&self, x: f64) -> Result<WronskianEvaluation> {
        let matrix = self.wronskian_matrix_at(x, 0)?;
        let det = lu_det(&matrix);
        Ok(WronskianEvaluation { x, matrix, det })
    }

    fn checked_lu(&self, x: f64) -> Result<crate::linalg::LuFactors> {
        let w = self.wronskian_matrix_at(x, 0)?;
        let lu = lu_factor(&w);
        let det = lu.det();
        let threshold = self.tol.wronskian_rel * 1f64.max(w.scale_max_row());
        if det.norm() <= threshold {
            return Err(Error::SingularWronskian { x, det_abs: det.norm(), threshold });
        }
        Ok(lu)
    }

    /// X_j^{(p)}(x) for j = 0..order and p = 0..=up_to, exact.
    ///
    /// Column l of X_j is -X_N u with u_m read at position j·n+l of the
    /// solution of W y = b_m, b_m the column of order-N derivatives of
    /// component m; higher p differentiates the solved system.
    pub fn coefficient_tower(&self, x: f64, up_to: usize) -> Result<Vec<Vec<CMatrix>>> {
        if self.order == 0 {
            return Ok(vec![Vec::new(); up_to + 1]);
        }
        let n = self.n;
        let nn = n * self.order;
        let lu = self.checked_lu(x)?;
        let wder: Vec<CMatrix> = (1..=up_to)
            .map(|q| self.wronskian_matrix_at(x, q))
            .collect::<Result<_>>()?;
        // y[m][p]: p-th derivative of the solution for component m.
        let mut y: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(n);
        for m in 0..n {
            let mut tower: Vec<Vec<Complex64>> = Vec::with_capacity(up_to + 1);
            for p in 0..=up_to {
                let mut rhs: Vec<Complex64> = (0..nn)
                    .map(|r| self.members[r].deriv(m, self.order + p, x))
                    .collect::<Result<_>>()?;
                for q in 1..=p {
                    let c = binom(p, q);
                    let prod = wder[q - 1].mul_vec(&tower[p - q])?;
                    for r in 0..nn {
                        rhs[r] -= c * prod[r];
                    }
                }
                let sol = lu.solve_vec(&rhs).ok_or(Error::SingularWronskian {
                    x,
                    det_abs: lu.det().norm(),
                    threshold: self.tol.wronskian_rel,
                })?;
                tower.push(sol);
            }
            y.push(tower);
        }
        let mut out = vec![vec![CMatrix::zeros(n, n); self.order]; up_to + 1];
        for (p, level) in out.iter_mut().enumerate() {
            for (j, xj) in level.iter_mut().enumerate() {
                for l in 0..n {
                    let u: Vec<Complex64> = (0..n).map(|m| y[m][p][j * n + l]).collect();
                    let col = self.leading.mul_vec(&u)?;
                    for r in 0..n {
                        xj.set(r, l, -col[r]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// X_0(x)..X_{N-1}(x).
    pub fn coefficients_at(&self, x: f64) -> Result<Vec<CMatrix>> {
        Ok(self.coefficient_tower(x, 0)?.pop().unwrap())
    }

    /// d-th derivative of (Q f) at x, via Leibniz over the coefficient
    /// tower. d = 0 is plain application.
    pub fn apply_derivative_at(
        &self,
        f: &dyn CVecFunction,
        x: f64,
        d: usize,
    ) -> Result<Vec<Complex64>> {
        if f.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: f.dim() });
        }
        let n = self.n;
        let max_ord = self.order + d;
        let fd: Vec<Vec<Complex64>> = (0..n)
            .map(|m| (0..=max_ord).map(|k| f.deriv(m, k, x)).collect())
            .collect::<Result<_>>()?;
        let mut out = vec![C_ZERO; n];
        for r in 0..n {
            for m in 0..n {
                let lv = self.leading.get(r, m);
                if lv != C_ZERO {
                    out[r] += lv * fd[m][max_ord];
                }
            }
        }
        if self.order > 0 {
            let tower = self.coefficient_tower(x, d)?;
            for (q, level) in tower.iter().enumerate() {
                let c = binom(d, q);
                for (j, xq) in level.iter().enumerate() {
                    for r in 0..n {
                        for m in 0..n {
                            let v = xq.get(r, m);
                            if v != C_ZERO {
                                out[r] += c * v * fd[m][j + d - q];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply_at(&self, f: &dyn CVecFunction, x: f64) -> Result<Vec<Complex64>> {
        self.apply_derivative_at(f, x, 0)
    }

    /// Max ‖Q f‖∞ over the points, with the scale of the summed terms;
    /// rel() near rounding identifies f as a kernel element.
    pub fn application_report(
        &self,
        f: &dyn CVecFunction,
        points: &[f64],
    ) -> Result<ResidualReport> {
        let mut report = ResidualReport::default();
        for &x in points {
            let coeffs = self.coefficients_at(x)?;
            let fd: Vec<Vec<Complex64>> = (0..self.n)
                .map(|m| (0..=self.order).map(|k| f.deriv(m, k, x)).collect())
                .collect::<Result<_>>()?;
            let mut term_scale = 0.0;
            for (j, xj) in coeffs.iter().enumerate() {
                let fmax = (0..self.n).map(|m| fd[m][j].norm()).fold(0.0, f64::max);
                term_scale += xj.max_abs() * fmax;
            }
            let fmax = (0..self.n).map(|m| fd[m][self.order].norm()).fold(0.0, f64::max);
            term_scale += self.leading.max_abs() * fmax;
            for r in 0..self.n {
                let mut acc = C_ZERO;
                for m in 0..self.n {
                    acc += self.leading.get(r, m) * fd[m][self.order];
                }
                for (j, xj) in coeffs.iter().enumerate() {
                    for m in 0..self.n {
                        acc += xj.get(r, m) * fd[m][j];
                    }
                }
                report.absorb(acc.norm(), term_scale);
            }
        }
        Ok(report)
    }

    /// Max over generating members and points of ‖QΦ‖∞, with the scale
    /// of the summed terms for relative judgement.
    pub fn kernel_residual(&self, points: &[f64]) -> Result<ResidualReport> {
        let mut report = ResidualReport::default();
        for &x in points {
            let tower = self.coefficient_tower(x, 0)?;
            let coeffs = &tower[0];
            let lead_scale = self.leading.max_abs();
            for f in &self.members {
                let fd: Vec<Vec<Complex64>> = (0..self.n)
                    .map(|m| (0..=self.order).map(|k| f.deriv(m, k, x)).collect())
                    .collect::<Result<_>>()?;
                let mut term_scale = 0.0;
                for (j, xj) in coeffs.iter().enumerate() {
                    let fmax = (0..self.n).map(|m| fd[m][j].norm()).fold(0.0, f64::max);
                    term_scale += xj.max_abs() * fmax;
                }
                let fmax = (0..self.n).map(|m| fd[m][self.order].norm()).fold(0.0, f64::max);
                term_scale += lead_scale * fmax;
                for r in 0..self.n {
                    let mut acc = C_ZERO;
                    for m in 0..self.n {
                        acc += self.leading.get(r, m) * fd[m][self.order];
                    }
                    for (j, xj) in coeffs.iter().enumerate() {
                        for m in 0..self.n {
                            acc += xj.get(r, m) * fd[m][j];
                        }
                    }
                    report.absorb(acc.norm(), term_scale);
                }
            }
        }
        Ok(report)
    }
}

/// Max absolute defect together with the magnitude of the quantities
/// compared; rel() is the honest relative reading.
#[derive(Clone, Copy, Debug, Default)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub scale: f64,
}

impl ResidualReport {
    pub fn absorb(&mut self, abs: f64, scale: f64) {
        self.max_abs = self.max_abs.max(abs);
        self.scale = self.scale.max(scale);
    }

    pub fn merge(&mut self, other: &ResidualReport) {
        self.max_abs = self.max_abs.max(other.max_abs);
        self.scale = self.scale.max(other.scale);
    }

    pub fn rel(&self) -> f64 {
        self.max_abs / self.scale.max(1.0)
    }
}

/// Test vectors for residual meters: each unit direction carrying e^x
/// and sin 2x.
pub fn default_test_functions(n: usize) -> Vec<VectorFunction> {
    let mut out = Vec::with_capacity(2 * n);
    for m in 0..n {
        for f in [
            Expr::exp(Expr::var()),
            Expr::sin(Expr::real(2.0) * Expr::var()),
        ] {
            let mut comps = vec![Expr::zero(); n];
            comps[m] = f;
            out.push(VectorFunction::new(comps));
        }
    }
    out
}

/// The transformed potential of Q built over V₊:
///
///   V₋(x) = X_N V₊(x) X_N⁻¹ + 2 X'_{N-1}(x) X_N⁻¹
///
/// (for order 0 just the conjugation term). Derivatives shift the
/// coefficient tower, so every order is exact.
pub struct PotentialEvaluator {
    h_plus: Arc<MatrixHamiltonian>,
    op: Arc<MatrixDifferentialOperator>,
    leading_inv: CMatrix,
}

pub fn final_potential(
    h_plus: Arc<MatrixHamiltonian>,
    op: Arc<MatrixDifferentialOperator>,
) -> Result<PotentialEvaluator> {
    if h_plus.n() != op.n() {
        return Err(Error::DimensionMismatch { expected: op.n(), got: h_plus.n() });
    }
    let leading_inv = crate::linalg::inverse(op.leading(), op.tolerances().singular_rel)
        .map_err(|_| Error::SingularLeading)?;
    Ok(PotentialEvaluator { h_plus, op, leading_inv })
}

impl PotentialSource for PotentialEvaluator {
    fn dim(&self) -> usize {
        self.op.n()
    }

    fn eval(&self, x: f64) -> Result<CMatrix> {
        self.eval_derivative(x, 0)
    }

    fn eval_derivative(&self, x: f64, order: usize) -> Result<CMatrix> {
        let vp = self.h_plus.eval_derivative(x, order)?;
        let base = self.op.leading().mul(&vp)?.mul(&self.leading_inv)?;
        if self.op.order() == 0 {
            return Ok(base);
        }
        let tower = self.op.coefficient_tower(x, order + 1)?;
        let top = &tower[order + 1][self.op.order() - 1];
        base.add(&top.mul(&self.leading_inv)?.scale(Complex64::new(2.0, 0.0)))
    }
}

/// Max over tests and window of ‖Q(H₊Φ) - H₋(QΦ)‖∞, the defect of the
/// intertwining relation. H₋(QΦ) is assembled as -(QΦ)'' + V₋·(QΦ) from
/// the coefficient tower.
pub fn intertwining_residual(
    q: &MatrixDifferentialOperator,
    h_plus: &MatrixHamiltonian,
    v_minus: &dyn PotentialSource,
    tests: &[VectorFunction],
    window: &Grid,
) -> Result<ResidualReport> {
    let mut report = ResidualReport::default();
    for t in tests {
        let ht = h_plus.apply(t)?;
        let tf = t.as_fn();
        let hf = ht.as_fn();
        for x in window.iter() {
            let a = q.apply_at(&*hf, x)?;
            let q0 = q.apply_at(&*tf, x)?;
            let q2 = q.apply_derivative_at(&*tf, x, 2)?;
            let vq = v_minus.eval(x)?.mul_vec(&q0)?;
            for r in 0..q.n() {
                let b = -q2[r] + vq[r];
                report.absorb((a[r] - b).norm(), a[r].norm().max(b.norm()));
            }
        }
    }
    Ok(report)
}

/// Q f as a function: orders 0 and 1 are direct applications, higher
/// orders integrate the intertwining identity -g'' + V₋ g = Q(H₊ f),
/// whose right side is again an image and recurses lazily.
pub struct ImageVec {
    op: Arc<MatrixDifferentialOperator>,
    source: Arc<dyn CVecFunction>,
    source_potential: Arc<dyn PotentialSource>,
    target_potential: Arc<dyn PotentialSource>,
    himage: OnceLock<Arc<ImageVec>>,
}

impl ImageVec {
    pub fn new(
        op: Arc<MatrixDifferentialOperator>,
        source: Arc<dyn CVecFunction>,
        source_potential: Arc<dyn PotentialSource>,
        target_potential: Arc<dyn PotentialSource>,
    ) -> Self {
        assert_eq!(op.n(), source.dim());
        ImageVec { op, source, source_potential, target_potential, himage: OnceLock::new() }
    }

    fn himage(&self) -> &Arc<ImageVec> {
        self.himage.get_or_init(|| {
            let hsrc = Arc::new(ShiftedHamiltonianAction::new(
                self.source_potential.clone(),
                self.source.clone(),
                C_ZERO,
            ));
            Arc::new(ImageVec::new(
                self.op.clone(),
                hsrc,
                self.source_potential.clone(),
                self.target_potential.clone(),
            ))
        })
    }
}

impl CVecFunction for ImageVec {
    fn dim(&self) -> usize {
        self.op.n()
    }

    fn deriv(&self, comp: usize, order: usize, x: f64) -> Result<Complex64> {
        // Constant operators commute with differentiation.
        if self.op.order() == 0 || order <= 1 {
            return Ok(self.op.apply_derivative_at(&*self.source, x, order)?[comp]);
        }
        let k = order - 2;
        let mut acc = -self.himage().deriv(comp, k, x)?;
        for p in 0..=k {
            let vp = self.target_potential.eval_derivative(x, p)?;
            let c = binom(k, p);
            for m in 0..self.dim() {
                let vpm = vp.get(comp, m);
                if vpm != C_ZERO {
                    acc += c * vpm * self.deriv(m, k - p, x)?;
                }
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{self, c};

    fn window() -> Grid {
        Grid::default()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn id(n: usize) -> CMatrix {
        CMatrix::identity(n)
    }

    #[test]
    fn soliton_coefficient_is_minus_tanh() {
        let (_, cs) = testutil::soliton_case();
        let q = MatrixDifferentialOperator::build_intertwiner(&cs, id(1), &window(), &tol()).unwrap();
        assert_eq!(q.order(), 1);
        for &x in &[-2.0, -0.3, 0.0, 1.7] {
            let x0 = &q.coefficients_at(x).unwrap()[0];
            assert!((x0.get(0, 0) - c(-x.tanh(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn soliton_coefficient_derivative_is_minus_sech_squared() {
        let (_, cs) = testutil::soliton_case();
        let q = MatrixDifferentialOperator::build_intertwiner(&cs, id(1), &window(), &tol()).unwrap();
        for &x in &[-1.1, 0.4, 2.3] {
            let tower = q.coefficient_tower(x, 2).unwrap();
            let sech2 = 1.0 / x.cosh().powi(2);
            assert!((tower[1][0].get(0, 0) - c(-sech2, 0.0)).norm() < 1e-12);
            // X₀'' = -(sech²)' = 2 sech² tanh.
            let expect = 2.0 * sech2 * x.tanh();
            assert!((tower[2][0].get(0, 0) - c(expect, 0.0)).norm() < 1e-11);
        }
    }

    #[test]
    fn soliton_kernel_and_potential() {
        let (h, cs) = testutil::soliton_case();
        let h = Arc::new(h);
        let q = Arc::new(
            MatrixDifferentialOperator::build_intertwiner(&cs, id(1), &window(), &tol()).unwrap(),
        );
        let kr = q.kernel_residual(&window().iter().collect::<Vec<_>>()).unwrap();
        assert!(kr.max_abs < 1e-12, "kernel residual {}", kr.max_abs);

        let v = final_potential(h.clone(), q.clone()).unwrap();
        for x in window().iter() {
            let got = v.eval(x).unwrap().get(0, 0);
            let expect = -2.0 / x.cosh().powi(2);
            assert!((got - c(expect, 0.0)).norm() < 1e-10, "at {x}");
        }

        let r = intertwining_residual(&q, &h, &v, &default_test_functions(1), &window()).unwrap();
        assert!(r.rel() < 1e-8, "intertwining rel {}", r.rel());
    }

    #[test]
    fn exp_pair_is_constant_coefficient() {
        let (h, cs) = testutil::exp_pair_case();
        let h = Arc::new(h);
        let q = Arc::new(
            MatrixDifferentialOperator::build_intertwiner(&cs, id(1), &window(), &tol()).unwrap(),
        );
        assert_eq!(q.order(), 2);
        for &x in &[-3.0, 0.0, 0.9] {
            let coeffs = q.coefficients_at(x).unwrap();
            assert!(coeffs[1].get(0, 0).norm() < 1e-12, "X1 at {x}");
            assert!((coeffs[0].get(0, 0) - c(-1.0, 0.0)).norm() < 1e-12, "X0 at {x}");
        }
        // (∂² - 1) e^{2x} at 0 = 3.
        let f = VectorFunction::new(vec![Expr::exp(Expr::real(2.0) * Expr::var())]);
        let got = q.apply_at(&*f.as_fn(), 0.0).unwrap()[0];
        assert!((got - c(3.0, 0.0)).norm() < 1e-12);

        let v = final_potential(h.clone(), q.clone()).unwrap();
        for &x in &[-4.0, 0.2, 3.1] {
            assert!(v.eval(x).unwrap().max_abs() < 1e-12);
        }
        let r = intertwining_residual(&q, &h, &v, &default_test_functions(1), &window()).unwrap();
        assert!(r.max_abs < 1e-12, "constant-coefficient residual {}", r.max_abs);
    }

    #[test]
    fn counterexample_wronskian_rejected() {
        let h = MatrixHamiltonian::free(2);
        let wave = |k: f64| Expr::exp(Expr::constant(c(0.0, k)) * Expr::var());
        let cs = ChainSet::new(vec![
            AssociationChain::new(c(1.0, 0.0), vec![VectorFunction::new(vec![wave(1.0), Expr::zero()])]),
            AssociationChain::new(c(4.0, 0.0), vec![VectorFunction::new(vec![wave(2.0), Expr::zero()])]),
        ]);
        let w = wronskian(&cs, 2, 1, 0.7).unwrap();
        assert!(w.det.norm() < 1e-14);
        match MatrixDifferentialOperator::build_intertwiner(&cs, id(2), &window(), &tol()) {
            Err(Error::SingularWronskian { .. }) => {}
            other => panic!("expected SingularWronskian, got {:?}", other.map(|_| ())),
        }
        let _ = h;
    }

    #[test]
    fn wronskian_values_and_count_guard() {
        let (_, cs) = testutil::exp_pair_case();
        let w = wronskian(&cs, 1, 2, 0.0).unwrap();
        assert!((w.det - c(-2.0, 0.0)).norm() < 1e-13);

        let (_, cs1) = testutil::soliton_case();
        let w = wronskian(&cs1, 1, 1, 0.0).unwrap();
        assert!((w.det - c(1.0, 0.0)).norm() < 1e-14);
        assert!(matches!(
            wronskian(&cs1, 1, 2, 0.0),
            Err(Error::CountMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn diagonal_two_channel_coefficients() {
        // Independent solitons per channel: X₀ = diag(-tanh x, -2 tanh 2x).
        let h = Arc::new(MatrixHamiltonian::free(2));
        let cs = ChainSet::new(vec![
            AssociationChain::new(
                c(-1.0, 0.0),
                vec![VectorFunction::new(vec![Expr::cosh(Expr::var()), Expr::zero()])],
            ),
            AssociationChain::new(
                c(-4.0, 0.0),
                vec![VectorFunction::new(vec![
                    Expr::zero(),
                    Expr::cosh(Expr::real(2.0) * Expr::var()),
                ])],
            ),
        ]);
        let q = Arc::new(
            MatrixDifferentialOperator::build_intertwiner(&cs, id(2), &window(), &tol()).unwrap(),
        );
        let x = 0.6;
        let x0 = &q.coefficients_at(x).unwrap()[0];
        assert!((x0.get(0, 0) - c(-x.tanh(), 0.0)).norm() < 1e-12);
        assert!((x0.get(1, 1) - c(-2.0 * (2.0 * x).tanh(), 0.0)).norm() < 1e-12);
        assert!(x0.get(0, 1).norm() < 1e-12);
        assert!(x0.get(1, 0).norm() < 1e-12);

        let v = final_potential(h.clone(), q.clone()).unwrap();
        let vm = v.eval(x).unwrap();
        assert!((vm.get(0, 0) - c(-2.0 / x.cosh().powi(2), 0.0)).norm() < 1e-10);
        assert!((vm.get(1, 1) - c(-8.0 / (2.0 * x).cosh().powi(2), 0.0)).norm() < 1e-10);

        let r = intertwining_residual(&q, &h, &v, &default_test_functions(2), &window()).unwrap();
        assert!(r.rel() < 1e-8, "rel {}", r.rel());
    }

    #[test]
    fn leading_scaling_covariance() {
        let (_, cs) = testutil::soliton_case();
        let base =
            MatrixDifferentialOperator::build_intertwiner(&cs, id(1), &window(), &tol()).unwrap();
        let scaled = MatrixDifferentialOperator::build_intertwiner(
            &cs,
            id(1).scale(c(3.0, -1.0)),
            &window(),
            &tol(),
        )
        .unwrap();
        for &x in &[-1.0, 0.5] {
            let a = base.coefficients_at(x).unwrap()[0].get(0, 0);
            let b = scaled.coefficients_at(x).unwrap()[0].get(0, 0);
            assert!((b - c(3.0, -1.0) * a).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_leading_cancels_in_potential() {
        let (h, cs) = testutil::soliton_case();
        let h = Arc::new(h);
        let q1 = Arc::new(
            MatrixDifferentialOperator::build_intertwiner(&cs, id(1), &window(), &tol()).unwrap(),
        );
        let q3 = Arc::new(
            MatrixDifferentialOperator::build_intertwiner(&cs, id(1).scale(c(3.0, 0.0)), &window(), &tol())
                .unwrap(),
        );
        let v1 = final_potential(h.clone(), q1).unwrap();
        let v3 = final_potential(h.clone(), q3).unwrap();
        for &x in &[-2.2, 0.1, 1.9] {
            let d = v1.eval(x).unwrap().sub(&v3.eval(x).unwrap()).unwrap();
            assert!(d.max_abs() < 1e-12);
        }
    }

    #[test]
    fn singular_leading_rejected() {
        let (_, cs) = testutil::soliton_case();
        assert!(matches!(
            MatrixDifferentialOperator::build_intertwiner(&cs, CMatrix::zeros(1, 1), &window(), &tol()),
            Err(Error::SingularLeading)
        ));
    }

    #[test]
    fn perturbed_potential_detected() {
        struct Perturbed {
            base: Arc<PotentialEvaluator>,
        }
        impl PotentialSource for Perturbed {
            fn dim(&self) -> usize {
                self.base.dim()
            }
            fn eval(&self, x: f64) -> Result<CMatrix> {
                let bump = 0.1 / x.cosh().powi(2);
                let mut m = self.base.eval(x)?;
                m.set(0, 0, m.get(0, 0) + c(bump, 0.0));
                Ok(m)
            }
            fn eval_derivative(&self, x: f64, order: usize) -> Result<CMatrix> {
                if order == 0 {
                    self.eval(x)
                } else {
                    self.base.eval_derivative(x, order)
                }
            }
        }
        let (h, cs) = testutil::soliton_case();
        let h = Arc::new(h);
        let q = Arc::new(
            MatrixDifferentialOperator::build_intertwiner(&cs, id(1), &window(), &tol()).unwrap(),
        );
        let v = Arc::new(final_potential(h.clone(), q.clone()).unwrap());
        let bad = Perturbed { base: v };
        let r = intertwining_residual(&q, &h, &bad, &default_test_functions(1), &window()).unwrap();
        assert!(r.max_abs >= 1e-2, "defect not seen: {}", r.max_abs);
    }

    #[test]
    fn image_of_sinh_is_sech() {
        let (h, cs) = testutil::soliton_case();
        let h = Arc::new(h);
        let q = Arc::new(
            MatrixDifferentialOperator::build_intertwiner(&cs, id(1), &window(), &tol()).unwrap(),
        );
        let v = Arc::new(final_potential(h.clone(), q.clone()).unwrap());
        let sinh = VectorFunction::new(vec![Expr::sinh(Expr::var())]);
        let img = ImageVec::new(q, sinh.as_fn(), h, v);
        let x = 0.7f64;
        let sech = 1.0 / x.cosh();
        let t = x.tanh();
        // sech, sech' = -sech·tanh, sech'' = sech - 2sech³,
        // sech''' = -sech·tanh + 6 sech³·tanh.
        let expect = [
            sech,
            -sech * t,
            sech - 2.0 * sech.powi(3),
            -sech * t + 6.0 * sech.powi(3) * t,
        ];
        for (k, e) in expect.iter().enumerate() {
            let got = img.deriv(0, k, x).unwrap();
            assert!((got - c(*e, 0.0)).norm() < 1e-9, "order {k}: {got} vs {e}");
        }
    }

    #[test]
    fn constant_operator_image() {
        let x0 = CMatrix::from_rows(vec![
            vec![c(0.0, 1.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let q = MatrixDifferentialOperator::constant(x0, &tol());
        let f = VectorFunction::new(vec![Expr::sin(Expr::var()), Expr::exp(Expr::var())]);
        let got = q.apply_derivative_at(&*f.as_fn(), 0.5, 1).unwrap();
        // (X₀ f)' = X₀ f' with f' = (cos x, e^x).
        let expect0 = c(0.0, 1.0) * c(0.5f64.cos(), 0.0) + c(0.5f64.exp(), 0.0);
        let expect1 = c(2.0 * 0.5f64.exp(), 0.0);
        assert!((got[0] - expect0).norm() < 1e-12);
        assert!((got[1] - expect1).norm() < 1e-12);
    }
}
