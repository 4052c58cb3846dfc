//! The conjugate operator Q⁺ closing the polynomial susy algebra
//! Q⁺Q⁻ = P(H₊), Q⁻Q⁺ = P(H₋) with P(λ) = Π (λ - λ_l)^{κ_l}.

use std::sync::Arc;

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::function::{binom, CVecFunction, PotentialSource, ShiftedHamiltonianAction};
use crate::grid::Grid;
use crate::hamiltonian::{
    lambda_close, spectral_summary, verify_chain, AssociationChain, ChainSet, MatrixHamiltonian,
    SpectralSummary, VectorFunction,
};
use crate::linalg::{inverse, CMatrix};
use crate::operator::{
    default_test_functions, intertwining_residual, FunctionChain, ImageVec,
    MatrixDifferentialOperator, ResidualReport,
};

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Root multiset of P; κ_l is the largest Jordan block order at λ_l.
#[derive(Clone, Debug, PartialEq)]
pub struct SusyPolynomial {
    pub roots: Vec<(Complex64, usize)>,
}

impl SusyPolynomial {
    pub fn degree(&self) -> usize {
        self.roots.iter().map(|&(_, k)| k).sum()
    }
}

pub fn susy_polynomial(summary: &SpectralSummary) -> SusyPolynomial {
    SusyPolynomial {
        roots: summary.entries.iter().map(|e| (e.lambda, e.kappa())).collect(),
    }
}

/// P(H) f, exact at the expression level.
pub fn apply_susy_poly(
    h: &MatrixHamiltonian,
    f: &VectorFunction,
    poly: &SusyPolynomial,
) -> Result<VectorFunction> {
    let mut g = f.clone();
    for &(lambda, kappa) in &poly.roots {
        for _ in 0..kappa {
            g = h.apply(&g)?.scaled_add(-lambda, &g);
        }
    }
    Ok(g)
}

pub struct ConjugateResult {
    pub q_plus: Arc<MatrixDifferentialOperator>,
    pub polynomial: SusyPolynomial,
    /// Order of Q⁺: N' = 2 deg P - N.
    pub n_prime: usize,
    /// Fitted scalar against P(H₊); (-1)^{deg P} for a valid basis.
    pub alpha: Complex64,
    pub fit_residual: f64,
}

/// Build Q⁺ of order N' = 2 deg P - N from an extension basis: for each
/// eigenvalue λ_l of the generating set, 2n chains of length κ_l solving
/// (H₊ - λ_l)^{κ_l} Ψ = 0. Their images under Q⁻ generate ker Q⁺; the
/// scalar normalization is fitted so that Q⁺Q⁻ = P(H₊) on test vectors.
pub fn build_conjugate(
    h_plus: &Arc<MatrixHamiltonian>,
    v_minus: &Arc<dyn PotentialSource>,
    cs: &ChainSet,
    ext: &[AssociationChain],
    q_minus: &Arc<MatrixDifferentialOperator>,
    window: &Grid,
    tol: &Tolerances,
) -> Result<ConjugateResult> {
    let n = h_plus.n();
    let summary = spectral_summary(cs)?;
    let polynomial = susy_polynomial(&summary);
    let big_n = q_minus.order();
    let two_deg = 2 * polynomial.degree();
    if two_deg < big_n {
        return Err(Error::ExtensionInvalid(format!(
            "polynomial degree {} cannot conjugate an order-{} operator",
            polynomial.degree(),
            big_n
        )));
    }
    let n_prime = two_deg - big_n;
    let points: Vec<f64> = window.iter().collect();
    let h_src: Arc<dyn PotentialSource> = h_plus.clone();

    let mut used = vec![false; ext.len()];
    let mut image_chains: Vec<FunctionChain> = Vec::new();
    let mut survivors = 0usize;
    for entry in &summary.entries {
        let kappa = entry.kappa();
        let mut group: Vec<&AssociationChain> = Vec::new();
        for (i, chain) in ext.iter().enumerate() {
            if lambda_close(chain.lambda, entry.lambda) {
                used[i] = true;
                group.push(chain);
            }
        }
        if group.len() != 2 * n {
            return Err(Error::ExtensionCountMismatch(format!(
                "eigenvalue {} carries {} extension chains, expected {}",
                entry.lambda,
                group.len(),
                2 * n
            )));
        }
        for chain in group {
            if chain.len() != kappa {
                return Err(Error::ExtensionCountMismatch(format!(
                    "extension chain at {} has length {}, expected {}",
                    chain.lambda,
                    chain.len(),
                    kappa
                )));
            }
            let report = verify_chain(h_plus, chain, &points, tol.chain)?;
            if !report.pass {
                let worst = report.link_residuals.iter().cloned().fold(0.0, f64::max);
                return Err(Error::ExtensionInvalid(format!(
                    "extension chain at {} violates the chain relations: residual {:.3e}",
                    chain.lambda, worst
                )));
            }
            // Q⁻ annihilates exactly a prefix of each extension chain;
            // the images of the rest form a chain for H₋ at the same λ.
            let mut members: Vec<Arc<dyn CVecFunction>> = Vec::new();
            for m in &chain.members {
                let is_zero =
                    q_minus.application_report(&*m.as_fn(), &points)?.rel() <= tol.zero_rel;
                if is_zero && !members.is_empty() {
                    return Err(Error::ExtensionInvalid(
                        "annihilated member found above a surviving one".into(),
                    ));
                }
                if !is_zero {
                    members.push(Arc::new(ImageVec::new(
                        q_minus.clone(),
                        m.as_fn(),
                        h_src.clone(),
                        v_minus.clone(),
                    )));
                }
            }
            survivors += members.len();
            if !members.is_empty() {
                image_chains.push(FunctionChain { lambda: entry.lambda, members });
            }
        }
    }
    for (i, chain) in ext.iter().enumerate() {
        if !used[i] {
            return Err(Error::ExtensionInvalid(format!(
                "extension chain at {} matches no generating eigenvalue",
                chain.lambda
            )));
        }
    }
    if survivors != n * n_prime {
        return Err(Error::ExtensionCountMismatch(format!(
            "{} image members survive, expected n·N' = {}",
            survivors,
            n * n_prime
        )));
    }

    let lead_inv = inverse(q_minus.leading(), tol.singular_rel)?;
    let base = if n_prime == 0 {
        MatrixDifferentialOperator::constant(lead_inv, tol)
    } else {
        MatrixDifferentialOperator::build_from_chains(&image_chains, lead_inv, window, tol)?
    };

    // Least-squares scalar against P(H₊) over the test vectors.
    let mut num = C_ZERO;
    let mut den = 0.0f64;
    let mut samples: Vec<(Vec<Complex64>, Vec<Complex64>)> = Vec::new();
    for f in &default_test_functions(n) {
        let g: Arc<dyn CVecFunction> = Arc::new(ImageVec::new(
            q_minus.clone(),
            f.as_fn(),
            h_src.clone(),
            v_minus.clone(),
        ));
        let pf = apply_susy_poly(h_plus, f, &polynomial)?;
        for &x in &points {
            let a = base.apply_at(&*g, x)?;
            let b = pf.eval(0, x)?;
            for r in 0..n {
                num += a[r].conj() * b[r];
                den += a[r].norm_sqr();
            }
            samples.push((a, b));
        }
    }
    if den <= f64::MIN_POSITIVE {
        return Err(Error::NormalizationFailure { residual: f64::INFINITY });
    }
    let alpha = num / den;
    let mut fit = ResidualReport::default();
    for (a, b) in &samples {
        for r in 0..a.len() {
            let va = alpha * a[r];
            fit.absorb((va - b[r]).norm(), va.norm().max(b[r].norm()));
        }
    }
    if fit.rel() > tol.residual {
        return Err(Error::NormalizationFailure { residual: fit.rel() });
    }

    Ok(ConjugateResult {
        q_plus: Arc::new(base.scaled(alpha)),
        polynomial,
        n_prime,
        alpha,
        fit_residual: fit.rel(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryMode {
    /// V± = V±†: Q⁺ = Σ (-∂)^j ∘ X_j†.
    Hermitian,
    /// V± = V±ᵗ: Q⁺ = Σ (-∂)^j ∘ X_jᵗ.
    Transpose,
    /// V₊* = V₋: Q⁺ = Σ X_j* ∂^j.
    ComplexConjugate,
}

impl SymmetryMode {
    pub fn label(self) -> &'static str {
        match self {
            SymmetryMode::Hermitian => "hermitian",
            SymmetryMode::Transpose => "transpose",
            SymmetryMode::ComplexConjugate => "complex-conjugate",
        }
    }
}

/// Q⁺ read directly off the coefficients of Q⁻ when the potentials admit
/// a structural symmetry. No extension basis is involved.
pub struct SymmetryConjugate {
    base: Arc<MatrixDifferentialOperator>,
    pub mode: SymmetryMode,
}

pub fn conjugate_by_symmetry(
    q_minus: &Arc<MatrixDifferentialOperator>,
    mode: SymmetryMode,
    v_plus: &dyn PotentialSource,
    v_minus: &dyn PotentialSource,
    window: &Grid,
    tol: &Tolerances,
) -> Result<SymmetryConjugate> {
    let mut defect = 0.0f64;
    for x in window.iter() {
        let vp = v_plus.eval(x)?;
        let vm = v_minus.eval(x)?;
        let d = match mode {
            SymmetryMode::Hermitian => vp
                .sub(&vp.conj_transpose())?
                .max_abs()
                .max(vm.sub(&vm.conj_transpose())?.max_abs()),
            SymmetryMode::Transpose => vp
                .sub(&vp.transpose())?
                .max_abs()
                .max(vm.sub(&vm.transpose())?.max_abs()),
            SymmetryMode::ComplexConjugate => vp.conj().sub(&vm)?.max_abs(),
        };
        defect = defect.max(d);
    }
    if defect > tol.symmetry {
        return Err(Error::SymmetryViolated { mode: mode.label(), defect });
    }
    Ok(SymmetryConjugate { base: q_minus.clone(), mode })
}

impl SymmetryConjugate {
    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn order(&self) -> usize {
        self.base.order()
    }

    /// d-th derivative of (Q⁺ f) at x.
    pub fn apply_derivative_at(
        &self,
        f: &dyn CVecFunction,
        x: f64,
        d: usize,
    ) -> Result<Vec<Complex64>> {
        let n = self.base.n();
        if f.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
        }
        let order = self.base.order();
        let max_ord = order + d;
        let fd: Vec<Vec<Complex64>> = (0..n)
            .map(|m| (0..=max_ord).map(|k| f.deriv(m, k, x)).collect())
            .collect::<Result<_>>()?;
        let mut out = vec![C_ZERO; n];
        match self.mode {
            SymmetryMode::ComplexConjugate => {
                if order > 0 {
                    let tower = self.base.coefficient_tower(x, d)?;
                    for (q, level) in tower.iter().enumerate() {
                        let c = binom(d, q);
                        for (j, xq) in level.iter().enumerate() {
                            for r in 0..n {
                                for m in 0..n {
                                    let v = xq.get(r, m).conj();
                                    if v != C_ZERO {
                                        out[r] += c * v * fd[m][j + d - q];
                                    }
                                }
                            }
                        }
                    }
                }
                for r in 0..n {
                    for m in 0..n {
                        out[r] += self.base.leading().get(r, m).conj() * fd[m][max_ord];
                    }
                }
            }
            _ => {
                let flip = |mat: &CMatrix| match self.mode {
                    SymmetryMode::Hermitian => mat.conj_transpose(),
                    _ => mat.transpose(),
                };
                // (Q⁺f)^{(d)} = Σ_j (-1)^j Σ_q C(j+d, q) (X_j^{(q)})^σ f^{(j+d-q)}
                if order > 0 {
                    let tower = self.base.coefficient_tower(x, max_ord - 1)?;
                    for j in 0..order {
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        for q in 0..=(j + d) {
                            let c = sign * binom(j + d, q);
                            let xs = flip(&tower[q][j]);
                            for r in 0..n {
                                for m in 0..n {
                                    let v = xs.get(r, m);
                                    if v != C_ZERO {
                                        out[r] += c * v * fd[m][j + d - q];
                                    }
                                }
                            }
                        }
                    }
                }
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                let lead = flip(self.base.leading());
                for r in 0..n {
                    for m in 0..n {
                        out[r] += sign * lead.get(r, m) * fd[m][max_ord];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply_at(&self, f: &dyn CVecFunction, x: f64) -> Result<Vec<Complex64>> {
        self.apply_derivative_at(f, x, 0)
    }

    /// Residual of Q⁺ H₋ = H₊ Q⁺ over the test vectors.
    pub fn intertwining_residual(
        &self,
        v_minus: &Arc<dyn PotentialSource>,
        v_plus: &dyn PotentialSource,
        tests: &[VectorFunction],
        window: &Grid,
    ) -> Result<ResidualReport> {
        reverse_intertwining_residual(
            &|f, x, d| self.apply_derivative_at(f, x, d),
            self.n(),
            v_minus,
            v_plus,
            tests,
            window,
        )
    }
}

fn reverse_intertwining_residual(
    apply: &dyn Fn(&dyn CVecFunction, f64, usize) -> Result<Vec<Complex64>>,
    n: usize,
    source_potential: &Arc<dyn PotentialSource>,
    target_potential: &dyn PotentialSource,
    tests: &[VectorFunction],
    window: &Grid,
) -> Result<ResidualReport> {
    let mut report = ResidualReport::default();
    for t in tests {
        let hf: Arc<dyn CVecFunction> = Arc::new(ShiftedHamiltonianAction::new(
            source_potential.clone(),
            t.as_fn(),
            C_ZERO,
        ));
        let tf = t.as_fn();
        for x in window.iter() {
            let a = apply(&*hf, x, 0)?;
            let q0 = apply(&*tf, x, 0)?;
            let q2 = apply(&*tf, x, 2)?;
            let vq = target_potential.eval(x)?.mul_vec(&q0)?;
            for r in 0..n {
                let b = -q2[r] + vq[r];
                report.absorb((a[r] - b).norm(), a[r].norm().max(b.norm()));
            }
        }
    }
    Ok(report)
}

pub struct AlgebraReport {
    /// Q⁺Q⁻ - P(H₊) over the test vectors.
    pub forward: ResidualReport,
    /// Q⁻Q⁺ - P(H₋); only meaningful (and only computed) when no
    /// lower-order intertwiner is asserted to exist.
    pub backward: Option<ResidualReport>,
    /// The supercharges are strictly block-triangular, so their squares
    /// vanish identically; recorded as exactly zero.
    pub nilpotency: f64,
    pub minus_intertwining: ResidualReport,
    pub plus_intertwining: ResidualReport,
    /// N + N' = 2 deg P.
    pub degree_identity: bool,
}

pub fn verify_susy_algebra(
    h_plus: &Arc<MatrixHamiltonian>,
    v_minus: &Arc<dyn PotentialSource>,
    q_minus: &Arc<MatrixDifferentialOperator>,
    q_plus: &Arc<MatrixDifferentialOperator>,
    poly: &SusyPolynomial,
    window: &Grid,
    no_lower_order_asserted: bool,
) -> Result<AlgebraReport> {
    let n = h_plus.n();
    let tests = default_test_functions(n);
    let points: Vec<f64> = window.iter().collect();
    let h_src: Arc<dyn PotentialSource> = h_plus.clone();

    let mut forward = ResidualReport::default();
    for f in &tests {
        let g: Arc<dyn CVecFunction> = Arc::new(ImageVec::new(
            q_minus.clone(),
            f.as_fn(),
            h_src.clone(),
            v_minus.clone(),
        ));
        let pf = apply_susy_poly(h_plus, f, poly)?;
        for &x in &points {
            let a = q_plus.apply_at(&*g, x)?;
            let b = pf.eval(0, x)?;
            for r in 0..n {
                forward.absorb((a[r] - b[r]).norm(), a[r].norm().max(b[r].norm()));
            }
        }
    }

    let backward = if no_lower_order_asserted {
        let mut rep = ResidualReport::default();
        for f in &tests {
            let g: Arc<dyn CVecFunction> = Arc::new(ImageVec::new(
                q_plus.clone(),
                f.as_fn(),
                v_minus.clone(),
                h_src.clone(),
            ));
            let mut pf: Arc<dyn CVecFunction> = f.as_fn();
            for &(lambda, kappa) in &poly.roots {
                for _ in 0..kappa {
                    pf = Arc::new(ShiftedHamiltonianAction::new(v_minus.clone(), pf, lambda));
                }
            }
            for &x in &points {
                let a = q_minus.apply_at(&*g, x)?;
                let b: Vec<Complex64> =
                    (0..n).map(|r| pf.deriv(r, 0, x)).collect::<Result<_>>()?;
                for r in 0..n {
                    rep.absorb((a[r] - b[r]).norm(), a[r].norm().max(b[r].norm()));
                }
            }
        }
        Some(rep)
    } else {
        None
    };

    let minus_intertwining = intertwining_residual(q_minus, h_plus, &**v_minus, &tests, window)?;
    let plus_intertwining = reverse_intertwining_residual(
        &|f, x, d| q_plus.apply_derivative_at(f, x, d),
        n,
        v_minus,
        &**h_plus,
        &tests,
        window,
    )?;

    Ok(AlgebraReport {
        forward,
        backward,
        nilpotency: 0.0,
        minus_intertwining,
        plus_intertwining,
        degree_identity: q_minus.order() + q_plus.order() == 2 * poly.degree(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::operator::{final_potential, PotentialEvaluator};
    use crate::testutil::{self, c};

    fn window() -> Grid {
        Grid::default()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    struct Setup {
        h: Arc<MatrixHamiltonian>,
        cs: ChainSet,
        q: Arc<MatrixDifferentialOperator>,
        pe: Arc<PotentialEvaluator>,
        v: Arc<dyn PotentialSource>,
    }

    fn setup(case: (MatrixHamiltonian, ChainSet)) -> Setup {
        let h = Arc::new(case.0);
        let cs = case.1;
        let q = Arc::new(
            MatrixDifferentialOperator::build_intertwiner(
                &cs,
                CMatrix::identity(h.n()),
                &window(),
                &tol(),
            )
            .unwrap(),
        );
        let pe = Arc::new(final_potential(h.clone(), q.clone()).unwrap());
        let v: Arc<dyn PotentialSource> = pe.clone();
        Setup { h, cs, q, pe, v }
    }

    fn scalar_chain(lambda: Complex64, e: Expr) -> AssociationChain {
        AssociationChain::new(lambda, vec![VectorFunction::new(vec![e])])
    }

    #[test]
    fn soliton_conjugate_flow() {
        let s = setup(testutil::soliton_case());
        let ext = vec![
            scalar_chain(c(-1.0, 0.0), Expr::cosh(Expr::var())),
            scalar_chain(c(-1.0, 0.0), Expr::sinh(Expr::var())),
        ];
        let res = build_conjugate(&s.h, &s.v, &s.cs, &ext, &s.q, &window(), &tol()).unwrap();
        assert_eq!(res.n_prime, 1);
        assert_eq!(res.polynomial.roots, vec![(c(-1.0, 0.0), 1)]);
        assert!((res.alpha - c(-1.0, 0.0)).norm() < 1e-6, "alpha {}", res.alpha);
        assert!(res.fit_residual <= 1e-8);
        // Q⁺ = -(∂ + tanh x)
        assert!((res.q_plus.leading().get(0, 0) - c(-1.0, 0.0)).norm() < 1e-8);
        let x = 0.7f64;
        let x0 = res.q_plus.coefficients_at(x).unwrap()[0].get(0, 0);
        assert!((x0 - c(-x.tanh(), 0.0)).norm() < 1e-8, "X0 {}", x0);

        let rep =
            verify_susy_algebra(&s.h, &s.v, &s.q, &res.q_plus, &res.polynomial, &window(), true)
                .unwrap();
        assert!(rep.forward.rel() < 1e-8, "forward {}", rep.forward.rel());
        let back = rep.backward.unwrap();
        assert!(back.rel() < 1e-8, "backward {}", back.rel());
        assert!(rep.minus_intertwining.rel() < 1e-8);
        assert!(rep.plus_intertwining.rel() < 1e-8);
        assert!(rep.degree_identity);
        assert_eq!(rep.nilpotency, 0.0);
    }

    #[test]
    fn exp_pair_conjugate_is_minus_identity() {
        let s = setup(testutil::exp_pair_case());
        let ext = s.cs.chains.clone();
        let res = build_conjugate(&s.h, &s.v, &s.cs, &ext, &s.q, &window(), &tol()).unwrap();
        assert_eq!(res.n_prime, 0);
        assert_eq!(res.q_plus.order(), 0);
        assert!((res.alpha - c(-1.0, 0.0)).norm() < 1e-8, "alpha {}", res.alpha);
        assert!((res.q_plus.leading().get(0, 0) - c(-1.0, 0.0)).norm() < 1e-8);

        let rep =
            verify_susy_algebra(&s.h, &s.v, &s.q, &res.q_plus, &res.polynomial, &window(), false)
                .unwrap();
        assert!(rep.forward.rel() < 1e-10, "forward {}", rep.forward.rel());
        assert!(rep.backward.is_none());
        assert!(rep.degree_identity);
    }

    #[test]
    fn missing_extension_chain_detected() {
        let s = setup(testutil::soliton_case());
        let ext = vec![scalar_chain(c(-1.0, 0.0), Expr::cosh(Expr::var()))];
        assert!(matches!(
            build_conjugate(&s.h, &s.v, &s.cs, &ext, &s.q, &window(), &tol()),
            Err(Error::ExtensionCountMismatch(_))
        ));
    }

    #[test]
    fn invalid_extension_chains_detected() {
        let s = setup(testutil::soliton_case());
        // x solves nothing at λ=-1: the chain relations fail.
        let bad = vec![
            scalar_chain(c(-1.0, 0.0), Expr::cosh(Expr::var())),
            scalar_chain(c(-1.0, 0.0), Expr::var()),
        ];
        assert!(matches!(
            build_conjugate(&s.h, &s.v, &s.cs, &bad, &s.q, &window(), &tol()),
            Err(Error::ExtensionInvalid(_))
        ));
        // A chain at an eigenvalue the generating set does not carry.
        let stray = vec![
            scalar_chain(c(-1.0, 0.0), Expr::cosh(Expr::var())),
            scalar_chain(c(-1.0, 0.0), Expr::sinh(Expr::var())),
            scalar_chain(c(5.0, 0.0), Expr::cosh(Expr::var())),
        ];
        assert!(matches!(
            build_conjugate(&s.h, &s.v, &s.cs, &stray, &s.q, &window(), &tol()),
            Err(Error::ExtensionInvalid(_))
        ));
    }

    #[test]
    fn hermitian_symmetry_matches_built_conjugate() {
        let s = setup(testutil::soliton_case());
        let ext = vec![
            scalar_chain(c(-1.0, 0.0), Expr::cosh(Expr::var())),
            scalar_chain(c(-1.0, 0.0), Expr::sinh(Expr::var())),
        ];
        let res = build_conjugate(&s.h, &s.v, &s.cs, &ext, &s.q, &window(), &tol()).unwrap();
        let sym =
            conjugate_by_symmetry(&s.q, SymmetryMode::Hermitian, &*s.h, &*s.pe, &window(), &tol())
                .unwrap();
        for f in default_test_functions(1) {
            let ff = f.as_fn();
            for x in [-3.0, -1.1, 0.0, 0.9, 2.7] {
                let a = sym.apply_at(&*ff, x).unwrap();
                let b = res.q_plus.apply_at(&*ff, x).unwrap();
                assert!(
                    (a[0] - b[0]).norm() <= 1e-7 * (1.0 + b[0].norm()),
                    "x = {x}: {} vs {}",
                    a[0],
                    b[0]
                );
            }
        }
        let rep = sym
            .intertwining_residual(&s.v, &*s.h, &default_test_functions(1), &window())
            .unwrap();
        assert!(rep.rel() < 1e-8, "reverse intertwining {}", rep.rel());

        // Real scalar coefficients: transpose agrees with hermitian.
        let symt =
            conjugate_by_symmetry(&s.q, SymmetryMode::Transpose, &*s.h, &*s.pe, &window(), &tol())
                .unwrap();
        let f = default_test_functions(1).remove(0);
        let a = sym.apply_at(&*f.as_fn(), 1.3).unwrap();
        let b = symt.apply_at(&*f.as_fn(), 1.3).unwrap();
        assert!((a[0] - b[0]).norm() < 1e-10);

        // V₊* = 0 ≠ V₋ here, so the conjugate mode must refuse.
        assert!(matches!(
            conjugate_by_symmetry(
                &s.q,
                SymmetryMode::ComplexConjugate,
                &*s.h,
                &*s.pe,
                &window(),
                &tol()
            ),
            Err(Error::SymmetryViolated { mode: "complex-conjugate", .. })
        ));
    }

    #[test]
    fn non_hermitian_potential_refused() {
        let s = setup(testutil::soliton_case());
        let skew = MatrixHamiltonian::new(vec![vec![Expr::i() * Expr::var()]]).unwrap();
        match conjugate_by_symmetry(&s.q, SymmetryMode::Hermitian, &skew, &skew, &window(), &tol())
        {
            Err(Error::SymmetryViolated { mode: "hermitian", defect }) => {
                assert!(defect > 1.0, "defect {defect}");
            }
            other => panic!("expected symmetry violation, got {:?}", other.err()),
        }
    }

    #[test]
    fn wrong_polynomial_root_shows_in_forward_residual() {
        let s = setup(testutil::soliton_case());
        let ext = vec![
            scalar_chain(c(-1.0, 0.0), Expr::cosh(Expr::var())),
            scalar_chain(c(-1.0, 0.0), Expr::sinh(Expr::var())),
        ];
        let res = build_conjugate(&s.h, &s.v, &s.cs, &ext, &s.q, &window(), &tol()).unwrap();
        let bad = SusyPolynomial { roots: vec![(c(-2.0, 0.0), 1)] };
        let rep = verify_susy_algebra(&s.h, &s.v, &s.q, &res.q_plus, &bad, &window(), false)
            .unwrap();
        assert!(rep.forward.rel() > 1e-2, "forward {}", rep.forward.rel());
    }
}
