//! Shared fixtures: the scalar soliton case, the constant-coefficient
//! pair case, and the 2x2 diagonal-free Jordan chain of length 4.

use num_complex::Complex64;

use crate::expr::Expr;
use crate::hamiltonian::{AssociationChain, ChainSet, MatrixHamiltonian, VectorFunction};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// n=1, N=1, V=0, chain (cosh x) at λ=-1. Yields Q = ∂ - tanh x.
pub fn soliton_case() -> (MatrixHamiltonian, ChainSet) {
    let h = MatrixHamiltonian::free(1);
    let chain = AssociationChain::new(
        c(-1.0, 0.0),
        vec![VectorFunction::new(vec![Expr::cosh(Expr::var())])],
    );
    (h, ChainSet::new(vec![chain]))
}

/// n=1, N=2, V=0, chains (e^x) and (e^-x) both at λ=-1.
/// Yields Q = ∂² - 1 with constant coefficients.
pub fn exp_pair_case() -> (MatrixHamiltonian, ChainSet) {
    let h = MatrixHamiltonian::free(1);
    let up = AssociationChain::new(
        c(-1.0, 0.0),
        vec![VectorFunction::new(vec![Expr::exp(Expr::var())])],
    );
    let down = AssociationChain::new(
        c(-1.0, 0.0),
        vec![VectorFunction::new(vec![Expr::exp(-Expr::var())])],
    );
    (h, ChainSet::new(vec![up, down]))
}

/// n=2, H = diag(-∂², -∂²), one length-4 chain at λ=1:
///   Φ₀ = (e^{ix}, 0)
///   Φ₁ = ((i/2) x e^{ix}, 0)
///   Φ₂ = (-(x² + ix)/8 e^{ix}, e^{ix})
///   Φ₃ = ((-i x³/48 + x²/16 + i x/16) e^{ix}, (i/2) x e^{ix})
/// The full 4x4 Wronskian has modulus 1/4 everywhere; the prefix pair
/// {Φ₀, Φ₁} has identically zero Wronskian.
pub fn diag_free_chain() -> (MatrixHamiltonian, AssociationChain) {
    let h = MatrixHamiltonian::free(2);
    let wave = || Expr::exp(Expr::i() * Expr::var());
    let x = Expr::var;
    let half_i = || Expr::constant(c(0.0, 0.5));

    let phi0 = VectorFunction::new(vec![wave(), Expr::zero()]);
    let phi1 = VectorFunction::new(vec![half_i() * x() * wave(), Expr::zero()]);
    // p(x) = -(x² + ix)/8 solves -p'' - 2ip' = (i/2)x.
    let p = -((x().pow(2) + Expr::i() * x()) / Expr::real(8.0));
    let phi2 = VectorFunction::new(vec![p.clone() * wave(), wave()]);
    // q(x) = -ix³/48 + x²/16 + ix/16 solves -q'' - 2iq' = p.
    let q = Expr::constant(c(0.0, -1.0 / 48.0)) * x().pow(3)
        + Expr::real(1.0 / 16.0) * x().pow(2)
        + Expr::constant(c(0.0, 1.0 / 16.0)) * x();
    let phi3 = VectorFunction::new(vec![q * wave(), half_i() * x() * wave()]);

    (h, AssociationChain::new(c(1.0, 0.0), vec![phi0, phi1, phi2, phi3]))
}
