//! Fixture builders and seeded generators shared by the acceptance and
//! smoke suites. Every generated chain set has a Wronskian that is
//! provably bounded away from zero on its window.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use darboux_core::expr::Expr;
use darboux_core::grid::Grid;
use darboux_core::hamiltonian::{AssociationChain, ChainSet, MatrixHamiltonian, VectorFunction};
use darboux_core::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Vector with `expr` in slot `m`, zero elsewhere.
pub fn unit_member(n: usize, m: usize, expr: Expr) -> VectorFunction {
    let mut comps = vec![Expr::zero(); n];
    comps[m] = expr;
    VectorFunction::new(comps)
}

/// n=1, N=1, V=0, kernel cosh(x) at λ=-1.
pub fn soliton() -> (Arc<MatrixHamiltonian>, ChainSet) {
    let h = Arc::new(MatrixHamiltonian::free(1));
    let chain = AssociationChain::new(
        c(-1.0, 0.0),
        vec![VectorFunction::new(vec![Expr::cosh(Expr::var())])],
    );
    (h, ChainSet::new(vec![chain]))
}

/// Solutions of -y'' = -y: the extension basis for the soliton case.
pub fn soliton_extension() -> Vec<AssociationChain> {
    vec![
        AssociationChain::new(
            c(-1.0, 0.0),
            vec![VectorFunction::new(vec![Expr::cosh(Expr::var())])],
        ),
        AssociationChain::new(
            c(-1.0, 0.0),
            vec![VectorFunction::new(vec![Expr::sinh(Expr::var())])],
        ),
    ]
}

/// n=1, N=2, V=0, kernel {e^x, e^-x} both at λ=-1.
pub fn exp_pair() -> (Arc<MatrixHamiltonian>, ChainSet) {
    let h = Arc::new(MatrixHamiltonian::free(1));
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

/// n=2, H = diag(-d², -d²), one length-4 chain at λ=1. The full 4x4
/// Wronskian has modulus 1/4 everywhere while the length-2 prefix has
/// identically zero Wronskian.
pub fn diag_free_chain() -> (Arc<MatrixHamiltonian>, AssociationChain) {
    let h = Arc::new(MatrixHamiltonian::free(2));
    let wave = || Expr::exp(Expr::i() * Expr::var());
    let x = Expr::var;
    let half_i = || Expr::constant(c(0.0, 0.5));

    let phi0 = VectorFunction::new(vec![wave(), Expr::zero()]);
    let phi1 = VectorFunction::new(vec![half_i() * x() * wave(), Expr::zero()]);
    let p = -((x().pow(2) + Expr::i() * x()) / Expr::real(8.0));
    let phi2 = VectorFunction::new(vec![p * wave(), wave()]);
    let q = Expr::constant(c(0.0, -1.0 / 48.0)) * x().pow(3)
        + Expr::real(1.0 / 16.0) * x().pow(2)
        + Expr::constant(c(0.0, 1.0 / 16.0)) * x();
    let phi3 = VectorFunction::new(vec![q * wave(), half_i() * x() * wave()]);

    (h, AssociationChain::new(c(1.0, 0.0), vec![phi0, phi1, phi2, phi3]))
}

pub struct RandomScenario {
    pub h: Arc<MatrixHamiltonian>,
    pub cs: ChainSet,
    pub n: usize,
    pub order: usize,
    pub window: Grid,
}

/// Diagonal constant potential with per-component solution families whose
/// scalar Wronskians never vanish:
///   N=1: a·e^{μx} + b·e^{-μx} with a, b > 0,
///   N=2: {cosh μ₁x, sinh μ₂x} with μ₂ > μ₁, or {cos ωx, sin ωx},
///   N=3: {cosh ax, e^{μx}, e^{-μx}} with a ≠ μ.
/// Members occupy disjoint components, so the full Wronskian is a signed
/// product of the per-component blocks.
pub fn random_intertwining_scenario(seed: u64) -> RandomScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3usize);
    let order = rng.gen_range(1..=3usize);
    let window = Grid::new(-3.0, 3.0, 61);

    let mut v = vec![vec![Expr::zero(); n]; n];
    let mut shifts = Vec::with_capacity(n);
    for m in 0..n {
        let shift = c(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5));
        v[m][m] = Expr::constant(shift);
        shifts.push(shift);
    }
    let h = Arc::new(MatrixHamiltonian::new(v).expect("square potential"));

    let x = Expr::var;
    let mut chains = Vec::new();
    for m in 0..n {
        // -f'' + c_m f = λ f with f'' = s f gives λ = c_m - s.
        let push = |f: Expr, s: f64, chains: &mut Vec<AssociationChain>| {
            chains.push(AssociationChain::new(
                shifts[m] - c(s, 0.0),
                vec![unit_member(n, m, f)],
            ));
        };
        match order {
            1 => {
                let mu = rng.gen_range(0.3..1.2);
                let a = rng.gen_range(0.5..1.5);
                let b = rng.gen_range(0.5..1.5);
                let f = Expr::real(a) * Expr::exp(Expr::real(mu) * x())
                    + Expr::real(b) * Expr::exp(Expr::real(-mu) * x());
                push(f, mu * mu, &mut chains);
            }
            2 => {
                if rng.gen::<bool>() {
                    let mu1 = rng.gen_range(0.3..0.9);
                    let mu2 = mu1 + rng.gen_range(0.25..0.6);
                    push(Expr::cosh(Expr::real(mu1) * x()), mu1 * mu1, &mut chains);
                    push(Expr::sinh(Expr::real(mu2) * x()), mu2 * mu2, &mut chains);
                } else {
                    let w = rng.gen_range(0.4..1.5);
                    push(Expr::cos(Expr::real(w) * x()), -w * w, &mut chains);
                    push(Expr::sin(Expr::real(w) * x()), -w * w, &mut chains);
                }
            }
            _ => {
                let a = rng.gen_range(0.3..1.2);
                let mut mu: f64 = rng.gen_range(0.3..1.2);
                if (mu - a).abs() < 0.2 {
                    mu = a + if a < 0.9 { 0.25 } else { -0.25 };
                }
                push(Expr::cosh(Expr::real(a) * x()), a * a, &mut chains);
                push(Expr::exp(Expr::real(mu) * x()), mu * mu, &mut chains);
                push(Expr::exp(Expr::real(-mu) * x()), mu * mu, &mut chains);
            }
        }
    }
    RandomScenario { h, cs: ChainSet::new(chains), n, order, window }
}

pub struct RoundTrip {
    pub h: Arc<MatrixHamiltonian>,
    pub cs: ChainSet,
    /// Injected polynomial factor.
    pub lambda: Complex64,
    pub k: usize,
    /// Exponent of the surviving kernel witness e^{ax}.
    pub a: f64,
    pub window: Grid,
}

/// Scalar chain set whose intertwiner is (∂ - a)·(λ - H)^k by design:
/// two full chains of length k at λ = -μ² (the kernel of (λ - H)^k) plus
/// the single witness e^{ax}. All members lie in the kernel of a
/// constant-coefficient operator, so the Wronskian is W(0)·e^{ax}.
pub fn random_minimizable_scenario(seed: u64) -> RoundTrip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = rng.gen_range(0.4..1.0);
    let k = rng.gen_range(1..=2usize);
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let mut a: f64 = sign * rng.gen_range(0.3..1.1);
    if (a.abs() - mu).abs() < 0.25 {
        a = sign * (mu + 0.3);
    }
    let lambda = c(-mu * mu, 0.0);

    let x = Expr::var;
    let chain = |m: f64| {
        let base = Expr::exp(Expr::real(m) * x());
        let mut members = vec![base.clone()];
        if k == 2 {
            members.push(Expr::real(-1.0 / (2.0 * m)) * x() * base);
        }
        AssociationChain::new(
            lambda,
            members.into_iter().map(|e| VectorFunction::new(vec![e])).collect(),
        )
    };
    let up = chain(mu);
    let down = chain(-mu);
    let witness = AssociationChain::new(
        c(-a * a, 0.0),
        vec![VectorFunction::new(vec![Expr::exp(Expr::real(a) * x())])],
    );

    RoundTrip {
        h: Arc::new(MatrixHamiltonian::free(1)),
        cs: ChainSet::new(vec![up, down, witness]),
        lambda,
        k,
        a,
        window: Grid::new(-3.0, 3.0, 61),
    }
}

pub struct ScalarPair {
    pub h: Arc<MatrixHamiltonian>,
    pub cs: ChainSet,
    pub window: Grid,
}

/// Scalar N=2 set {cosh μ₁x, sinh μ₂x} with μ₂ > μ₁: eigenvalues are
/// distinct, the cosh prefix Wronskian is positive everywhere, and the
/// full Wronskian μ₂·cosh·cosh - μ₁·sinh·sinh stays positive.
pub fn random_scalar_pair(seed: u64) -> ScalarPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu1 = rng.gen_range(0.3..0.9);
    let mu2 = mu1 + rng.gen_range(0.25..0.6);
    let x = Expr::var;
    let first = AssociationChain::new(
        c(-mu1 * mu1, 0.0),
        vec![VectorFunction::new(vec![Expr::cosh(Expr::real(mu1) * x())])],
    );
    let second = AssociationChain::new(
        c(-mu2 * mu2, 0.0),
        vec![VectorFunction::new(vec![Expr::sinh(Expr::real(mu2) * x())])],
    );
    ScalarPair {
        h: Arc::new(MatrixHamiltonian::free(1)),
        cs: ChainSet::new(vec![first, second]),
        window: Grid::new(-4.0, 4.0, 81),
    }
}
