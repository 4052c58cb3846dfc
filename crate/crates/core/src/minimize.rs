//! Minimizability: detect and strip scalar polynomial-in-H factors.
//!
//! An operator Q of order N factors as P · Π (λ_l I - H₊)^{k_l} with P a
//! non-minimizable intertwiner of order M = N - 2 Σ k_l exactly when
//! every λ_l carries 2n Jordan blocks in T⁺, no other eigenvalue does,
//! and k_l is the smallest block order at λ_l.

use std::sync::Arc;

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonian::{
    AssociationChain, ChainSet, MatrixHamiltonian, SpectralSummary, VectorFunction,
};
use crate::linalg::CMatrix;
use crate::operator::{default_test_functions, MatrixDifferentialOperator, ResidualReport};

/// The minimization data read off a spectral summary: the root multiset
/// of the scalar polynomial and the order bookkeeping N = M + 2 Σ k_l.
#[derive(Clone, Debug)]
pub struct MinimizationCertificate {
    /// (λ_l, k_l), λ ascending; empty means non-minimizable.
    pub factors: Vec<(Complex64, usize)>,
    /// M, the order of the residual operator P.
    pub residual_order: usize,
    /// N, the order of the examined operator.
    pub total_order: usize,
}

impl MinimizationCertificate {
    pub fn is_minimizable(&self) -> bool {
        !self.factors.is_empty()
    }

    pub fn factor_degree(&self) -> usize {
        self.factors.iter().map(|&(_, k)| k).sum()
    }
}

/// Apply the §-criterion to a summary of the generating chains.
pub fn minimizable_factors(summary: &SpectralSummary, n: usize) -> MinimizationCertificate {
    let total = summary.total_members();
    assert_eq!(total % n, 0, "chain count not a multiple of n");
    let total_order = total / n;
    let factors: Vec<(Complex64, usize)> = summary
        .entries
        .iter()
        .filter(|e| e.geometric_multiplicity() == 2 * n)
        .map(|e| (e.lambda, e.min_order()))
        .collect();
    let stripped: usize = factors.iter().map(|&(_, k)| k).sum();
    MinimizationCertificate {
        factors,
        residual_order: total_order - 2 * stripped,
        total_order,
    }
}

/// Π (λ_l I - H)^{k_l} applied to f, exact.
pub fn apply_minimization_poly(
    h: &MatrixHamiltonian,
    f: &VectorFunction,
    factors: &[(Complex64, usize)],
) -> Result<VectorFunction> {
    let mut g = f.clone();
    for &(lambda, k) in factors {
        for _ in 0..k {
            g = h.shifted_image(&g, lambda)?;
        }
    }
    Ok(g)
}

pub struct MinimizationOutcome {
    pub p: Arc<MatrixDifferentialOperator>,
    /// Defect of Q f = P (Π (λ_l I - H₊)^{k_l} f) over the test set.
    pub residual: ResidualReport,
    /// (λ, length) of the reduced chains generating P.
    pub reduced_shape: Vec<(Complex64, usize)>,
}

/// Strip the certified factors: transform every chain member by the
/// factor polynomial, drop the annihilated prefixes, and rebuild the
/// residual intertwiner P of order M from what survives.
pub fn minimize(
    h: Arc<MatrixHamiltonian>,
    cs: &ChainSet,
    cert: &MinimizationCertificate,
    leading: CMatrix,
    window: &Grid,
    tol: &Tolerances,
) -> Result<MinimizationOutcome> {
    if cert.factors.is_empty() {
        return Err(Error::FactorInconsistent(
            "certificate carries no factors; the operator is non-minimizable".into(),
        ));
    }
    let n = h.n();
    let points: Vec<f64> = window.iter().collect();

    let mut reduced: Vec<AssociationChain> = Vec::new();
    for chain in &cs.chains {
        let images: Vec<VectorFunction> = chain
            .members
            .iter()
            .map(|m| apply_minimization_poly(&h, m, &cert.factors))
            .collect::<Result<_>>()?;
        let mut scale: f64 = 0.0;
        for im in &images {
            scale = scale.max(im.sup_norm_on(&points)?);
        }
        let threshold = tol.zero_rel * scale.max(1.0);
        // The factor polynomial annihilates exactly a prefix of each
        // chain; a zero after a survivor means the input was no chain.
        let mut survivors = Vec::new();
        for im in images {
            let is_zero = im.sup_norm_on(&points)? <= threshold;
            if is_zero && !survivors.is_empty() {
                return Err(Error::FactorInconsistent(
                    "annihilated member found above a surviving one; input is not a chain".into(),
                ));
            }
            if !is_zero {
                survivors.push(im);
            }
        }
        if !survivors.is_empty() {
            reduced.push(AssociationChain::new(chain.lambda, survivors));
        }
    }

    let count: usize = reduced.iter().map(|c| c.len()).sum();
    if count != n * cert.residual_order {
        return Err(Error::FactorInconsistent(format!(
            "reduced chains hold {} members, expected n*M = {}",
            count,
            n * cert.residual_order
        )));
    }

    let reduced_shape = reduced.iter().map(|c| (c.lambda, c.len())).collect();
    let p = if cert.residual_order == 0 {
        MatrixDifferentialOperator::constant(leading.clone(), tol)
    } else {
        MatrixDifferentialOperator::build_intertwiner(
            &ChainSet::new(reduced),
            leading.clone(),
            window,
            tol,
        )?
    };

    let q = MatrixDifferentialOperator::build_intertwiner(cs, leading, window, tol)?;
    let mut residual = ResidualReport::default();
    for f in &default_test_functions(n) {
        let af = apply_minimization_poly(&h, f, &cert.factors)?;
        let ff = f.as_fn();
        let aff = af.as_fn();
        for &x in &points {
            let a = q.apply_at(&*ff, x)?;
            let b = p.apply_at(&*aff, x)?;
            for r in 0..n {
                residual.absorb((a[r] - b[r]).norm(), a[r].norm().max(b[r].norm()));
            }
        }
    }

    Ok(MinimizationOutcome { p: Arc::new(p), residual, reduced_shape })
}
