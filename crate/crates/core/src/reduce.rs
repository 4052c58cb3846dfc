//! Reducibility: can Q factor as K ∘ P through an intermediate matrix
//! Hamiltonian, both factors intertwiners of lower order?
//!
//! Invariant subspaces of the kernel module correspond to prefix picks
//! from the chains (after an invertible remix within each eigenvalue),
//! so the sweep enumerates prefix assignments and, where an eigenvalue
//! carries several chains, seeded random remixes.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::function::{CVecFunction, PotentialSource};
use crate::grid::Grid;
use crate::hamiltonian::{lambda_close, AssociationChain, ChainSet, MatrixHamiltonian, VectorFunction};
use crate::linalg::CMatrix;
use crate::operator::{
    default_test_functions, final_potential, wronskian, FunctionChain, ImageVec,
    MatrixDifferentialOperator, PotentialEvaluator, ResidualReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WronskianStatus {
    NonvanishingOnWindow,
    VanishesSomewhere,
    IdenticallyZero,
}

/// A would-be kernel of the right factor P: a prefix of each chain,
/// n·M members in total, over possibly remixed chains.
#[derive(Clone)]
pub struct SubkernelCandidate {
    pub chains: Vec<AssociationChain>,
    pub prefixes: Vec<usize>,
    /// Probe index for remixed candidates; None for plain prefixes.
    pub probe: Option<u32>,
    pub m: usize,
}

impl SubkernelCandidate {
    /// The selected prefixes as a chain set of n·M members.
    pub fn selected(&self) -> ChainSet {
        ChainSet::new(
            self.chains
                .iter()
                .zip(&self.prefixes)
                .filter(|&(_, &p)| p > 0)
                .map(|(c, &p)| AssociationChain::new(c.lambda, c.members[..p].to_vec()))
                .collect(),
        )
    }

    pub fn describe(&self) -> String {
        match self.probe {
            Some(r) => format!("prefixes {:?} probe {}", self.prefixes, r),
            None => format!("prefixes {:?}", self.prefixes),
        }
    }
}

fn prefix_assignments(lens: &[usize], target: usize) -> Vec<Vec<usize>> {
    fn go(lens: &[usize], target: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match lens.first() {
            None => {
                if target == 0 {
                    out.push(acc.clone());
                }
            }
            Some(&len) => {
                for p in (0..=len.min(target)).rev() {
                    acc.push(p);
                    go(&lens[1..], target - p, acc, out);
                    acc.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(lens, target, &mut Vec::new(), &mut out);
    out
}

fn lambda_groups(chains: &[AssociationChain]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, c) in chains.iter().enumerate() {
        match groups.iter_mut().find(|g| lambda_close(chains[g[0]].lambda, c.lambda)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

fn has_shareable_lambda(cs: &ChainSet) -> bool {
    lambda_groups(&cs.chains).iter().any(|g| g.len() >= 2)
}

/// One random module automorphism: within each shared eigenvalue, add a
/// shifted multiple of a donor chain to another chain. Shift alignment
/// keeps the chain relations exact.
fn remix_chains(chains: &[AssociationChain], rng: &mut ChaCha8Rng) -> Vec<AssociationChain> {
    let mut out = chains.to_vec();
    for g in lambda_groups(chains).iter().filter(|g| g.len() >= 2) {
        let a = g[rng.gen_range(0..g.len())];
        let b = loop {
            let b = g[rng.gen_range(0..g.len())];
            if b != a {
                break b;
            }
        };
        let mix = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let shift = out[b].len().saturating_sub(out[a].len());
        let donor = out[a].members.clone();
        let members: Vec<VectorFunction> = out[b]
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if i >= shift {
                    m.scaled_add(mix, &donor[i - shift])
                } else {
                    m.clone()
                }
            })
            .collect();
        out[b] = AssociationChain::new(out[b].lambda, members);
    }
    out
}

/// All plain prefix candidates of weight n·M, plus `probes` remixed ones
/// when some eigenvalue carries several chains. Requires 1 ≤ M < N.
pub fn enumerate_subkernels(
    cs: &ChainSet,
    n: usize,
    m: usize,
    probes: u32,
    seed: u64,
) -> Vec<SubkernelCandidate> {
    let total = cs.total_members();
    assert!(n > 0 && total % n == 0, "member count must be a multiple of n");
    let big_n = total / n;
    assert!(m >= 1 && m < big_n, "M must satisfy 1 <= M < N");
    let lens: Vec<usize> = cs.chains.iter().map(|c| c.len()).collect();
    let assignments = prefix_assignments(&lens, n * m);
    let mut out: Vec<SubkernelCandidate> = assignments
        .iter()
        .map(|prefixes| SubkernelCandidate {
            chains: cs.chains.clone(),
            prefixes: prefixes.clone(),
            probe: None,
            m,
        })
        .collect();
    if has_shareable_lambda(cs) && !assignments.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for probe in 0..probes {
            let chains = remix_chains(&cs.chains, &mut rng);
            let prefixes = assignments[rng.gen_range(0..assignments.len())].clone();
            out.push(SubkernelCandidate { chains, prefixes, probe: Some(probe), m });
        }
    }
    out
}

/// Judge the candidate's sub-Wronskian on the window plus the shared
/// off-window points, against the builder's singularity threshold.
pub fn candidate_status(
    cand: &SubkernelCandidate,
    n: usize,
    window: &Grid,
    extra_points: &[f64],
    wronskian_rel: f64,
) -> Result<WronskianStatus> {
    let sel = cand.selected();
    let mut all_zero = true;
    let mut window_clear = true;
    for x in window.iter() {
        let ev = wronskian(&sel, n, cand.m, x)?;
        if ev.det.norm() > wronskian_rel * 1f64.max(ev.matrix.scale_max_row()) {
            all_zero = false;
        } else {
            window_clear = false;
        }
    }
    for &x in extra_points {
        let ev = wronskian(&sel, n, cand.m, x)?;
        if ev.det.norm() > wronskian_rel * 1f64.max(ev.matrix.scale_max_row()) {
            all_zero = false;
        }
    }
    Ok(if all_zero {
        WronskianStatus::IdenticallyZero
    } else if window_clear {
        WronskianStatus::NonvanishingOnWindow
    } else {
        WronskianStatus::VanishesSomewhere
    })
}

pub struct Factorization {
    /// Right factor, leading coefficient I, order M.
    pub p: Arc<MatrixDifferentialOperator>,
    /// The Hamiltonian P intertwines to.
    pub intermediate: Arc<PotentialEvaluator>,
    /// Left factor, carrying Q's leading coefficient, order N - M.
    pub k: Arc<MatrixDifferentialOperator>,
    /// Defect of K(P f) = Q f over the test vectors.
    pub residual: ResidualReport,
}

/// Factor Q through the candidate subkernel: P annihilates the selected
/// members, K the images of the rest under P.
pub fn factorize(
    h: &Arc<MatrixHamiltonian>,
    cand: &SubkernelCandidate,
    leading: CMatrix,
    window: &Grid,
    tol: &Tolerances,
) -> Result<Factorization> {
    let n = h.n();
    let p = Arc::new(MatrixDifferentialOperator::build_intertwiner(
        &cand.selected(),
        CMatrix::identity(n),
        window,
        tol,
    )?);
    let intermediate = Arc::new(final_potential(h.clone(), p.clone())?);
    let h_src: Arc<dyn PotentialSource> = h.clone();
    let mid_src: Arc<dyn PotentialSource> = intermediate.clone();
    let mut image_chains: Vec<FunctionChain> = Vec::new();
    for (chain, &pre) in cand.chains.iter().zip(&cand.prefixes) {
        if pre >= chain.len() {
            continue;
        }
        let members: Vec<Arc<dyn CVecFunction>> = chain.members[pre..]
            .iter()
            .map(|mem| {
                Arc::new(ImageVec::new(p.clone(), mem.as_fn(), h_src.clone(), mid_src.clone()))
                    as Arc<dyn CVecFunction>
            })
            .collect();
        image_chains.push(FunctionChain { lambda: chain.lambda, members });
    }
    let k = Arc::new(MatrixDifferentialOperator::build_from_chains(
        &image_chains,
        leading.clone(),
        window,
        tol,
    )?);

    let full: Vec<FunctionChain> = cand.chains.iter().map(FunctionChain::from_association).collect();
    let q = MatrixDifferentialOperator::build_from_chains(&full, leading, window, tol)?;
    let mut residual = ResidualReport::default();
    for f in &default_test_functions(n) {
        let ff = f.as_fn();
        let pf: Arc<dyn CVecFunction> =
            Arc::new(ImageVec::new(p.clone(), ff.clone(), h_src.clone(), mid_src.clone()));
        for x in window.iter() {
            let a = q.apply_at(&*ff, x)?;
            let b = k.apply_at(&*pf, x)?;
            for r in 0..n {
                residual.absorb((a[r] - b[r]).norm(), a[r].norm().max(b[r].norm()));
            }
        }
    }
    if residual.rel() > tol.residual {
        return Err(Error::CompositionDefect { residual: residual.rel(), tolerance: tol.residual });
    }
    Ok(Factorization { p, intermediate, k, residual })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Witnessed by the candidate at the given enumeration position.
    Reducible { m: usize, candidate: usize },
    Irreducible,
    AbsolutelyIrreducible,
}

pub struct CandidateEvidence {
    pub m: usize,
    pub description: String,
    pub status: WronskianStatus,
}

pub struct ReducibilityVerdict {
    pub verdict: Verdict,
    /// Every candidate judged, in sweep order, up to the witness.
    pub evidence: Vec<CandidateEvidence>,
    /// Exhaustive when every eigenvalue carries a single chain; with
    /// several chains per eigenvalue the remix sweep is probabilistic.
    pub exact_regime: bool,
    /// Non-vanishing is certified only on this window.
    pub window: Grid,
    pub factorization: Option<Factorization>,
}

/// Sweep M ascending: the first candidate whose sub-Wronskian clears the
/// window threshold everywhere yields a factorization; identically zero
/// candidates rule subspaces out entirely.
pub fn classify_reducibility(
    h: &Arc<MatrixHamiltonian>,
    cs: &ChainSet,
    leading: CMatrix,
    window: &Grid,
    probes: u32,
    seed: u64,
    tol: &Tolerances,
) -> Result<ReducibilityVerdict> {
    let n = h.n();
    let q = MatrixDifferentialOperator::build_intertwiner(cs, leading.clone(), window, tol)?;
    let big_n = q.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra: Vec<f64> = (0..64).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let exact_regime = !has_shareable_lambda(cs);
    let mut evidence = Vec::new();
    for m in 1..big_n {
        let candidates = enumerate_subkernels(cs, n, m, probes, rng.gen());
        for (i, cand) in candidates.iter().enumerate() {
            let status = candidate_status(cand, n, window, &extra, tol.wronskian_rel)?;
            evidence.push(CandidateEvidence { m, description: cand.describe(), status });
            if status == WronskianStatus::NonvanishingOnWindow {
                let factorization = factorize(h, cand, leading.clone(), window, tol)?;
                return Ok(ReducibilityVerdict {
                    verdict: Verdict::Reducible { m, candidate: i },
                    evidence,
                    exact_regime,
                    window: *window,
                    factorization: Some(factorization),
                });
            }
        }
    }
    let all_zero = evidence.iter().all(|e| e.status == WronskianStatus::IdenticallyZero);
    Ok(ReducibilityVerdict {
        verdict: if all_zero { Verdict::AbsolutelyIrreducible } else { Verdict::Irreducible },
        evidence,
        exact_regime,
        window: *window,
        factorization: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::testutil::{self, c};

    fn window() -> Grid {
        Grid::default()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn scalar_chain(lambda: Complex64, e: Expr) -> AssociationChain {
        AssociationChain::new(lambda, vec![VectorFunction::new(vec![e])])
    }

    #[test]
    fn coupled_chain_is_absolutely_irreducible() {
        let (h, chain) = testutil::diag_free_chain();
        let cs = ChainSet::new(vec![chain]);
        let full = wronskian(&cs, 2, 2, 0.7).unwrap();
        assert!((full.det.norm() - 0.25).abs() < 1e-12, "|W| = {}", full.det.norm());

        let v = classify_reducibility(
            &Arc::new(h),
            &cs,
            CMatrix::identity(2),
            &window(),
            32,
            7,
            &tol(),
        )
        .unwrap();
        assert_eq!(v.verdict, Verdict::AbsolutelyIrreducible);
        assert!(v.exact_regime);
        assert_eq!(v.evidence.len(), 1);
        assert_eq!(v.evidence[0].status, WronskianStatus::IdenticallyZero);
        assert!(v.factorization.is_none());

        // Forcing the degenerate candidate fails at the Wronskian gate.
        let cands = enumerate_subkernels(&cs, 2, 1, 0, 1);
        assert_eq!(cands.len(), 1);
        assert!(matches!(
            factorize(&Arc::new(testutil::diag_free_chain().0), &cands[0], CMatrix::identity(2), &window(), &tol()),
            Err(Error::SingularWronskian { .. })
        ));
    }

    #[test]
    fn rescaled_members_keep_the_verdict() {
        let (h, chain) = testutil::diag_free_chain();
        let zero = VectorFunction::new(vec![Expr::zero(), Expr::zero()]);
        let scaled = AssociationChain::new(
            chain.lambda,
            chain.members.iter().map(|m| zero.scaled_add(c(2.0, -1.0), m)).collect(),
        );
        let v = classify_reducibility(
            &Arc::new(h),
            &ChainSet::new(vec![scaled]),
            CMatrix::identity(2),
            &window(),
            32,
            11,
            &tol(),
        )
        .unwrap();
        assert_eq!(v.verdict, Verdict::AbsolutelyIrreducible);
    }

    #[test]
    fn distinct_eigenvalue_pair_reduces_immediately() {
        let h = Arc::new(MatrixHamiltonian::free(1));
        let cosh_c = scalar_chain(c(-1.0, 0.0), Expr::cosh(Expr::var()));
        let sinh2 = scalar_chain(
            c(-4.0, 0.0),
            Expr::sinh(Expr::real(2.0) * Expr::var()),
        );
        let cs = ChainSet::new(vec![cosh_c, sinh2]);
        let v =
            classify_reducibility(&h, &cs, CMatrix::identity(1), &window(), 32, 7, &tol()).unwrap();
        assert_eq!(v.verdict, Verdict::Reducible { m: 1, candidate: 0 });
        assert!(v.exact_regime);
        assert_eq!(v.evidence.len(), 1);
        let f = v.factorization.unwrap();
        let x = 0.8f64;
        assert!(
            (f.p.coefficients_at(x).unwrap()[0].get(0, 0) - c(-x.tanh(), 0.0)).norm() < 1e-10
        );
        let vm = f.intermediate.eval(x).unwrap().get(0, 0);
        assert!((vm - c(-2.0 / x.cosh().powi(2), 0.0)).norm() < 1e-9, "V_M {}", vm);
        assert_eq!(f.k.order(), 1);
        assert!(f.residual.rel() <= 1e-8, "residual {}", f.residual.rel());
    }

    #[test]
    fn vanishing_first_candidate_is_skipped() {
        let h = Arc::new(MatrixHamiltonian::free(1));
        let sinh2 = scalar_chain(
            c(-4.0, 0.0),
            Expr::sinh(Expr::real(2.0) * Expr::var()),
        );
        let cosh_c = scalar_chain(c(-1.0, 0.0), Expr::cosh(Expr::var()));
        let cs = ChainSet::new(vec![sinh2, cosh_c]);
        let v =
            classify_reducibility(&h, &cs, CMatrix::identity(1), &window(), 32, 7, &tol()).unwrap();
        // sinh 2x vanishes at the origin; the cosh prefix wins instead.
        assert_eq!(v.verdict, Verdict::Reducible { m: 1, candidate: 1 });
        assert_eq!(v.evidence.len(), 2);
        assert_eq!(v.evidence[0].status, WronskianStatus::VanishesSomewhere);
        assert_eq!(v.evidence[1].status, WronskianStatus::NonvanishingOnWindow);
        assert!(v.factorization.unwrap().residual.rel() <= 1e-8);
    }

    #[test]
    fn shared_eigenvalue_adds_probes_and_reduces() {
        let (h, cs) = testutil::exp_pair_case();
        let cands = enumerate_subkernels(&cs, 1, 1, 8, 3);
        assert_eq!(cands.len(), 2 + 8);
        assert_eq!(cands[0].prefixes, vec![1, 0]);
        assert_eq!(cands[1].prefixes, vec![0, 1]);
        assert!(cands.iter().skip(2).all(|cand| cand.probe.is_some()));

        let v = classify_reducibility(
            &Arc::new(h),
            &cs,
            CMatrix::identity(1),
            &window(),
            8,
            3,
            &tol(),
        )
        .unwrap();
        assert_eq!(v.verdict, Verdict::Reducible { m: 1, candidate: 0 });
        assert!(!v.exact_regime);
        let f = v.factorization.unwrap();
        // P = ∂ - 1 from the e^x prefix; K = ∂ + 1 closes ∂² - 1.
        assert!((f.p.coefficients_at(0.4).unwrap()[0].get(0, 0) - c(-1.0, 0.0)).norm() < 1e-10);
        assert!((f.k.coefficients_at(0.4).unwrap()[0].get(0, 0) - c(1.0, 0.0)).norm() < 1e-8);
        assert!(f.residual.rel() <= 1e-10);
    }

    #[test]
    fn assignment_enumeration_counts() {
        let half = Expr::real(0.5);
        let cs = ChainSet::new(vec![
            AssociationChain::new(
                c(0.0, 0.0),
                vec![
                    VectorFunction::new(vec![Expr::real(1.0)]),
                    VectorFunction::new(vec![-(half * Expr::var().pow(2))]),
                ],
            ),
            scalar_chain(c(0.0, 0.0), Expr::var()),
        ]);
        let m1 = enumerate_subkernels(&cs, 1, 1, 5, 1);
        let m2 = enumerate_subkernels(&cs, 1, 2, 5, 1);
        assert_eq!(m1.iter().filter(|cand| cand.probe.is_none()).count(), 2);
        assert_eq!(m2.iter().filter(|cand| cand.probe.is_none()).count(), 2);
        assert_eq!(m1.len(), 7);
        assert_eq!(m1[0].prefixes, vec![1, 0]);
        assert_eq!(m2[0].prefixes, vec![2, 0]);
        assert_eq!(m2[1].prefixes, vec![1, 1]);
    }

    #[test]
    #[should_panic(expected = "M must satisfy")]
    fn zero_m_rejected() {
        let (_, cs) = testutil::exp_pair_case();
        enumerate_subkernels(&cs, 1, 0, 0, 1);
    }

    #[test]
    #[should_panic(expected = "M must satisfy")]
    fn full_m_rejected() {
        let (_, cs) = testutil::exp_pair_case();
        enumerate_subkernels(&cs, 1, 2, 0, 1);
    }
}
