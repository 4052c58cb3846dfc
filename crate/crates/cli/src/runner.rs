//! Executes a scenario's command list in order, accumulating the report.
//! The first failed check or module error stops the run; the report
//! always names what failed and with which error.

use std::fmt::Display;
use std::sync::Arc;
use std::time::Instant;

use darboux_core::conjugate::{build_conjugate, verify_susy_algebra, ConjugateResult};
use darboux_core::error::Error;
use darboux_core::function::PotentialSource;
use darboux_core::hamiltonian::{spectral_summary, verify_chain, ChainSet, MatrixHamiltonian};
use darboux_core::minimize::{minimizable_factors, minimize};
use darboux_core::operator::{
    default_test_functions, final_potential, intertwining_residual, MatrixDifferentialOperator,
    PotentialEvaluator,
};
use darboux_core::reduce::{classify_reducibility, Verdict, WronskianStatus};

use crate::report::{fmt_complex, fmt_matrix, fmt_poly, fmt_res, Report};
use crate::scenario::{Command, Scenario};

/// Candidate remix budget per eigenvalue-sharing subkernel search.
const REDUCE_PROBES: u32 = 32;

pub struct RunOutput {
    pub report: String,
    /// CSV text, present when `sample-potential` ran.
    pub samples: Option<String>,
    pub exit_code: i32,
}

enum Flow {
    Pass,
    Fail(String),
}

type CmdResult = Result<Flow, Error>;

struct State {
    h: Arc<MatrixHamiltonian>,
    cs: ChainSet,
    q: Option<Arc<MatrixDifferentialOperator>>,
    v_minus: Option<Arc<PotentialEvaluator>>,
    conj: Option<ConjugateResult>,
    samples: Option<String>,
}

fn kv(body: &mut Vec<String>, key: &str, value: impl Display) {
    body.push(format!("{key} = {value}"));
}

fn fmt_window(xmin: f64, xmax: f64, points: usize) -> String {
    format!("[{xmin}, {xmax}] with {points} points")
}

fn status_name(s: WronskianStatus) -> &'static str {
    match s {
        WronskianStatus::NonvanishingOnWindow => "nonvanishing-on-window",
        WronskianStatus::VanishesSomewhere => "vanishes-somewhere",
        WronskianStatus::IdenticallyZero => "identically-zero",
    }
}

pub fn run_scenario(sc: &Scenario) -> RunOutput {
    let mut rep = Report::default();
    rep.kv("scenario", &sc.name);
    rep.kv("n", sc.n);
    rep.kv("N", sc.order);
    rep.kv("seed", sc.seed);
    rep.kv("window", fmt_window(sc.window.xmin, sc.window.xmax, sc.window.points));

    rep.section("conventions");
    rep.kv("t-plus", "lower bidiagonal; the identity blocks sit below the diagonal");
    rep.kv(
        "wronskian-threshold",
        format!("{} relative to max(1, largest row norm)", fmt_res(sc.tol.wronskian_rel)),
    );
    rep.kv(
        "singularity-threshold",
        format!("{} relative to scale^n for constant matrices", fmt_res(sc.tol.singular_rel)),
    );
    rep.kv("chain-tolerance", fmt_res(sc.tol.chain));
    rep.kv("residual-tolerance", fmt_res(sc.tol.residual));
    rep.kv("zero-threshold", format!("{} relative", fmt_res(sc.tol.zero_rel)));
    rep.kv("symmetry-tolerance", fmt_res(sc.tol.symmetry));
    rep.kv(
        "certification",
        "all residual and non-vanishing claims below hold on the window above",
    );

    let h = Arc::new(
        MatrixHamiltonian::new(sc.potential.clone()).expect("scenario potential is square"),
    );
    let mut st = State {
        h,
        cs: ChainSet::new(sc.chains.clone()),
        q: None,
        v_minus: None,
        conj: None,
        samples: None,
    };

    let mut failure: Option<(Command, Option<&'static str>)> = None;
    let mut ran = 0usize;
    for &cmd in &sc.commands {
        let start = Instant::now();
        let mut body = Vec::new();
        let outcome = dispatch(cmd, sc, &mut st, &mut body);
        eprintln!("[time] {}: {:.1} ms", cmd.name(), start.elapsed().as_secs_f64() * 1e3);

        rep.section(cmd.name());
        match outcome {
            Ok(Flow::Pass) => {
                rep.kv("status", "pass");
                for line in body {
                    rep.raw(line);
                }
                ran += 1;
            }
            Ok(Flow::Fail(reason)) => {
                rep.kv("status", "fail");
                rep.kv("reason", &reason);
                for line in body {
                    rep.raw(line);
                }
                failure = Some((cmd, None));
            }
            Err(e) => {
                rep.kv("status", "error");
                rep.kv("error", e.name());
                rep.kv("detail", &e);
                for line in body {
                    rep.raw(line);
                }
                failure = Some((cmd, Some(e.name())));
            }
        }
        if failure.is_some() {
            break;
        }
    }

    rep.section("result");
    let exit_code = match failure {
        None => {
            rep.kv("status", "pass");
            rep.kv("commands-run", ran);
            0
        }
        Some((cmd, error)) => {
            rep.kv("status", "fail");
            rep.kv("failed-command", cmd.name());
            if let Some(name) = error {
                rep.kv("error", name);
            }
            rep.kv("commands-run", ran);
            let skipped: Vec<&str> = sc
                .commands
                .iter()
                .skip(ran + 1)
                .map(|c| c.name())
                .collect();
            if !skipped.is_empty() {
                rep.kv("skipped", skipped.join(", "));
            }
            1
        }
    };

    RunOutput { report: rep.text(), samples: st.samples, exit_code }
}

fn dispatch(cmd: Command, sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    match cmd {
        Command::VerifyChains => cmd_verify_chains(sc, st, body),
        Command::Build => cmd_build(sc, st, body),
        Command::FinalPotential => cmd_final_potential(sc, st, body),
        Command::VerifyIntertwining => cmd_verify_intertwining(sc, st, body),
        Command::Minimize => cmd_minimize(sc, st, body),
        Command::Conjugate => cmd_conjugate(sc, st, body),
        Command::Susy => cmd_susy(sc, st, body),
        Command::Reduce => cmd_reduce(sc, st, body),
        Command::SamplePotential => cmd_sample_potential(sc, st, body),
    }
}

fn cmd_verify_chains(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let points: Vec<f64> = sc.window.iter().collect();
    let mut worst = 0.0f64;
    let mut pass = true;
    for (i, chain) in st.cs.chains.iter().enumerate() {
        let r = verify_chain(&st.h, chain, &points, sc.tol.chain)?;
        let max = r.link_residuals.iter().cloned().fold(0.0, f64::max);
        kv(
            body,
            &format!("chain[{i}]"),
            format!(
                "lambda = {}, members = {}, max-link-residual = {}",
                fmt_complex(chain.lambda),
                chain.len(),
                fmt_res(max)
            ),
        );
        pass &= r.pass;
        worst = worst.max(max);
    }
    kv(body, "max-residual", fmt_res(worst));
    kv(body, "tolerance", fmt_res(sc.tol.chain));
    if pass {
        Ok(Flow::Pass)
    } else {
        Ok(Flow::Fail(format!(
            "chain residual {} exceeds {}",
            fmt_res(worst),
            fmt_res(sc.tol.chain)
        )))
    }
}

fn cmd_build(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let q = Arc::new(MatrixDifferentialOperator::build_intertwiner(
        &st.cs,
        sc.leading.clone(),
        &sc.window,
        &sc.tol,
    )?);
    kv(body, "order", q.order());
    kv(body, "dimension", q.n());
    kv(body, "leading", fmt_matrix(q.leading()));

    let mut min_abs = f64::INFINITY;
    let mut arg = sc.window.xmin;
    for x in sc.window.iter() {
        let w = q.wronskian_eval(x)?;
        if w.det.norm() < min_abs {
            min_abs = w.det.norm();
            arg = x;
        }
    }
    kv(body, "wronskian-min-abs", format!("{} at x = {arg}", fmt_res(min_abs)));

    let points: Vec<f64> = sc.window.iter().collect();
    let kr = q.kernel_residual(&points)?;
    kv(body, "kernel-residual", fmt_res(kr.rel()));
    kv(body, "tolerance", fmt_res(sc.tol.residual));
    let pass = kr.rel() <= sc.tol.residual;
    st.q = Some(q);
    if pass {
        Ok(Flow::Pass)
    } else {
        Ok(Flow::Fail(format!("kernel residual {} exceeds {}", fmt_res(kr.rel()), fmt_res(sc.tol.residual))))
    }
}

fn cmd_final_potential(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let q = st.q.clone().expect("build precedes final-potential");
    let ev = Arc::new(final_potential(st.h.clone(), q)?);
    let mid = 0.5 * (sc.window.xmin + sc.window.xmax);
    for x in [sc.window.xmin, mid, sc.window.xmax] {
        kv(body, &format!("v-minus({x})"), fmt_matrix(&ev.eval(x)?));
    }
    st.v_minus = Some(ev);
    Ok(Flow::Pass)
}

fn cmd_verify_intertwining(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let q = st.q.as_ref().expect("build precedes verify-intertwining");
    let ev = st.v_minus.as_ref().expect("final-potential precedes verify-intertwining");
    let tests = default_test_functions(sc.n);
    let rr = intertwining_residual(q, &st.h, &**ev, &tests, &sc.window)?;
    kv(body, "residual", fmt_res(rr.rel()));
    kv(body, "max-abs", fmt_res(rr.max_abs));
    kv(body, "scale", fmt_res(rr.scale));
    kv(body, "test-functions", tests.len());
    kv(body, "tolerance", fmt_res(sc.tol.residual));
    if rr.rel() <= sc.tol.residual {
        Ok(Flow::Pass)
    } else {
        Ok(Flow::Fail(format!(
            "intertwining residual {} exceeds {}",
            fmt_res(rr.rel()),
            fmt_res(sc.tol.residual)
        )))
    }
}

fn cmd_minimize(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let summary = spectral_summary(&st.cs)?;
    for (i, e) in summary.entries.iter().enumerate() {
        kv(
            body,
            &format!("spectrum[{i}]"),
            format!(
                "lambda = {}, blocks = {}, kappa = {}, min-order = {}",
                fmt_complex(e.lambda),
                e.geometric_multiplicity(),
                e.kappa(),
                e.min_order()
            ),
        );
    }
    for (i, w) in summary.warnings.iter().enumerate() {
        kv(body, &format!("warning[{i}]"), w);
    }
    let cert = minimizable_factors(&summary, sc.n);
    if !cert.is_minimizable() {
        kv(body, "verdict", "not-minimizable");
        return Ok(Flow::Pass);
    }
    kv(body, "verdict", "minimizable");
    kv(body, "factors", fmt_poly(&cert.factors));
    let out = minimize(st.h.clone(), &st.cs, &cert, sc.leading.clone(), &sc.window, &sc.tol)?;
    kv(body, "reduced-order", out.p.order());
    kv(body, "reduced-leading", fmt_matrix(out.p.leading()));
    kv(body, "residual", fmt_res(out.residual.rel()));
    kv(body, "tolerance", fmt_res(sc.tol.residual));
    if out.residual.rel() <= sc.tol.residual {
        Ok(Flow::Pass)
    } else {
        Ok(Flow::Fail(format!(
            "minimization residual {} exceeds {}",
            fmt_res(out.residual.rel()),
            fmt_res(sc.tol.residual)
        )))
    }
}

fn cmd_conjugate(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let q = st.q.as_ref().expect("build precedes conjugate");
    let src: Arc<dyn PotentialSource> =
        st.v_minus.clone().expect("final-potential precedes conjugate");
    let res = build_conjugate(&st.h, &src, &st.cs, &sc.extension, q, &sc.window, &sc.tol)?;
    kv(body, "order", res.q_plus.order());
    kv(body, "n-prime", res.n_prime);
    kv(body, "polynomial", fmt_poly(&res.polynomial.roots));
    kv(body, "degree", res.polynomial.degree());
    kv(body, "alpha", fmt_complex(res.alpha));
    kv(body, "leading", fmt_matrix(res.q_plus.leading()));
    kv(body, "fit-residual", fmt_res(res.fit_residual));
    kv(body, "tolerance", fmt_res(sc.tol.residual));
    st.conj = Some(res);
    Ok(Flow::Pass)
}

fn cmd_susy(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let q = st.q.as_ref().expect("build precedes susy");
    let conj = st.conj.as_ref().expect("conjugate precedes susy");
    let src: Arc<dyn PotentialSource> = st.v_minus.clone().expect("final-potential ran");
    let rep = verify_susy_algebra(
        &st.h,
        &src,
        q,
        &conj.q_plus,
        &conj.polynomial,
        &sc.window,
        sc.no_lower_order,
    )?;
    kv(body, "forward-residual", fmt_res(rep.forward.rel()));
    match &rep.backward {
        Some(b) => kv(body, "backward-residual", fmt_res(b.rel())),
        None => kv(
            body,
            "backward-residual",
            "not checked (assert no-lower-order-intertwiner to enable)",
        ),
    }
    kv(body, "nilpotency", format!("{} (structural)", fmt_res(rep.nilpotency)));
    kv(body, "minus-intertwining", fmt_res(rep.minus_intertwining.rel()));
    kv(body, "plus-intertwining", fmt_res(rep.plus_intertwining.rel()));
    kv(
        body,
        "degree-identity",
        format!(
            "N + N' = {} + {} = {}, 2 deg P = {}",
            sc.order,
            conj.n_prime,
            sc.order + conj.n_prime,
            2 * conj.polynomial.degree()
        ),
    );
    kv(body, "tolerance", fmt_res(sc.tol.residual));
    let mut worst = rep
        .forward
        .rel()
        .max(rep.minus_intertwining.rel())
        .max(rep.plus_intertwining.rel());
    if let Some(b) = &rep.backward {
        worst = worst.max(b.rel());
    }
    if !rep.degree_identity {
        return Ok(Flow::Fail("degree identity N + N' = 2 deg P is violated".into()));
    }
    if worst <= sc.tol.residual {
        Ok(Flow::Pass)
    } else {
        Ok(Flow::Fail(format!(
            "superalgebra residual {} exceeds {}",
            fmt_res(worst),
            fmt_res(sc.tol.residual)
        )))
    }
}

fn cmd_reduce(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let v = classify_reducibility(
        &st.h,
        &st.cs,
        sc.leading.clone(),
        &sc.window,
        REDUCE_PROBES,
        sc.seed,
        &sc.tol,
    )?;
    let verdict = match &v.verdict {
        Verdict::Reducible { m, .. } => format!("reducible (M = {m})"),
        Verdict::Irreducible => "irreducible".to_string(),
        Verdict::AbsolutelyIrreducible => "absolutely-irreducible".to_string(),
    };
    kv(body, "verdict", verdict);
    kv(
        body,
        "regime",
        if v.exact_regime { "exact (single-chain eigenvalues)" } else { "sampled (random remix probes)" },
    );
    kv(body, "probes", REDUCE_PROBES);
    kv(body, "certified-window", fmt_window(v.window.xmin, v.window.xmax, v.window.points));
    for (i, ev) in v.evidence.iter().enumerate() {
        kv(
            body,
            &format!("candidate[{i}]"),
            format!("M = {}, {}, {}", ev.m, ev.description, status_name(ev.status)),
        );
    }
    if let Verdict::Reducible { candidate, .. } = v.verdict {
        kv(body, "winning-candidate", candidate);
    }
    if let Some(f) = &v.factorization {
        kv(body, "factor-orders", format!("P order {}, K order {}", f.p.order(), f.k.order()));
        kv(body, "composition-residual", fmt_res(f.residual.rel()));
        kv(body, "composition-tolerance", fmt_res(sc.tol.residual));
    }
    Ok(Flow::Pass)
}

fn cmd_sample_potential(sc: &Scenario, st: &mut State, body: &mut Vec<String>) -> CmdResult {
    let ev = st.v_minus.as_ref().expect("final-potential precedes sample-potential");
    let n = sc.n;
    let mut csv = String::from("x");
    for i in 0..n {
        for j in 0..n {
            csv.push_str(&format!(",V[{i}][{j}].re,V[{i}][{j}].im"));
        }
    }
    csv.push_str(",singular\n");

    let mut singular = 0usize;
    for x in sc.window.iter() {
        match ev.eval(x) {
            Ok(v) => {
                csv.push_str(&format!("{x}"));
                for i in 0..n {
                    for j in 0..n {
                        let z = v.get(i, j);
                        csv.push_str(&format!(",{:.12e},{:.12e}", z.re, z.im));
                    }
                }
                csv.push_str(",0\n");
            }
            Err(Error::SingularWronskian { .. }) => {
                csv.push_str(&format!("{x}"));
                for _ in 0..(2 * n * n) {
                    csv.push(',');
                }
                csv.push_str(",1\n");
                singular += 1;
            }
            Err(e) => return Err(e),
        }
    }
    st.samples = Some(csv);
    kv(body, "rows", sc.window.points);
    kv(body, "singular-rows", singular);
    kv(body, "file", "samples.csv");
    Ok(Flow::Pass)
}
