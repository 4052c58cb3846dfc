//! Small symbolic expression tree over one real variable with complex
//! constants. The node set is closed under differentiation, which is all
//! the rest of the crate needs: chain members are differentiated exactly
//! up to Wronskian order and only then evaluated pointwise.

mod parse;

pub use parse::parse;

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fmt;

/// Denominator moduli at or below this count as division by zero.
const DIV_EPS: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Complex64),
    /// The independent variable `x`.
    Var,
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// Integer power, exponent >= 1.
    Pow(Box<Expr>, u32),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sinh(Box<Expr>),
    Cosh(Box<Expr>),
}

impl Expr {
    pub fn real(v: f64) -> Expr {
        Expr::Const(Complex64::new(v, 0.0))
    }

    pub fn constant(v: Complex64) -> Expr {
        Expr::Const(v)
    }

    pub fn i() -> Expr {
        Expr::Const(Complex64::new(0.0, 1.0))
    }

    pub fn var() -> Expr {
        Expr::Var
    }

    pub fn zero() -> Expr {
        Expr::real(0.0)
    }

    pub fn pow(self, k: u32) -> Expr {
        assert!(k >= 1, "power exponent must be positive");
        Expr::Pow(Box::new(self), k)
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }

    pub fn sinh(self) -> Expr {
        Expr::Sinh(Box::new(self))
    }

    pub fn cosh(self) -> Expr {
        Expr::Cosh(Box::new(self))
    }

    pub fn is_zero_const(&self) -> bool {
        matches!(self, Expr::Const(c) if c.re == 0.0 && c.im == 0.0)
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var => true,
            Expr::Add(cs) | Expr::Mul(cs) => cs.iter().any(Expr::depends_on_x),
            Expr::Div(a, b) => a.depends_on_x() || b.depends_on_x(),
            Expr::Neg(a) | Expr::Pow(a, _) => a.depends_on_x(),
            Expr::Exp(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Sinh(a) | Expr::Cosh(a) => {
                a.depends_on_x()
            }
        }
    }

    /// Exact derivative with respect to `x`, constant-folded.
    pub fn differentiate(&self) -> Expr {
        self.derivative_raw().fold()
    }

    fn derivative_raw(&self) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var => Expr::real(1.0),
            Expr::Add(cs) => Expr::Add(cs.iter().map(Expr::derivative_raw).collect()),
            Expr::Mul(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for (i, _) in fs.iter().enumerate() {
                    let mut factors = Vec::with_capacity(fs.len());
                    for (j, f) in fs.iter().enumerate() {
                        factors.push(if i == j { f.derivative_raw() } else { f.clone() });
                    }
                    terms.push(Expr::Mul(factors));
                }
                Expr::Add(terms)
            }
            Expr::Div(num, den) => {
                let top = Expr::Add(vec![
                    Expr::Mul(vec![num.derivative_raw(), (**den).clone()]),
                    Expr::Neg(Box::new(Expr::Mul(vec![(**num).clone(), den.derivative_raw()]))),
                ]);
                Expr::Div(Box::new(top), Box::new(Expr::Pow(den.clone(), 2)))
            }
            Expr::Neg(a) => Expr::Neg(Box::new(a.derivative_raw())),
            Expr::Pow(a, k) => {
                if *k == 1 {
                    a.derivative_raw()
                } else {
                    Expr::Mul(vec![
                        Expr::real(*k as f64),
                        Expr::Pow(a.clone(), k - 1),
                        a.derivative_raw(),
                    ])
                }
            }
            Expr::Exp(a) => Expr::Mul(vec![Expr::Exp(a.clone()), a.derivative_raw()]),
            Expr::Sin(a) => Expr::Mul(vec![Expr::Cos(a.clone()), a.derivative_raw()]),
            Expr::Cos(a) => {
                Expr::Neg(Box::new(Expr::Mul(vec![Expr::Sin(a.clone()), a.derivative_raw()])))
            }
            Expr::Sinh(a) => Expr::Mul(vec![Expr::Cosh(a.clone()), a.derivative_raw()]),
            Expr::Cosh(a) => Expr::Mul(vec![Expr::Sinh(a.clone()), a.derivative_raw()]),
        }
    }

    /// Constant folding. Keeps trees produced by repeated differentiation
    /// from growing without bound; does not change values anywhere the
    /// original expression evaluates.
    pub fn fold(self) -> Expr {
        match self {
            Expr::Add(cs) => {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut out: Vec<Expr> = Vec::new();
                for c in cs {
                    match c.fold() {
                        Expr::Const(v) => acc += v,
                        Expr::Add(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                if acc != Complex64::new(0.0, 0.0) || out.is_empty() {
                    out.insert(0, Expr::Const(acc));
                }
                if out.len() == 1 {
                    out.pop().unwrap()
                } else {
                    Expr::Add(out)
                }
            }
            Expr::Mul(fs) => {
                let mut acc = Complex64::new(1.0, 0.0);
                let mut out: Vec<Expr> = Vec::new();
                for f in fs {
                    match f.fold() {
                        Expr::Const(v) => acc *= v,
                        Expr::Mul(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                if acc == Complex64::new(0.0, 0.0) {
                    return Expr::zero();
                }
                if acc != Complex64::new(1.0, 0.0) || out.is_empty() {
                    out.insert(0, Expr::Const(acc));
                }
                if out.len() == 1 {
                    out.pop().unwrap()
                } else {
                    Expr::Mul(out)
                }
            }
            Expr::Div(a, b) => {
                let a = a.fold();
                let b = b.fold();
                match (&a, &b) {
                    (Expr::Const(x), Expr::Const(y)) if y.norm() > DIV_EPS => {
                        Expr::Const(x / y)
                    }
                    _ => Expr::Div(Box::new(a), Box::new(b)),
                }
            }
            Expr::Neg(a) => match a.fold() {
                Expr::Const(v) => Expr::Const(-v),
                Expr::Neg(inner) => *inner,
                other => Expr::Neg(Box::new(other)),
            },
            Expr::Pow(a, k) => match a.fold() {
                Expr::Const(v) => Expr::Const(powu(v, k)),
                other if k == 1 => other,
                other => Expr::Pow(Box::new(other), k),
            },
            Expr::Exp(a) => fold_unary(*a, Expr::Exp, Complex64::exp),
            Expr::Sin(a) => fold_unary(*a, Expr::Sin, Complex64::sin),
            Expr::Cos(a) => fold_unary(*a, Expr::Cos, Complex64::cos),
            Expr::Sinh(a) => fold_unary(*a, Expr::Sinh, Complex64::sinh),
            Expr::Cosh(a) => fold_unary(*a, Expr::Cosh, Complex64::cosh),
            leaf => leaf,
        }
    }

    /// Pointwise evaluation at real `x`.
    pub fn evaluate(&self, x: f64) -> Result<Complex64> {
        match self {
            Expr::Const(v) => Ok(*v),
            Expr::Var => Ok(Complex64::new(x, 0.0)),
            Expr::Add(cs) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in cs {
                    acc += c.evaluate(x)?;
                }
                Ok(acc)
            }
            Expr::Mul(fs) => {
                let mut acc = Complex64::new(1.0, 0.0);
                for f in fs {
                    acc *= f.evaluate(x)?;
                }
                Ok(acc)
            }
            Expr::Div(a, b) => {
                let den = b.evaluate(x)?;
                if den.norm() <= DIV_EPS {
                    return Err(Error::DivisionByZero { x });
                }
                Ok(a.evaluate(x)? / den)
            }
            Expr::Neg(a) => Ok(-a.evaluate(x)?),
            Expr::Pow(a, k) => Ok(powu(a.evaluate(x)?, *k)),
            Expr::Exp(a) => Ok(a.evaluate(x)?.exp()),
            Expr::Sin(a) => Ok(a.evaluate(x)?.sin()),
            Expr::Cos(a) => Ok(a.evaluate(x)?.cos()),
            Expr::Sinh(a) => Ok(a.evaluate(x)?.sinh()),
            Expr::Cosh(a) => Ok(a.evaluate(x)?.cosh()),
        }
    }
}

fn fold_unary(
    arg: Expr,
    wrap: fn(Box<Expr>) -> Expr,
    eval: fn(Complex64) -> Complex64,
) -> Expr {
    match arg.fold() {
        Expr::Const(v) => Expr::Const(eval(v)),
        other => wrap(Box::new(other)),
    }
}

fn powu(base: Complex64, k: u32) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..k {
        acc *= base;
    }
    acc
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, Expr::Neg(Box::new(rhs))])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

impl Expr {
    // Precedence levels: 1 additive, 2 multiplicative, 3 unary minus, 4 power.
    fn write_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        match self {
            Expr::Const(v) => write_const(f, *v),
            Expr::Var => write!(f, "x"),
            Expr::Add(cs) => {
                if outer > 1 {
                    write!(f, "(")?;
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    c.write_prec(f, 2)?;
                }
                if outer > 1 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Expr::Mul(fs) => {
                if outer > 2 {
                    write!(f, "(")?;
                }
                for (i, t) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    t.write_prec(f, 3)?;
                }
                if outer > 2 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Expr::Div(a, b) => {
                if outer > 2 {
                    write!(f, "(")?;
                }
                a.write_prec(f, 3)?;
                write!(f, "/")?;
                b.write_prec(f, 4)?;
                if outer > 2 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Expr::Neg(a) => {
                if outer > 2 {
                    write!(f, "(")?;
                }
                write!(f, "-")?;
                a.write_prec(f, 3)?;
                if outer > 2 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Expr::Pow(a, k) => {
                a.write_prec(f, 4)?;
                write!(f, "^{}", k)
            }
            Expr::Exp(a) => write_call(f, "exp", a),
            Expr::Sin(a) => write_call(f, "sin", a),
            Expr::Cos(a) => write_call(f, "cos", a),
            Expr::Sinh(a) => write_call(f, "sinh", a),
            Expr::Cosh(a) => write_call(f, "cosh", a),
        }
    }
}

fn write_call(f: &mut fmt::Formatter<'_>, name: &str, arg: &Expr) -> fmt::Result {
    write!(f, "{}(", name)?;
    arg.write_prec(f, 0)?;
    write!(f, ")")
}

fn write_const(f: &mut fmt::Formatter<'_>, v: Complex64) -> fmt::Result {
    if v.im == 0.0 {
        if v.re < 0.0 {
            write!(f, "({}+0i)", fmt_f64(v.re))
        } else {
            write!(f, "{}", fmt_f64(v.re))
        }
    } else if v.im >= 0.0 {
        write!(f, "({}+{}i)", fmt_f64(v.re), fmt_f64(v.im))
    } else {
        write!(f, "({}-{}i)", fmt_f64(v.re), fmt_f64(-v.im))
    }
}

// The grammar has no scientific notation, so constants must round-trip
// through plain decimal text.
fn fmt_f64(v: f64) -> String {
    let s = format!("{}", v);
    if s.contains('e') || s.contains('E') {
        format!("{:.17}", v)
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn derivative_of_plane_wave_keeps_rate() {
        // d/dx exp(i x) = i exp(i x)
        let e = parse("exp((0+1i)*x)").unwrap();
        let d = e.differentiate();
        let x = 0.7;
        let expect = c(0.0, 1.0) * (c(0.0, 1.0) * c(x, 0.0)).exp();
        assert!((d.evaluate(x).unwrap() - expect).norm() < 1e-14);
    }

    #[test]
    fn product_rule_on_x_exp() {
        let e = Expr::var() * Expr::var().exp();
        let d = e.differentiate();
        let x = 1.3_f64;
        let expect = (1.0 + x) * x.exp();
        assert!((d.evaluate(x).unwrap().re - expect).abs() < 1e-12);
        assert!(d.evaluate(x).unwrap().im.abs() < 1e-15);
    }

    #[test]
    fn quotient_rule_matches_closed_form() {
        // d/dx (1/x) = -1/x^2
        let e = Expr::real(1.0) / Expr::var();
        let d = e.differentiate();
        let x = 2.0;
        assert!((d.evaluate(x).unwrap().re + 1.0 / (x * x)).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = Expr::real(1.0) / Expr::var();
        assert_eq!(e.evaluate(0.0), Err(Error::DivisionByZero { x: 0.0 }));
    }

    #[test]
    fn euler_identity_at_pi() {
        let e = parse("exp((0+1i)*x)").unwrap();
        let v = e.evaluate(std::f64::consts::PI).unwrap();
        assert!((v - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cosh_derivative_tower() {
        let e = Expr::var().cosh();
        let d1 = e.differentiate();
        let d2 = d1.differentiate();
        let x = 0.9_f64;
        assert!((d1.evaluate(x).unwrap().re - x.sinh()).abs() < 1e-14);
        assert!((d2.evaluate(x).unwrap().re - x.cosh()).abs() < 1e-14);
    }

    #[test]
    fn folding_collapses_constants() {
        let e = (Expr::real(0.0) * Expr::var().exp() + Expr::real(2.0) * Expr::real(3.0)).fold();
        assert_eq!(e, Expr::real(6.0));
    }

    #[test]
    fn repeated_differentiation_stays_bounded() {
        // Sizes must not explode under folding.
        let mut e = parse("x^3*exp((0+1i)*x)").unwrap();
        for _ in 0..6 {
            e = e.differentiate();
        }
        assert!(e.evaluate(0.5).unwrap().norm().is_finite());
    }

    #[test]
    fn display_round_trips() {
        let cases = [
            "x^2/8 + cosh(2*x)",
            "exp((0+1i)*x)*(1.5-0.25i)",
            "-sin(2*x)/(1 + x^2)",
        ];
        for src in cases {
            let e = parse(src).unwrap();
            let back = parse(&e.to_string()).unwrap();
            for k in 0..5 {
                let x = -1.0 + 0.5 * k as f64;
                assert!(
                    (e.evaluate(x).unwrap() - back.evaluate(x).unwrap()).norm() < 1e-12,
                    "round trip mismatch for {src}"
                );
            }
        }
    }
}
