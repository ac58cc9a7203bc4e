//! Closed-form one-variable potentials and their derivatives by truncated
//! Taylor series arithmetic.
//!
//! Grammar: sums and products of numbers, `x`, parentheses, `^` with a
//! numeric exponent, unary minus, and the functions `exp` and `log` (`ln`).

use crate::error::{Error, Result};

/// Taylor coefficients `c_k = f^{(k)}(x₀)/k!` truncated at a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Series(pub Vec<f64>);

impl Series {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Series(c)
    }

    pub fn variable(x0: f64, order: usize) -> Self {
        let mut s = Series::constant(x0, order);
        if order > 0 {
            s.0[1] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    /// `f^{(k)}(x₀)`.
    pub fn derivative_at(&self, k: usize) -> f64 {
        self.0[k] * (1..=k).map(|i| i as f64).product::<f64>()
    }

    /// Series of `f'`, one order shorter.
    pub fn differentiate(&self) -> Series {
        Series((1..self.0.len()).map(|k| k as f64 * self.0[k]).collect())
    }

    pub fn add(&self, o: &Series) -> Series {
        Series(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Series) -> Series {
        Series(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, a: f64) -> Series {
        Series(self.0.iter().map(|v| a * v).collect())
    }

    pub fn mul(&self, o: &Series) -> Series {
        let k = self.0.len().min(o.0.len());
        Series((0..k).map(|m| (0..=m).map(|i| self.0[i] * o.0[m - i]).sum()).collect())
    }

    pub fn recip(&self) -> Result<Series> {
        let a0 = self.0[0];
        if a0 == 0.0 {
            return Err(Error::UnsupportedExpression("division by a series vanishing at the point".into()));
        }
        let mut r = vec![0.0; self.0.len()];
        r[0] = 1.0 / a0;
        for m in 1..r.len() {
            let s: f64 = (1..=m).map(|i| self.0[i] * r[m - i]).sum();
            r[m] = -s / a0;
        }
        Ok(Series(r))
    }

    pub fn exp(&self) -> Series {
        // f' = f·a'
        let n = self.0.len();
        let mut r = vec![0.0; n];
        r[0] = self.0[0].exp();
        for m in 1..n {
            r[m] = (1..=m).map(|i| i as f64 * self.0[i] * r[m - i]).sum::<f64>() / m as f64;
        }
        Series(r)
    }

    pub fn ln(&self) -> Result<Series> {
        let a0 = self.0[0];
        if a0 <= 0.0 {
            return Err(Error::UnsupportedExpression(format!("log of non-positive value {a0}")));
        }
        // a·f' = a'
        let n = self.0.len();
        let mut r = vec![0.0; n];
        r[0] = a0.ln();
        for m in 1..n {
            let s: f64 = (1..m).map(|i| i as f64 * r[i] * self.0[m - i]).sum();
            r[m] = (m as f64 * self.0[m] - s) / (m as f64 * a0);
        }
        Ok(Series(r))
    }

    pub fn powf(&self, p: f64) -> Result<Series> {
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            let base = if p < 0.0 { self.recip()? } else { self.clone() };
            let mut out = Series::constant(1.0, self.order());
            for _ in 0..p.abs() as usize {
                out = out.mul(&base);
            }
            return Ok(out);
        }
        Ok(self.ln()?.scale(p).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(f64),
    X,
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

/// A parsed potential `ρ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbolic1d {
    expr: Expr,
}

pub fn symbolic_1d(source: &str) -> Result<Symbolic1d> {
    let mut p = Parser { s: source.as_bytes(), i: 0 };
    let expr = p.expr()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(Symbolic1d { expr })
}

impl Symbolic1d {
    pub fn series(&self, x0: f64, order: usize) -> Result<Series> {
        eval(&self.expr, x0, order)
    }

    /// `[ρ(x₀), ρ'(x₀), …, ρ^{(order)}(x₀)]`.
    pub fn derivatives(&self, x0: f64, order: usize) -> Result<Vec<f64>> {
        let s = self.series(x0, order)?;
        Ok((0..=order).map(|k| s.derivative_at(k)).collect())
    }
}

fn eval(e: &Expr, x0: f64, order: usize) -> Result<Series> {
    Ok(match e {
        Expr::Num(v) => Series::constant(*v, order),
        Expr::X => Series::variable(x0, order),
        Expr::Neg(a) => eval(a, x0, order)?.scale(-1.0),
        Expr::Bin(op, a, b) => {
            let (a, b) = (eval(a, x0, order)?, eval(b, x0, order)?);
            match op {
                '+' => a.add(&b),
                '-' => a.sub(&b),
                '*' => a.mul(&b),
                _ => a.mul(&b.recip()?),
            }
        }
        Expr::Pow(a, p) => eval(a, x0, order)?.powf(*p)?,
        Expr::Exp(a) => eval(a, x0, order)?.exp(),
        Expr::Log(a) => eval(a, x0, order)?.ln()?,
    })
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::UnsupportedExpression(format!("{msg} at offset {}", self.i))
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.i += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.i += 1;
            let neg = if self.peek() == Some(b'-') {
                self.i += 1;
                -1.0
            } else {
                1.0
            };
            let p = match self.atom()? {
                Expr::Num(v) => v,
                _ => return Err(self.err("exponent must be a number")),
            };
            return Ok(Expr::Pow(Box::new(base), neg * p));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
                    self.i += 1;
                }
                if self.i < self.s.len() && matches!(self.s[self.i], b'e' | b'E') {
                    let save = self.i;
                    self.i += 1;
                    if self.i < self.s.len() && matches!(self.s[self.i], b'+' | b'-') {
                        self.i += 1;
                    }
                    let digits = self.i;
                    while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                        self.i += 1;
                    }
                    if self.i == digits {
                        self.i = save;
                    }
                }
                let text = std::str::from_utf8(&self.s[start..self.i]).unwrap_or_default();
                text.parse().map(Expr::Num).map_err(|_| self.err("bad number"))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.i;
                while self.i < self.s.len() && self.s[self.i].is_ascii_alphanumeric() {
                    self.i += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.i]).unwrap_or_default().to_string();
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "exp" | "log" | "ln" => {
                        self.expect(b'(')?;
                        let arg = Box::new(self.expr()?);
                        self.expect(b')')?;
                        Ok(if name == "exp" { Expr::Exp(arg) } else { Expr::Log(arg) })
                    }
                    _ => Err(Error::UnsupportedExpression(format!("unsupported symbol '{name}'"))),
                }
            }
            _ => Err(self.err("unexpected input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_barrier_derivatives() {
        let d = symbolic_1d("-2*log(1 - x^2)").unwrap().derivatives(0.0, 6).unwrap();
        assert_relative_eq!(d[2], 4.0, epsilon = 1e-12);
        assert_relative_eq!(d[4], 24.0, epsilon = 1e-12);
        assert_relative_eq!(d[6], 480.0, epsilon = 1e-9);
        // finite-difference cross-check of ρ''
        let f = |x: f64| -2.0 * (1.0 - x * x).ln();
        let h = 1e-3;
        let fd = (f(0.3 + h) - 2.0 * f(0.3) + f(0.3 - h)) / (h * h);
        let d3 = symbolic_1d("-2*log(1 - x^2)").unwrap().derivatives(0.3, 2).unwrap();
        assert_relative_eq!(d3[2], fd, epsilon = 1e-5);
    }

    #[test]
    fn exponential() {
        let d = symbolic_1d("exp(x)").unwrap().derivatives(0.7, 6).unwrap();
        for v in d {
            assert_relative_eq!(v, 0.7f64.exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn linearity() {
        let a = symbolic_1d("log(2 + x) + 3*exp(-x)").unwrap().derivatives(0.2, 5).unwrap();
        let b = symbolic_1d("log(2 + x)").unwrap().derivatives(0.2, 5).unwrap();
        let c = symbolic_1d("exp(-x)").unwrap().derivatives(0.2, 5).unwrap();
        for k in 0..=5 {
            assert_relative_eq!(a[k], b[k] + 3.0 * c[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn unsupported() {
        assert!(matches!(symbolic_1d("sin(x)"), Err(Error::UnsupportedExpression(_))));
        assert!(symbolic_1d("x +").is_err());
    }
}
