//! A small expression language for free polynomials and free rational
//! expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := number | 'x' INT | '(' expr ')' | 'inv' '(' expr ')' | '-' factor
//! number := decimal, optionally suffixed with 'i' for an imaginary literal
//! ```
//!
//! Variables are 1-based (`x1..xd`). A product whose first factor is a bare
//! numeric literal parses as [`ExprAst::ScalarMul`]; every other product is
//! [`ExprAst::Mul`]. Products and sums associate to the left.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freepoly::{FreePoly, GradedPoint, Word};
use crate::func::NcFunction;
use crate::mat::{CMatrix, ONE};

/// Parser refuses trees deeper than this (long sums and products count).
pub const MAX_DEPTH: usize = 2048;

/// Parser refuses more than this many nested parentheses, `inv`s and unary minuses.
pub const MAX_NESTING: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum ExprAst {
    Const(Complex64),
    Var(usize),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Neg(Box<ExprAst>),
    ScalarMul(Complex64, Box<ExprAst>),
    Inv(Box<ExprAst>),
}

#[allow(clippy::should_implement_trait)]
impl ExprAst {
    pub fn add(a: ExprAst, b: ExprAst) -> ExprAst {
        ExprAst::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: ExprAst, b: ExprAst) -> ExprAst {
        ExprAst::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: ExprAst, b: ExprAst) -> ExprAst {
        ExprAst::Mul(Box::new(a), Box::new(b))
    }

    pub fn neg(a: ExprAst) -> ExprAst {
        ExprAst::Neg(Box::new(a))
    }

    pub fn scalar_mul(c: Complex64, a: ExprAst) -> ExprAst {
        ExprAst::ScalarMul(c, Box::new(a))
    }

    pub fn inv(a: ExprAst) -> ExprAst {
        ExprAst::Inv(Box::new(a))
    }

    pub fn real(r: f64) -> ExprAst {
        ExprAst::Const(Complex64::new(r, 0.0))
    }

    pub fn has_inv(&self) -> bool {
        match self {
            ExprAst::Const(_) | ExprAst::Var(_) => false,
            ExprAst::Inv(_) => true,
            ExprAst::Neg(a) | ExprAst::ScalarMul(_, a) => a.has_inv(),
            ExprAst::Add(a, b) | ExprAst::Sub(a, b) | ExprAst::Mul(a, b) => a.has_inv() || b.has_inv(),
        }
    }

    /// Largest variable index used (0 if none).
    pub fn max_var(&self) -> usize {
        match self {
            ExprAst::Const(_) => 0,
            ExprAst::Var(i) => *i,
            ExprAst::Neg(a) | ExprAst::ScalarMul(_, a) | ExprAst::Inv(a) => a.max_var(),
            ExprAst::Add(a, b) | ExprAst::Sub(a, b) | ExprAst::Mul(a, b) => a.max_var().max(b.max_var()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ExprAst::Const(_) | ExprAst::Var(_) => 1,
            ExprAst::Neg(a) | ExprAst::ScalarMul(_, a) | ExprAst::Inv(a) => 1 + a.depth(),
            ExprAst::Add(a, b) | ExprAst::Sub(a, b) | ExprAst::Mul(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Complex64),
    Var(usize),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Inv,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Syntax { offset, message: message.into() }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        let Some(&b) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if b.is_ascii_digit() || b == b'.' {
            return self.number(start);
        }
        if b == b'x' {
            self.pos += 1;
            let digits_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits_start {
                return Err(self.err(start, "expected a variable index after 'x'"));
            }
            let text = std::str::from_utf8(&self.src[digits_start..self.pos]).expect("ascii digits");
            let index: usize = text.parse().map_err(|_| self.err(start, "variable index too large"))?;
            return Ok((Tok::Var(index), start));
        }
        if self.src[self.pos..].starts_with(b"inv") {
            self.pos += 3;
            return Ok((Tok::Inv, start));
        }
        Err(self.err(start, format!("unexpected character {:?}", char::from(b))))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && s[self.pos] == b'e' {
            let mut p = self.pos + 1;
            if p < s.len() && (s[p] == b'+' || s[p] == b'-') {
                p += 1;
            }
            if p < s.len() && s[p].is_ascii_digit() {
                while p < s.len() && s[p].is_ascii_digit() {
                    p += 1;
                }
                self.pos = p;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii number");
        let value: f64 = text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| self.err(start, format!("malformed number {text:?}")))?;
        // an 'i' directly after the digits makes it imaginary, unless it starts "inv"
        if self.pos < s.len() && s[self.pos] == b'i' && !s[self.pos..].starts_with(b"inv") {
            self.pos += 1;
            return Ok((Tok::Num(Complex64::new(0.0, value)), start));
        }
        Ok((Tok::Num(Complex64::new(value, 0.0)), start))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    offset: usize,
    d: usize,
    nesting: usize,
}

/// A parsed node together with its depth.
type Node = (ExprAst, usize);

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (tok, offset) = self.lex.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth > MAX_DEPTH {
            return Err(Error::Syntax {
                offset: self.offset,
                message: format!("expression nests deeper than {MAX_DEPTH}"),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node> {
        let (mut acc, mut depth) = self.term()?;
        loop {
            let is_add = match self.tok {
                Tok::Plus => true,
                Tok::Minus => false,
                _ => return Ok((acc, depth)),
            };
            self.bump()?;
            let (rhs, rd) = self.term()?;
            depth = 1 + depth.max(rd);
            self.check_depth(depth)?;
            acc = if is_add { ExprAst::add(acc, rhs) } else { ExprAst::sub(acc, rhs) };
        }
    }

    fn term(&mut self) -> Result<Node> {
        let bare_literal = matches!(self.tok, Tok::Num(_));
        let ((mut acc, mut depth), mut first) = (self.factor()?, true);
        while self.tok == Tok::Star {
            self.bump()?;
            let (rhs, rd) = self.factor()?;
            depth = 1 + depth.max(rd);
            self.check_depth(depth)?;
            acc = match acc {
                ExprAst::Const(c) if first && bare_literal => ExprAst::scalar_mul(c, rhs),
                other => ExprAst::mul(other, rhs),
            };
            first = false;
        }
        Ok((acc, depth))
    }

    fn factor(&mut self) -> Result<Node> {
        if matches!(self.tok, Tok::LParen | Tok::Inv | Tok::Minus) {
            self.nesting += 1;
            if self.nesting > MAX_NESTING {
                return Err(Error::Syntax {
                    offset: self.offset,
                    message: format!("more than {MAX_NESTING} nested groups"),
                });
            }
            let r = self.nested_factor();
            self.nesting -= 1;
            return r;
        }
        self.nested_factor()
    }

    fn nested_factor(&mut self) -> Result<Node> {
        let offset = self.offset;
        match self.tok.clone() {
            Tok::Num(c) => {
                self.bump()?;
                Ok((ExprAst::Const(c), 1))
            }
            Tok::Var(i) => {
                if i == 0 || i > self.d {
                    return Err(Error::UnknownVariable { index: i, d: self.d, offset });
                }
                self.bump()?;
                Ok((ExprAst::Var(i), 1))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Inv => {
                self.bump()?;
                self.expect(Tok::LParen, "'(' after inv")?;
                let (inner, depth) = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                self.check_depth(depth + 1)?;
                Ok((ExprAst::inv(inner), depth + 1))
            }
            Tok::Minus => {
                self.bump()?;
                let (inner, depth) = self.factor()?;
                self.check_depth(depth + 1)?;
                Ok((ExprAst::neg(inner), depth + 1))
            }
            Tok::End => Err(Error::Syntax { offset, message: "unexpected end of input".into() }),
            other => Err(Error::Syntax { offset, message: format!("unexpected token {other:?}") }),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.tok != tok {
            return Err(Error::Syntax { offset: self.offset, message: format!("expected {what}") });
        }
        self.bump()
    }
}

/// Parses `src` over `d` variables.
pub fn parse(src: &str, d: usize) -> Result<ExprAst> {
    let mut p = Parser { lex: Lexer { src: src.as_bytes(), pos: 0 }, tok: Tok::End, offset: 0, d, nesting: 0 };
    p.bump()?;
    let (ast, _) = p.expr()?;
    if p.tok != Tok::End {
        return Err(Error::Syntax { offset: p.offset, message: "trailing input".into() });
    }
    Ok(ast)
}

/// Whether `c` has a literal spelling (non-negative real or positive imaginary).
pub fn is_literal(c: Complex64) -> bool {
    (c.im == 0.0 && c.re >= 0.0) || (c.re == 0.0 && c.im > 0.0)
}

fn fmt_real(r: f64) -> String {
    // `{}` on f64 is the shortest exact decimal and never uses an exponent
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

fn const_str(c: Complex64) -> String {
    if c.im == 0.0 && c.re >= 0.0 {
        return fmt_real(c.re);
    }
    if c.re == 0.0 && c.im > 0.0 {
        return format!("{}i", fmt_real(c.im));
    }
    let mut s = String::from("(");
    if c.re != 0.0 {
        if c.re < 0.0 {
            s.push('-');
        }
        s.push_str(&fmt_real(c.re.abs()));
    }
    if c.im != 0.0 {
        match (c.re != 0.0, c.im < 0.0) {
            (true, true) => s.push_str(" - "),
            (true, false) => s.push_str(" + "),
            (false, true) => s.push('-'),
            (false, false) => {}
        }
        let _ = write!(s, "{}i", fmt_real(c.im.abs()));
    }
    s.push(')');
    s
}

/// Canonical text; `parse(print(ast))` reproduces `ast` whenever its
/// constants are literal-representable.
pub fn print(ast: &ExprAst) -> String {
    let mut out = String::new();
    print_expr(ast, &mut out);
    out
}

fn print_expr(e: &ExprAst, out: &mut String) {
    match e {
        ExprAst::Add(a, b) | ExprAst::Sub(a, b) => {
            print_expr(a, out);
            out.push_str(if matches!(e, ExprAst::Add(..)) { " + " } else { " - " });
            if matches!(**b, ExprAst::Add(..) | ExprAst::Sub(..)) {
                out.push('(');
                print_expr(b, out);
                out.push(')');
            } else {
                print_term(b, out);
            }
        }
        _ => print_term(e, out),
    }
}

fn print_term(e: &ExprAst, out: &mut String) {
    match e {
        ExprAst::Mul(a, b) => {
            match **a {
                ExprAst::Mul(..) | ExprAst::ScalarMul(..) => print_term(a, out),
                ExprAst::Const(c) if is_literal(c) => {
                    out.push('(');
                    out.push_str(&const_str(c));
                    out.push(')');
                }
                _ => print_factor(a, out),
            }
            out.push('*');
            print_factor(b, out);
        }
        ExprAst::ScalarMul(c, b) => {
            out.push_str(&const_str(*c));
            out.push('*');
            print_factor(b, out);
        }
        _ => print_factor(e, out),
    }
}

fn print_factor(e: &ExprAst, out: &mut String) {
    match e {
        ExprAst::Const(c) => out.push_str(&const_str(*c)),
        ExprAst::Var(i) => {
            let _ = write!(out, "x{i}");
        }
        ExprAst::Neg(a) => {
            out.push('-');
            print_factor(a, out);
        }
        ExprAst::Inv(a) => {
            out.push_str("inv(");
            print_expr(a, out);
            out.push(')');
        }
        _ => {
            out.push('(');
            print_expr(e, out);
            out.push(')');
        }
    }
}

/// Expands an inverse-free AST into a canonical free polynomial.
pub fn to_free_poly(ast: &ExprAst, d: usize) -> Result<FreePoly> {
    Ok(match ast {
        ExprAst::Const(c) => FreePoly::constant(d, *c),
        ExprAst::Var(i) => {
            if *i == 0 || *i > d {
                return Err(Error::UnknownVariable { index: *i, d, offset: 0 });
            }
            FreePoly::var(d, *i)
        }
        ExprAst::Add(a, b) => to_free_poly(a, d)?.add(&to_free_poly(b, d)?),
        ExprAst::Sub(a, b) => to_free_poly(a, d)?.sub(&to_free_poly(b, d)?),
        ExprAst::Mul(a, b) => to_free_poly(a, d)?.mul(&to_free_poly(b, d)?),
        ExprAst::Neg(a) => to_free_poly(a, d)?.neg(),
        ExprAst::ScalarMul(c, a) => to_free_poly(a, d)?.scale(*c),
        ExprAst::Inv(_) => return Err(Error::NotPolynomial),
    })
}

/// An AST whose printed form reads like the usual way of writing `p`.
pub fn from_free_poly(p: &FreePoly) -> ExprAst {
    let mut acc: Option<ExprAst> = None;
    for (w, c) in p.terms() {
        // fold the sign into the +/- joining terms when it is a plain real or imaginary
        let (negate, mag) =
            if (c.im == 0.0 && c.re < 0.0) || (c.re == 0.0 && c.im < 0.0) { (true, -c) } else { (false, *c) };
        let term = monomial_ast(w, mag);
        acc = Some(match (acc, negate) {
            (None, false) => term,
            (None, true) => ExprAst::neg(term),
            (Some(a), false) => ExprAst::add(a, term),
            (Some(a), true) => ExprAst::sub(a, term),
        });
    }
    acc.unwrap_or(ExprAst::real(0.0))
}

fn monomial_ast(w: &Word, c: Complex64) -> ExprAst {
    let letters = w.letters();
    let Some((&first, rest)) = letters.split_first() else {
        return ExprAst::Const(c);
    };
    let head = if c == ONE { ExprAst::Var(first) } else { ExprAst::scalar_mul(c, ExprAst::Var(first)) };
    rest.iter().fold(head, |acc, &l| ExprAst::mul(acc, ExprAst::Var(l)))
}

fn path_str(path: &[usize]) -> String {
    let mut s = String::from("root");
    for p in path {
        let _ = write!(s, ".{p}");
    }
    s
}

/// Evaluates at `x`. A failed `inv` reports the path (child indices from the
/// root, `0` = left/only child, `1` = right child) of the offending node.
pub fn eval_expr(ast: &ExprAst, x: &GradedPoint) -> Result<CMatrix> {
    let mut path = Vec::new();
    eval_at(ast, x, &mut path)
}

fn eval_at(ast: &ExprAst, x: &GradedPoint, path: &mut Vec<usize>) -> Result<CMatrix> {
    let n = x.n();
    let child = |e: &ExprAst, k: usize, path: &mut Vec<usize>| {
        path.push(k);
        let r = eval_at(e, x, path);
        path.pop();
        r
    };
    Ok(match ast {
        ExprAst::Const(c) => CMatrix::identity(n).scale(*c),
        ExprAst::Var(i) => {
            if *i == 0 || *i > x.d() {
                return Err(Error::ShapeMismatch(format!("x{i} used on a point with d = {}", x.d())));
            }
            x.coord(*i).clone()
        }
        ExprAst::Add(a, b) => &child(a, 0, path)? + &child(b, 1, path)?,
        ExprAst::Sub(a, b) => &child(a, 0, path)? - &child(b, 1, path)?,
        ExprAst::Mul(a, b) => &child(a, 0, path)? * &child(b, 1, path)?,
        ExprAst::Neg(a) => -&child(a, 0, path)?,
        ExprAst::ScalarMul(c, a) => child(a, 0, path)?.scale(*c),
        ExprAst::Inv(a) => {
            let inner = child(a, 0, path)?;
            match inner.inv() {
                Ok(inv) => inv.matrix,
                Err(Error::SingularMatrix { .. }) => return Err(Error::SingularityHit { path: path_str(path) }),
                Err(e) => return Err(e),
            }
        }
    })
}

/// An expression bundled with its variable count, usable as an [`NcFunction`].
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub ast: ExprAst,
    pub d: usize,
}

impl Expr {
    pub fn parse(src: &str, d: usize) -> Result<Self> {
        Ok(Expr { ast: parse(src, d)?, d })
    }

    pub fn to_free_poly(&self) -> Result<FreePoly> {
        to_free_poly(&self.ast, self.d)
    }
}

impl NcFunction for Expr {
    fn d(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        if x.d() != self.d {
            return Err(Error::ShapeMismatch(format!("expression has d = {}, point has d = {}", self.d, x.d())));
        }
        eval_expr(&self.ast, x)
    }
}

impl std::fmt::Display for FreePoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print(&from_free_poly(self)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freepoly::Word;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn v(i: usize) -> ExprAst {
        ExprAst::Var(i)
    }

    #[test]
    fn parses_the_four_term_polynomial() {
        let ast = parse("2 + x1 - x1*x2*x1 + 3*x1*x1*x2", 2).unwrap();
        let expected = ExprAst::add(
            ExprAst::sub(ExprAst::add(ExprAst::real(2.0), v(1)), ExprAst::mul(ExprAst::mul(v(1), v(2)), v(1))),
            ExprAst::mul(ExprAst::mul(ExprAst::scalar_mul(c(3.0), v(1)), v(1)), v(2)),
        );
        assert_eq!(ast, expected);
        let p = to_free_poly(&ast, 2).unwrap();
        assert_eq!(p.num_terms(), 4);
        assert_eq!(p.coeff(&Word::new(vec![1, 2, 1])), c(-1.0));
        assert_eq!(p.coeff(&Word::new(vec![1, 1, 2])), c(3.0));
        assert_eq!(print(&ast), "2 + x1 - x1*x2*x1 + 3*x1*x1*x2");
    }

    #[test]
    fn parses_simple_forms() {
        assert_eq!(parse("x1", 1).unwrap(), v(1));
        assert_eq!(
            parse("inv(1 - x1*x2)", 2).unwrap(),
            ExprAst::inv(ExprAst::sub(ExprAst::real(1.0), ExprAst::mul(v(1), v(2))))
        );
        assert_eq!(parse("  x1 *\tx2 ", 2).unwrap(), ExprAst::mul(v(1), v(2)));
        assert_eq!(parse("2.5i", 1).unwrap(), ExprAst::Const(Complex64::new(0.0, 2.5)));
        assert_eq!(parse("-x1*x2", 2).unwrap(), ExprAst::mul(ExprAst::neg(v(1)), v(2)));
        assert_eq!(parse("--x1", 1).unwrap(), ExprAst::neg(ExprAst::neg(v(1))));
        assert_eq!(parse("(2)*x1", 1).unwrap(), ExprAst::mul(ExprAst::real(2.0), v(1)));
        assert_eq!(parse("x1*2", 1).unwrap(), ExprAst::mul(v(1), ExprAst::real(2.0)));
    }

    #[test]
    fn reports_errors_with_offsets() {
        assert!(matches!(parse("x1 + x3", 2), Err(Error::UnknownVariable { index: 3, d: 2, offset: 5 })));
        assert!(matches!(parse("x0", 2), Err(Error::UnknownVariable { index: 0, .. })));
        assert!(matches!(parse("x1 +", 1), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse("(x1", 1), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("x1 x1", 1), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("x1 ^ 2", 1), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("inv x1", 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse("", 1), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("1..2", 1), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("x99999999999999999999999", 1), Err(Error::Syntax { .. })));
        let deep = format!("{}x1{}", "(".repeat(10_000), ")".repeat(10_000));
        assert!(matches!(parse(&deep, 1), Err(Error::Syntax { .. })));
        let long = vec!["x1"; 5000].join("+");
        assert!(parse(&vec!["x1"; 1000].join("+"), 1).is_ok());
        assert!(matches!(parse(&long, 1), Err(Error::Syntax { .. })));
    }

    #[test]
    fn expands_noncommutatively() {
        let p = to_free_poly(&parse("(x1+x2)*(x1-x2)", 2).unwrap(), 2).unwrap();
        let expected = FreePoly::from_terms(
            2,
            [
                (Word::new(vec![1, 1]), c(1.0)),
                (Word::new(vec![1, 2]), c(-1.0)),
                (Word::new(vec![2, 1]), c(1.0)),
                (Word::new(vec![2, 2]), c(-1.0)),
            ],
        )
        .unwrap();
        assert_eq!(p, expected);
        assert!(to_free_poly(&parse("0*x1", 1).unwrap(), 1).unwrap().is_zero());
        assert_eq!(to_free_poly(&parse("inv(x1)", 1).unwrap(), 1), Err(Error::NotPolynomial));
    }

    #[test]
    fn evaluates_rational_expressions() {
        let ast = parse("inv(1 - x1*x2)", 2).unwrap();
        let x = GradedPoint::scalar(&[c(0.5), c(0.5)]).unwrap();
        let val = eval_expr(&ast, &x).unwrap();
        assert!((val.get(0, 0) - c(4.0 / 3.0)).norm() < 1e-15);

        let zero = GradedPoint::scalar(&[c(0.0)]).unwrap();
        assert_eq!(eval_expr(&parse("inv(x1)", 1).unwrap(), &zero), Err(Error::SingularityHit { path: "root".into() }));
        assert_eq!(
            eval_expr(&parse("1 + x1*inv(x1)", 1).unwrap(), &zero),
            Err(Error::SingularityHit { path: "root.1.1".into() })
        );
    }

    #[test]
    fn prints_precedence_correctly() {
        let cases = [
            ExprAst::sub(v(1), ExprAst::sub(v(2), v(1))),
            ExprAst::mul(v(1), ExprAst::mul(v(2), v(1))),
            ExprAst::neg(ExprAst::add(v(1), v(2))),
            ExprAst::neg(ExprAst::mul(v(1), v(2))),
            ExprAst::scalar_mul(c(2.0), ExprAst::scalar_mul(c(3.0), v(1))),
            ExprAst::mul(ExprAst::real(2.0), v(1)),
            ExprAst::mul(ExprAst::neg(ExprAst::real(2.0)), v(1)),
            ExprAst::add(ExprAst::real(0.1), ExprAst::Const(Complex64::new(0.0, 1e-20))),
            ExprAst::inv(ExprAst::sub(ExprAst::real(1.0), ExprAst::scalar_mul(Complex64::new(0.0, 2.0), v(2)))),
        ];
        for ast in cases {
            let text = print(&ast);
            assert_eq!(parse(&text, 2).unwrap(), ast, "{text}");
        }
    }

    #[test]
    fn non_literal_constants_print_semantically() {
        let ast = ExprAst::scalar_mul(Complex64::new(-1.5, 2.0), v(1));
        let text = print(&ast);
        assert_eq!(text, "(-1.5 + 2i)*x1");
        let back = to_free_poly(&parse(&text, 1).unwrap(), 1).unwrap();
        assert_eq!(back, to_free_poly(&ast, 1).unwrap());
    }

    #[test]
    fn free_poly_display_round_trips() {
        let p = to_free_poly(&parse("2 + x1 - x1*x2*x1 + 3*x1*x1*x2", 2).unwrap(), 2).unwrap();
        assert_eq!(p.to_string(), "2 + x1 + 3*x1*x1*x2 - x1*x2*x1");
        let q = FreePoly::from_terms(
            2,
            [
                (Word::new(vec![2]), Complex64::new(-0.25, 0.0)),
                (Word::new(vec![1, 2]), Complex64::new(0.0, -3.0)),
                (Word::new(vec![2, 2]), Complex64::new(1.0, 1.0)),
            ],
        )
        .unwrap();
        let back = to_free_poly(&parse(&q.to_string(), 2).unwrap(), 2).unwrap();
        assert_eq!(back, q);
        assert_eq!(FreePoly::zero(1).to_string(), "0");
    }
}
