//! Sparse multivariate polynomials with exact rational coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number in lowest terms with a positive denominator.
pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `int` or `int/uint` (an optional leading `-` is accepted).
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    if den.starts_with('-') || den.starts_with('+') {
        return None;
    }
    let num: BigInt = num.parse().ok()?;
    let den: BigInt = den.parse().ok()?;
    if den.is_zero() {
        return None;
    }
    Some(Rational::new(num, den))
}

/// Parses a finite decimal such as `0.98`, `-1.5e-3` or `3` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some(r) = parse_rational(text) {
        return Some(r);
    }
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{}{}", whole, frac).parse().ok()?;
    let ten = BigInt::from(10);
    let scale = exp - frac.len() as i32;
    let mut r = Rational::from_integer(digits);
    if scale >= 0 {
        r *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exponent vector indexed by parameter; trailing zeros are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(index: usize) -> Self {
        let mut e = vec![0; index + 1];
        e[index] = 1;
        Monomial(e)
    }

    pub fn from_exponents(mut exps: Vec<u32>) -> Self {
        while exps.last() == Some(&0) {
            exps.pop();
        }
        Monomial(exps)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let n = self.0.len().max(other.0.len());
        let e = (0..n).map(|i| self.0.get(i).copied().unwrap_or(0) + other.0.get(i).copied().unwrap_or(0)).collect();
        Monomial(e)
    }
}

/// Graded lexicographic order: total degree first, then exponent of the
/// lowest-indexed parameter.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let n = self.0.len().max(other.0.len());
            for i in 0..n {
                let a = self.0.get(i).copied().unwrap_or(0);
                let b = other.0.get(i).copied().unwrap_or(0);
                match a.cmp(&b) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown parameter `{name}` at position {pos}")]
    UnknownParameter { name: String, pos: usize },
    #[error("parameter index {0} has no assigned value")]
    Unassigned(usize),
}

/// Sparse polynomial over the model parameters. No zero coefficient is ever
/// stored, so the syntactic zero is exactly the empty term map.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn var(index: usize) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(index), Rational::one());
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Rational> {
        &self.terms
    }

    /// True iff the polynomial is syntactically zero (`p ≡ 0`).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    /// Returns the parameter index if the polynomial is exactly one variable.
    pub fn as_single_var(&self) -> Option<usize> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        if !c.is_one() || m.degree() != 1 {
            return None;
        }
        m.0.iter().position(|&e| e == 1)
    }

    /// Highest parameter index occurring in the polynomial, if any.
    pub fn max_param(&self) -> Option<usize> {
        self.terms.keys().filter(|m| !m.0.is_empty()).map(|m| m.0.len() - 1).max()
    }

    pub fn params(&self) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.terms.keys().flat_map(|m| m.0.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| i)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, k: &Rational) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * k);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Evaluates the polynomial; `values[i]` is the value of parameter `i`.
    pub fn eval(&self, values: &[Rational]) -> Result<Rational, PolyError> {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let v = values.get(i).ok_or(PolyError::Unassigned(i))?;
                t *= num_traits::pow(v.clone(), e as usize);
            }
            total += t;
        }
        Ok(total)
    }

    /// Parses an expression over the given parameter names.
    pub fn parse(text: &str, params: &[String]) -> Result<Polynomial, PolyError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0, params };
        let poly = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(poly)
    }

    /// Canonical text with graded-lexicographic term order (highest first).
    pub fn to_text(&self, params: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || m.is_one() {
                factors.push(format_rational(&abs));
            }
            for (idx, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let name = params.get(idx).cloned().unwrap_or_else(|| format!("x{}", idx));
                if e == 1 {
                    factors.push(name);
                } else {
                    factors.push(format!("{}^{}", name, e));
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text(&[]))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    params: &'a [String],
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> PolyError {
        PolyError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let negate_first = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let first = self.term()?;
        let mut acc = if negate_first { first.neg() } else { first };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial, PolyError> {
        let mut base = self.atom()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let digits = self.digits();
            if digits.is_empty() {
                return Err(self.err("expected unsigned exponent after `^`"));
            }
            let e: u32 = digits.parse().map_err(|_| self.err("exponent too large"))?;
            base = base.pow(e);
        }
        Ok(base)
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => {
                let num = self.digits();
                let mut value = Rational::from_integer(num.parse::<BigInt>().expect("digits"));
                // `int/uint` is a single literal; whitespace is not allowed inside it.
                if self.src.get(self.pos) == Some(&b'/') {
                    self.pos += 1;
                    let den = self.digits();
                    if den.is_empty() {
                        return Err(self.err("expected denominator after `/`"));
                    }
                    let den: BigInt = den.parse().expect("digits");
                    if den.is_zero() {
                        return Err(self.err("zero denominator"));
                    }
                    value /= Rational::from_integer(den);
                }
                Ok(Polynomial::constant(value))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                match self.params.iter().position(|p| *p == name) {
                    Some(i) => Ok(Polynomial::var(i)),
                    None => Err(PolyError::UnknownParameter { name, pos: start }),
                }
            }
            Some(_) => Err(self.err("expected number, parameter or `(`")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_edge_label() {
        let ps = names(&["x", "y"]);
        let p = Polynomial::parse("2*x^2 - y", &ps).unwrap();
        let expected = Polynomial::from_terms([
            (Monomial::from_exponents(vec![2]), int(2)),
            (Monomial::from_exponents(vec![0, 1]), int(-1)),
        ]);
        assert_eq!(p, expected);
        assert_eq!(p.to_text(&ps), "2*x^2 - y");
    }

    #[test]
    fn zero_is_empty() {
        let p = Polynomial::parse("0", &[]).unwrap();
        assert!(p.is_zero());
        assert!(p.terms().is_empty());
        assert_eq!(p.eval(&[]).unwrap(), int(0));
        let q = Polynomial::parse("x - x", &names(&["x"])).unwrap();
        assert!(q.is_zero());
    }

    #[test]
    fn evaluates_at_point() {
        let ps = names(&["x", "y"]);
        let v = [rat(3, 5), rat(7, 25)];
        assert_eq!(Polynomial::parse("1 - x", &ps).unwrap().eval(&v).unwrap(), rat(2, 5));
        assert_eq!(Polynomial::parse("2*x^2 - y", &ps).unwrap().eval(&v).unwrap(), rat(11, 25));
        assert_eq!(Polynomial::one().eval(&v).unwrap(), int(1));
    }

    #[test]
    fn rational_literals_and_parentheses() {
        let ps = names(&["p"]);
        let p = Polynomial::parse("3/4*(1 - p)^2 + 1/4", &ps).unwrap();
        assert_eq!(p.eval(&[rat(1, 2)]).unwrap(), rat(7, 16));
        assert_eq!(p.to_text(&ps), "3/4*p^2 - 3/2*p + 1");
        let q = Polynomial::parse("-1/64", &ps).unwrap();
        assert_eq!(q.as_constant(), Some(rat(-1, 64)));
    }

    #[test]
    fn errors_carry_position() {
        let ps = names(&["x"]);
        match Polynomial::parse("x + z", &ps) {
            Err(PolyError::UnknownParameter { name, pos }) => {
                assert_eq!(name, "z");
                assert_eq!(pos, 4);
            }
            other => panic!("unexpected {:?}", other),
        }
        assert!(matches!(Polynomial::parse("x +", &ps), Err(PolyError::Syntax { pos: 3, .. })));
        assert!(matches!(Polynomial::parse("x^", &ps), Err(PolyError::Syntax { .. })));
        assert!(matches!(Polynomial::parse("1/0", &ps), Err(PolyError::Syntax { .. })));
        assert!(matches!(Polynomial::parse("(x", &ps), Err(PolyError::Syntax { .. })));
        assert!(matches!(Polynomial::parse("x y", &ps), Err(PolyError::Syntax { .. })));
    }

    #[test]
    fn unassigned_parameter() {
        let ps = names(&["x", "y"]);
        let p = Polynomial::parse("x*y", &ps).unwrap();
        assert_eq!(p.eval(&[int(1)]), Err(PolyError::Unassigned(1)));
    }

    #[test]
    fn single_var_detection() {
        let ps = names(&["a", "b"]);
        assert_eq!(Polynomial::parse("b", &ps).unwrap().as_single_var(), Some(1));
        assert_eq!(Polynomial::parse("2*b", &ps).unwrap().as_single_var(), None);
        assert_eq!(Polynomial::parse("a*b", &ps).unwrap().as_single_var(), None);
    }

    #[test]
    fn decimals() {
        assert_eq!(parse_decimal("0.98"), Some(rat(49, 50)));
        assert_eq!(parse_decimal("-1.5e-3"), Some(rat(-3, 2000)));
        assert_eq!(parse_decimal("2"), Some(int(2)));
        assert_eq!(parse_decimal("1/3"), Some(rat(1, 3)));
        assert_eq!(parse_decimal("abc"), None);
    }
}
