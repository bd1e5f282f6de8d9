//! Parser for degree distributions written as polynomials in `x`, e.g.
//! `0.48555*x^5 + 0.51445*x^6`. The exponent `k` is the node degree minus one.

use std::collections::BTreeMap;
use std::fmt;

use bec_design::ensemble::{DegreeDistribution, Side};

/// Largest accepted deviation of `Σ c` from 1 without `--renormalize`.
pub const SUM_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PolySpecError {
    /// 1-based character column of the offending token.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for PolySpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for PolySpecError {}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().enumerate().filter(|(_, c)| !c.is_whitespace()).collect(),
            pos: 0,
            src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn column(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|&(i, _)| i + 1)
            .unwrap_or_else(|| self.src.chars().count() + 1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err(&self, message: impl Into<String>) -> PolySpecError {
        PolySpecError {
            column: self.column(),
            message: message.into(),
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek().filter(|&c| f(c)) {
            s.push(c);
            self.pos += 1;
        }
        s
    }

    fn number(&mut self) -> Option<String> {
        let s = self.take_while(|c| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E');
        (!s.is_empty()).then_some(s)
    }
}

/// Splits `s` into `(exponent, coefficient)` terms without checking the sum.
pub fn parse_terms(s: &str) -> Result<Vec<(usize, f64)>, PolySpecError> {
    let mut cur = Cursor::new(s);
    if cur.peek().is_none() {
        return Err(cur.err("empty polynomial"));
    }
    let mut terms = Vec::new();
    loop {
        if cur.peek() == Some('-') {
            return Err(cur.err("negative coefficient"));
        }
        let start = cur.column();
        let coeff = match cur.number() {
            Some(text) => {
                let v: f64 = text.parse().map_err(|_| PolySpecError {
                    column: start,
                    message: format!("bad coefficient `{text}`"),
                })?;
                cur.eat('*');
                v
            }
            None => 1.0,
        };
        if !cur.eat('x') {
            return Err(cur.err("expected `x`"));
        }
        let exponent = if cur.eat('^') {
            let col = cur.column();
            let text = cur.take_while(|c| c.is_ascii_digit());
            text.parse::<usize>().map_err(|_| PolySpecError {
                column: col,
                message: "expected an integer exponent".into(),
            })?
        } else {
            1
        };
        if exponent == 0 {
            return Err(PolySpecError {
                column: start,
                message: "constant terms are not allowed".into(),
            });
        }
        terms.push((exponent, coeff));
        match cur.peek() {
            None => break,
            Some('+') => {
                cur.pos += 1;
            }
            Some('-') => return Err(cur.err("negative coefficient")),
            Some(c) => return Err(cur.err(format!("unexpected `{c}`"))),
        }
    }
    Ok(terms)
}

/// Parses `s` into a distribution on `side`. Each `c*x^k` contributes `c` to
/// node degree `k + 1`. Fractions must sum to 1 within [`SUM_SLACK`] unless
/// `renormalize` is set, in which case any positive sum is rescaled.
pub fn parse_poly_spec(s: &str, side: Side, renormalize: bool) -> Result<DegreeDistribution<f64>, PolySpecError> {
    let terms = parse_terms(s)?;
    let mut coeffs = BTreeMap::new();
    for (k, c) in terms {
        *coeffs.entry(k + 1).or_insert(0.0) += c;
    }
    let sum: f64 = coeffs.values().sum();
    let end = s.chars().count() + 1;
    if !(sum > 0.0) {
        return Err(PolySpecError {
            column: end,
            message: "coefficients sum to zero".into(),
        });
    }
    if !renormalize && (sum - 1.0).abs() > SUM_SLACK {
        return Err(PolySpecError {
            column: end,
            message: format!("coefficients sum to {sum}, not 1"),
        });
    }
    coeffs.values_mut().for_each(|c| *c /= sum);
    DegreeDistribution::new(side, coeffs).map_err(|e| PolySpecError {
        column: 1,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_monomial() {
        let d = parse_poly_spec("x^4", Side::Rho, false).unwrap();
        assert_eq!(d.coeffs().iter().map(|(&k, &v)| (k, v)).collect::<Vec<_>>(), vec![(5, 1.0)]);
    }

    #[test]
    fn mixed_terms() {
        let d = parse_poly_spec("0.48555*x^5 + 0.51445*x^6", Side::Rho, false).unwrap();
        assert!((d.fraction(6) - 0.48555).abs() < 1e-12);
        assert!((d.fraction(7) - 0.51445).abs() < 1e-12);
    }

    #[test]
    fn implicit_multiplication_and_linear_term() {
        let d = parse_poly_spec("0.5x + 0.5 x^2", Side::Lambda, false).unwrap();
        assert_eq!(d.fraction(2), 0.5);
        assert_eq!(d.fraction(3), 0.5);
    }

    #[test]
    fn sum_error() {
        let e = parse_poly_spec("0.5*x + 0.6*x^2", Side::Lambda, false).unwrap_err();
        assert!(e.message.contains("sum"), "{e}");
    }

    #[test]
    fn renormalize_rescales() {
        let d = parse_poly_spec("0.4021x + 0.2137x^2 + 0.3902x^6", Side::Lambda, true).unwrap();
        assert!((d.sum() - 1.0).abs() < 1e-12);
        assert!((d.fraction(2) - 0.4021 / 1.006).abs() < 1e-12);
    }

    #[test]
    fn negative_coefficient_position() {
        let e = parse_terms("x^2 - 0.5x").unwrap_err();
        assert_eq!(e.column, 5);
        let e = parse_terms("-x").unwrap_err();
        assert_eq!(e.column, 1);
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_terms("").is_err());
        assert!(parse_terms("0.5*y").is_err());
        assert!(parse_terms("x^").is_err());
        assert!(parse_terms("x^0").is_err());
        assert!(parse_terms("x +").is_err());
        assert_eq!(parse_terms("1..2x").unwrap_err().column, 1);
    }
}
