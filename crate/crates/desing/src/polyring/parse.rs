//! Parser for the polynomial text grammar.
//!
//! ```text
//! poly := ['+'|'-'] term (('+'|'-') term)*
//! term := [integer ['/' integer]] ('*'? var ('^' integer)?)*
//! ```

use super::{Coeff, ExpVec, Poly, MAX_VARS};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at offset {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown variable {0:?}")]
    UnknownVar(String),
    #[error("zero denominator at offset {0}")]
    ZeroDenominator(usize),
    #[error("exponent out of range at offset {0}")]
    ExponentOverflow(usize),
    #[error("empty term at offset {0}")]
    EmptyTerm(usize),
    #[error("too many variables (limit {MAX_VARS})")]
    TooManyVars,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

fn lex(s: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (pos, ch) = chars[k];
        if ch.is_whitespace() {
            k += 1;
        } else if ch.is_ascii_digit() {
            let start = k;
            while k < chars.len() && chars[k].1.is_ascii_digit() {
                k += 1;
            }
            let text: String = chars[start..k].iter().map(|c| c.1).collect();
            let n: BigInt = text.parse().map_err(|_| ParseError::UnexpectedChar { pos, ch })?;
            out.push((pos, Tok::Int(n)));
        } else if ch.is_ascii_alphabetic() {
            let start = k;
            while k < chars.len() && (chars[k].1.is_ascii_alphanumeric() || chars[k].1 == '_') {
                k += 1;
            }
            out.push((pos, Tok::Ident(chars[start..k].iter().map(|c| c.1).collect())));
        } else {
            let t = match ch {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                _ => return Err(ParseError::UnexpectedChar { pos, ch }),
            };
            out.push((pos, t));
            k += 1;
        }
    }
    Ok(out)
}

/// Variable table that either is fixed or grows on first appearance.
struct VarTable<'a> {
    fixed: Option<&'a [String]>,
    names: Vec<String>,
}

impl VarTable<'_> {
    fn index(&mut self, name: &str) -> Result<usize, ParseError> {
        if let Some(f) = self.fixed {
            return f.iter().position(|v| v == name).ok_or_else(|| ParseError::UnknownVar(name.to_string()));
        }
        if let Some(i) = self.names.iter().position(|v| v == name) {
            return Ok(i);
        }
        if self.names.len() >= MAX_VARS {
            return Err(ParseError::TooManyVars);
        }
        self.names.push(name.to_string());
        Ok(self.names.len() - 1)
    }
}

/// Sparse term list keyed by variable index, before the universe is known.
type RawTerm = (Vec<(usize, u32)>, Coeff);

struct Parser<'t> {
    toks: &'t [(usize, Tok)],
    k: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.k).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.k).map_or(self.end, |t| t.0)
    }

    fn unexpected(&self, src: &str) -> ParseError {
        match self.toks.get(self.k) {
            None => ParseError::UnexpectedEnd,
            Some((pos, _)) => ParseError::UnexpectedChar { pos: *pos, ch: src[*pos..].chars().next().unwrap_or(' ') },
        }
    }

    fn poly(&mut self, vars: &mut VarTable, src: &str) -> Result<Vec<RawTerm>, ParseError> {
        let mut terms = Vec::new();
        let mut sign = BigRational::one();
        match self.peek() {
            Some(Tok::Minus) => {
                sign = -sign;
                self.k += 1;
            }
            Some(Tok::Plus) => self.k += 1,
            _ => {}
        }
        loop {
            let (exps, c) = self.term(vars, src)?;
            terms.push((exps, c * &sign));
            match self.peek() {
                None => break,
                Some(Tok::Plus) => sign = BigRational::one(),
                Some(Tok::Minus) => sign = -BigRational::one(),
                Some(_) => return Err(self.unexpected(src)),
            }
            self.k += 1;
        }
        Ok(terms)
    }

    fn term(&mut self, vars: &mut VarTable, src: &str) -> Result<RawTerm, ParseError> {
        let start = self.pos();
        let mut coeff = BigRational::one();
        let mut seen = false;
        if let Some(Tok::Int(n)) = self.peek() {
            let num = n.clone();
            self.k += 1;
            seen = true;
            if let Some(Tok::Slash) = self.peek() {
                self.k += 1;
                let dpos = self.pos();
                match self.peek() {
                    Some(Tok::Int(d)) => {
                        if d.is_zero() {
                            return Err(ParseError::ZeroDenominator(dpos));
                        }
                        coeff = BigRational::new(num, d.clone());
                        self.k += 1;
                    }
                    _ => return Err(self.unexpected(src)),
                }
            } else {
                coeff = BigRational::from_integer(num);
            }
        }
        let mut exps: Vec<(usize, u32)> = Vec::new();
        loop {
            let save = self.k;
            if let Some(Tok::Star) = self.peek() {
                self.k += 1;
            }
            match self.peek() {
                Some(Tok::Ident(name)) => {
                    let idx = vars.index(name)?;
                    self.k += 1;
                    let mut e: u32 = 1;
                    if let Some(Tok::Caret) = self.peek() {
                        self.k += 1;
                        let epos = self.pos();
                        match self.peek() {
                            Some(Tok::Int(n)) => {
                                e = u32::try_from(n.clone()).map_err(|_| ParseError::ExponentOverflow(epos))?;
                                self.k += 1;
                            }
                            _ => return Err(self.unexpected(src)),
                        }
                    }
                    match exps.iter_mut().find(|(i, _)| *i == idx) {
                        Some(slot) => {
                            slot.1 = slot.1.checked_add(e).ok_or(ParseError::ExponentOverflow(start))?;
                        }
                        None => exps.push((idx, e)),
                    }
                    seen = true;
                }
                _ => {
                    if self.k != save {
                        return Err(self.unexpected(src));
                    }
                    break;
                }
            }
        }
        if !seen {
            return Err(if self.k >= self.toks.len() {
                ParseError::UnexpectedEnd
            } else {
                ParseError::EmptyTerm(start)
            });
        }
        Ok((exps, coeff))
    }
}

fn build(n: usize, raw: Vec<RawTerm>) -> Poly {
    let terms = raw
        .into_iter()
        .map(|(sparse, c)| {
            let mut e = vec![0u32; n];
            for (i, k) in sparse {
                e[i] = k;
            }
            (ExpVec(e), c)
        })
        .collect();
    Poly::from_terms(n, terms)
}

fn parse_raw(s: &str, vars: &mut VarTable) -> Result<Vec<RawTerm>, ParseError> {
    let toks = lex(s)?;
    if toks.is_empty() {
        return Err(ParseError::UnexpectedEnd);
    }
    let mut p = Parser { toks: &toks, k: 0, end: s.len() };
    p.poly(vars, s)
}

/// Parses a polynomial over the given variables.
pub fn parse_poly(s: &str, vars: &[String]) -> Result<Poly, ParseError> {
    let mut table = VarTable { fixed: Some(vars), names: Vec::new() };
    let raw = parse_raw(s, &mut table)?;
    Ok(build(vars.len(), raw))
}

/// Parses a polynomial, declaring variables in order of first appearance.
pub fn parse_poly_infer(s: &str) -> Result<(Poly, Vec<String>), ParseError> {
    let (mut ps, vars) = parse_ideal_infer(s)?;
    Ok((ps.remove(0), vars))
}

/// Parses a comma-separated list of polynomials over the given variables.
pub fn parse_ideal(s: &str, vars: &[String]) -> Result<Vec<Poly>, ParseError> {
    s.split(',').map(|part| parse_poly(part, vars)).collect()
}

/// Parses a comma-separated list, declaring variables in order of first
/// appearance.
pub fn parse_ideal_infer(s: &str) -> Result<(Vec<Poly>, Vec<String>), ParseError> {
    let mut table = VarTable { fixed: None, names: Vec::new() };
    let mut raws = Vec::new();
    for part in s.split(',') {
        raws.push(parse_raw(part, &mut table)?);
    }
    let n = table.names.len();
    Ok((raws.into_iter().map(|r| build(n, r)).collect(), table.names))
}
