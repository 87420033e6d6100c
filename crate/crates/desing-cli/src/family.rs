//! Integer expressions in the family parameter `d`, and substitution of
//! `d` into exponent positions of a polynomial template.

use crate::CliError;

/// Evaluates `+ - *`, parentheses, integers and `d`; a number directly
/// followed by `d` or `(` multiplies.
pub fn eval(src: &str, d: Option<i64>) -> Result<i64, CliError> {
    let toks: Vec<char> = src.chars().filter(|c| !c.is_whitespace()).collect();
    let mut p = Expr { toks: &toks, k: 0, d, src };
    let v = p.sum()?;
    if p.k != toks.len() {
        return Err(p.err());
    }
    Ok(v)
}

struct Expr<'a> {
    toks: &'a [char],
    k: usize,
    d: Option<i64>,
    src: &'a str,
}

impl Expr<'_> {
    fn err(&self) -> CliError {
        CliError::Usage(format!("bad integer expression {:?}", self.src))
    }

    fn peek(&self) -> Option<char> {
        self.toks.get(self.k).copied()
    }

    fn sum(&mut self) -> Result<i64, CliError> {
        let mut v = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.k += 1;
            let r = self.product()?;
            v = if c == '+' { v.checked_add(r) } else { v.checked_sub(r) }.ok_or_else(|| self.err())?;
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<i64, CliError> {
        let mut v = self.atom()?;
        loop {
            match self.peek() {
                Some('*') => self.k += 1,
                Some('d' | '(') => {}
                _ => return Ok(v),
            }
            let r = self.atom()?;
            v = v.checked_mul(r).ok_or_else(|| self.err())?;
        }
    }

    fn atom(&mut self) -> Result<i64, CliError> {
        match self.peek() {
            Some('-') => {
                self.k += 1;
                Ok(-self.atom()?)
            }
            Some('(') => {
                self.k += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err(self.err());
                }
                self.k += 1;
                Ok(v)
            }
            Some('d') => {
                self.k += 1;
                self.d.ok_or_else(|| CliError::Usage("expression uses d but --d is not set".into()))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.k;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.k += 1;
                }
                let s: String = self.toks[start..self.k].iter().collect();
                s.parse().map_err(|_| self.err())
            }
            _ => Err(self.err()),
        }
    }
}

/// Replaces every exponent `^d`, `^(expr)` or `^k` of the template by its
/// integer value.
pub fn substitute(template: &str, d: i64) -> Result<String, CliError> {
    let chars: Vec<char> = template.chars().collect();
    let mut out = String::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        k += 1;
        if c != '^' {
            out.push(c);
            continue;
        }
        while k < chars.len() && chars[k].is_whitespace() {
            k += 1;
        }
        let start = k;
        if chars.get(k) == Some(&'(') {
            let mut depth = 0;
            while k < chars.len() {
                match chars[k] {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
                k += 1;
                if depth == 0 {
                    break;
                }
            }
            if depth != 0 {
                return Err(CliError::Usage(format!("unbalanced exponent in {template:?}")));
            }
        } else {
            while k < chars.len() && (chars[k].is_ascii_alphanumeric()) {
                k += 1;
            }
        }
        let expr: String = chars[start..k].iter().collect();
        let v = eval(&expr, Some(d))?;
        if v < 0 {
            return Err(CliError::Usage(format!("negative exponent {expr} = {v} at d = {d}")));
        }
        out.push('^');
        out.push_str(&v.to_string());
    }
    Ok(out)
}
