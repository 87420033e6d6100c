//! Compact branch syntax: comma-separated chart variables, with `v^(e)`
//! and `(a,b,...)^(e)` repetition; exponents may use `d`.

use crate::family::eval;
use crate::CliError;

/// Expands a branch specification into a list of variable names.
pub fn expand(spec: &str, d: Option<i64>) -> Result<Vec<String>, CliError> {
    let chars: Vec<char> = spec.chars().filter(|c| !c.is_whitespace()).collect();
    let mut k = 0;
    let out = items(&chars, &mut k, d, spec)?;
    if k != chars.len() {
        return Err(bad(spec));
    }
    Ok(out)
}

fn bad(spec: &str) -> CliError {
    CliError::Usage(format!("bad --branch {spec:?}"))
}

fn items(c: &[char], k: &mut usize, d: Option<i64>, spec: &str) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    loop {
        let group = if c.get(*k) == Some(&'(') {
            *k += 1;
            let inner = items(c, k, d, spec)?;
            if c.get(*k) != Some(&')') {
                return Err(bad(spec));
            }
            *k += 1;
            inner
        } else {
            let start = *k;
            while *k < c.len() && (c[*k].is_alphanumeric() || c[*k] == '_') {
                *k += 1;
            }
            if start == *k {
                return Err(bad(spec));
            }
            vec![c[start..*k].iter().collect()]
        };
        let reps = if c.get(*k) == Some(&'^') {
            *k += 1;
            let start = *k;
            if c.get(*k) == Some(&'(') {
                let mut depth = 0;
                while *k < c.len() {
                    match c[*k] {
                        '(' => depth += 1,
                        ')' => depth -= 1,
                        _ => {}
                    }
                    *k += 1;
                    if depth == 0 {
                        break;
                    }
                }
            } else {
                while *k < c.len() && c[*k].is_ascii_alphanumeric() {
                    *k += 1;
                }
            }
            let e: String = c[start..*k].iter().collect();
            let v = eval(&e, d)?;
            usize::try_from(v).map_err(|_| CliError::Usage(format!("negative repetition {e} in --branch")))?
        } else {
            1
        };
        for _ in 0..reps {
            out.extend(group.iter().cloned());
        }
        if c.get(*k) == Some(&',') {
            *k += 1;
        } else {
            return Ok(out);
        }
    }
}
