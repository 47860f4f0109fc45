//! Parser for linear restrictions such as `x1=0, x2-x3=0, 2*x4+x5=1`.

use hdfe_core::Matrix;

use crate::Error;

/// Parses comma-separated restrictions over `names` into `(R, r)`.
pub fn parse_restrictions(spec: &str, names: &[String]) -> Result<(Matrix, Vec<f64>), Error> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (lhs, value) = part.split_once('=').ok_or_else(|| Error::Restriction(format!("`{part}` has no `=`")))?;
        let value: f64 = value.trim().parse().map_err(|_| Error::Restriction(format!("`{}` is not a number", value.trim())))?;
        rows.push(parse_linear(lhs, names)?);
        rhs.push(value);
    }
    if rows.is_empty() {
        return Err(Error::Restriction("no restrictions given".into()));
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Ok((Matrix::from_rows(&refs), rhs))
}

fn parse_linear(expr: &str, names: &[String]) -> Result<Vec<f64>, Error> {
    let mut row = vec![0.0; names.len()];
    let expr: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if expr.is_empty() {
        return Err(Error::Restriction("empty left-hand side".into()));
    }
    // split into signed terms
    let mut terms = Vec::new();
    let mut start = 0;
    for (i, c) in expr.char_indices() {
        if (c == '+' || c == '-') && i > start && !expr[..i].ends_with(['e', 'E', '*']) {
            terms.push(&expr[start..i]);
            start = i;
        }
    }
    terms.push(&expr[start..]);
    for term in terms {
        let (sign, body) = match term.as_bytes().first() {
            Some(b'-') => (-1.0, &term[1..]),
            Some(b'+') => (1.0, &term[1..]),
            _ => (1.0, term),
        };
        let (coef, name) = match body.split_once('*') {
            Some((c, n)) => (c.parse::<f64>().map_err(|_| Error::Restriction(format!("bad coefficient `{c}`")))?, n),
            None => (1.0, body),
        };
        let j = names.iter().position(|n| n == name).ok_or_else(|| Error::Restriction(format!("unknown coefficient `{name}`")))?;
        row[j] += sign * coef;
    }
    Ok(row)
}
