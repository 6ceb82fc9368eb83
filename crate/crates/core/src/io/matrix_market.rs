//! Dense Matrix Market files (`array` format), column-major.
//!
//! Values are written in the shortest decimal form that parses back to the
//! same double, so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::{read_text, write_text, IoError};
use crate::linalg::ComplexDenseMatrix;

const HEADER: &str = "%%MatrixMarket matrix array complex general";

#[derive(Clone, Copy)]
enum Field {
    Real,
    Complex,
}

fn parse_error(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, message: message.into() }
}

fn parse_header(line: &str) -> Result<Field, IoError> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_error(1, "expected a %%MatrixMarket matrix header"));
    }
    if tokens[2] != "array" {
        return Err(parse_error(1, "array format required"));
    }
    let field = match tokens[3].as_str() {
        "complex" => Field::Complex,
        "real" | "double" | "integer" => Field::Real,
        other => return Err(parse_error(1, format!("unsupported field `{other}`"))),
    };
    if tokens[4] != "general" {
        return Err(parse_error(1, format!("unsupported symmetry `{}`", tokens[4])));
    }
    Ok(field)
}

fn parse_f64(token: &str, line: usize) -> Result<f64, IoError> {
    let x: f64 = token.parse().map_err(|_| parse_error(line, format!("invalid number `{token}`")))?;
    if !x.is_finite() {
        return Err(parse_error(line, format!("non-finite value `{token}`")));
    }
    Ok(x)
}

/// Parses Matrix Market text.
pub fn parse_matrix(text: &str) -> Result<ComplexDenseMatrix, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let field = match lines.next() {
        Some((_, header)) => parse_header(header)?,
        None => return Err(parse_error(1, "empty file")),
    };
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));

    let (size_line, size) = body.next().ok_or_else(|| parse_error(2, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_error(size_line, "size line must hold `rows cols`"));
    }
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| parse_error(size_line, format!("invalid size `{s}`")));
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if rows != cols || rows == 0 {
        return Err(IoError::Dimension { rows, cols });
    }

    let n = rows;
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    let mut count = 0;
    for (line, content) in body {
        if count == n * n {
            return Err(parse_error(line, "more entries than the size line declares"));
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let value = match (field, tokens.as_slice()) {
            (Field::Complex, [re, im]) => Complex64::new(parse_f64(re, line)?, parse_f64(im, line)?),
            (Field::Real, [re]) => Complex64::new(parse_f64(re, line)?, 0.0),
            (Field::Complex, _) => return Err(parse_error(line, "expected two values (re im)")),
            (Field::Real, _) => return Err(parse_error(line, "expected one value")),
        };
        // Column-major: entry k is (k mod n, k div n).
        data[(count % n) * n + count / n] = value;
        count += 1;
    }
    if count != n * n {
        let last = text.lines().count();
        return Err(parse_error(last, format!("expected {} entries, found {count}", n * n)));
    }
    ComplexDenseMatrix::new(n, data).map_err(|e| parse_error(0, e.to_string()))
}

/// Matrix Market text for `a`, complex general, column-major. Values carry
/// 17 significant digits, enough to read back every double bit-exactly.
pub fn format_matrix(a: &ComplexDenseMatrix) -> String {
    let n = a.dim();
    let mut out = String::with_capacity(48 * n * n + 64);
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "{n} {n}");
    for j in 0..n {
        for i in 0..n {
            let z = a[(i, j)];
            let _ = writeln!(out, "{:.16e} {:.16e}", z.re, z.im);
        }
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<ComplexDenseMatrix, IoError> {
    parse_matrix(&read_text(path.as_ref())?)
}

pub fn write_matrix(path: impl AsRef<Path>, a: &ComplexDenseMatrix) -> Result<(), IoError> {
    write_text(path.as_ref(), &format_matrix(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_file() {
        let a = parse_matrix("%%MatrixMarket matrix array complex general\n% comment\n1 1\n2.0 0.0\n").unwrap();
        assert_eq!(a, ComplexDenseMatrix::diag(&[c(2.0, 0.0)]).unwrap());
    }

    #[test]
    fn identity_and_column_order() {
        let text = "%%MatrixMarket matrix array complex general\n2 2\n1 0\n0 0\n0 0\n1 0\n";
        assert_eq!(parse_matrix(text).unwrap(), ComplexDenseMatrix::identity(2));
        let text = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n";
        let a = parse_matrix(text).unwrap();
        assert_eq!(a[(1, 0)], c(2.0, 0.0));
        assert_eq!(a[(0, 1)], c(3.0, 0.0));
    }

    #[test]
    fn coordinate_rejected() {
        let err = parse_matrix("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 2 0\n").unwrap_err();
        assert!(err.to_string().contains("array format required"), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_matrix("%%MatrixMarket matrix array complex general\n1 1\n2.0 x\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 3, .. }), "{err}");
        let err = parse_matrix("%%MatrixMarket matrix array complex general\n2 3\n").unwrap_err();
        assert!(matches!(err, IoError::Dimension { rows: 2, cols: 3 }));
        let err = parse_matrix("%%MatrixMarket matrix array complex general\n2 2\n1 0\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { .. }));
    }

    #[test]
    fn zero_format() {
        let text = format_matrix(&ComplexDenseMatrix::zeros(1));
        assert_eq!(
            text,
            "%%MatrixMarket matrix array complex general\n1 1\n0.0000000000000000e0 0.0000000000000000e0\n"
        );
        let text = format_matrix(&ComplexDenseMatrix::diag(&[c(0.1, -2.5)]).unwrap());
        assert!(text.ends_with("\n1.0000000000000001e-1 -2.5000000000000000e0\n"), "{text}");
    }

    #[test]
    fn awkward_values_round_trip() {
        let vals = [0.1, -1.0 / 3.0, 5e-324, -2.5e300, f64::MIN_POSITIVE, -0.0, f64::MAX];
        let a = ComplexDenseMatrix::from_fn(3, |i, j| c(vals[(i + j) % 7], vals[(2 * i + j + 1) % 7])).unwrap();
        let b = parse_matrix(&format_matrix(&a)).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }
}
