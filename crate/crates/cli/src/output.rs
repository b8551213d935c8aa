//! Data files and metadata sidecars.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const SIGNIFICANT_DIGITS: usize = 9;

/// `%.9g`-style formatting; masked values are written as `nan`.
pub fn format_g(x: f64) -> String {
    format_g_digits(x, SIGNIFICANT_DIGITS)
}

pub fn format_g_digits(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Comma-separated table with a single header row and `\n` line endings.
pub fn csv_table<'a>(header: &str, rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format_g(*v)).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

/// `<dir>/<stem>.<ext>`
pub fn path_for(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g_format_matches_printf() {
        assert_eq!(format_g(1.0), "1");
        assert_eq!(format_g(0.5), "0.5");
        assert_eq!(format_g(-4.4), "-4.4");
        assert_eq!(format_g(1.0 / 3.0), "0.333333333");
        assert_eq!(format_g(123456789.0), "123456789");
        assert_eq!(format_g(1234567891.0), "1.23456789e+09");
        assert_eq!(format_g(0.0001), "0.0001");
        assert_eq!(format_g(0.00001234), "1.234e-05");
        assert_eq!(format_g(-0.0), "0");
        assert_eq!(format_g(f64::NAN), "nan");
        assert_eq!(format_g(2.0 / 3.0 * 1e-7), "6.66666667e-08");
    }

    #[test]
    fn csv_layout() {
        let rows = [[1.0, 2.0], [3.0, 0.25]];
        let text = csv_table("tau_ns,g2", rows.iter().map(|r| r.as_slice()));
        assert_eq!(text, "tau_ns,g2\n1,2\n3,0.25\n");
    }

    proptest! {
        #[test]
        fn g_format_keeps_nine_digits(x in -1e12f64..1e12) {
            let back: f64 = format_g(x).parse().unwrap();
            let tol = x.abs() * 5.1e-9 + 1e-300;
            prop_assert!((back - x).abs() <= tol, "{} -> {}", x, format_g(x));
        }
    }
}
