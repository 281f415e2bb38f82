//! Line-oriented text formats.
//!
//! * dictionaries: `convdict v1 n=<n> m=<m>` followed by `n` rows of `m` floats
//! * vectors: `vec v1 len=<L>` followed by one float per line
//! * configuration: `key=value` lines, `#` comments and blank lines ignored
//!
//! Floats are written with 17 significant digits so they round-trip exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::conv::LocalDictionary;
use crate::error::{CscError, Result};

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, msg: impl Into<String>) -> CscError {
    CscError::Parse {
        line,
        msg: msg.into(),
    }
}

fn header_field(tok: Option<&str>, key: &str, line: usize) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing `{key}=` in header")))?;
    let value = tok
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected `{key}=<int>`, found `{tok}`")))?;
    value
        .parse()
        .map_err(|_| parse_err(line, format!("bad integer in `{tok}`")))
}

fn parse_float(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad float `{tok}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn write_dictionary(dict: &LocalDictionary) -> String {
    let mut out = format!("convdict v1 n={} m={}\n", dict.n(), dict.m());
    for r in 0..dict.n() {
        let row: Vec<String> = (0..dict.m()).map(|j| fmt_f64(dict.get(r, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a dictionary file. Atoms are re-normalized on load.
pub fn read_dictionary(text: &str) -> Result<LocalDictionary> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty dictionary file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("convdict") || toks.next() != Some("v1") {
        return Err(parse_err(ln, "expected header `convdict v1 n=<n> m=<m>`"));
    }
    let n = header_field(toks.next(), "n", ln)?;
    let m = header_field(toks.next(), "m", ln)?;
    let mut rows = Vec::with_capacity(n * m);
    for _ in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(ln, format!("expected {n} rows")))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_float(t, ln))
            .collect::<Result<_>>()?;
        if vals.len() != m {
            return Err(parse_err(ln, format!("expected {m} values, found {}", vals.len())));
        }
        rows.extend(vals);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content after dictionary rows"));
    }
    Ok(LocalDictionary::from_rows(n, m, &rows)?.0)
}

pub fn write_vec(values: &[f64]) -> String {
    let mut out = format!("vec v1 len={}\n", values.len());
    for v in values {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    out
}

pub fn read_vec(text: &str) -> Result<Vec<f64>> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty vector file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("vec") || toks.next() != Some("v1") {
        return Err(parse_err(ln, "expected header `vec v1 len=<L>`"));
    }
    let len = header_field(toks.next(), "len", ln)?;
    let values: Vec<f64> = lines
        .map(|(ln, l)| parse_float(l, ln))
        .collect::<Result<_>>()?;
    if values.len() != len {
        return Err(parse_err(
            ln,
            format!("header declares {len} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

/// Ordered `key=value` map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (ln, line) in content_lines(text) {
            if line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(ln, format!("expected key=value, found `{line}`")))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(parse_err(ln, "empty key"));
            }
            if map.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(parse_err(ln, format!("duplicate key `{k}`")));
            }
        }
        Ok(Self(map))
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.0.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    /// Parses `key` with `FromStr`, returning `None` if it is absent.
    pub fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CscError::SpecInvalid(format!("bad value for `{key}`: `{v}`"))),
        }
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dictionary_header_and_layout() {
        let (d, _) = LocalDictionary::normalize(2, 2, &[0.6, 0.8, 1.0, 0.0]).unwrap();
        let text = write_dictionary(&d);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("convdict v1 n=2 m=2"));
        assert_eq!(lines.clone().count(), 2);
        let first: Vec<f64> = lines.next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(first, vec![0.6, 1.0]);
        assert_eq!(read_dictionary(&text).unwrap(), d);
    }

    #[test]
    fn dictionary_rejects_malformed() {
        assert!(read_dictionary("").is_err());
        assert!(read_dictionary("convdict v2 n=1 m=1\n1\n").is_err());
        assert!(read_dictionary("convdict v1 n=2 m=1\n1\n").is_err());
        assert!(read_dictionary("convdict v1 n=1 m=2\n1\n").is_err());
        assert!(matches!(
            read_dictionary("convdict v1 n=1 m=1\n0\n"),
            Err(CscError::ZeroAtom { .. })
        ));
    }

    #[test]
    fn vec_rejects_length_mismatch() {
        assert_eq!(read_vec("vec v1 len=0\n").unwrap(), Vec::<f64>::new());
        assert!(read_vec("vec v1 len=2\n1.0\n").is_err());
        assert!(read_vec("vec v1 len=1\nabc\n").is_err());
        assert!(read_vec("vec v1 len=1\nNaN\n").is_err());
    }

    #[test]
    fn key_values_parse() {
        let kv = KeyValues::parse("# plan\nname = fig2\n\ntrials=5\n").unwrap();
        assert_eq!(kv.get("name"), Some("fig2"));
        assert_eq!(kv.parse_opt::<usize>("trials").unwrap(), Some(5));
        assert_eq!(kv.parse_opt::<usize>("missing").unwrap(), None);
        assert!(kv.parse_opt::<usize>("name").is_err());
        assert!(KeyValues::parse("a=1\na=2\n").is_err());
        assert!(KeyValues::parse("novalue\n").is_err());
        assert_eq!(KeyValues::parse(&kv.render()).unwrap(), kv);
    }

    proptest! {
        #[test]
        fn vec_round_trips_bitwise(values in proptest::collection::vec(-1e300f64..1e300, 0..40)) {
            let back = read_vec(&write_vec(&values)).unwrap();
            prop_assert_eq!(back.len(), values.len());
            for (a, b) in back.iter().zip(&values) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
