//! Physical constants and the SI-suffixed number grammar used by config
//! files and the command line.
//!
//! A quantity is written as `<float>[<prefix>][<unit>]`, for example `10mV`,
//! `1nH`, `570Ohm`, `2.5 uA` or `0.25Phi0`. Whitespace between the number and
//! the suffix is allowed.
//!
//! | prefix | factor | | unit            | meaning            |
//! |--------|--------|-|-----------------|--------------------|
//! | `f`    | 1e-15  | | `A`             | ampere             |
//! | `p`    | 1e-12  | | `V`             | volt               |
//! | `n`    | 1e-9   | | `H`             | henry              |
//! | `u`,`µ`| 1e-6   | | `Ohm`,`ohm`,`Ω` | ohm                |
//! | `m`    | 1e-3   | | `Wb`            | weber              |
//! | `k`    | 1e3    | | `Phi0`          | flux quanta (×Φ₀)  |
//! | `M`    | 1e6    | |                 |                    |
//! | `G`    | 1e9    | |                 |                    |
//!
//! The unit symbol is informational except for `Phi0`, which multiplies the
//! value by the SI flux quantum. A lone `m` is always read as milli.

use thiserror::Error;

/// Superconducting flux quantum h/2e in weber.
pub const PHI0_SI: f64 = 2.067833848e-15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse quantity {input:?}: {reason}")]
pub struct QuantityError {
    pub input: String,
    pub reason: &'static str,
}

const UNITS: &[(&str, f64)] = &[
    ("Phi0", PHI0_SI),
    ("Ohm", 1.0),
    ("ohm", 1.0),
    ("Ω", 1.0),
    ("Wb", 1.0),
    ("A", 1.0),
    ("V", 1.0),
    ("H", 1.0),
];

const PREFIXES: &[(&str, i32)] = &[
    ("f", -15),
    ("p", -12),
    ("n", -9),
    ("u", -6),
    ("µ", -6),
    ("μ", -6),
    ("m", -3),
    ("k", 3),
    ("M", 6),
    ("G", 9),
];

/// Parse a number with an optional SI prefix and unit symbol.
pub fn parse_quantity(input: &str) -> Result<f64, QuantityError> {
    let err = |reason| QuantityError {
        input: input.to_string(),
        reason,
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err("empty string"));
    }
    let split = numeric_prefix_len(s);
    if split == 0 {
        return Err(err("missing numeric value"));
    }
    let number = &s[..split];
    number.parse::<f64>().map_err(|_| err("malformed number"))?;
    let mut rest = s[split..].trim_start();

    let mut unit_factor = 1.0;
    for (sym, factor) in UNITS {
        if let Some(head) = rest.strip_suffix(sym) {
            unit_factor = *factor;
            rest = head;
            break;
        }
    }
    let mut exponent = 0;
    if !rest.is_empty() {
        match PREFIXES.iter().find(|(p, _)| *p == rest) {
            Some((_, e)) => exponent = *e,
            None => return Err(err("unknown prefix or unit")),
        }
    }
    // fold the prefix into the decimal exponent so "20uA" is exactly 2e-5
    let (mantissa, own_exp) = match number.find(['e', 'E']) {
        Some(i) => (&number[..i], number[i + 1..].parse::<i32>().map_err(|_| err("malformed number"))?),
        None => (number, 0),
    };
    let value: f64 = format!("{mantissa}e{}", own_exp + exponent)
        .parse()
        .map_err(|_| err("malformed number"))?;
    let out = value * unit_factor;
    if !out.is_finite() {
        return Err(err("value is not finite"));
    }
    Ok(out)
}

// Length of the leading float literal, including an exponent but never
// swallowing a prefix letter such as `m` or `n`.
fn numeric_prefix_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i == digits_start {
        return 0;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_start = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    i
}

/// Serde helper: accepts either a JSON number or an SI-suffixed string.
pub mod quantity {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => super::parse_quantity(&s).map_err(de::Error::custom),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(*v)
    }
}

/// Like [`quantity`] for `Option<f64>` fields.
pub mod opt_quantity {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Raw>::deserialize(d)? {
            None => Ok(None),
            Some(Raw::Num(v)) => Ok(Some(v)),
            Some(Raw::Str(s)) => super::parse_quantity(&s).map(Some).map_err(de::Error::custom),
        }
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_some(v),
            None => s.serialize_none(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
    }

    #[test]
    fn plain_numbers() {
        assert_eq!(parse_quantity("1.5").unwrap(), 1.5);
        assert_eq!(parse_quantity("-2e-3").unwrap(), -2e-3);
        assert_eq!(parse_quantity(" 7 ").unwrap(), 7.0);
    }

    #[test]
    fn prefixes_and_units() {
        assert!(close(parse_quantity("10mV").unwrap(), 10e-3));
        assert!(close(parse_quantity("1nH").unwrap(), 1e-9));
        assert!(close(parse_quantity("570Ohm").unwrap(), 570.0));
        assert!(close(parse_quantity("1kΩ").unwrap(), 1e3));
        assert!(close(parse_quantity("2.5 uA").unwrap(), 2.5e-6));
        assert!(close(parse_quantity("3µA").unwrap(), 3e-6));
        assert!(close(parse_quantity("10pH").unwrap(), 10e-12));
        assert!(close(parse_quantity("1e-3m").unwrap(), 1e-6));
        assert!(close(parse_quantity("0.5Phi0").unwrap(), 0.5 * PHI0_SI));
        assert!(close(parse_quantity("4MOhm").unwrap(), 4e6));
    }

    #[test]
    fn prefix_is_exact() {
        assert_eq!(parse_quantity("20uA").unwrap(), 2e-5);
        assert_eq!(parse_quantity("2.5e-3mV").unwrap(), 2.5e-6);
        assert_eq!(parse_quantity("1.kOhm").unwrap(), 1e3);
    }

    #[test]
    fn exponent_does_not_eat_prefix() {
        // "1e" with no exponent digits is the number 1 followed by garbage
        assert!(parse_quantity("1eV").is_err());
        assert!(close(parse_quantity("1e2mA").unwrap(), 0.1));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_quantity("").is_err());
        assert!(parse_quantity("mV").is_err());
        assert!(parse_quantity("10 xV").is_err());
        assert!(parse_quantity("1.2.3").is_err());
    }
}
