//! Plain `key = value` configuration text, shared by the CLI config file and
//! the scene-spec file.
//!
//! Lines are trimmed; blank lines and `#` comments are skipped; the first
//! `=` splits key from value. Duplicate keys are rejected so typos cannot
//! silently lose a setting.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Parse `key = value` text into a sorted map.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::malformed(
                format!("config line {}", lineno + 1),
                format!("expected `key = value`, got {line:?}"),
            )
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::malformed(
                format!("config line {}", lineno + 1),
                "empty key",
            ));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::malformed(
                format!("config line {}", lineno + 1),
                format!("duplicate key {key:?}"),
            ));
        }
    }
    Ok(map)
}

/// Look up `key` and parse it as `T`; absent keys yield `Ok(None)`.
pub fn get<T>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
            Error::malformed(format!("config key {key:?}"), format!("{e}: got {raw:?}"))
        }),
    }
}

/// Error for any keys outside the allowed set (typo safety).
pub fn reject_unknown(map: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::malformed(
                format!("config key {key:?}"),
                format!("unknown key; expected one of: {}", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_trimmed_pairs_and_skips_comments() {
        let text = "\n# a comment\n  patch = 50 \nmode=ript\nnote = a = b\n";
        let map = parse_kv(text).unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(map["patch"], "50");
        assert_eq!(map["mode"], "ript");
        // Only the first `=` splits; the rest stays in the value.
        assert_eq!(map["note"], "a = b");
    }

    #[test]
    fn rejects_malformed_lines_and_duplicates() {
        assert!(parse_kv("just words").is_err());
        assert!(parse_kv("= value").is_err());
        assert!(parse_kv("a = 1\na = 2").is_err());
    }

    #[test]
    fn typed_lookup_parses_or_reports_the_key() {
        let map = parse_kv("tol = 1e-6\nmax_iter = oops").unwrap();
        assert_eq!(get::<f64>(&map, "tol").unwrap(), Some(1e-6));
        assert_eq!(get::<f64>(&map, "absent").unwrap(), None);
        let err = get::<usize>(&map, "max_iter").unwrap_err().to_string();
        assert!(err.contains("max_iter"), "unhelpful error: {err}");
    }

    #[test]
    fn unknown_keys_are_listed_in_the_error() {
        let map = parse_kv("patch = 50\ntypo_key = 1").unwrap();
        assert!(reject_unknown(&map, &["patch", "step"]).is_err());
        assert!(reject_unknown(&map, &["patch", "typo_key"]).is_ok());
    }
}
