//! Flat `key=value` text: one pair per line, `#` starts a comment line,
//! surrounding whitespace is ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        KvMap::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ParseAtLine {
                    context: "key=value",
                    line: line_no,
                    msg: format!("expected key=value, got '{line}'"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::ParseAtLine {
                    context: "key=value",
                    line: line_no,
                    msg: "empty key".into(),
                });
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::ParseAtLine {
                    context: "key=value",
                    line: line_no,
                    msg: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(KvMap { entries })
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Input(format!("missing key '{key}'")))
    }

    /// Parses `key` if present.
    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Input(format!("bad value '{v}' for '{key}': {e}")))
            })
            .transpose()
    }

    pub fn require_parsed<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get_parsed(key)?
            .ok_or_else(|| Error::Input(format!("missing key '{key}'")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries of `other` override entries of `self`.
    pub fn merged_with(&self, other: &KvMap) -> KvMap {
        let mut entries = self.entries.clone();
        for (k, v) in &other.entries {
            entries.insert(k.clone(), v.clone());
        }
        KvMap { entries }
    }

    /// Sorted by key, one pair per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KvMap::parse("# c\n a = 1 \n\nb=x=y\n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("x=y"));
        assert_eq!(kv.len(), 2);
    }

    #[test]
    fn errors_name_the_line() {
        match KvMap::parse("a=1\nnope\n") {
            Err(Error::ParseAtLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(KvMap::parse("a=1\na=2").is_err());
        assert!(KvMap::parse("=2").is_err());
    }

    #[test]
    fn round_trip_and_merge() {
        let mut kv = KvMap::new();
        kv.insert("z", 1.5);
        kv.insert("a", "x");
        assert_eq!(KvMap::parse(&kv.to_text()).unwrap(), kv);
        let mut over = KvMap::new();
        over.insert("a", "y");
        let merged = kv.merged_with(&over);
        assert_eq!(merged.get("a"), Some("y"));
        assert_eq!(merged.require_parsed::<f64>("z").unwrap(), 1.5);
        assert!(merged.require_parsed::<f64>("a").is_err());
    }
}
