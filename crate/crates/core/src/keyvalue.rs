//! `key = value` configuration text with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed key/value pairs. Every key must be consumed through [`take`](Self::take)
/// before [`finish`](Self::finish), which rejects leftovers as unknown keys.
#[derive(Debug, Default)]
pub struct KeyValues {
    source: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValues {
    pub fn parse(source: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, i + 1, format!("expected `key = value`, got {line:?}")))?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), (v.trim().to_string(), i + 1)).is_some() {
                return Err(Error::parse(source, i + 1, format!("duplicate key {k:?}")));
            }
        }
        Ok(KeyValues {
            source: source.to_string(),
            entries,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    /// Overrides (or adds) a key, e.g. from a command-line flag.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::parse(&self.source, line, format!("{key}: {e}"))),
        }
    }

    /// Parses a comma-separated triple such as `0.6,0.6,0.03`.
    pub fn take_triple<T: FromStr + Copy>(&mut self, key: &str) -> Result<Option<[T; 3]>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => parse_triple(&v)
                .map(Some)
                .map_err(|e| Error::parse(&self.source, line, format!("{key}: {e}"))),
        }
    }

    pub fn finish(self) -> Result<()> {
        if let Some((k, (_, line))) = self.entries.into_iter().next() {
            return Err(Error::parse(self.source, line, format!("unknown key {k:?}")));
        }
        Ok(())
    }
}

pub fn parse_triple<T: FromStr + Copy>(s: &str) -> std::result::Result<[T; 3], String>
where
    T::Err: std::fmt::Display,
{
    let parts: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        &[a, b, c] => Ok([a, b, c]),
        _ => Err(format!("expected three comma-separated values, got {s:?}")),
    }
}

pub fn format_triple<T: std::fmt::Display>(v: &[T; 3]) -> String {
    format!("{},{},{}", v[0], v[1], v[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_consumes() {
        let mut kv = KeyValues::parse("cfg", "# header\nalpha = 0.6 # comment\n\nwindow = 4, 3, 1\n").unwrap();
        assert_eq!(kv.take::<f64>("alpha").unwrap(), Some(0.6));
        assert_eq!(kv.take_triple::<usize>("window").unwrap(), Some([4, 3, 1]));
        assert_eq!(kv.take::<f64>("missing").unwrap(), None);
        kv.finish().unwrap();
    }

    #[test]
    fn unknown_key_is_an_error() {
        let kv = KeyValues::parse("cfg", "alpah = 0.6\n").unwrap();
        let err = kv.finish().unwrap_err().to_string();
        assert!(err.contains("alpah") && err.contains("cfg:1"), "{err}");
    }

    #[test]
    fn malformed_lines() {
        assert!(KeyValues::parse("cfg", "just words\n").is_err());
        assert!(KeyValues::parse("cfg", "a = 1\na = 2\n").is_err());
        let mut kv = KeyValues::parse("cfg", "n = x\n").unwrap();
        assert!(kv.take::<usize>("n").is_err());
    }
}
