//! `key=value` text files with `#` comments.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str, origin: &Path) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected key=value, got {line:?}",
                origin.display(),
                i + 1
            )));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("{}:{}: empty key", origin.display(), i + 1)));
        }
        out.push(Entry {
            key: key.to_string(),
            value: v.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

pub fn parse_value<T: std::str::FromStr>(entry: &Entry, origin: &Path) -> Result<T> {
    entry.value.parse().map_err(|_| {
        Error::Config(format!(
            "{}:{}: invalid value {:?} for {}",
            origin.display(),
            entry.line,
            entry.value,
            entry.key
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks() {
        let e = parse("# head\n a = 1 # tail\n\nb=x=y\n", Path::new("m")).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].key.as_str(), e[0].value.as_str(), e[0].line), ("a", "1", 2));
        assert_eq!(e[1].value, "x=y");
    }

    #[test]
    fn missing_equals_names_line() {
        let err = parse("a=1\nbogus\n", Path::new("cfg.txt")).unwrap_err().to_string();
        assert!(err.contains("cfg.txt:2"), "{err}");
    }
}
