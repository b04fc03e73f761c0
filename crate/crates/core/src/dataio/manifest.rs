use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv;

pub const DEFAULT_SAMPLE_RATE: f64 = 25_600.0;
pub const DEFAULT_CADENCE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Channel {
    #[default]
    Horizontal,
    Vertical,
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "h" => Ok(Channel::Horizontal),
            "vertical" | "v" => Ok(Channel::Vertical),
            _ => Err(Error::Config(format!("unknown channel {s:?}"))),
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Channel::Horizontal => "horizontal",
            Channel::Vertical => "vertical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BearingRole {
    Train,
    Test,
}

impl std::fmt::Display for BearingRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BearingRole::Train => "train",
            BearingRole::Test => "test",
        })
    }
}

/// Which bearings train and test each operating condition, and where their
/// records live.
///
/// ```text
/// root = data
/// channel = horizontal
/// train.1 = 1_1, 1_2
/// test.1 = 1_3, 1_4
/// truth.1_3 = 5730
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub sample_rate: f64,
    pub cadence: f64,
    pub channel: Channel,
    pub train: BTreeMap<u8, Vec<String>>,
    pub test: BTreeMap<u8, Vec<String>>,
    /// Ground-truth RUL at truncation for testing bearings, when known.
    pub truth: BTreeMap<String, f64>,
}

impl DatasetManifest {
    pub fn empty(root: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            root: root.into(),
            sample_rate: DEFAULT_SAMPLE_RATE,
            cadence: DEFAULT_CADENCE,
            channel: Channel::Horizontal,
            train: BTreeMap::new(),
            test: BTreeMap::new(),
            truth: BTreeMap::new(),
        }
    }

    /// Parses manifest text. A relative `root` is resolved against `base`.
    pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Self> {
        let mut m = DatasetManifest::empty(base);
        for e in kv::parse(text, origin)? {
            let at = |msg: String| Error::Config(format!("{}:{}: {msg}", origin.display(), e.line));
            match e.key.as_str() {
                "root" => m.root = base.join(&e.value),
                "sample_rate" => m.sample_rate = kv::parse_value(&e, origin)?,
                "cadence" => m.cadence = kv::parse_value(&e, origin)?,
                "channel" => m.channel = e.value.parse().map_err(|_| at(format!("unknown channel {:?}", e.value)))?,
                key => {
                    let (kind, rest) = key
                        .split_once('.')
                        .ok_or_else(|| at(format!("unknown key {key:?}")))?;
                    match kind {
                        "train" | "test" => {
                            let cond: u8 = rest
                                .parse()
                                .map_err(|_| at(format!("invalid operating condition {rest:?}")))?;
                            let ids = e
                                .value
                                .split(',')
                                .map(str::trim)
                                .filter(|s| !s.is_empty())
                                .map(String::from);
                            let map = if kind == "train" { &mut m.train } else { &mut m.test };
                            map.entry(cond).or_default().extend(ids);
                        }
                        "truth" => {
                            let y: f64 = kv::parse_value(&e, origin)?;
                            m.truth.insert(rest.to_string(), y);
                        }
                        _ => return Err(at(format!("unknown key {key:?}"))),
                    }
                }
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("manifest not found: {}", path.display())),
            _ => Error::io(path, e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !(self.cadence > 0.0) {
            return Err(Error::Config("sample_rate and cadence must be positive".into()));
        }
        let mut seen = BTreeMap::new();
        for (role, map) in [(BearingRole::Train, &self.train), (BearingRole::Test, &self.test)] {
            for ids in map.values() {
                for id in ids {
                    if let Some(prev) = seen.insert(id.clone(), role) {
                        return Err(Error::Config(if prev == role {
                            format!("bearing {id} listed twice")
                        } else {
                            format!("bearing {id} is listed for both training and testing")
                        }));
                    }
                }
            }
        }
        for (id, &y) in &self.truth {
            if !(y > 0.0) {
                return Err(Error::Config(format!("ground truth for {id} must be positive")));
            }
        }
        Ok(())
    }

    /// Every bearing as `(condition, role, id)` in condition, role, listing order.
    pub fn bearings(&self) -> Vec<(u8, BearingRole, String)> {
        let mut out = Vec::new();
        let conds: std::collections::BTreeSet<u8> = self.train.keys().chain(self.test.keys()).copied().collect();
        for c in conds {
            for (role, map) in [(BearingRole::Train, &self.train), (BearingRole::Test, &self.test)] {
                for id in map.get(&c).into_iter().flatten() {
                    out.push((c, role, id.clone()));
                }
            }
        }
        out
    }

    pub fn find(&self, id: &str) -> Option<(u8, BearingRole)> {
        self.bearings()
            .into_iter()
            .find(|(_, _, b)| b == id)
            .map(|(c, r, _)| (c, r))
    }

    pub fn test_bearings(&self) -> Vec<String> {
        self.bearings()
            .into_iter()
            .filter(|(_, r, _)| *r == BearingRole::Test)
            .map(|(_, _, id)| id)
            .collect()
    }

    /// Serializes with `root` written relative to the manifest's directory.
    pub fn to_text(&self, root: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "root = {root}");
        let _ = writeln!(s, "sample_rate = {}", self.sample_rate);
        let _ = writeln!(s, "cadence = {}", self.cadence);
        let _ = writeln!(s, "channel = {}", self.channel);
        for (kind, map) in [("train", &self.train), ("test", &self.test)] {
            for (c, ids) in map {
                let _ = writeln!(s, "{kind}.{c} = {}", ids.join(", "));
            }
        }
        for (id, y) in &self.truth {
            let _ = writeln!(s, "truth.{id} = {y}");
        }
        s
    }
}
