//! Systems and storage candidates shipped with the crate.
//!
//! | name | system | storage |
//! |---|---|---|
//! | `msd` | mass-spring-damper, velocity output | energy `diag(k, 1)` |
//! | `msd-position` | same dynamics, position output | energy `diag(k, 1)` |
//! | `scalar-example` | `A = −2t/(1+t²)` for `t > 0` | `1 + t²` |
//! | `scalar-lti` | `ẋ = −x + u`, `y = x` | `1` |
//! | `scalar-lti-jump` | `ẋ = −x + u`, `y = x` | `1` then `2` after `t = 1` |
//! | `anti-passive` | `ẋ = −x + u`, `y = −u` | none |
//! | `three-drop` | three decoupled channels | `diag(1, 1 − t, 2 − t)` clipped at zero |

use std::fs;
use std::path::{Path, PathBuf};

use crate::sysfile::{parse_storage, parse_system, StorageDefinition, SystemDefinition};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub system_file: &'static str,
    pub system: &'static str,
    pub storage_file: Option<&'static str>,
    pub storage: Option<&'static str>,
}

macro_rules! corpus_file {
    ($f:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/", $f))
    };
}

const MSD_Q: &str = corpus_file!("msd.q.toml");
const LTI_Q: &str = corpus_file!("scalar_lti.q.toml");

pub const ENTRIES: &[CorpusEntry] = &[
    CorpusEntry {
        name: "msd",
        system_file: "msd.toml",
        system: corpus_file!("msd.toml"),
        storage_file: Some("msd.q.toml"),
        storage: Some(MSD_Q),
    },
    CorpusEntry {
        name: "msd-position",
        system_file: "msd_position.toml",
        system: corpus_file!("msd_position.toml"),
        storage_file: Some("msd.q.toml"),
        storage: Some(MSD_Q),
    },
    CorpusEntry {
        name: "scalar-example",
        system_file: "scalar_example.toml",
        system: corpus_file!("scalar_example.toml"),
        storage_file: Some("scalar_example.q.toml"),
        storage: Some(corpus_file!("scalar_example.q.toml")),
    },
    CorpusEntry {
        name: "scalar-lti",
        system_file: "scalar_lti.toml",
        system: corpus_file!("scalar_lti.toml"),
        storage_file: Some("scalar_lti.q.toml"),
        storage: Some(LTI_Q),
    },
    CorpusEntry {
        name: "scalar-lti-jump",
        system_file: "scalar_lti.toml",
        system: corpus_file!("scalar_lti.toml"),
        storage_file: Some("scalar_lti_jump.q.toml"),
        storage: Some(corpus_file!("scalar_lti_jump.q.toml")),
    },
    CorpusEntry {
        name: "anti-passive",
        system_file: "anti_passive.toml",
        system: corpus_file!("anti_passive.toml"),
        storage_file: None,
        storage: None,
    },
    CorpusEntry {
        name: "three-drop",
        system_file: "three_drop.toml",
        system: corpus_file!("three_drop.toml"),
        storage_file: Some("three_drop.q.toml"),
        storage: Some(corpus_file!("three_drop.q.toml")),
    },
];

pub fn entry(name: &str) -> Result<&'static CorpusEntry> {
    ENTRIES.iter().find(|e| e.name == name).ok_or_else(|| {
        let known: Vec<&str> = ENTRIES.iter().map(|e| e.name).collect();
        Error::InvalidArgument(format!("unknown corpus entry `{name}` (known: {})", known.join(", ")))
    })
}

impl CorpusEntry {
    pub fn load_system(&self) -> Result<SystemDefinition> {
        parse_system(self.system, self.system_file)
    }

    pub fn load_storage(&self) -> Result<Option<StorageDefinition>> {
        match (self.storage, self.storage_file) {
            (Some(text), Some(file)) => parse_storage(text, file).map(Some),
            _ => Ok(None),
        }
    }
}

pub fn system(name: &str) -> Result<SystemDefinition> {
    entry(name)?.load_system()
}

/// Storage definition of an entry; errors if the entry has none.
pub fn storage(name: &str) -> Result<StorageDefinition> {
    entry(name)?
        .load_storage()?
        .ok_or_else(|| Error::InvalidArgument(format!("corpus entry `{name}` has no storage candidate")))
}

/// Writes every corpus file into `dir`.
pub fn write_to(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    for e in ENTRIES {
        let files = [(Some(e.system_file), Some(e.system)), (e.storage_file, e.storage)];
        for (file, text) in files {
            if let (Some(f), Some(t)) = (file, text) {
                let p = dir.join(f);
                if !written.contains(&p) {
                    fs::write(&p, t)?;
                    written.push(p);
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfun::MatrixFunction;

    #[test]
    fn every_entry_parses() {
        for e in ENTRIES {
            let s = e.load_system().unwrap();
            if let Some(q) = e.load_storage().unwrap() {
                assert_eq!(q.q.domain(), s.system.interval(), "{}", e.name);
                assert_eq!(q.q.shape().0, s.system.n(), "{}", e.name);
                q.candidate().unwrap();
            }
        }
    }

    #[test]
    fn msd_spring_jump() {
        let q = storage("msd").unwrap().candidate().unwrap();
        let left = q.function().left_limit(1.0).unwrap()[(0, 0)].re;
        let right = q.function().right_limit(1.0).unwrap()[(0, 0)].re;
        assert_eq!(right - left, -1.0 / 3.0);
    }
}
