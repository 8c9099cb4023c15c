//! Bundled algorithm transcriptions with golden verdicts.
//!
//! The hand-written files live under `corpus/` at the workspace root and are
//! embedded at build time together with `manifest.json`. Threshold grids are
//! generated from one template, see [`grid`].

pub mod grid;

use std::sync::OnceLock;

use serde::Deserialize;
use thiserror::Error;

use crate::dsl::{parse, ParseError};
use crate::model::{Fragment, Instance, Outcome};

pub use grid::{
    crossval_family, grid_values, impossibility_grid, impossibility_values, one_third_entries, one_third_oracle,
    one_third_text, GridPoint, PredicateShape,
};

const MANIFEST: &str = include_str!("../../../../corpus/manifest.json");

const FILES: &[(&str, &str)] = &[
    ("onethird-2-3.ho", include_str!("../../../../corpus/onethird-2-3.ho")),
    ("onethird-1-2_3-4.ho", include_str!("../../../../corpus/onethird-1-2_3-4.ho")),
    ("onethird-1-2_2-3.ho", include_str!("../../../../corpus/onethird-1-2_2-3.ho")),
    ("ts-three-round.ho", include_str!("../../../../corpus/ts-three-round.ho")),
    ("ts-three-round-weak.ho", include_str!("../../../../corpus/ts-three-round-weak.ho")),
    ("ts-four-round.ho", include_str!("../../../../corpus/ts-four-round.ho")),
    ("paxos-4round.ho", include_str!("../../../../corpus/paxos-4round.ho")),
    ("paxos-4round-1-3.ho", include_str!("../../../../corpus/paxos-4round-1-3.ho")),
    ("paxos-3round.ho", include_str!("../../../../corpus/paxos-3round.ho")),
    ("paxos-3round-1-3.ho", include_str!("../../../../corpus/paxos-3round-1-3.ho")),
    ("coord-3round.ho", include_str!("../../../../corpus/coord-3round.ho")),
    ("weak-unifier.ho", include_str!("../../../../corpus/weak-unifier.ho")),
    ("onethird-no-uni-round2.ho", include_str!("../../../../corpus/onethird-no-uni-round2.ho")),
    ("onethird-no-mult-round1.ho", include_str!("../../../../corpus/onethird-no-mult-round1.ho")),
    ("onethird-min-round1.ho", include_str!("../../../../corpus/onethird-min-round1.ho")),
    ("onethird-reordered.ho", include_str!("../../../../corpus/onethird-reordered.ho")),
    ("onethird-unifier-only.ho", include_str!("../../../../corpus/onethird-unifier-only.ho")),
    ("onethird-global-eq.ho", include_str!("../../../../corpus/onethird-global-eq.ho")),
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("manifest names `{0}`, which is not bundled")]
    MissingFile(String),
    #[error("{id}: {source}")]
    Parse { id: String, source: ParseError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: String,
    /// Path relative to the workspace root; `grid/<id>.ho` for generated entries.
    pub file: String,
    pub fragment: Fragment,
    pub expected: Outcome,
    /// Expected reason codes, in checker order.
    pub reasons: Vec<String>,
    /// Which published algorithm or claim the entry transcribes.
    pub anchor: String,
    pub source: String,
}

impl CorpusEntry {
    pub fn instance(&self) -> Result<Instance, CorpusError> {
        parse(&self.source).map_err(|source| CorpusError::Parse { id: self.id.clone(), source })
    }

    pub fn is_generated(&self) -> bool {
        self.file.starts_with("grid/")
    }
}

#[derive(Deserialize)]
struct Manifest {
    #[allow(dead_code)]
    schema_version: u32,
    entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct ManifestEntry {
    id: String,
    file: String,
    fragment: Fragment,
    expected: Outcome,
    reasons: Vec<String>,
    anchor: String,
}

pub fn bundled_file(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(f, _)| *f == name).map(|(_, s)| *s)
}

fn load_bundled() -> Result<Vec<CorpusEntry>, CorpusError> {
    let m: Manifest = serde_json::from_str(MANIFEST)?;
    m.entries
        .into_iter()
        .map(|e| {
            let source = bundled_file(&e.file).ok_or_else(|| CorpusError::MissingFile(e.file.clone()))?;
            Ok(CorpusEntry {
                id: e.id,
                file: format!("corpus/{}", e.file),
                fragment: e.fragment,
                expected: e.expected,
                reasons: e.reasons,
                anchor: e.anchor,
                source: source.to_string(),
            })
        })
        .collect()
}

/// Hand-written entries in manifest order.
pub fn bundled() -> &'static [CorpusEntry] {
    static CELL: OnceLock<Vec<CorpusEntry>> = OnceLock::new();
    CELL.get_or_init(|| load_bundled().expect("bundled manifest is consistent"))
}

/// Hand-written entries followed by the stamped two-round OneThird grid.
pub fn corpus_entries() -> Vec<CorpusEntry> {
    let mut v = bundled().to_vec();
    v.extend(one_third_entries());
    v
}

pub fn find(id: &str) -> Option<CorpusEntry> {
    bundled().iter().find(|e| e.id == id).cloned().or_else(|| one_third_entries().into_iter().find(|e| e.id == id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verdict::check_consensus;

    #[test]
    fn manifest_covers_every_file() {
        let b = bundled();
        assert_eq!(b.len(), FILES.len());
        for (f, _) in FILES {
            assert!(b.iter().any(|e| e.file == format!("corpus/{f}")), "{f} missing from manifest");
        }
        let mut ids: Vec<&str> = b.iter().map(|e| e.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), b.len());
    }

    #[test]
    fn file_names_match_ids() {
        for e in bundled() {
            assert_eq!(e.file, format!("corpus/{}.ho", e.id));
            assert_eq!(e.instance().unwrap().alg().name(), e.id);
        }
    }

    #[test]
    fn golden_verdicts() {
        for e in corpus_entries() {
            let inst = e.instance().unwrap();
            let (v, t) = check_consensus(&inst);
            assert_eq!(v.outcome(), e.expected, "{}", e.id);
            let got: Vec<String> = v.reasons().iter().map(|r| r.code()).collect();
            if !e.is_generated() {
                assert_eq!(got, e.reasons, "{}", e.id);
            }
            assert_eq!(t.detected_fragment, e.fragment, "{}", e.id);
        }
    }

    #[test]
    fn required_entries_present() {
        let want = [
            ("onethird-2-3", Outcome::Accept),
            ("onethird-1-2_3-4", Outcome::Accept),
            ("onethird-1-2_2-3", Outcome::Reject),
            ("ts-three-round", Outcome::Accept),
            ("ts-three-round-weak", Outcome::Accept),
            ("ts-four-round", Outcome::Accept),
            ("paxos-4round", Outcome::Accept),
            ("paxos-3round", Outcome::Accept),
            ("paxos-3round-1-3", Outcome::Accept),
            ("coord-3round", Outcome::Accept),
            ("onethird-no-uni-round2", Outcome::Reject),
        ];
        for (id, o) in want {
            assert_eq!(find(id).unwrap_or_else(|| panic!("{id}")).expected, o);
        }
        assert_eq!(corpus_entries().iter().filter(|e| e.is_generated()).count(), 216);
    }
}
