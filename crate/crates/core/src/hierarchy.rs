//! Two-level label hierarchy: every subclass belongs to exactly one
//! superclass. Ids are dense (`0..num_subclasses`, `0..num_superclasses`).
//!
//! On disk the hierarchy is line-oriented text, one
//! `subclass_name<TAB>superclass_name` pair per line (`.hier`). Subclass ids
//! follow line order; superclass ids follow first appearance.

use crate::error::{Error, Result};
use crate::numeric::fnv1a64;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelHierarchy {
    subclass_names: Vec<String>,
    superclass_of: Vec<usize>,
    superclass_names: Vec<String>,
}

impl LabelHierarchy {
    pub fn new(
        subclass_names: Vec<String>,
        superclass_of: Vec<usize>,
        superclass_names: Vec<String>,
    ) -> Result<Self> {
        if subclass_names.is_empty() {
            return Err(Error::Format {
                what: "hierarchy",
                detail: "no subclasses".into(),
            });
        }
        if subclass_names.len() != superclass_of.len() {
            return Err(Error::Format {
                what: "hierarchy",
                detail: format!(
                    "{} subclass names but {} superclass assignments",
                    subclass_names.len(),
                    superclass_of.len()
                ),
            });
        }
        for (c, &m) in superclass_of.iter().enumerate() {
            if m >= superclass_names.len() {
                return Err(Error::Format {
                    what: "hierarchy",
                    detail: format!("subclass {c} maps to unknown superclass id {m}"),
                });
            }
        }
        // dense superclass ids: every id must be used
        for m in 0..superclass_names.len() {
            if !superclass_of.contains(&m) {
                return Err(Error::Format {
                    what: "hierarchy",
                    detail: format!("superclass id {m} has no subclasses"),
                });
            }
        }
        Ok(Self {
            subclass_names,
            superclass_of,
            superclass_names,
        })
    }

    pub fn num_subclasses(&self) -> usize {
        self.subclass_names.len()
    }

    pub fn num_superclasses(&self) -> usize {
        self.superclass_names.len()
    }

    pub fn superclass_of(&self, subclass: usize) -> usize {
        self.superclass_of[subclass]
    }

    pub fn subclass_name(&self, subclass: usize) -> &str {
        &self.subclass_names[subclass]
    }

    pub fn superclass_name(&self, superclass: usize) -> &str {
        &self.superclass_names[superclass]
    }

    pub fn subclasses_of(&self, superclass: usize) -> Vec<usize> {
        (0..self.num_subclasses())
            .filter(|&c| self.superclass_of[c] == superclass)
            .collect()
    }

    /// Sibling subclasses: same superclass, different subclass.
    pub fn siblings_of(&self, subclass: usize) -> Vec<usize> {
        let m = self.superclass_of[subclass];
        (0..self.num_subclasses())
            .filter(|&c| c != subclass && self.superclass_of[c] == m)
            .collect()
    }

    /// The hierarchy loss needs a non-empty positive set for every anchor:
    /// at least 2 subclasses per superclass.
    pub fn validate_for_hierarchy_loss(&self) -> Result<()> {
        for m in 0..self.num_superclasses() {
            let subs = self.subclasses_of(m);
            if subs.len() < 2 {
                return Err(Error::NoSiblings { class: subs[0] });
            }
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (c, name) in self.subclass_names.iter().enumerate() {
            out.push_str(name);
            out.push('\t');
            out.push_str(&self.superclass_names[self.superclass_of[c]]);
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut subclass_names = Vec::new();
        let mut superclass_of = Vec::new();
        let mut superclass_names: Vec<String> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (sub, sup) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => (a, b),
                _ => {
                    return Err(Error::Format {
                        what: "hierarchy file",
                        detail: format!("line {}: expected `subclass<TAB>superclass`", lineno + 1),
                    })
                }
            };
            if subclass_names.iter().any(|n| n == sub) {
                return Err(Error::Format {
                    what: "hierarchy file",
                    detail: format!("line {}: duplicate subclass `{sub}`", lineno + 1),
                });
            }
            let sup_id = match superclass_names.iter().position(|n| n == sup) {
                Some(i) => i,
                None => {
                    superclass_names.push(sup.to_string());
                    superclass_names.len() - 1
                }
            };
            subclass_names.push(sub.to_string());
            superclass_of.push(sup_id);
        }
        Self::new(subclass_names, superclass_of, superclass_names)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }

    /// Stable checksum over the canonical TSV form, embedded in `.pbank`
    /// headers to bind a prototype bank to its hierarchy.
    pub fn checksum(&self) -> u64 {
        fnv1a64(self.to_tsv().as_bytes())
    }
}
