//! Coefficient subsets: the contiguous families (first k, last t, centered
//! on index 31), explicit lists, and projection of feature tables.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::{FeatureRow, FeatureTable};
use crate::error::{Error, Result};
use crate::features::AC_COUNT;

/// Sorted, duplicate-free AC indices in `1..=63` with a display name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    indices: Vec<usize>,
    name: String,
}

impl SubsetSpec {
    /// Builds a subset from arbitrary indices (sorted and deduplicated).
    /// An empty result is allowed; training rejects it later.
    pub fn new(name: impl Into<String>, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        if let Some(bad) = indices.iter().find(|i| !(1..=AC_COUNT).contains(*i)) {
            return Err(Error::InvalidSubset(format!("index {bad} outside 1..=63")));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self {
            indices,
            name: name.into(),
        })
    }

    fn range(lo: usize, hi: usize) -> Self {
        Self {
            indices: (lo..=hi).collect(),
            name: format!("{lo}:{hi}"),
        }
    }

    pub fn all() -> Self {
        Self {
            indices: (1..=AC_COUNT).collect(),
            name: "ALL".to_string(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn intersection(&self, other: &SubsetSpec) -> SubsetSpec {
        SubsetSpec {
            indices: self.indices.iter().copied().filter(|&i| other.contains(i)).collect(),
            name: format!("{}&{}", self.name, other.name),
        }
    }

    /// Parses the CLI grammar: `all`, `first:K`, `last:T`, `center:Z`,
    /// `list:1,5,9`, `pos-lime:<file>`, `abs-lime:<file>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("all") {
            return Ok(Self::all());
        }
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::InvalidSubset(format!("unrecognized subset {spec:?}")))?;
        let num = || {
            arg.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidSubset(format!("{kind} expects an integer, got {arg:?}")))
        };
        match kind {
            "first" => first_k(num()?),
            "last" => last_t(num()?),
            "center" => centered(num()?),
            "list" => {
                let idx = arg
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::InvalidSubset(format!("bad index {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let s = Self::new(format!("list:{arg}"), idx)?;
                if s.is_empty() {
                    return Err(Error::InvalidSubset("empty list".into()));
                }
                Ok(s)
            }
            "pos-lime" => crate::lime::subset_from_file(Path::new(arg), crate::lime::LimeSubset::Positive),
            "abs-lime" => crate::lime::subset_from_file(Path::new(arg), crate::lime::LimeSubset::Absolute),
            _ => Err(Error::InvalidSubset(format!("unknown subset family {kind:?}"))),
        }
    }

    /// One index per line.
    pub fn to_lines(&self) -> String {
        self.indices.iter().map(|i| format!("{i}\n")).collect()
    }
}

impl fmt::Display for SubsetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// AC indices `1..=k`, for `2 <= k <= 30`.
pub fn first_k(k: usize) -> Result<SubsetSpec> {
    if !(2..=30).contains(&k) {
        return Err(Error::InvalidSubset(format!("first_k needs 2 <= k <= 30, got {k}")));
    }
    Ok(SubsetSpec::range(1, k))
}

/// AC indices `64-t..=63`, for `2 <= t <= 35`.
pub fn last_t(t: usize) -> Result<SubsetSpec> {
    if !(2..=35).contains(&t) {
        return Err(Error::InvalidSubset(format!("last_t needs 2 <= t <= 35, got {t}")));
    }
    Ok(SubsetSpec::range(64 - t, 63))
}

/// AC indices `31-z..=31+z`, for `1 <= z <= 15`.
pub fn centered(z: usize) -> Result<SubsetSpec> {
    if !(1..=15).contains(&z) {
        return Err(Error::InvalidSubset(format!("centered needs 1 <= z <= 15, got {z}")));
    }
    Ok(SubsetSpec::range(31 - z, 31 + z))
}

/// Every subset of the manual exploration protocol, in protocol order.
pub fn manual_families() -> Vec<SubsetSpec> {
    let mut v = vec![SubsetSpec::all()];
    v.extend((2..=30).map(|k| first_k(k).unwrap()));
    v.extend((2..=35).rev().map(|t| last_t(t).unwrap()));
    v.extend((1..=15).map(|z| centered(z).unwrap()));
    v
}

/// Keeps the columns of `features` named by `subset`, ascending.
pub fn project(features: &FeatureTable, subset: &SubsetSpec) -> Result<FeatureTable> {
    let cols = column_positions(&features.indices, subset)?;
    Ok(FeatureTable {
        indices: subset.indices.clone(),
        rows: features
            .rows
            .iter()
            .map(|r| FeatureRow {
                id: r.id.clone(),
                label: r.label,
                x: cols.iter().map(|&c| r.x[c]).collect(),
            })
            .collect(),
    })
}

/// Positions of `subset`'s indices within a column list.
pub fn column_positions(columns: &[usize], subset: &SubsetSpec) -> Result<Vec<usize>> {
    subset
        .indices
        .iter()
        .map(|i| {
            columns
                .iter()
                .position(|c| c == i)
                .ok_or_else(|| Error::InvalidSubset(format!("index {i} not present in table")))
        })
        .collect()
}
