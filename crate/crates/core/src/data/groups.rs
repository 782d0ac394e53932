use std::collections::BTreeMap;

use super::DataError;

/// Categorical palettes distinguish at most this many groups.
pub const MAX_GROUPS: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlagColumn {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    /// 1-based group of each observation.
    pub group_of: Vec<usize>,
    pub group_names: Vec<String>,
}

impl GroupAssignment {
    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }
}

/// Combines flag columns into one group per observed combination.
pub fn cross_groups(flags: &[FlagColumn]) -> Result<GroupAssignment, DataError> {
    let first = flags.first().ok_or(DataError::NoFlags)?;
    let n = first.values.len();
    if let Some(bad) = flags.iter().find(|f| f.values.len() != n) {
        return Err(DataError::ColumnLength {
            name: bad.name.clone(),
            found: bad.values.len(),
            expected: n,
        });
    }
    let tuples: Vec<Vec<&str>> = (0..n)
        .map(|i| flags.iter().map(|f| f.values[i].as_str()).collect())
        .collect();
    let mut index: BTreeMap<&[&str], usize> = tuples.iter().map(|t| (t.as_slice(), 0)).collect();
    if index.len() > MAX_GROUPS {
        return Err(DataError::TooManyGroups(index.len()));
    }
    let mut group_names = Vec::with_capacity(index.len());
    for (g, (key, slot)) in index.iter_mut().enumerate() {
        *slot = g + 1;
        group_names.push(key.join("/"));
    }
    let group_of = tuples.iter().map(|t| index[t.as_slice()]).collect();
    Ok(GroupAssignment {
        group_of,
        group_names,
    })
}
