use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::groups::FlagColumn;
use super::table::{ColumnData, Dataset};
use super::{DataError, VariableMatrix};

/// Which variables go where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RoleSpec {
    pub clustering: Vec<String>,
    pub linked: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// A dataset split into clustering space, linked space and extras.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacedDataset {
    pub clustering: VariableMatrix,
    pub linked: VariableMatrix,
    pub extras: VariableMatrix,
    pub labels: Option<Vec<String>>,
    pub flags: Vec<FlagColumn>,
}

impl SpacedDataset {
    pub fn n(&self) -> usize {
        self.clustering.nrows()
    }
}

fn numeric_column(ds: &Dataset, name: &str) -> Result<Vec<f64>, DataError> {
    let col = ds
        .column(name)
        .ok_or_else(|| DataError::UnknownVariable(name.to_string()))?;
    match &col.data {
        ColumnData::Numeric(v) => Ok(v.iter().map(|x| x.unwrap_or(f64::NAN)).collect()),
        ColumnData::Categorical(_) => Err(DataError::NotNumeric(name.to_string())),
    }
}

fn extract(ds: &Dataset, names: &[String]) -> Result<VariableMatrix, DataError> {
    let cols = names
        .iter()
        .map(|n| numeric_column(ds, n))
        .collect::<Result<Vec<_>, _>>()?;
    let values = DMatrix::from_fn(ds.n_rows(), names.len(), |i, j| cols[j][i]);
    Ok(VariableMatrix {
        names: names.to_vec(),
        values,
    })
}

/// Splits `ds` into spaces according to `spec` and imputes missing cells.
///
/// Numeric columns not named in either space (and not the label) become
/// extras; extras with no observed value at all are dropped.
pub fn assign_roles(ds: &Dataset, spec: &RoleSpec) -> Result<SpacedDataset, DataError> {
    if spec.clustering.is_empty() {
        return Err(DataError::EmptySpace("clustering"));
    }
    if spec.linked.is_empty() {
        return Err(DataError::EmptySpace("linked"));
    }
    let mut seen = HashSet::new();
    for name in &spec.clustering {
        if !seen.insert(name.as_str()) {
            return Err(DataError::RepeatedVariable(name.clone()));
        }
    }
    let mut seen_linked = HashSet::new();
    for name in &spec.linked {
        if seen.contains(name.as_str()) {
            return Err(DataError::OverlappingRoles(name.clone()));
        }
        if !seen_linked.insert(name.as_str()) {
            return Err(DataError::RepeatedVariable(name.clone()));
        }
    }

    let clustering = impute_missing(&extract(ds, &spec.clustering)?)?;
    let linked = impute_missing(&extract(ds, &spec.linked)?)?;

    let extra_names: Vec<String> = ds
        .columns()
        .iter()
        .filter(|c| {
            matches!(&c.data, ColumnData::Numeric(v) if v.iter().any(Option::is_some))
                && !seen.contains(c.name.as_str())
                && !seen_linked.contains(c.name.as_str())
                && spec.label.as_deref() != Some(c.name.as_str())
        })
        .map(|c| c.name.clone())
        .collect();
    let extras = impute_missing(&extract(ds, &extra_names)?)?;

    let labels = match &spec.label {
        Some(name) => {
            let col = ds
                .column(name)
                .ok_or_else(|| DataError::UnknownVariable(name.clone()))?;
            Some((0..ds.n_rows()).map(|i| col.data.text(i)).collect())
        }
        None => None,
    };

    let flags = spec
        .flags
        .iter()
        .map(|name| {
            let col = ds
                .column(name)
                .ok_or_else(|| DataError::UnknownVariable(name.clone()))?;
            Ok(FlagColumn {
                name: name.clone(),
                values: (0..ds.n_rows()).map(|i| col.data.text(i)).collect(),
            })
        })
        .collect::<Result<Vec<_>, DataError>>()?;

    Ok(SpacedDataset {
        clustering,
        linked,
        extras,
        labels,
        flags,
    })
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Replaces missing (`NaN`) cells by the median of the observed values in
/// the same column.
pub fn impute_missing(m: &VariableMatrix) -> Result<VariableMatrix, DataError> {
    let mut values = m.values.clone();
    for (j, name) in m.names.iter().enumerate() {
        let mut col = values.column_mut(j);
        if !col.iter().any(|x| x.is_nan()) {
            continue;
        }
        let mut observed: Vec<f64> = col.iter().copied().filter(|x| !x.is_nan()).collect();
        if observed.is_empty() {
            return Err(DataError::AllMissing(name.clone()));
        }
        observed.sort_by(f64::total_cmp);
        let fill = median(&observed);
        col.iter_mut().filter(|x| x.is_nan()).for_each(|x| *x = fill);
    }
    Ok(VariableMatrix {
        names: m.names.clone(),
        values,
    })
}
