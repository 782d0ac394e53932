use std::collections::HashSet;

use super::DataError;

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnData::Numeric(_))
    }

    /// Cell `i` rendered as text; missing cells render as `NA`.
    pub fn text(&self, i: usize) -> String {
        match self {
            ColumnData::Numeric(v) => v[i].map_or_else(|| "NA".to_string(), |x| x.to_string()),
            ColumnData::Categorical(v) => v[i].clone().unwrap_or_else(|| "NA".to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

/// Raw table before any role assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_rows: usize,
    columns: Vec<Column>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self, DataError> {
        let n_rows = columns.first().map_or(0, |c| c.data.len());
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::DuplicateColumn(c.name.clone()));
            }
            if c.data.len() != n_rows {
                return Err(DataError::ColumnLength {
                    name: c.name.clone(),
                    found: c.data.len(),
                    expected: n_rows,
                });
            }
        }
        Ok(Self { n_rows, columns })
    }

    /// Parses comma-separated UTF-8 text with a header row.
    ///
    /// A column is numeric when every non-missing cell parses as a finite
    /// number. Empty cells and `NA` are missing.
    pub fn parse_csv(raw: &[u8]) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(raw);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| DataError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(DataError::MissingHeader);
        }
        let width = header.len();

        let mut cells: Vec<Vec<String>> = vec![Vec::new(); width];
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
            if record.len() != width {
                return Err(DataError::Ragged {
                    row: i + 1,
                    found: record.len(),
                    expected: width,
                });
            }
            for (j, cell) in record.iter().enumerate() {
                cells[j].push(cell.to_string());
            }
        }
        if cells[0].is_empty() {
            return Err(DataError::NoRows);
        }

        let columns = header
            .into_iter()
            .zip(cells)
            .map(|(name, raw)| Column {
                name,
                data: classify(raw),
            })
            .collect();
        Self::new(columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }
}

fn classify(raw: Vec<String>) -> ColumnData {
    let parsed: Option<Vec<Option<f64>>> = raw
        .iter()
        .map(|cell| {
            if is_missing(cell) {
                Some(None)
            } else {
                cell.parse::<f64>().ok().filter(|x| x.is_finite()).map(Some)
            }
        })
        .collect();
    match parsed {
        Some(values) => ColumnData::Numeric(values),
        None => ColumnData::Categorical(
            raw.into_iter()
                .map(|cell| if is_missing(&cell) { None } else { Some(cell) })
                .collect(),
        ),
    }
}
