use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary outcomes of `models x items`, stored row-major. `None` marks a
/// model that was never evaluated on an item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    model_ids: Vec<String>,
    item_ids: Vec<String>,
    cells: Vec<Option<bool>>,
}

impl ResponseMatrix {
    /// Builds a matrix, checking only that the dimensions agree. Content
    /// problems are reported by [`validate_matrix`].
    pub fn new(model_ids: Vec<String>, item_ids: Vec<String>, cells: Vec<Option<bool>>) -> Result<Self> {
        if cells.len() != model_ids.len() * item_ids.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} cells for {} models x {} items",
                cells.len(),
                model_ids.len(),
                item_ids.len()
            )));
        }
        Ok(Self {
            model_ids,
            item_ids,
            cells,
        })
    }

    pub fn from_rows(model_ids: Vec<String>, item_ids: Vec<String>, rows: Vec<Vec<Option<bool>>>) -> Result<Self> {
        if rows.len() != model_ids.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} rows for {} models",
                rows.len(),
                model_ids.len()
            )));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != item_ids.len()) {
            return Err(Error::InvalidMatrix(format!(
                "row {} (model `{}`) has {} cells, expected {}",
                i + 1,
                model_ids[i],
                row.len(),
                item_ids.len()
            )));
        }
        Self::new(model_ids, item_ids, rows.into_iter().flatten().collect())
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn get(&self, model: usize, item: usize) -> Option<bool> {
        self.cells[model * self.item_ids.len() + item]
    }

    pub fn row(&self, model: usize) -> &[Option<bool>] {
        let l = self.item_ids.len();
        &self.cells[model * l..(model + 1) * l]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<bool>]> {
        (0..self.n_models()).map(|i| self.row(i))
    }

    pub fn column(&self, item: usize) -> impl Iterator<Item = Option<bool>> + '_ {
        (0..self.n_models()).map(move |i| self.get(i, item))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    DuplicateModelId,
    DuplicateItemId,
    EmptyRow,
    EmptyColumn,
    ConstantColumn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// Zero-based row and its model id.
    Row(usize, String),
    /// Zero-based column and its item id.
    Column(usize, String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Row(i, id) => write!(f, "row {} (model `{id}`)", i + 1),
            Location::Column(j, id) => write!(f, "column {} (item `{id}`)", j + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub kind: FindingKind,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}: {}: {}", self.location, self.message)
    }
}

/// Structural and content checks. Duplicate ids and empty rows or columns
/// are errors; columns with a single observed outcome are warnings (such
/// items are still fitted, they just end up at the edge of the scale).
pub fn validate_matrix(matrix: &ResponseMatrix) -> Vec<Finding> {
    let mut findings = Vec::new();

    let mut seen = HashSet::new();
    for (i, id) in matrix.model_ids.iter().enumerate() {
        if !seen.insert(id.as_str()) {
            findings.push(Finding {
                severity: Severity::Error,
                kind: FindingKind::DuplicateModelId,
                location: Location::Row(i, id.clone()),
                message: format!("duplicate model id `{id}`"),
            });
        }
    }
    let mut seen = HashSet::new();
    for (j, id) in matrix.item_ids.iter().enumerate() {
        if !seen.insert(id.as_str()) {
            findings.push(Finding {
                severity: Severity::Error,
                kind: FindingKind::DuplicateItemId,
                location: Location::Column(j, id.clone()),
                message: format!("duplicate item id `{id}`"),
            });
        }
    }

    for (i, row) in matrix.rows().enumerate() {
        if row.iter().all(Option::is_none) {
            let id = &matrix.model_ids[i];
            findings.push(Finding {
                severity: Severity::Error,
                kind: FindingKind::EmptyRow,
                location: Location::Row(i, id.clone()),
                message: format!("model `{id}` has no observed responses"),
            });
        }
    }

    for (j, id) in matrix.item_ids.iter().enumerate() {
        let (mut correct, mut observed) = (0usize, 0usize);
        for cell in matrix.column(j).flatten() {
            observed += 1;
            correct += usize::from(cell);
        }
        if observed == 0 {
            findings.push(Finding {
                severity: Severity::Error,
                kind: FindingKind::EmptyColumn,
                location: Location::Column(j, id.clone()),
                message: format!("item `{id}` has no observed responses"),
            });
        } else if correct == 0 || correct == observed {
            let outcome = if correct == 0 { "incorrect" } else { "correct" };
            findings.push(Finding {
                severity: Severity::Warning,
                kind: FindingKind::ConstantColumn,
                location: Location::Column(j, id.clone()),
                message: format!("item `{id}` answered {outcome} by all {observed} models"),
            });
        }
    }

    findings
}
