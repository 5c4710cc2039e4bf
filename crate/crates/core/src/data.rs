//! Categorical data sets with a missingness mask and a ledger of hidden values.
//!
//! CSV layout: a header of node names, one record per line, state labels in
//! cells and a literal `?` for missing values. The ledger CSV has the columns
//! `row_index,column_name,true_state`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::network::DiscreteBayesNet;

pub const MISSING: &str = "?";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("state {state} out of range for column `{column}`")]
    InvalidState { column: String, state: usize },
    #[error("expected {expected} cells, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("column `{0}` is not a network node")]
    UnknownColumn(String),
    #[error("network node `{0}` has no column")]
    MissingColumn(String),
}

/// One hidden cell and the value it held before amputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LedgerEntry {
    pub row: usize,
    pub column: usize,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSet {
    columns: Vec<String>,
    cardinalities: Vec<usize>,
    cells: Vec<Option<usize>>,
    ledger: Vec<LedgerEntry>,
}

impl DataSet {
    /// Row-major cells; `None` marks a missing value.
    pub fn from_cells(
        columns: Vec<String>,
        cardinalities: Vec<usize>,
        cells: Vec<Option<usize>>,
    ) -> Result<Self, DataError> {
        let width = columns.len();
        assert_eq!(width, cardinalities.len());
        if width == 0 {
            if !cells.is_empty() {
                return Err(DataError::Shape { expected: 0, got: cells.len() });
            }
        } else if cells.len() % width != 0 {
            return Err(DataError::Shape {
                expected: cells.len().div_ceil(width) * width,
                got: cells.len(),
            });
        }
        for (i, cell) in cells.iter().enumerate() {
            if let Some(s) = *cell {
                let c = i % width;
                if s >= cardinalities[c] {
                    return Err(DataError::InvalidState { column: columns[c].clone(), state: s });
                }
            }
        }
        Ok(DataSet { columns, cardinalities, cells, ledger: Vec::new() })
    }

    /// Complete data set from full assignments.
    pub fn from_rows(
        columns: Vec<String>,
        cardinalities: Vec<usize>,
        rows: &[Vec<usize>],
    ) -> Result<Self, DataError> {
        let cells = rows.iter().flatten().map(|&s| Some(s)).collect();
        DataSet::from_cells(columns, cardinalities, cells)
    }

    pub fn empty_like(bn: &DiscreteBayesNet) -> Self {
        DataSet::from_cells(bn.dag().names().to_vec(), bn.cardinalities().to_vec(), Vec::new())
            .expect("empty data set is well formed")
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.cells.len() / self.columns.len()
        }
    }

    pub fn total_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn row(&self, r: usize) -> &[Option<usize>] {
        let w = self.n_cols();
        &self.cells[r * w..(r + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<usize>]> {
        self.cells.chunks(self.n_cols().max(1))
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Option<usize> {
        self.cells[r * self.n_cols() + c]
    }

    /// The row as a full assignment, if nothing in it is missing.
    pub fn complete_row(&self, r: usize) -> Option<Vec<usize>> {
        self.row(r).iter().copied().collect()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// Masked cells over all cells; zero for an empty data set.
    pub fn missing_proportion(&self) -> f64 {
        if self.cells.is_empty() {
            0.0
        } else {
            self.missing_count() as f64 / self.cells.len() as f64
        }
    }

    /// Hides an observed cell and records its value in the ledger.
    pub fn mask(&mut self, r: usize, c: usize) {
        let idx = r * self.n_cols() + c;
        if let Some(state) = self.cells[idx].take() {
            self.ledger.push(LedgerEntry { row: r, column: c, state });
        }
    }

    /// Fills a missing cell without touching the ledger.
    pub fn fill(&mut self, r: usize, c: usize, state: usize) {
        assert!(state < self.cardinalities[c]);
        let idx = r * self.n_cols() + c;
        self.cells[idx] = Some(state);
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn set_ledger(&mut self, mut ledger: Vec<LedgerEntry>) {
        ledger.sort_unstable();
        self.ledger = ledger;
    }

    /// Ledger sorted by (row, column).
    pub fn sort_ledger(&mut self) {
        self.ledger.sort_unstable();
    }

    /// Ground-truth complete data: observed cells plus ledger values.
    pub fn reconstruct(&self) -> DataSet {
        let mut out = self.clone();
        for e in &self.ledger {
            out.fill(e.row, e.column, e.state);
        }
        out.ledger.clear();
        out
    }

    /// Rows in the given order; the ledger is re-indexed to match.
    pub fn permute_rows(&self, order: &[usize]) -> DataSet {
        assert_eq!(order.len(), self.n_rows());
        let mut inverse = vec![0; order.len()];
        let mut cells = Vec::with_capacity(self.cells.len());
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
            cells.extend_from_slice(self.row(old));
        }
        let mut ledger: Vec<LedgerEntry> = self
            .ledger
            .iter()
            .map(|e| LedgerEntry { row: inverse[e.row], ..*e })
            .collect();
        ledger.sort_unstable();
        DataSet { columns: self.columns.clone(), cardinalities: self.cardinalities.clone(), cells, ledger }
    }

    pub fn to_csv(&self, states: &[Vec<String>]) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in self.rows().take(self.n_rows()) {
            let line: Vec<&str> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| cell.map_or(MISSING, |s| states[c][s].as_str()))
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses CSV against a network; columns may come in any order and are
    /// rearranged into the network's node order.
    pub fn from_csv(text: &str, bn: &DiscreteBayesNet) -> Result<Self, DataError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, header)) = lines.next() else {
            return Ok(DataSet::empty_like(bn));
        };
        let header: Vec<&str> = header.split(',').map(str::trim).collect();
        let dag = bn.dag();
        let mut file_to_node = Vec::with_capacity(header.len());
        for name in &header {
            let node = dag
                .index_of(name)
                .ok_or_else(|| DataError::UnknownColumn(name.to_string()))?;
            file_to_node.push(node);
        }
        for (i, name) in dag.names().iter().enumerate() {
            if !file_to_node.contains(&i) {
                return Err(DataError::MissingColumn(name.clone()));
            }
        }
        let width = bn.len();
        let mut cells = Vec::new();
        for (li, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != header.len() {
                return Err(DataError::Csv {
                    line: li + 1,
                    message: format!("{} fields, header has {}", fields.len(), header.len()),
                });
            }
            let mut row = vec![None; width];
            for (f, &node) in fields.iter().zip(&file_to_node) {
                if *f != MISSING {
                    let s = bn.states(node).iter().position(|l| l == f).ok_or_else(|| {
                        DataError::Csv {
                            line: li + 1,
                            message: format!("`{f}` is not a state of `{}`", dag.name(node)),
                        }
                    })?;
                    row[node] = Some(s);
                }
            }
            cells.extend(row);
        }
        DataSet::from_cells(dag.names().to_vec(), bn.cardinalities().to_vec(), cells)
    }

    pub fn ledger_to_csv(&self, states: &[Vec<String>]) -> String {
        let mut out = String::from("row_index,column_name,true_state\n");
        for e in &self.ledger {
            let _ = writeln!(out, "{},{},{}", e.row, self.columns[e.column], states[e.column][e.state]);
        }
        out
    }

    /// Reads a ledger CSV for this data set's columns.
    pub fn ledger_from_csv(&self, text: &str, states: &[Vec<String>]) -> Result<Vec<LedgerEntry>, DataError> {
        let mut out = Vec::new();
        for (li, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| DataError::Csv { line: li + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [row, column, state] = fields[..] else {
                return Err(bad(format!("expected 3 fields, got {}", fields.len())));
            };
            let row: usize = row.parse().map_err(|_| bad(format!("bad row index `{row}`")))?;
            let column = self
                .columns
                .iter()
                .position(|c| c == column)
                .ok_or_else(|| DataError::UnknownColumn(column.to_string()))?;
            let state = states[column]
                .iter()
                .position(|s| s == state)
                .ok_or_else(|| bad(format!("`{state}` is not a state")))?;
            if row >= self.n_rows() || self.get(row, column).is_some() {
                return Err(bad(format!("ledger cell ({row}, {column}) is not masked")));
            }
            out.push(LedgerEntry { row, column, state });
        }
        out.sort_unstable();
        Ok(out)
    }
}
