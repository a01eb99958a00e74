//! Discrete datasets and contingency tables.
//!
//! A [`Dataset`] stores a column-major matrix of level indices together with
//! the per-variable cardinalities. All statistical evaluations in the crate
//! reduce to counting joint configurations with [`Dataset::count`].

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::DataError;

/// Default upper bound on dense contingency-table size, in cells.
pub const DEFAULT_CELL_BUDGET: usize = 10_000_000;

/// Column-major discrete sample matrix.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    columns: Vec<Vec<u32>>,
    cards: Vec<u32>,
    names: Option<Vec<String>>,
    cell_budget: usize,
}

impl Dataset {
    /// Builds a dataset from raw columns of level indices and their cardinalities.
    pub fn from_columns(columns: Vec<Vec<u32>>, cards: Vec<u32>) -> Result<Self, DataError> {
        if columns.is_empty() || columns[0].is_empty() {
            return Err(DataError::Empty);
        }
        let n = columns[0].len();
        assert_eq!(columns.len(), cards.len(), "one cardinality per column");
        for (c, (col, &r)) in columns.iter().zip(cards.iter()).enumerate() {
            assert_eq!(col.len(), n, "column {c} length mismatch");
            assert!(r >= 2, "cardinality of column {c} must be at least 2");
            assert!(
                col.iter().all(|&x| x < r),
                "column {c} holds a level index >= its cardinality"
            );
        }
        Ok(Dataset {
            n,
            columns,
            cards,
            names: None,
            cell_budget: DEFAULT_CELL_BUDGET,
        })
    }

    /// Loads a categorical CSV file. Tokens are mapped to dense level indices
    /// in lexicographic token order, so the mapping does not depend on row
    /// order. Empty fields are rejected (no missing-data support), as are
    /// columns with a single observed level.
    pub fn load_csv<P: AsRef<Path>>(path: P, has_header: bool) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .flexible(true)
            .from_reader(file);

        let names: Option<Vec<String>> = if has_header {
            Some(reader.headers()?.iter().map(|s| s.to_string()).collect())
        } else {
            None
        };

        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, record) in reader.records().enumerate() {
            let record = record?;
            let row: Vec<String> = record.iter().map(|s| s.trim().to_string()).collect();
            let expected = *width.get_or_insert(row.len());
            if row.len() != expected {
                return Err(DataError::RaggedRow {
                    row: idx,
                    expected,
                    found: row.len(),
                });
            }
            for (col, field) in row.iter().enumerate() {
                if field.is_empty() {
                    return Err(DataError::MissingValue { row: idx, col });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(DataError::Empty);
        }

        let p = rows[0].len();
        let n = rows.len();
        let mut columns = Vec::with_capacity(p);
        let mut cards = Vec::with_capacity(p);
        for c in 0..p {
            // Lexicographic token -> index map gives a load order that is
            // stable under row shuffling.
            let mut levels: BTreeMap<&str, u32> = BTreeMap::new();
            for row in &rows {
                let next = levels.len() as u32;
                levels.entry(row[c].as_str()).or_insert(next);
            }
            let mut sorted: Vec<&str> = levels.keys().copied().collect();
            sorted.sort_unstable();
            let index_of: BTreeMap<&str, u32> = sorted
                .iter()
                .enumerate()
                .map(|(i, &tok)| (tok, i as u32))
                .collect();
            if index_of.len() < 2 {
                let name = names
                    .as_ref()
                    .map(|ns| ns[c].clone())
                    .unwrap_or_else(|| format!("column {c}"));
                return Err(DataError::DegenerateVariable { name });
            }
            let column: Vec<u32> = rows.iter().map(|row| index_of[row[c].as_str()]).collect();
            cards.push(index_of.len() as u32);
            columns.push(column);
        }

        let mut data = Dataset::from_columns(columns, cards)?;
        data.names = names;
        debug_assert_eq!(data.n, n);
        Ok(data)
    }

    /// Writes the dataset as CSV using level indices as tokens.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, header: bool) -> std::io::Result<()> {
        if header {
            let names: Vec<String> = match &self.names {
                Some(ns) => ns.clone(),
                None => (0..self.p()).map(|i| format!("V{i}")).collect(),
            };
            writeln!(w, "{}", names.join(","))?;
        }
        for row in 0..self.n {
            let fields: Vec<String> = (0..self.p())
                .map(|c| self.columns[c][row].to_string())
                .collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn cardinality(&self, i: usize) -> u32 {
        self.cards[i]
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cards
    }

    pub fn column(&self, i: usize) -> &[u32] {
        &self.columns[i]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn set_names(&mut self, names: Vec<String>) {
        assert_eq!(names.len(), self.p());
        self.names = Some(names);
    }

    pub fn cell_budget(&self) -> usize {
        self.cell_budget
    }

    /// Adjusts the refusal threshold for dense contingency tables.
    pub fn set_cell_budget(&mut self, budget: usize) {
        self.cell_budget = budget;
    }

    /// Returns a dataset whose column `k` is `self`'s column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Dataset {
        assert_eq!(perm.len(), self.p());
        let columns: Vec<Vec<u32>> = perm.iter().map(|&src| self.columns[src].clone()).collect();
        let cards: Vec<u32> = perm.iter().map(|&src| self.cards[src]).collect();
        let names = self
            .names
            .as_ref()
            .map(|ns| perm.iter().map(|&src| ns[src].clone()).collect());
        Dataset {
            n: self.n,
            columns,
            cards,
            names,
            cell_budget: self.cell_budget,
        }
    }

    fn check_vars(&self, vars: &[usize]) -> Result<(), DataError> {
        let p = self.p();
        for (pos, &v) in vars.iter().enumerate() {
            if v >= p {
                return Err(DataError::IndexOutOfRange { index: v, p });
            }
            if vars[..pos].contains(&v) {
                return Err(DataError::DuplicateIndex { index: v });
            }
        }
        Ok(())
    }

    /// Dense joint counts over `vars`, in the order given. Refuses when the
    /// table would exceed the cell budget.
    pub fn count(&self, vars: &[usize]) -> Result<ContingencyTable, DataError> {
        self.check_vars(vars)?;
        let dims: Vec<u32> = vars.iter().map(|&v| self.cards[v]).collect();
        let cells = dims.iter().fold(1u128, |acc, &d| acc * d as u128);
        if cells > self.cell_budget as u128 {
            return Err(DataError::CellBudgetExceeded {
                cells,
                budget: self.cell_budget,
            });
        }
        let mut table = vec![0u64; cells as usize];
        match vars.len() {
            0 => table[0] = self.n as u64,
            1 => {
                for &x in &self.columns[vars[0]] {
                    table[x as usize] += 1;
                }
            }
            _ => {
                // Row-major over `vars`: the last variable varies fastest.
                let cols: Vec<&[u32]> = vars.iter().map(|&v| self.columns[v].as_slice()).collect();
                for row in 0..self.n {
                    let mut idx = 0usize;
                    for (col, &d) in cols.iter().zip(dims.iter()) {
                        idx = idx * d as usize + col[row] as usize;
                    }
                    table[idx] += 1;
                }
            }
        }
        Ok(ContingencyTable {
            variables: vars.to_vec(),
            dims,
            cells: table,
            total: self.n as u64,
        })
    }
}

/// Joint counts over an ordered variable subset, stored row-major with the
/// last variable varying fastest.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    variables: Vec<usize>,
    dims: Vec<u32>,
    cells: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn variables(&self) -> &[usize] {
        &self.variables
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cell(&self, config: &[u32]) -> u64 {
        assert_eq!(config.len(), self.dims.len());
        let mut idx = 0usize;
        for (&x, &d) in config.iter().zip(self.dims.iter()) {
            debug_assert!(x < d);
            idx = idx * d as usize + x as usize;
        }
        self.cells[idx]
    }

    /// Sums out every variable except those at `keep` positions (positions
    /// into `self.variables`, in the order they should appear in the result).
    pub fn marginalize(&self, keep: &[usize]) -> ContingencyTable {
        let dims: Vec<u32> = keep.iter().map(|&k| self.dims[k]).collect();
        let variables: Vec<usize> = keep.iter().map(|&k| self.variables[k]).collect();
        let out_cells: usize = dims.iter().map(|&d| d as usize).product::<usize>().max(1);
        let mut out = vec![0u64; out_cells];
        let mut config = vec![0u32; self.dims.len()];
        for (idx, &c) in self.cells.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut rem = idx;
            for pos in (0..self.dims.len()).rev() {
                let d = self.dims[pos] as usize;
                config[pos] = (rem % d) as u32;
                rem /= d;
            }
            let mut out_idx = 0usize;
            for &k in keep {
                out_idx = out_idx * self.dims[k] as usize + config[k] as usize;
            }
            out[out_idx] += c;
        }
        ContingencyTable {
            variables,
            dims,
            cells: out,
            total: self.total,
        }
    }
}
