//! Observation storage. Grid observations are mostly zeros, so rows are
//! kept as (index, value) pairs.

#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub idx: &'a [u32],
    pub val: &'a [f64],
}

/// Append-only batch of sparse rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObsBatch {
    idx: Vec<u32>,
    val: Vec<f64>,
    starts: Vec<usize>,
}

impl ObsBatch {
    pub fn new() -> Self {
        Self { idx: Vec::new(), val: Vec::new(), starts: vec![0] }
    }

    pub fn clear(&mut self) {
        self.idx.clear();
        self.val.clear();
        self.starts.clear();
        self.starts.push(0);
    }

    /// Store the non-zero entries of a dense row.
    pub fn push_dense(&mut self, row: &[f64]) {
        for (i, &v) in row.iter().enumerate() {
            if v != 0.0 {
                self.idx.push(i as u32);
                self.val.push(v);
            }
        }
        self.starts.push(self.idx.len());
    }

    pub fn len(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.starts[i], self.starts[i + 1]);
        SparseRow { idx: &self.idx[a..b], val: &self.val[a..b] }
    }
}

/// Sparse view of a dense row, built in place.
#[derive(Debug, Clone, Default)]
pub struct DenseToSparse {
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl DenseToSparse {
    pub fn view(&mut self, row: &[f64]) -> SparseRow<'_> {
        self.idx.clear();
        self.val.clear();
        for (i, &v) in row.iter().enumerate() {
            if v != 0.0 {
                self.idx.push(i as u32);
                self.val.push(v);
            }
        }
        SparseRow { idx: &self.idx, val: &self.val }
    }
}
