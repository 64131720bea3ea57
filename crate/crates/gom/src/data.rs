//! Core data types: categorical response arrays, the one-hot flattening map,
//! block partitions, and structural validation.
//!
//! Category indices are 1-based at the boundary (a response takes values in
//! `1..=C_l`); everything internal works with 0-based column offsets.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GomError, Result};

/// Observation family of a flattened data matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// One-hot blocks from flattened polytomous responses; each row-block sums to 1.
    BernoulliOnehot,
    /// Plain binary entries without block-sum structure.
    BernoulliGeneral,
    /// Counts in {0,1,2} halved to {0, 0.5, 1}.
    BinomialHalved,
    /// Nonnegative integer counts.
    Poisson,
}

/// N x L categorical response array plus per-item category counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiTensor {
    /// Row-major, responses[i*n_items + l] in 1..=C_l.
    responses: Vec<usize>,
    category_counts: Vec<usize>,
    n_subjects: usize,
}

impl QuasiTensor {
    pub fn new(
        responses: Vec<usize>,
        n_subjects: usize,
        category_counts: Vec<usize>,
    ) -> Result<Self> {
        let n_items = category_counts.len();
        if n_subjects == 0 || n_items == 0 {
            return Err(GomError::Validation(
                "quasi-tensor must have at least one subject and one item".into(),
            ));
        }
        if responses.len() != n_subjects * n_items {
            return Err(GomError::DimensionMismatch(format!(
                "expected {} responses, got {}",
                n_subjects * n_items,
                responses.len()
            )));
        }
        if let Some(l) = category_counts.iter().position(|&c| c < 2) {
            return Err(GomError::Validation(format!(
                "item {} has fewer than 2 categories",
                l + 1
            )));
        }
        for i in 0..n_subjects {
            for (l, &c_l) in category_counts.iter().enumerate() {
                let v = responses[i * n_items + l];
                if v < 1 || v > c_l {
                    return Err(GomError::ResponseOutOfRange {
                        subject: i + 1,
                        item: l + 1,
                        value: v,
                        categories: c_l,
                    });
                }
            }
        }
        Ok(Self {
            responses,
            category_counts,
            n_subjects,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_items(&self) -> usize {
        self.category_counts.len()
    }

    pub fn category_counts(&self) -> &[usize] {
        &self.category_counts
    }

    /// 1-based response of subject `i` to item `l` (both 0-based indices).
    pub fn response(&self, i: usize, l: usize) -> usize {
        self.responses[i * self.n_items() + l]
    }
}

/// Ordered contiguous column blocks S_1..S_L covering [J].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.iter().any(|&s| s == 0) {
            return Err(GomError::Validation(
                "block partition must have nonempty blocks".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self { sizes, offsets })
    }

    /// Trivial partition of J singleton blocks.
    pub fn singletons(j: usize) -> Self {
        Self::from_sizes(vec![1; j]).expect("j >= 1")
    }

    pub fn n_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_cols(&self) -> usize {
        self.offsets.last().unwrap() + self.sizes.last().unwrap()
    }

    pub fn max_block(&self) -> usize {
        *self.sizes.iter().max().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Column range of block `l`.
    pub fn range(&self, l: usize) -> std::ops::Range<usize> {
        self.offsets[l]..self.offsets[l] + self.sizes[l]
    }
}

/// N x J real matrix carrying flattened or raw data plus its column-block structure.
#[derive(Debug, Clone)]
pub struct FlatMatrix {
    pub values: DMatrix<f64>,
    pub partition: BlockPartition,
    pub family: Family,
}

impl FlatMatrix {
    pub fn new(values: DMatrix<f64>, partition: BlockPartition, family: Family) -> Result<Self> {
        if values.ncols() != partition.n_cols() {
            return Err(GomError::DimensionMismatch(format!(
                "matrix has {} columns but partition covers {}",
                values.ncols(),
                partition.n_cols()
            )));
        }
        Ok(Self {
            values,
            partition,
            family,
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: Option<usize>,
    pub block: Option<usize>,
    pub message: String,
}

/// Model parameters (Pi, Theta) with the family tag deciding range constraints.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub memberships: DMatrix<f64>,
    pub item_params: DMatrix<f64>,
    pub family: Family,
}

impl ModelParams {
    pub fn n_profiles(&self) -> usize {
        self.memberships.ncols()
    }
}

/// Flattens an N x L categorical array into the N x J one-hot block matrix,
/// J = sum of category counts. Entry (i, offset_l + c - 1) = 1 iff the
/// response of subject i to item l equals c.
pub fn flatten(quasi: &QuasiTensor) -> FlatMatrix {
    let partition = BlockPartition::from_sizes(quasi.category_counts().to_vec()).unwrap();
    let n = quasi.n_subjects();
    let j = partition.n_cols();
    let mut values = DMatrix::zeros(n, j);
    for i in 0..n {
        for l in 0..quasi.n_items() {
            let c = quasi.response(i, l);
            values[(i, partition.range(l).start + c - 1)] = 1.0;
        }
    }
    FlatMatrix {
        values,
        partition,
        family: Family::BernoulliOnehot,
    }
}

/// Inverse of [`flatten`]: argmax per row-block recovers the category indices.
pub fn unflatten(flat: &FlatMatrix) -> Result<QuasiTensor> {
    let n = flat.nrows();
    let l_count = flat.partition.n_blocks();
    let mut responses = Vec::with_capacity(n * l_count);
    for i in 0..n {
        for l in 0..l_count {
            let range = flat.partition.range(l);
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for (c, jcol) in range.clone().enumerate() {
                let v = flat.values[(i, jcol)];
                if v > best_v {
                    best_v = v;
                    best = c;
                }
            }
            responses.push(best + 1);
        }
    }
    QuasiTensor::new(responses, n, flat.partition.sizes().to_vec())
}

/// Stacks per-item K-column probability tables into the J x K flattened item
/// parameter matrix. `tables[l]` is C_l x K; rows are categories.
pub fn flatten_params(tables: &[DMatrix<f64>], category_counts: &[usize]) -> Result<DMatrix<f64>> {
    if tables.len() != category_counts.len() {
        return Err(GomError::DimensionMismatch(format!(
            "{} tables but {} items",
            tables.len(),
            category_counts.len()
        )));
    }
    let k = tables
        .first()
        .map(|t| t.ncols())
        .ok_or_else(|| GomError::Validation("no item tables given".into()))?;
    for (l, (t, &c_l)) in tables.iter().zip(category_counts).enumerate() {
        if t.nrows() != c_l || t.ncols() != k {
            return Err(GomError::DimensionMismatch(format!(
                "table for item {} is {}x{}, expected {}x{}",
                l + 1,
                t.nrows(),
                t.ncols(),
                c_l,
                k
            )));
        }
        for kk in 0..k {
            let s: f64 = t.column(kk).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(GomError::Validation(format!(
                    "item {} profile {} probabilities sum to {} (expected 1)",
                    l + 1,
                    kk + 1,
                    s
                )));
            }
        }
    }
    let j: usize = category_counts.iter().sum();
    let mut theta = DMatrix::zeros(j, k);
    let mut offset = 0;
    for t in tables {
        theta.rows_mut(offset, t.nrows()).copy_from(t);
        offset += t.nrows();
    }
    Ok(theta)
}

/// Reports invariant violations of a flat matrix; never mutates, never errors.
pub fn validate(flat: &FlatMatrix) -> Vec<Violation> {
    let mut out = Vec::new();
    for i in 0..flat.nrows() {
        for jcol in 0..flat.ncols() {
            let v = flat.values[(i, jcol)];
            if !v.is_finite() {
                out.push(Violation {
                    row: Some(i),
                    block: None,
                    message: format!("non-finite entry at ({i}, {jcol})"),
                });
                continue;
            }
            match flat.family {
                Family::BernoulliOnehot | Family::BernoulliGeneral => {
                    if v != 0.0 && v != 1.0 {
                        out.push(Violation {
                            row: Some(i),
                            block: None,
                            message: format!("entry ({i}, {jcol}) = {v} not in {{0,1}}"),
                        });
                    }
                }
                Family::BinomialHalved => {
                    if v != 0.0 && v != 0.5 && v != 1.0 {
                        out.push(Violation {
                            row: Some(i),
                            block: None,
                            message: format!("entry ({i}, {jcol}) = {v} not in {{0, 0.5, 1}}"),
                        });
                    }
                }
                Family::Poisson => {
                    if v < 0.0 || v.fract() != 0.0 {
                        out.push(Violation {
                            row: Some(i),
                            block: None,
                            message: format!(
                                "entry ({i}, {jcol}) = {v} is not a nonnegative integer"
                            ),
                        });
                    }
                }
            }
        }
    }
    if flat.family == Family::BernoulliOnehot {
        for i in 0..flat.nrows() {
            for l in 0..flat.partition.n_blocks() {
                let s: f64 = flat.partition.range(l).map(|j| flat.values[(i, j)]).sum();
                if (s - 1.0).abs() > 1e-12 {
                    out.push(Violation {
                        row: Some(i),
                        block: Some(l),
                        message: format!("row {i} block {l} sums to {s} (expected 1)"),
                    });
                }
            }
        }
        // degenerate categories are kept but flagged
        for l in 0..flat.partition.n_blocks() {
            for jcol in flat.partition.range(l) {
                if flat.values.column(jcol).sum() == 0.0 {
                    out.push(Violation {
                        row: None,
                        block: Some(l),
                        message: format!("column {jcol} (block {l}) is never chosen"),
                    });
                }
            }
        }
    }
    out
}

/// Validates a (Pi, Theta) pair against the family's range and simplex constraints.
pub fn validate_params(params: &ModelParams, partition: Option<&BlockPartition>) -> Vec<Violation> {
    let mut out = Vec::new();
    let pi = &params.memberships;
    for i in 0..pi.nrows() {
        let mut s = 0.0;
        for k in 0..pi.ncols() {
            let v = pi[(i, k)];
            if v < 0.0 {
                out.push(Violation {
                    row: Some(i),
                    block: None,
                    message: format!("membership ({i}, {k}) = {v} is negative"),
                });
            }
            s += v;
        }
        if (s - 1.0).abs() > 1e-12 {
            out.push(Violation {
                row: Some(i),
                block: None,
                message: format!("membership row {i} sums to {s}"),
            });
        }
    }
    let theta = &params.item_params;
    match params.family {
        Family::BernoulliOnehot | Family::BernoulliGeneral | Family::BinomialHalved => {
            for jcol in 0..theta.nrows() {
                for k in 0..theta.ncols() {
                    let v = theta[(jcol, k)];
                    if !(0.0..=1.0).contains(&v) {
                        out.push(Violation {
                            row: Some(jcol),
                            block: None,
                            message: format!("item parameter ({jcol}, {k}) = {v} outside [0,1]"),
                        });
                    }
                }
            }
            if params.family == Family::BernoulliOnehot {
                if let Some(part) = partition {
                    for l in 0..part.n_blocks() {
                        for k in 0..theta.ncols() {
                            let s: f64 = part.range(l).map(|j| theta[(j, k)]).sum();
                            if (s - 1.0).abs() > 1e-12 {
                                out.push(Violation {
                                    row: None,
                                    block: Some(l),
                                    message: format!(
                                        "item block {l} profile {k} sums to {s} (expected 1)"
                                    ),
                                });
                            }
                        }
                    }
                }
            }
        }
        Family::Poisson => {
            for jcol in 0..theta.nrows() {
                for k in 0..theta.ncols() {
                    if theta[(jcol, k)] < 0.0 {
                        out.push(Violation {
                            row: Some(jcol),
                            block: None,
                            message: format!("poisson rate ({jcol}, {k}) is negative"),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Halves a raw count matrix with entries in {0,1,2} into binomial-halved form.
pub fn halve_binomial(counts: &DMatrix<f64>) -> Result<FlatMatrix> {
    for i in 0..counts.nrows() {
        for j in 0..counts.ncols() {
            let v = counts[(i, j)];
            if v != 0.0 && v != 1.0 && v != 2.0 {
                return Err(GomError::Validation(format!(
                    "binomial count ({i}, {j}) = {v} not in {{0,1,2}}"
                )));
            }
        }
    }
    FlatMatrix::new(
        counts.map(|v| v / 2.0),
        BlockPartition::singletons(counts.ncols()),
        Family::BinomialHalved,
    )
}
