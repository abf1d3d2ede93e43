//! Sparse and dense linear algebra over GF(2).
//!
//! [`SparseBitMatrix`] keeps both a row view and a column view of its nonzero
//! entries so that message passing can walk check nodes and variable nodes in
//! time proportional to their degree. Elimination copies the matrix into a
//! bit-packed [`DenseBitMatrix`]; the matrices handled here are window-sized,
//! so dense elimination is both simpler and fast enough.

use std::cmp::Ordering;
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("dimension mismatch: {what} expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("duplicate entry ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("column order is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("syndrome is not in the span of the selected columns")]
    NotInSpan,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] IoErrorString),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its message.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct IoErrorString(pub String);

impl From<std::io::Error> for Gf2Error {
    fn from(e: std::io::Error) -> Self {
        Gf2Error::Io(IoErrorString(e.to_string()))
    }
}

const WORD: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// A fixed-length vector over GF(2), stored bit-packed.
///
/// Set positions are always reported in strictly increasing order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Builds a vector from set positions. Repeated positions toggle.
    ///
    /// # Panics
    ///
    /// Panics if a position is `>= len`.
    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, indices: I) -> Self {
        let mut v = BitVector::zeros(len);
        for i in indices {
            v.flip(i);
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        BitVector::from_indices(
            bits.len(),
            bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i),
        )
    }

    pub fn from_u8s(bits: &[u8]) -> Self {
        BitVector::from_indices(
            bits.len(),
            bits.iter().enumerate().filter(|(_, b)| **b & 1 == 1).map(|(i, _)| i),
        )
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Iterates over set positions in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD + tz)
                }
            })
        })
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.ones().collect()
    }

    pub fn to_u8s(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn xor_assign(&mut self, other: &BitVector) -> Result<(), Gf2Error> {
        if other.len != self.len {
            return Err(Gf2Error::DimensionMismatch {
                what: "bit vector length",
                expected: self.len,
                found: other.len,
            });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
        Ok(())
    }

    /// Returns `self ⊕ other`.
    ///
    /// # Panics
    ///
    /// Panics on a length mismatch.
    pub fn xor(&self, other: &BitVector) -> BitVector {
        let mut out = self.clone();
        out.xor_assign(other).expect("length mismatch in xor");
        out
    }

    /// Parity of the overlap of the two supports.
    pub fn dot(&self, other: &BitVector) -> bool {
        assert_eq!(self.len, other.len, "length mismatch in dot");
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

impl Ord for BitVector {
    /// Lexicographic over bit positions starting at index 0; a 0 at the first
    /// differing position orders first. Shorter vectors order first.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.len.cmp(&other.len) {
            Ordering::Equal => {}
            o => return o,
        }
        for (a, b) in self.words.iter().zip(&other.words) {
            let diff = a ^ b;
            if diff != 0 {
                let first = diff.trailing_zeros();
                return if (a >> first) & 1 == 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for BitVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({}; {:?})", self.len, self.to_indices())
    }
}

/// Sparse binary matrix with consistent row and column adjacency.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SparseBitMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl fmt::Debug for SparseBitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SparseBitMatrix({}x{}, nnz={})",
            self.n_rows,
            self.n_cols,
            self.nnz()
        )
    }
}

impl SparseBitMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseBitMatrix {
            n_rows,
            n_cols,
            rows: vec![Vec::new(); n_rows],
            cols: vec![Vec::new(); n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseBitMatrix {
            n_rows: n,
            n_cols: n,
            rows: (0..n).map(|i| vec![i]).collect(),
            cols: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Builds a matrix from `(row, col)` entries. Duplicates are rejected.
    pub fn from_entries<I>(n_rows: usize, n_cols: usize, entries: I) -> Result<Self, Gf2Error>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut rows = vec![Vec::new(); n_rows];
        let mut cols = vec![Vec::new(); n_cols];
        for (r, c) in entries {
            if r >= n_rows || c >= n_cols {
                return Err(Gf2Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            rows[r].push(c);
            cols[c].push(r);
        }
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Gf2Error::DuplicateEntry { row: r, col: w[0] });
            }
        }
        for col in cols.iter_mut() {
            col.sort_unstable();
        }
        Ok(SparseBitMatrix {
            n_rows,
            n_cols,
            rows,
            cols,
        })
    }

    /// Builds a matrix from per-column row supports.
    pub fn from_columns(n_rows: usize, columns: &[Vec<usize>]) -> Result<Self, Gf2Error> {
        let entries = columns
            .iter()
            .enumerate()
            .flat_map(|(c, rs)| rs.iter().map(move |&r| (r, c)));
        Self::from_entries(n_rows, columns.len(), entries)
    }

    /// Builds a matrix from per-row column supports.
    pub fn from_rows(n_cols: usize, rows: &[Vec<usize>]) -> Result<Self, Gf2Error> {
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(r, cs)| cs.iter().map(move |&c| (r, c)));
        Self::from_entries(rows.len(), n_cols, entries)
    }

    /// Builds a matrix whose rows are the given vectors.
    pub fn from_row_vectors(n_cols: usize, rows: &[BitVector]) -> Result<Self, Gf2Error> {
        let mut supports = Vec::with_capacity(rows.len());
        for v in rows {
            if v.len() != n_cols {
                return Err(Gf2Error::DimensionMismatch {
                    what: "row vector length",
                    expected: n_cols,
                    found: v.len(),
                });
            }
            supports.push(v.to_indices());
        }
        Self::from_rows(n_cols, &supports)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Column indices of row `r`, ascending.
    #[inline]
    pub fn row(&self, r: usize) -> &[usize] {
        &self.rows[r]
    }

    /// Row indices of column `c`, ascending.
    #[inline]
    pub fn col(&self, c: usize) -> &[usize] {
        &self.cols[c]
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.rows[r].len()
    }

    pub fn col_weight(&self, c: usize) -> usize {
        self.cols[c].len()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].binary_search(&c).is_ok()
    }

    /// All entries in row-major ascending order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, cs)| cs.iter().map(move |&c| (r, c)))
    }

    pub fn column_vector(&self, c: usize) -> BitVector {
        BitVector::from_indices(self.n_rows, self.cols[c].iter().copied())
    }

    pub fn row_vector(&self, r: usize) -> BitVector {
        BitVector::from_indices(self.n_cols, self.rows[r].iter().copied())
    }

    pub fn transpose(&self) -> SparseBitMatrix {
        SparseBitMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            rows: self.cols.clone(),
            cols: self.rows.clone(),
        }
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &SparseBitMatrix) -> Result<SparseBitMatrix, Gf2Error> {
        if self.n_rows != other.n_rows {
            return Err(Gf2Error::DimensionMismatch {
                what: "row count for hstack",
                expected: self.n_rows,
                found: other.n_rows,
            });
        }
        let mut cols = self.cols.clone();
        cols.extend(other.cols.iter().cloned());
        SparseBitMatrix::from_columns(self.n_rows, &cols)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &SparseBitMatrix) -> Result<SparseBitMatrix, Gf2Error> {
        if self.n_cols != other.n_cols {
            return Err(Gf2Error::DimensionMismatch {
                what: "column count for vstack",
                expected: self.n_cols,
                found: other.n_cols,
            });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        SparseBitMatrix::from_rows(self.n_cols, &rows)
    }

    /// The submatrix on `columns` (in the given order), all rows kept.
    pub fn select_columns(&self, columns: &[usize]) -> SparseBitMatrix {
        let cols: Vec<Vec<usize>> = columns.iter().map(|&c| self.cols[c].clone()).collect();
        SparseBitMatrix::from_columns(self.n_rows, &cols).expect("column subset stays valid")
    }

    /// The submatrix on `rows` × `columns`, renumbered in the given orders.
    /// Entries in rows outside `rows` are dropped.
    pub fn submatrix(&self, rows: &[usize], columns: &[usize]) -> SparseBitMatrix {
        let mut row_map = vec![usize::MAX; self.n_rows];
        for (new, &old) in rows.iter().enumerate() {
            row_map[old] = new;
        }
        let cols: Vec<Vec<usize>> = columns
            .iter()
            .map(|&c| {
                self.cols[c]
                    .iter()
                    .filter_map(|&r| (row_map[r] != usize::MAX).then_some(row_map[r]))
                    .collect()
            })
            .collect();
        SparseBitMatrix::from_columns(rows.len(), &cols).expect("submatrix stays valid")
    }

    /// Matrix product `self · other` over GF(2).
    pub fn mul(&self, other: &SparseBitMatrix) -> Result<SparseBitMatrix, Gf2Error> {
        if self.n_cols != other.n_rows {
            return Err(Gf2Error::DimensionMismatch {
                what: "inner dimension",
                expected: self.n_cols,
                found: other.n_rows,
            });
        }
        let mut rows = Vec::with_capacity(self.n_rows);
        for r in 0..self.n_rows {
            let mut hits: Vec<usize> = self.rows[r]
                .iter()
                .flat_map(|&k| other.rows[k].iter().copied())
                .collect();
            hits.sort_unstable();
            let mut row = Vec::new();
            for chunk in hits.chunk_by(|a, b| a == b) {
                if chunk.len() % 2 == 1 {
                    row.push(chunk[0]);
                }
            }
            rows.push(row);
        }
        SparseBitMatrix::from_rows(other.n_cols, &rows)
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    /// `M·v`: bit `i` is the parity of the overlap of row `i` with `v`.
    pub fn matvec(&self, v: &BitVector) -> Result<BitVector, Gf2Error> {
        if v.len() != self.n_cols {
            return Err(Gf2Error::DimensionMismatch {
                what: "vector length for matvec",
                expected: self.n_cols,
                found: v.len(),
            });
        }
        let mut out = BitVector::zeros(self.n_rows);
        for c in v.ones() {
            for &r in &self.cols[c] {
                out.flip(r);
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseBitMatrix {
        let mut d = DenseBitMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c) in self.entries() {
            d.set(r, c, true);
        }
        d
    }

    pub fn rank(&self) -> usize {
        let order: Vec<usize> = (0..self.n_cols).collect();
        self.row_reduce(&order)
            .expect("identity order is a permutation")
            .rank()
    }

    /// Gaussian elimination scanning columns in `column_order`.
    ///
    /// Pivots are the first linearly independent columns in scan order.
    pub fn row_reduce(&self, column_order: &[usize]) -> Result<Elimination, Gf2Error> {
        Elimination::new(self, column_order)
    }

    /// A basis of `{x : M·x = 0}` with `n_cols - rank` vectors.
    pub fn kernel_basis(&self) -> Vec<BitVector> {
        let order: Vec<usize> = (0..self.n_cols).collect();
        let elim = self.row_reduce(&order).expect("identity order");
        let mut is_pivot = vec![false; self.n_cols];
        for &p in &elim.pivots {
            is_pivot[p] = true;
        }
        (0..self.n_cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut x = BitVector::zeros(self.n_cols);
                x.set(free, true);
                for k in elim.pivot_rows_of(free) {
                    x.set(elim.pivots[k], true);
                }
                x
            })
            .collect()
    }

    /// Writes the triplet text format: header `rows cols nnz`, then one
    /// `r c` line per entry in ascending row-major order.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<(), Gf2Error> {
        writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for (r, c) in self.entries() {
            writeln!(out, "{r} {c}")?;
        }
        Ok(())
    }

    pub fn to_triplet_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_triplets(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ascii")
    }

    /// Parses the triplet text format. Entries may appear in any order.
    pub fn read_triplets<R: BufRead>(input: R) -> Result<SparseBitMatrix, Gf2Error> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut entries = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let nums: Vec<usize> = content
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| Gf2Error::Parse {
                        line: lineno,
                        message: format!("expected a non-negative integer, found `{t}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
            match header {
                None => {
                    if nums.len() != 3 {
                        return Err(Gf2Error::Parse {
                            line: lineno,
                            message: "header must be `rows cols nnz`".into(),
                        });
                    }
                    header = Some((nums[0], nums[1], nums[2]));
                }
                Some(_) => {
                    if nums.len() != 2 {
                        return Err(Gf2Error::Parse {
                            line: lineno,
                            message: "entry must be `r c`".into(),
                        });
                    }
                    entries.push((nums[0], nums[1]));
                }
            }
        }
        let (n_rows, n_cols, nnz) = header.ok_or(Gf2Error::Parse {
            line: 0,
            message: "missing header".into(),
        })?;
        if entries.len() != nnz {
            return Err(Gf2Error::Parse {
                line: 0,
                message: format!("header declares {nnz} entries, found {}", entries.len()),
            });
        }
        SparseBitMatrix::from_entries(n_rows, n_cols, entries)
    }

    pub fn from_triplet_str(s: &str) -> Result<SparseBitMatrix, Gf2Error> {
        Self::read_triplets(s.as_bytes())
    }
}

/// Row-major bit-packed dense matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct DenseBitMatrix {
    n_rows: usize,
    n_cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl fmt::Debug for DenseBitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseBitMatrix({}x{})", self.n_rows, self.n_cols)?;
        for r in 0..self.n_rows {
            let line: String = (0..self.n_cols)
                .map(|c| if self.get(r, c) { '1' } else { '.' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl DenseBitMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        let stride = words_for(n_cols).max(1);
        DenseBitMatrix {
            n_rows,
            n_cols,
            stride,
            data: vec![0; stride * n_rows],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.data[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        let w = &mut self.data[r * self.stride + c / WORD];
        let mask = 1u64 << (c % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (head, tail) = self.data.split_at_mut(hi * self.stride);
        head[lo * self.stride..(lo + 1) * self.stride].swap_with_slice(&mut tail[..self.stride]);
    }

    /// `row[dst] ^= row[src]`, touching words from `from_word` on.
    #[inline]
    fn xor_row_from(&mut self, src: usize, dst: usize, from_word: usize) {
        debug_assert_ne!(src, dst);
        let s = self.stride;
        let (src_range, dst_range) = (src * s + from_word..(src + 1) * s, dst * s + from_word);
        if src < dst {
            let (head, tail) = self.data.split_at_mut(dst * s);
            let src_slice = &head[src_range];
            for (d, v) in tail[from_word..s].iter_mut().zip(src_slice) {
                *d ^= *v;
            }
        } else {
            let (head, tail) = self.data.split_at_mut(src * s);
            let src_slice = &tail[from_word..s];
            for (d, v) in head[dst_range..dst_range + (s - from_word)]
                .iter_mut()
                .zip(src_slice)
            {
                *d ^= *v;
            }
        }
    }

    /// Rank by in-place elimination on a copy.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for c in 0..m.n_cols {
            let Some(p) = (rank..m.n_rows).find(|&r| m.get(r, c)) else {
                continue;
            };
            m.swap_rows(rank, p);
            for r in rank + 1..m.n_rows {
                if m.get(r, c) {
                    m.xor_row_from(rank, r, c / WORD);
                }
            }
            rank += 1;
            if rank == m.n_rows {
                break;
            }
        }
        rank
    }
}

/// Record of a Gaussian elimination over a column ordering.
///
/// Internally holds `[A_perm | T]` in reduced row echelon form on its left
/// part, where `A_perm` is the input with columns permuted by the scan order
/// and `T` accumulates the row operations (`T·A_perm = RREF`). Pivot `k` sits
/// in row `k`.
#[derive(Clone, Debug)]
pub struct Elimination {
    n_rows: usize,
    n_cols: usize,
    order: Vec<usize>,
    position: Vec<usize>,
    pivots: Vec<usize>,
    work: DenseBitMatrix,
}

impl Elimination {
    fn new(m: &SparseBitMatrix, column_order: &[usize]) -> Result<Self, Gf2Error> {
        let n_cols = m.n_cols();
        let n_rows = m.n_rows();
        if column_order.len() != n_cols {
            return Err(Gf2Error::NotAPermutation(n_cols));
        }
        let mut position = vec![usize::MAX; n_cols];
        for (pos, &c) in column_order.iter().enumerate() {
            if c >= n_cols || position[c] != usize::MAX {
                return Err(Gf2Error::NotAPermutation(n_cols));
            }
            position[c] = pos;
        }
        let mut work = DenseBitMatrix::zeros(n_rows, n_cols + n_rows);
        for (r, c) in m.entries() {
            work.set(r, position[c], true);
        }
        for r in 0..n_rows {
            work.set(r, n_cols + r, true);
        }
        let mut pivots = Vec::new();
        let mut rank = 0;
        for pos in 0..n_cols {
            if rank == n_rows {
                break;
            }
            let Some(p) = (rank..n_rows).find(|&r| work.get(r, pos)) else {
                continue;
            };
            work.swap_rows(rank, p);
            let from = pos / WORD;
            for r in 0..n_rows {
                if r != rank && work.get(r, pos) {
                    work.xor_row_from(rank, r, from);
                }
            }
            pivots.push(column_order[pos]);
            rank += 1;
        }
        Ok(Elimination {
            n_rows,
            n_cols,
            order: column_order.to_vec(),
            position,
            pivots,
            work,
        })
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Pivot columns (original indices) in scan order.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn column_order(&self) -> &[usize] {
        &self.order
    }

    /// Indices `k` such that pivot `k` appears in the reduced expression of
    /// column `c` (original index).
    pub fn pivot_rows_of(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let pos = self.position[c];
        (0..self.rank()).filter(move |&k| self.work.get(k, pos))
    }

    /// Column `c` (original index) of the reduced matrix, restricted to the
    /// pivot rows: the pivot combination that reproduces column `c`.
    pub fn reduced_column(&self, c: usize) -> BitVector {
        let pos = self.position[c];
        BitVector::from_bools(&(0..self.rank()).map(|k| self.work.get(k, pos)).collect::<Vec<_>>())
    }

    /// `T·s`, the syndrome after applying the recorded row operations.
    pub fn transform(&self, s: &BitVector) -> Result<BitVector, Gf2Error> {
        if s.len() != self.n_rows {
            return Err(Gf2Error::DimensionMismatch {
                what: "syndrome length",
                expected: self.n_rows,
                found: s.len(),
            });
        }
        let mut out = BitVector::zeros(self.n_rows);
        let sw = s.words();
        let off = self.n_cols;
        for r in 0..self.n_rows {
            let row = self.work.row_words(r);
            let mut parity = 0u32;
            for (i, &w) in sw.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                let bit = off + i * WORD;
                let lo = bit / WORD;
                let shift = bit % WORD;
                let mut t = row[lo] >> shift;
                if shift != 0 && lo + 1 < row.len() {
                    t |= row[lo + 1] << (WORD - shift);
                }
                parity ^= (t & w).count_ones();
            }
            if parity & 1 == 1 {
                out.set(r, true);
            }
        }
        Ok(out)
    }

    /// Solves `M·x = s` with `x` supported on the pivot columns.
    pub fn solve(&self, s: &BitVector) -> Result<BitVector, Gf2Error> {
        let t = self.transform(s)?;
        self.solve_transformed(&t)
    }

    /// As [`Elimination::solve`] for an already transformed syndrome.
    pub fn solve_transformed(&self, t: &BitVector) -> Result<BitVector, Gf2Error> {
        let rank = self.rank();
        if t.ones().any(|r| r >= rank) {
            return Err(Gf2Error::NotInSpan);
        }
        let mut x = BitVector::zeros(self.n_cols);
        for k in t.ones() {
            x.set(self.pivots[k], true);
        }
        Ok(x)
    }
}

/// Incremental row basis in echelon form, keyed by leading (lowest) bit.
#[derive(Clone, Debug, Default)]
pub struct RowBasis {
    len: usize,
    rows: Vec<BitVector>,
    leads: Vec<usize>,
}

impl RowBasis {
    pub fn new(len: usize) -> Self {
        RowBasis {
            len,
            rows: Vec::new(),
            leads: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis.
    pub fn reduce(&self, v: &BitVector) -> BitVector {
        let mut r = v.clone();
        for (row, &lead) in self.rows.iter().zip(&self.leads) {
            if r.get(lead) {
                r.xor_assign(row).expect("equal lengths");
            }
        }
        r
    }

    /// Inserts `v`; returns `true` if it was independent of the basis.
    pub fn insert(&mut self, v: &BitVector) -> bool {
        assert_eq!(v.len(), self.len, "row length mismatch");
        let r = self.reduce(v);
        let Some(lead) = r.ones().next() else {
            return false;
        };
        // keep existing rows free of the new lead so `reduce` stays one pass
        for row in self.rows.iter_mut() {
            if row.get(lead) {
                row.xor_assign(&r).expect("equal lengths");
            }
        }
        self.rows.push(r);
        self.leads.push(lead);
        true
    }

    pub fn contains(&self, v: &BitVector) -> bool {
        self.reduce(v).is_zero()
    }
}
