//! Sparse binary matrices over GF(2).
//!
//! All code construction and decoder bookkeeping runs on [`BinMatrix`].
//! Matrices are stored as sorted row supports; elimination routines
//! (rank, kernel, solve) work on a private bit-packed copy so the public
//! values stay immutable and shareable across threads.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Gf2Error {
    #[error("entry ({0}, {1}) out of range for {2}x{3} matrix")]
    EntryOutOfRange(usize, usize, usize, usize),
    #[error("circulant exponent {0} out of range for lift size {1}")]
    ExponentOutOfRange(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed matrix file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sparse matrix over GF(2), stored row-major with sorted column supports.
#[derive(Clone, PartialEq, Eq)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    row_support: Vec<Vec<usize>>,
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows.min(32) {
            let mut line = String::with_capacity(self.cols);
            for c in 0..self.cols {
                line.push(if self.get(r, c) { '1' } else { '.' });
            }
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl BinMatrix {
    pub fn new(rows: usize, cols: usize, entries: &[(usize, usize)]) -> Result<Self, Gf2Error> {
        let mut row_support = vec![Vec::new(); rows];
        for &(r, c) in entries {
            if r >= rows || c >= cols {
                return Err(Gf2Error::EntryOutOfRange(r, c, rows, cols));
            }
            row_support[r].push(c);
        }
        for support in &mut row_support {
            support.sort_unstable();
            support.dedup();
        }
        Ok(Self { rows, cols, row_support })
    }

    /// Builds from per-row supports; duplicates within a row are removed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<usize>>) -> Result<Self, Gf2Error> {
        let n_rows = rows.len();
        let mut row_support = rows;
        for (r, support) in row_support.iter_mut().enumerate() {
            support.sort_unstable();
            support.dedup();
            if let Some(&c) = support.last() {
                if c >= cols {
                    return Err(Gf2Error::EntryOutOfRange(r, c, n_rows, cols));
                }
            }
        }
        Ok(Self { rows: n_rows, cols, row_support })
    }

    pub fn from_dense(rows: &[Vec<u8>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let row_support = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v % 2 == 1).map(|(c, _)| c).collect())
            .collect();
        Self { rows: rows.len(), cols, row_support }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_support: vec![Vec::new(); rows] }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, row_support: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.row_support[r]
    }

    pub fn row_supports(&self) -> &[Vec<usize>] {
        &self.row_support
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.row_support[r].binary_search(&c).is_ok()
    }

    pub fn num_entries(&self) -> usize {
        self.row_support.iter().map(|r| r.len()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.row_support.iter().all(|r| r.is_empty())
    }

    pub fn max_row_weight(&self) -> usize {
        self.row_support.iter().map(|r| r.len()).max().unwrap_or(0)
    }

    pub fn max_col_weight(&self) -> usize {
        let mut counts = vec![0usize; self.cols];
        for support in &self.row_support {
            for &c in support {
                counts[c] += 1;
            }
        }
        counts.into_iter().max().unwrap_or(0)
    }

    pub fn transpose(&self) -> Self {
        let mut row_support = vec![Vec::new(); self.cols];
        for (r, support) in self.row_support.iter().enumerate() {
            for &c in support {
                row_support[c].push(r);
            }
        }
        Self { rows: self.cols, cols: self.rows, row_support }
    }

    pub fn hstack(&self, other: &Self) -> Result<Self, Gf2Error> {
        if self.rows != other.rows {
            return Err(Gf2Error::DimensionMismatch(format!(
                "hstack row counts {} vs {}",
                self.rows, other.rows
            )));
        }
        let row_support = self
            .row_support
            .iter()
            .zip(&other.row_support)
            .map(|(a, b)| a.iter().copied().chain(b.iter().map(|&c| c + self.cols)).collect())
            .collect();
        Ok(Self { rows: self.rows, cols: self.cols + other.cols, row_support })
    }

    pub fn vstack(&self, other: &Self) -> Result<Self, Gf2Error> {
        if self.cols != other.cols {
            return Err(Gf2Error::DimensionMismatch(format!(
                "vstack col counts {} vs {}",
                self.cols, other.cols
            )));
        }
        let mut row_support = self.row_support.clone();
        row_support.extend(other.row_support.iter().cloned());
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, row_support })
    }

    /// Kronecker product over GF(2).
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut row_support = vec![Vec::new(); rows];
        for (ra, sa) in self.row_support.iter().enumerate() {
            for (rb, sb) in other.row_support.iter().enumerate() {
                let support: Vec<usize> = sa
                    .iter()
                    .flat_map(|&ca| sb.iter().map(move |&cb| ca * other.cols + cb))
                    .collect();
                row_support[ra * other.rows + rb] = support;
            }
        }
        for support in &mut row_support {
            support.sort_unstable();
        }
        Self { rows, cols, row_support }
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, other: &Self) -> Result<Self, Gf2Error> {
        if self.cols != other.rows {
            return Err(Gf2Error::DimensionMismatch(format!(
                "mul inner dims {} vs {}",
                self.cols, other.rows
            )));
        }
        let words = other.cols.div_ceil(64);
        let mut other_bits = vec![0u64; other.rows * words];
        for (r, support) in other.row_support.iter().enumerate() {
            for &c in support {
                other_bits[r * words + c / 64] |= 1 << (c % 64);
            }
        }
        let mut row_support = Vec::with_capacity(self.rows);
        let mut acc = vec![0u64; words];
        for support in &self.row_support {
            acc.iter_mut().for_each(|w| *w = 0);
            for &k in support {
                for w in 0..words {
                    acc[w] ^= other_bits[k * words + w];
                }
            }
            let mut cols = Vec::new();
            for (w, &word) in acc.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    cols.push(w * 64 + bits.trailing_zeros() as usize);
                    bits &= bits - 1;
                }
            }
            row_support.push(cols);
        }
        Ok(Self { rows: self.rows, cols: other.cols, row_support })
    }

    /// Matrix-vector product; `v` holds 0/1 values.
    pub fn mul_vec(&self, v: &[u8]) -> Result<Vec<u8>, Gf2Error> {
        if v.len() != self.cols {
            return Err(Gf2Error::DimensionMismatch(format!(
                "mul_vec length {} vs cols {}",
                v.len(),
                self.cols
            )));
        }
        Ok(self
            .row_support
            .iter()
            .map(|support| support.iter().fold(0u8, |acc, &c| acc ^ (v[c] & 1)))
            .collect())
    }

    /// GF(2) row rank, computed on a dense bit-packed copy with a fixed
    /// pivot order (lowest column, then lowest row).
    pub fn rank(&self) -> usize {
        Eliminator::from_matrix(self).rank()
    }

    /// Basis of the right kernel {v : self * v = 0}; one basis vector per row.
    /// Row count is cols - rank.
    pub fn kernel_basis(&self) -> Self {
        let elim = Eliminator::from_matrix(self);
        let pivots = elim.pivot_cols();
        let rref = elim.rref_rows();
        let is_pivot: Vec<bool> = {
            let mut v = vec![false; self.cols];
            for &c in &pivots {
                v[c] = true;
            }
            v
        };
        let mut basis_rows = Vec::new();
        for free in 0..self.cols {
            if is_pivot[free] {
                continue;
            }
            // v[free] = 1; pivot columns solve the remaining constraints.
            let mut support = vec![free];
            for (pivot_idx, &pc) in pivots.iter().enumerate() {
                if rref[pivot_idx].binary_search(&free).is_ok() {
                    support.push(pc);
                }
            }
            support.sort_unstable();
            basis_rows.push(support);
        }
        Self { rows: basis_rows.len(), cols: self.cols, row_support: basis_rows }
    }

    /// Any solution of self * v = s, or None when s is outside the column space.
    pub fn solve(&self, s: &[u8]) -> Result<Option<Vec<u8>>, Gf2Error> {
        if s.len() != self.rows {
            return Err(Gf2Error::DimensionMismatch(format!(
                "solve rhs length {} vs rows {}",
                s.len(),
                self.rows
            )));
        }
        Ok(Eliminator::from_matrix_with_rhs(self, s).solve())
    }

    /// Cyclic-shift permutation matrix of size l (monomial x^e), or the l x l
    /// zero matrix when `exponent` is None.
    pub fn lift_circulant(exponent: Option<usize>, l: usize) -> Result<Self, Gf2Error> {
        match exponent {
            None => Ok(Self::zeros(l, l)),
            Some(e) => {
                if e >= l {
                    return Err(Gf2Error::ExponentOutOfRange(e, l));
                }
                // Row r has its 1 at column (r + e) mod l, so that the matrix
                // maps basis vector e_j to e_{j - e mod l}... by convention we
                // use M[r][(r + e) % l] = 1, i.e. M * e_j = e_{(j - e) mod l}
                // and products compose additively in the exponent.
                let row_support = (0..l).map(|r| vec![(r + e) % l]).collect();
                Ok(Self { rows: l, cols: l, row_support })
            }
        }
    }

    /// Writes the text format: header "rows cols", then one "r c" line per entry.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {}", self.rows, self.cols)?;
        for (r, support) in self.row_support.iter().enumerate() {
            for &c in support {
                writeln!(w, "{r} {c}")?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, Gf2Error> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Gf2Error::Parse("empty file".into()))??;
        let mut it = header.split_whitespace();
        let rows: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Gf2Error::Parse(format!("bad header: {header}")))?;
        let cols: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Gf2Error::Parse(format!("bad header: {header}")))?;
        let mut entries = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let r: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Gf2Error::Parse(format!("bad entry line: {line}")))?;
            let c: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Gf2Error::Parse(format!("bad entry line: {line}")))?;
            entries.push((r, c));
        }
        Self::new(rows, cols, &entries)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), Gf2Error> {
        let f = std::fs::File::create(path)?;
        self.write_text(io::BufWriter::new(f))?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, Gf2Error> {
        let f = std::fs::File::open(path)?;
        Self::read_text(io::BufReader::new(f))
    }
}

/// Dense bit-packed Gaussian elimination workspace. Pivoting is
/// deterministic (columns left to right, first available row) so rank and
/// kernel outputs are reproducible.
struct Eliminator {
    cols: usize,
    words: usize,
    rows: Vec<Vec<u64>>,
    rhs: Option<Vec<u8>>,
    pivot_cols: Vec<usize>,
}

impl Eliminator {
    fn from_matrix(m: &BinMatrix) -> Self {
        Self::build(m, None)
    }

    fn from_matrix_with_rhs(m: &BinMatrix, rhs: &[u8]) -> Self {
        Self::build(m, Some(rhs.to_vec()))
    }

    fn build(m: &BinMatrix, rhs: Option<Vec<u8>>) -> Self {
        let words = m.cols.div_ceil(64).max(1);
        let mut rows = vec![vec![0u64; words]; m.rows];
        for (r, support) in m.row_support.iter().enumerate() {
            for &c in support {
                rows[r][c / 64] |= 1 << (c % 64);
            }
        }
        let mut e = Self { cols: m.cols, words, rows, rhs, pivot_cols: Vec::new() };
        e.eliminate();
        e
    }

    fn eliminate(&mut self) {
        let n_rows = self.rows.len();
        let mut next_row = 0;
        for col in 0..self.cols {
            let word = col / 64;
            let bit = 1u64 << (col % 64);
            let Some(pivot) = (next_row..n_rows).find(|&r| self.rows[r][word] & bit != 0) else {
                continue;
            };
            self.rows.swap(next_row, pivot);
            if let Some(rhs) = &mut self.rhs {
                rhs.swap(next_row, pivot);
            }
            for r in 0..n_rows {
                if r != next_row && self.rows[r][word] & bit != 0 {
                    let (head, tail) = if r < next_row {
                        let (a, b) = self.rows.split_at_mut(next_row);
                        (&mut a[r], &b[0])
                    } else {
                        let (a, b) = self.rows.split_at_mut(r);
                        (&mut b[0], &a[next_row])
                    };
                    for w in 0..self.words {
                        head[w] ^= tail[w];
                    }
                    if let Some(rhs) = &mut self.rhs {
                        rhs[r] ^= rhs[next_row];
                    }
                }
            }
            self.pivot_cols.push(col);
            next_row += 1;
            if next_row == n_rows {
                break;
            }
        }
    }

    fn rank(&self) -> usize {
        self.pivot_cols.len()
    }

    fn pivot_cols(&self) -> Vec<usize> {
        self.pivot_cols.clone()
    }

    /// Row supports of the reduced row-echelon form (nonzero rows only).
    fn rref_rows(&self) -> Vec<Vec<usize>> {
        self.rows[..self.pivot_cols.len()]
            .iter()
            .map(|row| {
                let mut support = Vec::new();
                for (w, &word) in row.iter().enumerate() {
                    let mut bits = word;
                    while bits != 0 {
                        support.push(w * 64 + bits.trailing_zeros() as usize);
                        bits &= bits - 1;
                    }
                }
                support
            })
            .collect()
    }

    fn solve(&self) -> Option<Vec<u8>> {
        let rhs = self.rhs.as_ref().expect("solve requires rhs");
        // Rows below the rank must have zero rhs, otherwise infeasible.
        if rhs[self.pivot_cols.len()..].iter().any(|&b| b != 0) {
            return None;
        }
        let mut v = vec![0u8; self.cols];
        for (i, &col) in self.pivot_cols.iter().enumerate() {
            v[col] = rhs[i];
        }
        Some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(m: &BinMatrix) -> Vec<Vec<u8>> {
        (0..m.rows())
            .map(|r| (0..m.cols()).map(|c| m.get(r, c) as u8).collect())
            .collect()
    }

    #[test]
    fn rank_identity() {
        assert_eq!(BinMatrix::identity(3).rank(), 3);
    }

    #[test]
    fn rank_zero_matrix() {
        assert_eq!(BinMatrix::zeros(4, 7).rank(), 0);
    }

    #[test]
    fn rank_dependent_rows() {
        // Rows sum to zero, so rank drops to 2.
        let m = BinMatrix::from_dense(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]);
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        let k = BinMatrix::identity(2).kernel_basis();
        assert_eq!(k.rows(), 0);
        assert_eq!(k.cols(), 2);
    }

    #[test]
    fn kernel_of_parity_row() {
        let m = BinMatrix::from_dense(&[vec![1, 1]]);
        let k = m.kernel_basis();
        assert_eq!(k.rows(), 1);
        assert_eq!(k.row(0), &[0, 1]);
    }

    #[test]
    fn kernel_annihilated_by_matrix() {
        // Fixed 5x8 matrix of rank 5.
        let m = BinMatrix::from_dense(&[
            vec![1, 0, 0, 0, 0, 1, 1, 0],
            vec![0, 1, 0, 0, 0, 1, 0, 1],
            vec![0, 0, 1, 0, 0, 0, 1, 1],
            vec![0, 0, 0, 1, 0, 1, 1, 1],
            vec![0, 0, 0, 0, 1, 1, 0, 0],
        ]);
        assert_eq!(m.rank(), 5);
        let k = m.kernel_basis();
        assert_eq!(k.rows(), 3);
        for r in 0..k.rows() {
            let v: Vec<u8> = (0..k.cols()).map(|c| k.get(r, c) as u8).collect();
            assert!(m.mul_vec(&v).unwrap().iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn kron_identities() {
        let i6 = BinMatrix::identity(2).kron(&BinMatrix::identity(3));
        assert_eq!(i6, BinMatrix::identity(6));
        let b = BinMatrix::from_dense(&[vec![1, 0, 1], vec![0, 1, 1]]);
        let one = BinMatrix::identity(1);
        assert_eq!(one.kron(&b), b);
    }

    #[test]
    fn kron_row_with_identity() {
        let a = BinMatrix::from_dense(&[vec![1, 1]]);
        let got = a.kron(&BinMatrix::identity(2));
        let want = BinMatrix::from_dense(&[vec![1, 0, 1, 0], vec![0, 1, 0, 1]]);
        assert_eq!(got, want);
    }

    #[test]
    fn lift_circulant_cases() {
        assert_eq!(BinMatrix::lift_circulant(Some(0), 3).unwrap(), BinMatrix::identity(3));
        assert_eq!(BinMatrix::lift_circulant(None, 4).unwrap(), BinMatrix::zeros(4, 4));
        let s = BinMatrix::lift_circulant(Some(1), 3).unwrap();
        // Shift-by-one maps e_1 to e_0.
        assert!(s.get(0, 1) && s.get(1, 2) && s.get(2, 0));
        assert!(BinMatrix::lift_circulant(Some(3), 3).is_err());
    }

    #[test]
    fn lift_circulant_composes_additively() {
        let l = 5;
        for e1 in 0..l {
            for e2 in 0..l {
                let p = BinMatrix::lift_circulant(Some(e1), l)
                    .unwrap()
                    .mul(&BinMatrix::lift_circulant(Some(e2), l).unwrap())
                    .unwrap();
                assert_eq!(p, BinMatrix::lift_circulant(Some((e1 + e2) % l), l).unwrap());
            }
        }
    }

    #[test]
    fn solve_simple_cases() {
        let id = BinMatrix::identity(3);
        let s = vec![1, 0, 1];
        assert_eq!(id.solve(&s).unwrap().unwrap(), s);

        let m = BinMatrix::from_dense(&[vec![1, 1]]);
        let v = m.solve(&[1]).unwrap().unwrap();
        assert_eq!(m.mul_vec(&v).unwrap(), vec![1]);

        let zero_s = vec![0, 0];
        let m2 = BinMatrix::from_dense(&[vec![1, 0], vec![1, 0]]);
        let v2 = m2.solve(&zero_s).unwrap().unwrap();
        assert_eq!(m2.mul_vec(&v2).unwrap(), zero_s);
    }

    #[test]
    fn solve_infeasible() {
        let m = BinMatrix::from_dense(&[vec![1, 1], vec![1, 1]]);
        assert!(m.solve(&[1, 0]).unwrap().is_none());
    }

    #[test]
    fn exhaustive_solve_small_matrices() {
        // All matrices up to 3x3: every feasible syndrome round-trips.
        for rows in 1..=3usize {
            for cols in 1..=3usize {
                for mask in 0..(1u32 << (rows * cols)) {
                    let d: Vec<Vec<u8>> = (0..rows)
                        .map(|r| (0..cols).map(|c| ((mask >> (r * cols + c)) & 1) as u8).collect())
                        .collect();
                    let m = BinMatrix::from_dense(&d);
                    for smask in 0..(1u8 << rows) {
                        let s: Vec<u8> = (0..rows).map(|r| (smask >> r) & 1).collect();
                        let feasible = (0..(1u8 << cols)).any(|vm| {
                            let v: Vec<u8> = (0..cols).map(|c| (vm >> c) & 1).collect();
                            m.mul_vec(&v).unwrap() == s
                        });
                        match m.solve(&s).unwrap() {
                            Some(v) => {
                                assert!(feasible);
                                assert_eq!(m.mul_vec(&v).unwrap(), s);
                            }
                            None => assert!(!feasible),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn file_roundtrip() {
        let m = BinMatrix::from_dense(&[vec![1, 0, 1], vec![0, 0, 0], vec![1, 1, 0]]);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = BinMatrix::read_text(&buf[..]).unwrap();
        assert_eq!(m, back);
    }

    proptest! {
        #[test]
        fn rank_equals_transpose_rank(
            rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()
        ) {
            let mut state = seed;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                state >> 33
            };
            let d: Vec<Vec<u8>> = (0..rows)
                .map(|_| (0..cols).map(|_| (next() & 1) as u8).collect())
                .collect();
            let m = BinMatrix::from_dense(&d);
            prop_assert_eq!(m.rank(), m.transpose().rank());
        }

        #[test]
        fn kernel_rows_annihilate(
            rows in 1usize..7, cols in 1usize..9, seed in any::<u64>()
        ) {
            let mut state = seed;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                state >> 33
            };
            let d: Vec<Vec<u8>> = (0..rows)
                .map(|_| (0..cols).map(|_| (next() & 1) as u8).collect())
                .collect();
            let m = BinMatrix::from_dense(&d);
            let k = m.kernel_basis();
            prop_assert_eq!(k.rows(), cols - m.rank());
            let prod = m.mul(&k.transpose()).unwrap();
            prop_assert!(prod.is_zero());
        }

        #[test]
        fn kron_dims_multiply(
            ra in 1usize..4, ca in 1usize..4, rb in 1usize..4, cb in 1usize..4, seed in any::<u64>()
        ) {
            let mut state = seed;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                state >> 33
            };
            let mk = |r: usize, c: usize, next: &mut dyn FnMut() -> u64| {
                let d: Vec<Vec<u8>> = (0..r)
                    .map(|_| (0..c).map(|_| (next() & 1) as u8).collect())
                    .collect();
                BinMatrix::from_dense(&d)
            };
            let a = mk(ra, ca, &mut next);
            let b = mk(rb, cb, &mut next);
            let k = a.kron(&b);
            prop_assert_eq!(k.rows(), ra * rb);
            prop_assert_eq!(k.cols(), ca * cb);
            // Entrywise definition check.
            for r in 0..k.rows() {
                for c in 0..k.cols() {
                    let expect = a.get(r / rb, c / cb) && b.get(r % rb, c % cb);
                    prop_assert_eq!(k.get(r, c), expect);
                }
            }
            let _ = dense(&k);
        }
    }
}
