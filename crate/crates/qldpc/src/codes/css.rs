//! CSS codes: validation, logical-operator bases, hypergraph products and
//! distance estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gf2::BinMatrix;

use super::{ClassicalCode, CodeError};

/// A CSS code with symplectically normalized logical bases:
/// lx_i anticommutes with lz_i and commutes with every other lz_j.
#[derive(Clone, Debug)]
pub struct CssCode {
    pub hx: BinMatrix,
    pub hz: BinMatrix,
    pub n: usize,
    pub k: usize,
    pub d_upper: Option<usize>,
    pub lx: BinMatrix,
    pub lz: BinMatrix,
    pub family: String,
}

impl CssCode {
    /// Validates the CSS condition, computes k from GF(2) ranks and extracts
    /// paired logical bases.
    pub fn from_checks(
        hx: BinMatrix,
        hz: BinMatrix,
        d_upper: Option<usize>,
        family: impl Into<String>,
    ) -> Result<Self, CodeError> {
        if hx.cols() != hz.cols() {
            return Err(CodeError::CheckShapeMismatch { x_cols: hx.cols(), z_cols: hz.cols() });
        }
        let prod = hx.mul(&hz.transpose())?;
        if !prod.is_zero() {
            return Err(CodeError::CssConditionViolated);
        }
        let n = hx.cols();
        let k = n - hx.rank() - hz.rank();
        let (lx, lz) = logical_basis(&hx, &hz)?;
        debug_assert_eq!(lx.rows(), k);
        Ok(Self { hx, hz, n, k, d_upper, lx, lz, family: family.into() })
    }

    /// Hypergraph product of two classical codes:
    /// hx = [H1^T (x) I_r2 | I_n1 (x) H2], hz = [I_r1 (x) H2^T | H1 (x) I_n2].
    pub fn hypergraph_product(c1: &ClassicalCode, c2: &ClassicalCode) -> Result<Self, CodeError> {
        let h1 = &c1.h;
        let h2 = &c2.h;
        let (r1, n1) = (h1.rows(), h1.cols());
        let (r2, n2) = (h2.rows(), h2.cols());
        let hx = h1
            .transpose()
            .kron(&BinMatrix::identity(r2))
            .hstack(&BinMatrix::identity(n1).kron(h2))?;
        let hz = BinMatrix::identity(r1)
            .kron(&h2.transpose())
            .hstack(&h1.kron(&BinMatrix::identity(n2)))?;
        debug_assert_eq!(hx.cols(), n1 * n2 + r1 * r2);
        // For full-row-rank H1, H2 the transpose codes are trivial and the
        // quantum distance equals min(d1, d2) exactly.
        let d_upper = if h1.rank() == r1 && h2.rank() == r2 {
            match (c1.d_estimate, c2.d_estimate) {
                (Some(d1), Some(d2)) if c1.d_exact && c2.d_exact => Some(d1.min(d2)),
                _ => None,
            }
        } else {
            None
        };
        Self::from_checks(hx, hz, d_upper, "hgp")
    }

    /// X-syndrome of a Z-error pattern and vice versa.
    pub fn syndrome_x(&self, z_error: &[u8]) -> Vec<u8> {
        self.hx.mul_vec(z_error).expect("length checked by caller")
    }

    pub fn syndrome_z(&self, x_error: &[u8]) -> Vec<u8> {
        self.hz.mul_vec(x_error).expect("length checked by caller")
    }
}

/// Incremental GF(2) row space for independence tests.
pub(crate) struct RowSpace {
    words: usize,
    /// Reduced rows, each with its pivot column.
    rows: Vec<(usize, Vec<u64>)>,
}

impl RowSpace {
    pub fn new(cols: usize) -> Self {
        Self { words: cols.div_ceil(64).max(1), rows: Vec::new() }
    }

    pub fn from_matrix(m: &BinMatrix) -> Self {
        let mut s = Self::new(m.cols());
        for support in m.row_supports() {
            s.insert_support(support);
        }
        s
    }

    fn pack(&self, support: &[usize]) -> Vec<u64> {
        let mut v = vec![0u64; self.words];
        for &c in support {
            v[c / 64] |= 1 << (c % 64);
        }
        v
    }

    fn reduce(&self, mut v: Vec<u64>) -> Vec<u64> {
        for (pivot, row) in &self.rows {
            if v[pivot / 64] & (1 << (pivot % 64)) != 0 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a ^= b;
                }
            }
        }
        v
    }

    /// Inserts the row if independent; returns whether it was added.
    pub fn insert_support(&mut self, support: &[usize]) -> bool {
        let v = self.reduce(self.pack(support));
        match first_set_bit(&v) {
            None => false,
            Some(pivot) => {
                self.rows.push((pivot, v));
                true
            }
        }
    }

    pub fn contains_support(&self, support: &[usize]) -> bool {
        first_set_bit(&self.reduce(self.pack(support))).is_none()
    }
}

fn first_set_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
}

/// Extracts k X-logicals (kernel of hz modulo rowspace of hx) and k
/// Z-logicals, then normalizes so the pairing matrix lx * lz^T is I_k.
pub fn logical_basis(hx: &BinMatrix, hz: &BinMatrix) -> Result<(BinMatrix, BinMatrix), CodeError> {
    let n = hx.cols();
    let pick = |kernel_of: &BinMatrix, modulo: &BinMatrix| -> Vec<Vec<usize>> {
        let kernel = kernel_of.kernel_basis();
        let mut space = RowSpace::from_matrix(modulo);
        let mut chosen = Vec::new();
        for support in kernel.row_supports() {
            if space.insert_support(support) {
                chosen.push(support.clone());
            }
        }
        chosen
    };
    let lx_rows = pick(hz, hx);
    let lz_rows = pick(hx, hz);
    if lx_rows.len() != lz_rows.len() {
        return Err(CodeError::LogicalExtraction(format!(
            "logical count mismatch: {} X vs {} Z",
            lx_rows.len(),
            lz_rows.len()
        )));
    }
    let k = lx_rows.len();
    let lx = BinMatrix::from_rows(n, lx_rows)?;
    let lz = BinMatrix::from_rows(n, lz_rows)?;
    if k == 0 {
        return Ok((lx, lz));
    }
    // Pairing matrix M = lx * lz^T is invertible on the logical quotient.
    // Replace lz by (M^T)^{-1} * lz so the pairing becomes the identity.
    let m = lx.mul(&lz.transpose())?;
    let minv_t = invert(&m.transpose()).ok_or_else(|| {
        CodeError::LogicalExtraction("singular logical pairing matrix".into())
    })?;
    let lz = minv_t.mul(&lz)?;
    Ok((lx, lz))
}

/// Inverse of a square GF(2) matrix, if it exists.
fn invert(m: &BinMatrix) -> Option<BinMatrix> {
    let k = m.rows();
    if k != m.cols() {
        return None;
    }
    // Solve M x = e_i column by column.
    let mut cols = Vec::with_capacity(k);
    for i in 0..k {
        let mut e = vec![0u8; k];
        e[i] = 1;
        cols.push(m.solve(&e).ok()??);
    }
    let rows: Vec<Vec<usize>> = (0..k)
        .map(|r| (0..k).filter(|&c| cols[c][r] == 1).collect())
        .collect();
    BinMatrix::from_rows(k, rows).ok()
}

/// Symplectic commutation audit used in tests and construction checks.
pub fn commutes(a: &[usize], b: &[usize]) -> bool {
    let mut overlap = 0;
    let mut i = 0;
    let mut j = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                overlap += 1;
                i += 1;
                j += 1;
            }
        }
    }
    overlap % 2 == 0
}

/// Randomized upper bound on the minimum logical-operator weight.
///
/// Each trial starts from a random logical combination and greedily adds
/// stabilizer rows (and other logicals) while the weight drops. Returns the
/// smaller of the X- and Z-side searches, clamped by any known `d_upper`.
pub fn estimate_min_distance(code: &CssCode, trials: usize, seed: u64) -> Option<usize> {
    if code.k == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dz = side_search(&code.lz, &code.hz, trials, &mut rng);
    let dx = side_search(&code.lx, &code.hx, trials, &mut rng);
    let found = dz.min(dx);
    Some(match code.d_upper {
        Some(d) => d.min(found),
        None => found,
    })
}

fn side_search(logicals: &BinMatrix, stabilizers: &BinMatrix, trials: usize, rng: &mut ChaCha8Rng) -> usize {
    let n = logicals.cols();
    let k = logicals.rows();
    let m = stabilizers.rows();
    let mut best = usize::MAX;
    let mut word = vec![0u8; n];
    for _ in 0..trials {
        word.iter_mut().for_each(|b| *b = 0);
        let mut any = false;
        for r in 0..k {
            if rng.gen_bool(0.5) {
                any = true;
                xor_row(&mut word, logicals.row(r));
            }
        }
        if !any {
            xor_row(&mut word, logicals.row(rng.gen_range(0..k)));
        }
        // Greedy weight descent over stabilizer rows.
        let mut improved = true;
        while improved {
            improved = false;
            for r in 0..m {
                let delta = xor_weight_delta(&word, stabilizers.row(r));
                if delta < 0 {
                    xor_row(&mut word, stabilizers.row(r));
                    improved = true;
                }
            }
        }
        let w: usize = word.iter().map(|&b| b as usize).sum();
        if w < best {
            best = w;
        }
    }
    best
}

fn xor_row(word: &mut [u8], support: &[usize]) {
    for &c in support {
        word[c] ^= 1;
    }
}

fn xor_weight_delta(word: &[u8], support: &[usize]) -> i64 {
    let mut delta = 0i64;
    for &c in support {
        delta += if word[c] == 1 { -1 } else { 1 };
    }
    delta
}

/// Advances `combo` to the next w-subset of {0..n-1} in lexicographic order;
/// returns false when exhausted.
pub(crate) fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let w = combo.len();
    for i in (0..w).rev() {
        if combo[i] < n - w + i {
            combo[i] += 1;
            for j in i + 1..w {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exhaustive minimum logical weight search up to `w_max`: smallest weight of
/// a vector with zero syndrome that is outside the stabilizer row space.
/// Feasible only for small codes; used as an exactness oracle in tests.
pub fn exhaustive_min_distance(code: &CssCode, w_max: usize) -> Option<usize> {
    let n = code.n;
    for w in 1..=w_max {
        // X-side errors are checked by hz and trivial inside rowspace(hx);
        // Z-side errors symmetrically.
        for (checks, stabs) in [(&code.hz, &code.hx), (&code.hx, &code.hz)] {
            let space = RowSpace::from_matrix(stabs);
            let mut combo: Vec<usize> = (0..w).collect();
            loop {
                let mut v = vec![0u8; n];
                for &c in &combo {
                    v[c] = 1;
                }
                let syn = checks.mul_vec(&v).unwrap();
                if syn.iter().all(|&b| b == 0) && !space.contains_support(&combo) {
                    return Some(w);
                }
                if !next_combination(&mut combo, n) {
                    break;
                }
            }
        }
    }
    None
}
