//! Spatially-coupled HGP codes built from a characteristic function.
//!
//! A 2D SC code is specified by two polynomial base matrices A(U,V), B(U,V)
//! over F2, memories (m1, m2) bounding the U/V degrees, coupling lengths
//! (L1, L2) and an optional circulant lift. The characteristic function
//!
//!   F(U,V) = [ I (x) A | bar(B)^T (x) I ]   (X rows)
//!            [ B (x) I | I (x) bar(A)^T ]   (Z rows)
//!
//! is the hypergraph product of A and B; its coefficient matrices H_ij are
//! placed in a tail-biting block-circulant layout with offsets
//! (row - col) mod (L1, L2). bar(P) is the reciprocal U^m1 V^m2 P(1/U, 1/V),
//! which makes the lifted block matrices satisfy the CSS condition exactly.

use std::io::{self, BufRead, Write};
use std::path::Path;

use crate::gf2::BinMatrix;

use super::{CodeError, CssCode};

/// A single monomial x^lift * U^u * V^v.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Monomial {
    pub u: usize,
    pub v: usize,
    pub lift: usize,
}

/// Matrix over F2[U, V, x]; each entry is a (possibly empty) sum of monomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<Monomial>>,
}

impl PolyMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Vec<Monomial>>) -> Result<Self, CodeError> {
        if entries.len() != rows * cols {
            return Err(CodeError::Protograph(format!(
                "{}x{} polynomial matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        let mut m = Self { rows, cols, entries };
        m.normalize();
        Ok(m)
    }

    fn normalize(&mut self) {
        for entry in &mut self.entries {
            entry.sort_unstable();
            // Pairs cancel over F2.
            let mut out: Vec<Monomial> = Vec::with_capacity(entry.len());
            for &m in entry.iter() {
                if out.last() == Some(&m) {
                    out.pop();
                } else {
                    out.push(m);
                }
            }
            *entry = out;
        }
    }

    pub fn entry(&self, r: usize, c: usize) -> &[Monomial] {
        &self.entries[r * self.cols + c]
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Vec::new(); n * n];
        for i in 0..n {
            entries[i * n + i] = vec![Monomial { u: 0, v: 0, lift: 0 }];
        }
        Self { rows: n, cols: n, entries }
    }

    pub fn max_degrees(&self) -> (usize, usize) {
        let mut mu = 0;
        let mut mv = 0;
        for entry in &self.entries {
            for m in entry {
                mu = mu.max(m.u);
                mv = mv.max(m.v);
            }
        }
        (mu, mv)
    }

    /// Reciprocal within the (m1, m2) memory box, with the circulant lift
    /// exponent conjugated mod `l`: U^u V^v x^e -> U^(m1-u) V^(m2-v) x^(-e).
    pub fn bar(&self, m1: usize, m2: usize, l: usize) -> Result<Self, CodeError> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let mut out = Vec::with_capacity(entry.len());
            for m in entry {
                if m.u > m1 || m.v > m2 {
                    return Err(CodeError::MemoryExceeded { u: m.u, v: m.v, m1, m2 });
                }
                out.push(Monomial { u: m1 - m.u, v: m2 - m.v, lift: (l - m.lift % l) % l });
            }
            entries.push(out);
        }
        Self::new(self.rows, self.cols, entries)
    }

    pub fn transpose(&self) -> Self {
        let mut entries = vec![Vec::new(); self.rows * self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                entries[c * self.rows + r] = self.entry(r, c).to_vec();
            }
        }
        Self { rows: self.cols, cols: self.rows, entries }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut entries = vec![Vec::new(); rows * cols];
        for ra in 0..self.rows {
            for ca in 0..self.cols {
                for rb in 0..other.rows {
                    for cb in 0..other.cols {
                        let mut sum = Vec::new();
                        for ma in self.entry(ra, ca) {
                            for mb in other.entry(rb, cb) {
                                sum.push(Monomial {
                                    u: ma.u + mb.u,
                                    v: ma.v + mb.v,
                                    lift: ma.lift + mb.lift,
                                });
                            }
                        }
                        entries[(ra * other.rows + rb) * cols + ca * other.cols + cb] = sum;
                    }
                }
            }
        }
        let mut m = Self { rows, cols, entries };
        m.normalize();
        m
    }

    pub fn hstack(&self, other: &Self) -> Result<Self, CodeError> {
        if self.rows != other.rows {
            return Err(CodeError::Protograph("hstack row mismatch".into()));
        }
        let cols = self.cols + other.cols;
        let mut entries = vec![Vec::new(); self.rows * cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                entries[r * cols + c] = self.entry(r, c).to_vec();
            }
            for c in 0..other.cols {
                entries[r * cols + self.cols + c] = other.entry(r, c).to_vec();
            }
        }
        Ok(Self { rows: self.rows, cols, entries })
    }

    /// Builds a polynomial matrix from a binary base matrix plus partitioning
    /// matrices (U and V memory assignments) and circulant lift exponents.
    /// This is the input route for externally optimized partitionings.
    pub fn from_partition(
        base: &BinMatrix,
        part_u: &[Vec<usize>],
        part_v: &[Vec<usize>],
        lift_exp: &[Vec<usize>],
        m1: usize,
        m2: usize,
    ) -> Result<Self, CodeError> {
        let (rows, cols) = (base.rows(), base.cols());
        let grid_ok = |g: &[Vec<usize>]| g.len() == rows && g.iter().all(|r| r.len() == cols);
        if !grid_ok(part_u) || !grid_ok(part_v) || !grid_ok(lift_exp) {
            return Err(CodeError::Protograph("partition grid shape mismatch".into()));
        }
        let mut entries = vec![Vec::new(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                if !base.get(r, c) {
                    continue;
                }
                let (u, v) = (part_u[r][c], part_v[r][c]);
                if u > m1 || v > m2 {
                    return Err(CodeError::MemoryExceeded { u, v, m1, m2 });
                }
                entries[r * cols + c] = vec![Monomial { u, v, lift: lift_exp[r][c] }];
            }
        }
        Self::new(rows, cols, entries)
    }
}

/// Full specification of a 2D spatially-coupled HGP code.
#[derive(Clone, Debug)]
pub struct ScSpec {
    pub base_a: PolyMatrix,
    pub base_b: PolyMatrix,
    pub m1: usize,
    pub m2: usize,
    pub l1: usize,
    pub l2: usize,
    /// Circulant lift size applied to every monomial's x exponent.
    pub lift: usize,
    pub tail_biting: bool,
}

impl ScSpec {
    pub fn validate(&self) -> Result<(), CodeError> {
        let (au, av) = self.base_a.max_degrees();
        let (bu, bv) = self.base_b.max_degrees();
        if au > self.m1 || av > self.m2 || bu > self.m1 || bv > self.m2 {
            return Err(CodeError::MemoryExceeded {
                u: au.max(bu),
                v: av.max(bv),
                m1: self.m1,
                m2: self.m2,
            });
        }
        if self.l1 <= self.m1 || self.l2 <= self.m2 {
            return Err(CodeError::Protograph(format!(
                "coupling lengths ({}, {}) must exceed memories ({}, {})",
                self.l1, self.l2, self.m1, self.m2
            )));
        }
        if self.lift == 0 {
            return Err(CodeError::Protograph("lift size must be >= 1".into()));
        }
        if !self.tail_biting {
            return Err(CodeError::Protograph(
                "only tail-biting spatial coupling is supported".into(),
            ));
        }
        Ok(())
    }

    /// Guaranteed minimum logical-qubit count (n1-r1)(n2-r2) L1 L2 lift.
    pub fn k_lower_bound(&self) -> usize {
        let a_excess = self.base_a.cols.saturating_sub(self.base_a.rows);
        let b_excess = self.base_b.cols.saturating_sub(self.base_b.rows);
        a_excess * b_excess * self.l1 * self.l2 * self.lift
    }

    /// The toric code as a 2D SC instance: A = 1 + V, B = U + V,
    /// (m1, m2, L1, L2) = (1, 1, d, d).
    pub fn toric(d: usize) -> Self {
        let one = Monomial { u: 0, v: 0, lift: 0 };
        let v = Monomial { u: 0, v: 1, lift: 0 };
        let u = Monomial { u: 1, v: 0, lift: 0 };
        Self {
            base_a: PolyMatrix::new(1, 1, vec![vec![one, v]]).unwrap(),
            base_b: PolyMatrix::new(1, 1, vec![vec![u, v]]).unwrap(),
            m1: 1,
            m2: 1,
            l1: d,
            l2: d,
            lift: 1,
            tail_biting: true,
        }
    }
}

/// Assembles the SC-HGP code from a spec.
pub fn sc_hgp(spec: &ScSpec) -> Result<CssCode, CodeError> {
    spec.validate()?;
    let a = &spec.base_a;
    let b = &spec.base_b;
    let (r1, n1) = (a.rows, a.cols);
    let (r2, n2) = (b.rows, b.cols);
    let bar_a_t = a.bar(spec.m1, spec.m2, spec.lift)?.transpose();
    let bar_b_t = b.bar(spec.m1, spec.m2, spec.lift)?.transpose();

    // Characteristic function, X rows then Z rows.
    let fx = PolyMatrix::identity(n2).kron(a).hstack(&bar_b_t.kron(&PolyMatrix::identity(r1)))?;
    let fz = b.kron(&PolyMatrix::identity(n1)).hstack(&PolyMatrix::identity(r2).kron(&bar_a_t))?;
    debug_assert_eq!(fx.cols, n1 * n2 + r1 * r2);
    debug_assert_eq!(fx.rows, r1 * n2);
    debug_assert_eq!(fz.rows, r2 * n1);

    let hx = couple(&fx, spec)?;
    let hz = couple(&fz, spec)?;
    CssCode::from_checks(hx, hz, None, "sc")
}

/// Expands a polynomial matrix into its tail-biting block-circulant binary
/// form: the coefficient of U^u V^v x^e lands at block offset
/// (row - col) = (u, v) mod (L1, L2), with the circulant lift inside.
fn couple(f: &PolyMatrix, spec: &ScSpec) -> Result<BinMatrix, CodeError> {
    let (l1, l2, lift) = (spec.l1, spec.l2, spec.lift);
    let block_rows = f.rows * lift;
    let block_cols = f.cols * lift;
    let total_rows = block_rows * l1 * l2;
    let total_cols = block_cols * l1 * l2;
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); total_rows];
    for i in 0..f.rows {
        for j in 0..f.cols {
            for m in f.entry(i, j) {
                let e = m.lift % lift;
                for a1 in 0..l1 {
                    let b1 = (a1 + l1 - m.u % l1) % l1;
                    for a2 in 0..l2 {
                        let b2 = (a2 + l2 - m.v % l2) % l2;
                        let row_base = ((a1 * l2 + a2) * f.rows + i) * lift;
                        let col_base = ((b1 * l2 + b2) * f.cols + j) * lift;
                        for t in 0..lift {
                            rows[row_base + t].push(col_base + (t + e) % lift);
                        }
                    }
                }
            }
        }
    }
    Ok(BinMatrix::from_rows(total_cols, rows)?)
}

/// SC spec text format.
///
/// Header: "r1 n1 r2 n2 m1 m2 L1 L2 lift tb" (tb = 0/1), then r1 rows of n1
/// tokens for A and r2 rows of n2 tokens for B. A token is "." (zero) or
/// '+'-joined monomials, each a '*'-joined product of "1", "U", "U^a", "V",
/// "V^b", "x^e".
pub fn write_sc_spec<W: Write>(spec: &ScSpec, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "{} {} {} {} {} {} {} {} {} {}",
        spec.base_a.rows,
        spec.base_a.cols,
        spec.base_b.rows,
        spec.base_b.cols,
        spec.m1,
        spec.m2,
        spec.l1,
        spec.l2,
        spec.lift,
        spec.tail_biting as u8
    )?;
    for m in [&spec.base_a, &spec.base_b] {
        for r in 0..m.rows {
            let tokens: Vec<String> = (0..m.cols).map(|c| format_entry(m.entry(r, c))).collect();
            writeln!(w, "{}", tokens.join(" "))?;
        }
    }
    Ok(())
}

fn format_entry(entry: &[Monomial]) -> String {
    if entry.is_empty() {
        return ".".to_string();
    }
    entry
        .iter()
        .map(|m| {
            let mut parts = Vec::new();
            if m.lift > 0 {
                parts.push(format!("x^{}", m.lift));
            }
            if m.u > 0 {
                parts.push(if m.u == 1 { "U".into() } else { format!("U^{}", m.u) });
            }
            if m.v > 0 {
                parts.push(if m.v == 1 { "V".into() } else { format!("V^{}", m.v) });
            }
            if parts.is_empty() {
                "1".to_string()
            } else {
                parts.join("*")
            }
        })
        .collect::<Vec<_>>()
        .join("+")
}

pub fn read_sc_spec<R: BufRead>(r: R) -> Result<ScSpec, CodeError> {
    let mut lines = r
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CodeError::Protograph(e.to_string()))?
        .into_iter()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| CodeError::Protograph("empty SC spec".into()))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| CodeError::Protograph(format!("bad header: {header}"))))
        .collect::<Result<_, _>>()?;
    let [r1, n1, r2, n2, m1, m2, l1, l2, lift, tb] = nums[..] else {
        return Err(CodeError::Protograph(format!("bad header: {header}")));
    };
    let mut read_matrix = |rows: usize, cols: usize| -> Result<PolyMatrix, CodeError> {
        let mut entries = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| CodeError::Protograph("truncated SC spec".into()))?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != cols {
                return Err(CodeError::Protograph(format!(
                    "expected {cols} tokens, got {}: {line}",
                    tokens.len()
                )));
            }
            for t in tokens {
                entries.push(parse_entry(t)?);
            }
        }
        PolyMatrix::new(rows, cols, entries)
    };
    let base_a = read_matrix(r1, n1)?;
    let base_b = read_matrix(r2, n2)?;
    Ok(ScSpec { base_a, base_b, m1, m2, l1, l2, lift, tail_biting: tb != 0 })
}

pub fn load_sc_spec<P: AsRef<Path>>(path: P) -> Result<ScSpec, CodeError> {
    let f = std::fs::File::open(path).map_err(|e| CodeError::Protograph(e.to_string()))?;
    read_sc_spec(io::BufReader::new(f))
}

fn parse_entry(token: &str) -> Result<Vec<Monomial>, CodeError> {
    if token == "." {
        return Ok(Vec::new());
    }
    token
        .split('+')
        .map(|term| {
            let mut m = Monomial { u: 0, v: 0, lift: 0 };
            for factor in term.split('*') {
                if factor == "1" {
                    continue;
                } else if factor == "U" {
                    m.u += 1;
                } else if factor == "V" {
                    m.v += 1;
                } else if let Some(e) = factor.strip_prefix("U^") {
                    m.u += e
                        .parse::<usize>()
                        .map_err(|_| CodeError::Protograph(format!("bad factor: {factor}")))?;
                } else if let Some(e) = factor.strip_prefix("V^") {
                    m.v += e
                        .parse::<usize>()
                        .map_err(|_| CodeError::Protograph(format!("bad factor: {factor}")))?;
                } else if let Some(e) = factor.strip_prefix("x^") {
                    m.lift += e
                        .parse::<usize>()
                        .map_err(|_| CodeError::Protograph(format!("bad factor: {factor}")))?;
                } else {
                    return Err(CodeError::Protograph(format!("bad factor: {factor}")));
                }
            }
            Ok(m)
        })
        .collect()
}
