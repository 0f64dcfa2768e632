//! Quasi-cyclic lifted product codes over the ring F2[x]/(x^l - 1).

use std::io::{self, BufRead, Write};
use std::path::Path;

use crate::gf2::BinMatrix;

use super::{CodeError, CssCode};

/// A protograph with monomial entries: Some(e) stands for x^e, None for 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Protograph {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Option<usize>>,
}

impl Protograph {
    pub fn new(rows: usize, cols: usize, entries: Vec<Option<usize>>) -> Result<Self, CodeError> {
        if entries.len() != rows * cols {
            return Err(CodeError::Protograph(format!(
                "{}x{} protograph needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn get(&self, r: usize, c: usize) -> Option<usize> {
        self.entries[r * self.cols + c]
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![None; n * n];
        for i in 0..n {
            entries[i * n + i] = Some(0);
        }
        Self { rows: n, cols: n, entries }
    }

    /// Conjugate transpose: entry x^e maps to x^(l - e mod l). This is the
    /// ring-level transpose matching binary transposition of the lift.
    pub fn conj_transpose(&self, l: usize) -> Self {
        let mut entries = vec![None; self.rows * self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                entries[c * self.rows + r] = self.get(r, c).map(|e| (l - e % l) % l);
            }
        }
        Self { rows: self.cols, cols: self.rows, entries }
    }

    /// Kronecker product; monomial exponents add (mod nothing here, both
    /// factors must already be reduced mod l).
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut entries = vec![None; rows * cols];
        for ra in 0..self.rows {
            for ca in 0..self.cols {
                let Some(ea) = self.get(ra, ca) else { continue };
                for rb in 0..other.rows {
                    for cb in 0..other.cols {
                        if let Some(eb) = other.get(rb, cb) {
                            let r = ra * other.rows + rb;
                            let c = ca * other.cols + cb;
                            entries[r * cols + c] = Some(ea + eb);
                        }
                    }
                }
            }
        }
        Self { rows, cols, entries }
    }

    pub fn hstack(&self, other: &Self) -> Result<Self, CodeError> {
        if self.rows != other.rows {
            return Err(CodeError::Protograph("hstack row mismatch".into()));
        }
        let cols = self.cols + other.cols;
        let mut entries = vec![None; self.rows * cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                entries[r * cols + c] = self.get(r, c);
            }
            for c in 0..other.cols {
                entries[r * cols + self.cols + c] = other.get(r, c);
            }
        }
        Ok(Self { rows: self.rows, cols, entries })
    }

    /// Replaces every monomial by its l x l circulant and every zero entry by
    /// the l x l zero block.
    pub fn lift(&self, l: usize) -> Result<BinMatrix, CodeError> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.rows * l];
        for r in 0..self.rows {
            for c in 0..self.cols {
                if let Some(e) = self.get(r, c) {
                    let e = e % l;
                    for t in 0..l {
                        rows[r * l + t].push(c * l + (t + e) % l);
                    }
                }
            }
        }
        Ok(BinMatrix::from_rows(self.cols * l, rows)?)
    }

    /// Text format: header "rows cols lift", then a grid of tokens,
    /// "x^e" (or "1" for x^0) for monomials and "." for zero entries.
    pub fn write_text<W: Write>(&self, mut w: W, l: usize) -> io::Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, l)?;
        for r in 0..self.rows {
            let tokens: Vec<String> = (0..self.cols)
                .map(|c| match self.get(r, c) {
                    None => ".".to_string(),
                    Some(0) => "1".to_string(),
                    Some(e) => format!("x^{e}"),
                })
                .collect();
            writeln!(w, "{}", tokens.join(" "))?;
        }
        Ok(())
    }

    /// Parses the text format; returns the protograph and the lift size.
    pub fn read_text<R: BufRead>(r: R) -> Result<(Self, usize), CodeError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| CodeError::Protograph("empty protograph file".into()))?
            .map_err(|e| CodeError::Protograph(e.to_string()))?;
        let parts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| CodeError::Protograph(format!("bad header: {header}"))))
            .collect::<Result<_, _>>()?;
        let [rows, cols, l] = parts[..] else {
            return Err(CodeError::Protograph(format!("bad header: {header}")));
        };
        let mut entries = Vec::with_capacity(rows * cols);
        for line in lines {
            let line = line.map_err(|e| CodeError::Protograph(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for token in line.split_whitespace() {
                entries.push(parse_monomial(token)?);
            }
        }
        Ok((Self::new(rows, cols, entries)?, l))
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<(Self, usize), CodeError> {
        let f = std::fs::File::open(path).map_err(|e| CodeError::Protograph(e.to_string()))?;
        Self::read_text(io::BufReader::new(f))
    }
}

fn parse_monomial(token: &str) -> Result<Option<usize>, CodeError> {
    match token {
        "." => Ok(None),
        "1" => Ok(Some(0)),
        t if t.starts_with("x^") => t[2..]
            .parse()
            .map(Some)
            .map_err(|_| CodeError::Protograph(format!("bad monomial: {t}"))),
        "x" => Ok(Some(1)),
        t => Err(CodeError::Protograph(format!("bad token: {t}"))),
    }
}

/// Lifted product of two monomial protographs over F2[x]/(x^l - 1):
/// Bx = [B1^T (x) I | I (x) B2], Bz = [I (x) B2^T | B1 (x) I], with ring
/// transposes taken as conjugate transposes, then lifted entrywise.
pub fn lifted_product(b1: &Protograph, b2: &Protograph, l: usize) -> Result<CssCode, CodeError> {
    for p in [b1, b2] {
        for e in p.entries.iter().flatten() {
            if *e >= l {
                return Err(CodeError::ExponentTooLarge { exponent: *e, lift: l });
            }
        }
    }
    let (m1, n1) = (b1.rows, b1.cols);
    let (m2, n2) = (b2.rows, b2.cols);
    let bx = b1
        .conj_transpose(l)
        .kron(&Protograph::identity(m2))
        .hstack(&Protograph::identity(n1).kron(b2))?;
    let bz = Protograph::identity(m1)
        .kron(&b2.conj_transpose(l))
        .hstack(&b1.kron(&Protograph::identity(n2)))?;
    let hx = bx.lift(l)?;
    let hz = bz.lift(l)?;
    debug_assert_eq!(hx.cols(), l * (n1 * n2 + m1 * m2));
    CssCode::from_checks(hx, hz, None, "lp")
}

/// The four 3x5 base matrices used for the LP family, with lift sizes
/// l = 16, 21, 30, 42 and classical distances 12, 16, 20, 24.
pub fn lp_base_matrix(index: usize) -> Result<(Protograph, usize, usize), CodeError> {
    let (grid, l, d): ([[usize; 5]; 3], usize, usize) = match index {
        1 => ([[0, 0, 0, 0, 0], [0, 2, 4, 7, 11], [0, 3, 10, 14, 15]], 16, 12),
        2 => ([[0, 0, 0, 0, 0], [0, 4, 5, 7, 17], [0, 14, 18, 12, 11]], 21, 16),
        3 => ([[0, 0, 0, 0, 0], [0, 2, 14, 24, 25], [0, 16, 11, 14, 13]], 30, 20),
        4 => ([[0, 0, 0, 0, 0], [0, 6, 7, 9, 30], [0, 40, 15, 31, 35]], 42, 24),
        _ => return Err(CodeError::Protograph(format!("no LP base matrix #{index}"))),
    };
    let entries = grid.iter().flatten().map(|&e| Some(e)).collect();
    Ok((Protograph::new(3, 5, entries)?, l, d))
}

/// Builds the family instance LP(B_i, B_i) with its designed lift size.
pub fn lp_family_instance(index: usize) -> Result<CssCode, CodeError> {
    let (base, l, d) = lp_base_matrix(index)?;
    let mut code = lifted_product(&base, &base, l)?;
    code.d_upper = Some(d);
    Ok(code)
}
