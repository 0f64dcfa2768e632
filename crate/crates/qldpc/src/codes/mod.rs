//! Code construction: classical component codes and the three qLDPC
//! families (hypergraph product, lifted product, spatially coupled).

pub mod classical;
pub mod css;
pub mod lp;
pub mod sc;

use thiserror::Error;

pub use classical::{
    classical_min_distance, girth, sample_tanner_graph, sample_tanner_graph_targeted,
    spectral_gap, ClassicalCode,
};
pub use css::{estimate_min_distance, exhaustive_min_distance, logical_basis, CssCode};
pub use lp::{lifted_product, lp_base_matrix, lp_family_instance, Protograph};
pub use sc::{load_sc_spec, read_sc_spec, sc_hgp, write_sc_spec, Monomial, PolyMatrix, ScSpec};

use crate::gf2::{BinMatrix, Gf2Error};

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("n_bits * bit_degree must be divisible by check_degree ({n_bits} * {bit_degree} vs {check_degree})")]
    DegreeMismatch { n_bits: usize, bit_degree: usize, check_degree: usize },
    #[error("no girth >= 6 candidate found in {trials} trials")]
    NoCandidate { trials: usize },
    #[error("Tanner graph is disconnected")]
    DisconnectedGraph,
    #[error("hx and hz must act on the same qubits ({x_cols} vs {z_cols})")]
    CheckShapeMismatch { x_cols: usize, z_cols: usize },
    #[error("CSS condition hx * hz^T = 0 violated")]
    CssConditionViolated,
    #[error("logical basis extraction failed: {0}")]
    LogicalExtraction(String),
    #[error("monomial exponent {exponent} >= lift size {lift}")]
    ExponentTooLarge { exponent: usize, lift: usize },
    #[error("monomial degree ({u}, {v}) exceeds memories ({m1}, {m2})")]
    MemoryExceeded { u: usize, v: usize, m1: usize, m2: usize },
    #[error("protograph error: {0}")]
    Protograph(String),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// Designed parameters of the HGP family instances: classical block length,
/// target classical distance and the resulting [[n, k, d]].
pub const HGP_FAMILY: [(usize, usize, usize, usize, usize); 3] =
    [(12, 4, 225, 9, 4), (20, 6, 625, 25, 6), (28, 8, 1225, 49, 8)];

/// Builds HGP family instance i (1-based) from a (3,4)-regular classical
/// code sampled to hit the designed distance.
///
/// Instance 1 relaxes the girth filter to 4: the unique girth-6 (3,4) graph
/// on 12 bits is the AG(2,3) incidence structure, whose code has distance 6,
/// so the designed [[225,9,4]] is only reachable at girth 4.
pub fn hgp_family_instance(index: usize, seed: u64) -> Result<CssCode, CodeError> {
    let (n_bits, d_target, ..) = *HGP_FAMILY
        .get(index.wrapping_sub(1))
        .ok_or(CodeError::Protograph(format!("no HGP family instance #{index}")))?;
    let c = classical::sample_tanner_graph_targeted(
        n_bits,
        3,
        4,
        2000,
        seed,
        index != 1,
        Some(d_target),
    )?;
    CssCode::hypergraph_product(&c, &c)
}

/// The distance-d surface code as the hypergraph product of the length-d
/// repetition code with itself.
pub fn surface_code(d: usize) -> Result<CssCode, CodeError> {
    let h = ClassicalCode::repetition(d);
    let (dist, exact) = classical_min_distance(&h, 1 << 16, 0);
    let c = ClassicalCode { h, girth: None, spectral_gap: 0.0, d_estimate: dist, d_exact: exact };
    CssCode::hypergraph_product(&c, &c)
}

/// Writes hx, hz, lx, lz in the matrix text format plus a JSON manifest.
pub fn export_code(code: &CssCode, dir: &std::path::Path) -> Result<(), CodeError> {
    std::fs::create_dir_all(dir).map_err(Gf2Error::Io)?;
    code.hx.save(dir.join("hx.txt"))?;
    code.hz.save(dir.join("hz.txt"))?;
    code.lx.save(dir.join("lx.txt"))?;
    code.lz.save(dir.join("lz.txt"))?;
    let manifest = serde_json::json!({
        "family": code.family,
        "n": code.n,
        "k": code.k,
        "d_upper": code.d_upper,
    });
    std::fs::write(
        dir.join("code.json"),
        serde_json::to_string_pretty(&manifest).expect("json"),
    )
    .map_err(Gf2Error::Io)?;
    Ok(())
}

/// Loads a code exported by [`export_code`].
pub fn import_code(dir: &std::path::Path) -> Result<CssCode, CodeError> {
    let hx = BinMatrix::load(dir.join("hx.txt"))?;
    let hz = BinMatrix::load(dir.join("hz.txt"))?;
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("code.json")).map_err(Gf2Error::Io)?,
    )
    .map_err(|e| CodeError::Protograph(format!("bad code manifest: {e}")))?;
    let d_upper = manifest["d_upper"].as_u64().map(|d| d as usize);
    let family = manifest["family"].as_str().unwrap_or("file").to_string();
    CssCode::from_checks(hx, hz, d_upper, family)
}
