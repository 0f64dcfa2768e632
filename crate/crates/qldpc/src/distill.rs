//! Bell-distillation protocol layer: the joint two-node code, the folding of
//! two-sided noise onto a single node, and a direct two-sided Monte Carlo
//! oracle that validates the folding on small codes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codes::CssCode;
use crate::gf2::BinMatrix;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("{name} = {value} outside [{lo}, {hi}]")]
    ProbabilityOutOfRange { name: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("code too large for the direct oracle: {checks} checks on one side (max {max})")]
    CodeTooLarge { checks: usize, max: usize },
}

/// Two-sided noise parameters together with their folded single-sided
/// equivalents: p_bell_eff = 2 p_bell - (4/3) p_bell^2, p_gate_eff = 2 p_gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoldedNoise {
    pub p_bell: f64,
    pub p_gate: f64,
    pub p_bell_eff: f64,
    pub p_gate_eff: f64,
}

impl FoldedNoise {
    pub fn new(p_bell: f64, p_gate: f64) -> Result<Self, DistillError> {
        Ok(Self {
            p_bell,
            p_gate,
            p_bell_eff: fold_bell_noise(p_bell)?,
            p_gate_eff: fold_gate_noise(p_gate)?,
        })
    }

    /// Noise already given in effective (folded) form; the two-sided fields
    /// are unused by the single-sided simulation path.
    pub fn from_effective(p_bell_eff: f64, p_gate_eff: f64) -> Result<Self, DistillError> {
        check_range("p_bell_eff", p_bell_eff, 0.0, 1.0)?;
        check_range("p_gate_eff", p_gate_eff, 0.0, 1.0)?;
        Ok(Self { p_bell: f64::NAN, p_gate: f64::NAN, p_bell_eff, p_gate_eff })
    }
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), DistillError> {
    if !(lo..=hi).contains(&value) {
        return Err(DistillError::ProbabilityOutOfRange { name, value, lo, hi });
    }
    Ok(())
}

/// Effective single-sided depolarizing strength reproducing the two-sided
/// Bell-pair error distribution exactly: 2p - (4/3)p^2.
pub fn fold_bell_noise(p_bell: f64) -> Result<f64, DistillError> {
    check_range("p_bell", p_bell, 0.0, 1.0)?;
    Ok(2.0 * p_bell - 4.0 / 3.0 * p_bell * p_bell)
}

/// Effective single-sided two-qubit gate noise: 2p, ignoring higher-order
/// cross terms (conservative for many rounds).
pub fn fold_gate_noise(p_gate: f64) -> Result<f64, DistillError> {
    check_range("p_gate", p_gate, 0.0, 0.5)?;
    Ok(2.0 * p_gate)
}

/// The two-node code: every base stabilizer s becomes s (x) s on 2n qubits,
/// and each logical Bell pair is stabilized by Lx (x) Lx and Lz (x) Lz.
#[derive(Clone, Debug)]
pub struct JointCode {
    pub checks_x: BinMatrix,
    pub checks_z: BinMatrix,
    pub bell_logicals_x: BinMatrix,
    pub bell_logicals_z: BinMatrix,
    pub base: CssCode,
}

pub fn joint_code(code: &CssCode) -> JointCode {
    JointCode {
        checks_x: replicate(&code.hx),
        checks_z: replicate(&code.hz),
        bell_logicals_x: replicate(&code.lx),
        bell_logicals_z: replicate(&code.lz),
        base: code.clone(),
    }
}

/// Maps each row support s to s | (s + n) on a doubled qubit register.
fn replicate(m: &BinMatrix) -> BinMatrix {
    let n = m.cols();
    let rows = m
        .row_supports()
        .iter()
        .map(|s| s.iter().flat_map(|&q| [q, q + n]).collect())
        .collect();
    BinMatrix::from_rows(2 * n, rows).expect("replicated supports in range")
}

/// Monte Carlo estimate of a logical Bell failure rate.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct OracleEstimate {
    pub failures: u64,
    pub shots: u64,
    pub rate: f64,
    pub stderr: f64,
}

impl OracleEstimate {
    fn from_counts(failures: u64, shots: u64) -> Self {
        let rate = failures as f64 / shots as f64;
        let stderr = (rate * (1.0 - rate) / shots as f64).sqrt();
        Self { failures, shots, rate, stderr }
    }
}

/// Direct simulation of the full two-node protocol for one QEC round:
/// per-leg Bell depolarizing at p_bell, noisy single-ancilla extraction on
/// both sides at p_gate, joint (XORed) syndrome decoding by exhaustive
/// minimum-weight lookup, then a final noiseless round.
pub fn two_sided_oracle(
    code: &CssCode,
    noise: &FoldedNoise,
    shots: u64,
    seed: u64,
) -> Result<OracleEstimate, DistillError> {
    protocol_monte_carlo(code, noise.p_bell, noise.p_bell, noise.p_gate, noise.p_gate, shots, seed)
}

/// The folded arm: one noiseless side, the other carrying the effective
/// single-sided strengths. Statistically equivalent to [`two_sided_oracle`].
pub fn folded_oracle(
    code: &CssCode,
    noise: &FoldedNoise,
    shots: u64,
    seed: u64,
) -> Result<OracleEstimate, DistillError> {
    protocol_monte_carlo(code, 0.0, noise.p_bell_eff, 0.0, noise.p_gate_eff, shots, seed)
}

fn protocol_monte_carlo(
    code: &CssCode,
    p_bell_a: f64,
    p_bell_b: f64,
    p_gate_a: f64,
    p_gate_b: f64,
    shots: u64,
    seed: u64,
) -> Result<OracleEstimate, DistillError> {
    let dec_z = LookupDecoder::new(&code.hz)?;
    let dec_x = LookupDecoder::new(&code.hx)?;
    let failures = (0..shots)
        .into_par_iter()
        .filter(|&shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shot);
            protocol_shot(code, &dec_z, &dec_x, p_bell_a, p_bell_b, p_gate_a, p_gate_b, &mut rng)
        })
        .count() as u64;
    Ok(OracleEstimate::from_counts(failures, shots))
}

/// Pauli frame of one node's data register.
struct Frame {
    ex: Vec<u8>,
    ez: Vec<u8>,
}

impl Frame {
    fn depolarize(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut f = Frame { ex: vec![0; n], ez: vec![0; n] };
        if p > 0.0 {
            for q in 0..n {
                if rng.gen_bool(p) {
                    match rng.gen_range(0..3) {
                        0 => f.ex[q] = 1,
                        1 => f.ez[q] = 1,
                        _ => {
                            f.ex[q] = 1;
                            f.ez[q] = 1;
                        }
                    }
                }
            }
        }
        f
    }
}

/// One noisy extraction cycle on one side: Z checks (ancilla |0>, CX
/// data->ancilla, measure Z) then X checks (ancilla |+>, CX ancilla->data,
/// measure X), with depolarize2(p_gate) after every CX.
fn extract_cycle(code: &CssCode, f: &mut Frame, p_gate: f64, rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<u8>) {
    let mut syn_z = Vec::with_capacity(code.hz.rows());
    for support in code.hz.row_supports() {
        let (mut ax, mut az) = (0u8, 0u8);
        for &q in support {
            ax ^= f.ex[q];
            f.ez[q] ^= az;
            if p_gate > 0.0 && rng.gen_bool(p_gate) {
                let pauli = rng.gen_range(1..16u8);
                f.ex[q] ^= pauli & 1;
                f.ez[q] ^= (pauli >> 1) & 1;
                ax ^= (pauli >> 2) & 1;
                az ^= (pauli >> 3) & 1;
            }
        }
        syn_z.push(ax);
    }
    let mut syn_x = Vec::with_capacity(code.hx.rows());
    for support in code.hx.row_supports() {
        let (mut ax, mut az) = (0u8, 0u8);
        for &q in support {
            f.ex[q] ^= ax;
            az ^= f.ez[q];
            if p_gate > 0.0 && rng.gen_bool(p_gate) {
                let pauli = rng.gen_range(1..16u8);
                ax ^= pauli & 1;
                az ^= (pauli >> 1) & 1;
                f.ex[q] ^= (pauli >> 2) & 1;
                f.ez[q] ^= (pauli >> 3) & 1;
            }
        }
        syn_x.push(az);
    }
    (syn_z, syn_x)
}

#[allow(clippy::too_many_arguments)]
fn protocol_shot(
    code: &CssCode,
    dec_z: &LookupDecoder,
    dec_x: &LookupDecoder,
    p_bell_a: f64,
    p_bell_b: f64,
    p_gate_a: f64,
    p_gate_b: f64,
    rng: &mut ChaCha8Rng,
) -> bool {
    let n = code.n;
    let mut fa = Frame::depolarize(n, p_bell_a, rng);
    let mut fb = Frame::depolarize(n, p_bell_b, rng);
    let (sza, sxa) = extract_cycle(code, &mut fa, p_gate_a, rng);
    let (szb, sxb) = extract_cycle(code, &mut fb, p_gate_b, rng);

    // On a Bell pair, errors on both legs fold into one effective error and
    // the joint stabilizer outcome is the XOR of the per-side outcomes.
    let mut ex: Vec<u8> = fa.ex.iter().zip(&fb.ex).map(|(a, b)| a ^ b).collect();
    let mut ez: Vec<u8> = fa.ez.iter().zip(&fb.ez).map(|(a, b)| a ^ b).collect();
    let syn_z: Vec<u8> = sza.iter().zip(&szb).map(|(a, b)| a ^ b).collect();
    let syn_x: Vec<u8> = sxa.iter().zip(&sxb).map(|(a, b)| a ^ b).collect();

    // Noisy-round correction, then a noiseless round with the true syndrome.
    dec_z.correct(&syn_z, &mut ex);
    dec_x.correct(&syn_x, &mut ez);
    dec_z.correct(&code.hz.mul_vec(&ex).expect("length"), &mut ex);
    dec_x.correct(&code.hx.mul_vec(&ez).expect("length"), &mut ez);

    let flips = |logicals: &BinMatrix, err: &[u8]| {
        logicals
            .row_supports()
            .iter()
            .any(|s| s.iter().fold(0u8, |acc, &q| acc ^ err[q]) == 1)
    };
    flips(&code.lx, &ez) || flips(&code.lz, &ex)
}

/// Exhaustive syndrome -> minimum-weight-error table, filled by enumerating
/// supports in order of increasing weight. Feasible for <= `MAX_CHECKS` rows.
pub struct LookupDecoder {
    table: Vec<Option<Vec<usize>>>,
    checks: BinMatrix,
}

const MAX_CHECKS: usize = 24;

impl LookupDecoder {
    pub fn new(checks: &BinMatrix) -> Result<Self, DistillError> {
        let r = checks.rows();
        if r > MAX_CHECKS {
            return Err(DistillError::CodeTooLarge { checks: r, max: MAX_CHECKS });
        }
        let n = checks.cols();
        let cols = checks.transpose();
        let reachable = 1usize << crate::gf2::BinMatrix::rank(checks);
        let mut table: Vec<Option<Vec<usize>>> = vec![None; 1 << r];
        table[0] = Some(Vec::new());
        let mut filled = 1;
        'outer: for w in 1..=n {
            let mut combo: Vec<usize> = (0..w).collect();
            loop {
                let mut syn = 0usize;
                for &q in &combo {
                    for &c in cols.row(q) {
                        syn ^= 1 << c;
                    }
                }
                if table[syn].is_none() {
                    table[syn] = Some(combo.clone());
                    filled += 1;
                    if filled == reachable {
                        break 'outer;
                    }
                }
                if !next_combination(&mut combo, n) {
                    break;
                }
            }
        }
        Ok(Self { table, checks: checks.clone() })
    }

    /// XORs the stored minimum-weight error for `syndrome` into `err`.
    /// Unreachable syndromes leave `err` untouched.
    pub fn correct(&self, syndrome: &[u8], err: &mut [u8]) {
        let idx = syndrome
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i));
        if let Some(support) = &self.table[idx] {
            for &q in support {
                err[q] ^= 1;
            }
        }
    }

    pub fn checks(&self) -> &BinMatrix {
        &self.checks
    }
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let w = combo.len();
    for i in (0..w).rev() {
        if combo[i] < n - (w - i) {
            combo[i] += 1;
            for j in i + 1..w {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
