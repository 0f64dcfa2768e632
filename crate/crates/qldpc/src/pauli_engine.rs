//! Pauli-frame engine: compiles a noisy circuit into a detector error model
//! (the spacetime code) by a single backward sweep, and samples detector /
//! observable bits at high shot throughput.

use std::collections::HashMap;
use std::io::{self, BufRead};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::{Instruction, NoisyCircuit};
use crate::gf2::BinMatrix;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("nondeterministic noiseless detector: {0}")]
    NondeterministicDetector(String),
    #[error("model parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One independent fault mechanism: with probability `p`, flip the listed
/// detectors and observables.
#[derive(Clone, Debug, PartialEq)]
pub struct Mechanism {
    pub p: f64,
    pub detectors: Vec<u32>,
    pub observables: Vec<u32>,
}

/// The detector error model: independent mechanisms over a detector /
/// observable bit space.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    pub n_detectors: usize,
    pub n_observables: usize,
    pub mechanisms: Vec<Mechanism>,
    /// Number of raw (pre-merge, pre-drop) mechanisms the circuit produced.
    pub n_raw_mechanisms: usize,
}

impl DetectorModel {
    /// Detectors x mechanisms incidence.
    pub fn check_matrix(&self) -> BinMatrix {
        let rows: Vec<Vec<usize>> = transpose_membership(
            self.n_detectors,
            self.mechanisms.iter().map(|m| &m.detectors),
        );
        BinMatrix::from_rows(self.mechanisms.len(), rows).expect("valid membership")
    }

    /// Observables x mechanisms incidence.
    pub fn obs_matrix(&self) -> BinMatrix {
        let rows: Vec<Vec<usize>> = transpose_membership(
            self.n_observables,
            self.mechanisms.iter().map(|m| &m.observables),
        );
        BinMatrix::from_rows(self.mechanisms.len(), rows).expect("valid membership")
    }

    pub fn priors(&self) -> Vec<f64> {
        self.mechanisms.iter().map(|m| m.p).collect()
    }

    /// Text format: one mechanism per line, "error(p) D3 D17 L0".
    pub fn write_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "DETECTORS {} OBSERVABLES {}", self.n_detectors, self.n_observables);
        for m in &self.mechanisms {
            let _ = write!(s, "error({})", m.p);
            for d in &m.detectors {
                let _ = write!(s, " D{d}");
            }
            for l in &m.observables {
                let _ = write!(s, " L{l}");
            }
            let _ = writeln!(s);
        }
        s
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, EngineError> {
        let mut model = DetectorModel {
            n_detectors: 0,
            n_observables: 0,
            mechanisms: Vec::new(),
            n_raw_mechanisms: 0,
        };
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("DETECTORS ") {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                let [d, kw, o] = toks[..] else {
                    return Err(EngineError::Parse(line.into()));
                };
                if kw != "OBSERVABLES" {
                    return Err(EngineError::Parse(line.into()));
                }
                model.n_detectors =
                    d.parse().map_err(|_| EngineError::Parse(line.into()))?;
                model.n_observables =
                    o.parse().map_err(|_| EngineError::Parse(line.into()))?;
                continue;
            }
            let mut toks = line.split_whitespace();
            let head = toks.next().unwrap();
            let p: f64 = head
                .strip_prefix("error(")
                .and_then(|t| t.strip_suffix(')'))
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| EngineError::Parse(format!("bad mechanism head: {head}")))?;
            let mut m = Mechanism { p, detectors: Vec::new(), observables: Vec::new() };
            for t in toks {
                let parse = |s: &str| {
                    s.parse::<u32>().map_err(|_| EngineError::Parse(format!("bad index: {t}")))
                };
                if let Some(d) = t.strip_prefix('D') {
                    m.detectors.push(parse(d)?);
                } else if let Some(l) = t.strip_prefix('L') {
                    m.observables.push(parse(l)?);
                } else {
                    return Err(EngineError::Parse(format!("bad token: {t}")));
                }
            }
            model.mechanisms.push(m);
        }
        model.n_raw_mechanisms = model.mechanisms.len();
        Ok(model)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), EngineError> {
        std::fs::write(path, self.write_text())?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, EngineError> {
        let f = std::fs::File::open(path)?;
        Self::read_text(io::BufReader::new(f))
    }
}

fn transpose_membership<'a, I>(n_rows: usize, memberships: I) -> Vec<Vec<usize>>
where
    I: Iterator<Item = &'a Vec<u32>>,
{
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
    for (mech, members) in memberships.enumerate() {
        for &r in members {
            rows[r as usize].push(mech);
        }
    }
    rows
}

/// XOR-combination of two independent flip probabilities.
pub fn merge_priors(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

/// A raw mechanism before merging: the Pauli flips applied at an instruction
/// site, with the resulting signature.
#[derive(Clone, Debug)]
pub struct RawMechanism {
    pub instruction: usize,
    /// (qubit, x component, z component) flips.
    pub flips: Vec<(usize, bool, bool)>,
    pub p: f64,
    pub detectors: Vec<u32>,
    pub observables: Vec<u32>,
}

/// Enumerates every fault mechanism of every noise site with its signature,
/// by sweeping the circuit backward once while maintaining the effect of an
/// X / Z error on each qubit as a (detectors + observables) bitset.
pub fn raw_mechanisms(circuit: &NoisyCircuit) -> Result<Vec<RawMechanism>, EngineError> {
    let n_det = circuit.detectors.len();
    let n_obs = circuit.observables.len();
    let nbits = n_det + n_obs;
    let words = nbits.div_ceil(64);
    let n_qubits = circuit.n_qubits();

    // Measurement index -> bit positions of detectors/observables it joins.
    let n_meas = circuit.n_measurements();
    let mut sig: Vec<Vec<u32>> = vec![Vec::new(); n_meas];
    for (d, det) in circuit.detectors.iter().enumerate() {
        for &m in det {
            sig[m].push(d as u32);
        }
    }
    for (k, obs) in circuit.observables.iter().enumerate() {
        for &m in obs {
            sig[m].push((n_det + k) as u32);
        }
    }
    // Measurement index per instruction (forward order).
    let mut meas_of = vec![usize::MAX; circuit.instructions.len()];
    let mut count = 0;
    for (i, inst) in circuit.instructions.iter().enumerate() {
        if matches!(inst, Instruction::MeasureZ(_) | Instruction::MeasureX(_)) {
            meas_of[i] = count;
            count += 1;
        }
    }

    let mut eff_x: Vec<Vec<u64>> = vec![vec![0; words]; n_qubits];
    let mut eff_z: Vec<Vec<u64>> = vec![vec![0; words]; n_qubits];
    let is_zero = |v: &[u64]| v.iter().all(|&w| w == 0);
    let mut out = Vec::new();
    let mut acc = vec![0u64; words];

    for (i, inst) in circuit.instructions.iter().enumerate().rev() {
        match *inst {
            Instruction::Tick => {}
            Instruction::Cx { control, target } => {
                // X_c -> X_c X_t and Z_t -> Z_c Z_t under conjugation.
                let (ex_t, ex_c) = two_rows(&mut eff_x, target, control);
                xor_into(ex_c, ex_t);
                let (ez_c, ez_t) = two_rows(&mut eff_z, control, target);
                xor_into(ez_t, ez_c);
            }
            Instruction::MeasureZ(q) => {
                // A Z error after a Z measurement stabilizes the collapsed
                // state; it must have no remaining effect.
                if !is_zero(&eff_z[q]) {
                    return Err(EngineError::NondeterministicDetector(format!(
                        "Z on qubit {q} after M_Z at instruction {i} has an effect"
                    )));
                }
                for &b in &sig[meas_of[i]] {
                    eff_x[q][(b / 64) as usize] ^= 1 << (b % 64);
                }
            }
            Instruction::MeasureX(q) => {
                if !is_zero(&eff_x[q]) {
                    return Err(EngineError::NondeterministicDetector(format!(
                        "X on qubit {q} after M_X at instruction {i} has an effect"
                    )));
                }
                for &b in &sig[meas_of[i]] {
                    eff_z[q][(b / 64) as usize] ^= 1 << (b % 64);
                }
            }
            Instruction::PrepZ(q) => {
                // Z right after |0> preparation acts trivially; a nonzero
                // effect means some detector reads gauge, i.e. is random.
                if !is_zero(&eff_z[q]) {
                    return Err(EngineError::NondeterministicDetector(format!(
                        "Z after PREP_Z on qubit {q} at instruction {i} has an effect"
                    )));
                }
                fill_zero(&mut eff_x[q]);
            }
            Instruction::PrepX(q) => {
                if !is_zero(&eff_x[q]) {
                    return Err(EngineError::NondeterministicDetector(format!(
                        "X after PREP_X on qubit {q} at instruction {i} has an effect"
                    )));
                }
                fill_zero(&mut eff_z[q]);
            }
            Instruction::Depolarize1 { q, p } => {
                for mask in 1u8..4 {
                    let (x, z) = (mask & 1 != 0, mask & 2 != 0);
                    fill_zero(&mut acc);
                    if x {
                        xor_into(&mut acc, &eff_x[q]);
                    }
                    if z {
                        xor_into(&mut acc, &eff_z[q]);
                    }
                    out.push(raw_from_bits(i, vec![(q, x, z)], p / 3.0, &acc, n_det));
                }
            }
            Instruction::Depolarize2 { a, b, p } => {
                for mask in 1u8..16 {
                    let (xa, za) = (mask & 1 != 0, mask & 2 != 0);
                    let (xb, zb) = (mask & 4 != 0, mask & 8 != 0);
                    fill_zero(&mut acc);
                    if xa {
                        xor_into(&mut acc, &eff_x[a]);
                    }
                    if za {
                        xor_into(&mut acc, &eff_z[a]);
                    }
                    if xb {
                        xor_into(&mut acc, &eff_x[b]);
                    }
                    if zb {
                        xor_into(&mut acc, &eff_z[b]);
                    }
                    out.push(raw_from_bits(
                        i,
                        vec![(a, xa, za), (b, xb, zb)],
                        p / 15.0,
                        &acc,
                        n_det,
                    ));
                }
            }
            Instruction::XError { q, p } => {
                out.push(raw_from_bits(i, vec![(q, true, false)], p, &eff_x[q], n_det));
            }
            Instruction::ZError { q, p } => {
                out.push(raw_from_bits(i, vec![(q, false, true)], p, &eff_z[q], n_det));
            }
        }
    }
    out.reverse();
    Ok(out)
}

fn raw_from_bits(
    instruction: usize,
    flips: Vec<(usize, bool, bool)>,
    p: f64,
    bits: &[u64],
    n_det: usize,
) -> RawMechanism {
    let mut detectors = Vec::new();
    let mut observables = Vec::new();
    for (w, &word) in bits.iter().enumerate() {
        let mut word = word;
        while word != 0 {
            let b = w as u32 * 64 + word.trailing_zeros();
            if (b as usize) < n_det {
                detectors.push(b);
            } else {
                observables.push(b - n_det as u32);
            }
            word &= word - 1;
        }
    }
    RawMechanism { instruction, flips, p, detectors, observables }
}

fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

fn fill_zero(v: &mut [u64]) {
    v.iter_mut().for_each(|w| *w = 0);
}

/// Two distinct mutable rows of a Vec of rows.
fn two_rows(rows: &mut [Vec<u64>], i: usize, j: usize) -> (&mut Vec<u64>, &mut Vec<u64>) {
    assert_ne!(i, j);
    if i < j {
        let (lo, hi) = rows.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = rows.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

/// Compiles a circuit into its detector error model: raw mechanisms with
/// identical (detector, observable) signatures are merged with
/// p = p1(1-p2) + p2(1-p1), and empty signatures are dropped.
pub fn build_detector_model(circuit: &NoisyCircuit) -> Result<DetectorModel, EngineError> {
    let raw = raw_mechanisms(circuit)?;
    let n_raw = raw.len();
    let mut index: HashMap<(Vec<u32>, Vec<u32>), usize> = HashMap::new();
    let mut mechanisms: Vec<Mechanism> = Vec::new();
    for r in raw {
        if r.detectors.is_empty() && r.observables.is_empty() {
            continue;
        }
        match index.entry((r.detectors, r.observables)) {
            std::collections::hash_map::Entry::Occupied(e) => {
                let m = &mut mechanisms[*e.get()];
                m.p = merge_priors(m.p, r.p);
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                let key = e.key();
                mechanisms.push(Mechanism {
                    p: r.p,
                    detectors: key.0.clone(),
                    observables: key.1.clone(),
                });
                e.insert(mechanisms.len() - 1);
            }
        }
    }
    mechanisms.retain(|m| m.p > 0.0);
    Ok(DetectorModel {
        n_detectors: circuit.detectors.len(),
        n_observables: circuit.observables.len(),
        mechanisms,
        n_raw_mechanisms: n_raw,
    })
}

/// Pushes a Pauli injected immediately after instruction `site` (use
/// `site = usize::MAX` for "before the circuit starts"... see below) through
/// the rest of the circuit and reports flipped detectors and observables.
/// Pass the flips as (qubit, x, z) components; `site + 1` is the first
/// instruction the error experiences, so injecting after the last index of a
/// noise instruction reproduces that mechanism exactly.
pub fn propagate_pauli(
    circuit: &NoisyCircuit,
    site: usize,
    flips: &[(usize, bool, bool)],
) -> (Vec<u32>, Vec<u32>) {
    let n_qubits = circuit.n_qubits();
    let mut ex = vec![0u8; n_qubits];
    let mut ez = vec![0u8; n_qubits];
    let mut meas = Vec::with_capacity(circuit.n_measurements());
    let start = site.wrapping_add(1);
    if start == 0 {
        for &(q, x, z) in flips {
            ex[q] ^= x as u8;
            ez[q] ^= z as u8;
        }
    }
    for (i, inst) in circuit.instructions.iter().enumerate() {
        apply_noiseless(inst, &mut ex, &mut ez, &mut meas);
        if i + 1 == start {
            for &(q, x, z) in flips {
                ex[q] ^= x as u8;
                ez[q] ^= z as u8;
            }
        }
    }
    collect_flips(circuit, &meas)
}

fn apply_noiseless(inst: &Instruction, ex: &mut [u8], ez: &mut [u8], meas: &mut Vec<u8>) {
    match *inst {
        Instruction::PrepZ(q) | Instruction::PrepX(q) => {
            ex[q] = 0;
            ez[q] = 0;
        }
        Instruction::Cx { control, target } => {
            ex[target] ^= ex[control];
            ez[control] ^= ez[target];
        }
        Instruction::MeasureZ(q) => meas.push(ex[q]),
        Instruction::MeasureX(q) => meas.push(ez[q]),
        Instruction::Depolarize1 { .. }
        | Instruction::Depolarize2 { .. }
        | Instruction::XError { .. }
        | Instruction::ZError { .. }
        | Instruction::Tick => {}
    }
}

fn collect_flips(circuit: &NoisyCircuit, meas: &[u8]) -> (Vec<u32>, Vec<u32>) {
    let dets = circuit
        .detectors
        .iter()
        .enumerate()
        .filter(|(_, set)| set.iter().fold(0u8, |a, &m| a ^ meas[m]) == 1)
        .map(|(d, _)| d as u32)
        .collect();
    let obs = circuit
        .observables
        .iter()
        .enumerate()
        .filter(|(_, set)| set.iter().fold(0u8, |a, &m| a ^ meas[m]) == 1)
        .map(|(k, _)| k as u32)
        .collect();
    (dets, obs)
}

/// Bit-packed detector/observable outcomes, one row per shot.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotBatch {
    pub shots: usize,
    pub n_detectors: usize,
    pub n_observables: usize,
    pub seed: u64,
    det: Vec<u64>,
    obs: Vec<u64>,
}

impl ShotBatch {
    pub fn zeros(shots: usize, n_detectors: usize, n_observables: usize, seed: u64) -> Self {
        Self {
            shots,
            n_detectors,
            n_observables,
            seed,
            det: vec![0; shots * n_detectors.div_ceil(64)],
            obs: vec![0; shots * n_observables.div_ceil(64)],
        }
    }

    pub fn det_words(&self) -> usize {
        self.n_detectors.div_ceil(64)
    }

    pub fn obs_words(&self) -> usize {
        self.n_observables.div_ceil(64)
    }

    pub fn detector_row(&self, shot: usize) -> &[u64] {
        let w = self.det_words();
        &self.det[shot * w..(shot + 1) * w]
    }

    pub fn observable_row(&self, shot: usize) -> &[u64] {
        let w = self.obs_words();
        &self.obs[shot * w..(shot + 1) * w]
    }

    pub fn detector_bit(&self, shot: usize, d: usize) -> bool {
        self.detector_row(shot)[d / 64] >> (d % 64) & 1 == 1
    }

    pub fn observable_bit(&self, shot: usize, k: usize) -> bool {
        self.observable_row(shot)[k / 64] >> (k % 64) & 1 == 1
    }

    fn from_rows(
        rows: Vec<(Vec<u64>, Vec<u64>)>,
        n_detectors: usize,
        n_observables: usize,
        seed: u64,
    ) -> Self {
        let shots = rows.len();
        let mut det = Vec::with_capacity(shots * n_detectors.div_ceil(64));
        let mut obs = Vec::with_capacity(shots * n_observables.div_ceil(64));
        for (d, o) in rows {
            det.extend(d);
            obs.extend(o);
        }
        Self { shots, n_detectors, n_observables, seed, det, obs }
    }

    /// Writes `<prefix>.bin` (detector rows then observable rows, little
    /// endian u64) and `<prefix>.json` (dimensions and seed).
    pub fn save(&self, prefix: &Path) -> Result<(), EngineError> {
        let mut bytes = Vec::with_capacity(8 * (self.det.len() + self.obs.len()));
        for w in self.det.iter().chain(&self.obs) {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        std::fs::write(prefix.with_extension("bin"), bytes)?;
        let sidecar = serde_json::json!({
            "shots": self.shots,
            "n_detectors": self.n_detectors,
            "n_observables": self.n_observables,
            "seed": self.seed,
        });
        std::fs::write(
            prefix.with_extension("json"),
            serde_json::to_string_pretty(&sidecar).expect("json"),
        )?;
        Ok(())
    }

    pub fn load(prefix: &Path) -> Result<Self, EngineError> {
        let sidecar: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(prefix.with_extension("json"))?,
        )
        .map_err(|e| EngineError::Parse(e.to_string()))?;
        let get = |k: &str| {
            sidecar[k]
                .as_u64()
                .ok_or_else(|| EngineError::Parse(format!("sidecar missing {k}")))
        };
        let (shots, n_det, n_obs) =
            (get("shots")? as usize, get("n_detectors")? as usize, get("n_observables")? as usize);
        let bytes = std::fs::read(prefix.with_extension("bin"))?;
        let words: Vec<u64> = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let det_len = shots * n_det.div_ceil(64);
        let obs_len = shots * n_obs.div_ceil(64);
        if words.len() != det_len + obs_len {
            return Err(EngineError::Parse("batch size mismatch".into()));
        }
        Ok(Self {
            shots,
            n_detectors: n_det,
            n_observables: n_obs,
            seed: get("seed")?,
            det: words[..det_len].to_vec(),
            obs: words[det_len..].to_vec(),
        })
    }
}

/// Samples the independent-mechanism model: per shot, mechanisms with equal
/// priors are drawn as a Binomial count plus a uniform subset, which is
/// exactly the iid Bernoulli distribution. Per-shot generator:
/// chacha8(seed, stream = shot index), so results are order-independent.
pub fn sample_shots(model: &DetectorModel, shots: usize, seed: u64) -> ShotBatch {
    // Group mechanism indices by exact prior value.
    let mut groups: Vec<(f64, Vec<u32>)> = Vec::new();
    let mut by_prior: HashMap<u64, usize> = HashMap::new();
    for (i, m) in model.mechanisms.iter().enumerate() {
        let key = m.p.to_bits();
        let g = *by_prior.entry(key).or_insert_with(|| {
            groups.push((m.p, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i as u32);
    }
    let dist: Vec<(Binomial, &Vec<u32>)> = groups
        .iter()
        .map(|(p, idx)| (Binomial::new(idx.len() as u64, *p).expect("valid prior"), idx))
        .collect();
    let det_words = model.n_detectors.div_ceil(64);
    let obs_words = model.n_observables.div_ceil(64);
    let rows: Vec<(Vec<u64>, Vec<u64>)> = (0..shots as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shot);
            let mut det = vec![0u64; det_words];
            let mut obs = vec![0u64; obs_words];
            let mut chosen: Vec<u32> = Vec::new();
            for (binom, idx) in &dist {
                let k = binom.sample(&mut rng) as usize;
                sample_subset(&mut rng, idx.len(), k, &mut chosen);
                for &j in &chosen {
                    let m = &model.mechanisms[idx[j as usize] as usize];
                    for &d in &m.detectors {
                        det[(d / 64) as usize] ^= 1 << (d % 64);
                    }
                    for &l in &m.observables {
                        obs[(l / 64) as usize] ^= 1 << (l % 64);
                    }
                }
            }
            (det, obs)
        })
        .collect();
    ShotBatch::from_rows(rows, model.n_detectors, model.n_observables, seed)
}

/// Uniform k-subset of 0..m by Floyd's algorithm; clears and fills `out`.
fn sample_subset(rng: &mut ChaCha8Rng, m: usize, k: usize, out: &mut Vec<u32>) {
    out.clear();
    for j in (m - k)..m {
        let t = rng.gen_range(0..=j) as u32;
        if out.contains(&t) {
            out.push(j as u32);
        } else {
            out.push(t);
        }
    }
}

/// Forward Pauli-frame simulation of the circuit itself, drawing each
/// depolarizing site as a categorical event (one of 15 / 3 Paulis with total
/// probability p). Used to cross-validate the independent-mechanism model.
pub fn sample_circuit_shots(circuit: &NoisyCircuit, shots: usize, seed: u64) -> ShotBatch {
    let n_det = circuit.detectors.len();
    let n_obs = circuit.observables.len();
    let rows: Vec<(Vec<u64>, Vec<u64>)> = (0..shots as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shot);
            let n_qubits = circuit.n_qubits();
            let mut ex = vec![0u8; n_qubits];
            let mut ez = vec![0u8; n_qubits];
            let mut meas = Vec::with_capacity(circuit.n_measurements());
            for inst in &circuit.instructions {
                apply_noiseless(inst, &mut ex, &mut ez, &mut meas);
                match *inst {
                    Instruction::Depolarize1 { q, p } => {
                        if p > 0.0 && rng.gen_bool(p) {
                            let m = rng.gen_range(1..4u8);
                            ex[q] ^= m & 1;
                            ez[q] ^= (m >> 1) & 1;
                        }
                    }
                    Instruction::Depolarize2 { a, b, p } => {
                        if p > 0.0 && rng.gen_bool(p) {
                            let m = rng.gen_range(1..16u8);
                            ex[a] ^= m & 1;
                            ez[a] ^= (m >> 1) & 1;
                            ex[b] ^= (m >> 2) & 1;
                            ez[b] ^= (m >> 3) & 1;
                        }
                    }
                    Instruction::XError { q, p } => {
                        if p > 0.0 && rng.gen_bool(p) {
                            ex[q] ^= 1;
                        }
                    }
                    Instruction::ZError { q, p }
                        if p > 0.0 && rng.gen_bool(p) => {
                            ez[q] ^= 1;
                        }
                    _ => {}
                }
            }
            let (dets, obs_flips) = collect_flips(circuit, &meas);
            let mut det = vec![0u64; n_det.div_ceil(64)];
            let mut obs = vec![0u64; n_obs.div_ceil(64)];
            for d in dets {
                det[(d / 64) as usize] |= 1 << (d % 64);
            }
            for l in obs_flips {
                obs[(l / 64) as usize] |= 1 << (l % 64);
            }
            (det, obs)
        })
        .collect();
    ShotBatch::from_rows(rows, n_det, n_obs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_memory_experiment, Basis, NoisyCircuit};
    use crate::codes::surface_code;
    use crate::distill::FoldedNoise;

    fn surface_circuit(p_bell: f64, p_gate: f64, rounds: usize) -> NoisyCircuit {
        let code = surface_code(3).unwrap();
        let noise = FoldedNoise::from_effective(p_bell, p_gate).unwrap();
        build_memory_experiment(&code, Basis::Z, rounds, 1, &noise, 0.0)
    }

    #[test]
    fn noiseless_circuit_has_no_mechanisms() {
        let circuit = surface_circuit(0.0, 0.0, 3);
        let model = build_detector_model(&circuit).unwrap();
        assert_eq!(model.mechanisms.len(), 0);
        assert_eq!(model.n_raw_mechanisms, 0);
    }

    #[test]
    fn single_depolarize2_yields_fifteen_raw_mechanisms() {
        let mut circuit = NoisyCircuit {
            n_data: 2,
            n_ancilla: 0,
            ..Default::default()
        };
        circuit.instructions = vec![
            Instruction::PrepZ(0),
            Instruction::PrepZ(1),
            Instruction::Depolarize2 { a: 0, b: 1, p: 0.01 },
            Instruction::MeasureZ(0),
            Instruction::MeasureZ(1),
        ];
        circuit.detectors = vec![vec![0], vec![1]];
        let model = build_detector_model(&circuit).unwrap();
        assert_eq!(model.n_raw_mechanisms, 15);
        // Signatures collapse to {D0}, {D1}, {D0 D1}.
        assert_eq!(model.mechanisms.len(), 3);
        let total: f64 = model.mechanisms.iter().map(|m| m.p).sum();
        // Each signature class has an odd-flip combined prior < its class mass;
        // sanity: all priors in (0, 0.5].
        assert!(model.mechanisms.iter().all(|m| m.p > 0.0 && m.p <= 0.5));
        assert!(total < 0.01);
    }

    #[test]
    fn merge_rule_example() {
        assert!((merge_priors(0.1, 0.1) - 0.18).abs() < 1e-15);
    }

    #[test]
    fn mechanisms_match_direct_injection() {
        let circuit = surface_circuit(0.05, 0.002, 2);
        let raw = raw_mechanisms(&circuit).unwrap();
        assert!(!raw.is_empty());
        for m in &raw {
            let (dets, obs) = propagate_pauli(&circuit, m.instruction, &m.flips);
            assert_eq!(dets, m.detectors, "site {}", m.instruction);
            assert_eq!(obs, m.observables, "site {}", m.instruction);
        }
    }

    #[test]
    fn data_x_between_cycles_flips_next_cycle_z_checks() {
        let code = surface_code(3).unwrap();
        let noise = FoldedNoise::from_effective(0.0, 0.0).unwrap();
        let circuit = build_memory_experiment(&code, Basis::Z, 3, 1, &noise, 0.0);
        // Find the end of cycle 0: the instruction position of the 12th
        // measurement (all of cycle 0's ancillas measured).
        let mut seen = 0;
        let mut site = 0;
        for (i, inst) in circuit.instructions.iter().enumerate() {
            if matches!(inst, Instruction::MeasureZ(_) | Instruction::MeasureX(_)) {
                seen += 1;
                if seen == 12 {
                    site = i;
                    break;
                }
            }
        }
        let q = 4; // a data qubit
        let (dets, _) = propagate_pauli(&circuit, site, &[(q, true, false)]);
        let m_total = 12;
        let expected: Vec<u32> = code
            .hz
            .row_supports()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(&q))
            .map(|(j, _)| (m_total + j) as u32)
            .collect();
        assert_eq!(dets, expected);
    }

    #[test]
    fn z_before_final_z_measurement_is_silent() {
        let circuit = surface_circuit(0.0, 0.0, 2);
        // Inject right before the final data measurements: after the last
        // ancilla measurement instruction.
        let last_anc_meas = circuit
            .instructions
            .iter()
            .rposition(|i| matches!(i, Instruction::MeasureX(_)))
            .unwrap();
        let (dets, obs) = propagate_pauli(&circuit, last_anc_meas, &[(0, false, true)]);
        assert!(dets.is_empty());
        assert!(obs.is_empty());
    }

    #[test]
    fn identity_fault_is_silent() {
        let circuit = surface_circuit(0.0, 0.0, 2);
        let (dets, obs) = propagate_pauli(&circuit, 3, &[]);
        assert!(dets.is_empty());
        assert!(obs.is_empty());
    }

    #[test]
    fn sampling_is_reproducible_and_noiseless_is_zero() {
        let circuit = surface_circuit(0.05, 0.002, 2);
        let model = build_detector_model(&circuit).unwrap();
        let a = sample_shots(&model, 500, 42);
        let b = sample_shots(&model, 500, 42);
        assert_eq!(a, b);
        let noiseless = build_detector_model(&surface_circuit(0.0, 0.0, 2)).unwrap();
        let z = sample_shots(&noiseless, 500, 42);
        for s in 0..500 {
            assert!(z.detector_row(s).iter().all(|&w| w == 0));
        }
    }

    #[test]
    fn single_half_probability_mechanism_frequency() {
        let model = DetectorModel {
            n_detectors: 1,
            n_observables: 0,
            mechanisms: vec![Mechanism { p: 0.5, detectors: vec![0], observables: vec![] }],
            n_raw_mechanisms: 1,
        };
        let batch = sample_shots(&model, 100_000, 9);
        let ones = (0..batch.shots).filter(|&s| batch.detector_bit(s, 0)).count();
        let f = ones as f64 / batch.shots as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25f64 / 100_000.0).sqrt());
    }

    #[test]
    fn independent_and_categorical_marginals_agree() {
        let circuit = surface_circuit(0.05, 0.004, 2);
        let model = build_detector_model(&circuit).unwrap();
        let ind = sample_shots(&model, 40_000, 11);
        let cat = sample_circuit_shots(&circuit, 40_000, 12);
        for d in 0..model.n_detectors {
            let fi = (0..ind.shots).filter(|&s| ind.detector_bit(s, d)).count() as f64
                / ind.shots as f64;
            let fc = (0..cat.shots).filter(|&s| cat.detector_bit(s, d)).count() as f64
                / cat.shots as f64;
            let sigma = ((fi * (1.0 - fi) + fc * (1.0 - fc)) / 40_000.0).sqrt().max(1e-4);
            assert!(
                (fi - fc).abs() < 4.5 * sigma,
                "detector {d}: independent {fi} categorical {fc}"
            );
        }
    }

    #[test]
    fn model_text_roundtrip() {
        let circuit = surface_circuit(0.05, 0.002, 2);
        let model = build_detector_model(&circuit).unwrap();
        let text = model.write_text();
        let back = DetectorModel::read_text(text.as_bytes()).unwrap();
        assert_eq!(model.n_detectors, back.n_detectors);
        assert_eq!(model.mechanisms.len(), back.mechanisms.len());
        for (a, b) in model.mechanisms.iter().zip(&back.mechanisms) {
            assert_eq!(a.detectors, b.detectors);
            assert_eq!(a.observables, b.observables);
            assert!((a.p - b.p).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_file_roundtrip() {
        let circuit = surface_circuit(0.05, 0.002, 2);
        let model = build_detector_model(&circuit).unwrap();
        let batch = sample_shots(&model, 100, 5);
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("batch");
        batch.save(&prefix).unwrap();
        let back = ShotBatch::load(&prefix).unwrap();
        assert_eq!(batch, back);
    }
}
