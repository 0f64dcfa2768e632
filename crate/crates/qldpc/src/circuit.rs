//! Noisy syndrome-extraction circuits: coloration (edge-coloring) schedules,
//! single-ancilla extraction cycles, and full memory experiments.

use std::fmt::Write as _;
use std::io::{self, BufRead};
use std::path::Path;

use thiserror::Error;

use crate::codes::CssCode;
use crate::distill::FoldedNoise;
use crate::gf2::BinMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    X,
    Z,
}

impl std::str::FromStr for Basis {
    type Err = CircuitError;
    fn from_str(s: &str) -> Result<Self, CircuitError> {
        match s {
            "x" | "X" => Ok(Basis::X),
            "z" | "Z" => Ok(Basis::Z),
            other => Err(CircuitError::Parse(format!("bad basis: {other}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("instruction references qubit {q} but the circuit has {n} qubits")]
    QubitOutOfRange { q: usize, n: usize },
    #[error("detector/observable references measurement {m} of {n}")]
    MeasurementOutOfRange { m: usize, n: usize },
    #[error("circuit parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    PrepZ(usize),
    PrepX(usize),
    Cx { control: usize, target: usize },
    MeasureZ(usize),
    MeasureX(usize),
    Depolarize1 { q: usize, p: f64 },
    Depolarize2 { a: usize, b: usize, p: f64 },
    XError { q: usize, p: f64 },
    ZError { q: usize, p: f64 },
    Tick,
}

/// A stabilizer circuit with explicit noise channels, plus the detector and
/// observable structure (as sets of measurement indices).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoisyCircuit {
    pub n_data: usize,
    pub n_ancilla: usize,
    pub instructions: Vec<Instruction>,
    pub detectors: Vec<Vec<usize>>,
    pub observables: Vec<Vec<usize>>,
}

impl NoisyCircuit {
    pub fn n_qubits(&self) -> usize {
        self.n_data + self.n_ancilla
    }

    pub fn n_measurements(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::MeasureZ(_) | Instruction::MeasureX(_)))
            .count()
    }

    pub fn n_noise_sites(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| {
                matches!(
                    i,
                    Instruction::Depolarize1 { .. }
                        | Instruction::Depolarize2 { .. }
                        | Instruction::XError { .. }
                        | Instruction::ZError { .. }
                )
            })
            .count()
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let n = self.n_qubits();
        let chk = |q: usize| {
            if q >= n {
                Err(CircuitError::QubitOutOfRange { q, n })
            } else {
                Ok(())
            }
        };
        for inst in &self.instructions {
            match *inst {
                Instruction::PrepZ(q)
                | Instruction::PrepX(q)
                | Instruction::MeasureZ(q)
                | Instruction::MeasureX(q)
                | Instruction::Depolarize1 { q, .. }
                | Instruction::XError { q, .. }
                | Instruction::ZError { q, .. } => chk(q)?,
                Instruction::Cx { control, target } => {
                    chk(control)?;
                    chk(target)?;
                }
                Instruction::Depolarize2 { a, b, .. } => {
                    chk(a)?;
                    chk(b)?;
                }
                Instruction::Tick => {}
            }
        }
        let n_meas = self.n_measurements();
        for set in self.detectors.iter().chain(&self.observables) {
            for &m in set {
                if m >= n_meas {
                    return Err(CircuitError::MeasurementOutOfRange { m, n: n_meas });
                }
            }
        }
        Ok(())
    }

    /// One instruction per line; see the format tokens in `write_text`.
    pub fn write_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "QUBITS {} {}", self.n_data, self.n_ancilla);
        for inst in &self.instructions {
            let _ = match *inst {
                Instruction::PrepZ(q) => writeln!(s, "PREP_Z {q}"),
                Instruction::PrepX(q) => writeln!(s, "PREP_X {q}"),
                Instruction::Cx { control, target } => writeln!(s, "CX {control} {target}"),
                Instruction::MeasureZ(q) => writeln!(s, "M_Z {q}"),
                Instruction::MeasureX(q) => writeln!(s, "M_X {q}"),
                Instruction::Depolarize1 { q, p } => writeln!(s, "DEPOL1 {p} {q}"),
                Instruction::Depolarize2 { a, b, p } => writeln!(s, "DEPOL2 {p} {a} {b}"),
                Instruction::XError { q, p } => writeln!(s, "X_ERROR {p} {q}"),
                Instruction::ZError { q, p } => writeln!(s, "Z_ERROR {p} {q}"),
                Instruction::Tick => writeln!(s, "TICK"),
            };
        }
        for det in &self.detectors {
            let toks: Vec<String> = det.iter().map(|m| m.to_string()).collect();
            let _ = writeln!(s, "DETECTOR {}", toks.join(" "));
        }
        for (k, obs) in self.observables.iter().enumerate() {
            let toks: Vec<String> = obs.iter().map(|m| m.to_string()).collect();
            let _ = writeln!(s, "OBSERVABLE {k} {}", toks.join(" "));
        }
        s
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, CircuitError> {
        let mut c = NoisyCircuit::default();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks = line.split_whitespace();
            let op = toks.next().unwrap();
            let rest: Vec<&str> = toks.collect();
            let usizes = |rest: &[&str]| -> Result<Vec<usize>, CircuitError> {
                rest.iter()
                    .map(|t| t.parse().map_err(|_| CircuitError::Parse(format!("bad int: {t}"))))
                    .collect()
            };
            let prob = |t: &str| -> Result<f64, CircuitError> {
                t.parse().map_err(|_| CircuitError::Parse(format!("bad probability: {t}")))
            };
            match op {
                "QUBITS" => {
                    let v = usizes(&rest)?;
                    let [d, a] = v[..] else {
                        return Err(CircuitError::Parse(line.into()));
                    };
                    c.n_data = d;
                    c.n_ancilla = a;
                }
                "PREP_Z" => c.instructions.push(Instruction::PrepZ(usizes(&rest)?[0])),
                "PREP_X" => c.instructions.push(Instruction::PrepX(usizes(&rest)?[0])),
                "CX" => {
                    let v = usizes(&rest)?;
                    c.instructions.push(Instruction::Cx { control: v[0], target: v[1] });
                }
                "M_Z" => c.instructions.push(Instruction::MeasureZ(usizes(&rest)?[0])),
                "M_X" => c.instructions.push(Instruction::MeasureX(usizes(&rest)?[0])),
                "DEPOL1" => {
                    let p = prob(rest[0])?;
                    c.instructions.push(Instruction::Depolarize1 { q: usizes(&rest[1..])?[0], p });
                }
                "DEPOL2" => {
                    let p = prob(rest[0])?;
                    let v = usizes(&rest[1..])?;
                    c.instructions.push(Instruction::Depolarize2 { a: v[0], b: v[1], p });
                }
                "X_ERROR" => {
                    let p = prob(rest[0])?;
                    c.instructions.push(Instruction::XError { q: usizes(&rest[1..])?[0], p });
                }
                "Z_ERROR" => {
                    let p = prob(rest[0])?;
                    c.instructions.push(Instruction::ZError { q: usizes(&rest[1..])?[0], p });
                }
                "TICK" => c.instructions.push(Instruction::Tick),
                "DETECTOR" => c.detectors.push(usizes(&rest)?),
                "OBSERVABLE" => {
                    let v = usizes(&rest)?;
                    c.observables.push(v[1..].to_vec());
                }
                other => return Err(CircuitError::Parse(format!("unknown op: {other}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), CircuitError> {
        std::fs::write(path, self.write_text())?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, CircuitError> {
        let f = std::fs::File::open(path)?;
        Self::read_text(io::BufReader::new(f))
    }
}

/// Gate layers for one cycle: each layer is a matching of (check, data) pairs.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub z_layers: Vec<Vec<(usize, usize)>>,
    pub x_layers: Vec<Vec<(usize, usize)>>,
    pub colors_z: usize,
    pub colors_x: usize,
}

impl Schedule {
    pub fn new(code: &CssCode) -> Self {
        let z_layers = edge_coloring_matrix(&code.hz);
        let x_layers = edge_coloring_matrix(&code.hx);
        Schedule {
            colors_z: z_layers.len(),
            colors_x: x_layers.len(),
            z_layers,
            x_layers,
        }
    }
}

/// Edge layers for one side of the code, as (check, data) matchings.
pub fn edge_coloring(code: &CssCode, side: Basis) -> Vec<Vec<(usize, usize)>> {
    match side {
        Basis::Z => edge_coloring_matrix(&code.hz),
        Basis::X => edge_coloring_matrix(&code.hx),
    }
}

/// Proper edge coloring of the bipartite check-data incidence with exactly
/// Delta colors (Koenig), via alternating-path recoloring. Edges are inserted
/// in row-major order, which fixes the schedule deterministically.
fn edge_coloring_matrix(h: &BinMatrix) -> Vec<Vec<(usize, usize)>> {
    let delta = h.max_row_weight().max(h.max_col_weight());
    if delta == 0 {
        return Vec::new();
    }
    // color tables: for each node and color, the partner across that edge.
    let mut chk: Vec<Vec<Option<usize>>> = vec![vec![None; delta]; h.rows()];
    let mut dat: Vec<Vec<Option<usize>>> = vec![vec![None; delta]; h.cols()];
    for c in 0..h.rows() {
        for &q in h.row(c) {
            let a = chk[c].iter().position(|e| e.is_none()).expect("free color at check");
            if dat[q][a].is_none() {
                chk[c][a] = Some(q);
                dat[q][a] = Some(c);
                continue;
            }
            let b = dat[q].iter().position(|e| e.is_none()).expect("free color at data");
            // Collect the maximal (a,b)-alternating path starting at q with an
            // a-edge, then swap colors along it; afterwards a is free at q.
            let mut path: Vec<(usize, usize, usize)> = Vec::new(); // (check, data, color)
            let (mut node, mut col, mut at_data) = (q, a, true);
            loop {
                let next = if at_data { dat[node][col] } else { chk[node][col] };
                let Some(other) = next else { break };
                let (pc, pd) = if at_data { (other, node) } else { (node, other) };
                path.push((pc, pd, col));
                node = other;
                at_data = !at_data;
                col = if col == a { b } else { a };
            }
            for &(pc, pd, pcol) in &path {
                chk[pc][pcol] = None;
                dat[pd][pcol] = None;
            }
            for &(pc, pd, pcol) in &path {
                let ncol = if pcol == a { b } else { a };
                chk[pc][ncol] = Some(pd);
                dat[pd][ncol] = Some(pc);
            }
            debug_assert!(dat[q][a].is_none() && chk[c][a].is_none());
            chk[c][a] = Some(q);
            dat[q][a] = Some(c);
        }
    }
    let mut layers: Vec<Vec<(usize, usize)>> = vec![Vec::new(); delta];
    for (c, colors) in chk.iter().enumerate() {
        for (k, q) in colors.iter().enumerate() {
            if let Some(q) = q {
                layers[k].push((c, *q));
            }
        }
    }
    layers.retain(|l| !l.is_empty());
    layers
}

/// One QEC cycle: Z-check extraction (ancilla |0>, CX data->ancilla per
/// layer, measure Z) followed by X-check extraction (ancilla |+>, CX
/// ancilla->data, measure X). Every CX is followed by depolarize2(p_gate_eff)
/// when p_gate_eff > 0; meas_flip > 0 adds a flip channel before each
/// ancilla measurement.
pub fn build_cycle(
    code: &CssCode,
    schedule: &Schedule,
    p_gate_eff: f64,
    meas_flip: f64,
) -> Vec<Instruction> {
    let n = code.n;
    let mz = code.hz.rows();
    let anc_z = |check: usize| n + check;
    let anc_x = |check: usize| n + mz + check;
    let mut out = Vec::new();
    for c in 0..mz {
        out.push(Instruction::PrepZ(anc_z(c)));
    }
    out.push(Instruction::Tick);
    for layer in &schedule.z_layers {
        for &(c, q) in layer {
            out.push(Instruction::Cx { control: q, target: anc_z(c) });
            if p_gate_eff > 0.0 {
                out.push(Instruction::Depolarize2 { a: q, b: anc_z(c), p: p_gate_eff });
            }
        }
        out.push(Instruction::Tick);
    }
    for c in 0..mz {
        if meas_flip > 0.0 {
            out.push(Instruction::XError { q: anc_z(c), p: meas_flip });
        }
        out.push(Instruction::MeasureZ(anc_z(c)));
    }
    out.push(Instruction::Tick);
    for c in 0..code.hx.rows() {
        out.push(Instruction::PrepX(anc_x(c)));
    }
    out.push(Instruction::Tick);
    for layer in &schedule.x_layers {
        for &(c, q) in layer {
            out.push(Instruction::Cx { control: anc_x(c), target: q });
            if p_gate_eff > 0.0 {
                out.push(Instruction::Depolarize2 { a: anc_x(c), b: q, p: p_gate_eff });
            }
        }
        out.push(Instruction::Tick);
    }
    for c in 0..code.hx.rows() {
        if meas_flip > 0.0 {
            out.push(Instruction::ZError { q: anc_x(c), p: meas_flip });
        }
        out.push(Instruction::MeasureX(anc_x(c)));
    }
    out.push(Instruction::Tick);
    out
}

/// A full memory experiment under the folded noise model: implicit noiseless
/// encoding, depolarize1(p_bell_eff) on all data qubits, rounds x
/// cycles_per_round noisy cycles, and a final noiseless transversal data
/// measurement in `basis`. Detectors compare each check between consecutive
/// cycles (first cycle against the deterministic initial value), and the
/// final data measurement reconstructs the same-basis checks. One observable
/// per logical operator of `basis`.
pub fn build_memory_experiment(
    code: &CssCode,
    basis: Basis,
    rounds: usize,
    cycles_per_round: usize,
    noise: &FoldedNoise,
    meas_flip: f64,
) -> NoisyCircuit {
    let schedule = Schedule::new(code);
    let n = code.n;
    let (mz, mx) = (code.hz.rows(), code.hx.rows());
    let m_total = mz + mx;
    let cycles = rounds * cycles_per_round;
    let mut circuit = NoisyCircuit {
        n_data: n,
        n_ancilla: m_total,
        ..Default::default()
    };
    if noise.p_bell_eff > 0.0 {
        for q in 0..n {
            circuit
                .instructions
                .push(Instruction::Depolarize1 { q, p: noise.p_bell_eff });
        }
        circuit.instructions.push(Instruction::Tick);
    }
    let cycle = build_cycle(code, &schedule, noise.p_gate_eff, meas_flip);
    for t in 0..cycles {
        circuit.instructions.extend(cycle.iter().cloned());
        // Measurement index of check j in cycle t; Z checks come first.
        let meas = |j: usize| t * m_total + j;
        for j in 0..m_total {
            if t == 0 {
                circuit.detectors.push(vec![meas(j)]);
            } else {
                circuit.detectors.push(vec![meas(j) - m_total, meas(j)]);
            }
        }
    }
    // Final transversal data measurement (noiseless), index base:
    let data_meas_base = cycles * m_total;
    for q in 0..n {
        circuit.instructions.push(match basis {
            Basis::Z => Instruction::MeasureZ(q),
            Basis::X => Instruction::MeasureX(q),
        });
    }
    let (checks, logicals) = match basis {
        Basis::Z => (&code.hz, &code.lz),
        Basis::X => (&code.hx, &code.lx),
    };
    // Z-basis data measurements reconstruct Z checks (and vice versa),
    // compared against that check's last in-cycle measurement.
    let check_offset = match basis {
        Basis::Z => 0,
        Basis::X => mz,
    };
    for (j, support) in checks.row_supports().iter().enumerate() {
        let mut det: Vec<usize> = support.iter().map(|&q| data_meas_base + q).collect();
        det.push((cycles - 1) * m_total + check_offset + j);
        circuit.detectors.push(det);
    }
    for support in logicals.row_supports() {
        circuit
            .observables
            .push(support.iter().map(|&q| data_meas_base + q).collect());
    }
    circuit
}
