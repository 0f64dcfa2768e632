//! Experiment runner: builds the configured code, compiles memory circuits
//! into detector models, samples and decodes shots, and writes the
//! deterministic `results.csv` / `manifest.json` / `fits.json` outputs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, FitResult, LerPoint};
use crate::circuit::{build_memory_experiment, Basis};
use crate::codes::{
    self, sc_hgp, CodeError, CssCode, ScSpec,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::decoder::{DecoderError, WindowedDecoder};
use crate::distill::{folded_oracle, two_sided_oracle, DistillError, FoldedNoise, OracleEstimate};
use crate::pauli_engine::{build_detector_model, sample_shots, DetectorModel, EngineError};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl RunnerError {
    /// Process exit code: 2 for configuration errors, 3 for decode
    /// infeasibility, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Decoder(DecoderError::InfeasibleSyndrome { .. }) => 3,
            _ => 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Code construction and family metadata
// ---------------------------------------------------------------------------

/// Build the configured code and its stable identifier.
pub fn build_code(cfg: &ExperimentConfig) -> Result<(CssCode, String), RunnerError> {
    let c = &cfg.code;
    match c.family.as_str() {
        "hgp" => Ok((codes::hgp_family_instance(c.index, c.seed)?, format!("hgp_{}", c.index))),
        "lp" => Ok((codes::lp_family_instance(c.index)?, format!("lp_{}", c.index))),
        "surface" => {
            let d = c.d.expect("validated");
            Ok((codes::surface_code(d)?, format!("surface_{d}")))
        }
        "sc-toric" => {
            let d = c.d.expect("validated");
            Ok((sc_hgp(&ScSpec::toric(d))?, format!("toric_{d}")))
        }
        "import" => {
            let path = PathBuf::from(c.path.as_deref().expect("validated"));
            let code = codes::import_code(&path)?;
            let id = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "import".into());
            Ok((code, format!("import_{id}")))
        }
        other => Err(RunnerError::Other(format!("unknown family {other:?}"))),
    }
}

/// Grouping parameters (designed distance d, block length n) for the
/// built-in families, keyed by the code identifier used in `results.csv`.
pub fn code_group(code_id: &str) -> Option<(f64, f64)> {
    if let Some(d) = code_id.strip_prefix("surface_").and_then(|s| s.parse::<usize>().ok()) {
        return Some((d as f64, (d * d + (d - 1) * (d - 1)) as f64));
    }
    if let Some(d) = code_id.strip_prefix("toric_").and_then(|s| s.parse::<usize>().ok()) {
        return Some((d as f64, (2 * d * d) as f64));
    }
    if let Some(i) = code_id.strip_prefix("hgp_").and_then(|s| s.parse::<usize>().ok()) {
        let table = [(4.0, 225.0), (6.0, 625.0), (8.0, 1225.0)];
        return table.get(i.wrapping_sub(1)).copied();
    }
    if let Some(i) = code_id.strip_prefix("lp_").and_then(|s| s.parse::<usize>().ok()) {
        let table = [(12.0, 544.0), (16.0, 714.0), (20.0, 1020.0), (24.0, 1428.0)];
        return table.get(i.wrapping_sub(1)).copied();
    }
    None
}

// ---------------------------------------------------------------------------
// Deterministic seed derivation
// ---------------------------------------------------------------------------

/// Per-point / per-block seed: first 8 bytes of sha256(master || tag).
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// One row of `results.csv`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointResult {
    pub code: String,
    /// Swept physical parameter (p'_bell in "bell" mode, unified p otherwise).
    pub p: f64,
    pub basis: String,
    pub shots: u64,
    pub failures: u64,
    /// Block logical error rate over the whole experiment.
    pub p_tot: f64,
    /// Per-cycle logical error rate, 1 - (1 - p_tot)^(1/cycles).
    pub p_cycle: f64,
    /// Binomial standard error of p_tot.
    pub stderr: f64,
}

pub const RESULTS_HEADER: &str = "code,p,basis,shots,failures,p_tot,p_cycle,stderr";

pub fn write_results_csv(points: &[PointResult], path: &Path) -> Result<(), RunnerError> {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.code, r.p, r.basis, r.shots, r.failures, r.p_tot, r.p_cycle, r.stderr
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<PointResult>, RunnerError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        other => {
            return Err(RunnerError::Other(format!(
                "{}: bad results header {:?}",
                path.display(),
                other
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(RunnerError::Other(format!(
                "{}: line {} has {} fields, expected 8",
                path.display(),
                i + 2,
                f.len()
            )));
        }
        let bad = |what: &str| RunnerError::Other(format!("{}: line {}: bad {what}", path.display(), i + 2));
        out.push(PointResult {
            code: f[0].to_string(),
            p: f[1].parse().map_err(|_| bad("p"))?,
            basis: f[2].to_string(),
            shots: f[3].parse().map_err(|_| bad("shots"))?,
            failures: f[4].parse().map_err(|_| bad("failures"))?,
            p_tot: f[5].parse().map_err(|_| bad("p_tot"))?,
            p_cycle: f[6].parse().map_err(|_| bad("p_cycle"))?,
            stderr: f[7].parse().map_err(|_| bad("stderr"))?,
        });
    }
    Ok(out)
}

/// Sample and decode one operating point with block-wise adaptive stopping.
/// Returns (shots used, failures). Deterministic in (config, master seed):
/// block b uses a ChaCha8 generator seeded from sha256(master || tag/b).
pub fn simulate_point(
    model: &DetectorModel,
    decoder: &WindowedDecoder,
    cfg: &ExperimentConfig,
    seed_tag: &str,
) -> Result<(u64, u64), RunnerError> {
    let cap = cfg.run.shots;
    let block = cfg.run.block_size;
    let mut shots_done: u64 = 0;
    let mut failures: u64 = 0;
    let mut block_idx: u64 = 0;
    while shots_done < cap {
        let this = block.min(cap - shots_done) as usize;
        let seed = derive_seed(cfg.run.seed, &format!("{seed_tag}/block{block_idx}"));
        let batch = sample_shots(model, this, seed);
        let fails: Result<Vec<u64>, RunnerError> = (0..this)
            .into_par_iter()
            .map(|s| {
                let mut syn = vec![0u8; model.n_detectors];
                for (d, bit) in syn.iter_mut().enumerate() {
                    *bit = batch.detector_bit(s, d) as u8;
                }
                let out = decoder.decode(&syn)?;
                let mut miss = 0u64;
                for (k, &pred) in out.predicted_observables.iter().enumerate() {
                    if (pred == 1) != batch.observable_bit(s, k) {
                        miss = 1;
                        break;
                    }
                }
                Ok(miss)
            })
            .collect();
        failures += fails?.iter().sum::<u64>();
        shots_done += this as u64;
        block_idx += 1;
        if cfg.run.adaptive && failures > 0 {
            let p = failures as f64 / shots_done as f64;
            let se = (p * (1.0 - p) / shots_done as f64).sqrt();
            if se < cfg.run.target_rel_stderr * p {
                break;
            }
        }
    }
    Ok((shots_done, failures))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub code: String,
    pub p: f64,
    pub basis: String,
    pub seed_tag: String,
    pub shots: u64,
    pub failures: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub code: CodeInfo,
    /// How random bits are produced, for reproducibility audits.
    pub generator: String,
    pub seed_derivation: String,
    pub gate_ordering: String,
    pub block_size: u64,
    pub points: Vec<ManifestPoint>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CodeInfo {
    pub id: String,
    pub n: usize,
    pub k: usize,
    pub d_upper: Option<usize>,
    pub family: String,
}

pub struct RunOutput {
    pub out_dir: PathBuf,
    pub points: Vec<PointResult>,
    pub manifest: Manifest,
}

/// Execute the full sweep described by `cfg` and write `results.csv` and
/// `manifest.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, RunnerError> {
    cfg.validate()?;
    let (code, code_id) = build_code(cfg)?;
    let out_dir = PathBuf::from(&cfg.run.out);
    std::fs::create_dir_all(&out_dir)?;
    let m_total = code.hz.rows() + code.hx.rows();
    let cycles = cfg.schedule.rounds * cfg.schedule.cycles_per_round;
    let bp_cfg = cfg.bp_config();
    let osd_cfg = cfg.osd_config();

    let mut results = Vec::new();
    let mut manifest_points = Vec::new();
    for (p, p_bell_eff, p_gate_eff) in cfg.noise_points()? {
        let noise = FoldedNoise::from_effective(p_bell_eff, p_gate_eff)?;
        for basis_name in &cfg.schedule.bases {
            let basis = Basis::from_str(basis_name)
                .map_err(|e| RunnerError::Other(e.to_string()))?;
            let circuit = build_memory_experiment(
                &code,
                basis,
                cfg.schedule.rounds,
                cfg.schedule.cycles_per_round,
                &noise,
                cfg.schedule.meas_flip,
            );
            let model = build_detector_model(&circuit)?;
            let decoder = WindowedDecoder::new(
                &model,
                cfg.schedule.rounds,
                cfg.schedule.cycles_per_round,
                m_total,
                bp_cfg,
                osd_cfg,
            )?;
            let seed_tag = format!("{code_id}/p{p}/{basis_name}");
            let (shots, failures) = simulate_point(&model, &decoder, cfg, &seed_tag)?;
            let (p_tot, stderr) = analysis::estimate_ler(shots, failures);
            results.push(PointResult {
                code: code_id.clone(),
                p,
                basis: basis_name.clone(),
                shots,
                failures,
                p_tot,
                p_cycle: analysis::per_cycle(p_tot, cycles),
                stderr,
            });
            manifest_points.push(ManifestPoint {
                code: code_id.clone(),
                p,
                basis: basis_name.clone(),
                seed_tag,
                shots,
                failures,
            });
        }
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        code: CodeInfo {
            id: code_id,
            n: code.n,
            k: code.k,
            d_upper: code.d_upper,
            family: code.family.clone(),
        },
        generator: "chacha8; block b of a point seeded by seed_from_u64(derive_seed(master, tag/block b)), per-shot stream index within the block".into(),
        seed_derivation: "first 8 LE bytes of sha256(master_seed_le || tag)".into(),
        gate_ordering: "edge-coloration schedule; colors in ascending order, row-major within a color".into(),
        block_size: cfg.run.block_size,
        points: manifest_points,
    };

    write_results_csv(&results, &out_dir.join("results.csv"))?;
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    Ok(RunOutput { out_dir, points: results, manifest })
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitsJson {
    pub kind: String,
    pub combine_bases: bool,
    /// Mask actually applied; points with p outside the range were excluded.
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    /// The exact points the fit consumed.
    pub points_used: Vec<LerPoint>,
    pub fit: FitResult,
}

/// Convert result rows into fit-ready points: apply the p-mask, optionally
/// combine bases, and attach the grouping parameter (d for threshold fits,
/// n for subthreshold fits).
pub fn prepare_fit_points(
    rows: &[PointResult],
    cycles: usize,
    kind: &str,
    combine: bool,
    p_min: Option<f64>,
    p_max: Option<f64>,
) -> Result<Vec<LerPoint>, RunnerError> {
    let masked: Vec<&PointResult> = rows
        .iter()
        .filter(|r| p_min.is_none_or(|lo| r.p >= lo) && p_max.is_none_or(|hi| r.p <= hi))
        .collect();
    if masked.is_empty() {
        return Err(RunnerError::Other("p-range mask excluded every point".into()));
    }
    let group_of = |code: &str| -> Result<f64, RunnerError> {
        let (d, n) = code_group(code).ok_or_else(|| {
            RunnerError::Other(format!("no built-in group parameters for code {code:?}"))
        })?;
        Ok(if kind == "threshold" { d } else { n })
    };
    let mut out = Vec::new();
    if combine {
        // Pair up Z and X rows at the same (code, p); a lone basis passes
        // through unchanged.
        let mut seen: Vec<(String, f64)> = Vec::new();
        for r in &masked {
            let key = (r.code.clone(), r.p);
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            let group: Vec<&&PointResult> =
                masked.iter().filter(|q| q.code == r.code && q.p == r.p).collect();
            if group.len() > 2 {
                return Err(RunnerError::Other(format!(
                    "more than two rows for code {} at p = {}; merge inputs first",
                    r.code, r.p
                )));
            }
            let g = group_of(&r.code)?;
            if group.len() == 1 {
                out.push(LerPoint::new(&r.code, r.p, r.shots, r.failures, cycles, g));
            } else {
                let (a, b) = (group[0], group[1]);
                let p_tot = analysis::combine_bases(a.p_tot, b.p_tot);
                let stderr = (((1.0 - b.p_tot) * a.stderr).powi(2)
                    + ((1.0 - a.p_tot) * b.stderr).powi(2))
                .sqrt();
                out.push(LerPoint {
                    code: r.code.clone(),
                    p: r.p,
                    shots: a.shots.min(b.shots),
                    failures: a.failures + b.failures,
                    p_block_total: p_tot,
                    stderr,
                    cycles,
                    group: g,
                });
            }
        }
    } else {
        for r in &masked {
            let g = group_of(&r.code)?;
            out.push(LerPoint::new(&r.code, r.p, r.shots, r.failures, cycles, g));
        }
    }
    Ok(out)
}

/// Run the configured fit over one or more `results.csv` files and write
/// `fits.json` into the output directory.
pub fn run_fit(cfg: &ExperimentConfig, results: &[PathBuf]) -> Result<FitsJson, RunnerError> {
    cfg.validate()?;
    let fit_cfg = cfg
        .fit
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("fit subcommand needs a [fit] section".into()))?;
    let mut rows = Vec::new();
    for path in results {
        rows.extend(read_results_csv(path)?);
    }
    let cycles = cfg.schedule.rounds * cfg.schedule.cycles_per_round;
    let points = prepare_fit_points(
        &rows,
        cycles,
        &fit_cfg.kind,
        fit_cfg.combine_bases,
        fit_cfg.p_min,
        fit_cfg.p_max,
    )?;
    let fit = match fit_cfg.kind.as_str() {
        "threshold" => analysis::fit_threshold(&points)?,
        _ => analysis::fit_subthreshold(&points)?,
    };
    let fits = FitsJson {
        kind: fit_cfg.kind.clone(),
        combine_bases: fit_cfg.combine_bases,
        p_min: fit_cfg.p_min,
        p_max: fit_cfg.p_max,
        points_used: points,
        fit,
    };
    let out_dir = PathBuf::from(&cfg.run.out);
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(
        out_dir.join("fits.json"),
        serde_json::to_string_pretty(&fits).expect("fits serialize") + "\n",
    )?;
    Ok(fits)
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Summarize one or more run directories: verify manifests against their
/// embedded configs, tabulate per-point rates, emit plot-data series, and
/// include fit summaries where a [fit] section is configured.
pub fn run_report(dirs: &[PathBuf], out_dir: &Path, force: bool) -> Result<String, RunnerError> {
    std::fs::create_dir_all(out_dir)?;
    let mut report = String::new();
    for dir in dirs {
        let manifest_text = std::fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| RunnerError::Other(format!("{}: bad manifest: {e}", dir.display())))?;
        let recomputed = manifest.config.hash();
        if recomputed != manifest.config_hash {
            if !force {
                return Err(RunnerError::Other(format!(
                    "{}: manifest config hash {} does not match recomputed {}; \
                     pass --force to report anyway",
                    dir.display(),
                    manifest.config_hash,
                    recomputed
                )));
            }
            report.push_str(&format!(
                "WARNING: {}: config hash mismatch (stored {}, recomputed {})\n",
                dir.display(),
                manifest.config_hash,
                recomputed
            ));
        }
        let rows = read_results_csv(&dir.join("results.csv"))?;
        let cycles = manifest.config.schedule.rounds * manifest.config.schedule.cycles_per_round;
        report.push_str(&format!(
            "run {}  code {} [[{},{}{}]]  cycles {}  hash {}\n",
            dir.display(),
            manifest.code.id,
            manifest.code.n,
            manifest.code.k,
            manifest.code.d_upper.map(|d| format!(",{d}")).unwrap_or_default(),
            cycles,
            &manifest.config_hash[..12],
        ));
        report.push_str(
            "  p           basis  shots      failures  p_tot        p_cycle      stderr\n",
        );
        for r in &rows {
            report.push_str(&format!(
                "  {:<11} {:<6} {:<10} {:<9} {:<12.6e} {:<12.6e} {:.6e}\n",
                r.p, r.basis, r.shots, r.failures, r.p_tot, r.p_cycle, r.stderr
            ));
        }
        // Plot series: one file per (code, basis) with per-cycle rates.
        let mut series: Vec<(String, String)> = Vec::new();
        for r in &rows {
            let key = (r.code.clone(), r.basis.clone());
            if !series.contains(&key) {
                series.push(key);
            }
        }
        for (code, basis) in series {
            let mut text = String::from("p,p_cycle,p_cycle_stderr\n");
            for r in rows.iter().filter(|r| r.code == code && r.basis == basis) {
                let pt = LerPoint::new(&r.code, r.p, r.shots, r.failures, cycles, 0.0);
                text.push_str(&format!(
                    "{},{},{}\n",
                    r.p,
                    pt.per_cycle_ler(),
                    pt.per_cycle_stderr()
                ));
            }
            let name = format!("plot_{code}_{basis}.csv");
            std::fs::write(out_dir.join(&name), text)?;
            report.push_str(&format!("  wrote {}\n", out_dir.join(&name).display()));
        }
        if let Some(fit_cfg) = &manifest.config.fit {
            let cycles = manifest.config.schedule.rounds * manifest.config.schedule.cycles_per_round;
            match prepare_fit_points(
                &rows,
                cycles,
                &fit_cfg.kind,
                fit_cfg.combine_bases,
                fit_cfg.p_min,
                fit_cfg.p_max,
            )
            .and_then(|pts| {
                Ok(match fit_cfg.kind.as_str() {
                    "threshold" => analysis::fit_threshold(&pts)?,
                    _ => analysis::fit_subthreshold(&pts)?,
                })
            }) {
                Ok(fit) => {
                    let params: Vec<String> =
                        fit.params.iter().map(|(n, v)| format!("{n} = {v:.6e}")).collect();
                    report.push_str(&format!(
                        "  {} fit: {} (residual {:.4e})\n",
                        fit_cfg.kind,
                        params.join(", "),
                        fit.residual
                    ));
                }
                Err(e) => report.push_str(&format!("  {} fit unavailable: {e}\n", fit_cfg.kind)),
            }
        }
        report.push('\n');
    }
    std::fs::write(out_dir.join("report.txt"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Decode check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecodeCheckReport {
    /// (basis, mechanisms audited, mechanism indices decoded to the wrong
    /// logical action).
    pub audits: Vec<(String, usize, Vec<usize>)>,
}

impl DecodeCheckReport {
    pub fn failures(&self) -> usize {
        self.audits.iter().map(|(_, _, f)| f.len()).sum()
    }
}

/// Exhaustive single-fault audit: for every mechanism in the detector model
/// of the first sweep point, decode its syndrome and require the predicted
/// logical action to match. Infeasible syndromes surface as
/// [`DecoderError::InfeasibleSyndrome`] (exit code 3).
pub fn run_decode_check(cfg: &ExperimentConfig) -> Result<DecodeCheckReport, RunnerError> {
    cfg.validate()?;
    let (code, _) = build_code(cfg)?;
    let m_total = code.hz.rows() + code.hx.rows();
    let (_, p_bell_eff, p_gate_eff) = cfg.noise_points()?[0];
    let noise = FoldedNoise::from_effective(p_bell_eff, p_gate_eff)?;
    let mut audits = Vec::new();
    for basis_name in &cfg.schedule.bases {
        let basis = Basis::from_str(basis_name).map_err(|e| RunnerError::Other(e.to_string()))?;
        let circuit = build_memory_experiment(
            &code,
            basis,
            cfg.schedule.rounds,
            cfg.schedule.cycles_per_round,
            &noise,
            cfg.schedule.meas_flip,
        );
        let model = build_detector_model(&circuit)?;
        let decoder = WindowedDecoder::new(
            &model,
            cfg.schedule.rounds,
            cfg.schedule.cycles_per_round,
            m_total,
            cfg.bp_config(),
            cfg.osd_config(),
        )?;
        let verdicts: Result<Vec<Option<usize>>, RunnerError> = (0..model.mechanisms.len())
            .into_par_iter()
            .map(|g| {
                let m = &model.mechanisms[g];
                let mut syn = vec![0u8; model.n_detectors];
                for &d in &m.detectors {
                    syn[d as usize] = 1;
                }
                let out = decoder.decode(&syn)?;
                let mut want = vec![0u8; model.n_observables];
                for &l in &m.observables {
                    want[l as usize] ^= 1;
                }
                Ok((out.predicted_observables != want).then_some(g))
            })
            .collect();
        let wrong: Vec<usize> = verdicts?.into_iter().flatten().collect();
        audits.push((basis_name.clone(), model.mechanisms.len(), wrong));
    }
    Ok(DecodeCheckReport { audits })
}

// ---------------------------------------------------------------------------
// Oracle comparison
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleComparison {
    pub p_bell: f64,
    pub p_gate: f64,
    pub two_sided: OracleEstimate,
    pub folded: OracleEstimate,
    /// |rate difference| over the combined standard error.
    pub z_score: f64,
}

/// Compare the two-sided protocol oracle against its folded single-node
/// equivalent at each sweep point. Requires two-sided rates
/// (noise.folded = false).
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<Vec<OracleComparison>, RunnerError> {
    cfg.validate()?;
    if cfg.noise.folded {
        return Err(ConfigError::Invalid(
            "oracle needs two-sided rates: set noise.folded = false".into(),
        )
        .into());
    }
    let (code, _) = build_code(cfg)?;
    let mut out = Vec::new();
    for (i, &p_bell) in cfg.noise.sweep.iter().enumerate() {
        let p_gate = if cfg.noise.mode == "unified" { p_bell / 50.0 } else { cfg.noise.p_gate };
        let noise = FoldedNoise::new(p_bell, p_gate)?;
        let seed_two = derive_seed(cfg.run.seed, &format!("oracle/two/{i}"));
        let seed_fold = derive_seed(cfg.run.seed, &format!("oracle/folded/{i}"));
        let two_sided = two_sided_oracle(&code, &noise, cfg.run.shots, seed_two)?;
        let folded = folded_oracle(&code, &noise, cfg.run.shots, seed_fold)?;
        let se = (two_sided.stderr.powi(2) + folded.stderr.powi(2)).sqrt();
        let z_score =
            if se > 0.0 { (two_sided.rate - folded.rate).abs() / se } else { 0.0 };
        out.push(OracleComparison { p_bell, p_gate, two_sided, folded, z_score });
    }
    let out_dir = PathBuf::from(&cfg.run.out);
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(
        out_dir.join("oracle.json"),
        serde_json::to_string_pretty(&out).expect("oracle serializes") + "\n",
    )?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Code export
// ---------------------------------------------------------------------------

/// Build the configured code and export its matrices into `<out>/code/`.
pub fn run_build_code(cfg: &ExperimentConfig) -> Result<(CssCode, String, PathBuf), RunnerError> {
    cfg.validate()?;
    let (code, id) = build_code(cfg)?;
    let dir = PathBuf::from(&cfg.run.out).join("code");
    codes::export_code(&code, &dir)?;
    Ok((code, id, dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn small_config(out: &Path) -> ExperimentConfig {
        let text = format!(
            r#"
[code]
family = "surface"
d = 3

[noise]
sweep = [0.02, 0.05]
mode = "bell"
p_gate = 0.002

[schedule]
rounds = 2
cycles_per_round = 2
bases = ["z"]

[run]
shots = 200
seed = 11
out = "{}"
block_size = 100
"#,
            out.display()
        );
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        cfg.validate().unwrap();
        cfg
    }

    #[test]
    fn derive_seed_is_stable_and_tag_sensitive() {
        let a = derive_seed(7, "x/p0.1/z/block0");
        assert_eq!(a, derive_seed(7, "x/p0.1/z/block0"));
        assert_ne!(a, derive_seed(7, "x/p0.1/z/block1"));
        assert_ne!(a, derive_seed(8, "x/p0.1/z/block0"));
    }

    #[test]
    fn code_group_table() {
        assert_eq!(code_group("surface_3"), Some((3.0, 13.0)));
        assert_eq!(code_group("toric_4"), Some((4.0, 32.0)));
        assert_eq!(code_group("hgp_2"), Some((6.0, 625.0)));
        assert_eq!(code_group("lp_4"), Some((24.0, 1428.0)));
        assert_eq!(code_group("mystery"), None);
    }

    #[test]
    fn results_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows = vec![PointResult {
            code: "surface_3".into(),
            p: 0.05,
            basis: "z".into(),
            shots: 1000,
            failures: 42,
            p_tot: 0.042,
            p_cycle: 0.01,
            stderr: 0.0063,
        }];
        write_results_csv(&rows, &path).unwrap();
        let back = read_results_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].code, "surface_3");
        assert_eq!(back[0].shots, 1000);
        assert_eq!(back[0].p, 0.05);
        assert_eq!(back[0].p_tot, 0.042);
    }

    #[test]
    fn run_experiment_is_deterministic_and_writes_outputs() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let out1 = run_experiment(&small_config(&dir1.path().join("o"))).unwrap();
        let out2 = run_experiment(&small_config(&dir2.path().join("o"))).unwrap();
        let csv1 = std::fs::read(out1.out_dir.join("results.csv")).unwrap();
        let csv2 = std::fs::read(out2.out_dir.join("results.csv")).unwrap();
        assert_eq!(csv1, csv2, "identical configs must reproduce results.csv byte-for-byte");
        assert!(out1.out_dir.join("manifest.json").exists());
        // Higher noise must not look cleaner in this easy regime; at least
        // the failure counts are recorded per point.
        assert_eq!(out1.points.len(), 2);
        assert!(out1.points.iter().all(|p| p.shots > 0));
    }

    #[test]
    fn report_flags_hash_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let run = run_experiment(&small_config(&out)).unwrap();
        // Tamper with the stored hash.
        let mut manifest = run.manifest.clone();
        manifest.config_hash = "0".repeat(64);
        std::fs::write(
            run.out_dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).unwrap(),
        )
        .unwrap();
        let rep_out = dir.path().join("rep");
        let err = run_report(std::slice::from_ref(&run.out_dir), &rep_out, false);
        assert!(err.is_err());
        let ok = run_report(std::slice::from_ref(&run.out_dir), &rep_out, true).unwrap();
        assert!(ok.contains("WARNING"));
    }

    #[test]
    fn decode_check_passes_on_surface_code() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(&dir.path().join("o"));
        cfg.noise.sweep = vec![0.002];
        let report = run_decode_check(&cfg).unwrap();
        assert_eq!(report.failures(), 0, "audit: {:?}", report.audits);
    }

    #[test]
    fn oracle_requires_two_sided_rates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(&dir.path().join("o"));
        match run_oracle(&cfg) {
            Err(e) => assert_eq!(e.exit_code(), 2),
            Ok(_) => panic!("folded config must be rejected"),
        }
    }

    #[test]
    fn prepare_fit_points_combines_and_masks() {
        let mk = |p: f64, basis: &str, failures: u64| PointResult {
            code: "hgp_1".into(),
            p,
            basis: basis.into(),
            shots: 1000,
            failures,
            p_tot: failures as f64 / 1000.0,
            p_cycle: 0.0,
            stderr: 0.001,
        };
        let rows = vec![mk(0.1, "z", 100), mk(0.1, "x", 50), mk(0.5, "z", 900)];
        let pts = prepare_fit_points(&rows, 4, "threshold", true, None, Some(0.2)).unwrap();
        assert_eq!(pts.len(), 1);
        let want = analysis::combine_bases(0.1, 0.05);
        assert!((pts[0].p_block_total - want).abs() < 1e-12);
        assert_eq!(pts[0].group, 4.0);
        let pts = prepare_fit_points(&rows, 4, "subthreshold", false, None, None).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].group, 225.0);
    }
}
