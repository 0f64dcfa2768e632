//! Logical-error-rate estimation, per-cycle conversion, threshold and
//! subthreshold ansatz fits, and extrapolation.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need {need} data points for {what}, got {got}")]
    InsufficientPoints { what: &'static str, need: usize, got: usize },
    #[error("nonlinear fit did not converge: {0}")]
    NoConvergence(String),
    #[error("fit is missing parameter {0}")]
    MissingParam(&'static str),
    #[error("extrapolation requested at p = {p} >= p_th = {p_th}")]
    AboveThreshold { p: f64, p_th: f64 },
}

/// One simulated operating point of one code.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct LerPoint {
    pub code: String,
    /// Swept physical parameter (p'_bell or unified p).
    pub p: f64,
    pub shots: u64,
    pub failures: u64,
    pub p_block_total: f64,
    pub stderr: f64,
    pub cycles: usize,
    /// Grouping parameter: designed distance d for threshold fits, code size
    /// n for subthreshold fits. Recorded explicitly so fits can group
    /// points by code.
    pub group: f64,
}

impl LerPoint {
    pub fn new(code: &str, p: f64, shots: u64, failures: u64, cycles: usize, group: f64) -> Self {
        let (p_block_total, stderr) = estimate_ler(shots, failures);
        Self { code: code.to_string(), p, shots, failures, p_block_total, stderr, cycles, group }
    }

    /// Per-cycle logical error rate of this point.
    pub fn per_cycle_ler(&self) -> f64 {
        per_cycle(self.p_block_total, self.cycles)
    }

    /// Standard error propagated through the per-cycle conversion.
    pub fn per_cycle_stderr(&self) -> f64 {
        let c = self.cycles as f64;
        let base = (1.0 - self.p_block_total).max(1e-300);
        self.stderr * base.powf(1.0 / c - 1.0) / c
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct FitResult {
    /// Named parameters: (A, B, C, p_th, alpha) for threshold fits,
    /// (A, B, C, p_th) for subthreshold fits.
    pub params: Vec<(String, f64)>,
    /// Covariance of the internal fit parameters, scaled by the reduced
    /// chi-square. For subthreshold fits the internal parameters are
    /// (ln A, B, C, ln p_th).
    pub covariance: Vec<Vec<f64>>,
    /// Sum of squared weighted residuals at the optimum.
    pub residual: f64,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

/// Binomial point estimate and standard error.
pub fn estimate_ler(shots: u64, failures: u64) -> (f64, f64) {
    assert!(shots >= 1, "estimate_ler needs at least one shot");
    let p = failures as f64 / shots as f64;
    (p, (p * (1.0 - p) / shots as f64).sqrt())
}

/// Per-cycle logical error rate: 1 - (1 - p)^(1/cycles).
pub fn per_cycle(p_block_total: f64, cycles: usize) -> f64 {
    assert!((0.0..=1.0).contains(&p_block_total));
    assert!(cycles >= 1);
    1.0 - (1.0 - p_block_total).powf(1.0 / cycles as f64)
}

/// Combine Z- and X-basis block error rates under an independence
/// assumption: 1 - (1 - p_z)(1 - p_x).
pub fn combine_bases(p_z: f64, p_x: f64) -> f64 {
    1.0 - (1.0 - p_z) * (1.0 - p_x)
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt on weighted residuals with analytic Jacobians.
// ---------------------------------------------------------------------------

/// Fills `r` with weighted residuals and `jac` (row-major, n_resid x
/// n_params) with their derivatives at `theta`.
type EvalFn<'a> = &'a dyn Fn(&[f64], &mut [f64], &mut [f64]);

struct LmOutcome {
    theta: Vec<f64>,
    chi2: f64,
    covariance: Vec<Vec<f64>>,
}

fn lm_fit(
    theta0: &[f64],
    n_resid: usize,
    eval: EvalFn,
    clamp: &dyn Fn(&mut [f64]),
) -> Result<LmOutcome, AnalysisError> {
    let k = theta0.len();
    let mut theta = theta0.to_vec();
    clamp(&mut theta);
    let mut r = vec![0.0; n_resid];
    let mut jac = vec![0.0; n_resid * k];
    eval(&theta, &mut r, &mut jac);
    let mut chi2: f64 = r.iter().map(|x| x * x).sum();
    if !chi2.is_finite() {
        return Err(AnalysisError::NoConvergence("non-finite initial residual".into()));
    }
    let mut lambda = 1e-3;
    for _ in 0..200 {
        // Normal equations: (JtJ + lambda diag(JtJ)) delta = -Jt r.
        let mut jtj = vec![0.0; k * k];
        let mut jtr = vec![0.0; k];
        for i in 0..n_resid {
            for a in 0..k {
                jtr[a] += jac[i * k + a] * r[i];
                for b in a..k {
                    jtj[a * k + b] += jac[i * k + a] * jac[i * k + b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                jtj[a * k + b] = jtj[b * k + a];
            }
        }
        let grad_norm = jtr.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if grad_norm < 1e-12 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for a in 0..k {
                lhs[a * k + a] += lambda * jtj[a * k + a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|x| -x).collect();
            let Some(delta) = solve_dense(&mut lhs, &rhs, k) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = theta.clone();
            for a in 0..k {
                trial[a] += delta[a];
            }
            clamp(&mut trial);
            let mut r_trial = vec![0.0; n_resid];
            let mut jac_trial = vec![0.0; n_resid * k];
            eval(&trial, &mut r_trial, &mut jac_trial);
            let chi2_trial: f64 = r_trial.iter().map(|x| x * x).sum();
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                let step: f64 = delta.iter().map(|x| x.abs()).fold(0.0, f64::max);
                let gain = chi2 - chi2_trial;
                theta = trial;
                r = r_trial;
                jac = jac_trial;
                chi2 = chi2_trial;
                lambda = (lambda / 10.0).max(1e-14);
                improved = true;
                if step < 1e-12 || gain < 1e-15 * chi2.max(1e-30) {
                    return Ok(finish(theta, chi2, &jac, n_resid, k));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(finish(theta, chi2, &jac, n_resid, k))
}

fn finish(theta: Vec<f64>, chi2: f64, jac: &[f64], n_resid: usize, k: usize) -> LmOutcome {
    let mut jtj = vec![0.0; k * k];
    for i in 0..n_resid {
        for a in 0..k {
            for b in 0..k {
                jtj[a * k + b] += jac[i * k + a] * jac[i * k + b];
            }
        }
    }
    let s2 = if n_resid > k { chi2 / (n_resid - k) as f64 } else { 1.0 };
    let covariance = match invert_dense(&jtj, k) {
        Some(inv) => (0..k)
            .map(|a| (0..k).map(|b| inv[a * k + b] * s2).collect())
            .collect(),
        None => vec![vec![f64::NAN; k]; k],
    };
    LmOutcome { theta, chi2, covariance }
}

/// Solves lhs * x = rhs (k x k, row-major) by Gaussian elimination with
/// partial pivoting. Consumes lhs.
fn solve_dense(lhs: &mut [f64], rhs: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut b = rhs.to_vec();
    for col in 0..k {
        let pivot = (col..k).max_by(|&a, &c| {
            lhs[a * k + col].abs().partial_cmp(&lhs[c * k + col].abs()).unwrap()
        })?;
        if lhs[pivot * k + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..k {
                lhs.swap(col * k + j, pivot * k + j);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..k {
            let f = lhs[row * k + col] / lhs[col * k + col];
            for j in col..k {
                lhs[row * k + j] -= f * lhs[col * k + j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut acc = b[col];
        for j in col + 1..k {
            acc -= lhs[col * k + j] * x[j];
        }
        x[col] = acc / lhs[col * k + col];
    }
    Some(x)
}

fn invert_dense(m: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; k * k];
    for col in 0..k {
        let mut e = vec![0.0; k];
        e[col] = 1.0;
        let x = solve_dense(&mut m.to_vec(), &e, k)?;
        for row in 0..k {
            inv[row * k + col] = x[row];
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// Threshold fit: per-cycle LER = A + Bx + Cx^2, x = (p - p_th) d^alpha.
// ---------------------------------------------------------------------------

/// Weighted nonlinear fit of the critical-exponent ansatz over
/// (A, B, C, p_th, alpha). Points must carry the designed distance in
/// `group`; weights are 1/stderr^2 on the per-cycle LER.
pub fn fit_threshold(points: &[LerPoint]) -> Result<FitResult, AnalysisError> {
    let mut groups: Vec<f64> = points.iter().map(|pt| pt.group).collect();
    groups.sort_by(|a, b| a.partial_cmp(b).unwrap());
    groups.dedup();
    if groups.len() < 3 {
        return Err(AnalysisError::InsufficientPoints {
            what: "threshold fit (codes)",
            need: 3,
            got: groups.len(),
        });
    }
    if points.len() < 9 {
        return Err(AnalysisError::InsufficientPoints {
            what: "threshold fit (points)",
            need: 9,
            got: points.len(),
        });
    }
    let data: Vec<(f64, f64, f64, f64)> = points
        .iter()
        .map(|pt| {
            let y = pt.per_cycle_ler();
            let sigma = pt.per_cycle_stderr().max(1e-12);
            (pt.p, y, sigma, pt.group)
        })
        .collect();

    let eval = |theta: &[f64], r: &mut [f64], jac: &mut [f64]| {
        let (a, b, c, p_th, alpha) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
        for (i, &(p, y, sigma, d)) in data.iter().enumerate() {
            let da = d.powf(alpha);
            let x = (p - p_th) * da;
            let f = a + b * x + c * x * x;
            let slope = b + 2.0 * c * x;
            r[i] = (f - y) / sigma;
            jac[i * 5] = 1.0 / sigma;
            jac[i * 5 + 1] = x / sigma;
            jac[i * 5 + 2] = x * x / sigma;
            jac[i * 5 + 3] = -slope * da / sigma;
            jac[i * 5 + 4] = slope * x * d.ln() / sigma;
        }
    };
    let clamp = |theta: &mut [f64]| {
        theta[3] = theta[3].clamp(1e-6, 1.0 - 1e-6);
        theta[4] = theta[4].clamp(0.01, 10.0);
    };

    let p_th0 = crossing_guess(&data, &groups);
    let mut best: Option<LmOutcome> = None;
    for &alpha0 in &[0.5, 1.0, 1.5, 2.0] {
        for &scale in &[0.8, 1.0, 1.2] {
            let p_th = (p_th0 * scale).clamp(1e-6, 1.0 - 1e-6);
            // Linear least squares for (A, B, C) at fixed (p_th, alpha).
            let abc = linear_quadratic(&data, p_th, alpha0);
            let theta0 = [abc[0], abc[1], abc[2], p_th, alpha0];
            if let Ok(out) = lm_fit(&theta0, data.len(), &eval, &clamp) {
                if best.as_ref().is_none_or(|b| out.chi2 < b.chi2) {
                    best = Some(out);
                }
            }
        }
    }
    let out = best.ok_or_else(|| AnalysisError::NoConvergence("threshold fit".into()))?;
    Ok(FitResult {
        params: vec![
            ("A".into(), out.theta[0]),
            ("B".into(), out.theta[1]),
            ("C".into(), out.theta[2]),
            ("p_th".into(), out.theta[3]),
            ("alpha".into(), out.theta[4]),
        ],
        covariance: out.covariance,
        residual: out.chi2,
    })
}

/// Initial p_th: linear-interpolated crossing of the two largest-d curves.
fn crossing_guess(data: &[(f64, f64, f64, f64)], groups: &[f64]) -> f64 {
    let median = {
        let mut ps: Vec<f64> = data.iter().map(|&(p, ..)| p).collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ps[ps.len() / 2]
    };
    if groups.len() < 2 {
        return median;
    }
    let curve = |d: f64| -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = data
            .iter()
            .filter(|&&(.., g)| g == d)
            .map(|&(p, y, ..)| (p, y))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pts
    };
    let c1 = curve(groups[groups.len() - 1]);
    let c2 = curve(groups[groups.len() - 2]);
    let interp = |c: &[(f64, f64)], p: f64| -> Option<f64> {
        let w = c.windows(2).find(|w| w[0].0 <= p && p <= w[1].0)?;
        let t = (p - w[0].0) / (w[1].0 - w[0].0).max(1e-300);
        Some(w[0].1 + t * (w[1].1 - w[0].1))
    };
    let mut prev: Option<(f64, f64)> = None;
    for &(p, ..) in data.iter() {
        if let (Some(y1), Some(y2)) = (interp(&c1, p), interp(&c2, p)) {
            let diff = y1 - y2;
            if let Some((p_prev, d_prev)) = prev {
                if d_prev.signum() != diff.signum() && d_prev != diff {
                    let t = d_prev / (d_prev - diff);
                    return p_prev + t * (p - p_prev);
                }
            }
            prev = Some((p, diff));
        }
    }
    median
}

/// Weighted linear LSQ for (A, B, C) of A + Bx + Cx^2 at fixed (p_th, alpha).
fn linear_quadratic(data: &[(f64, f64, f64, f64)], p_th: f64, alpha: f64) -> [f64; 3] {
    let mut m = [0.0f64; 9];
    let mut v = [0.0f64; 3];
    for &(p, y, sigma, d) in data {
        let x = (p - p_th) * d.powf(alpha);
        let basis = [1.0, x, x * x];
        let w = 1.0 / (sigma * sigma);
        for a in 0..3 {
            v[a] += w * basis[a] * y;
            for b in 0..3 {
                m[a * 3 + b] += w * basis[a] * basis[b];
            }
        }
    }
    match solve_dense(&mut m.to_vec(), &v, 3) {
        Some(x) => [x[0], x[1], x[2]],
        None => [v[0].max(1e-6), 0.0, 0.0],
    }
}

// ---------------------------------------------------------------------------
// Subthreshold fit: ln P = ln A + B n^C ln(p / p_th), fitted in log space.
// ---------------------------------------------------------------------------

/// Nonlinear least squares of the subthreshold ansatz P = A (p/p_th)^(B n^C)
/// in log space. Points must carry the code size n in `group`; only points
/// with nonzero failure estimates participate.
pub fn fit_subthreshold(points: &[LerPoint]) -> Result<FitResult, AnalysisError> {
    let data: Vec<(f64, f64, f64, f64)> = points
        .iter()
        .filter(|pt| pt.per_cycle_ler() > 0.0)
        .map(|pt| {
            let y = pt.per_cycle_ler();
            // d(ln y) = dy / y.
            let sigma = (pt.per_cycle_stderr() / y).max(1e-6);
            (pt.p, y.ln(), sigma, pt.group)
        })
        .collect();
    let mut sizes: Vec<f64> = data.iter().map(|&(.., n)| n).collect();
    sizes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(AnalysisError::InsufficientPoints {
            what: "subthreshold fit (sizes)",
            need: 2,
            got: sizes.len(),
        });
    }
    if data.len() < 5 {
        return Err(AnalysisError::InsufficientPoints {
            what: "subthreshold fit (points)",
            need: 5,
            got: data.len(),
        });
    }
    let p_max = data.iter().map(|&(p, ..)| p).fold(0.0, f64::max);

    // Internal parameterization (ln A, B, C, ln p_th) keeps A, p_th positive.
    let eval = |theta: &[f64], r: &mut [f64], jac: &mut [f64]| {
        let (ln_a, b, c, ln_pth) = (theta[0], theta[1], theta[2], theta[3]);
        for (i, &(p, ln_y, sigma, n)) in data.iter().enumerate() {
            let nc = n.powf(c);
            let l = p.ln() - ln_pth;
            let f = ln_a + b * nc * l;
            r[i] = (f - ln_y) / sigma;
            jac[i * 4] = 1.0 / sigma;
            jac[i * 4 + 1] = nc * l / sigma;
            jac[i * 4 + 2] = b * nc * n.ln() * l / sigma;
            jac[i * 4 + 3] = -b * nc / sigma;
        }
    };
    let min_ln_pth = (p_max * 1.0001).ln();
    let clamp = move |theta: &mut [f64]| {
        theta[2] = theta[2].clamp(0.01, 2.0);
        theta[3] = theta[3].clamp(min_ln_pth, 0.0);
    };

    // Coarse grid over (C, p_th) with linear LSQ for (ln A, B) at each node.
    let mut best: Option<LmOutcome> = None;
    for ci in 0..18 {
        let c = 0.1 + 0.05 * ci as f64;
        for pi in 0..24 {
            let p_th = p_max * 1.05 * 1.15f64.powi(pi);
            if p_th >= 1.0 {
                break;
            }
            let (ln_a, b) = linear_log_fit(&data, c, p_th);
            let theta0 = [ln_a, b, c, p_th.ln()];
            if let Ok(out) = lm_fit(&theta0, data.len(), &eval, &clamp) {
                if best.as_ref().is_none_or(|x| out.chi2 < x.chi2) {
                    best = Some(out);
                }
            }
        }
    }
    let out = best.ok_or_else(|| AnalysisError::NoConvergence("subthreshold fit".into()))?;
    Ok(FitResult {
        params: vec![
            ("A".into(), out.theta[0].exp()),
            ("B".into(), out.theta[1]),
            ("C".into(), out.theta[2]),
            ("p_th".into(), out.theta[3].exp()),
        ],
        covariance: out.covariance,
        residual: out.chi2,
    })
}

/// Weighted LSQ for (ln A, B) of ln y = ln A + B * n^C ln(p/p_th).
fn linear_log_fit(data: &[(f64, f64, f64, f64)], c: f64, p_th: f64) -> (f64, f64) {
    let (mut s_ww, mut s_wx, mut s_xx, mut s_wy, mut s_xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(p, ln_y, sigma, n) in data {
        let x = n.powf(c) * (p / p_th).ln();
        let w = 1.0 / (sigma * sigma);
        s_ww += w;
        s_wx += w * x;
        s_xx += w * x * x;
        s_wy += w * ln_y;
        s_xy += w * x * ln_y;
    }
    let det = s_ww * s_xx - s_wx * s_wx;
    if det.abs() < 1e-300 {
        return (s_wy / s_ww.max(1e-300), 0.0);
    }
    ((s_xx * s_wy - s_wx * s_xy) / det, (s_ww * s_xy - s_wx * s_wy) / det)
}

/// Evaluates the subthreshold ansatz A (p/p_th)^(B n^C) from a fit.
pub fn extrapolate(fit: &FitResult, p: f64, n: usize) -> Result<f64, AnalysisError> {
    let a = fit.param("A").ok_or(AnalysisError::MissingParam("A"))?;
    let b = fit.param("B").ok_or(AnalysisError::MissingParam("B"))?;
    let c = fit.param("C").ok_or(AnalysisError::MissingParam("C"))?;
    let p_th = fit.param("p_th").ok_or(AnalysisError::MissingParam("p_th"))?;
    if p > p_th {
        return Err(AnalysisError::AboveThreshold { p, p_th });
    }
    Ok(a * (p / p_th).powf(b * (n as f64).powf(c)))
}

/// Builds a FitResult directly from published subthreshold parameters.
pub fn subthreshold_fit_from_params(a: f64, b: f64, c: f64, p_th: f64) -> FitResult {
    FitResult {
        params: vec![
            ("A".into(), a),
            ("B".into(), b),
            ("C".into(), c),
            ("p_th".into(), p_th),
        ],
        covariance: vec![vec![0.0; 4]; 4],
        residual: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn estimate_ler_examples() {
        assert_eq!(estimate_ler(10_000, 0), (0.0, 0.0));
        let (p, se) = estimate_ler(100, 50);
        assert_eq!(p, 0.5);
        assert!((se - 0.05).abs() < 1e-15);
        let (p, se) = estimate_ler(10_000, 42);
        assert!((p - 0.0042).abs() < 1e-15);
        assert!((se - 6.467116822819887e-4).abs() < 1e-9);
    }

    #[test]
    fn per_cycle_examples() {
        assert_eq!(per_cycle(0.0, 42), 0.0);
        assert!((per_cycle(0.3, 1) - 0.3).abs() < 1e-15);
        // 1 - 0.58^(1/42), the standard cycle-normalization.
        assert!((per_cycle(0.42, 42) - 0.012885950599570206).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn per_cycle_inverse_consistent(p in 0.0f64..0.999, c in 1usize..200) {
            let q = per_cycle(p, c);
            let back = 1.0 - (1.0 - q).powi(c as i32);
            prop_assert!((back - p).abs() < 1e-12);
        }

        #[test]
        fn per_cycle_monotone(p1 in 0.0f64..0.9, dp in 1e-6f64..0.09, c in 1usize..100) {
            prop_assert!(per_cycle(p1 + dp, c) > per_cycle(p1, c));
        }
    }

    #[test]
    fn combine_bases_examples() {
        assert_eq!(combine_bases(0.0, 0.0), 0.0);
        assert!((combine_bases(0.37, 0.0) - 0.37).abs() < 1e-15);
        assert!((combine_bases(0.01, 0.02) - 0.0298).abs() < 1e-15);
    }

    fn synth_threshold(noise: f64, seed: u64) -> Vec<LerPoint> {
        let (a, b, c, p_th, alpha) = (0.05, 0.1, 0.05, 0.10, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for &d in &[4.0f64, 6.0, 8.0] {
            for i in 0..9 {
                let p = 0.08 + 0.005 * i as f64;
                let x = (p - p_th) * d.powf(alpha);
                let y = a + b * x + c * x * x;
                let eps: f64 = if noise > 0.0 {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    noise * g
                } else {
                    0.0
                };
                let y_obs = (y * (1.0 + eps)).max(1e-9);
                pts.push(LerPoint {
                    code: format!("d{d}"),
                    p,
                    shots: 0,
                    failures: 0,
                    p_block_total: y_obs,
                    stderr: (noise * y).max(1e-6),
                    cycles: 1,
                    group: d,
                });
            }
        }
        pts
    }

    #[test]
    fn threshold_fit_recovers_noise_free_parameters() {
        let fit = fit_threshold(&synth_threshold(0.0, 0)).unwrap();
        assert!((fit.param("p_th").unwrap() - 0.10).abs() / 0.10 < 1e-4, "{fit:?}");
        assert!((fit.param("alpha").unwrap() - 1.5).abs() / 1.5 < 1e-3, "{fit:?}");
        assert!((fit.param("A").unwrap() - 0.05).abs() / 0.05 < 1e-4, "{fit:?}");
        assert!(fit.residual < 1e-6, "residual {}", fit.residual);
    }

    #[test]
    fn threshold_fit_recovers_under_noise() {
        for seed in [1u64, 2, 3] {
            let fit = fit_threshold(&synth_threshold(0.01, seed)).unwrap();
            let p_th = fit.param("p_th").unwrap();
            assert!((p_th - 0.10).abs() / 0.10 < 0.05, "seed {seed}: p_th {p_th}");
        }
    }

    #[test]
    fn threshold_fit_rejects_insufficient_groups() {
        let pts: Vec<LerPoint> = synth_threshold(0.0, 0)
            .into_iter()
            .filter(|pt| pt.group < 7.0)
            .collect();
        assert!(matches!(
            fit_threshold(&pts),
            Err(AnalysisError::InsufficientPoints { .. })
        ));
    }

    fn synth_subthreshold(noise: f64, seed: u64) -> Vec<LerPoint> {
        let (a, b, c, p_th) = (0.26, 0.26, 0.44, 0.087);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for &n in &[128.0f64, 512.0, 2048.0] {
            for i in 0..7 {
                let p = 0.02 + 0.006 * i as f64;
                let y = a * (p / p_th).powf(b * n.powf(c));
                let eps: f64 = if noise > 0.0 {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    noise * g
                } else {
                    0.0
                };
                let y_obs = (y * (1.0 + eps)).max(1e-300);
                pts.push(LerPoint {
                    code: format!("n{n}"),
                    p,
                    shots: 0,
                    failures: 0,
                    p_block_total: y_obs,
                    stderr: (noise * y).max(y * 1e-6),
                    cycles: 1,
                    group: n,
                });
            }
        }
        pts
    }

    #[test]
    fn subthreshold_fit_recovers_parameters() {
        // Noise-free exact recovery.
        let fit = fit_subthreshold(&synth_subthreshold(0.0, 0)).unwrap();
        for (name, want) in [("A", 0.26), ("B", 0.26), ("C", 0.44), ("p_th", 0.087)] {
            let got = fit.param(name).unwrap();
            assert!((got - want).abs() / want < 1e-3, "{name}: {got} vs {want}");
        }
        // 1% multiplicative noise: all four within 10%.
        let fit = fit_subthreshold(&synth_subthreshold(0.01, 5)).unwrap();
        for (name, want) in [("A", 0.26), ("B", 0.26), ("C", 0.44), ("p_th", 0.087)] {
            let got = fit.param(name).unwrap();
            assert!((got - want).abs() / want < 0.10, "{name}: {got} vs {want}");
        }
    }

    #[test]
    fn fits_are_deterministic() {
        let pts = synth_threshold(0.01, 9);
        let f1 = fit_threshold(&pts).unwrap();
        let f2 = fit_threshold(&pts).unwrap();
        assert_eq!(f1.params, f2.params);
        assert_eq!(f1.residual, f2.residual);
    }

    #[test]
    fn extrapolate_reproduces_reference_values() {
        // SC fit from the published expression, evaluated at 1% for the
        // [[5800,1624]] code.
        let sc = subthreshold_fit_from_params(0.26, 0.26, 0.44, 0.087);
        let v = extrapolate(&sc, 0.01, 5800).unwrap();
        assert!((v - 2.260230476266085e-12).abs() / v < 1e-12);
        assert!((v - 2.3e-12).abs() / 2.3e-12 < 0.02);
        // LP fit for [[1428,184]] at 1%.
        let lp = subthreshold_fit_from_params(0.026, 0.05, 0.79, 0.094);
        let v = extrapolate(&lp, 0.01, 1428).unwrap();
        assert!((v - 2.0e-17).abs() / 2.0e-17 < 0.005, "{v}");
    }

    #[test]
    fn extrapolate_boundary_and_errors() {
        let fit = subthreshold_fit_from_params(0.26, 0.26, 0.44, 0.087);
        // p = p_th returns A.
        assert!((extrapolate(&fit, 0.087, 5800).unwrap() - 0.26).abs() < 1e-12);
        assert!(matches!(
            extrapolate(&fit, 0.1, 5800),
            Err(AnalysisError::AboveThreshold { .. })
        ));
    }

    #[test]
    fn lerpoint_new_fills_estimates() {
        let pt = LerPoint::new("hgp_1", 0.1, 100, 50, 42, 4.0);
        assert_eq!(pt.p_block_total, 0.5);
        assert!((pt.stderr - 0.05).abs() < 1e-15);
        assert!(pt.per_cycle_ler() > 0.0 && pt.per_cycle_ler() < 0.5);
    }
}
