//! Classical LDPC component codes from biregular Tanner graphs.
//!
//! Candidates are drawn with a configuration-model pairing and selected by
//! girth (>= 6 required), then spectral gap, then distance estimate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gf2::BinMatrix;

use super::CodeError;

/// A classical code given by its parity-check matrix, together with the
/// Tanner-graph figures of merit used for candidate selection.
#[derive(Clone, Debug)]
pub struct ClassicalCode {
    pub h: BinMatrix,
    /// Shortest cycle length of the bipartite Tanner graph; None for forests.
    pub girth: Option<usize>,
    pub spectral_gap: f64,
    /// Minimum nonzero codeword weight; None when the kernel is trivial.
    pub d_estimate: Option<usize>,
    /// Whether `d_estimate` came from exhaustive codeword enumeration.
    pub d_exact: bool,
}

impl ClassicalCode {
    pub fn n_bits(&self) -> usize {
        self.h.cols()
    }

    pub fn n_checks(&self) -> usize {
        self.h.rows()
    }

    pub fn from_matrix(h: BinMatrix, distance_budget: usize) -> Result<Self, CodeError> {
        let girth = girth(&h);
        let spectral_gap = spectral_gap(&h)?;
        let (d_estimate, d_exact) = classical_min_distance(&h, distance_budget, 0);
        Ok(Self { h, girth, spectral_gap, d_estimate, d_exact })
    }

    /// Repetition-code chain matrix [[1,1,0,..],[0,1,1,..],..], (n-1) x n.
    pub fn repetition(n: usize) -> BinMatrix {
        BinMatrix::from_rows(n, (0..n - 1).map(|i| vec![i, i + 1]).collect()).unwrap()
    }
}

/// Girth of the bipartite Tanner graph of `h` (bits + checks as vertices);
/// None if the graph is a forest.
pub fn girth(h: &BinMatrix) -> Option<usize> {
    // BFS from every vertex; the shortest cycle through the root is found
    // when two BFS branches meet.
    let n_bits = h.cols();
    let n_checks = h.rows();
    let n = n_bits + n_checks;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (check, support) in h.row_supports().iter().enumerate() {
        for &bit in support {
            adj[bit].push(n_bits + check);
            adj[n_bits + check].push(bit);
        }
    }
    let mut best: Option<usize> = None;
    let mut depth = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        depth.iter_mut().for_each(|d| *d = usize::MAX);
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if v == parent[u] {
                    continue;
                }
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else {
                    // Cycle through root has length depth[u] + depth[v] + 1;
                    // only even totals correspond to true shortest cycles in
                    // a bipartite graph, and the minimum over roots is exact.
                    let len = depth[u] + depth[v] + 1;
                    if best.is_none_or(|b| len < b) && len % 2 == 0 {
                        best = Some(len);
                    }
                }
            }
        }
    }
    best
}

/// Spectral gap lambda_1 - lambda_2 of the bipartite adjacency matrix.
///
/// The adjacency spectrum of a bipartite graph is {+/- sigma_i} padded with
/// zeros, where sigma_i are the singular values of the biadjacency matrix.
/// lambda_2 is the second largest of that full multiset, so a K_{1,1}
/// single-edge graph has lambda_2 = -1.
pub fn spectral_gap(h: &BinMatrix) -> Result<f64, CodeError> {
    if !is_connected(h) {
        return Err(CodeError::DisconnectedGraph);
    }
    let (s1, s2) = top_two_singular_values(h);
    let n_vertices = h.rows() + h.cols();
    let rank2 = if s2 > 1e-9 { 2 } else { 1 };
    let lambda2 = if s2 > 1e-9 {
        s2
    } else if n_vertices > 2 * rank2 {
        0.0
    } else {
        -s1
    };
    Ok(s1 - lambda2)
}

fn is_connected(h: &BinMatrix) -> bool {
    let n_bits = h.cols();
    let n = n_bits + h.rows();
    if n == 0 {
        return true;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (check, support) in h.row_supports().iter().enumerate() {
        for &bit in support {
            adj[bit].push(n_bits + check);
            adj[n_bits + check].push(bit);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Two largest singular values of the biadjacency matrix, via power
/// iteration with deflation on H^T H (tolerance 1e-9, <= 10^4 iterations).
fn top_two_singular_values(h: &BinMatrix) -> (f64, f64) {
    let n = h.cols();
    let ht = h.transpose();
    let apply = |v: &[f64]| -> Vec<f64> {
        // w = H^T (H v)
        let mut hv = vec![0.0; h.rows()];
        for (r, support) in h.row_supports().iter().enumerate() {
            hv[r] = support.iter().map(|&c| v[c]).sum();
        }
        let mut w = vec![0.0; n];
        for (r, support) in ht.row_supports().iter().enumerate() {
            w[r] = support.iter().map(|&c| hv[c]).sum();
        }
        w
    };
    let mut eigs = [0.0f64; 2];
    let mut vecs: Vec<Vec<f64>> = Vec::new();
    for slot in 0..2usize.min(n) {
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + ((i * 2654435761usize.wrapping_add(slot)) % 97) as f64 / 97.0)
            .collect();
        orthogonalize(&mut v, &vecs);
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let mut w = apply(&v);
            orthogonalize(&mut w, &vecs);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-30 {
                lambda = 0.0;
                break;
            }
            w.iter_mut().for_each(|x| *x /= norm);
            let new_lambda = norm;
            let diff = (new_lambda - lambda).abs();
            v = w;
            lambda = new_lambda;
            if diff < 1e-9 * lambda.max(1.0) {
                break;
            }
        }
        eigs[slot] = lambda.max(0.0);
        vecs.push(v);
    }
    (eigs[0].sqrt(), eigs[1].sqrt())
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Minimum nonzero codeword weight of ker(h).
///
/// Exhaustive over all 2^k codewords when that fits the budget (the bool is
/// true); otherwise a randomized search over sums of kernel-basis rows gives
/// an upper bound (bool false). Returns None when the kernel is trivial.
pub fn classical_min_distance(
    h: &BinMatrix,
    budget: usize,
    seed: u64,
) -> (Option<usize>, bool) {
    let basis = h.kernel_basis();
    let k = basis.rows();
    if k == 0 {
        return (None, true);
    }
    let n = h.cols();
    if k < 63 && (1u64 << k) <= budget as u64 {
        // Gray-code walk over all codewords.
        let mut word = vec![0u8; n];
        let mut best = usize::MAX;
        let mut gray_prev = 0u64;
        for i in 1u64..(1 << k) {
            let gray = i ^ (i >> 1);
            let flipped = (gray ^ gray_prev).trailing_zeros() as usize;
            gray_prev = gray;
            for &c in basis.row(flipped) {
                word[c] ^= 1;
            }
            let w = word.iter().map(|&b| b as usize).sum();
            if w < best {
                best = w;
            }
        }
        (Some(best), true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trials = budget.max(100);
        let mut best = usize::MAX;
        let mut word = vec![0u8; n];
        for _ in 0..trials {
            word.iter_mut().for_each(|b| *b = 0);
            let mut any = false;
            for r in 0..k {
                if rng.gen_bool(0.5) {
                    any = true;
                    for &c in basis.row(r) {
                        word[c] ^= 1;
                    }
                }
            }
            if !any {
                for &c in basis.row(rng.gen_range(0..k)) {
                    word[c] ^= 1;
                }
            }
            let w: usize = word.iter().map(|&b| b as usize).sum();
            if w < best {
                best = w;
            }
        }
        (Some(best), false)
    }
}

/// Samples candidate (bit_degree, check_degree)-biregular Tanner graphs and
/// keeps the best by (girth >= 6 filter, spectral gap, distance estimate).
pub fn sample_tanner_graph(
    n_bits: usize,
    bit_degree: usize,
    check_degree: usize,
    trials: usize,
    seed: u64,
) -> Result<ClassicalCode, CodeError> {
    sample_tanner_graph_targeted(n_bits, bit_degree, check_degree, trials, seed, true, None)
}

/// Like [`sample_tanner_graph`], optionally relaxing the girth filter to >= 4
/// and restricting to candidates with an exact target distance. Used by the
/// family builders, where the designed distance is the hard requirement.
pub fn sample_tanner_graph_targeted(
    n_bits: usize,
    bit_degree: usize,
    check_degree: usize,
    trials: usize,
    seed: u64,
    require_girth6: bool,
    d_target: Option<usize>,
) -> Result<ClassicalCode, CodeError> {
    if !(n_bits * bit_degree).is_multiple_of(check_degree) {
        return Err(CodeError::DegreeMismatch { n_bits, bit_degree, check_degree });
    }
    let n_checks = n_bits * bit_degree / check_degree;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClassicalCode> = None;
    for _ in 0..trials {
        let Some(mut rows) =
            pair_configuration_model(n_bits, n_checks, bit_degree, check_degree, &mut rng)
        else {
            continue;
        };
        // Raw pairings almost surely contain 4-cycles at these degrees, so
        // repair with degree-preserving edge swaps before the girth filter.
        if require_girth6 && !break_four_cycles(&mut rows, &mut rng) {
            continue;
        }
        let h = BinMatrix::from_rows(n_bits, rows)?;
        let g = girth(&h);
        if g.is_some_and(|g| g < if require_girth6 { 6 } else { 4 }) {
            continue;
        }
        let connected = is_connected(&h);
        if !connected && bit_degree >= 2 {
            continue;
        }
        // Degree-1 matchings are disconnected by nature; score their gap as 0.
        let spectral_gap = if connected { spectral_gap(&h)? } else { 0.0 };
        let (d_estimate, d_exact) = classical_min_distance(&h, 1 << 16, 0);
        if let Some(target) = d_target {
            if !d_exact || d_estimate != Some(target) {
                continue;
            }
        }
        let cand = ClassicalCode { h, girth: g, spectral_gap, d_estimate, d_exact };
        let better = match &best {
            None => true,
            Some(b) => {
                let gap_diff = cand.spectral_gap - b.spectral_gap;
                if gap_diff.abs() > 1e-9 {
                    gap_diff > 0.0
                } else {
                    cand.d_estimate.unwrap_or(0) > b.d_estimate.unwrap_or(0)
                }
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or(CodeError::NoCandidate { trials })
}

/// One configuration-model draw; None if the pairing produced a multi-edge.
fn pair_configuration_model(
    n_bits: usize,
    n_checks: usize,
    bit_degree: usize,
    check_degree: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Vec<usize>>> {
    let mut bit_stubs: Vec<usize> = (0..n_bits).flat_map(|b| std::iter::repeat_n(b, bit_degree)).collect();
    bit_stubs.shuffle(rng);
    let mut rows = vec![Vec::new(); n_checks];
    let mut idx = 0;
    for row in rows.iter_mut() {
        for _ in 0..check_degree {
            let bit = bit_stubs[idx];
            idx += 1;
            if row.contains(&bit) {
                return None;
            }
            row.push(bit);
        }
    }
    Some(rows)
}

/// Removes all 4-cycles (pairs of checks sharing two bits) by swapping bits
/// between checks; swaps preserve all bit and check degrees. Returns false if
/// the repair budget runs out.
fn break_four_cycles(rows: &mut [Vec<usize>], rng: &mut ChaCha8Rng) -> bool {
    let n_checks = rows.len();
    if n_checks < 2 {
        return true;
    }
    let budget = 200 * n_checks * rows[0].len();
    for _ in 0..budget {
        let Some((c1, b)) = find_four_cycle(rows, rng) else {
            return true;
        };
        let c3 = rng.gen_range(0..n_checks);
        let b3 = rows[c3][rng.gen_range(0..rows[c3].len())];
        if c3 == c1 || rows[c1].contains(&b3) || rows[c3].contains(&b) {
            continue;
        }
        let i1 = rows[c1].iter().position(|&x| x == b).unwrap();
        let i3 = rows[c3].iter().position(|&x| x == b3).unwrap();
        rows[c1][i1] = b3;
        rows[c3][i3] = b;
    }
    false
}

/// Finds one offending edge of a 4-cycle: a (check, bit) pair where the check
/// shares two or more bits with another check. Scan order is randomized so
/// repeated repairs don't thrash the same corner of the graph.
fn find_four_cycle(rows: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(rng);
    for (oi, &c1) in order.iter().enumerate() {
        for &c2 in &order[oi + 1..] {
            let shared: Vec<usize> =
                rows[c1].iter().copied().filter(|b| rows[c2].contains(b)).collect();
            if shared.len() >= 2 {
                return Some((c1, shared[rng.gen_range(0..shared.len())]));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn girth_of_path_is_none() {
        let h = BinMatrix::from_dense(&[vec![1, 1, 0], vec![0, 1, 1]]);
        assert_eq!(girth(&h), None);
    }

    #[test]
    fn girth_of_doubled_edge_pair() {
        // Two checks sharing two bits: 4-cycle.
        let h = BinMatrix::from_dense(&[vec![1, 1], vec![1, 1]]);
        assert_eq!(girth(&h), Some(4));
    }

    #[test]
    fn girth_of_six_cycle() {
        // 3 bits, 3 checks in a ring.
        let h = BinMatrix::from_dense(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]);
        assert_eq!(girth(&h), Some(6));
    }

    #[test]
    fn spectral_gap_biregular_leading_eigenvalue() {
        // (3,4)-regular graph: lambda_1 = sqrt(3 * 4), independent of size.
        let code = sample_tanner_graph(20, 3, 4, 200, 11).unwrap();
        let (s1, _) = top_two_singular_values(&code.h);
        assert!((s1 - 12f64.sqrt()).abs() < 1e-6, "s1 = {s1}");
    }

    #[test]
    fn spectral_gap_complete_bipartite_k22() {
        let h = BinMatrix::from_dense(&[vec![1, 1], vec![1, 1]]);
        let (s1, s2) = top_two_singular_values(&h);
        assert!((s1 - 2.0).abs() < 1e-6);
        assert!(s2.abs() < 1e-6);
        // lambda_2 = 0 (zeros pad the spectrum), so the gap is 2.
        assert!((spectral_gap(&h).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn spectral_gap_single_edge() {
        let h = BinMatrix::from_dense(&[vec![1]]);
        // Spectrum {1, -1}: lambda_2 = -1 by the documented convention.
        assert!((spectral_gap(&h).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_gap_flags_disconnected() {
        let h = BinMatrix::from_dense(&[vec![1, 1, 0, 0], vec![0, 0, 1, 1]]);
        assert!(matches!(spectral_gap(&h), Err(CodeError::DisconnectedGraph)));
    }

    #[test]
    fn hamming_code_distance() {
        let h = BinMatrix::from_dense(&[
            vec![1, 0, 1, 0, 1, 0, 1],
            vec![0, 1, 1, 0, 0, 1, 1],
            vec![0, 0, 0, 1, 1, 1, 1],
        ]);
        let (d, exact) = classical_min_distance(&h, 1 << 16, 0);
        assert_eq!(d, Some(3));
        assert!(exact);
    }

    #[test]
    fn repetition_code_distance() {
        let h = ClassicalCode::repetition(5);
        let (d, exact) = classical_min_distance(&h, 1 << 16, 0);
        assert_eq!(d, Some(5));
        assert!(exact);
    }

    #[test]
    fn zero_matrix_distance_is_one() {
        let h = BinMatrix::zeros(1, 3);
        let (d, _) = classical_min_distance(&h, 1 << 16, 0);
        assert_eq!(d, Some(1));
    }

    #[test]
    fn matching_sample_has_infinite_girth() {
        let code = sample_tanner_graph(4, 1, 1, 50, 3).unwrap();
        assert_eq!(code.girth, None);
        assert_eq!(code.n_checks(), 4);
    }

    #[test]
    fn sampled_graph_is_biregular_with_high_girth() {
        let code = sample_tanner_graph(20, 3, 4, 500, 5).unwrap();
        assert_eq!(code.n_checks(), 15);
        assert!(code.girth.unwrap_or(usize::MAX) >= 6);
        // Degree audit.
        for row in code.h.row_supports() {
            assert_eq!(row.len(), 4);
        }
        assert_eq!(code.h.max_col_weight(), 3);
        assert_eq!(code.h.transpose().max_row_weight(), 3);
        // Independent BFS girth oracle agrees.
        assert_eq!(girth(&code.h), code.girth);
    }
}
