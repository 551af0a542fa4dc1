//! Brute-force references shared by the integration tests.

#![allow(dead_code)]

use scldpc::TannerGraph;

/// Basis of the binary null space of the graph's parity-check matrix,
/// restricted to the variables with `free[v] == true` (others fixed to 0).
pub fn codeword_basis(graph: &TannerGraph, free: &[bool]) -> Vec<Vec<u8>> {
    let vars: Vec<usize> = (0..graph.vn_count()).filter(|&v| free[v]).collect();
    let col_of = |v: usize| vars.iter().position(|&x| x == v);
    let n = vars.len();
    let mut rows: Vec<Vec<u8>> = (0..graph.cn_count())
        .map(|c| {
            let mut r = vec![0u8; n];
            for v in graph.cn_neighbors(c) {
                if let Some(j) = col_of(v) {
                    r[j] ^= 1;
                }
            }
            r
        })
        .collect();
    // Reduced row echelon form over GF(2).
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][col] == 1) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && rows[i][col] == 1 {
                let pivot = rows[r].clone();
                for (a, b) in rows[i].iter_mut().zip(pivot) {
                    *a ^= b;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free_cols
        .iter()
        .map(|&f| {
            let mut x = vec![0u8; n];
            x[f] = 1;
            for (i, &p) in pivots.iter().enumerate() {
                x[p] = rows[i][f];
            }
            let mut full = vec![0u8; graph.vn_count()];
            for (j, &v) in vars.iter().enumerate() {
                full[v] = x[j];
            }
            full
        })
        .collect()
}

/// Exact bitwise MAP LLRs `log P(0|y) / P(1|y)` by enumerating all codewords.
pub fn bitwise_map_llrs(graph: &TannerGraph, basis: &[Vec<u8>], llrs: &[f64]) -> Vec<f64> {
    let n = graph.vn_count();
    assert!(basis.len() <= 24, "too many codewords to enumerate");
    let mut codeword = vec![0u8; n];
    let mut metrics = Vec::with_capacity(1 << basis.len());
    let mut words = Vec::with_capacity(1 << basis.len());
    for mask in 0u32..(1 << basis.len()) {
        codeword.iter_mut().for_each(|b| *b = 0);
        for (k, row) in basis.iter().enumerate() {
            if mask >> k & 1 == 1 {
                for (c, &b) in codeword.iter_mut().zip(row) {
                    *c ^= b;
                }
            }
        }
        // log P(y | c) up to a constant: -sum over ones of L_i.
        let metric: f64 = codeword
            .iter()
            .zip(llrs)
            .filter(|(&b, _)| b == 1)
            .map(|(_, &l)| -l)
            .sum();
        metrics.push(metric);
        words.push(codeword.clone());
    }
    let max = metrics.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p0 = vec![0.0; n];
    let mut p1 = vec![0.0; n];
    for (w, &m) in words.iter().zip(&metrics) {
        let p = (m - max).exp();
        for v in 0..n {
            if w[v] == 0 {
                p0[v] += p;
            } else {
                p1[v] += p;
            }
        }
    }
    (0..n).map(|v| (p0[v] / p1[v]).ln()).collect()
}

/// Minimum Hamming weight over the non-zero span of `basis`.
pub fn min_distance(basis: &[Vec<u8>]) -> usize {
    assert!(basis.len() <= 24, "too many codewords to enumerate");
    let mut best = usize::MAX;
    for mask in 1u32..(1 << basis.len()) {
        let mut word = vec![0u8; basis[0].len()];
        for (k, row) in basis.iter().enumerate() {
            if mask >> k & 1 == 1 {
                for (c, &b) in word.iter_mut().zip(row) {
                    *c ^= b;
                }
            }
        }
        best = best.min(word.iter().filter(|&&b| b == 1).count());
    }
    best
}
