// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Gauss–Legendre rules and Poisson tails.

use statrs::distribution::{DiscreteCDF, Poisson};

/// Nodes and weights of the `k`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for n in 2..=k {
                let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
                p0 = p1;
                p1 = p2;
            }
            let pk = if k == 0 { 1.0 } else if k == 1 { x } else { p1 };
            let pkm1 = if k == 1 { 1.0 } else { p0 };
            dp = k as f64 * (x * pk - pkm1) / (x * x - 1.0);
            let dx = pk / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes on `[a, b)` split at `breaks` (composite rule).
pub fn composite_nodes(a: f64, b: f64, breaks: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64, usize)> {
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    let mut out = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, wt) in rule.0.iter().zip(&rule.1) {
            out.push((mid + half * x, half * wt, cell_index(mid, breaks)));
        }
    }
    out
}

/// Number of breakpoints at or below `t`.
pub fn cell_index(t: f64, breaks: &[f64]) -> usize {
    breaks.iter().filter(|&&b| b <= t).count()
}

/// `P(n > n_max)` for `n ~ Poisson(mean)`.
pub fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let p = Poisson::new(mean).expect("positive mean");
    p.sf(n_max as u64)
}
