// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Chi-square tests and small statistical helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Minimum expected count per bin after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi2_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).expect("positive dof").sf(x)
}

/// Groups bin indices so that every group has expected count at least
/// `MIN_EXPECTED`: low bins are pooled together, and a still-low pool joins
/// the smallest regular bin.
fn pool(expected: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut low = Vec::new();
    for (k, &e) in expected.iter().enumerate() {
        if e >= MIN_EXPECTED {
            groups.push(vec![k]);
        } else if e > 0.0 {
            low.push(k);
        }
    }
    if !low.is_empty() {
        let total: f64 = low.iter().map(|&k| expected[k]).sum();
        if total >= MIN_EXPECTED || groups.is_empty() {
            groups.push(low);
        } else {
            let (g, _) = groups
                .iter()
                .enumerate()
                .map(|(g, v)| (g, v.iter().map(|&k| expected[k]).sum::<f64>()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            groups[g].extend(low);
        }
    }
    groups
}

/// Goodness of fit of `observed` counts against probabilities `probs`.
/// Observations in bins of zero probability make the p-value zero.
pub fn chi_square_gof(observed: &[usize], probs: &[f64]) -> ChiSquare {
    let n: usize = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p.max(0.0) * n as f64).collect();
    if observed.iter().zip(&expected).any(|(&o, &e)| o > 0 && e <= 0.0) {
        return ChiSquare { statistic: f64::INFINITY, dof: 0, p_value: 0.0 };
    }
    let groups = pool(&expected);
    let mut stat = 0.0;
    for g in &groups {
        let o: f64 = g.iter().map(|&k| observed[k] as f64).sum();
        let e: f64 = g.iter().map(|&k| expected[k]).sum();
        stat += (o - e).powi(2) / e;
    }
    let dof = groups.len().saturating_sub(1);
    ChiSquare { statistic: stat, dof, p_value: chi2_sf(stat, dof) }
}

/// Pearson test of independence on a contingency table. Rows and columns
/// are pooled until expected cell counts are reasonable.
pub fn chi_square_independence(table: &[Vec<usize>]) -> ChiSquare {
    let n: f64 = table.iter().flatten().sum::<usize>() as f64;
    if n == 0.0 || table.is_empty() {
        return ChiSquare { statistic: 0.0, dof: 0, p_value: 1.0 };
    }
    let cols = table[0].len();
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let col_tot: Vec<f64> = (0..cols).map(|c| table.iter().map(|r| r[c]).sum::<usize>() as f64).collect();
    // Pool rows and columns by their marginal expectations.
    let row_groups = pool(&row_tot.iter().map(|&t| t / cols.max(1) as f64).collect::<Vec<_>>());
    let col_groups = pool(&col_tot.iter().map(|&t| t / table.len() as f64).collect::<Vec<_>>());
    let mut stat = 0.0;
    for rg in &row_groups {
        let rt: f64 = rg.iter().map(|&r| row_tot[r]).sum();
        for cg in &col_groups {
            let ct: f64 = cg.iter().map(|&c| col_tot[c]).sum();
            let o: f64 = rg.iter().flat_map(|&r| cg.iter().map(move |&c| table[r][c] as f64)).sum();
            let e = rt * ct / n;
            if e > 0.0 {
                stat += (o - e).powi(2) / e;
            }
        }
    }
    let dof = row_groups.len().saturating_sub(1) * col_groups.len().saturating_sub(1);
    ChiSquare { statistic: stat, dof, p_value: chi2_sf(stat, dof) }
}

/// Two-sample homogeneity test for two histograms over the same bins.
pub fn chi_square_two_sample(a: &[usize], b: &[usize]) -> ChiSquare {
    chi_square_independence(&[a.to_vec(), b.to_vec()])
}

/// Bonferroni-combined p-value of a family of tests.
pub fn bonferroni(p_values: &[f64]) -> f64 {
    let m = p_values.len() as f64;
    p_values.iter().fold(1.0f64, |a, &p| a.min(p * m)).min(1.0)
}

/// `P(n = k)` for `n ~ Poisson(mean)`, for `k < len`.
pub fn poisson_pmf(mean: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut p = (-mean).exp();
    for k in 0..len {
        out.push(p);
        p *= mean / (k + 1) as f64;
    }
    out
}

/// Standard error of a binomial frequency `p` from `n` samples.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Total-variation distance between two empirical histograms.
pub fn tv_distance(a: &[usize], b: &[usize]) -> f64 {
    let (na, nb) = (a.iter().sum::<usize>() as f64, b.iter().sum::<usize>() as f64);
    0.5 * a.iter().zip(b).map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs()).sum::<f64>()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Histogram of `values` over `0..bins`, with larger values in the last bin.
pub fn histogram(values: impl IntoIterator<Item = usize>, bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins];
    for v in values {
        h[v.min(bins - 1)] += 1;
    }
    h
}
