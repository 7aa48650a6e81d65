//! Chi-square machinery for the distribution tests.

use alloc::vec::Vec;

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if !(a > 0.0) || x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn log_prefactor(a: f64, x: f64) -> f64 {
    a * libm::log(x) - x - libm::lgamma(a)
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * libm::exp(log_prefactor(a, x))
}

// modified Lentz
fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * libm::exp(log_prefactor(a, x))
}

/// Survival function of the chi-square distribution.
pub fn chi2_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Pearson statistic over `(observed, expected)` cells.
pub fn pearson(cells: &[(f64, f64)]) -> f64 {
    cells.iter().filter(|(_, e)| *e > 0.0).map(|&(o, e)| (o - e) * (o - e) / e).sum()
}

/// Pools cells (smallest expectation first) until each has expected count ≥ `min`.
/// Returns `(observed, expected)` pairs.
pub fn merge_small_cells(cells: &[(f64, f64)], min: f64) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = cells.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    let mut pending = false;
    for (o, e) in sorted {
        if e >= min && !pending {
            out.push((o, e));
            continue;
        }
        acc.0 += o;
        acc.1 += e;
        pending = true;
        if acc.1 >= min {
            out.push(acc);
            acc = (0.0, 0.0);
            pending = false;
        }
    }
    if pending {
        match out.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => out.push(acc),
        }
    }
    out
}

/// Result of a chi-square test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub stat: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson test of independence on an `r × c` contingency table (row-major).
/// Rows and columns whose expected cells would fall below 5 are pooled first.
pub fn independence(table: &[u64], rows: usize, cols: usize) -> ChiSquare {
    assert_eq!(table.len(), rows * cols);
    let total: u64 = table.iter().sum();
    if total == 0 {
        return ChiSquare { stat: 0.0, dof: 0, p_value: 1.0 };
    }
    let row_sum: Vec<u64> = (0..rows).map(|i| table[i * cols..(i + 1) * cols].iter().sum()).collect();
    let col_sum: Vec<u64> = (0..cols).map(|j| (0..rows).map(|i| table[i * cols + j]).sum()).collect();
    let row_map = pool_margins(&row_sum, &col_sum, total);
    let col_map = pool_margins(&col_sum, &row_sum, total);
    let r2 = row_map.iter().max().map_or(0, |m| m + 1);
    let c2 = col_map.iter().max().map_or(0, |m| m + 1);
    let mut pooled = alloc::vec![0u64; r2 * c2];
    for i in 0..rows {
        for j in 0..cols {
            pooled[row_map[i] * c2 + col_map[j]] += table[i * cols + j];
        }
    }
    let rs: Vec<f64> = (0..r2).map(|i| pooled[i * c2..(i + 1) * c2].iter().sum::<u64>() as f64).collect();
    let cs: Vec<f64> = (0..c2).map(|j| (0..r2).map(|i| pooled[i * c2 + j]).sum::<u64>() as f64).collect();
    let n = total as f64;
    let mut stat = 0.0;
    for i in 0..r2 {
        for j in 0..c2 {
            let e = rs[i] * cs[j] / n;
            if e > 0.0 {
                let o = pooled[i * c2 + j] as f64;
                stat += (o - e) * (o - e) / e;
            }
        }
    }
    let dof = r2.saturating_sub(1) * c2.saturating_sub(1);
    ChiSquare { stat, dof, p_value: chi2_sf(stat, dof) }
}

/// Maps each category to a pooled index so that the smallest pooled margin
/// times the smallest opposite margin gives expected cells of at least 5.
fn pool_margins(margin: &[u64], other: &[u64], total: u64) -> Vec<usize> {
    let min_other = other.iter().copied().filter(|&c| c > 0).min().unwrap_or(0) as f64;
    let need = if min_other > 0.0 { 5.0 * total as f64 / min_other } else { 0.0 };
    let mut order: Vec<usize> = (0..margin.len()).collect();
    order.sort_by_key(|&i| margin[i]);
    let mut map = alloc::vec![0usize; margin.len()];
    let mut next = 0usize;
    let mut acc = 0u64;
    let mut open: Vec<usize> = Vec::new();
    for i in order {
        if (margin[i] as f64) >= need && open.is_empty() {
            map[i] = next;
            next += 1;
            continue;
        }
        open.push(i);
        acc += margin[i];
        if acc as f64 >= need {
            for &k in &open {
                map[k] = next;
            }
            next += 1;
            open.clear();
            acc = 0;
        }
    }
    if !open.is_empty() {
        let target = next.saturating_sub(1);
        for &k in &open {
            map[k] = target;
        }
    }
    map
}
