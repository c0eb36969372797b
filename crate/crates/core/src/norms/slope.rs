//! Sorted-ℓ1 kernels.

use super::pav::decreasing_isotonic;

fn sorted_abs_desc(x: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|u, v| v.total_cmp(u));
    a
}

pub(crate) fn value(beta: &[f64], l: &[f64]) -> f64 {
    sorted_abs_desc(beta).iter().zip(l).map(|(b, w)| b * w).sum()
}

/// `max_k Σ_{i≤k} |z|_(i) / Σ_{i≤k} l_i`.
pub(crate) fn dual(z: &[f64], l: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut best = 0.0f64;
    for (a, w) in sorted_abs_desc(z).iter().zip(l) {
        num += a;
        den += w;
        best = best.max(num / den);
    }
    best
}

/// Prox of `t · Σ l_i |β|_(i)`: sort, subtract, isotonic fit, clip, restore.
pub(crate) fn prox(v: &[f64], t: f64, l: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));
    let mut w: Vec<f64> = order.iter().zip(l).map(|(&i, &li)| v[i].abs() - t * li).collect();
    decreasing_isotonic(&mut w);
    let mut out = vec![0.0; v.len()];
    for (&i, &wi) in order.iter().zip(&w) {
        out[i] = wi.max(0.0).copysign(v[i]);
    }
    out
}
