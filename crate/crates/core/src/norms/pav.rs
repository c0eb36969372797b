//! Pool-adjacent-violators kernels for non-increasing constraints.

/// A maximal run `start..end` of pooled coordinates.
#[derive(Clone, Copy, Debug)]
struct Block {
    start: usize,
    end: usize,
    sum: f64,
    value: f64,
}

/// Wedge norm from squared entries: pool so that block means of `sq` are
/// non-increasing, then sum `sqrt(|B| · Σ_B sq)` over blocks.
pub(crate) fn wedge_from_squares(sq: &[f64]) -> f64 {
    let mut stack: Vec<Block> = Vec::with_capacity(sq.len());
    for (i, &s) in sq.iter().enumerate() {
        let mut cur = Block {
            start: i,
            end: i + 1,
            sum: s,
            value: s,
        };
        while let Some(prev) = stack.last() {
            if prev.value >= cur.value {
                break;
            }
            let prev = stack.pop().unwrap();
            cur.start = prev.start;
            cur.sum += prev.sum;
            cur.value = cur.sum / (cur.end - cur.start) as f64;
        }
        stack.push(cur);
    }
    stack
        .iter()
        .map(|b| ((b.end - b.start) as f64 * b.sum).sqrt())
        .sum()
}

/// Euclidean projection onto `{a : a_1 ≥ … ≥ a_k ≥ 0}` in place.
pub(crate) fn project_decreasing_nonneg(x: &mut [f64]) {
    decreasing_isotonic(x);
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Unweighted least-squares non-increasing fit of `x`, in place.
pub(crate) fn decreasing_isotonic(x: &mut [f64]) {
    let mut stack: Vec<Block> = Vec::with_capacity(x.len());
    for (i, &v) in x.iter().enumerate() {
        let mut cur = Block {
            start: i,
            end: i + 1,
            sum: v,
            value: v,
        };
        while let Some(prev) = stack.last() {
            if prev.value > cur.value {
                break;
            }
            let prev = stack.pop().unwrap();
            cur.start = prev.start;
            cur.sum += prev.sum;
            cur.value = cur.sum / (cur.end - cur.start) as f64;
        }
        stack.push(cur);
    }
    for b in &stack {
        x[b.start..b.end].iter_mut().for_each(|v| *v = b.value);
    }
}

/// Minimises `Σ_i m_i² / (a_i + τ_i) + a_i` over `a_1 ≥ … ≥ a_k ≥ 0`.
///
/// `m2` holds the squared magnitudes `m_i²` and `tau` the strictly positive
/// shifts. Each pooled block takes the exact minimiser of its summed
/// objective, which makes the pass exact for separable convex terms.
pub(crate) fn pav_shifted(m2: &[f64], tau: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m2.len(), tau.len());
    let mut stack: Vec<Block> = Vec::with_capacity(m2.len());
    for i in 0..m2.len() {
        let mut cur = Block {
            start: i,
            end: i + 1,
            sum: 0.0,
            value: block_minimiser(&m2[i..i + 1], &tau[i..i + 1]),
        };
        while let Some(prev) = stack.last() {
            if prev.value >= cur.value {
                break;
            }
            let prev = stack.pop().unwrap();
            cur.start = prev.start;
            cur.value = block_minimiser(&m2[cur.start..cur.end], &tau[cur.start..cur.end]);
        }
        stack.push(cur);
    }
    let mut a = vec![0.0; m2.len()];
    for b in &stack {
        a[b.start..b.end].iter_mut().for_each(|v| *v = b.value);
    }
    a
}

/// Root of `|B| = Σ m_i² / (a + τ_i)²` on `a ≥ 0`, or `0` if the derivative
/// is already nonnegative there.
fn block_minimiser(m2: &[f64], tau: &[f64]) -> f64 {
    let k = m2.len() as f64;
    let total: f64 = m2.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let deriv = |a: f64| -> (f64, f64) {
        let mut d = k;
        let mut dd = 0.0;
        for (&m, &t) in m2.iter().zip(tau) {
            let s = a + t;
            d -= m / (s * s);
            dd += 2.0 * m / (s * s * s);
        }
        (d, dd)
    };
    if deriv(0.0).0 >= 0.0 {
        return 0.0;
    }
    let tau_min = tau.iter().cloned().fold(f64::INFINITY, f64::min);
    let tau_max = tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rms = (total / k).sqrt();
    if tau_max - tau_min <= 1e-15 * tau_max {
        return (rms - tau_max).max(0.0);
    }
    // The derivative is concave and increasing, so Newton from a point left
    // of the root increases monotonically towards it.
    let mut a = (rms - tau_max).max(0.0);
    let upper = (rms - tau_min).max(0.0);
    for _ in 0..500 {
        let (d, dd) = deriv(a);
        if d >= 0.0 {
            break;
        }
        let next = (a - d / dd).min(upper);
        if next - a <= 1e-15 * (1.0 + a) {
            a = next;
            break;
        }
        a = next;
    }
    a
}
