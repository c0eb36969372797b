#![allow(dead_code)]

use structinfer::sim::CounterRng;
use structinfer::{IndexSet, NormKind, NormSpec};

pub struct Draws(CounterRng);

impl Draws {
    pub fn new(seed: u64) -> Self {
        Draws(CounterRng::new(seed, 7))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.uniform()
    }

    pub fn gaussian(&mut self) -> f64 {
        self.0.gaussian()
    }

    pub fn index(&mut self, n: usize) -> usize {
        ((self.0.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn vector(&mut self, p: usize, scale: f64) -> Vec<f64> {
        (0..p).map(|_| scale * self.gaussian()).collect()
    }

    pub fn coin(&mut self) -> bool {
        self.0.uniform() < 0.5
    }
}

/// Golden-section minimum of a unimodal function on `[lo, hi]`.
pub fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Cyclic coordinate descent with exact line searches on a box.
fn coordinate_descent<F: Fn(&[f64]) -> f64>(f: F, mut x: Vec<f64>, hi: f64) -> f64 {
    let mut best = f(&x);
    for _ in 0..20_000 {
        let before = best;
        for k in 0..x.len() {
            let y = std::cell::RefCell::new(x.clone());
            let t = golden(
                |v| {
                    y.borrow_mut()[k] = v;
                    f(&y.borrow())
                },
                0.0,
                hi,
                1e-13 * hi,
            );
            let mut cand = x.clone();
            cand[k] = t;
            let v = f(&cand);
            if v < best {
                best = v;
                x = cand;
            }
        }
        if before - best <= 1e-15 * best {
            break;
        }
    }
    best
}

fn variational_term(b: f64, a: f64) -> f64 {
    if b == 0.0 {
        a
    } else {
        b * b / a + a
    }
}

/// `min ½Σ(β²/a + a)` over `a₁ ≥ … ≥ a_p ≥ 0`, written with nonnegative
/// increments `a_k = Σ_{i ≥ k} d_i` (convex in `d`).
pub fn wedge_brute(beta: &[f64]) -> f64 {
    let hi = beta.iter().fold(0.0f64, |m, b| m.max(b.abs())).max(1e-300);
    let p = beta.len();
    let f = |d: &[f64]| {
        let mut a = 0.0;
        let mut s = 0.0;
        for k in (0..p).rev() {
            a += d[k];
            s += variational_term(beta[k], a);
        }
        0.5 * s
    };
    let mut d = vec![0.0; p];
    d[p - 1] = hi;
    coordinate_descent(f, d, hi)
}

/// `min ½Σ(β²/a + a)` over `{a ≥ 0 : a_last ≥ ‖a_rest‖₂}`. The last
/// coordinate is eliminated in closed form, `a_last = max(|β_last|, ‖a_rest‖)`,
/// leaving a convex problem in the remaining coordinates.
pub fn lorentz_brute(beta: &[f64]) -> f64 {
    let p = beta.len();
    let bp = beta[p - 1].abs();
    let hi = 2.0 * beta.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-300);
    let f = |a: &[f64]| {
        let s = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let last = bp.max(s);
        let mut total = if last == 0.0 { 0.0 } else { variational_term(bp, last) };
        for k in 0..p - 1 {
            total += variational_term(beta[k], a[k]);
        }
        0.5 * total
    };
    let a0: Vec<f64> = beta[..p - 1].iter().map(|b| b.abs()).collect();
    coordinate_descent(f, a0, hi)
}

pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sorted_abs(v: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

pub fn slope_value(l: &[f64], v: &[f64]) -> f64 {
    sorted_abs(v).iter().zip(l).map(|(a, w)| a * w).sum()
}

pub fn slope_dual(l: &[f64], z: &[f64]) -> f64 {
    let a = sorted_abs(z);
    let (mut num, mut den, mut best) = (0.0, 0.0, 0.0f64);
    for (x, w) in a.iter().zip(l) {
        num += x;
        den += w;
        best = best.max(num / den);
    }
    best
}

pub fn group_dual(groups: &[Vec<usize>], weights: &[f64], z: &[f64]) -> f64 {
    groups
        .iter()
        .zip(weights)
        .map(|(g, w)| g.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt() / w)
        .fold(0.0, f64::max)
}

pub fn decreasing_weights(p: usize, d: &mut Draws) -> Vec<f64> {
    let mut w: Vec<f64> = (0..p).map(|_| d.uniform(0.05, 1.0)).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    w
}

/// Random contiguous partition of `0..p`.
pub fn random_groups(p: usize, d: &mut Draws) -> Vec<Vec<usize>> {
    let mut groups = vec![vec![0]];
    for i in 1..p {
        if d.coin() {
            groups.push(vec![i]);
        } else {
            groups.last_mut().unwrap().push(i);
        }
    }
    groups
}

pub const ALL_KINDS: [NormKind; 7] = [
    NormKind::L1,
    NormKind::Slope,
    NormKind::GroupLasso,
    NormKind::Wedge,
    NormKind::GroupWedge,
    NormKind::Lorentz,
    NormKind::GeneralizedLorentz,
];

pub fn random_norm(kind: NormKind, p: usize, d: &mut Draws) -> NormSpec {
    match kind {
        NormKind::L1 => NormSpec::l1(p).unwrap(),
        NormKind::Slope => NormSpec::slope(decreasing_weights(p, d)).unwrap(),
        NormKind::GroupLasso => NormSpec::group_lasso(random_groups(p, d), p).unwrap(),
        NormKind::Wedge => NormSpec::wedge(p).unwrap(),
        NormKind::GroupWedge => NormSpec::group_wedge(random_groups(p, d), p).unwrap(),
        NormKind::Lorentz => NormSpec::lorentz(p).unwrap(),
        NormKind::GeneralizedLorentz => {
            let k = 1 + d.index(p.max(2) - 1);
            let mut prot: Vec<usize> = (0..p).collect();
            for i in (1..p).rev() {
                prot.swap(i, d.index(i + 1));
            }
            prot.truncate(k.min(p - 1).max(1));
            NormSpec::generalized_lorentz(p, prot).unwrap()
        }
    }
}

/// All allowed subsets of `0..p` for `norm` (p small).
pub fn allowed_sets(norm: &NormSpec) -> Vec<IndexSet> {
    let p = norm.dim();
    (0u32..(1 << p))
        .map(|mask| IndexSet::new((0..p).filter(|&i| mask >> i & 1 == 1).collect(), p).unwrap())
        .filter(|s| norm.is_allowed(s))
        .collect()
}

pub fn prox_objective(norm: &NormSpec, v: &[f64], t: f64, x: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * d2 + t * norm.evaluate(x).unwrap()
}
