//! Cones of the form `{a ≥ 0 : a_j ≥ ‖a_Q‖₂ for every protected j}` where
//! `Q` is the unprotected coordinate set, and the projected-gradient solver
//! used for the Lorentz-type variational norms.

/// Euclidean projection onto the cone, in place. `protected[j]` marks the
/// coordinates that must dominate the norm of the others.
pub(crate) fn project(x: &mut [f64], protected: &[bool]) {
    let mut s2 = 0.0;
    let mut top: Vec<f64> = Vec::new();
    for (v, &is_p) in x.iter_mut().zip(protected) {
        if is_p {
            top.push(*v);
        } else {
            if *v < 0.0 {
                *v = 0.0;
            }
            s2 += *v * *v;
        }
    }
    let s = s2.sqrt();
    if top.is_empty() {
        return;
    }
    top.sort_by(f64::total_cmp);

    // r solves (r - s) + Σ_j (r - x_j)_+ = 0; the left side is increasing
    let at_zero = -s + top.iter().map(|&v| (-v).max(0.0)).sum::<f64>();
    let r = if at_zero >= 0.0 {
        0.0
    } else {
        let mut acc = s;
        let mut r = s;
        for k in 0..=top.len() {
            r = acc / (k + 1) as f64;
            if k == top.len() || r <= top[k] {
                break;
            }
            acc += top[k];
        }
        r
    };

    let scale = if s > 0.0 { r / s } else { 0.0 };
    for (v, &is_p) in x.iter_mut().zip(protected) {
        if is_p {
            *v = v.max(r);
        } else {
            *v *= scale;
        }
    }
}

/// Whether the projection of `w` onto the cone is the origin, i.e. `-w` lies
/// in the dual cone.
pub(crate) fn projects_to_origin(w: &[f64], protected: &[bool]) -> bool {
    let mut x = w.to_vec();
    project(&mut x, protected);
    x.iter().all(|&v| v == 0.0)
}

pub(crate) struct PgReport {
    pub x: Vec<f64>,
}

/// Projected gradient with Barzilai–Borwein curvature estimates and
/// backtracking on the descent lemma. `f` returns the objective (possibly
/// `+∞` off the domain) and writes the gradient.
pub(crate) fn minimize<F>(mut x: Vec<f64>, protected: &[bool], f: F, tol: f64, max_iter: usize) -> PgReport
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    project(&mut x, protected);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut trial = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut lip = 1.0;

    for _ in 0..max_iter {
        let mut accepted = None;
        for _ in 0..200 {
            for i in 0..n {
                trial[i] = x[i] - g[i] / lip;
            }
            project(&mut trial, protected);
            let ft = f(&trial, &mut gt);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let d = trial[i] - x[i];
                lin += g[i] * d;
                sq += d * d;
            }
            if sq == 0.0 {
                return PgReport { x };
            }
            if ft.is_finite() && ft <= fx + lin + 0.5 * lip * sq + 1e-15 * fx.abs() {
                accepted = Some((ft, sq));
                break;
            }
            lip *= 2.0;
        }
        let Some((ft, sq)) = accepted else {
            return PgReport { x };
        };
        let gap = lip * sq.sqrt();
        let mut sy = 0.0;
        for i in 0..n {
            sy += (trial[i] - x[i]) * (gt[i] - g[i]);
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut gt);
        fx = ft;
        if gap < tol {
            return PgReport { x };
        }
        lip = if sy > 0.0 { (sy / sq).max(1e-12) } else { lip * 0.5 };
    }
    PgReport { x }
}

const PROX_TOL: f64 = 1e-12;
const MAX_ITER: usize = 10_000;

/// Positive root of `4μa³ + a² = b²` (`b > 0`), by Newton from `a = b`;
/// the cubic is convex on `a > 0` so the iterates decrease monotonically.
fn shrunk(b: f64, mu: f64) -> f64 {
    if mu == 0.0 {
        return b;
    }
    // the root never exceeds either bound
    let mut a = b.min((b * b / (4.0 * mu)).cbrt());
    for _ in 0..100 {
        let f = 4.0 * mu * a * a * a + a * a - b * b;
        let step = f / (12.0 * mu * a * a + 2.0 * a);
        let next = a - step;
        if !(next > 0.0) {
            a *= 0.5;
            continue;
        }
        if step.abs() <= 1e-16 * a {
            return next;
        }
        a = next;
    }
    a
}

/// `min_a ½ Σ (β_j²/a_j + a_j)` over the cone, with zero unprotected
/// coordinates dropped (0/0 = 0).
///
/// With `r = ‖a_Q‖₂` fixed the protected entries are `max(|β_j|, r)` and the
/// unprotected ones solve `4μa³ + a² = β²` for the multiplier `μ` of
/// `‖a_Q‖² ≤ r²`. Stationarity in `r` reads `Σ_P ½(1 - β_j²/r²)₊ = 2μr`,
/// and the left minus right side is decreasing in `μ`, so a bracketed
/// Newton search over `μ` finds the minimiser.
pub(crate) fn variational_value(beta: &[f64], protected: &[bool]) -> f64 {
    let scale = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut top = Vec::new();
    let mut rest = Vec::new();
    for (&v, &is_p) in beta.iter().zip(protected) {
        let b = v.abs() / scale;
        if is_p {
            top.push(b);
        } else if b > 0.0 {
            rest.push(b);
        }
    }
    let free: f64 = rest.iter().sum();
    if top.is_empty() || rest.is_empty() {
        return scale * (free + top.iter().sum::<f64>());
    }

    // φ(μ) = Σ_P ½(1 - β_j²/r²)₊ - 2μr and φ'(μ), using a' = -2a²/(6μa + 1)
    let phi = |mu: f64| {
        let mut r2 = 0.0;
        let mut dr2 = 0.0;
        for &b in &rest {
            let a = shrunk(b, mu);
            r2 += a * a;
            dr2 += 2.0 * a * (-2.0 * a * a / (6.0 * mu * a + 1.0));
        }
        let r = r2.sqrt();
        let dr = 0.5 * dr2 / r;
        let mut pull = 0.0;
        let mut dpull = 0.0;
        for &b in &top {
            if b < r {
                pull += 0.5 * (1.0 - b * b / (r * r));
                dpull += b * b / (r * r * r) * dr;
            }
        }
        (pull - 2.0 * mu * r, dpull - 2.0 * r - 2.0 * mu * dr, r)
    };
    let value = |r: f64, mu: f64| {
        let q: f64 = rest
            .iter()
            .map(|&b| {
                let a = shrunk(b, mu);
                0.5 * (b * b / a + a)
            })
            .sum();
        let p: f64 = top.iter().map(|&b| if b >= r { b } else { 0.5 * (b * b / r + r) }).sum();
        q + p
    };

    // μ = 0 leaves a_Q = |β_Q|; the cone constraint is slack unless φ(0) > 0
    let (f0, _, r0) = phi(0.0);
    if f0 <= 0.0 {
        return scale * value(r0, 0.0);
    }
    let mut hi = 1.0;
    while phi(hi).0 > 0.0 {
        hi *= 4.0;
    }
    // φ is decreasing; Newton steps kept inside the bracket [lo, hi]
    let mut lo = 0.0;
    let mut mu = hi;
    for _ in 0..200 {
        let (f, df, _) = phi(mu);
        if f > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if f == 0.0 || hi - lo <= 1e-15 * hi {
            break;
        }
        let newton = mu - f / df;
        let next = if df < 0.0 && newton > lo && newton < hi {
            newton
        } else if lo == 0.0 {
            hi / 4.0
        } else {
            0.5 * (lo + hi)
        };
        if (next - mu).abs() <= 1e-15 * mu {
            mu = next;
            break;
        }
        mu = next;
    }
    scale * value(phi(mu).2, mu)
}

/// Proximal map of the variational norm: minimise the reduced objective
/// `Σ v_j²/(a_j + t) + a_j` over the cone, then shrink `β = v·a/(a + t)`.
pub(crate) fn variational_prox(v: &[f64], t: f64, protected: &[bool]) -> Vec<f64> {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return vec![0.0; v.len()];
    }
    let tau = t / scale;
    let u2: Vec<f64> = v.iter().map(|x| (x / scale).powi(2)).collect();
    let init: Vec<f64> = u2.iter().map(|&w| (w.sqrt() - tau).max(0.0)).collect();
    let f = |a: &[f64], grad: &mut [f64]| -> f64 {
        let mut total = 0.0;
        for i in 0..a.len() {
            let d = a[i] + tau;
            total += u2[i] / d + a[i];
            grad[i] = 1.0 - u2[i] / (d * d);
        }
        total
    };
    let a = minimize(init, protected, f, PROX_TOL, MAX_ITER).x;
    v.iter().zip(&a).map(|(&x, &ai)| x * ai / (ai + tau)).collect()
}
