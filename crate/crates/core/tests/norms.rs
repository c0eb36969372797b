mod common;

use common::*;
use proptest::prelude::*;
use structinfer::{IndexSet, NormKind, NormSpec};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn evaluate_examples() {
    assert_eq!(NormSpec::l1(3).unwrap().evaluate(&[1.0, -2.0, 3.0]).unwrap(), 6.0);
    let w = NormSpec::wedge(2).unwrap().evaluate(&[0.0, 1.0]).unwrap();
    assert!(close(w, wedge_brute(&[0.0, 1.0]), 1e-9));
    assert!(close(w, 2f64.sqrt(), 1e-12));
    let s = NormSpec::slope(vec![1.0, 0.5]).unwrap();
    assert!(close(s.evaluate(&[3.0, 1.0]).unwrap(), slope_value(&[1.0, 0.5], &[3.0, 1.0]), 1e-14));
    let g = NormSpec::group_lasso(vec![vec![0, 1], vec![2]], 3).unwrap();
    assert!(close(g.evaluate(&[3.0, 4.0, 5.0]).unwrap(), 10.0, 1e-14));
}

#[test]
fn prox_examples() {
    let x = NormSpec::l1(2).unwrap().prox(&[2.0, -0.5], 1.0).unwrap();
    assert_eq!(x, vec![1.0, 0.0]);
    let g = NormSpec::group_lasso(vec![vec![0, 1]], 2).unwrap();
    let x = g.prox(&[3.0, 4.0], 5.0).unwrap();
    assert!(x.iter().all(|v| v.abs() < 1e-12));
    let s = NormSpec::slope(vec![1.0, 1.0]).unwrap();
    let x = s.prox(&[3.0, 1.0], 1.0).unwrap();
    assert!(close(x[0], 2.0, 1e-12) && x[1].abs() < 1e-12);
}

#[test]
fn dual_examples() {
    assert_eq!(NormSpec::l1(2).unwrap().dual(&[1.0, -3.0]).unwrap().value, 3.0);
    let s = NormSpec::slope(vec![1.0, 0.5]).unwrap();
    assert!(close(s.dual(&[1.0, 1.0]).unwrap().value, 4.0 / 3.0, 1e-12));
    let w = NormSpec::wedge(3).unwrap().dual(&[1.0, 0.0, 0.0]).unwrap();
    assert!(w.approximate);
    assert!(close(w.value, 1.0, 1e-9));
}

#[test]
fn residual_and_upsilon_examples() {
    let s = NormSpec::slope(vec![1.0, 0.5, 0.25]).unwrap();
    let set = IndexSet::single(0, 3).unwrap();
    assert!(close(s.residual_norm(&set, &[2.0, 1.0]).unwrap(), 1.25, 1e-14));

    let l1 = NormSpec::l1(3).unwrap();
    assert!(close(l1.residual_norm(&set, &[1.0, 1.0]).unwrap(), 2.0, 1e-14));
    assert!(close(l1.upsilon(&set, &[1.0, 2.0, 3.0]).unwrap(), 6.0, 1e-14));

    let s2 = NormSpec::slope(vec![1.0, 0.5]).unwrap();
    let one = IndexSet::single(0, 2).unwrap();
    assert!(close(s2.upsilon(&one, &[3.0, 1.0]).unwrap(), 3.5, 1e-14));
    assert!(close(s2.upsilon_dual(&one, &[1.0, 1.0]).unwrap().value, 2.0, 1e-12));

    let w = NormSpec::wedge(3).unwrap();
    let head = IndexSet::single(0, 3).unwrap();
    assert!(close(w.residual_norm(&head, &[0.0, 1.0]).unwrap(), 2f64.sqrt(), 1e-12));
    assert!(close(w.upsilon(&head, &[5.0, 0.0, 1.0]).unwrap(), 5.0 + 2f64.sqrt(), 1e-12));

    let l = NormSpec::l1(2).unwrap();
    assert_eq!(l.upsilon_dual(&IndexSet::single(0, 2).unwrap(), &[1.0, -3.0]).unwrap().value, 3.0);
    assert_eq!(w.upsilon_dual(&head, &[0.0; 3]).unwrap().value, 0.0);
}

#[test]
fn gauges_and_constants() {
    assert_eq!(NormSpec::wedge(4).unwrap().gauge().kind(), NormKind::L1);
    let s = NormSpec::slope(vec![1.0, 0.6, 0.2]).unwrap().gauge();
    assert!(close(s.evaluate(&[1.0, -2.0, 3.0]).unwrap(), 0.2 * 6.0, 1e-14));
    let gw = NormSpec::group_wedge(vec![vec![0, 1], vec![2]], 3).unwrap().gauge();
    assert_eq!(gw.kind(), NormKind::GroupLasso);
    assert_eq!(gw.groups(), &[vec![0, 1], vec![2]]);

    let w = NormSpec::wedge(8).unwrap();
    assert!(close(w.c_constant(&IndexSet::prefix(5, 8).unwrap()).unwrap(), 6f64.sqrt(), 1e-14));
    let l1 = NormSpec::l1(4).unwrap();
    assert_eq!(l1.c_constant(&IndexSet::new(vec![1, 3], 4).unwrap()).unwrap(), 1.0);
    let lor = NormSpec::lorentz(4).unwrap();
    assert_eq!(lor.c_constant(&IndexSet::single(3, 4).unwrap()).unwrap(), 1.5);
}

#[test]
fn allowed_sets_follow_structure() {
    let w = NormSpec::wedge(4).unwrap();
    assert!(w.is_allowed(&IndexSet::new(vec![0, 1, 2], 4).unwrap()));
    assert!(!w.is_allowed(&IndexSet::new(vec![1, 2], 4).unwrap()));
    let lor = NormSpec::lorentz(4).unwrap();
    assert!(lor.is_allowed(&IndexSet::single(3, 4).unwrap()));
    assert!(!lor.is_allowed(&IndexSet::single(0, 4).unwrap()));
    let l1 = NormSpec::l1(4).unwrap();
    assert_eq!(allowed_sets(&l1).len(), 16);
    let g = NormSpec::group_lasso(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
    assert!(g.is_allowed(&IndexSet::new(vec![0, 1], 4).unwrap()));
    assert!(!g.is_allowed(&IndexSet::new(vec![0, 2], 4).unwrap()));
}

#[test]
fn slope_weights_above_one_rejected() {
    assert!(NormSpec::slope(vec![2.0, 1.0]).is_err());
    assert!(NormSpec::slope(vec![0.5, 1.0]).is_err());
    assert!(NormSpec::l1(3).unwrap().evaluate(&[1.0]).is_err());
}

#[test]
fn zero_inputs() {
    let mut d = Draws::new(11);
    for kind in ALL_KINDS {
        let norm = random_norm(kind, 5, &mut d);
        assert_eq!(norm.evaluate(&[0.0; 5]).unwrap(), 0.0);
        assert_eq!(norm.prox(&[0.0; 5], 0.7).unwrap(), vec![0.0; 5]);
    }
}

#[test]
fn lorentz_matches_brute_force() {
    let mut d = Draws::new(12);
    for _ in 0..100 {
        let p = 2 + d.index(4);
        let mut b = d.vector(p, 2.0);
        if d.coin() {
            b[d.index(p)] = 0.0;
        }
        let lib = NormSpec::lorentz(p).unwrap().evaluate(&b).unwrap();
        assert!(close(lib, lorentz_brute(&b), 1e-7), "{b:?}");
    }
}

#[test]
fn flip_invariance_of_gauges() {
    let mut d = Draws::new(13);
    for _ in 0..300 {
        let kind = ALL_KINDS[d.index(7)];
        let p = 2 + d.index(7);
        let g = random_norm(kind, p, &mut d).gauge();
        let b = d.vector(p, 1.0);
        let j = IndexSet::new((0..p).filter(|_| d.coin()).collect(), p).unwrap();
        let flipped: Vec<f64> = (0..p).map(|i| if j.contains(i) { b[i] } else { -b[i] }).collect();
        let (a, c) = (g.evaluate(&b).unwrap(), g.evaluate(&flipped).unwrap());
        assert!((a - c).abs() <= 1e-12 * (1.0 + a));
    }
}

#[test]
fn dual_inequality_reverses_order() {
    // l1 ≥ slope with weights ≤ 1, so the duals order the other way
    let mut d = Draws::new(14);
    for _ in 0..200 {
        let p = 2 + d.index(6);
        let l = decreasing_weights(p, &mut d);
        let slope = NormSpec::slope(l.clone()).unwrap();
        let l1 = NormSpec::l1(p).unwrap();
        let z = d.vector(p, 1.0);
        assert!(l1.dual(&z).unwrap().value <= slope.dual(&z).unwrap().value + 1e-8);
        assert!((slope.dual(&z).unwrap().value - slope_dual(&l, &z)).abs() < 1e-10);
    }
}

#[test]
fn generic_dual_agrees_with_closed_forms() {
    let mut d = Draws::new(15);
    for _ in 0..100 {
        let p = 2 + d.index(6);
        let groups = random_groups(p, &mut d);
        let g = NormSpec::group_lasso(groups.clone(), p).unwrap();
        let z = d.vector(p, 1.0);
        let w = vec![1.0; groups.len()];
        assert!((g.dual(&z).unwrap().value - group_dual(&groups, &w, &z)).abs() < 1e-12);
        assert!((NormSpec::l1(p).unwrap().dual(&z).unwrap().value - linf(&z)).abs() < 1e-15);
    }
}

#[test]
fn json_round_trip() {
    let n = NormSpec::group_wedge(vec![vec![0], vec![1, 2]], 3).unwrap();
    let text = serde_json::to_string(&n).unwrap();
    let back: NormSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(n, back);
    let w: NormSpec = serde_json::from_str(r#"{"kind":"wedge","p":4}"#).unwrap();
    assert_eq!(w.dim(), 4);
}

fn any_norm() -> impl Strategy<Value = (NormSpec, Vec<f64>, Vec<f64>, f64)> {
    (0usize..7, 2usize..7, any::<u64>()).prop_flat_map(|(k, p, seed)| {
        let mut d = Draws::new(seed);
        let norm = random_norm(ALL_KINDS[k], p, &mut d);
        (
            Just(norm),
            prop::collection::vec(-5.0f64..5.0, p),
            prop::collection::vec(-5.0f64..5.0, p),
            -4.0f64..4.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn norm_axioms((norm, a, b, c) in any_norm()) {
        let na = norm.evaluate(&a).unwrap();
        let nb = norm.evaluate(&b).unwrap();
        let scaled: Vec<f64> = a.iter().map(|v| c * v).collect();
        let ns = norm.evaluate(&scaled).unwrap();
        prop_assert!((ns - c.abs() * na).abs() <= 1e-10 * (1.0 + ns));
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        prop_assert!(norm.evaluate(&sum).unwrap() <= na + nb + 1e-9 * (1.0 + na + nb));
        prop_assert!(na >= 0.0);
    }

    #[test]
    fn dual_pairing_bound((norm, a, z, _c) in any_norm()) {
        // zᵀβ ≤ Ω*(z)·Ω(β)
        let ip: f64 = a.iter().zip(&z).map(|(x, y)| x * y).sum();
        let bound = norm.dual(&z).unwrap().value * norm.evaluate(&a).unwrap();
        prop_assert!(ip <= bound + 1e-7 * (1.0 + bound.abs()));
    }

    #[test]
    fn prox_is_nonexpansive((norm, a, b, c) in any_norm()) {
        let t = c.abs() + 0.05;
        let pa = norm.prox(&a, t).unwrap();
        let pb = norm.prox(&b, t).unwrap();
        let dp: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let dv: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dp <= dv + 1e-6);
    }
}
