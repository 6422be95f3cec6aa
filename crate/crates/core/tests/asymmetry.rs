mod common;

use std::collections::BTreeMap;

use common::{random_mid, rng, Shape};
use mideu::asymmetry::{
    apply_asymmetries, monomial_compatible, predicted_asymmetric_counts, symbolic_eu_asymmetric, Asymmetry, Relation,
};
use mideu::expr::parse_polynomial;
use mideu::fixtures::ex1;
use mideu::policy::enumerate_policies;
use mideu::{symbolic_eu, Monomial, Policy};
use rand::Rng;

fn asym_trace() -> (mideu::Model, mideu::EvaluationTrace) {
    let m = ex1();
    let t = symbolic_eu_asymmetric(&m.mid, m.policy("asym").unwrap(), &m.asymmetries).unwrap();
    (m, t)
}

#[test]
fn stage_six_keeps_one_monomial_and_one_empty_row() {
    let (m, t) = asym_trace();
    let u6 = t.stage(6).unwrap();
    assert_eq!(u6.entry_at(&m.mid, &[1, 1]).to_string(), "k3*psi311*p6111");
    assert!(u6.entry_at(&m.mid, &[1, 0]).is_zero());
}

#[test]
fn stage_five_rows_with_y4_set_have_three_monomials() {
    let (m, t) = asym_trace();
    let u5 = t.stage(5).unwrap();
    let names = m.mid.name_table();
    for y3 in 0..2 {
        let want = parse_polynomial(
            &format!("k3*psi311*p6111*p511{y3} + k2*psi21*p511{y3} + h*k2*k3*psi311*psi21*p6111*p511{y3}"),
            &|s| names.get(s).cloned(),
        )
        .unwrap();
        assert_eq!(u5.entry_at(&m.mid, &[y3, 1]), &want);
    }
    assert_eq!(u5.entry_at(&m.mid, &[1, 0]).len(), 5);
    assert_eq!(u5.entry_at(&m.mid, &[0, 0]).len(), 10);
}

#[test]
fn stage_three_entry_under_the_stated_policy() {
    let (m, t) = asym_trace();
    let entry = t.stage(3).unwrap().entry_at(&m.mid, &[1, 1]);
    assert_eq!(entry.len(), 11);
    let symmetric = symbolic_eu(&m.mid, m.policy("asym").unwrap()).unwrap();
    assert_eq!(symmetric.stage(3).unwrap().entry_at(&m.mid, &[1, 1]).len(), 42);
}

#[test]
fn monomial_compatibility_checks_both_indices() {
    let m = ex1();
    let names = m.mid.name_table();
    let mono = |s: &str| Monomial::from_factors(s.split('*').map(|n| (names[n].clone(), 1)));
    let rule = Asymmetry::new(vec![(4, 1)], 6, Relation::MustEqual, 1);
    assert!(!monomial_compatible(&m.mid, &mono("k3*psi301*p6011"), &rule));
    assert!(monomial_compatible(&m.mid, &mono("k3*psi311*p6111"), &rule));
    assert!(monomial_compatible(&m.mid, &mono("k2*psi21*p5101"), &rule));
}

#[test]
fn no_asymmetries_is_the_identity() {
    let m = ex1();
    let p = m.policy("p1").unwrap();
    let plain = symbolic_eu(&m.mid, p).unwrap();
    assert_eq!(symbolic_eu_asymmetric(&m.mid, p, &[]).unwrap().vectors, plain.vectors);
    assert_eq!(apply_asymmetries(&m.mid, &plain, &[]).vectors, plain.vectors);
}

fn random_simple(r: &mut rand_chacha::ChaCha8Rng, mid: &mideu::Mid) -> Asymmetry {
    let n = mid.n();
    let i = r.gen_range(1..=n);
    let mut j = r.gen_range(1..=n);
    while j == i {
        j = r.gen_range(1..=n);
    }
    let rel = if r.gen_bool(0.5) { Relation::MustEqual } else { Relation::MustNotEqual };
    Asymmetry::new(vec![(i, r.gen_range(0..mid.card(i)))], j, rel, r.gen_range(0..mid.card(j)))
}

#[test]
fn pruning_during_evaluation_equals_pruning_afterwards() {
    let mut r = rng(0xa5);
    for case in 0..100 {
        let mid = random_mid(&mut r, Shape::binary(6, 3));
        let asys: Vec<Asymmetry> = (0..r.gen_range(1..=2)).map(|_| random_simple(&mut r, &mid)).collect();
        let policies: Vec<Policy> = enumerate_policies(&mid, u64::MAX).unwrap().take(4).collect();
        for policy in &policies {
            let during = symbolic_eu_asymmetric(&mid, policy, &asys).unwrap();
            let after = apply_asymmetries(&mid, &symbolic_eu(&mid, policy).unwrap(), &asys);
            assert_eq!(during.vectors, after.vectors, "case {case}: {asys:?}");
        }
    }
}

/// Empty rows, affected rows and the per-degree histogram of affected rows.
fn observed(
    sym: &mideu::EUVector,
    asy: &mideu::EUVector,
) -> (usize, usize, Option<BTreeMap<u32, usize>>) {
    let (mut empty, mut affected, mut hist) = (0, 0, None);
    for (a, s) in asy.entries.iter().zip(&sym.entries) {
        if a.is_zero() && !s.is_zero() {
            empty += 1;
        } else if a != s {
            affected += 1;
            let h: BTreeMap<u32, usize> = a.structure_summary().entries.iter().map(|(d, c)| (*d, c.count)).collect();
            assert!(hist.as_ref().map_or(true, |x| x == &h), "affected rows differ among themselves");
            hist = Some(h);
        }
    }
    (empty, affected, hist)
}

#[test]
fn chance_only_counts_match_the_asymmetry_theorem() {
    let mut r = rng(0x7e2);
    let shape = Shape { max_n: 5, max_m: 3, decision_rate: 0.0, extensive: true, max_card: 2 };
    let (mut checked, mut emptied_seen, mut affected_seen) = (0, 0, 0);
    while checked < 60 {
        let mid = random_mid(&mut r, shape);
        let i = r.gen_range(1..mid.n());
        let j = r.gen_range(i + 1..=mid.n());
        let asy = Asymmetry::new(vec![(i, r.gen_range(0..2))], j, Relation::MustNotEqual, r.gen_range(0..2));
        let Ok(pred) = predicted_asymmetric_counts(&mid, &asy) else { continue };
        let policy = Policy::default();
        let sym = symbolic_eu(&mid, &policy).unwrap();
        let pruned = apply_asymmetries(&mid, &sym, std::slice::from_ref(&asy));
        for stage in &pred {
            let t = stage.stage;
            let (empty, affected, hist) = observed(sym.stage(t).unwrap(), pruned.stage(t).unwrap());
            assert!(stage.exact);
            emptied_seen += empty;
            affected_seen += affected;
            assert_eq!(empty, stage.emptied_rows, "stage {t} empty rows, {asy}\n{mid:?}");
            let mut want: BTreeMap<u32, usize> = BTreeMap::new();
            for term in &stage.terms {
                if term.lower > 0 {
                    *want.entry(term.degree).or_default() += term.lower as usize;
                }
            }
            let changes = stage.terms.iter().any(|t| t.lower != t.symmetric);
            if changes && stage.affected_rows > 0 {
                assert_eq!(affected, stage.affected_rows, "stage {t} affected rows, {asy}\n{mid:?}");
                assert_eq!(hist.unwrap_or_default(), want, "stage {t} histogram, {asy}\n{mid:?}");
            } else {
                assert_eq!(affected, 0, "stage {t}: unexpected changes, {asy}\n{mid:?}");
            }
        }
        checked += 1;
    }
    assert!(emptied_seen > 0 && affected_seen > 0, "{emptied_seen} {affected_seen}");
}

#[test]
fn decision_asymmetries_get_interval_bounds() {
    let m = ex1();
    let asy = Asymmetry::new(vec![(3, 1)], 4, Relation::MustNotEqual, 1);
    let counts = predicted_asymmetric_counts(&m.mid, &asy).unwrap();
    assert!(counts.iter().any(|s| !s.exact));
    for s in &counts {
        for t in &s.terms {
            assert!(t.lower <= t.upper && t.upper <= t.symmetric);
        }
    }
}
