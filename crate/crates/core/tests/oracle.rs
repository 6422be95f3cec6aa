mod common;

use common::{random_mid, random_spec, rng, Shape};
use mideu::fixtures::ex1;
use mideu::oracle::{joint_eu_numeric, optimal_policy_dp, optimal_policy_enumerate, NumericSpec};
use mideu::policy::{enumerate_policies, policy_count};
use mideu::rational::ratio;
use mideu::{symbolic_eu, Mid};
use num_bigint::BigUint;

const POLICY_LIMIT: u64 = 1024;

fn draw(r: &mut rand_chacha::ChaCha8Rng) -> Mid {
    loop {
        let mid = random_mid(r, Shape::binary(6, 3));
        if policy_count(&mid) <= BigUint::from(POLICY_LIMIT) {
            return mid;
        }
    }
}

#[test]
fn substituted_symbolic_eu_equals_brute_force_for_every_policy() {
    let mut r = rng(0x0_ac1e);
    let mut checked = 0usize;
    for case in 0..100 {
        let mid = draw(&mut r);
        let specs: Vec<NumericSpec> = (0..3).map(|_| random_spec(&mut r, &mid)).collect();
        for policy in enumerate_policies(&mid, POLICY_LIMIT).unwrap() {
            let trace = symbolic_eu(&mid, &policy).unwrap();
            let eu = trace.expected_utility().unwrap();
            for (s, spec) in specs.iter().enumerate() {
                let symbolic = eu.eval_map(&spec.values).unwrap();
                let brute = joint_eu_numeric(&mid, spec, &policy).unwrap();
                assert_eq!(symbolic, brute, "case {case}, spec {s}, policy {}", policy.describe(&mid));
                checked += 1;
            }
        }
    }
    assert!(checked >= 300);
}

#[test]
fn backward_induction_agrees_with_enumeration() {
    let mut r = rng(0xd9);
    for case in 0..40 {
        let mid = draw(&mut r);
        let spec = random_spec(&mut r, &mid);
        let (_, dp) = optimal_policy_dp(&mid, &spec).unwrap();
        let (_, en) = optimal_policy_enumerate(&mid, &spec, POLICY_LIMIT).unwrap();
        assert_eq!(dp, en, "case {case}");
    }
}

#[test]
fn ex1_has_eight_policies() {
    assert_eq!(policy_count(&ex1().mid), BigUint::from(8u32));
}

#[test]
fn missing_values_are_reported() {
    let m = ex1();
    let spec = NumericSpec::default();
    let err = joint_eu_numeric(&m.mid, &spec, m.policy("p1").unwrap()).unwrap_err();
    assert!(matches!(err, mideu::Error::Incomplete(ref v) if !v.is_empty()));
}

#[test]
fn constant_utilities_give_constant_eu() {
    let mut r = rng(5);
    let mid = draw(&mut r);
    let mut spec = random_spec(&mut r, &mid);
    for x in mid.all_indeterminates() {
        if let mideu::Indeterminate::UtilParam { .. } = x {
            spec.insert(x, ratio(1, 1));
        }
    }
    for x in mid.all_indeterminates() {
        if x == mideu::Indeterminate::Interaction {
            spec.insert(x, ratio(0, 1));
        }
    }
    let ksum: mideu::Rational = mid
        .all_indeterminates()
        .into_iter()
        .filter(|x| matches!(x, mideu::Indeterminate::Weight(_)))
        .map(|x| spec.get(&x).unwrap().clone())
        .sum();
    let policy = mideu::Policy::constant(&mid, 0);
    assert_eq!(joint_eu_numeric(&mid, &spec, &policy).unwrap(), ksum);
}
