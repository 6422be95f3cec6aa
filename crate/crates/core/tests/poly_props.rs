use std::collections::BTreeMap;

use mideu::expr::parse_polynomial;
use mideu::rational::{format_rational, parse_rational, ratio};
use mideu::{Indeterminate, Monomial, Polynomial, Rational};
use proptest::prelude::*;

fn var_pool() -> Vec<Indeterminate> {
    vec![
        Indeterminate::Interaction,
        Indeterminate::Weight(1),
        Indeterminate::Weight(2),
        Indeterminate::util(3, vec![(4, 1), (2, 0)]),
        Indeterminate::prob(2, 1, vec![(1, 0)]),
        Indeterminate::prob(3, 0, vec![]),
        Indeterminate::prob(5, 1, vec![(4, 1), (3, 1)]),
    ]
}

fn rational() -> impl Strategy<Value = Rational> {
    (-20i64..=20, 1i64..=8).prop_map(|(n, d)| ratio(n, d))
}

fn monomial_over(vars: &'static [usize]) -> impl Strategy<Value = Monomial> {
    prop::collection::vec((prop::sample::select(vars), 1u32..=3), 0..4).prop_map(|fs| {
        let pool = var_pool();
        Monomial::from_factors(fs.into_iter().map(|(i, e)| (pool[i].clone(), e)))
    })
}

fn polynomial_over(vars: &'static [usize]) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((monomial_over(vars), rational()), 0..6).prop_map(Polynomial::from_terms)
}

fn polynomial() -> impl Strategy<Value = Polynomial> {
    polynomial_over(&[0, 1, 2, 3, 4, 5, 6])
}

/// Polynomials free of the variables that substitution tests bind.
fn unbound_polynomial() -> impl Strategy<Value = Polynomial> {
    polynomial_over(&[0, 2, 3, 5])
}

fn point() -> impl Strategy<Value = BTreeMap<Indeterminate, Rational>> {
    prop::collection::vec(rational(), 7).prop_map(|vals| var_pool().into_iter().zip(vals).collect())
}

fn resolver() -> impl Fn(&str) -> Option<Indeterminate> {
    let table: BTreeMap<String, Indeterminate> = var_pool().into_iter().map(|x| (x.to_string(), x)).collect();
    move |s| table.get(s).cloned()
}

proptest! {
    #[test]
    fn addition_is_commutative_and_associative(a in polynomial(), b in polynomial(), c in polynomial()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a - &a, Polynomial::zero());
    }

    #[test]
    fn multiplication_is_a_commutative_monoid(a in polynomial(), b in polynomial(), c in polynomial()) {
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &Polynomial::one(), a.clone());
        prop_assert!((&a * &Polynomial::zero()).is_zero());
    }

    #[test]
    fn multiplication_distributes(a in polynomial(), b in polynomial(), c in polynomial()) {
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(a in polynomial(), b in polynomial(), x in point()) {
        let (va, vb) = (a.eval_map(&x).unwrap(), b.eval_map(&x).unwrap());
        prop_assert_eq!((&a + &b).eval_map(&x).unwrap(), &va + &vb);
        prop_assert_eq!((&a * &b).eval_map(&x).unwrap(), &va * &vb);
    }

    #[test]
    fn substitution_commutes_with_ring_operations(a in polynomial(), b in polynomial(), s in unbound_polynomial(), t in unbound_polynomial()) {
        let pool = var_pool();
        let bind: BTreeMap<Indeterminate, Polynomial> = [(pool[1].clone(), s), (pool[4].clone(), t)].into_iter().collect();
        let sub = |p: &Polynomial| p.substitute(&bind).unwrap();
        prop_assert_eq!(sub(&(&a + &b)), &sub(&a) + &sub(&b));
        prop_assert_eq!(sub(&(&a * &b)), &sub(&a) * &sub(&b));
    }

    #[test]
    fn substitution_then_evaluation(a in polynomial(), s in unbound_polynomial(), x in point()) {
        let pool = var_pool();
        let target = pool[6].clone();
        let bind: BTreeMap<Indeterminate, Polynomial> = [(target.clone(), s.clone())].into_iter().collect();
        let mut y = x.clone();
        y.insert(target, s.eval_map(&x).unwrap());
        prop_assert_eq!(a.substitute(&bind).unwrap().eval_map(&x).unwrap(), a.eval_map(&y).unwrap());
    }

    #[test]
    fn rendering_parses_back(a in polynomial()) {
        let text = a.to_string();
        let back = parse_polynomial(&text, &resolver()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn degree_is_additive(a in polynomial(), b in polynomial()) {
        let prod = &a * &b;
        if let (Some(da), Some(db)) = (a.degree(), b.degree()) {
            if !prod.is_zero() {
                prop_assert_eq!(prod.degree(), Some(da + db));
            }
        }
    }

    #[test]
    fn rational_text_round_trips(r in rational()) {
        prop_assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
    }

    #[test]
    fn structure_summary_counts_every_term(a in polynomial()) {
        prop_assert_eq!(a.structure_summary().total(), a.len());
    }
}
