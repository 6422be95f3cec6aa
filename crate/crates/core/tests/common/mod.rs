#![allow(dead_code)]

use std::collections::BTreeMap;

use mideu::fixtures::ex1;
use mideu::mid::{Interaction, Node, NodeKind, UtilityNode};
use mideu::oracle::{joint_eu_with, NumericSpec};
use mideu::transforms::{is_father, sufficiency_removable, StepKind};
use mideu::rational::ratio;
use mideu::{Indeterminate, Mid, Rational};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_n: usize,
    pub max_m: usize,
    /// Probability that a node is a decision.
    pub decision_rate: f64,
    /// Decisions observe every earlier node.
    pub extensive: bool,
    pub max_card: usize,
}

impl Shape {
    pub fn binary(max_n: usize, max_m: usize) -> Shape {
        Shape { max_n, max_m, decision_rate: 0.3, extensive: true, max_card: 2 }
    }
}

/// Random valid diagram with labels equal to positions.
pub fn random_mid(rng: &mut ChaCha8Rng, shape: Shape) -> Mid {
    let n = rng.gen_range(2..=shape.max_n);
    let kinds: Vec<NodeKind> = (0..n)
        .map(|_| if rng.gen_bool(shape.decision_rate) { NodeKind::Decision } else { NodeKind::Chance })
        .collect();
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=shape.max_card)).collect();
    let mut parents: Vec<Vec<usize>> = (1..=n)
        .map(|i| {
            let all = kinds[i - 1] == NodeKind::Decision && shape.extensive;
            (1..i).filter(|_| all || rng.gen_bool(0.4)).collect()
        })
        .collect();

    let m = rng.gen_range(1..=shape.max_m.min(n));
    let mut maxima: Vec<usize> = (1..n).collect();
    maxima.shuffle(rng);
    maxima.truncate(m - 1);
    maxima.push(n);
    maxima.sort_unstable();
    let mut used: Vec<usize> = maxima.clone();
    let mut utility_parents: Vec<Vec<usize>> = Vec::new();
    for &j in &maxima {
        let mut ps = vec![j];
        for p in 1..j {
            if !used.contains(&p) && rng.gen_bool(0.3) {
                ps.push(p);
                used.push(p);
            }
        }
        ps.sort_unstable();
        utility_parents.push(ps);
    }

    for i in 1..n {
        let has_child = parents[i..].iter().any(|ps| ps.contains(&i));
        if !has_child && !used.contains(&i) {
            let c = rng.gen_range(i + 1..=n);
            parents[c - 1].push(i);
            parents[c - 1].sort_unstable();
        }
    }
    let mid = Mid::new(&kinds, &cards, &parents, &utility_parents);
    assert!(mid.is_valid(), "generator produced an invalid diagram: {:?}", mid.validate());
    mid
}

fn random_distribution(rng: &mut ChaCha8Rng, r: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..r).map(|_| rng.gen_range(0..=6)).collect();
    let total: i64 = w.iter().sum();
    if total == 0 {
        let mut v = vec![ratio(0, 1); r];
        v[rng.gen_range(0..r)] = ratio(1, 1);
        return v;
    }
    w.into_iter().map(|x| ratio(x, total)).collect()
}

/// Values for every indeterminate of `mid`: normalized probabilities,
/// utilities in [0,1], weights in (0,1) and an arbitrary `h`.
pub fn random_spec(rng: &mut ChaCha8Rng, mid: &Mid) -> NumericSpec {
    let mut values = BTreeMap::new();
    for (pos, vector) in mid.parameter_vectors().p {
        for block in vector.chunks(mid.card(pos)) {
            for (x, v) in block.iter().zip(random_distribution(rng, block.len())) {
                values.insert(x.clone(), v);
            }
        }
    }
    for x in mid.all_indeterminates() {
        if values.contains_key(&x) {
            continue;
        }
        let v = match x {
            Indeterminate::UtilParam { .. } => ratio(rng.gen_range(0..=10), 10),
            Indeterminate::Weight(_) => ratio(rng.gen_range(1..=9), 10),
            Indeterminate::Interaction => ratio(rng.gen_range(-9..=20), 10),
            Indeterminate::ProbParam { .. } => unreachable!("probabilities handled above"),
        };
        values.insert(x, v);
    }
    NumericSpec::new(values)
}

pub fn additive(mid: &Mid) -> Mid {
    mid.clone().with_interaction(Interaction::Additive)
}

/// Acts on the values of the decision's parents in `reference`, by label.
pub fn label_chooser(reference: &Mid, mid: &Mid, seed: u64) -> impl Fn(usize, &[usize]) -> usize {
    let plan: BTreeMap<usize, (Vec<usize>, usize)> = reference
        .decisions()
        .into_iter()
        .map(|d| (reference.label(d), (reference.parents(d).iter().map(|&p| reference.label(p)).collect(), reference.card(d))))
        .collect();
    let mid = mid.clone();
    move |d: usize, asg: &[usize]| {
        let (ps, card) = &plan[&mid.label(d)];
        let mut h = seed ^ (mid.label(d) as u64).wrapping_mul(0x9e37_79b9);
        for &l in ps {
            let v = asg[mid.position_of(l).expect("label survives")] as u64;
            h = h.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(v * 31 + l as u64);
        }
        ((h >> 33) % *card as u64) as usize
    }
}

pub fn eu_by_labels(reference: &Mid, mid: &Mid, spec: &NumericSpec, seed: u64) -> Rational {
    let chooser = label_chooser(reference, mid, seed);
    joint_eu_with(mid, spec, &chooser).unwrap()
}

/// Steps that apply to `mid`, by label.
pub fn candidate_steps(mid: &Mid) -> Vec<StepKind> {
    let mut out = Vec::new();
    for j in 1..=mid.n() {
        for &i in mid.parents(j) {
            if mid.is_chance(i) && mid.is_chance(j) && is_father(mid, i, j) {
                out.push(StepKind::ReverseArc(mid.label(i), mid.label(j)));
            }
        }
        if mid.is_chance(j) && mid.children(j).is_empty() && !mid.is_utility_parent(j) && mid.n() > 1 {
            out.push(StepKind::RemoveBarren(mid.label(j)));
        }
        if mid.is_decision(j) {
            for i in sufficiency_removable(mid, j).unwrap() {
                out.push(StepKind::Sufficiency(mid.label(i), mid.label(j)));
            }
        }
    }
    out
}


/// Diagram from `(label, kind, parent labels)` with positions in list order.
pub fn labelled(nodes: &[(usize, NodeKind, &[usize])], utilities: &[(usize, &[usize])]) -> Mid {
    let pos: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(k, n)| (n.0, k + 1)).collect();
    let nodes = nodes
        .iter()
        .map(|(l, kind, ps)| {
            let mut parents: Vec<usize> = ps.iter().map(|p| pos[p]).collect();
            parents.sort_unstable();
            Node { label: *l, kind: *kind, card: 2, parents, gen: 0 }
        })
        .collect();
    let utilities = utilities
        .iter()
        .map(|(l, ps)| {
            let mut parents: Vec<usize> = ps.iter().map(|p| pos[p]).collect();
            parents.sort_unstable();
            UtilityNode { label: *l, parents }
        })
        .collect();
    let base = ex1().mid;
    Mid { nodes, utilities, weights: base.weights }
}

pub fn fig2_right() -> Mid {
    use NodeKind::*;
    labelled(
        &[(1, Decision, &[]), (3, Chance, &[1]), (4, Decision, &[1, 3]), (5, Chance, &[3, 4]), (6, Chance, &[4, 5])],
        &[(1, &[3]), (2, &[5]), (3, &[4, 6])],
    )
}

