//! Brute-force numeric expected utility, written against the joint law
//! directly. Nothing here calls into the symbolic evaluator.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::mid::{Interaction, Mid, NodeKind, Weight};
use crate::poly::Indeterminate;
use crate::policy::{enumerate_policies, DecisionRule, Policy};
use crate::rational::Rational;

/// Numeric values for indeterminates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NumericSpec {
    pub values: BTreeMap<Indeterminate, Rational>,
}

impl NumericSpec {
    pub fn new(values: BTreeMap<Indeterminate, Rational>) -> Self {
        NumericSpec { values }
    }

    pub fn get(&self, x: &Indeterminate) -> Option<&Rational> {
        self.values.get(x)
    }

    pub fn insert(&mut self, x: Indeterminate, v: Rational) {
        self.values.insert(x, v);
    }

    /// Fills every conditional block with exactly one missing value by `1 - sum`.
    pub fn completed(&self, mid: &Mid) -> NumericSpec {
        let mut out = self.clone();
        for i in 1..=mid.n() {
            if mid.kind(i) != NodeKind::Chance {
                continue;
            }
            for parents in parent_configs(mid, i) {
                let block: Vec<Indeterminate> = (0..mid.card(i)).map(|y| prob(mid, i, y, &parents)).collect();
                let missing: Vec<&Indeterminate> = block.iter().filter(|x| !out.values.contains_key(x)).collect();
                if missing.len() == 1 {
                    let known: Rational = block.iter().filter_map(|x| out.values.get(x)).cloned().sum();
                    let x = missing[0].clone();
                    out.values.insert(x, Rational::one() - known);
                }
            }
        }
        out
    }

    /// Fills every unset parameter deterministically: the open mass of a
    /// probability block is shared evenly, anything else becomes 1/2.
    /// Returns the filled spec and the parameters that were set.
    pub fn filled(&self, mid: &Mid) -> (NumericSpec, Vec<Indeterminate>) {
        let mut out = self.completed(mid);
        let mut set = Vec::new();
        for i in 1..=mid.n() {
            if mid.kind(i) != NodeKind::Chance {
                continue;
            }
            for parents in parent_configs(mid, i) {
                let block: Vec<Indeterminate> = (0..mid.card(i)).map(|y| prob(mid, i, y, &parents)).collect();
                let missing: Vec<Indeterminate> = block.iter().filter(|x| !out.values.contains_key(x)).cloned().collect();
                if missing.is_empty() {
                    continue;
                }
                let known: Rational = block.iter().filter_map(|x| out.values.get(x)).cloned().sum();
                let share = (Rational::one() - known) / Rational::from_integer((missing.len() as i64).into());
                for x in missing {
                    out.values.insert(x.clone(), share.clone());
                    set.push(x);
                }
            }
        }
        for x in mid.all_indeterminates() {
            if !out.values.contains_key(&x) {
                out.values.insert(x.clone(), Rational::new(1.into(), 2.into()));
                set.push(x);
            }
        }
        (out, set)
    }
}

/// `(label, value)` pairs of the parents, highest label first.
fn parent_configs(mid: &Mid, i: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for &p in mid.parents(i) {
        let mut next = Vec::new();
        for partial in &out {
            for v in 0..mid.card(p) {
                let mut c = partial.clone();
                c.push((mid.node(p).label, v));
                next.push(c);
            }
        }
        out = next;
    }
    for c in &mut out {
        c.sort_by(|a, b| b.0.cmp(&a.0));
    }
    out
}

fn prob(mid: &Mid, i: usize, y: usize, parents: &[(usize, usize)]) -> Indeterminate {
    Indeterminate::ProbParam { i: mid.node(i).label, y, parents: parents.to_vec(), gen: mid.node(i).gen }
}

fn labelled(mid: &Mid, positions: &[usize], assignment: &[usize]) -> Vec<(usize, usize)> {
    let mut c: Vec<(usize, usize)> = positions.iter().map(|&p| (mid.node(p).label, assignment[p])).collect();
    c.sort_by(|a, b| b.0.cmp(&a.0));
    c
}

struct Weights {
    k: Vec<Rational>,
    h: Rational,
}

fn weights(mid: &Mid, spec: &NumericSpec, missing: &mut BTreeSet<String>) -> Weights {
    let mut k = Vec::new();
    for (l, w) in mid.weights.k.iter().enumerate() {
        match w {
            Weight::Numeric(v) => k.push(v.clone()),
            Weight::Symbolic => {
                let x = Indeterminate::Weight(mid.utilities[l].label);
                match spec.get(&x) {
                    Some(v) => k.push(v.clone()),
                    None => {
                        missing.insert(x.to_string());
                        k.push(Rational::zero());
                    }
                }
            }
        }
    }
    let h = match &mid.weights.h {
        Interaction::Additive => Rational::zero(),
        Interaction::Numeric(v) => v.clone(),
        Interaction::Symbolic => match spec.get(&Indeterminate::Interaction) {
            Some(v) => v.clone(),
            None => {
                missing.insert("h".into());
                Rational::zero()
            }
        },
    };
    Weights { k, h }
}

/// Multiplicative combination over every nonempty subset of the given utilities.
fn combine(values: &[(Rational, Rational)], h: &Rational) -> Rational {
    let m = values.len();
    let mut total = Rational::zero();
    for mask in 1u32..(1u32 << m) {
        let size = mask.count_ones();
        let mut term = Rational::one();
        for _ in 1..size {
            term *= h;
        }
        for (j, (k, u)) in values.iter().enumerate() {
            if mask & (1 << j) != 0 {
                term = term * k * u;
            }
        }
        total += term;
    }
    total
}

/// Chooses an action at a decision from the values assigned so far
/// (indexed by position, slot 0 unused).
pub type Chooser<'a> = &'a dyn Fn(usize, &[usize]) -> usize;

/// Expected multiplicative utility of the utilities whose last argument is at
/// or after `from`, given values for every position before `from`.
pub fn future_eu(
    mid: &Mid,
    spec: &NumericSpec,
    chooser: Chooser<'_>,
    from: usize,
    prefix: &[usize],
) -> Result<Rational> {
    let n = mid.n();
    let mut missing = BTreeSet::new();
    let w = weights(mid, spec, &mut missing);
    let active: Vec<usize> = (0..mid.m())
        .filter(|&l| mid.utilities[l].parents.iter().max().copied().unwrap_or(0) >= from)
        .collect();
    let mut assignment = vec![0usize; n + 1];
    assignment[..from.min(n + 1)].copy_from_slice(&prefix[..from.min(n + 1)]);
    let mut total = Rational::zero();
    walk(mid, spec, chooser, from, &mut assignment, Rational::one(), &active, &w, &mut total, &mut missing);
    if missing.is_empty() {
        Ok(total)
    } else {
        Err(Error::Incomplete(missing.into_iter().collect()))
    }
}

#[allow(clippy::too_many_arguments)]
fn walk(
    mid: &Mid,
    spec: &NumericSpec,
    chooser: Chooser<'_>,
    pos: usize,
    assignment: &mut Vec<usize>,
    weight: Rational,
    active: &[usize],
    w: &Weights,
    total: &mut Rational,
    missing: &mut BTreeSet<String>,
) {
    if pos > mid.n() {
        let mut vals = Vec::with_capacity(active.len());
        for &l in active {
            let u = &mid.utilities[l];
            let x = Indeterminate::util(u.label, labelled(mid, &u.parents, assignment));
            let v = match spec.get(&x) {
                Some(v) => v.clone(),
                None => {
                    missing.insert(x.to_string());
                    Rational::zero()
                }
            };
            vals.push((w.k[l].clone(), v));
        }
        *total += weight * combine(&vals, &w.h);
        return;
    }
    match mid.kind(pos) {
        NodeKind::Decision => {
            assignment[pos] = chooser(pos, assignment);
            walk(mid, spec, chooser, pos + 1, assignment, weight, active, w, total, missing);
        }
        NodeKind::Chance => {
            let parents = labelled(mid, mid.parents(pos), assignment);
            for y in 0..mid.card(pos) {
                let x = prob(mid, pos, y, &parents);
                let p = match spec.get(&x) {
                    Some(v) => v.clone(),
                    None => {
                        missing.insert(x.to_string());
                        continue;
                    }
                };
                if p.is_zero() {
                    continue;
                }
                assignment[pos] = y;
                walk(mid, spec, chooser, pos + 1, assignment, &weight * &p, active, w, total, missing);
            }
        }
    }
}

/// `E[U]` under an arbitrary decision function.
pub fn joint_eu_with(mid: &Mid, spec: &NumericSpec, chooser: Chooser<'_>) -> Result<Rational> {
    future_eu(mid, spec, chooser, 1, &[0])
}

/// `E[U]` under a policy.
pub fn joint_eu_numeric(mid: &Mid, spec: &NumericSpec, policy: &Policy) -> Result<Rational> {
    let chooser = |d: usize, a: &[usize]| policy.action_given(mid, d, a).unwrap_or(0);
    joint_eu_with(mid, spec, &chooser)
}

/// Best policy by exhaustive enumeration; the first maximum wins.
pub fn optimal_policy_enumerate(mid: &Mid, spec: &NumericSpec, cap: u64) -> Result<(Policy, Rational)> {
    let mut best: Option<(Policy, Rational)> = None;
    for policy in enumerate_policies(mid, cap)? {
        let v = joint_eu_numeric(mid, spec, &policy)?;
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((policy, v));
        }
    }
    Ok(best.expect("at least one policy"))
}

/// Best policy by backward induction over decisions; lowest action wins ties.
pub fn optimal_policy_dp(mid: &Mid, spec: &NumericSpec) -> Result<(Policy, Rational)> {
    let mut rules: BTreeMap<usize, DecisionRule> = BTreeMap::new();
    for d in mid.decisions().into_iter().rev() {
        let domain = mid.comp_b(d);
        let cards: Vec<usize> = domain.iter().map(|&p| mid.card(p)).collect();
        let mut actions = Vec::new();
        for vals in crate::config::all(&cards) {
            let mut prefix = vec![0usize; mid.n() + 1];
            for (p, v) in domain.iter().zip(&vals) {
                prefix[*p] = *v;
            }
            let mut best: Option<(usize, Rational)> = None;
            for a in 0..mid.card(d) {
                let chooser = |pos: usize, asg: &[usize]| {
                    if pos == d {
                        a
                    } else {
                        let r = &rules[&pos];
                        let dv: Vec<usize> = r.domain.iter().map(|&p| asg[p]).collect();
                        r.action(mid, &dv)
                    }
                };
                let v = future_eu(mid, spec, &chooser, d, &prefix)?;
                if best.as_ref().map_or(true, |(_, b)| v > *b) {
                    best = Some((a, v));
                }
            }
            actions.push(best.unwrap().0);
        }
        rules.insert(d, DecisionRule { domain, actions });
    }
    let policy = Policy { rules };
    let v = joint_eu_numeric(mid, spec, &policy)?;
    Ok((policy, v))
}

/// Best policy; both strategies are computed when enumeration fits under `cap`
/// and must agree on the value.
pub fn optimal_policy_numeric(mid: &Mid, spec: &NumericSpec, cap: u64) -> Result<(Policy, Rational)> {
    let (p, v) = optimal_policy_dp(mid, spec)?;
    match optimal_policy_enumerate(mid, spec, cap) {
        Ok((_, ve)) if ve != v => Err(Error::Evaluation("enumeration and backward induction disagree".into())),
        Ok(_) | Err(Error::TooManyPolicies { .. }) => Ok((p, v)),
        Err(e) => Err(e),
    }
}
