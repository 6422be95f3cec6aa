//! Deterministic decision rules.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::config;
use crate::error::{Error, Result};
use crate::mid::Mid;

pub const DEFAULT_POLICY_CAP: u64 = 1_000_000;

/// Action table for one decision, indexed by configurations of `domain`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecisionRule {
    /// Observed positions the rule reads, ascending. Equals `B_d`.
    pub domain: Vec<usize>,
    pub actions: Vec<usize>,
}

impl DecisionRule {
    pub fn action(&self, mid: &Mid, domain_values: &[usize]) -> usize {
        self.actions[config::encode(&mid.cards(&self.domain), domain_values)]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Policy {
    /// Decision position -> rule.
    pub rules: BTreeMap<usize, DecisionRule>,
}

impl Policy {
    /// Builds a policy from `choose(decision, domain, domain_values)`.
    pub fn from_fn(mid: &Mid, mut choose: impl FnMut(usize, &[usize], &[usize]) -> usize) -> Policy {
        let mut rules = BTreeMap::new();
        for d in mid.decisions() {
            let domain = mid.comp_b(d);
            let actions = config::all(&mid.cards(&domain)).iter().map(|v| choose(d, &domain, v)).collect();
            rules.insert(d, DecisionRule { domain, actions });
        }
        Policy { rules }
    }

    /// Every decision takes `action` regardless of history.
    pub fn constant(mid: &Mid, action: usize) -> Policy {
        Policy::from_fn(mid, |_, _, _| action)
    }

    /// Action at decision `d` given a full assignment indexed by position (1-based, slot 0 unused).
    pub fn action_given(&self, mid: &Mid, d: usize, assignment: &[usize]) -> Option<usize> {
        let rule = self.rules.get(&d)?;
        let vals: Vec<usize> = rule.domain.iter().map(|&p| assignment[p]).collect();
        Some(rule.action(mid, &vals))
    }

    /// Checks that the rule for every decision at or after `from` is total and in range.
    pub fn check(&self, mid: &Mid, from: usize) -> Result<()> {
        for d in mid.decisions().into_iter().filter(|&d| d >= from) {
            let rule = self
                .rules
                .get(&d)
                .ok_or_else(|| Error::Policy(format!("no rule for decision {}", mid.name(d))))?;
            let expected = mid.comp_b(d);
            if rule.domain != expected {
                return Err(Error::Policy(format!(
                    "rule for {} reads {:?}, expected {:?}",
                    mid.name(d),
                    names(mid, &rule.domain),
                    names(mid, &expected)
                )));
            }
            if rule.actions.len() != config::size(&mid.cards(&rule.domain)) {
                return Err(Error::Policy(format!("rule for {} is not total", mid.name(d))));
            }
            if let Some(a) = rule.actions.iter().find(|&&a| a >= mid.card(d)) {
                return Err(Error::Policy(format!("action {a} out of range for {}", mid.name(d))));
            }
        }
        Ok(())
    }

    /// Human-readable listing, one line per decision.
    pub fn describe(&self, mid: &Mid) -> String {
        let mut out = String::new();
        for (d, rule) in &self.rules {
            let cards = mid.cards(&rule.domain);
            let parts: Vec<String> = config::all(&cards)
                .iter()
                .zip(&rule.actions)
                .map(|(vals, a)| {
                    if rule.domain.is_empty() {
                        format!("{}", a)
                    } else {
                        let cond: Vec<String> =
                            rule.domain.iter().zip(vals).map(|(p, v)| format!("{}={v}", mid.name(*p))).collect();
                        format!("{} -> {a}", cond.join(","))
                    }
                })
                .collect();
            out.push_str(&format!("{}: {}\n", mid.name(*d), parts.join("; ")));
        }
        out
    }
}

fn names(mid: &Mid, s: &[usize]) -> Vec<String> {
    s.iter().map(|&p| mid.name(p)).collect()
}

/// Exact number of total policies.
pub fn policy_count(mid: &Mid) -> BigUint {
    let mut n = BigUint::from(1u32);
    for d in mid.decisions() {
        let blocks = config::size(&mid.cards(&mid.comp_b(d)));
        n *= BigUint::from(mid.card(d)).pow(blocks as u32);
    }
    n
}

/// All policies in lexicographic order of their action tables.
pub fn enumerate_policies(mid: &Mid, cap: u64) -> Result<PolicyIter> {
    let count = policy_count(mid);
    if count > BigUint::from(cap) {
        return Err(Error::TooManyPolicies { count: count.to_string(), cap });
    }
    let template = Policy::constant(mid, 0);
    let slots: Vec<(usize, usize, usize)> = template
        .rules
        .iter()
        .flat_map(|(d, r)| (0..r.actions.len()).map(move |k| (*d, k, 0)))
        .map(|(d, k, _)| (d, k, mid.card(d)))
        .collect();
    Ok(PolicyIter { current: Some(template), slots, remaining: count.to_u64().unwrap_or(0) })
}

pub struct PolicyIter {
    current: Option<Policy>,
    slots: Vec<(usize, usize, usize)>,
    remaining: u64,
}

impl Iterator for PolicyIter {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        let out = self.current.take()?;
        self.remaining = self.remaining.saturating_sub(1);
        let mut next = out.clone();
        let mut carried = true;
        for &(d, k, r) in self.slots.iter().rev() {
            let a = &mut next.rules.get_mut(&d).unwrap().actions[k];
            if *a + 1 < r {
                *a += 1;
                carried = false;
                break;
            }
            *a = 0;
        }
        if !carried {
            self.current = Some(next);
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = if self.current.is_some() { self.remaining as usize } else { 0 };
        (n, Some(n))
    }
}
