//! Functional asymmetries: monomial pruning and count predictions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::config;
use crate::error::{Error, Result};
use crate::eu::{EUVector, EvaluationTrace, Evaluator};
use crate::mid::Mid;
use crate::poly::Monomial;
use crate::policy::Policy;
use crate::structure::predicted_structure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Relation {
    MustEqual,
    MustNotEqual,
}

/// `if all antecedent pairs hold then consequent`, over node labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Asymmetry {
    pub antecedent: Vec<(usize, usize)>,
    pub consequent: (usize, Relation, usize),
}

impl Asymmetry {
    pub fn new(antecedent: Vec<(usize, usize)>, var: usize, rel: Relation, value: usize) -> Self {
        Asymmetry { antecedent, consequent: (var, rel, value) }
    }

    /// The consequent as a list of forbidden `(label, value)` pairs.
    pub fn forbidden(&self, mid: &Mid) -> Vec<(usize, usize)> {
        let (var, rel, value) = self.consequent;
        match rel {
            Relation::MustNotEqual => vec![(var, value)],
            Relation::MustEqual => {
                let card = mid.position_of(var).map_or(value + 1, |p| mid.card(p));
                (0..card).filter(|&v| v != value).map(|v| (var, v)).collect()
            }
        }
    }

    pub fn validate(&self, mid: &Mid) -> Result<()> {
        if self.antecedent.is_empty() {
            return Err(Error::Invalid("asymmetry with an empty antecedent".into()));
        }
        let mut seen = BTreeSet::new();
        for &(v, val) in self.antecedent.iter().chain(std::iter::once(&(self.consequent.0, self.consequent.2))) {
            let p = mid.position_of(v).ok_or_else(|| Error::Invalid(format!("asymmetry names unknown Y{v}")))?;
            if val >= mid.card(p) {
                return Err(Error::Invalid(format!("asymmetry value {val} out of range for Y{v}")));
            }
            if !seen.insert(v) {
                return Err(Error::Invalid(format!("asymmetry mentions Y{v} twice")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Asymmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ante: Vec<String> = self.antecedent.iter().map(|(v, x)| format!("Y{v}={x}")).collect();
        let (v, rel, x) = self.consequent;
        let op = if rel == Relation::MustEqual { "=" } else { "!=" };
        write!(f, "{} => Y{v}{op}{x}", ante.join(" & "))
    }
}

/// Known values, possibly several per variable.
type Context = BTreeMap<usize, BTreeSet<usize>>;

fn realizes(ctx: &Context, asy: &Asymmetry, forbidden: &[(usize, usize)]) -> bool {
    asy.antecedent.iter().all(|(v, x)| ctx.get(v).is_some_and(|s| s.contains(x)))
        && forbidden.iter().any(|(v, x)| ctx.get(v).is_some_and(|s| s.contains(x)))
}

fn add_annotations(ctx: &mut Context, mono: &Monomial) {
    for (x, _) in mono.factors() {
        for (v, val) in x.annotations() {
            ctx.entry(v).or_default().insert(val);
        }
    }
}

/// False when the monomial's own indices instantiate the antecedent together
/// with a forbidden consequent value.
pub fn monomial_compatible(mid: &Mid, mono: &Monomial, asy: &Asymmetry) -> bool {
    let mut ctx = Context::new();
    add_annotations(&mut ctx, mono);
    !realizes(&ctx, asy, &asy.forbidden(mid))
}

/// Prunes vectors produced during or after an evaluation.
pub struct Pruner<'a> {
    mid: &'a Mid,
    policy: &'a Policy,
    rules: Vec<(Asymmetry, Vec<(usize, usize)>)>,
}

impl<'a> Pruner<'a> {
    pub fn new(mid: &'a Mid, policy: &'a Policy, asys: &[Asymmetry]) -> Self {
        let rules = asys.iter().map(|a| (a.clone(), a.forbidden(mid))).collect();
        Pruner { mid, policy, rules }
    }

    /// Adds decision values implied by the policy for decisions at or after `stage`.
    fn close_under_policy(&self, ctx: &mut Context, stage: usize) {
        loop {
            let mut changed = false;
            for (&d, rule) in self.policy.rules.range(stage..) {
                let label = self.mid.label(d);
                if ctx.contains_key(&label) {
                    continue;
                }
                let vals: Option<Vec<usize>> = rule
                    .domain
                    .iter()
                    .map(|&p| {
                        ctx.get(&self.mid.label(p)).and_then(|s| if s.len() == 1 { s.iter().next().copied() } else { None })
                    })
                    .collect();
                if let Some(vals) = vals {
                    ctx.entry(label).or_default().insert(rule.action(self.mid, &vals));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn violated(&self, ctx: &Context) -> bool {
        self.rules.iter().any(|(a, f)| realizes(ctx, a, f))
    }

    /// Removes every monomial whose context violates some asymmetry.
    pub fn prune(&self, stage: usize, v: &mut EUVector) {
        if self.rules.is_empty() {
            return;
        }
        let cards = self.mid.cards(&v.scope);
        for (k, entry) in v.entries.iter_mut().enumerate() {
            let vals = config::decode(&cards, k);
            let mut base = Context::new();
            for (p, x) in v.scope.iter().zip(&vals) {
                base.entry(self.mid.label(*p)).or_default().insert(*x);
            }
            entry.retain(|mono| {
                let mut ctx = base.clone();
                add_annotations(&mut ctx, mono);
                self.close_under_policy(&mut ctx, stage);
                !self.violated(&ctx)
            });
        }
    }
}

/// Post-hoc pruning of every vector of a trace.
pub fn apply_asymmetries(mid: &Mid, trace: &EvaluationTrace, asys: &[Asymmetry]) -> EvaluationTrace {
    let pruner = Pruner::new(mid, &trace.policy, asys);
    let mut out = trace.clone();
    for (stage, v) in out.vectors.iter_mut() {
        pruner.prune(*stage, v);
    }
    for (stage, v) in out.after_multisum.iter_mut() {
        pruner.prune(*stage, v);
    }
    for step in out.steps.iter_mut() {
        let v = if matches!(step.op, crate::eu::OpKind::MultiSum(_)) {
            &out.after_multisum[&step.stage]
        } else {
            &out.vectors[&step.stage]
        };
        step.monomials = v.monomial_count();
    }
    out
}

/// Evaluation that prunes after every operation.
pub fn symbolic_eu_asymmetric(mid: &Mid, policy: &Policy, asys: &[Asymmetry]) -> Result<EvaluationTrace> {
    symbolic_eu_asymmetric_until(mid, policy, asys, 1)
}

pub fn symbolic_eu_asymmetric_until(
    mid: &Mid,
    policy: &Policy,
    asys: &[Asymmetry],
    stage: usize,
) -> Result<EvaluationTrace> {
    for a in asys {
        a.validate(mid)?;
    }
    let pruner = Pruner::new(mid, policy, asys);
    let hook = |s: usize, v: &mut EUVector| pruner.prune(s, v);
    Evaluator::new(mid, policy).stop_at(stage).with_pruner(&hook).run()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountTerm {
    pub a: usize,
    pub b: usize,
    pub degree: u32,
    pub symmetric: u128,
    pub lower: u128,
    pub upper: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub stage: usize,
    pub rows: usize,
    /// Rows left without monomials.
    pub emptied_rows: usize,
    /// Rows whose monomials are partly removed.
    pub affected_rows: usize,
    pub terms: Vec<CountTerm>,
    /// True when `lower == upper` for every term.
    pub exact: bool,
}

/// Per-stage predicted counts for a simple asymmetry `Y_i = u => Y_j != w`
/// with `i < j`. Chance-chance pairs get exact counts, pairs involving a
/// decision get interval bounds.
pub fn predicted_asymmetric_counts(mid: &Mid, asy: &Asymmetry) -> Result<Vec<StageCounts>> {
    if asy.antecedent.len() != 1 || asy.consequent.1 != Relation::MustNotEqual {
        return Err(Error::Evaluation("count prediction needs a simple Y_i=u => Y_j!=w asymmetry".into()));
    }
    let (li, _) = asy.antecedent[0];
    let lj = asy.consequent.0;
    let i = mid.position_of(li).ok_or_else(|| Error::Invalid(format!("unknown Y{li}")))?;
    let j = mid.position_of(lj).ok_or_else(|| Error::Invalid(format!("unknown Y{lj}")))?;
    if i >= j {
        return Err(Error::Evaluation("count prediction needs the antecedent before the consequent".into()));
    }
    let n = mid.n();
    if !(j + 1..=n).any(|k| mid.comp_b(k).contains(&j)) {
        return Err(Error::Evaluation(format!("{} is never carried past its own stage", mid.name(j))));
    }
    let exact = mid.is_chance(i) && mid.is_chance(j);
    let (ri, rj) = (mid.card(i) as u128, mid.card(j) as u128);
    let order = mid.utility_order();
    let mut out = Vec::new();
    for t in 1..=n {
        let pred = predicted_structure(mid, t, mid.weights.h == crate::mid::Interaction::Additive)?;
        let b = mid.comp_b(t);
        let rows = pred.dimension;
        let others = |skip: &[usize]| -> usize {
            b.iter().filter(|p| !skip.contains(p)).map(|&p| mid.card(p)).product()
        };
        let (emptied, affected, divisor) = if t > j {
            if b.contains(&i) && b.contains(&j) {
                (others(&[i, j]), 0, None)
            } else {
                (0, 0, None)
            }
        } else if t > i {
            if b.contains(&i) {
                (0, others(&[i]), Some(rj))
            } else {
                (0, 0, None)
            }
        } else {
            (0, rows, Some(ri * rj))
        };
        let terms = pred
            .terms
            .iter()
            .map(|term| {
                let ja = mid.utility_max(order[term.a - 1]);
                let removed = match divisor {
                    Some(d) if ja >= j && affected > 0 => term.count / d,
                    _ => 0,
                };
                let (lower, upper) = if exact {
                    (term.count - removed, term.count - removed)
                } else if affected > 0 && ja >= j {
                    (0, term.count)
                } else {
                    (term.count, term.count)
                };
                CountTerm { a: term.a, b: term.b, degree: term.degree, symmetric: term.count, lower, upper }
            })
            .collect::<Vec<_>>();
        let exact_stage = terms.iter().all(|t| t.lower == t.upper);
        out.push(StageCounts { stage: t, rows, emptied_rows: emptied, affected_rows: affected, terms, exact: exact_stage });
    }
    Ok(out)
}
