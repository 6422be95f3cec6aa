//! Backward induction over EU vectors.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::One;

use crate::config;
use crate::error::{Error, Result};
use crate::mid::Mid;
use crate::poly::{Monomial, Polynomial, StructureSummary};
use crate::policy::Policy;
use crate::rational::Rational;

/// One polynomial per configuration of `scope`, in configuration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EUVector {
    pub scope: Vec<usize>,
    pub entries: Vec<Polynomial>,
}

impl EUVector {
    /// The terminal vector `(0)`.
    pub fn terminal() -> EUVector {
        EUVector { scope: Vec::new(), entries: vec![Polynomial::zero()] }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Configurations of the scope, aligned with `entries`.
    pub fn configs(&self, mid: &Mid) -> Vec<Vec<usize>> {
        config::all(&mid.cards(&self.scope))
    }

    pub fn entry_at(&self, mid: &Mid, values: &[usize]) -> &Polynomial {
        &self.entries[config::encode(&mid.cards(&self.scope), values)]
    }

    pub fn monomial_count(&self) -> usize {
        self.entries.iter().map(Polynomial::len).sum()
    }

    pub fn summaries(&self) -> Vec<StructureSummary> {
        self.entries.iter().map(Polynomial::structure_summary).collect()
    }

    pub fn map(&self, f: impl Fn(&Polynomial) -> Polynomial) -> EUVector {
        EUVector { scope: self.scope.clone(), entries: self.entries.iter().map(f).collect() }
    }

    /// Renders `y5=1,y4=0: poly` lines.
    pub fn render(&self, mid: &Mid) -> String {
        let mut out = String::new();
        for (vals, p) in self.configs(mid).iter().zip(&self.entries) {
            out.push_str(&format!("({}): {}\n", config_label(mid, &self.scope, vals), p));
        }
        out
    }
}

/// `Y5=1,Y4=0` with highest position first.
pub fn config_label(mid: &Mid, scope: &[usize], vals: &[usize]) -> String {
    if scope.is_empty() {
        return "-".into();
    }
    scope
        .iter()
        .zip(vals)
        .rev()
        .map(|(p, v)| format!("{}={v}", mid.name(*p)))
        .collect::<Vec<_>>()
        .join(",")
}

/// Replicates `entries` (over `from`) onto the larger scope `to`.
pub fn align<T: Clone>(mid: &Mid, entries: &[T], from: &[usize], to: &[usize]) -> Vec<T> {
    config::projection(to, &mid.cards(to), from).into_iter().map(|k| entries[k].clone()).collect()
}

/// Aligns two vectors onto the union of their scopes.
pub fn align_scopes<T: Clone, U: Clone>(
    mid: &Mid,
    u: &[T],
    su: &[usize],
    v: &[U],
    sv: &[usize],
) -> (Vec<T>, Vec<U>, Vec<usize>) {
    let scope = config::union(su, sv);
    (align(mid, u, su, &scope), align(mid, v, sv, &scope), scope)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    /// Folds in the utility with this index.
    MultiSum(usize),
    Marginalize,
    Maximize,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpKind::MultiSum(_) => f.write_str("multisum"),
            OpKind::Marginalize => f.write_str("marginalize"),
            OpKind::Maximize => f.write_str("maximize"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepLog {
    pub stage: usize,
    pub op: OpKind,
    /// Scalar multiplications performed, counted per monomial.
    pub multiplications: u128,
    pub scope: Vec<usize>,
    pub monomials: usize,
}

#[derive(Clone, Debug)]
pub struct EvaluationTrace {
    /// `Ū_i` for every computed stage, including `n+1`.
    pub vectors: BTreeMap<usize, EUVector>,
    /// The vector right after the multisum at stage `i`, where one fired.
    pub after_multisum: BTreeMap<usize, EUVector>,
    pub steps: Vec<StepLog>,
    pub policy: Policy,
    pub stop: usize,
}

impl EvaluationTrace {
    pub fn stage(&self, i: usize) -> Option<&EUVector> {
        self.vectors.get(&i)
    }

    /// `Ū_1`'s single entry when evaluation ran to the root.
    pub fn expected_utility(&self) -> Option<&Polynomial> {
        self.vectors.get(&1).map(|v| &v.entries[0])
    }
}

/// `h k_j (u' ∘ ψ') + k_j ψ' + u'`.
pub fn eu_multisum(mid: &Mid, u: &EUVector, l: usize) -> Result<(EUVector, u128)> {
    if l >= mid.m() {
        return Err(Error::Evaluation(format!("utility index {l} out of range")));
    }
    let psi = mid.util_vector(l);
    let (ua, pa, scope) = align_scopes(mid, &u.entries, &u.scope, &psi, &mid.utilities[l].parents);
    let k = mid.k_poly(l);
    let hk = &mid.h_poly() * &k;
    let one = Rational::one();
    let mut mults: u128 = 1;
    let entries = ua
        .iter()
        .zip(&pa)
        .map(|(ue, x)| {
            mults += ue.len() as u128 + 2;
            let m = Monomial::var(x.clone());
            let prod = ue.mul_monomial(&m, &one);
            let kpsi = k.mul_monomial(&m, &one);
            let mut acc = &hk * &prod;
            acc = &acc + &kpsi;
            &acc + ue
        })
        .collect();
    Ok((EUVector { scope, entries }, mults))
}

/// Multiplies by `p_i` and sums out `y_i`.
pub fn eu_marginalize(mid: &Mid, u: &EUVector, i: usize) -> Result<(EUVector, u128)> {
    if !mid.is_chance(i) {
        return Err(Error::Evaluation(format!("{} is not a chance node", mid.name(i))));
    }
    let p = mid.prob_vector(i);
    let (ua, pa, scope) = align_scopes(mid, &u.entries, &u.scope, &p, &mid.prob_scope(i));
    debug_assert_eq!(scope.last(), Some(&i));
    let r = mid.card(i);
    let one = Rational::one();
    let len = ua.len() as u128;
    let mut mults = len * len / r as u128;
    let products: Vec<Polynomial> = ua
        .iter()
        .zip(&pa)
        .map(|(ue, x)| {
            mults += ue.len() as u128;
            ue.mul_monomial(&Monomial::var(x.clone()), &one)
        })
        .collect();
    let entries = products
        .chunks(r)
        .map(|block| block.iter().fold(Polynomial::zero(), |acc, q| &acc + q))
        .collect();
    let new_scope = scope[..scope.len() - 1].to_vec();
    Ok((EUVector { scope: new_scope, entries }, mults))
}

/// Selects, per block, the entry chosen by the policy's rule for `d`.
pub fn eu_maximize(mid: &Mid, u: &EUVector, d: usize, policy: &Policy) -> Result<EUVector> {
    if !mid.is_decision(d) {
        return Err(Error::Evaluation(format!("{} is not a decision", mid.name(d))));
    }
    if u.scope.last() != Some(&d) {
        if u.scope.contains(&d) {
            return Err(Error::Evaluation(format!("{} is not the last scope variable", mid.name(d))));
        }
        return Ok(u.clone());
    }
    let rule = policy
        .rules
        .get(&d)
        .ok_or_else(|| Error::Policy(format!("no rule for decision {}", mid.name(d))))?;
    let scope = u.scope[..u.scope.len() - 1].to_vec();
    if rule.domain != scope {
        return Err(Error::Policy(format!("rule for {} has the wrong domain", mid.name(d))));
    }
    let r = mid.card(d);
    let entries = u
        .entries
        .chunks(r)
        .zip(&rule.actions)
        .map(|(block, &a)| {
            if a >= r {
                return Err(Error::Policy(format!("action {a} out of range for {}", mid.name(d))));
            }
            Ok(block[r - 1 - a].clone())
        })
        .collect::<Result<Vec<_>>>()?;
    if entries.len() * r != u.entries.len() {
        return Err(Error::Policy(format!("rule for {} is not total", mid.name(d))));
    }
    Ok(EUVector { scope, entries })
}

/// Hook applied to the vector produced by every operation.
pub type Pruner<'a> = &'a dyn Fn(usize, &mut EUVector);

pub struct Evaluator<'a> {
    pub mid: &'a Mid,
    pub policy: &'a Policy,
    /// Lowest stage to compute.
    pub stop: usize,
    pub pruner: Option<Pruner<'a>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(mid: &'a Mid, policy: &'a Policy) -> Self {
        Evaluator { mid, policy, stop: 1, pruner: None }
    }

    pub fn stop_at(mut self, stage: usize) -> Self {
        self.stop = stage;
        self
    }

    pub fn with_pruner(mut self, pruner: Pruner<'a>) -> Self {
        self.pruner = Some(pruner);
        self
    }

    pub fn run(&self) -> Result<EvaluationTrace> {
        let mid = self.mid;
        let n = mid.n();
        if !mid.is_valid() {
            let msgs: Vec<String> = mid.validate().iter().map(|d| d.to_string()).collect();
            return Err(Error::Invalid(msgs.join("; ")));
        }
        mid.decision_sequence()?;
        mid.decisions_observe_domains().map_err(Error::Evaluation)?;
        if self.stop == 0 || self.stop > n + 1 {
            return Err(Error::Evaluation(format!("stage {} outside 1..={}", self.stop, n + 1)));
        }
        self.policy.check(mid, self.stop)?;
        let mut vectors = BTreeMap::new();
        let mut after_multisum = BTreeMap::new();
        let mut steps = Vec::new();
        let mut cur = EUVector::terminal();
        vectors.insert(n + 1, cur.clone());
        let prune = |stage: usize, v: &mut EUVector| {
            if let Some(p) = self.pruner {
                p(stage, v);
            }
        };
        for i in (self.stop..=n).rev() {
            if let Some(l) = mid.utility_at(i) {
                let (mut v, mults) = eu_multisum(mid, &cur, l)?;
                prune(i, &mut v);
                steps.push(StepLog {
                    stage: i,
                    op: OpKind::MultiSum(l),
                    multiplications: mults,
                    scope: v.scope.clone(),
                    monomials: v.monomial_count(),
                });
                after_multisum.insert(i, v.clone());
                cur = v;
            }
            let (mut v, op, mults) = if mid.is_chance(i) {
                let (v, m) = eu_marginalize(mid, &cur, i)?;
                (v, OpKind::Marginalize, m)
            } else {
                (eu_maximize(mid, &cur, i, self.policy)?, OpKind::Maximize, 0)
            };
            prune(i, &mut v);
            steps.push(StepLog { stage: i, op, multiplications: mults, scope: v.scope.clone(), monomials: v.monomial_count() });
            debug_assert_eq!(v.scope, mid.comp_b(i));
            vectors.insert(i, v.clone());
            cur = v;
        }
        Ok(EvaluationTrace { vectors, after_multisum, steps, policy: self.policy.clone(), stop: self.stop })
    }
}

/// Full backward induction down to `Ū_1`.
pub fn symbolic_eu(mid: &Mid, policy: &Policy) -> Result<EvaluationTrace> {
    Evaluator::new(mid, policy).run()
}

/// Backward induction down to `Ū_stage`.
pub fn symbolic_eu_until(mid: &Mid, policy: &Policy, stage: usize) -> Result<EvaluationTrace> {
    Evaluator::new(mid, policy).stop_at(stage).run()
}
