//! Multiplicative influence diagrams and their derived index sets.
//!
//! Nodes are addressed by *position* `1..=n`, which is a topological order:
//! every parent precedes its child. Each node also carries a *label* used to
//! name it (`Y3`) and its parameters (`p3..`). Labels equal positions for
//! diagrams written by hand; they diverge after transformations reorder nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{Error, Result};
use crate::poly::{Indeterminate, Polynomial};
use crate::rational::{format_rational, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Decision,
    Chance,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub label: usize,
    pub kind: NodeKind,
    pub card: usize,
    /// Parent positions, ascending.
    pub parents: Vec<usize>,
    /// Reparametrization generation of this node's probabilities.
    pub gen: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtilityNode {
    pub label: usize,
    /// Argument positions, ascending.
    pub parents: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Weight {
    Symbolic,
    Numeric(Rational),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Interaction {
    Symbolic,
    Numeric(Rational),
    /// `h = 0`.
    Additive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weights {
    /// One entry per utility node, in the order of `Mid::utilities`.
    pub k: Vec<Weight>,
    pub h: Interaction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mid {
    pub nodes: Vec<Node>,
    pub utilities: Vec<UtilityNode>,
    pub weights: Weights,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// An element of the decision sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsItem {
    /// Node at this position.
    Y(usize),
    /// Utility at this index of `Mid::utilities`.
    U(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionSequence(pub Vec<DsItem>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamVectors {
    /// Chance position -> probabilities over `{i} ∪ Π_i`.
    pub p: BTreeMap<usize, Vec<Indeterminate>>,
    /// Utility index -> utilities over `P_j`.
    pub psi: Vec<Vec<Indeterminate>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HSolution {
    pub h: Rational,
    pub additive: bool,
    /// True when `h` satisfies the weight equation exactly.
    pub exact: bool,
    pub residual: f64,
}

impl Mid {
    /// Diagram with labels equal to positions and symbolic weights.
    pub fn new(
        kinds: &[NodeKind],
        cards: &[usize],
        parents: &[Vec<usize>],
        utility_parents: &[Vec<usize>],
    ) -> Mid {
        let nodes = kinds
            .iter()
            .enumerate()
            .map(|(k, kind)| Node {
                label: k + 1,
                kind: *kind,
                card: cards[k],
                parents: {
                    let mut p = parents[k].clone();
                    p.sort_unstable();
                    p
                },
                gen: 0,
            })
            .collect();
        let utilities: Vec<UtilityNode> = utility_parents
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let mut p = p.clone();
                p.sort_unstable();
                UtilityNode { label: j + 1, parents: p }
            })
            .collect();
        let k = vec![Weight::Symbolic; utilities.len()];
        Mid { nodes, utilities, weights: Weights { k, h: Interaction::Symbolic } }
    }

    pub fn with_interaction(mut self, h: Interaction) -> Mid {
        self.weights.h = h;
        self
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn m(&self) -> usize {
        self.utilities.len()
    }

    pub fn node(&self, pos: usize) -> &Node {
        &self.nodes[pos - 1]
    }

    pub fn card(&self, pos: usize) -> usize {
        self.nodes[pos - 1].card
    }

    pub fn cards(&self, scope: &[usize]) -> Vec<usize> {
        scope.iter().map(|&p| self.card(p)).collect()
    }

    pub fn kind(&self, pos: usize) -> NodeKind {
        self.nodes[pos - 1].kind
    }

    pub fn is_chance(&self, pos: usize) -> bool {
        self.kind(pos) == NodeKind::Chance
    }

    pub fn is_decision(&self, pos: usize) -> bool {
        self.kind(pos) == NodeKind::Decision
    }

    pub fn parents(&self, pos: usize) -> &[usize] {
        &self.nodes[pos - 1].parents
    }

    pub fn label(&self, pos: usize) -> usize {
        self.nodes[pos - 1].label
    }

    pub fn position_of(&self, label: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.label == label).map(|p| p + 1)
    }

    pub fn utility_index_of(&self, label: usize) -> Option<usize> {
        self.utilities.iter().position(|u| u.label == label)
    }

    pub fn name(&self, pos: usize) -> String {
        format!("Y{}", self.label(pos))
    }

    pub fn utility_name(&self, j: usize) -> String {
        format!("U{}", self.utilities[j].label)
    }

    pub fn decisions(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&p| self.is_decision(p)).collect()
    }

    pub fn children(&self, pos: usize) -> Vec<usize> {
        (pos + 1..=self.n()).filter(|&c| self.parents(c).contains(&pos)).collect()
    }

    /// Utilities having `pos` as an argument.
    pub fn utility_children(&self, pos: usize) -> Vec<usize> {
        (0..self.m()).filter(|&j| self.utilities[j].parents.contains(&pos)).collect()
    }

    pub fn is_utility_parent(&self, pos: usize) -> bool {
        !self.utility_children(pos).is_empty()
    }

    /// `j_l = max P_l` for utility index `l`.
    pub fn utility_max(&self, l: usize) -> usize {
        self.utilities[l].parents.iter().copied().max().unwrap_or(0)
    }

    /// The index set J: maxima of the utility argument sets, ascending.
    pub fn comp_j(&self) -> Vec<usize> {
        let mut j: Vec<usize> = (0..self.m()).map(|l| self.utility_max(l)).collect();
        j.sort_unstable();
        j
    }

    /// Utility indices ordered by their position in the decision sequence.
    pub fn utility_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.m()).collect();
        order.sort_by_key(|&l| (self.utility_max(l), l));
        order
    }

    /// The utility folded in at stage `pos`, if any.
    pub fn utility_at(&self, pos: usize) -> Option<usize> {
        (0..self.m()).find(|&l| self.utility_max(l) == pos)
    }

    /// `B_i` for `i` in `1..=n+1`, ascending positions.
    pub fn comp_b(&self, i: usize) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for k in i..=self.n() {
            if self.is_chance(k) {
                set.extend(self.parents(k).iter().copied());
            }
        }
        for l in 0..self.m() {
            if self.utility_max(l) >= i {
                set.extend(self.utilities[l].parents.iter().copied());
            }
        }
        set.into_iter().filter(|&x| x < i).collect()
    }

    /// `c_i`, the number of configurations of `B_i`.
    pub fn dim(&self, i: usize) -> usize {
        config::size(&self.cards(&self.comp_b(i)))
    }

    pub fn decision_sequence(&self) -> Result<DecisionSequence> {
        let j = self.comp_j();
        if j.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("two utilities share the same last argument".into()));
        }
        let mut seq = Vec::with_capacity(self.n() + self.m());
        for pos in 1..=self.n() {
            seq.push(DsItem::Y(pos));
            if let Some(l) = self.utility_at(pos) {
                seq.push(DsItem::U(l));
            }
        }
        Ok(DecisionSequence(seq))
    }

    pub fn format_ds(&self, ds: &DecisionSequence) -> String {
        let items: Vec<String> = ds
            .0
            .iter()
            .map(|it| match it {
                DsItem::Y(p) => self.name(*p),
                DsItem::U(l) => self.utility_name(*l),
            })
            .collect();
        format!("({})", items.join(","))
    }

    pub fn is_extensive_form(&self) -> bool {
        self.decisions()
            .into_iter()
            .all(|d| (1..d).all(|k| self.parents(d).contains(&k)))
    }

    /// Every decision's policy domain `B_d` consists of observed parents.
    pub fn decisions_observe_domains(&self) -> std::result::Result<(), String> {
        for d in self.decisions() {
            let unobserved: Vec<String> = self
                .comp_b(d)
                .into_iter()
                .filter(|b| !self.parents(d).contains(b))
                .map(|b| self.name(b))
                .collect();
            if !unobserved.is_empty() {
                return Err(format!(
                    "decision {} would depend on unobserved {}; convert to extensive form first",
                    self.name(d),
                    unobserved.join(", ")
                ));
            }
        }
        Ok(())
    }

    /// `{i} ∪ Π_i`, ascending.
    pub fn prob_scope(&self, pos: usize) -> Vec<usize> {
        let mut s = self.parents(pos).to_vec();
        s.push(pos);
        s.sort_unstable();
        s
    }

    /// Probability indeterminate for node `pos` given values on its scope
    /// (aligned with `prob_scope(pos)`).
    pub fn prob_param(&self, pos: usize, scope_values: &[usize]) -> Indeterminate {
        let scope = self.prob_scope(pos);
        let mut y = 0;
        let mut parents = Vec::with_capacity(scope.len() - 1);
        for (v, &s) in scope_values.iter().zip(&scope) {
            if s == pos {
                y = *v;
            } else {
                parents.push((self.label(s), *v));
            }
        }
        parents.sort_unstable_by(|a, b| b.0.cmp(&a.0));
        Indeterminate::ProbParam { i: self.label(pos), y, parents, gen: self.node(pos).gen }
    }

    /// Utility indeterminate for utility `l` given values on `P_l`.
    pub fn util_param(&self, l: usize, values: &[usize]) -> Indeterminate {
        let mut config: Vec<(usize, usize)> = self.utilities[l]
            .parents
            .iter()
            .zip(values)
            .map(|(&p, &v)| (self.label(p), v))
            .collect();
        config.sort_unstable_by(|a, b| b.0.cmp(&a.0));
        Indeterminate::util(self.utilities[l].label, config)
    }

    pub fn prob_vector(&self, pos: usize) -> Vec<Indeterminate> {
        let cards = self.cards(&self.prob_scope(pos));
        config::all(&cards).iter().map(|c| self.prob_param(pos, c)).collect()
    }

    pub fn util_vector(&self, l: usize) -> Vec<Indeterminate> {
        let cards = self.cards(&self.utilities[l].parents);
        config::all(&cards).iter().map(|c| self.util_param(l, c)).collect()
    }

    pub fn parameter_vectors(&self) -> ParamVectors {
        let p = (1..=self.n())
            .filter(|&i| self.is_chance(i))
            .map(|i| (i, self.prob_vector(i)))
            .collect();
        let psi = (0..self.m()).map(|l| self.util_vector(l)).collect();
        ParamVectors { p, psi }
    }

    /// The weight of utility `l` as a polynomial.
    pub fn k_poly(&self, l: usize) -> Polynomial {
        match &self.weights.k[l] {
            Weight::Symbolic => Polynomial::var(Indeterminate::Weight(self.utilities[l].label)),
            Weight::Numeric(v) => Polynomial::constant(v.clone()),
        }
    }

    pub fn h_poly(&self) -> Polynomial {
        match &self.weights.h {
            Interaction::Symbolic => Polynomial::var(Indeterminate::Interaction),
            Interaction::Numeric(v) => Polynomial::constant(v.clone()),
            Interaction::Additive => Polynomial::zero(),
        }
    }

    /// Every indeterminate of the parametrization, including weights.
    pub fn all_indeterminates(&self) -> Vec<Indeterminate> {
        let pv = self.parameter_vectors();
        let mut out: Vec<Indeterminate> = pv.p.into_values().flatten().collect();
        out.extend(pv.psi.into_iter().flatten());
        for l in 0..self.m() {
            if self.weights.k[l] == Weight::Symbolic {
                out.push(Indeterminate::Weight(self.utilities[l].label));
            }
        }
        if self.weights.h == Interaction::Symbolic {
            out.push(Indeterminate::Interaction);
        }
        out
    }

    /// Lookup table from rendered names to indeterminates.
    pub fn name_table(&self) -> BTreeMap<String, Indeterminate> {
        let mut t: BTreeMap<String, Indeterminate> =
            self.all_indeterminates().into_iter().map(|x| (x.to_string(), x)).collect();
        for u in &self.utilities {
            let x = Indeterminate::Weight(u.label);
            t.insert(x.to_string(), x);
        }
        t.insert("h".into(), Indeterminate::Interaction);
        t
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let err = |m: String| Diagnostic { severity: Severity::Error, message: m };
        let n = self.n();
        let mut labels = BTreeSet::new();
        for (k, node) in self.nodes.iter().enumerate() {
            let pos = k + 1;
            let name = format!("Y{}", node.label);
            if !labels.insert(node.label) {
                out.push(err(format!("duplicate node label {name}")));
            }
            if node.card == 0 {
                out.push(err(format!("{name} has cardinality 0")));
            }
            for &p in &node.parents {
                if p == 0 || p >= pos {
                    let pname = if p >= 1 && p <= n { self.name(p) } else { format!("#{p}") };
                    out.push(err(format!("edge {pname} -> {name}: parent does not precede its child")));
                }
            }
            if node.parents.windows(2).any(|w| w[0] >= w[1]) {
                out.push(err(format!("{name} has unsorted or repeated parents")));
            }
        }
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        for (l, u) in self.utilities.iter().enumerate() {
            let uname = format!("U{}", u.label);
            if u.parents.is_empty() {
                out.push(err(format!("{uname} has no parents")));
            }
            for &p in &u.parents {
                if p == 0 || p > n {
                    out.push(err(format!("{uname} has an unknown parent #{p}")));
                    continue;
                }
                if let Some(&o) = owner.get(&p) {
                    out.push(err(format!(
                        "{} is an argument of both {} and {uname}; utility parent sets must be disjoint",
                        self.name(p),
                        self.utility_name(o)
                    )));
                } else {
                    owner.insert(p, l);
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        for pos in 1..=n {
            if self.children(pos).is_empty() && !self.is_utility_parent(pos) {
                out.push(Diagnostic { severity: Severity::Warning, message: format!("{} has no children", self.name(pos)) });
            }
        }
        let j = self.comp_j();
        for w in j.windows(2) {
            if w[0] == w[1] {
                out.push(err(format!("two utilities have {} as last argument", self.name(w[0]))));
            }
        }
        if self.weights.k.len() != self.m() {
            out.push(err(format!("{} weights for {} utilities", self.weights.k.len(), self.m())));
            return out;
        }
        let mut numeric = Vec::new();
        for (l, w) in self.weights.k.iter().enumerate() {
            if let Weight::Numeric(v) = w {
                if !(v > &Rational::zero() && v < &Rational::one()) {
                    out.push(err(format!("k{} = {} is outside (0,1)", self.utilities[l].label, format_rational(v))));
                }
                numeric.push(v.clone());
            }
        }
        if let Interaction::Numeric(h) = &self.weights.h {
            if numeric.len() == self.m() {
                let res = weight_residual(&numeric, h);
                if res.abs() > Rational::new(1.into(), 1_000_000.into()) {
                    out.push(Diagnostic {
                        severity: Severity::Warning,
                        message: format!(
                            "h = {} does not solve 1+h = prod(1+h k_j): residual {}",
                            format_rational(h),
                            res.to_f64().unwrap_or(f64::NAN)
                        ),
                    });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().iter().all(|d| d.severity != Severity::Error)
    }
}

/// `(1 + h) - prod(1 + h k_j)`.
pub fn weight_residual(k: &[Rational], h: &Rational) -> Rational {
    let one = Rational::one();
    let prod = k.iter().fold(one.clone(), |acc, kj| acc * (&one + h * kj));
    &one + h - prod
}

/// Solves `1 + h = prod(1 + h k_j)` for the root `h != 0, h >= -1`.
pub fn solve_h(k: &[Rational], tol: f64) -> Result<HSolution> {
    let one = Rational::one();
    let sum: Rational = k.iter().cloned().fold(Rational::zero(), |a, b| a + b);
    let gap = (&sum - &one).to_f64().unwrap_or(f64::NAN);
    if gap.abs() <= tol {
        return Ok(HSolution { h: Rational::zero(), additive: true, exact: sum == one, residual: 0.0 });
    }
    if k.iter().any(|v| !(v > &Rational::zero() && v < &one)) {
        return Err(Error::NoRoot("weights must lie in (0,1)".into()));
    }
    // q(h) = (prod(1 + h k) - 1 - h) / h, whose roots are the nonzero roots.
    let mut e = vec![Rational::one()];
    for kj in k {
        let mut next = vec![Rational::zero(); e.len() + 1];
        for (t, c) in e.iter().enumerate() {
            next[t] += c;
            next[t + 1] += c * kj;
        }
        e = next;
    }
    let coef: Vec<Rational> = (1..e.len())
        .map(|t| if t == 1 { &e[1] - &one } else { e[t].clone() })
        .collect();
    let coef_f: Vec<f64> = coef.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
    let q = |h: f64| coef_f.iter().rev().fold(0.0, |acc, c| acc * h + c);
    let q_exact = |h: &Rational| coef.iter().rev().fold(Rational::zero(), |acc, c| acc * h + c);
    let (mut lo, mut hi) = if gap > 0.0 {
        (-1.0, 0.0)
    } else {
        let mut hi = 1.0;
        while q(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                let curve: Vec<String> = [1.0, 10.0, 1e3, 1e6, 1e12]
                    .iter()
                    .map(|x| format!("q({x})={:.3e}", q(*x)))
                    .collect();
                return Err(Error::NoRoot(format!("no sign change up to 1e12: {}", curve.join(", "))));
            }
        }
        (0.0, hi)
    };
    let q_lo = q(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (q(mid) > 0.0) == (q_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * 1e-3 * (1.0 + hi.abs()) {
            break;
        }
    }
    let approx = 0.5 * (lo + hi);
    let (h, exact) = match snap(approx, &q_exact) {
        Some(r) => (r, true),
        None => {
            let scaled = (approx * 1e15).round();
            (Rational::new(num_bigint::BigInt::from(scaled as i128), num_bigint::BigInt::from(10i128.pow(15))), false)
        }
    };
    let residual = weight_residual(k, &h).to_f64().unwrap_or(f64::NAN);
    if residual.abs() > tol {
        return Err(Error::NoRoot(format!("bisection did not converge, residual {residual}")));
    }
    Ok(HSolution { h, additive: false, exact, residual })
}

/// Small-denominator rational exactly equal to a root near `x`, if any.
fn snap(x: f64, q: &dyn Fn(&Rational) -> Rational) -> Option<Rational> {
    let (mut h0, mut h1) = (num_bigint::BigInt::zero(), num_bigint::BigInt::one());
    let (mut k0, mut k1) = (num_bigint::BigInt::one(), num_bigint::BigInt::zero());
    let mut v = x;
    for _ in 0..20 {
        let a = v.floor();
        let ai = num_bigint::BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        let cand = Rational::new(h2.clone(), k2.clone());
        if q(&cand).is_zero() {
            return Some(cand);
        }
        if k2 > num_bigint::BigInt::from(1_000_000) {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = v - a;
        if frac.abs() < 1e-12 {
            return None;
        }
        v = 1.0 / frac;
    }
    None
}
