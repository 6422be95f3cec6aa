//! Graph surgery with symbolic reparametrization.
//!
//! Transforms address nodes by label. Every transform rebuilds the diagram
//! and re-sorts it topologically (stable with respect to the old order), so
//! positions may change while labels never do. Reparametrized nodes get a
//! new generation, which yields fresh indeterminates (`p3'11`) that are
//! defined by [`DefinitionalBinding`]s over the previous generation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_traits::Zero;

use crate::config;
use crate::error::{Error, Result};
use crate::eu::EvaluationTrace;
use crate::mid::{DsItem, Mid, Node, NodeKind, UtilityNode};
use crate::oracle::NumericSpec;
use crate::poly::{Indeterminate, Polynomial};
use crate::rational::Rational;

/// `target = numerator / denominator`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefinitionalBinding {
    pub target: Indeterminate,
    pub numerator: Polynomial,
    pub denominator: Polynomial,
}

impl fmt::Display for DefinitionalBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator == Polynomial::one() {
            write!(f, "{} = {}", self.target, self.numerator)
        } else {
            write!(f, "{} = ({}) / ({})", self.target, self.numerator, self.denominator)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    ReverseArc(usize, usize),
    RemoveBarren(usize),
    Sufficiency(usize, usize),
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepKind::ReverseArc(i, j) => write!(f, "ReverseArc({i},{j})"),
            StepKind::RemoveBarren(i) => write!(f, "RemoveBarren({i})"),
            StepKind::Sufficiency(i, j) => write!(f, "Sufficiency({i},{j})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformStep {
    pub kind: StepKind,
    pub bindings: Vec<DefinitionalBinding>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransformLog {
    pub steps: Vec<TransformStep>,
}

impl TransformLog {
    pub fn kinds(&self) -> Vec<StepKind> {
        self.steps.iter().map(|s| s.kind).collect()
    }

    pub fn bindings(&self) -> impl Iterator<Item = &DefinitionalBinding> {
        self.steps.iter().flat_map(|s| s.bindings.iter())
    }

    /// Values of every fresh indeterminate given values of the originals.
    pub fn resolve(&self, spec: &NumericSpec) -> Result<NumericSpec> {
        resolve_bindings_numeric(self.bindings(), spec)
    }
}

/// Evaluates bindings in order, extending `spec`. A zero denominator yields 0.
pub fn resolve_bindings_numeric<'a>(
    bindings: impl IntoIterator<Item = &'a DefinitionalBinding>,
    spec: &NumericSpec,
) -> Result<NumericSpec> {
    let mut out = spec.clone();
    for b in bindings {
        let num = b.numerator.eval_map(&out.values)?;
        let den = b.denominator.eval_map(&out.values)?;
        let v = if den.is_zero() { Rational::zero() } else { num / den };
        out.insert(b.target.clone(), v);
    }
    Ok(out)
}

/// Vertices of the moral graph.
pub type Vertex = DsItem;

/// Separation of `a` from `c` by `b` in the moral graph of the ancestral set
/// of `a ∪ b ∪ c`. Utility nodes are vertices like any other.
pub fn d_separated(mid: &Mid, a: &[Vertex], b: &[Vertex], c: &[Vertex]) -> bool {
    let n = mid.n();
    let id = |v: &Vertex| match v {
        DsItem::Y(p) => p - 1,
        DsItem::U(l) => n + l,
    };
    let total = n + mid.m();
    let parents_of = |x: usize| -> Vec<usize> {
        if x < n {
            mid.parents(x + 1).iter().map(|p| p - 1).collect()
        } else {
            mid.utilities[x - n].parents.iter().map(|p| p - 1).collect()
        }
    };
    let mut ancestral: BTreeSet<usize> = a.iter().chain(b).chain(c).map(id).collect();
    let mut stack: Vec<usize> = ancestral.iter().copied().collect();
    while let Some(x) = stack.pop() {
        for p in parents_of(x) {
            if ancestral.insert(p) {
                stack.push(p);
            }
        }
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); total];
    for &x in &ancestral {
        let ps = parents_of(x);
        for (k, &p) in ps.iter().enumerate() {
            adj[p].insert(x);
            adj[x].insert(p);
            for &q in &ps[k + 1..] {
                adj[p].insert(q);
                adj[q].insert(p);
            }
        }
    }
    let blocked: BTreeSet<usize> = b.iter().map(id).collect();
    let targets: BTreeSet<usize> = c.iter().map(id).collect();
    let mut seen: BTreeSet<usize> = a.iter().map(id).collect();
    let mut queue: VecDeque<usize> = seen.iter().copied().collect();
    while let Some(x) = queue.pop_front() {
        if targets.contains(&x) {
            return false;
        }
        for &y in &adj[x] {
            if !blocked.contains(&y) && seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    true
}

fn reaches_avoiding_edge(mid: &Mid, from: usize, to: usize) -> bool {
    let mut stack: Vec<usize> = mid.children(from).into_iter().filter(|&c| c != to).collect();
    let mut seen: BTreeSet<usize> = stack.iter().copied().collect();
    while let Some(x) = stack.pop() {
        if x == to {
            return true;
        }
        for c in mid.children(x) {
            if seen.insert(c) {
                stack.push(c);
            }
        }
    }
    false
}

/// `(Y_i, Y_j)` is an edge and the only directed path from `i` to `j`. Positions.
pub fn is_father(mid: &Mid, i: usize, j: usize) -> bool {
    mid.parents(j).contains(&i) && !reaches_avoiding_edge(mid, i, j)
}

/// A node keyed by labels, used while rewiring.
#[derive(Clone, Debug)]
struct LNode {
    label: usize,
    kind: NodeKind,
    card: usize,
    parents: BTreeSet<usize>,
    gen: u32,
}

struct LGraph {
    nodes: Vec<LNode>,
    utilities: Vec<(usize, BTreeSet<usize>)>,
}

impl LGraph {
    fn from_mid(mid: &Mid) -> LGraph {
        let nodes = mid
            .nodes
            .iter()
            .map(|n| LNode {
                label: n.label,
                kind: n.kind,
                card: n.card,
                parents: n.parents.iter().map(|&p| mid.label(p)).collect(),
                gen: n.gen,
            })
            .collect();
        let utilities = mid
            .utilities
            .iter()
            .map(|u| (u.label, u.parents.iter().map(|&p| mid.label(p)).collect()))
            .collect();
        LGraph { nodes, utilities }
    }

    fn get(&self, label: usize) -> &LNode {
        self.nodes.iter().find(|n| n.label == label).expect("label present")
    }

    fn get_mut(&mut self, label: usize) -> &mut LNode {
        self.nodes.iter_mut().find(|n| n.label == label).expect("label present")
    }

    fn card(&self, label: usize) -> usize {
        self.get(label).card
    }

    /// Stable topological sort by previous order.
    fn into_mid(self, template: &Mid) -> Result<Mid> {
        let mut placed: Vec<usize> = Vec::new();
        let mut done: BTreeSet<usize> = BTreeSet::new();
        while placed.len() < self.nodes.len() {
            let next = self
                .nodes
                .iter()
                .position(|n| !done.contains(&n.label) && n.parents.iter().all(|p| done.contains(p)))
                .ok_or_else(|| Error::Transform("transformation created a cycle".into()))?;
            done.insert(self.nodes[next].label);
            placed.push(next);
        }
        let pos_of: BTreeMap<usize, usize> =
            placed.iter().enumerate().map(|(k, &idx)| (self.nodes[idx].label, k + 1)).collect();
        let nodes = placed
            .iter()
            .map(|&idx| {
                let n = &self.nodes[idx];
                let mut parents: Vec<usize> = n.parents.iter().map(|l| pos_of[l]).collect();
                parents.sort_unstable();
                Node { label: n.label, kind: n.kind, card: n.card, parents, gen: n.gen }
            })
            .collect();
        let mut utilities = Vec::new();
        for (label, ps) in &self.utilities {
            let mut parents = Vec::new();
            for l in ps {
                parents.push(
                    *pos_of
                        .get(l)
                        .ok_or_else(|| Error::Transform(format!("Y{l} is an argument of U{label}")))?,
                );
            }
            parents.sort_unstable();
            utilities.push(UtilityNode { label: *label, parents });
        }
        Ok(Mid { nodes, utilities, weights: template.weights.clone() })
    }
}

fn p_ind(label: usize, gen: u32, y: usize, parents: &[(usize, usize)]) -> Indeterminate {
    let mut parents = parents.to_vec();
    parents.sort_unstable_by(|a, b| b.0.cmp(&a.0));
    Indeterminate::ProbParam { i: label, y, parents, gen }
}

fn pick(assign: &BTreeMap<usize, usize>, labels: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    labels.iter().map(|l| (*l, assign[l])).collect()
}

/// All assignments to `labels`.
fn assignments(g: &LGraph, labels: &BTreeSet<usize>) -> Vec<BTreeMap<usize, usize>> {
    let ls: Vec<usize> = labels.iter().copied().collect();
    let cards: Vec<usize> = ls.iter().map(|&l| g.card(l)).collect();
    config::all(&cards)
        .into_iter()
        .map(|vals| ls.iter().copied().zip(vals).collect())
        .collect()
}

fn require_label(mid: &Mid, label: usize) -> Result<usize> {
    mid.position_of(label).ok_or_else(|| Error::Transform(format!("no node Y{label}")))
}

/// Reverses the arc from `Y_i` to `Y_j` (labels).
pub fn reverse_arc(mid: &Mid, i: usize, j: usize) -> Result<(Mid, Vec<DefinitionalBinding>)> {
    let (pi, pj) = (require_label(mid, i)?, require_label(mid, j)?);
    if !mid.is_chance(pi) || !mid.is_chance(pj) {
        return Err(Error::Transform(format!("Y{i} and Y{j} must both be chance nodes")));
    }
    if !is_father(mid, pi, pj) {
        return Err(Error::Transform(format!("Y{i} is not the father of Y{j}")));
    }
    let mut g = LGraph::from_mid(mid);
    let old_i = g.get(i).clone();
    let old_j = g.get(j).clone();
    let mut new_pj: BTreeSet<usize> = old_j.parents.union(&old_i.parents).copied().collect();
    new_pj.remove(&i);
    let mut new_pi = new_pj.clone();
    new_pi.insert(j);

    let one = Polynomial::one();
    let joint = |assign: &BTreeMap<usize, usize>| -> Polynomial {
        let pj_ind = p_ind(j, old_j.gen, assign[&j], &pick(assign, &old_j.parents));
        let pi_ind = p_ind(i, old_i.gen, assign[&i], &pick(assign, &old_i.parents));
        &Polynomial::var(pj_ind) * &Polynomial::var(pi_ind)
    };
    let mixture = |assign: &BTreeMap<usize, usize>| -> Polynomial {
        let mut acc = Polynomial::zero();
        let mut a = assign.clone();
        for yi in 0..old_i.card {
            a.insert(i, yi);
            acc = &acc + &joint(&a);
        }
        acc
    };

    let mut bindings = Vec::new();
    let mut scope_j = new_pj.clone();
    scope_j.insert(j);
    for assign in assignments(&g, &scope_j) {
        let target = p_ind(j, old_j.gen + 1, assign[&j], &pick(&assign, &new_pj));
        bindings.push(DefinitionalBinding { target, numerator: mixture(&assign), denominator: one.clone() });
    }
    let mut scope_i = new_pi.clone();
    scope_i.insert(i);
    for assign in assignments(&g, &scope_i) {
        let target = p_ind(i, old_i.gen + 1, assign[&i], &pick(&assign, &new_pi));
        bindings.push(DefinitionalBinding { target, numerator: joint(&assign), denominator: mixture(&assign) });
    }

    {
        let nj = g.get_mut(j);
        nj.parents = new_pj;
        nj.gen += 1;
    }
    {
        let ni = g.get_mut(i);
        ni.parents = new_pi;
        ni.gen += 1;
    }
    Ok((g.into_mid(mid)?, bindings))
}

/// Deletes a childless chance node `Y_i` (label) that no utility reads.
pub fn remove_barren(mid: &Mid, i: usize) -> Result<Mid> {
    let p = require_label(mid, i)?;
    if !mid.is_chance(p) {
        return Err(Error::Transform(format!("Y{i} is a decision")));
    }
    if !mid.children(p).is_empty() {
        return Err(Error::Transform(format!("Y{i} has children")));
    }
    if mid.is_utility_parent(p) {
        return Err(Error::Transform(format!("Y{i} is a utility argument and cannot be removed")));
    }
    if mid.n() == 1 {
        return Err(Error::Transform("removal would leave an empty diagram".into()));
    }
    let mut g = LGraph::from_mid(mid);
    g.nodes.retain(|n| n.label != i);
    g.into_mid(mid)
}

/// Chance parents of decision `j` (position) that the sufficiency principle
/// allows to drop, as positions.
pub fn sufficiency_removable(mid: &Mid, j: usize) -> Result<BTreeSet<usize>> {
    if !mid.is_decision(j) {
        return Err(Error::Transform(format!("{} is not a decision", mid.name(j))));
    }
    let mut out = BTreeSet::new();
    for &i in mid.parents(j) {
        if !mid.is_chance(i) || mid.is_utility_parent(i) {
            continue;
        }
        let future: Vec<Vertex> = (0..mid.m()).filter(|&l| mid.utility_max(l) >= i).map(DsItem::U).collect();
        let mut sep: BTreeSet<usize> = mid.parents(j).iter().copied().filter(|&k| k != i).collect();
        sep.extend(mid.decisions());
        let sep: Vec<Vertex> = sep.into_iter().map(DsItem::Y).collect();
        if d_separated(mid, &[DsItem::Y(i)], &sep, &future) {
            out.insert(i);
        }
    }
    Ok(out)
}

/// Removes `Y_i` by the sufficiency principle at decision `Y_j` (labels).
pub fn apply_sufficiency(mid: &Mid, i: usize, j: usize) -> Result<(Mid, Vec<DefinitionalBinding>)> {
    let (pi, pj) = (require_label(mid, i)?, require_label(mid, j)?);
    if !sufficiency_removable(mid, pj)?.contains(&pi) {
        return Err(Error::Transform(format!("Y{i} cannot be dropped at Y{j}")));
    }
    let mut g = LGraph::from_mid(mid);
    let old_i = g.get(i).clone();
    let children: Vec<usize> = mid.children(pi).into_iter().map(|c| mid.label(c)).collect();
    let chance_children: Vec<usize> =
        children.iter().copied().filter(|&c| g.get(c).kind == NodeKind::Chance).collect();
    let mut bindings = Vec::new();
    for (t, &c) in chance_children.iter().enumerate() {
        let old_c = g.get(c).clone();
        let earlier = &chance_children[..t];
        let mut new_pc: BTreeSet<usize> = old_c.parents.union(&old_i.parents).copied().collect();
        new_pc.remove(&i);
        for &l in earlier {
            if !old_c.parents.contains(&l) {
                return Err(Error::Transform(format!(
                    "Y{c} does not observe Y{l}, another child of Y{i}; this rewiring is not supported"
                )));
            }
            let extra: Vec<usize> =
                g.get(l).parents.iter().copied().filter(|p| *p != i && !new_pc.contains(p)).collect();
            if !extra.is_empty() {
                return Err(Error::Transform(format!(
                    "parents of Y{l} are not available to Y{c}; this rewiring is not supported"
                )));
            }
        }
        let mut scope = new_pc.clone();
        scope.insert(c);
        for assign in assignments(&g, &scope) {
            let mut num = Polynomial::zero();
            let mut den = Polynomial::zero();
            for yi in 0..old_i.card {
                let mut a = assign.clone();
                a.insert(i, yi);
                let mut weight = Polynomial::var(p_ind(i, old_i.gen, yi, &pick(&a, &old_i.parents)));
                for &l in earlier {
                    let nl = g.get(l);
                    weight = &weight * &Polynomial::var(p_ind(l, nl.gen, a[&l], &pick(&a, &nl.parents)));
                }
                let pc = Polynomial::var(p_ind(c, old_c.gen, a[&c], &pick(&a, &old_c.parents)));
                num = &num + &(&pc * &weight);
                den = &den + &weight;
            }
            if earlier.is_empty() {
                den = Polynomial::one();
            }
            let target = p_ind(c, old_c.gen + 1, assign[&c], &pick(&assign, &new_pc));
            bindings.push(DefinitionalBinding { target, numerator: num, denominator: den });
        }
    }
    for &c in &children {
        let node = g.get_mut(c);
        node.parents.remove(&i);
        node.parents.extend(old_i.parents.iter().copied());
        if node.kind == NodeKind::Chance {
            node.gen += 1;
        }
    }
    g.nodes.retain(|n| n.label != i);
    Ok((g.into_mid(mid)?, bindings))
}

/// Applies one logged step.
pub fn apply_step(mid: &Mid, kind: StepKind) -> Result<(Mid, Vec<DefinitionalBinding>)> {
    match kind {
        StepKind::ReverseArc(i, j) => reverse_arc(mid, i, j),
        StepKind::RemoveBarren(i) => Ok((remove_barren(mid, i)?, Vec::new())),
        StepKind::Sufficiency(i, j) => apply_sufficiency(mid, i, j),
    }
}

/// Re-applies every step of `log` to `mid`.
pub fn replay(mid: &Mid, log: &TransformLog) -> Result<Mid> {
    let mut cur = mid.clone();
    for step in &log.steps {
        cur = apply_step(&cur, step.kind)?.0;
    }
    Ok(cur)
}

/// Greedy arc reversals and barren removals until every decision observes
/// all earlier variables.
pub fn to_extensive_form(mid: &Mid) -> Result<(Mid, TransformLog)> {
    let mut cur = mid.clone();
    let mut log = TransformLog::default();
    let cap = 4 * (mid.n() + 1) * (mid.n() + 1);
    for _ in 0..cap {
        let violation = cur
            .decisions()
            .into_iter()
            .find_map(|d| (1..d).find(|v| !cur.parents(d).contains(v)).map(|v| (d, v)));
        let Some((d, v)) = violation else {
            return Ok((cur, log));
        };
        let (vl, dl) = (cur.label(v), cur.label(d));
        if cur.is_decision(v) {
            return Err(Error::Transform(format!("decision Y{dl} does not observe the earlier decision Y{vl}")));
        }
        let kind = match cur.children(v).first() {
            Some(&c) if cur.is_chance(c) => StepKind::ReverseArc(vl, cur.label(c)),
            Some(&c) => {
                return Err(Error::Transform(format!(
                    "Y{vl} is unobserved by Y{dl} but its first child Y{} is a decision",
                    cur.label(c)
                )))
            }
            None if cur.is_utility_parent(v) => {
                return Err(Error::Transform(format!(
                    "Y{vl} is unobserved by Y{dl} and is a utility argument, so it cannot be removed"
                )))
            }
            None => StepKind::RemoveBarren(vl),
        };
        let (next, bindings) = apply_step(&cur, kind)?;
        log.steps.push(TransformStep { kind, bindings });
        cur = next;
    }
    Err(Error::Transform("no extensive form reached within the step limit".into()))
}

/// Number of monomials in every stage of a trace, for reporting.
pub fn stage_counts(trace: &EvaluationTrace) -> BTreeMap<usize, usize> {
    trace.vectors.iter().map(|(k, v)| (*k, v.monomial_count())).collect()
}

impl Mid {
    /// Structural equality ignoring positions' bookkeeping: same labels,
    /// kinds, cardinalities and labelled parent sets.
    pub fn same_graph(&self, other: &Mid) -> bool {
        let sig = |m: &Mid| {
            let nodes: BTreeMap<usize, (NodeKind, usize, BTreeSet<usize>)> = m
                .nodes
                .iter()
                .map(|n| (n.label, (n.kind, n.card, n.parents.iter().map(|&p| m.label(p)).collect())))
                .collect();
            let utils: BTreeMap<usize, BTreeSet<usize>> = m
                .utilities
                .iter()
                .map(|u| (u.label, u.parents.iter().map(|&p| m.label(p)).collect()))
                .collect();
            (nodes, utils)
        };
        sig(self) == sig(other)
    }
}
