//! Partial substitution, preferred actions and admissible regions.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::config;
use crate::error::{Error, Result};
use crate::eu::{eu_multisum, symbolic_eu_until, EUVector};
use crate::mid::Mid;
use crate::oracle::NumericSpec;
use crate::poly::{resolve_bindings, Indeterminate, Polynomial};
use crate::policy::Policy;
use crate::rational::{format_decimal, Rational};

/// Numeric values, relations and declared free parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubstitutionSpec {
    pub numeric: BTreeMap<Indeterminate, Rational>,
    pub relations: BTreeMap<Indeterminate, Polynomial>,
    pub free: BTreeSet<Indeterminate>,
}

impl SubstitutionSpec {
    pub fn is_empty(&self) -> bool {
        self.numeric.is_empty() && self.relations.is_empty() && self.free.is_empty()
    }

    fn determined(&self, x: &Indeterminate) -> bool {
        self.numeric.contains_key(x) || self.relations.contains_key(x) || self.free.contains(x)
    }

    /// Sum-to-one completions for blocks with exactly one undetermined value.
    pub fn completions(&self, mid: &Mid) -> BTreeMap<Indeterminate, Polynomial> {
        let mut out = BTreeMap::new();
        for (pos, vector) in mid.parameter_vectors().p {
            let r = mid.card(pos);
            for chunk in vector.chunks(r) {
                let block: Vec<&Indeterminate> = chunk.iter().collect();
                let open: Vec<&&Indeterminate> = block.iter().filter(|x| !self.determined(x)).collect();
                if open.len() == 1 && block.len() > 1 {
                    let target = (**open[0]).clone();
                    let mut rest = Polynomial::one();
                    for x in &block {
                        if **x != target {
                            rest = &rest - &Polynomial::var((*x).clone());
                        }
                    }
                    out.insert(target, rest);
                }
            }
        }
        out
    }

    /// Every binding implied by the spec, fully resolved.
    pub fn bindings(&self, mid: &Mid) -> Result<BTreeMap<Indeterminate, Polynomial>> {
        let mut all: BTreeMap<Indeterminate, Polynomial> =
            self.numeric.iter().map(|(x, v)| (x.clone(), Polynomial::constant(v.clone()))).collect();
        for (x, p) in &self.relations {
            if all.insert(x.clone(), p.clone()).is_some() {
                return Err(Error::Invalid(format!("{x} is both numeric and related")));
            }
        }
        for (x, p) in self.completions(mid) {
            all.entry(x).or_insert(p);
        }
        resolve_bindings(&all)
    }

    /// The numeric values of every bound indeterminate that resolves to a constant.
    pub fn to_numeric(&self, mid: &Mid) -> Result<NumericSpec> {
        let values = self
            .bindings(mid)?
            .into_iter()
            .filter_map(|(x, p)| p.as_constant().map(|c| (x, c)))
            .collect();
        Ok(NumericSpec::new(values))
    }
}

/// Substitutes the spec into every entry.
pub fn apply_spec(mid: &Mid, vec: &EUVector, spec: &SubstitutionSpec) -> Result<EUVector> {
    if spec.is_empty() {
        return Ok(vec.clone());
    }
    let b = spec.bindings(mid)?;
    Ok(vec.map(|p| p.substitute_resolved(&b)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionRow {
    /// `(label, value)` of the observed configuration, highest label first.
    pub observed: Vec<(usize, usize)>,
    /// EU of each action.
    pub values: Vec<Rational>,
    pub best: usize,
    pub best_value: Rational,
    pub runner_up: Option<Rational>,
    pub margin: Rational,
}

/// The vector right before decision `d` is resolved.
pub fn entering_vector(mid: &Mid, policy: &Policy, d: usize) -> Result<EUVector> {
    let trace = symbolic_eu_until(mid, policy, d + 1)?;
    let mut v = trace.vectors[&(d + 1)].clone();
    if let Some(l) = mid.utility_at(d) {
        v = eu_multisum(mid, &v, l)?.0;
    }
    Ok(v)
}

/// EU of each action of decision `d` (position) given the observed
/// `(label, value)` pairs, labelled `Yd=a`.
pub fn decision_alternatives(
    mid: &Mid,
    spec: &SubstitutionSpec,
    policy: &Policy,
    d: usize,
    observed: &[(usize, usize)],
) -> Result<Vec<(String, Polynomial)>> {
    if d == 0 || d > mid.n() || !mid.is_decision(d) {
        return Err(Error::Evaluation(format!("position {d} is not a decision")));
    }
    let v = apply_spec(mid, &entering_vector(mid, policy, d)?, spec)?;
    (0..mid.card(d))
        .map(|a| {
            let vals = v
                .scope
                .iter()
                .map(|&p| {
                    if p == d {
                        return Ok(a);
                    }
                    let x = observed
                        .iter()
                        .find(|(l, _)| *l == mid.label(p))
                        .map(|o| o.1)
                        .ok_or_else(|| Error::Invalid(format!("no value given for {}", mid.name(p))))?;
                    if x >= mid.card(p) {
                        return Err(Error::Invalid(format!("value {x} out of range for {}", mid.name(p))));
                    }
                    Ok(x)
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok((format!("{}={a}", mid.name(d)), v.entry_at(mid, &vals).clone()))
        })
        .collect()
}

/// Best action per observed configuration at decision `d` (position).
pub fn preferred_action_table(
    mid: &Mid,
    spec: &SubstitutionSpec,
    policy: &Policy,
    d: usize,
) -> Result<Vec<ActionRow>> {
    if !mid.is_decision(d) {
        return Err(Error::Evaluation(format!("{} is not a decision", mid.name(d))));
    }
    let v = apply_spec(mid, &entering_vector(mid, policy, d)?, spec)?;
    let mut values = Vec::with_capacity(v.len());
    for p in &v.entries {
        let c = p
            .as_constant()
            .ok_or_else(|| Error::Incomplete(p.indeterminates().iter().map(|x| x.to_string()).collect()))?;
        values.push(c);
    }
    let r = mid.card(d);
    let domain = mid.comp_b(d);
    let cards = mid.cards(&domain);
    let observed_of = |idx: usize| {
        let vals = config::decode(&cards, idx);
        let mut o: Vec<(usize, usize)> = domain.iter().zip(vals).map(|(p, x)| (mid.label(*p), x)).collect();
        o.reverse();
        o
    };
    let blocks: Vec<Vec<Rational>> = if v.scope.last() == Some(&d) {
        values.chunks(r).map(|b| (0..r).map(|a| b[r - 1 - a].clone()).collect()).collect()
    } else {
        values.iter().map(|x| vec![x.clone(); r]).collect()
    };
    Ok(blocks
        .into_iter()
        .enumerate()
        .map(|(idx, vals)| {
            let mut best = 0;
            for a in 1..r {
                if vals[a] > vals[best] {
                    best = a;
                }
            }
            let runner_up = (0..r).filter(|&a| a != best).map(|a| vals[a].clone()).max();
            let margin = runner_up.as_ref().map_or(Rational::zero(), |ru| &vals[best] - ru);
            ActionRow { observed: observed_of(idx), best_value: vals[best].clone(), values: vals, best, runner_up, margin }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axis {
    pub var: Indeterminate,
    pub lo: Rational,
    pub hi: Rational,
    pub steps: usize,
}

impl Axis {
    fn check(&self) -> Result<()> {
        if self.lo >= self.hi {
            return Err(Error::Invalid(format!("axis {}: lo must be below hi", self.var)));
        }
        if self.steps == 0 {
            return Err(Error::Invalid(format!("axis {}: steps must be positive", self.var)));
        }
        Ok(())
    }

    fn width(&self) -> Rational {
        (&self.hi - &self.lo) / Rational::from_integer(self.steps.into())
    }

    /// Center of cell `k`.
    pub fn center(&self, k: usize) -> Rational {
        &self.lo + self.width() * (Rational::from_integer(k.into()) + Rational::new(1.into(), 2.into()))
    }

    /// Grid vertex `k` in `0..=steps`.
    pub fn vertex(&self, k: usize) -> Rational {
        &self.lo + self.width() * Rational::from_integer(k.into())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Best(usize),
    Indifferent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub index: Vec<usize>,
    pub point: Vec<Rational>,
    pub values: Vec<Rational>,
    pub class: Classification,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionGrid {
    pub axes: Vec<Axis>,
    pub labels: Vec<String>,
    pub cells: Vec<Cell>,
}

fn check_axes(axes: &[Axis]) -> Result<()> {
    if axes.is_empty() || axes.len() > 3 {
        return Err(Error::Invalid("between one and three axes are supported".into()));
    }
    axes.iter().try_for_each(Axis::check)
}

fn eval_at(p: &Polynomial, axes: &[Axis], point: &[Rational]) -> Result<Rational> {
    let map: BTreeMap<Indeterminate, Rational> =
        axes.iter().zip(point).map(|(a, v)| (a.var.clone(), v.clone())).collect();
    p.eval_map(&map)
}

fn classify(values: &[Rational]) -> Classification {
    let mut best = 0;
    for k in 1..values.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    if values.iter().enumerate().any(|(k, v)| k != best && *v == values[best]) {
        Classification::Indifferent
    } else {
        Classification::Best(best)
    }
}

fn grid_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &d in dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..d).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

/// Classifies every cell center by the best alternative.
pub fn admissible_grid(alternatives: &[(String, Polynomial)], axes: &[Axis]) -> Result<RegionGrid> {
    check_axes(axes)?;
    if alternatives.is_empty() {
        return Err(Error::Invalid("no alternatives to compare".into()));
    }
    let dims: Vec<usize> = axes.iter().map(|a| a.steps).collect();
    let mut cells = Vec::new();
    for index in grid_indices(&dims) {
        let point: Vec<Rational> = index.iter().zip(axes).map(|(&k, a)| a.center(k)).collect();
        let values = alternatives
            .iter()
            .map(|(_, p)| eval_at(p, axes, &point))
            .collect::<Result<Vec<_>>>()?;
        let class = classify(&values);
        cells.push(Cell { index, point, values, class });
    }
    Ok(RegionGrid { axes: axes.to_vec(), labels: alternatives.iter().map(|a| a.0.clone()).collect(), cells })
}

impl RegionGrid {
    /// Classifications at the centers of the `2^d` sub-cells of `cell`.
    pub fn subcell_classes(&self, alternatives: &[(String, Polynomial)], cell: &Cell) -> Result<Vec<Classification>> {
        let quarter: Vec<Rational> =
            self.axes.iter().map(|a| a.width() / Rational::from_integer(4.into())).collect();
        let mut out = Vec::new();
        for signs in grid_indices(&vec![2; self.axes.len()]) {
            let point: Vec<Rational> = cell
                .point
                .iter()
                .zip(&signs)
                .zip(&quarter)
                .map(|((c, s), q)| if *s == 0 { c - q } else { c + q })
                .collect();
            let values = alternatives
                .iter()
                .map(|(_, p)| eval_at(p, &self.axes, &point))
                .collect::<Result<Vec<_>>>()?;
            out.push(classify(&values));
        }
        Ok(out)
    }

    pub fn cell_at(&self, index: &[usize]) -> Option<&Cell> {
        self.cells.iter().find(|c| c.index == index)
    }

    /// Tab-separated table: axis values, label, then one EU column per alternative.
    pub fn to_table(&self, places: usize) -> String {
        let mut out = String::new();
        let mut head: Vec<String> = self.axes.iter().map(|a| a.var.to_string()).collect();
        head.push("preferred".into());
        head.extend(self.labels.iter().cloned());
        out.push_str(&head.join("\t"));
        out.push('\n');
        for c in &self.cells {
            let mut row: Vec<String> = c.point.iter().map(|v| format_decimal(v, places)).collect();
            row.push(match &c.class {
                Classification::Best(k) => self.labels[*k].clone(),
                Classification::Indifferent => "indifferent".into(),
            });
            row.extend(c.values.iter().map(|v| format_decimal(v, places)));
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Crossing {
    pub point: Vec<Rational>,
    /// Axis along which the crossing edge runs.
    pub axis: usize,
    pub degenerate: bool,
}

/// Sign changes of `diff` along grid edges, linearly interpolated.
pub fn indifference_samples(diff: &Polynomial, axes: &[Axis]) -> Result<Vec<Crossing>> {
    check_axes(axes)?;
    let degenerate = diff.is_zero();
    let dims: Vec<usize> = axes.iter().map(|a| a.steps + 1).collect();
    let vertex = |idx: &[usize]| -> Vec<Rational> { idx.iter().zip(axes).map(|(&k, a)| a.vertex(k)).collect() };
    let mut values: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
    for idx in grid_indices(&dims) {
        let v = eval_at(diff, axes, &vertex(&idx))?;
        values.insert(idx, v);
    }
    let mut out = Vec::new();
    let mut seen: BTreeSet<Vec<Rational>> = BTreeSet::new();
    for (idx, v0) in &values {
        for axis in 0..axes.len() {
            if idx[axis] + 1 >= dims[axis] {
                continue;
            }
            let mut next = idx.clone();
            next[axis] += 1;
            let v1 = &values[&next];
            let (p0, p1) = (vertex(idx), vertex(&next));
            let point = if degenerate {
                Some(p0.iter().zip(&p1).map(|(a, b)| (a + b) / Rational::from_integer(2.into())).collect())
            } else if v0.is_zero() {
                Some(p0)
            } else if v1.is_zero() {
                Some(p1)
            } else if v0.is_positive() != v1.is_positive() {
                let t = v0 / (v0 - v1);
                Some(p0.iter().zip(&p1).map(|(a, b)| a + (b - a) * &t).collect())
            } else {
                None
            };
            if let Some(point) = point {
                if degenerate || seen.insert(point.clone()) {
                    out.push(Crossing { point, axis, degenerate });
                }
            }
        }
    }
    Ok(out)
}
