//! Sparse multivariate polynomials with exact rational coefficients over
//! diagram indeterminates.
//!
//! Indeterminates are ordered by variant (`h` < `k` < `psi` < `p`), then by
//! node label, then by their value tuple with larger values first. Monomials
//! are ordered by total degree and then lexicographically by their factors;
//! a [`Polynomial`] keeps its terms in that order, so structural equality is
//! canonical equality and the textual rendering is reproducible.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rational, Rational};

/// `(node label, value)` pairs listed with strictly decreasing labels.
pub type Config = Vec<(usize, usize)>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Indeterminate {
    /// Interaction constant `h`.
    Interaction,
    /// Criterion weight `k_j`.
    Weight(usize),
    /// Utility `psi_{j, config}`.
    UtilParam { j: usize, config: Config },
    /// Transition probability `p_{i y parents}`; `gen` counts reparametrizations.
    ProbParam { i: usize, y: usize, parents: Config, gen: u32 },
}

impl Indeterminate {
    pub fn prob(i: usize, y: usize, parents: Config) -> Self {
        Indeterminate::ProbParam { i, y, parents, gen: 0 }
    }

    pub fn util(j: usize, config: Config) -> Self {
        Indeterminate::UtilParam { j, config }
    }

    fn rank(&self) -> u8 {
        match self {
            Indeterminate::Interaction => 0,
            Indeterminate::Weight(_) => 1,
            Indeterminate::UtilParam { .. } => 2,
            Indeterminate::ProbParam { .. } => 3,
        }
    }

    fn node(&self) -> usize {
        match self {
            Indeterminate::Interaction => 0,
            Indeterminate::Weight(j) | Indeterminate::UtilParam { j, .. } => *j,
            Indeterminate::ProbParam { i, .. } => *i,
        }
    }

    fn value_key(&self) -> Vec<usize> {
        match self {
            Indeterminate::UtilParam { config, .. } => config.iter().map(|c| c.1).collect(),
            Indeterminate::ProbParam { y, parents, .. } => {
                std::iter::once(*y).chain(parents.iter().map(|c| c.1)).collect()
            }
            _ => Vec::new(),
        }
    }

    fn config_labels(&self) -> Vec<usize> {
        match self {
            Indeterminate::UtilParam { config, .. } => config.iter().map(|c| c.0).collect(),
            Indeterminate::ProbParam { parents, .. } => parents.iter().map(|c| c.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Variable assignments implied by the indices of this indeterminate.
    pub fn annotations(&self) -> Vec<(usize, usize)> {
        match self {
            Indeterminate::UtilParam { config, .. } => config.clone(),
            Indeterminate::ProbParam { i, y, parents, .. } => {
                let mut v = vec![(*i, *y)];
                v.extend(parents.iter().copied());
                v
            }
            _ => Vec::new(),
        }
    }

    pub fn is_probability(&self) -> bool {
        matches!(self, Indeterminate::ProbParam { .. })
    }
}

impl Ord for Indeterminate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank()
            .cmp(&other.rank())
            .then_with(|| self.node().cmp(&other.node()))
            .then_with(|| match (self, other) {
                (
                    Indeterminate::ProbParam { gen: a, .. },
                    Indeterminate::ProbParam { gen: b, .. },
                ) => a.cmp(b),
                _ => Ordering::Equal,
            })
            .then_with(|| other.value_key().cmp(&self.value_key()))
            .then_with(|| self.config_labels().cmp(&other.config_labels()))
    }
}

impl PartialOrd for Indeterminate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn write_indices(f: &mut fmt::Formatter<'_>, head: usize, primes: u32, values: &[usize]) -> fmt::Result {
    let compact = head < 10 && values.iter().all(|v| *v < 10);
    write!(f, "{head}")?;
    for _ in 0..primes {
        f.write_str("'")?;
    }
    for v in values {
        if compact {
            write!(f, "{v}")?;
        } else {
            write!(f, "_{v}")?;
        }
    }
    Ok(())
}

impl fmt::Display for Indeterminate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Indeterminate::Interaction => f.write_str("h"),
            Indeterminate::Weight(j) => write!(f, "k{j}"),
            Indeterminate::UtilParam { j, .. } => {
                f.write_str("psi")?;
                write_indices(f, *j, 0, &self.value_key())
            }
            Indeterminate::ProbParam { i, gen, .. } => {
                f.write_str("p")?;
                write_indices(f, *i, *gen, &self.value_key())
            }
        }
    }
}

/// Exponent map of a monomial, without its coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial {
    degree: u32,
    factors: Vec<(Indeterminate, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn var(x: Indeterminate) -> Self {
        Monomial { degree: 1, factors: vec![(x, 1)] }
    }

    pub fn from_factors(iter: impl IntoIterator<Item = (Indeterminate, u32)>) -> Self {
        let mut map: BTreeMap<Indeterminate, u32> = BTreeMap::new();
        for (x, e) in iter {
            if e > 0 {
                *map.entry(x).or_insert(0) += e;
            }
        }
        let factors: Vec<_> = map.into_iter().collect();
        let degree = factors.iter().map(|f| f.1).sum();
        Monomial { degree, factors }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn factors(&self) -> &[(Indeterminate, u32)] {
        &self.factors
    }

    pub fn is_square_free(&self) -> bool {
        self.factors.iter().all(|f| f.1 == 1)
    }

    pub fn exponent(&self, x: &Indeterminate) -> u32 {
        self.factors
            .binary_search_by(|f| f.0.cmp(x))
            .map(|k| self.factors[k].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.factors, &other.factors);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial { degree: self.degree + other.degree, factors: out }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (k, (x, e)) in self.factors.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            write!(f, "{x}")?;
            if *e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// Degree histogram of a polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Default, serde::Serialize)]
pub struct StructureSummary {
    pub entries: BTreeMap<u32, DegreeClass>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct DegreeClass {
    pub count: usize,
    pub square_free: bool,
}

impl StructureSummary {
    pub fn total(&self) -> usize {
        self.entries.values().map(|c| c.count).sum()
    }

    /// `(degree, count)` pairs in increasing degree.
    pub fn histogram(&self) -> Vec<(u32, usize)> {
        self.entries.iter().map(|(d, c)| (*d, c.count)).collect()
    }

    pub fn from_counts(counts: &[(u32, usize, bool)]) -> Self {
        let mut s = StructureSummary::default();
        for &(d, c, sf) in counts {
            if c > 0 {
                s.entries.insert(d, DegreeClass { count: c, square_free: sf });
            }
        }
        s
    }
}

impl fmt::Display for StructureSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (d, c)) in self.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{d}:{}{}", c.count, if c.square_free { "" } else { "*" })?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn one() -> Self {
        Polynomial::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(x: Indeterminate) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::var(x), Rational::one());
        p
    }

    pub fn from_terms(iter: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = Polynomial::zero();
        for (m, c) in iter {
            p.add_term(m, c);
        }
        p
    }

    /// Adds `c * m`, merging like terms and dropping zeros.
    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of monomials.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.degree == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree).max()
    }

    pub fn indeterminates(&self) -> BTreeSet<Indeterminate> {
        self.terms
            .keys()
            .flat_map(|m| m.factors.iter().map(|f| f.0.clone()))
            .collect()
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial { terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect() }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial::from_terms(self.terms.iter().map(|(k, v)| (k.mul(m), v * c)))
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Keeps only the terms whose monomial satisfies `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&Monomial) -> bool) {
        self.terms.retain(|m, _| keep(m));
    }

    pub fn structure_summary(&self) -> StructureSummary {
        let mut s = StructureSummary::default();
        for m in self.terms.keys() {
            let e = s
                .entries
                .entry(m.degree)
                .or_insert(DegreeClass { count: 0, square_free: true });
            e.count += 1;
            e.square_free &= m.is_square_free();
        }
        s
    }

    pub fn is_square_free(&self) -> bool {
        self.terms.keys().all(Monomial::is_square_free)
    }

    /// Replaces bound indeterminates by their (recursively resolved) bindings.
    pub fn substitute(&self, bindings: &BTreeMap<Indeterminate, Polynomial>) -> Result<Polynomial> {
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        let resolved = resolve_bindings(bindings)?;
        Ok(self.substitute_resolved(&resolved))
    }

    /// Substitution with bindings that are already free of bound indeterminates.
    pub fn substitute_resolved(&self, resolved: &BTreeMap<Indeterminate, Polynomial>) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut kept = Vec::new();
            let mut acc = Polynomial::constant(c.clone());
            for (x, e) in &m.factors {
                match resolved.get(x) {
                    Some(b) => acc = &acc * &b.pow(*e),
                    None => kept.push((x.clone(), *e)),
                }
                if acc.is_zero() {
                    break;
                }
            }
            if acc.is_zero() {
                continue;
            }
            let rest = Monomial::from_factors(kept);
            for (k, v) in acc.terms {
                out.add_term(k.mul(&rest), v);
            }
        }
        out
    }

    /// Evaluates with numeric values; unknown indeterminates are reported.
    pub fn eval(&self, value: &dyn Fn(&Indeterminate) -> Option<Rational>) -> Result<Rational> {
        let mut missing = BTreeSet::new();
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, e) in &m.factors {
                match value(x) {
                    Some(v) => {
                        for _ in 0..*e {
                            t *= &v;
                        }
                    }
                    None => {
                        missing.insert(x.to_string());
                    }
                }
            }
            total += t;
        }
        if missing.is_empty() {
            Ok(total)
        } else {
            Err(Error::Incomplete(missing.into_iter().collect()))
        }
    }

    pub fn eval_map(&self, values: &BTreeMap<Indeterminate, Rational>) -> Result<Rational> {
        self.eval(&|x| values.get(x).cloned())
    }
}

/// Expands every binding until no bound indeterminate remains; rejects cycles.
pub fn resolve_bindings(
    bindings: &BTreeMap<Indeterminate, Polynomial>,
) -> Result<BTreeMap<Indeterminate, Polynomial>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit(
        x: &Indeterminate,
        bindings: &BTreeMap<Indeterminate, Polynomial>,
        marks: &mut BTreeMap<Indeterminate, Mark>,
        out: &mut BTreeMap<Indeterminate, Polynomial>,
    ) -> Result<()> {
        match marks.get(x) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => return Err(Error::CyclicBinding(x.to_string())),
            None => {}
        }
        marks.insert(x.clone(), Mark::Active);
        let body = &bindings[x];
        for y in body.indeterminates() {
            if bindings.contains_key(&y) {
                visit(&y, bindings, marks, out)?;
            }
        }
        let expanded = body.substitute_resolved(out);
        out.insert(x.clone(), expanded);
        marks.insert(x.clone(), Mark::Done);
        Ok(())
    }
    let mut marks = BTreeMap::new();
    let mut out = BTreeMap::new();
    for x in bindings.keys() {
        visit(x, bindings, &mut marks, &mut out)?;
    }
    Ok(out)
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c < &Rational::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if m.degree == 0 {
                f.write_str(&format_rational(&mag))?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", format_rational(&mag))?;
            }
        }
        Ok(())
    }
}

impl<'a> Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &'a Polynomial) -> Polynomial {
        let (big, small) = if self.len() >= rhs.len() { (self, rhs) } else { (rhs, self) };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<'a> Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &'a Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl<'a> Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &'a Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

impl From<Indeterminate> for Polynomial {
    fn from(x: Indeterminate) -> Self {
        Polynomial::var(x)
    }
}

impl From<Rational> for Polynomial {
    fn from(c: Rational) -> Self {
        Polynomial::constant(c)
    }
}

pub fn add(a: &Polynomial, b: &Polynomial) -> Polynomial {
    a + b
}

pub fn mul(a: &Polynomial, b: &Polynomial) -> Polynomial {
    a * b
}

pub fn substitute(p: &Polynomial, bindings: &BTreeMap<Indeterminate, Polynomial>) -> Result<Polynomial> {
    p.substitute(bindings)
}

pub fn structure_summary(p: &Polynomial) -> StructureSummary {
    p.structure_summary()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn p(i: usize, y: usize, parents: &[(usize, usize)]) -> Indeterminate {
        Indeterminate::prob(i, y, parents.to_vec())
    }

    #[test]
    fn ordering_and_rendering() {
        let mut xs = vec![
            p(6, 0, &[(5, 1), (4, 1)]),
            Indeterminate::util(3, vec![(6, 1), (4, 1)]),
            p(6, 1, &[(5, 1), (4, 1)]),
            Indeterminate::Weight(3),
            Indeterminate::Interaction,
            Indeterminate::util(2, vec![(5, 0)]),
        ];
        xs.sort();
        let names: Vec<_> = xs.iter().map(|x| x.to_string()).collect();
        assert_eq!(names, ["h", "k3", "psi20", "psi311", "p6111", "p6011"]);
    }

    #[test]
    fn like_terms_merge_and_cancel() {
        let x = Polynomial::var(Indeterminate::Weight(1));
        assert_eq!((&x + &x).to_string(), "2*k1");
        assert!((&x - &x).is_zero());
        let c = Polynomial::constant(int(5));
        assert_eq!(c.structure_summary().histogram(), vec![(0, 1)]);
        assert_eq!(Polynomial::zero().structure_summary().total(), 0);
    }

    #[test]
    fn cyclic_bindings_rejected() {
        let a = Indeterminate::Weight(1);
        let b = Indeterminate::Weight(2);
        let mut bind = BTreeMap::new();
        bind.insert(a.clone(), Polynomial::var(b.clone()));
        bind.insert(b.clone(), Polynomial::var(a.clone()));
        assert!(matches!(Polynomial::var(a).substitute(&bind), Err(Error::CyclicBinding(_))));
    }

    #[test]
    fn relation_creates_square() {
        let a = p(5, 1, &[(4, 1), (3, 1)]);
        let b = p(6, 0, &[(5, 1), (4, 1)]);
        let poly = &Polynomial::var(a.clone()) * &Polynomial::var(b.clone());
        let mut bind = BTreeMap::new();
        bind.insert(b, Polynomial::var(a.clone()));
        let out = poly.substitute(&bind).unwrap();
        assert_eq!(out.to_string(), "p5111^2");
        assert!(!out.is_square_free());
        let v = out.eval(&|_| Some(ratio(1, 2))).unwrap();
        assert_eq!(v, ratio(1, 4));
    }
}
