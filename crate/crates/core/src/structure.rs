//! Closed-form predictions of EU polynomial structure and operation cost.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eu::{EUVector, OpKind};
use crate::mid::Mid;
use crate::poly::StructureSummary;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PredictedTerm {
    pub a: usize,
    pub b: usize,
    pub count: u128,
    pub degree: u32,
    /// Exponent of `h` in these monomials.
    pub h_exponent: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructurePrediction {
    pub stage: usize,
    pub dimension: usize,
    pub terms: Vec<PredictedTerm>,
    pub additive: bool,
}

impl StructurePrediction {
    /// Per-entry degree histogram implied by the terms.
    pub fn summary(&self) -> StructureSummary {
        let mut counts: std::collections::BTreeMap<u32, (usize, bool)> = Default::default();
        for t in &self.terms {
            let e = counts.entry(t.degree).or_insert((0, true));
            e.0 += t.count as usize;
            e.1 &= t.h_exponent <= 1;
        }
        let flat: Vec<(u32, usize, bool)> = counts.into_iter().map(|(d, (c, s))| (d, c, s)).collect();
        StructureSummary::from_counts(&flat)
    }

    /// Monomials per entry.
    pub fn monomials(&self) -> u128 {
        self.terms.iter().map(|t| t.count).sum()
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, t| acc * (n - t) as u128 / (t + 1) as u128)
}

fn chance_between(mid: &Mid, lo: usize, hi: usize) -> (u128, u32) {
    (lo..=hi)
        .filter(|&p| mid.is_chance(p))
        .fold((1u128, 0u32), |(r, w), p| (r * mid.card(p) as u128, w + 1))
}

/// Structure of every entry of `Ū_i` for a symmetric diagram.
pub fn predicted_structure(mid: &Mid, i: usize, additive: bool) -> Result<StructurePrediction> {
    let n = mid.n();
    if i == 0 || i > n + 1 {
        return Err(Error::Evaluation(format!("stage {i} outside 1..={}", n + 1)));
    }
    let order = mid.utility_order();
    let maxima: Vec<usize> = order.iter().map(|&l| mid.utility_max(l)).collect();
    let mut terms = Vec::new();
    if let Some(first) = maxima.iter().position(|&j| j >= i) {
        for a in first..order.len() {
            let (r, w) = chance_between(mid, i, maxima[a]);
            if additive {
                terms.push(PredictedTerm { a: a + 1, b: a + 1, count: r, degree: w + 2, h_exponent: 0 });
                continue;
            }
            for b in first..=a {
                let e = (b - first) as u32;
                terms.push(PredictedTerm {
                    a: a + 1,
                    b: b + 1,
                    count: binomial(a - first, b - first) * r,
                    degree: 3 * e + 2 + w,
                    h_exponent: e,
                });
            }
        }
    }
    Ok(StructurePrediction { stage: i, dimension: mid.dim(i), terms, additive })
}

/// Closed-form scalar multiplication count of an operation at stage `i`.
pub fn multiplication_count(mid: &Mid, i: usize, op: OpKind, additive: bool) -> Result<u128> {
    let next = predicted_structure(mid, i + 1, additive)?;
    let c_next = next.dimension as u128;
    let m_next = next.monomials();
    let b_next = mid.comp_b(i + 1);
    let product = |set: &[usize]| set.iter().map(|&p| mid.card(p) as u128).product::<u128>();
    let multisum = mid.utility_at(i).map(|l| {
        let extra: Vec<usize> =
            mid.utilities[l].parents.iter().copied().filter(|p| !b_next.contains(p)).collect();
        (l, product(&extra))
    });
    match op {
        OpKind::Maximize => Ok(0),
        OpKind::MultiSum(l) => {
            let (fired, t) = multisum.ok_or_else(|| Error::Evaluation(format!("no utility at stage {i}")))?;
            if fired != l {
                return Err(Error::Evaluation(format!("utility {l} is not folded at stage {i}")));
            }
            Ok(c_next * t * (2 + m_next) + 1)
        }
        OpKind::Marginalize => {
            let (c, m, scope) = match multisum {
                Some((l, t)) => {
                    let scope = crate::config::union(&b_next, &mid.utilities[l].parents);
                    (c_next * t, 2 * m_next + 1, scope)
                }
                None => (c_next, m_next, b_next),
            };
            let missing: Vec<usize> = mid.prob_scope(i).into_iter().filter(|p| !scope.contains(p)).collect();
            let s = product(&missing);
            let r = mid.card(i) as u128;
            Ok(c * s * m + (c * s) * (c * s) / r)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub entry: usize,
    pub degree: Option<u32>,
    pub expected: usize,
    pub actual: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Conformance {
    pub stage: usize,
    pub mismatch: Option<Mismatch>,
}

impl Conformance {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none()
    }
}

impl fmt::Display for Conformance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.mismatch {
            None => write!(f, "stage {}: ok", self.stage),
            Some(m) => match m.degree {
                Some(d) => write!(
                    f,
                    "stage {}: entry {} degree {}: expected {} monomials, found {}",
                    self.stage, m.entry, d, m.expected, m.actual
                ),
                None => write!(f, "stage {}: expected {} entries, found {}", self.stage, m.expected, m.actual),
            },
        }
    }
}

/// Compares every entry of `vec` against the prediction.
pub fn check_structure(vec: &EUVector, pred: &StructurePrediction) -> Conformance {
    let stage = pred.stage;
    if vec.len() != pred.dimension {
        return Conformance {
            stage,
            mismatch: Some(Mismatch { entry: 0, degree: None, expected: pred.dimension, actual: vec.len() }),
        };
    }
    let want = pred.summary();
    for (k, entry) in vec.entries.iter().enumerate() {
        let got = entry.structure_summary();
        if got == want {
            continue;
        }
        let degrees: std::collections::BTreeSet<u32> =
            want.entries.keys().chain(got.entries.keys()).copied().collect();
        for d in degrees {
            let e = want.entries.get(&d).map_or(0, |c| c.count);
            let a = got.entries.get(&d).map_or(0, |c| c.count);
            let sf_e = want.entries.get(&d).map(|c| c.square_free);
            let sf_a = got.entries.get(&d).map(|c| c.square_free);
            if e != a || sf_e != sf_a {
                return Conformance {
                    stage,
                    mismatch: Some(Mismatch { entry: k, degree: Some(d), expected: e, actual: a }),
                };
            }
        }
    }
    Conformance { stage, mismatch: None }
}
