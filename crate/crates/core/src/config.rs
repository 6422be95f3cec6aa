//! Configuration indexing over ordered index sets.
//!
//! A vector indexed by the configurations of a scope lists them with the
//! highest position varying fastest and every coordinate running from
//! `r - 1` down to `0`.

/// Number of configurations of a scope with the given cardinalities.
pub fn size(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// Values of the scope variables at configuration index `idx`.
pub fn decode(cards: &[usize], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for k in (0..cards.len()).rev() {
        let digit = idx % cards[k];
        idx /= cards[k];
        out[k] = cards[k] - 1 - digit;
    }
    out
}

/// Index of the configuration with the given values.
pub fn encode(cards: &[usize], values: &[usize]) -> usize {
    let mut idx = 0;
    for (r, v) in cards.iter().zip(values) {
        idx = idx * r + (r - 1 - v);
    }
    idx
}

/// All configurations in index order.
pub fn all(cards: &[usize]) -> Vec<Vec<usize>> {
    (0..size(cards)).map(|i| decode(cards, i)).collect()
}

/// For every configuration of `to`, the index of its projection onto `from`.
/// Both scopes are ascending position lists and `from` must be a subset of `to`.
pub fn projection(to: &[usize], to_cards: &[usize], from: &[usize]) -> Vec<usize> {
    let from_cards: Vec<usize> = from
        .iter()
        .map(|v| to_cards[to.iter().position(|t| t == v).expect("projection onto a non-subset")])
        .collect();
    let slots: Vec<usize> = from.iter().map(|v| to.iter().position(|t| t == v).unwrap()).collect();
    (0..size(to_cards))
        .map(|i| {
            let vals = decode(to_cards, i);
            let sub: Vec<usize> = slots.iter().map(|&s| vals[s]).collect();
            encode(&from_cards, &sub)
        })
        .collect()
}

pub fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_runs_high_to_low_with_last_fastest() {
        assert_eq!(all(&[2, 2]), vec![vec![1, 1], vec![1, 0], vec![0, 1], vec![0, 0]]);
        for i in 0..12 {
            assert_eq!(encode(&[3, 2, 2], &decode(&[3, 2, 2], i)), i);
        }
    }

    #[test]
    fn projection_replicates() {
        // scope {4,6} inside {4,5,6}
        assert_eq!(projection(&[4, 5, 6], &[2, 2, 2], &[4, 6]), vec![0, 1, 0, 1, 2, 3, 2, 3]);
        assert_eq!(projection(&[4, 6], &[2, 2], &[]), vec![0, 0, 0, 0]);
    }
}
