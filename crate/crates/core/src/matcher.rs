//! Order-preserving k-best matching between two symbol sequences, and the
//! exhaustive enumerator used to check it.

use std::cmp::Ordering;
use std::rc::Rc;

use crate::coding::CostModel;
use crate::error::{Error, Result};
use crate::pattern::Symbol;

/// Gains closer than this are treated as equal when ranking.
pub const GAIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatch {
    pub pairs: Vec<(usize, usize)>,
    pub gain: f64,
}

impl PairwiseMatch {
    pub fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            gain: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn transpose(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(l, r)| (r, l)).collect(),
            gain: self.gain,
        }
    }
}

/// Higher gain first. Gains are snapped to a `GAIN_EPS` grid so that the
/// comparison stays a total order (sorts rely on that) while rounding noise
/// from different summation orders compares equal.
pub fn cmp_gain(a: f64, b: f64) -> Ordering {
    gain_key(b).cmp(&gain_key(a))
}

pub fn gain_key(g: f64) -> i64 {
    (g / GAIN_EPS).round() as i64
}

/// Ranking of matches: higher gain first, then more pairs, then the
/// lexicographically smaller pair list.
pub fn match_order(a: &PairwiseMatch, b: &PairwiseMatch) -> Ordering {
    cmp_gain(a.gain, b.gain)
        .then_with(|| b.pairs.len().cmp(&a.pairs.len()))
        .then_with(|| a.pairs.cmp(&b.pairs))
}

/// True iff `pairs` is an order-preserving equal-symbol matching.
pub fn is_legal(left: &[Symbol], right: &[Symbol], pairs: &[(usize, usize)]) -> bool {
    pairs
        .iter()
        .all(|&(l, r)| l < left.len() && r < right.len() && left[l] == right[r])
        && pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1)
}

// persistent list so suffix matchings are shared between DP cells
struct Node {
    pair: (usize, usize),
    next: Chain,
}

#[derive(Clone)]
struct Chain {
    head: Option<Rc<Node>>,
    gain: f64,
    len: usize,
}

impl Chain {
    fn empty() -> Self {
        Chain {
            head: None,
            gain: 0.0,
            len: 0,
        }
    }

    fn push(&self, pair: (usize, usize), cost: f64) -> Self {
        Chain {
            head: Some(Rc::new(Node {
                pair,
                next: self.clone(),
            })),
            gain: cost + self.gain,
            len: self.len + 1,
        }
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut cur = self.head.as_deref();
        std::iter::from_fn(move || {
            let n = cur?;
            cur = n.next.head.as_deref();
            Some(n.pair)
        })
    }

    fn order(&self, other: &Chain) -> Ordering {
        cmp_gain(self.gain, other.gain)
            .then_with(|| other.len.cmp(&self.len))
            .then_with(|| self.pairs().cmp(other.pairs()))
    }

    fn to_match(&self) -> PairwiseMatch {
        PairwiseMatch {
            pairs: self.pairs().collect(),
            gain: self.gain,
        }
    }
}

fn merge(a: &[Chain], b: &[Chain], k: usize) -> Vec<Chain> {
    let mut out = Vec::with_capacity(k.min(a.len() + b.len()));
    let (mut i, mut j) = (0, 0);
    while out.len() < k && (i < a.len() || j < b.len()) {
        let take_a = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.order(y) != Ordering::Greater,
            (Some(_), None) => true,
            _ => false,
        };
        if take_a {
            out.push(a[i].clone());
            i += 1;
        } else {
            out.push(b[j].clone());
            j += 1;
        }
    }
    out
}

/// Up to `k` distinct matchings in ranking order; the first has maximal gain.
///
/// Every matching is identified by its first pair, which splits the suffix
/// problem at `(i, j)` into disjoint parts: matchings whose first pair uses
/// left index `i` (`starts`), and those that skip `i` altogether (`all` of
/// row `i + 1`). Runs in `O(|left| * |right| * k)`.
pub fn pairwise_match_kbest(
    left: &[Symbol],
    right: &[Symbol],
    model: &CostModel,
    k: usize,
) -> Vec<PairwiseMatch> {
    let k = k.max(1);
    let (n, m) = (left.len(), right.len());
    let base = vec![Chain::empty()];
    // all[j] for the row below (i + 1); starts is rebuilt per row
    let mut below: Vec<Vec<Chain>> = vec![base.clone(); m + 1];
    for i in (0..n).rev() {
        let cost = model.cost(left[i]);
        let mut row: Vec<Vec<Chain>> = vec![Vec::new(); m + 1];
        row[m] = base.clone();
        let mut starts: Vec<Chain> = Vec::new();
        for j in (0..m).rev() {
            if left[i] == right[j] {
                let here: Vec<Chain> = below[j + 1].iter().map(|c| c.push((i, j), cost)).collect();
                starts = merge(&here, &starts, k);
            }
            row[j] = merge(&starts, &below[j], k);
        }
        below = row;
    }
    below[0].iter().map(Chain::to_match).collect()
}

pub const ORACLE_MAX_LEN: usize = 10;

/// Every order-preserving equal-symbol matching, sorted by [`match_order`].
pub fn brute_force_match(
    left: &[Symbol],
    right: &[Symbol],
    model: &CostModel,
) -> Result<Vec<PairwiseMatch>> {
    if left.len() > ORACLE_MAX_LEN || right.len() > ORACLE_MAX_LEN {
        return Err(Error::OracleSize(format!(
            "sequences of length {} and {} exceed {ORACLE_MAX_LEN}",
            left.len(),
            right.len()
        )));
    }
    fn walk(
        left: &[Symbol],
        right: &[Symbol],
        i: usize,
        j_min: usize,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == left.len() {
            out.push(cur.clone());
            return;
        }
        walk(left, right, i + 1, j_min, cur, out);
        for j in j_min..right.len() {
            if left[i] == right[j] {
                cur.push((i, j));
                walk(left, right, i + 1, j + 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut all = Vec::new();
    walk(left, right, 0, 0, &mut Vec::new(), &mut all);
    let mut out: Vec<PairwiseMatch> = all
        .into_iter()
        .map(|pairs| {
            let gain = pairs.iter().map(|&(l, _)| model.cost(left[l])).sum();
            PairwiseMatch { pairs, gain }
        })
        .collect();
    out.sort_by(match_order);
    Ok(out)
}
