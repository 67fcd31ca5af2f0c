//! Beam search over alignments.

use std::cmp::Ordering;
use std::cmp::Reverse;
use std::collections::{HashMap, HashSet};

use crate::alignment::{
    candidate_matches_with, column_ancestors, rank_order, Alignment, CdScore, Column, MatchContext,
};
use crate::coding::CostModel;
use crate::error::{Error, Result};
use crate::matcher::{cmp_gain, gain_key, PairwiseMatch};
use crate::pattern::{PatternStore, Role};

/// Upper bound on branch-and-bound nodes per (alignment, pattern) match.
const MATCH_NODE_LIMIT: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub beam_width: usize,
    pub kbest: usize,
    pub max_cycles: usize,
    /// Rows including the New row.
    pub max_rows: usize,
    pub require_full_new_coverage: bool,
    /// Also run a pass that explains New roughly left to right.
    pub left_to_right: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            beam_width: 50,
            kbest: 10,
            max_cycles: 8,
            max_rows: 12,
            require_full_new_coverage: false,
            left_to_right: true,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beam width", self.beam_width),
            ("kbest", self.kbest),
            ("max rows", self.max_rows),
        ] {
            if v == 0 {
                return Err(Error::Param(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Scored {
    pub alignment: Alignment,
    pub score: CdScore,
    pub canonical: String,
    pub matched: usize,
    pub gratuitous: usize,
    pub surplus: usize,
    pub bindings: usize,
    /// Old ID cells in columns without a New cell.
    pub unlicensed: usize,
    /// Matched columns with a New cell but no Old ID cell.
    pub misread: usize,
}

fn old_content_cells(a: &Alignment, c: &Column, store: &PatternStore) -> usize {
    let pats = store.patterns();
    c.cells
        .iter()
        .filter(|x| x.row > 0 && !pats[a.rows()[x.row]].is_id(x.pos))
        .count()
}

/// Columns where an Old ID cell sits on an Old content cell: a called
/// pattern bound into its caller's slot.
fn bindings(a: &Alignment, store: &PatternStore) -> usize {
    a.columns()
        .iter()
        .filter(|c| a.column_id_cells(c, store) > 0 && old_content_cells(a, c, store) > 0)
        .count()
}

/// Old content cells beyond the first in each column. A parse never stacks
/// two caller slots (or two terminals) on one symbol.
fn surplus(a: &Alignment, store: &PatternStore) -> usize {
    a.columns()
        .iter()
        .map(|c| old_content_cells(a, c, store).saturating_sub(1))
        .sum()
}

/// Old ID cells not supplied by New. Decoding a code, every ID symbol of
/// the source alignment is in the code, so rows beyond those cost nothing
/// yet are not licensed by it.
fn unlicensed_ids(a: &Alignment, store: &PatternStore) -> usize {
    a.columns()
        .iter()
        .filter(|c| !a.column_has_new(c))
        .map(|c| a.column_id_cells(c, store))
        .sum()
}

/// Decoding, every New symbol is a code symbol and so must be read as an
/// ID symbol of some row.
fn misread_code(a: &Alignment, store: &PatternStore) -> usize {
    a.columns()
        .iter()
        .filter(|c| c.is_matched() && a.column_has_new(c) && a.column_id_cells(c, store) == 0)
        .count()
}

fn gratuitous_links(a: &Alignment, store: &PatternStore) -> usize {
    a.columns()
        .iter()
        .filter(|c| c.is_matched() && !a.column_has_new(c) && a.column_id_cells(c, store) == 0)
        .count()
}

/// What the beam is looking for. A parse prefers fewer rows; a decode
/// (rebuilding data from its code) prefers the fuller explanation, so rows
/// that join at no cost are kept rather than pruned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Parse,
    Decode,
}

/// The leading part of the admission order, cheap enough to compute before
/// the canonical form. Keys ranked "more is better" are stored negated.
type QuickKey = (Reverse<i64>, [usize; 5]);

impl Mode {
    fn quick_key(self, score: &CdScore, a: &Alignment, store: &PatternStore) -> QuickKey {
        let gk = Reverse(gain_key(score.cd));
        match self {
            Mode::Parse => (gk, [a.row_count(), gratuitous_links(a, store), 0, 0, 0]),
            Mode::Decode => (
                gk,
                [
                    unlicensed_ids(a, store),
                    misread_code(a, store),
                    gratuitous_links(a, store),
                    surplus(a, store),
                    usize::MAX - bindings(a, store),
                ],
            ),
        }
    }

    fn quick(self, s: &Scored) -> QuickKey {
        let gk = Reverse(gain_key(s.score.cd));
        match self {
            Mode::Parse => (gk, [s.alignment.row_count(), s.gratuitous, 0, 0, 0]),
            Mode::Decode => (
                gk,
                [
                    s.unlicensed,
                    s.misread,
                    s.gratuitous,
                    s.surplus,
                    usize::MAX - s.bindings,
                ],
            ),
        }
    }

    fn admit(self, a: &Scored, b: &Scored) -> Ordering {
        match self {
            Mode::Parse => beam_order(a, b),
            Mode::Decode => decode_order(a, b),
        }
    }
}

/// New positions matched once `m` is applied to `a`.
fn extended_coverage(a: &Alignment, m: &PairwiseMatch) -> Vec<usize> {
    let mut v = a.new_coverage();
    for &(c, _) in &m.pairs {
        let col = &a.columns()[c];
        if col.len() == 1 && a.column_has_new(col) {
            v.push(col.cells[0].pos);
        }
    }
    v.sort_unstable();
    v
}

impl Scored {
    pub fn new(alignment: Alignment, store: &PatternStore, model: &CostModel) -> Self {
        let score = alignment.compression_difference(store, model);
        let canonical = alignment.canonical_text(store);
        let matched = alignment.matched_cells();
        let gratuitous = gratuitous_links(&alignment, store);
        let surplus = surplus(&alignment, store);
        let bindings = bindings(&alignment, store);
        let unlicensed = unlicensed_ids(&alignment, store);
        let misread = misread_code(&alignment, store);
        Self {
            alignment,
            score,
            canonical,
            matched,
            gratuitous,
            surplus,
            bindings,
            unlicensed,
            misread,
        }
    }
}

/// The ranking used for search output.
pub fn total_order(a: &Scored, b: &Scored) -> Ordering {
    rank_order(
        (&a.score, a.alignment.row_count(), a.matched, &a.canonical),
        (&b.score, b.alignment.row_count(), b.matched, &b.canonical),
    )
}

/// Beam admission: like [`total_order`], but among equals an alignment
/// with fewer gratuitous links (matched columns with neither a New nor an
/// ID cell) goes first. Such links cost nothing and explain nothing, and
/// without this patterns lacking ID symbols flood the beam with free copies.
pub fn beam_order(a: &Scored, b: &Scored) -> Ordering {
    cmp_gain(a.score.cd, b.score.cd)
        .then_with(|| a.alignment.row_count().cmp(&b.alignment.row_count()))
        .then_with(|| a.gratuitous.cmp(&b.gratuitous))
        .then_with(|| a.surplus.cmp(&b.surplus))
        .then_with(|| b.bindings.cmp(&a.bindings))
        .then_with(|| total_order(a, b))
}

/// Beam admission when decoding: the link-quality keys of
/// [`retrieval_order`] come before the row count.
fn decode_order(a: &Scored, b: &Scored) -> Ordering {
    cmp_gain(a.score.cd, b.score.cd)
        .then_with(|| a.unlicensed.cmp(&b.unlicensed))
        .then_with(|| a.misread.cmp(&b.misread))
        .then_with(|| a.gratuitous.cmp(&b.gratuitous))
        .then_with(|| a.surplus.cmp(&b.surplus))
        .then_with(|| b.bindings.cmp(&a.bindings))
        .then_with(|| a.alignment.row_count().cmp(&b.alignment.row_count()))
        .then_with(|| total_order(a, b))
}

/// The ranking used to pick a retrieval: more matched cells before fewer
/// rows, so the richest reconstruction wins among equal scores.
pub fn retrieval_order(a: &Scored, b: &Scored) -> Ordering {
    cmp_gain(a.score.cd, b.score.cd)
        .then_with(|| a.unlicensed.cmp(&b.unlicensed))
        .then_with(|| a.misread.cmp(&b.misread))
        .then_with(|| a.gratuitous.cmp(&b.gratuitous))
        .then_with(|| a.surplus.cmp(&b.surplus))
        .then_with(|| b.bindings.cmp(&a.bindings))
        .then_with(|| b.matched.cmp(&a.matched))
        .then_with(|| a.alignment.row_count().cmp(&b.alignment.row_count()))
        .then_with(|| a.canonical.cmp(&b.canonical))
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Best first under [`total_order`].
    pub ranked: Vec<Scored>,
    pub cycles_run: usize,
    pub candidates_examined: usize,
}

impl SearchOutcome {
    pub fn best(&self) -> Option<&Scored> {
        self.ranked.first()
    }
}

/// Starting from New alone, repeatedly extends every alignment newly
/// admitted to the beam with every Old pattern, keeping the `beam_width`
/// best alignments seen so far (plus the best one for each distinct set of
/// matched New symbols). Stops after `max_cycles` or when a cycle admits
/// nothing new.
///
/// With `left_to_right`, a second pass runs in which no pattern may jump
/// over more unmatched New symbols than it has cells of its own in between,
/// which forces New to be explained roughly from left to right; the two
/// passes' alignments are ranked together.
pub fn beam_search(
    store: &PatternStore,
    model: &CostModel,
    params: &SearchParams,
) -> Result<SearchOutcome> {
    search_with(store, model, params, Mode::Parse)
}

pub(crate) fn search_with(
    store: &PatternStore,
    model: &CostModel,
    params: &SearchParams,
    mode: Mode,
) -> Result<SearchOutcome> {
    params.validate()?;
    store.the_new()?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut ranked = Vec::new();
    let mut cycles_run = 0;
    let mut candidates_examined = 0;
    let passes: &[bool] = if params.left_to_right {
        &[false, true]
    } else {
        &[false]
    };
    for &bounded in passes {
        let (pool, cycles, examined) = search_pass(store, model, params, bounded, mode)?;
        cycles_run = cycles_run.max(cycles);
        candidates_examined += examined;
        for s in pool {
            if seen.insert(s.canonical.clone()) {
                ranked.push(s);
            }
        }
    }
    if params.require_full_new_coverage {
        ranked.retain(|s| s.alignment.covers_new());
    }
    ranked.sort_by(total_order);
    Ok(SearchOutcome {
        ranked,
        cycles_run,
        candidates_examined,
    })
}

fn search_pass(
    store: &PatternStore,
    model: &CostModel,
    params: &SearchParams,
    bounded_skips: bool,
    mode: Mode,
) -> Result<(Vec<Scored>, usize, usize)> {
    let olds: Vec<usize> = store
        .patterns()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.role == Role::Old)
        .map(|(i, _)| i)
        .collect();
    let ctx = MatchContext {
        store,
        model,
        k: params.kbest,
        bounded_skips,
        node_limit: MATCH_NODE_LIMIT,
    };

    let start = Scored::new(Alignment::new_only(store)?, store, model);
    let mut seen: HashSet<String> = HashSet::from([start.canonical.clone()]);
    let mut pool = vec![start];
    let mut beam: Vec<usize> = vec![0];
    let mut frontier: Vec<usize> = vec![0];
    let mut cycles_run = 0;
    let mut candidates_examined = 0;
    // a candidate strictly worse than the last beam's cutoff and than the best
    // seen for its New coverage cannot be admitted now or later, since both
    // only improve; skipping it before canonicalizing saves most of the work
    let mut cutoff: Option<QuickKey> = None;
    let mut best_cover: HashMap<Vec<usize>, QuickKey> = HashMap::new();

    while cycles_run < params.max_cycles && !frontier.is_empty() {
        cycles_run += 1;
        for &fi in &frontier {
            if pool[fi].alignment.row_count() >= params.max_rows {
                continue;
            }
            let ancestors = column_ancestors(&pool[fi].alignment);
            for &p in &olds {
                for m in candidate_matches_with(&pool[fi].alignment, &ancestors, p, &ctx) {
                    candidates_examined += 1;
                    // the gain is the exact change in cd, so a clearly worse
                    // extension can be dropped before it is even built
                    if let Some(cut) = cutoff {
                        let k = gain_key(pool[fi].score.cd + m.gain);
                        if k + 2 < cut.0 .0 {
                            let cover = extended_coverage(&pool[fi].alignment, &m);
                            if best_cover.get(&cover).is_some_and(|b| k + 2 < b.0 .0) {
                                continue;
                            }
                        }
                    }
                    let ext = pool[fi].alignment.extend_trusted(store, p, &m)?;
                    if let Some(cut) = cutoff {
                        let key =
                            mode.quick_key(&ext.compression_difference(store, model), &ext, store);
                        if key > cut
                            && best_cover
                                .get(&ext.new_coverage())
                                .is_some_and(|b| key > *b)
                        {
                            continue;
                        }
                    }
                    let scored = Scored::new(ext, store, model);
                    if seen.insert(scored.canonical.clone()) {
                        pool.push(scored);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| mode.admit(&pool[a], &pool[b]));
        // besides the overall best, keep the best alignment for each distinct
        // set of matched New symbols, so that a partial analysis is not lost
        // to higher-scoring ones that have grabbed New symbols it needs later
        best_cover.clear();
        let mut extra = Vec::new();
        for &i in &order {
            if let std::collections::hash_map::Entry::Vacant(e) =
                best_cover.entry(pool[i].alignment.new_coverage())
            {
                e.insert(mode.quick(&pool[i]));
                if extra.len() < params.beam_width {
                    extra.push(i);
                }
            }
        }
        if order.len() >= params.beam_width {
            cutoff = Some(mode.quick(&pool[order[params.beam_width - 1]]));
        }
        order.truncate(params.beam_width);
        let kept: HashSet<usize> = order.iter().copied().collect();
        order.extend(extra.into_iter().filter(|i| !kept.contains(i)));
        let old: HashSet<usize> = beam.iter().copied().collect();
        frontier = order.iter().copied().filter(|i| !old.contains(i)).collect();
        beam = order;
    }
    Ok((pool, cycles_run, candidates_examined))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(old: &[&str], new: &str) -> PatternStore {
        let mut s = PatternStore::new();
        for o in old {
            let names: Vec<&str> = o.split_whitespace().collect();
            s.add_pattern(&names, 1, &[], Role::Old).unwrap();
        }
        let names: Vec<&str> = new.split_whitespace().collect();
        s.add_pattern(&names, 1, &[], Role::New).unwrap();
        s
    }

    #[test]
    fn empty_old_gives_new_only() {
        let s = store(&[], "a b");
        let m = CostModel::for_store(&s).unwrap();
        let out = beam_search(&s, &m, &SearchParams::default()).unwrap();
        assert_eq!(out.ranked.len(), 1);
        assert_eq!(out.ranked[0].score.cd, 0.0);
        assert_eq!(out.ranked[0].alignment.row_count(), 1);
    }

    #[test]
    fn zero_beam_rejected() {
        let s = store(&["a"], "a");
        let m = CostModel::for_store(&s).unwrap();
        let p = SearchParams {
            beam_width: 0,
            ..SearchParams::default()
        };
        assert!(matches!(beam_search(&s, &m, &p), Err(Error::Param(_))));
    }

    #[test]
    fn chain_is_reached() {
        let s = store(&["A B", "B C"], "A");
        let m = CostModel::for_store(&s).unwrap();
        let out = beam_search(&s, &m, &SearchParams::default()).unwrap();
        assert!(out
            .ranked
            .iter()
            .any(|r| r.alignment.row_count() == 3
                && s.names(&r.alignment.unify()).join(" ") == "A B C"));
    }

    #[test]
    fn deterministic() {
        let s = store(&["a b c", "b c d", "c d"], "a b c d");
        let m = CostModel::for_store(&s).unwrap();
        let p = SearchParams::default();
        let x = beam_search(&s, &m, &p).unwrap();
        let y = beam_search(&s, &m, &p).unwrap();
        let tx: Vec<&str> = x.ranked.iter().map(|r| r.canonical.as_str()).collect();
        let ty: Vec<&str> = y.ranked.iter().map(|r| r.canonical.as_str()).collect();
        assert_eq!(tx, ty);
    }

    #[test]
    fn scores_are_sorted() {
        let s = store(&["a b", "b c", "a c"], "a b c");
        let m = CostModel::for_store(&s).unwrap();
        let out = beam_search(&s, &m, &SearchParams::default()).unwrap();
        for w in out.ranked.windows(2) {
            assert_ne!(total_order(&w[0], &w[1]), Ordering::Greater);
        }
    }
}
