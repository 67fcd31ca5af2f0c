//! Brute-force reference implementations for tests. Nothing in the engine
//! calls into this module.
//!
//! [`exhaustive_alignments`] enumerates every legal alignment of a tiny
//! instance by building all column partitions of all row multisets, and
//! [`independent_cd`] scores an alignment from its canonical text alone,
//! with costs recomputed here from raw counts.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::alignment::Alignment;
use crate::error::{Error, Result};
use crate::pattern::{PatternStore, Role};

pub const ORACLE_MAX_ROWS: usize = 4;
pub const ORACLE_MAX_PATTERN_LEN: usize = 6;
const ORACLE_MAX_RESULTS: usize = 200_000;

/// Bits per symbol name, from weighted counts over every pattern.
pub fn independent_costs(store: &PatternStore) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for p in store.patterns() {
        for name in store.names(&p.symbols) {
            *counts.entry(name).or_insert(0) += p.frequency;
        }
    }
    let total: u64 = counts.values().sum();
    counts
        .into_iter()
        .map(|(k, c)| (k, (total as f64 / c as f64).log2()))
        .collect()
}

/// ID positions per pattern id.
pub fn id_table(store: &PatternStore) -> BTreeMap<String, BTreeSet<usize>> {
    store
        .patterns()
        .iter()
        .map(|p| (p.id.clone(), p.id_positions().into_iter().collect()))
        .collect()
}

/// Compression difference computed straight from canonical text: bits of
/// New cells in multi-cell columns, minus bits of unmatched Old ID cells.
pub fn independent_cd(
    canonical: &str,
    costs: &BTreeMap<String, f64>,
    ids: &BTreeMap<String, BTreeSet<usize>>,
) -> Result<f64> {
    let bad = |l: &str| Error::Canonical(l.to_string());
    let mut row_pattern: Vec<String> = Vec::new();
    let mut cd = 0.0;
    for line in canonical.lines().filter(|l| !l.trim().is_empty()) {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.first() {
            Some(&"row") => {
                let id = words
                    .get(2)
                    .and_then(|w| w.split('#').next())
                    .ok_or_else(|| bad(line))?;
                row_pattern.push(id.to_string());
            }
            Some(&"col") => {
                let sym = words.get(2).ok_or_else(|| bad(line))?;
                let cost = *costs
                    .get(*sym)
                    .ok_or_else(|| Error::MissingCost(sym.to_string()))?;
                let cells: Vec<(usize, usize)> = words[3..]
                    .iter()
                    .map(|w| {
                        let (r, p) = w.split_once(':')?;
                        Some((r.parse().ok()?, p.parse().ok()?))
                    })
                    .collect::<Option<_>>()
                    .ok_or_else(|| bad(line))?;
                if cells.len() >= 2 && cells.iter().any(|c| c.0 == 0) {
                    cd += cost;
                } else if let [(r, p)] = cells[..] {
                    let pid = row_pattern.get(r).ok_or_else(|| bad(line))?;
                    if r > 0 && ids.get(pid).is_some_and(|s| s.contains(&p)) {
                        cd -= cost;
                    }
                }
            }
            _ => return Err(bad(line)),
        }
    }
    Ok(cd)
}

#[derive(Debug, Clone)]
pub struct OracleAlignment {
    pub alignment: Alignment,
    pub canonical: String,
    pub cd: f64,
    pub rows: usize,
    pub matched: usize,
}

fn multisets(n: usize, size: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(cur.clone());
    if cur.len() == size {
        return;
    }
    for i in from..n {
        cur.push(i);
        multisets(n, size, i, cur, out);
        cur.pop();
    }
}

/// Every legal alignment with at most `max_rows` rows (New included), each
/// distinct up to row relabelling, sorted best first by (cd, fewer rows,
/// more matched cells, canonical text).
pub fn exhaustive_alignments(
    store: &PatternStore,
    max_rows: usize,
) -> Result<Vec<OracleAlignment>> {
    if max_rows == 0 || max_rows > ORACLE_MAX_ROWS {
        return Err(Error::OracleSize(format!(
            "max_rows {max_rows} not in 1..={ORACLE_MAX_ROWS}"
        )));
    }
    if let Some(p) = store
        .patterns()
        .iter()
        .find(|p| p.len() > ORACLE_MAX_PATTERN_LEN)
    {
        return Err(Error::OracleSize(format!(
            "pattern {} longer than {ORACLE_MAX_PATTERN_LEN}",
            p.id
        )));
    }
    let new = store.the_new()?;
    let new_idx = store.index_of(&new.id).unwrap();
    let olds: Vec<usize> = (0..store.patterns().len())
        .filter(|&i| store.patterns()[i].role == Role::Old)
        .collect();
    let costs = independent_costs(store);
    let ids = id_table(store);

    let mut sets = Vec::new();
    multisets(olds.len(), max_rows - 1, 0, &mut Vec::new(), &mut sets);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for set in sets {
        let mut rows = vec![new_idx];
        rows.extend(set.iter().map(|&i| olds[i]));
        let cells: Vec<(usize, usize)> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, &p)| (0..store.patterns()[p].len()).map(move |pos| (r, pos)))
            .collect();
        let mut blocks: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut err = None;
        partitions(store, &rows, &cells, 0, &mut blocks, &mut |blocks| {
            if err.is_some() {
                return;
            }
            // from_parts rejects cyclic column orders; those are simply not alignments
            let Ok(a) = Alignment::from_parts(store, rows.clone(), blocks.to_vec()) else {
                return;
            };
            let canonical = a.canonical_text(store);
            if !seen.insert(canonical.clone()) {
                return;
            }
            if out.len() >= ORACLE_MAX_RESULTS {
                err = Some(Error::OracleSize("too many alignments".into()));
                return;
            }
            match independent_cd(&canonical, &costs, &ids) {
                Ok(cd) => {
                    let matched = blocks.iter().filter(|b| b.len() > 1).map(Vec::len).sum();
                    out.push(OracleAlignment {
                        alignment: a,
                        canonical,
                        cd,
                        rows: rows.len(),
                        matched,
                    });
                }
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    out.sort_by(|a, b| {
        let key = |x: f64| (x * 1e9).round() as i64;
        key(b.cd)
            .cmp(&key(a.cd))
            .then(a.rows.cmp(&b.rows))
            .then(b.matched.cmp(&a.matched))
            .then_with(|| a.canonical.cmp(&b.canonical))
    });
    Ok(out)
}

/// Places each cell in turn into a fresh block or an existing compatible one
/// (same symbol, no cell of the same row, at most one Old ID cell).
fn partitions(
    store: &PatternStore,
    rows: &[usize],
    cells: &[(usize, usize)],
    i: usize,
    blocks: &mut Vec<Vec<(usize, usize)>>,
    f: &mut dyn FnMut(&[Vec<(usize, usize)>]),
) {
    if i == cells.len() {
        f(blocks);
        return;
    }
    let pats = store.patterns();
    let (r, p) = cells[i];
    let sym = pats[rows[r]].symbols[p];
    let is_id = |(r, p): (usize, usize)| r > 0 && pats[rows[r]].is_id(p);
    for b in 0..blocks.len() {
        let (r0, p0) = blocks[b][0];
        if pats[rows[r0]].symbols[p0] != sym || blocks[b].iter().any(|c| c.0 == r) {
            continue;
        }
        if is_id((r, p)) && blocks[b].iter().any(|&c| is_id(c)) {
            continue;
        }
        blocks[b].push((r, p));
        partitions(store, rows, cells, i + 1, blocks, f);
        blocks[b].pop();
    }
    blocks.push(vec![(r, p)]);
    partitions(store, rows, cells, i + 1, blocks, f);
    blocks.pop();
}
