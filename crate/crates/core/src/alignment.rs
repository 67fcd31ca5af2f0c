//! The multiple-alignment value: rows of pattern occurrences, columns of
//! unified cells, legality, scoring, result extraction and canonical form.
//!
//! Columns are kept in a linear order that is consistent with every row.
//! Only the per-row orders are structural, so two columns that share no
//! row chain may appear in either order; matching a further pattern against
//! an alignment works on this partial order (see [`candidate_matches`]).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use crate::coding::{derive_encoding, CostModel};
use crate::error::{Error, Result};
use crate::matcher::{cmp_gain, PairwiseMatch};
use crate::pattern::{PatternStore, Role, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub symbol: Symbol,
    /// Sorted by row.
    pub cells: Vec<Cell>,
}

impl Column {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn is_matched(&self) -> bool {
        self.cells.len() >= 2
    }
}

/// Row 0 is always the New pattern; every other row is one occurrence of an
/// Old pattern, identified by its index in [`PatternStore::patterns`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    rows: Vec<usize>,
    columns: Vec<Column>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdScore {
    pub b_new: f64,
    pub b_enc: f64,
    pub cd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NewNotFirst,
    UnknownPattern,
    EmptyColumn,
    CellOutOfRange,
    DuplicateCell,
    MissingCell,
    SameRowTwice,
    SymbolMismatch,
    ColumnOrder,
    IdClash,
}

impl ViolationKind {
    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::NewNotFirst => "new not first",
            ViolationKind::UnknownPattern => "unknown pattern",
            ViolationKind::EmptyColumn => "empty column",
            ViolationKind::CellOutOfRange => "cell out of range",
            ViolationKind::DuplicateCell => "duplicate cell",
            ViolationKind::MissingCell => "missing cell",
            ViolationKind::SameRowTwice => "same row twice",
            ViolationKind::SymbolMismatch => "symbol mismatch",
            ViolationKind::ColumnOrder => "column order",
            ViolationKind::IdClash => "id clash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub row: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        if let Some(r) = self.row {
            write!(f, " at row {r}")?;
        }
        if let Some(c) = self.column {
            write!(f, " column {c}")?;
        }
        Ok(())
    }
}

fn violation(kind: ViolationKind, row: Option<usize>, column: Option<usize>) -> Violation {
    Violation { kind, row, column }
}

/// Checks every structural rule and reports the first one broken.
pub fn validate_alignment(
    a: &Alignment,
    store: &PatternStore,
) -> std::result::Result<(), Violation> {
    let pats = store.patterns();
    for (r, &p) in a.rows.iter().enumerate() {
        let Some(pat) = pats.get(p) else {
            return Err(violation(ViolationKind::UnknownPattern, Some(r), None));
        };
        if (r == 0) != (pat.role == Role::New) {
            return Err(violation(ViolationKind::NewNotFirst, Some(r), None));
        }
    }
    if a.rows.is_empty() {
        return Err(violation(ViolationKind::NewNotFirst, None, None));
    }
    let mut seen: Vec<Vec<Option<usize>>> =
        a.rows.iter().map(|&p| vec![None; pats[p].len()]).collect();
    for (ci, col) in a.columns.iter().enumerate() {
        if col.cells.is_empty() {
            return Err(violation(ViolationKind::EmptyColumn, None, Some(ci)));
        }
        let mut ids = 0;
        for (k, cell) in col.cells.iter().enumerate() {
            let Some(slot) = seen.get_mut(cell.row).and_then(|r| r.get_mut(cell.pos)) else {
                return Err(violation(
                    ViolationKind::CellOutOfRange,
                    Some(cell.row),
                    Some(ci),
                ));
            };
            if slot.is_some() {
                return Err(violation(
                    ViolationKind::DuplicateCell,
                    Some(cell.row),
                    Some(ci),
                ));
            }
            *slot = Some(ci);
            if k > 0 && col.cells[k - 1].row >= cell.row {
                return Err(violation(
                    ViolationKind::SameRowTwice,
                    Some(cell.row),
                    Some(ci),
                ));
            }
            let pat = &pats[a.rows[cell.row]];
            if pat.symbols[cell.pos] != col.symbol {
                return Err(violation(
                    ViolationKind::SymbolMismatch,
                    Some(cell.row),
                    Some(ci),
                ));
            }
            if cell.row > 0 && pat.is_id(cell.pos) {
                ids += 1;
            }
        }
        if ids > 1 {
            return Err(violation(ViolationKind::IdClash, None, Some(ci)));
        }
    }
    for (r, row) in seen.iter().enumerate() {
        let mut last: Option<usize> = None;
        for slot in row {
            let Some(ci) = *slot else {
                return Err(violation(ViolationKind::MissingCell, Some(r), None));
            };
            if last.is_some_and(|l| l >= ci) {
                return Err(violation(ViolationKind::ColumnOrder, Some(r), Some(ci)));
            }
            last = Some(ci);
        }
    }
    Ok(())
}

/// Fixed-width bitset over column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn or(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= *b;
        }
    }
}

/// Canonical form: rows relabelled independently of insertion order, columns
/// sorted by their relabelled cell lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Canonical {
    pub rows: Vec<String>,
    pub columns: Vec<(String, Vec<(usize, usize)>)>,
}

impl Canonical {
    pub fn text(&self) -> String {
        fn num(out: &mut String, mut n: usize) {
            let mut buf = [0u8; 20];
            let mut i = buf.len();
            loop {
                i -= 1;
                buf[i] = b'0' + (n % 10) as u8;
                n /= 10;
                if n == 0 {
                    break;
                }
            }
            out.extend(buf[i..].iter().map(|&b| b as char));
        }
        let mut out = String::with_capacity(16 * (self.rows.len() + self.columns.len()));
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str("row ");
            num(&mut out, i);
            out.push_str(": ");
            out.push_str(r);
            out.push('\n');
        }
        for (j, (sym, cells)) in self.columns.iter().enumerate() {
            out.push_str("col ");
            num(&mut out, j);
            out.push_str(": ");
            out.push_str(sym);
            for &(r, p) in cells {
                out.push(' ');
                num(&mut out, r);
                out.push(':');
                num(&mut out, p);
            }
            out.push('\n');
        }
        out
    }
}

impl Alignment {
    /// The alignment of New alone: one single-cell column per New symbol.
    pub fn new_only(store: &PatternStore) -> Result<Self> {
        let new = store.the_new()?;
        let idx = store
            .patterns()
            .iter()
            .position(|p| p.id == new.id)
            .unwrap();
        let columns = new
            .symbols
            .iter()
            .enumerate()
            .map(|(pos, &symbol)| Column {
                symbol,
                cells: vec![Cell { row: 0, pos }],
            })
            .collect();
        Ok(Self {
            rows: vec![idx],
            columns,
        })
    }

    /// Assembles an alignment from explicit rows and columns (each column a
    /// list of `(row, pos)` cells), ordering columns consistently with every
    /// row, and validates it.
    pub fn from_parts(
        store: &PatternStore,
        rows: Vec<usize>,
        columns: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let pats = store.patterns();
        let mut cols = Vec::with_capacity(columns.len());
        for cells in columns {
            let mut cells: Vec<Cell> = cells
                .into_iter()
                .map(|(row, pos)| Cell { row, pos })
                .collect();
            cells.sort();
            let first = cells
                .first()
                .ok_or_else(|| Error::Extension("empty column".into()))?;
            let pat = rows
                .get(first.row)
                .and_then(|&p| pats.get(p))
                .ok_or_else(|| Error::Extension("cell outside rows".into()))?;
            let symbol = *pat
                .symbols
                .get(first.pos)
                .ok_or_else(|| Error::Extension("cell outside pattern".into()))?;
            cols.push(Column { symbol, cells });
        }
        let keys: Vec<(usize, usize, usize)> = cols
            .iter()
            .map(|c| (c.cells[0].row, c.cells[0].pos, 0))
            .collect();
        let a = Self::ordered(rows, cols, &keys, store)
            .ok_or_else(|| Error::Extension("column order is cyclic".into()))?;
        validate_alignment(&a, store).map_err(|v| Error::Extension(v.to_string()))?;
        Ok(a)
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_has_new(&self, c: &Column) -> bool {
        c.cells.first().is_some_and(|cell| cell.row == 0)
    }

    pub fn column_id_cells(&self, c: &Column, store: &PatternStore) -> usize {
        let pats = store.patterns();
        c.cells
            .iter()
            .filter(|cell| cell.row > 0 && pats[self.rows[cell.row]].is_id(cell.pos))
            .count()
    }

    /// Cells in columns of two or more cells.
    pub fn matched_cells(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.is_matched())
            .map(Column::len)
            .sum()
    }

    pub fn covers_new(&self) -> bool {
        self.columns
            .iter()
            .filter(|c| self.column_has_new(c))
            .all(Column::is_matched)
    }

    /// New positions that share a column with some Old cell.
    pub fn new_coverage(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .columns
            .iter()
            .filter(|c| c.is_matched() && self.column_has_new(c))
            .map(|c| c.cells[0].pos)
            .collect();
        v.sort_unstable();
        v
    }

    /// Column index of every cell, per row.
    pub fn cell_columns(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.rows.len()];
        let mut per_row: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.rows.len()];
        for (ci, col) in self.columns.iter().enumerate() {
            for cell in &col.cells {
                per_row[cell.row].push((cell.pos, ci));
            }
        }
        for (r, mut v) in per_row.into_iter().enumerate() {
            v.sort();
            out[r] = v.into_iter().map(|(_, c)| c).collect();
        }
        out
    }

    /// One symbol per column, in column order.
    pub fn unify(&self) -> Vec<Symbol> {
        self.columns.iter().map(|c| c.symbol).collect()
    }

    pub fn compression_difference(&self, store: &PatternStore, model: &CostModel) -> CdScore {
        let pats = store.patterns();
        let mut b_new = 0.0;
        let mut b_enc = 0.0;
        for col in &self.columns {
            if col.is_matched() {
                if self.column_has_new(col) {
                    b_new += model.cost(col.symbol);
                }
            } else {
                let cell = col.cells[0];
                if cell.row > 0 && pats[self.rows[cell.row]].is_id(cell.pos) {
                    b_enc += model.cost(col.symbol);
                }
            }
        }
        CdScore {
            b_new,
            b_enc,
            cd: b_new - b_enc,
        }
    }

    /// Symbols of the Old rows that are not aligned with anything in New.
    pub fn read_result(&self) -> Vec<Symbol> {
        self.columns
            .iter()
            .filter(|c| !self.column_has_new(c))
            .map(|c| c.symbol)
            .collect()
    }

    pub fn canonicalize(&self, store: &PatternStore) -> Canonical {
        canonical_form(self, store)
    }

    pub fn canonical_text(&self, store: &PatternStore) -> String {
        self.canonicalize(store).text()
    }

    /// `reach[c]` holds every column that must come after `c`.
    pub(crate) fn successors(&self) -> Vec<Bits> {
        let n = self.columns.len();
        let per_row = self.cell_columns();
        let mut next: Vec<Vec<usize>> = vec![Vec::new(); n];
        for row in &per_row {
            for w in row.windows(2) {
                next[w[0]].push(w[1]);
            }
        }
        let mut reach = vec![Bits::new(n); n];
        // columns are topologically ordered, so successors have larger indices
        for c in (0..n).rev() {
            let mut acc = Bits::new(n);
            for &s in &next[c] {
                acc.set(s);
                acc.or(&reach[s]);
            }
            reach[c] = acc;
        }
        reach
    }

    /// Orders columns by Kahn's algorithm, taking the smallest key among the
    /// columns whose predecessors are placed. `None` if the rows conflict.
    fn ordered(
        rows: Vec<usize>,
        columns: Vec<Column>,
        keys: &[(usize, usize, usize)],
        store: &PatternStore,
    ) -> Option<Self> {
        let n = columns.len();
        let pats = store.patterns();
        let mut per_row: Vec<Vec<(usize, usize)>> = rows.iter().map(|_| Vec::new()).collect();
        for (ci, col) in columns.iter().enumerate() {
            for cell in &col.cells {
                per_row.get_mut(cell.row)?.push((cell.pos, ci));
            }
        }
        let mut indeg = vec![0usize; n];
        let mut next: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, v) in per_row.iter_mut().enumerate() {
            v.sort();
            if v.len() != pats.get(rows[r])?.len() {
                return None;
            }
            for w in v.windows(2) {
                next[w[0].1].push(w[1].1);
                indeg[w[1].1] += 1;
            }
        }
        let mut heap: BinaryHeap<std::cmp::Reverse<((usize, usize, usize), usize)>> = (0..n)
            .filter(|&c| indeg[c] == 0)
            .map(|c| std::cmp::Reverse((keys[c], c)))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(std::cmp::Reverse((_, c))) = heap.pop() {
            order.push(c);
            for &s in &next[c] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    heap.push(std::cmp::Reverse((keys[s], s)));
                }
            }
        }
        if order.len() != n {
            return None;
        }
        let mut slots: Vec<Option<Column>> = columns.into_iter().map(Some).collect();
        let columns = order
            .into_iter()
            .map(|c| slots[c].take().unwrap())
            .collect();
        Some(Self { rows, columns })
    }

    /// Adds one occurrence of Old pattern `pattern` as a new row. Each pair
    /// `(column, pos)` of `m` merges that pattern position into the existing
    /// column; unmatched positions become single-cell columns.
    pub fn extend_with_pattern(
        &self,
        store: &PatternStore,
        pattern: usize,
        m: &PairwiseMatch,
    ) -> Result<Self> {
        self.extend(store, pattern, m, true)
    }

    /// As [`Alignment::extend_with_pattern`], for matches from the matcher,
    /// which already respect column order.
    pub(crate) fn extend_trusted(
        &self,
        store: &PatternStore,
        pattern: usize,
        m: &PairwiseMatch,
    ) -> Result<Self> {
        self.extend(store, pattern, m, false)
    }

    fn extend(
        &self,
        store: &PatternStore,
        pattern: usize,
        m: &PairwiseMatch,
        check_order: bool,
    ) -> Result<Self> {
        let pat = store
            .patterns()
            .get(pattern)
            .filter(|p| p.role == Role::Old)
            .ok_or_else(|| Error::Extension(format!("no Old pattern at index {pattern}")))?;
        let n = self.columns.len();
        let mut pairs = m.pairs.clone();
        pairs.sort_by_key(|&(_, pos)| pos);
        let mut used = vec![false; n];
        for w in pairs.windows(2) {
            if w[0].1 == w[1].1 {
                return Err(Error::Extension(format!(
                    "position {} matched twice",
                    w[0].1
                )));
            }
        }
        for &(c, pos) in &pairs {
            let col = self
                .columns
                .get(c)
                .ok_or_else(|| Error::Extension(format!("no column {c}")))?;
            if pos >= pat.len() {
                return Err(Error::Extension(format!("no position {pos}")));
            }
            if used[c] {
                return Err(Error::Extension(format!("column {c} matched twice")));
            }
            used[c] = true;
            if col.symbol != pat.symbols[pos] {
                return Err(Error::Extension(format!("symbol mismatch at column {c}")));
            }
            if pat.is_id(pos) && self.column_id_cells(col, store) > 0 {
                return Err(Error::Extension(format!("two ID cells in column {c}")));
            }
        }
        if check_order {
            let reach = self.successors();
            for (i, &(ci, _)) in pairs.iter().enumerate() {
                for &(cj, _) in &pairs[i + 1..] {
                    if reach[cj].get(ci) {
                        return Err(Error::Extension(format!(
                            "column order: {cj} precedes {ci}"
                        )));
                    }
                }
            }
        }

        let row = self.rows.len();
        let mut rows = self.rows.clone();
        rows.push(pattern);
        let mut columns = self.columns.clone();
        let mut keys: Vec<(usize, usize, usize)> = (0..n).map(|i| (i, 1, 0)).collect();
        let mut matched_at: Vec<Option<usize>> = vec![None; pat.len()];
        for &(c, pos) in &pairs {
            matched_at[pos] = Some(c);
            columns[c].cells.push(Cell { row, pos });
        }
        for pos in 0..pat.len() {
            if matched_at[pos].is_some() {
                continue;
            }
            let prev = (0..pos).rev().find_map(|q| matched_at[q]);
            let next = (pos + 1..pat.len()).find_map(|q| matched_at[q]);
            let key = match (prev, next) {
                (Some(c), _) => (c, 2, pos),
                (None, Some(c)) => (c, 0, pos),
                (None, None) => (n, 0, pos),
            };
            columns.push(Column {
                symbol: pat.symbols[pos],
                cells: vec![Cell { row, pos }],
            });
            keys.push(key);
        }
        Self::ordered(rows, columns, &keys, store)
            .ok_or_else(|| Error::Extension("column order is cyclic".into()))
    }

    /// Reads an alignment back from its canonical text.
    pub fn from_canonical(text: &str, store: &PatternStore) -> Result<Self> {
        let parsed = parse_canonical(text)?;
        let mut rows = Vec::new();
        for (_, id) in &parsed.rows {
            let idx = store
                .patterns()
                .iter()
                .position(|p| &p.id == id)
                .ok_or_else(|| Error::Canonical(format!("unknown pattern {id}")))?;
            rows.push(idx);
        }
        let cols = parsed.columns.into_iter().map(|(_, cells)| cells).collect();
        Self::from_parts(store, rows, cols)
    }
}

/// Rows and columns of a canonical text, without reference to any store.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCanonical {
    /// `(occurrence, pattern id)` in row order.
    pub rows: Vec<(usize, String)>,
    pub columns: Vec<(String, Vec<(usize, usize)>)>,
}

pub fn parse_canonical(text: &str) -> Result<ParsedCanonical> {
    let bad = |l: &str| Error::Canonical(l.to_string());
    let mut rows = Vec::new();
    let mut columns = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (head, rest) = line.split_once(':').ok_or_else(|| bad(line))?;
        let mut head = head.split_whitespace();
        let kind = head.next().ok_or_else(|| bad(line))?;
        let index: usize = head
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(line))?;
        match kind {
            "row" => {
                if index != rows.len() || !columns.is_empty() {
                    return Err(bad(line));
                }
                let (id, occ) = rest.trim().rsplit_once('#').ok_or_else(|| bad(line))?;
                let occ: usize = occ.parse().map_err(|_| bad(line))?;
                rows.push((occ, id.to_string()));
            }
            "col" => {
                if index != columns.len() {
                    return Err(bad(line));
                }
                let mut toks = rest.split_whitespace();
                let sym = toks.next().ok_or_else(|| bad(line))?.to_string();
                let mut cells = Vec::new();
                for t in toks {
                    let (r, p) = t.split_once(':').ok_or_else(|| bad(line))?;
                    let r: usize = r.parse().map_err(|_| bad(line))?;
                    let p: usize = p.parse().map_err(|_| bad(line))?;
                    if r >= rows.len() {
                        return Err(bad(line));
                    }
                    cells.push((r, p));
                }
                if cells.is_empty() {
                    return Err(bad(line));
                }
                columns.push((sym, cells));
            }
            _ => return Err(bad(line)),
        }
    }
    if rows.is_empty() {
        return Err(Error::Canonical("no rows".into()));
    }
    Ok(ParsedCanonical { rows, columns })
}

fn rank<T: Ord + Clone>(items: &[T]) -> Vec<u32> {
    let mut sorted: Vec<T> = items.to_vec();
    sorted.sort();
    sorted.dedup();
    items
        .iter()
        .map(|x| sorted.binary_search(x).unwrap() as u32)
        .collect()
}

const MAX_TIE_PERMUTATIONS: usize = 720;

fn canonical_form(a: &Alignment, store: &PatternStore) -> Canonical {
    let pats = store.patterns();
    let nrows = a.rows.len();
    let per_row = a.cell_columns();
    // colour refinement: start from the pattern, then fold in the colours of
    // the columns each row's cells sit in until the partition stops splitting
    let mut color: Vec<u32> = rank(
        &a.rows
            .iter()
            .enumerate()
            .map(|(r, &p)| (r > 0, p))
            .collect::<Vec<_>>(),
    );
    let mut classes = color
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    loop {
        let col_sig: Vec<Vec<(u32, usize)>> = a
            .columns
            .iter()
            .map(|c| {
                let mut s: Vec<(u32, usize)> = c
                    .cells
                    .iter()
                    .map(|cell| (color[cell.row], cell.pos))
                    .collect();
                s.sort();
                s
            })
            .collect();
        let col_color = rank(&col_sig);
        let row_sig: Vec<(u32, Vec<u32>)> = (0..nrows)
            .map(|r| (color[r], per_row[r].iter().map(|&c| col_color[c]).collect()))
            .collect();
        let refined = rank(&row_sig);
        let n = refined
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        color = refined;
        if n == classes {
            break;
        }
        classes = n;
    }

    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for r in 0..nrows {
        groups.entry(color[r]).or_default().push(r);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut total = 1usize;
    for g in &groups {
        for i in 1..=g.len() {
            total = total.saturating_mul(i);
        }
    }

    // columns as relabelled cell lists, sorted; symbols follow from the cells
    let layout = |order: &[usize]| -> Vec<(Vec<(usize, usize)>, Symbol)> {
        let mut label = vec![0usize; nrows];
        for (new, &old) in order.iter().enumerate() {
            label[old] = new;
        }
        let mut columns: Vec<(Vec<(usize, usize)>, Symbol)> = a
            .columns
            .iter()
            .map(|c| {
                let mut cells: Vec<(usize, usize)> = c
                    .cells
                    .iter()
                    .map(|cell| (label[cell.row], cell.pos))
                    .collect();
                cells.sort_unstable();
                (cells, c.symbol)
            })
            .collect();
        columns.sort_unstable();
        columns
    };

    let mut order: Vec<usize> = groups.concat();
    if total > 1 && total <= MAX_TIE_PERMUTATIONS {
        // rows in one group share a pattern, so the candidates differ only in
        // their column lists and the smallest one is a fine representative
        let mut best: Option<(Vec<(Vec<(usize, usize)>, Symbol)>, Vec<usize>)> = None;
        let mut perm_groups = groups.clone();
        permute_groups(&mut perm_groups, 0, &mut |gs| {
            let o: Vec<usize> = gs.concat();
            let l = layout(&o);
            if best.as_ref().map_or(true, |b| l < b.0) {
                best = Some((l, o));
            }
        });
        order = best.unwrap().1;
    }
    let mut occ: BTreeMap<usize, usize> = BTreeMap::new();
    let rows = order
        .iter()
        .map(|&old| {
            let p = a.rows[old];
            let n = occ.entry(p).or_insert(0);
            *n += 1;
            format!("{}#{}", pats[p].id, n)
        })
        .collect();
    let columns = layout(&order)
        .into_iter()
        .map(|(cells, sym)| (store.table().name(sym).to_string(), cells))
        .collect();
    Canonical { rows, columns }
}

fn permute_groups(groups: &mut Vec<Vec<usize>>, gi: usize, f: &mut dyn FnMut(&[Vec<usize>])) {
    if gi == groups.len() {
        f(groups);
        return;
    }
    let len = groups[gi].len();
    heap_permute(groups, gi, len, f);
}

fn heap_permute(
    groups: &mut Vec<Vec<usize>>,
    gi: usize,
    k: usize,
    f: &mut dyn FnMut(&[Vec<usize>]),
) {
    if k <= 1 {
        permute_groups(groups, gi + 1, f);
        return;
    }
    for i in 0..k {
        heap_permute(groups, gi, k - 1, f);
        if k % 2 == 0 {
            groups[gi].swap(i, k - 1);
        } else {
            groups[gi].swap(0, k - 1);
        }
    }
}

/// Total order used everywhere alignments are ranked: higher cd first, then
/// fewer rows, then more matched cells, then canonical text.
pub fn rank_order(
    a: (&CdScore, usize, usize, &str),
    b: (&CdScore, usize, usize, &str),
) -> Ordering {
    cmp_gain(a.0.cd, b.0.cd)
        .then_with(|| a.1.cmp(&b.1))
        .then_with(|| b.2.cmp(&a.2))
        .then_with(|| a.3.cmp(b.3))
}

pub(crate) struct MatchContext<'a> {
    pub store: &'a PatternStore,
    pub model: &'a CostModel,
    pub k: usize,
    pub bounded_skips: bool,
    pub node_limit: usize,
}

/// Up to `k` non-empty ways of merging Old pattern `pattern` into `a`,
/// best first. A match pairs alignment columns with pattern positions; the
/// chosen columns must admit the pattern's left-to-right order given the
/// alignment's own row orders. The gain of a match is the exact change in
/// compression difference the extension would produce.
///
/// With `bounded_skips`, two consecutive New-linked cells of the pattern may
/// not straddle more still-unmatched New symbols than the pattern has cells
/// between them.
#[cfg(test)]
pub(crate) fn candidate_matches(
    a: &Alignment,
    pattern: usize,
    ctx: &MatchContext,
) -> Vec<PairwiseMatch> {
    candidate_matches_with(a, &column_ancestors(a), pattern, ctx)
}

/// For each column, itself and every column that must precede it.
pub(crate) fn column_ancestors(a: &Alignment) -> Vec<Bits> {
    let n = a.columns.len();
    let reach = a.successors();
    let mut ancestors = vec![Bits::new(n); n];
    for c in 0..n {
        ancestors[c].set(c);
    }
    for c in 0..n {
        for d in 0..n {
            if reach[c].get(d) {
                ancestors[d].set(c);
            }
        }
    }
    ancestors
}

/// [`candidate_matches`] with the alignment's [`column_ancestors`] supplied.
pub(crate) fn candidate_matches_with(
    a: &Alignment,
    ancestors: &[Bits],
    pattern: usize,
    ctx: &MatchContext,
) -> Vec<PairwiseMatch> {
    let pats = ctx.store.patterns();
    let pat = &pats[pattern];
    let n = a.columns.len();
    // value of each column as a merge target, before the pattern's own ID bonus
    let col_info: Vec<(bool, f64)> = a
        .columns
        .iter()
        .map(|c| {
            let has_id = a.column_id_cells(c, ctx.store) > 0;
            let single_gain = c.cells.len() == 1
                && (c.cells[0].row == 0 || pats[a.rows[c.cells[0].row]].is_id(c.cells[0].pos));
            (
                has_id,
                if single_gain {
                    ctx.model.cost(c.symbol)
                } else {
                    0.0
                },
            )
        })
        .collect();
    let mut options: Vec<Vec<(usize, f64)>> = Vec::with_capacity(pat.len());
    let mut base = 0.0;
    for (pos, &sym) in pat.symbols.iter().enumerate() {
        let cost = ctx.model.cost(sym);
        let id = pat.is_id(pos);
        if id {
            base -= cost;
        }
        let mut opts: Vec<(usize, f64)> = a
            .columns
            .iter()
            .enumerate()
            .filter(|(ci, c)| c.symbol == sym && !(id && col_info[*ci].0))
            .map(|(ci, _)| (ci, col_info[ci].1 + if id { cost } else { 0.0 }))
            .collect();
        // best first, so the k-th bound tightens early
        opts.sort_by(|x, y| cmp_gain(x.1, y.1).then(x.0.cmp(&y.0)));
        options.push(opts);
    }
    let mut new_pos: Vec<Option<usize>> = vec![None; n];
    let mut new_cols: Vec<usize> = Vec::new();
    for (ci, c) in a.columns.iter().enumerate() {
        if let Some(cell) = c.cells.first().filter(|cell| cell.row == 0) {
            new_pos[ci] = Some(cell.pos);
            new_cols.push(ci);
        }
    }
    new_cols.sort_by_key(|&c| new_pos[c]);
    // unmatched[i]: New symbols before position i not yet in any match
    let mut unmatched = vec![0usize; new_cols.len() + 1];
    for (i, &c) in new_cols.iter().enumerate() {
        unmatched[i + 1] = unmatched[i] + usize::from(a.columns[c].cells.len() == 1);
    }
    let mut suffix = vec![0.0; pat.len() + 1];
    for pos in (0..pat.len()).rev() {
        let best = options[pos].iter().map(|o| o.1).fold(0.0, f64::max);
        suffix[pos] = suffix[pos + 1] + best;
    }
    let mut reachable = vec![0usize; pat.len() + 1];
    for pos in (0..pat.len()).rev() {
        reachable[pos] = reachable[pos + 1] + usize::from(!options[pos].is_empty());
    }

    struct Search<'s> {
        options: &'s [Vec<(usize, f64)>],
        ancestors: &'s [Bits],
        suffix: &'s [f64],
        /// Pattern positions from here on that have any option.
        reachable: &'s [usize],
        new_pos: &'s [Option<usize>],
        unmatched: &'s [usize],
        bounded_skips: bool,
        base: f64,
        k: usize,
        nodes: usize,
        limit: usize,
        found: Vec<PairwiseMatch>,
        cur: Vec<(usize, usize)>,
        /// Forbidden-column sets, one block of `words` per depth.
        stack: Vec<u64>,
        words: usize,
    }

    impl Search<'_> {
        /// Distance between the first and last New symbols a match touches.
        fn span(&self, m: &PairwiseMatch) -> usize {
            let mut q = m.pairs.iter().filter_map(|&(c, _)| self.new_pos[c]);
            match q.next() {
                Some(first) => {
                    let (lo, hi) = q.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x)));
                    hi - lo
                }
                None => 0,
            }
        }

        fn order(&self, a: &PairwiseMatch, b: &PairwiseMatch) -> Ordering {
            cmp_gain(a.gain, b.gain)
                .then_with(|| b.pairs.len().cmp(&a.pairs.len()))
                .then_with(|| self.span(a).cmp(&self.span(b)))
                .then_with(|| a.pairs.cmp(&b.pairs))
        }

        fn forbidden(&self, pos: usize, c: usize) -> bool {
            self.stack[pos * self.words + c / 64] >> (c % 64) & 1 == 1
        }

        /// Copies depth `pos` into depth `pos + 1`, adding `extra` if given.
        fn descend(&mut self, pos: usize, extra: Option<&Bits>) {
            let w = self.words;
            let (head, tail) = self.stack.split_at_mut((pos + 1) * w);
            let (src, dst) = (&head[pos * w..], &mut tail[..w]);
            match extra {
                Some(b) => dst
                    .iter_mut()
                    .zip(src.iter().zip(&b.0))
                    .for_each(|(d, (s, e))| *d = s | e),
                None => dst.copy_from_slice(src),
            }
        }

        fn walk(&mut self, pos: usize, gain: f64) {
            self.nodes += 1;
            if self.nodes > self.limit {
                return;
            }
            if let Some(kth) = self.found.get(self.k - 1) {
                let bound = self.base + gain + self.suffix[pos];
                if bound < kth.gain - 1e-9 {
                    return;
                }
                // at best a tie on gain, which needs at least as many pairs
                if bound <= kth.gain + 1e-9
                    && self.cur.len() + self.reachable[pos] < kth.pairs.len()
                {
                    return;
                }
            }
            if pos == self.options.len() {
                if self.cur.is_empty() {
                    return;
                }
                let m = PairwiseMatch {
                    pairs: self.cur.clone(),
                    gain: self.base + gain,
                };
                let at = self
                    .found
                    .binary_search_by(|x| self.order(x, &m))
                    .unwrap_or_else(|e| e);
                if at < self.k {
                    self.found.insert(at, m);
                    self.found.truncate(self.k);
                }
                return;
            }
            let options = self.options;
            let last_new = if self.bounded_skips {
                self.cur
                    .iter()
                    .rev()
                    .find_map(|&(c, p)| self.new_pos[c].map(|q| (p, q)))
            } else {
                None
            };
            for &(c, v) in &options[pos] {
                if self.forbidden(pos, c) {
                    continue;
                }
                if let (Some((p1, q1)), Some(q2)) = (last_new, self.new_pos[c]) {
                    let skipped = self.unmatched[q2] - self.unmatched[q1 + 1];
                    if skipped > pos - p1 - 1 {
                        continue;
                    }
                }
                let ancestors = self.ancestors;
                self.descend(pos, Some(&ancestors[c]));
                self.cur.push((c, pos));
                self.walk(pos + 1, gain + v);
                self.cur.pop();
            }
            self.descend(pos, None);
            self.walk(pos + 1, gain);
        }
    }

    let words = Bits::new(n).0.len();
    let mut s = Search {
        options: &options,
        ancestors,
        suffix: &suffix,
        reachable: &reachable,
        new_pos: &new_pos,
        unmatched: &unmatched,
        bounded_skips: ctx.bounded_skips,
        base,
        k: ctx.k.max(1),
        nodes: 0,
        limit: ctx.node_limit,
        found: Vec::new(),
        cur: Vec::new(),
        stack: vec![0; (pat.len() + 1) * words],
        words,
    };
    s.walk(0, 0.0);
    s.found
}

/// Encoding bits for convenience in reports.
pub fn encoding_bits(a: &Alignment, store: &PatternStore, model: &CostModel) -> f64 {
    derive_encoding(a, store, model).bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::Role;

    /// Sentence store: New "j o h n r u n s", the sentence, noun and verb rules.
    fn sentence_store() -> PatternStore {
        let mut s = PatternStore::new();
        s.add_pattern(&["S", "N", "#N", "V", "#V", "#S"], 1, &[0, 5], Role::Old)
            .unwrap();
        s.add_pattern(
            &["N", "0", "j", "o", "h", "n", "#N"],
            1,
            &[0, 1, 6],
            Role::Old,
        )
        .unwrap();
        s.add_pattern(
            &["V", "1", "r", "u", "n", "s", "#V"],
            1,
            &[0, 1, 6],
            Role::Old,
        )
        .unwrap();
        s.add_pattern(&["j", "o", "h", "n", "r", "u", "n", "s"], 1, &[], Role::New)
            .unwrap();
        s
    }

    fn m(pairs: &[(usize, usize)]) -> PairwiseMatch {
        PairwiseMatch {
            pairs: pairs.to_vec(),
            gain: 0.0,
        }
    }

    fn col_of(a: &Alignment, row: usize, pos: usize) -> usize {
        a.cell_columns()[row][pos]
    }

    /// Builds the sentence parse in the order noun, sentence, verb.
    fn build_sentence(s: &PatternStore) -> Alignment {
        let a = Alignment::new_only(s).unwrap();
        let a = a
            .extend_with_pattern(s, 1, &m(&[(0, 2), (1, 3), (2, 4), (3, 5)]))
            .unwrap();
        let n = col_of(&a, 1, 0);
        let hn = col_of(&a, 1, 6);
        let a = a.extend_with_pattern(s, 0, &m(&[(n, 1), (hn, 2)])).unwrap();
        let pairs: Vec<(usize, usize)> = vec![
            (col_of(&a, 2, 3), 0),
            (col_of(&a, 0, 4), 2),
            (col_of(&a, 0, 5), 3),
            (col_of(&a, 0, 6), 4),
            (col_of(&a, 0, 7), 5),
            (col_of(&a, 2, 4), 6),
        ];
        a.extend_with_pattern(s, 2, &m(&pairs)).unwrap()
    }

    #[test]
    fn sentence_construction_is_legal() {
        let s = sentence_store();
        let a = build_sentence(&s);
        assert_eq!(validate_alignment(&a, &s), Ok(()));
        assert_eq!(a.row_count(), 4);
        let unified = s.names(&a.unify()).join(" ");
        assert_eq!(unified, "S N 0 j o h n #N V 1 r u n s #V #S");
    }

    #[test]
    fn row_order_does_not_change_canonical_form() {
        let s = sentence_store();
        let a = build_sentence(&s);
        // same structure built in the order verb, noun, sentence
        let b = Alignment::new_only(&s).unwrap();
        let b = b
            .extend_with_pattern(&s, 2, &m(&[(4, 2), (5, 3), (6, 4), (7, 5)]))
            .unwrap();
        let b = b
            .extend_with_pattern(
                &s,
                1,
                &m(&[
                    (col_of(&b, 0, 0), 2),
                    (col_of(&b, 0, 1), 3),
                    (col_of(&b, 0, 2), 4),
                    (col_of(&b, 0, 3), 5),
                ]),
            )
            .unwrap();
        let pairs = vec![
            (col_of(&b, 2, 0), 1),
            (col_of(&b, 2, 6), 2),
            (col_of(&b, 1, 0), 3),
            (col_of(&b, 1, 6), 4),
        ];
        let b = b.extend_with_pattern(&s, 0, &m(&pairs)).unwrap();
        assert_eq!(a.canonical_text(&s), b.canonical_text(&s));
        let c = a.canonicalize(&s);
        assert_eq!(
            c,
            Alignment::from_canonical(&c.text(), &s)
                .unwrap()
                .canonicalize(&s)
        );
    }

    #[test]
    fn crossing_columns_rejected() {
        let mut s = PatternStore::new();
        s.add_pattern(&["a", "b"], 1, &[], Role::Old).unwrap();
        s.add_pattern(&["a", "b"], 1, &[], Role::New).unwrap();
        let a = Alignment {
            rows: vec![1, 0],
            columns: vec![
                Column {
                    symbol: s.table().get("b").unwrap(),
                    cells: vec![Cell { row: 0, pos: 1 }, Cell { row: 1, pos: 1 }],
                },
                Column {
                    symbol: s.table().get("a").unwrap(),
                    cells: vec![Cell { row: 0, pos: 0 }, Cell { row: 1, pos: 0 }],
                },
            ],
        };
        assert_eq!(
            validate_alignment(&a, &s).unwrap_err().kind,
            ViolationKind::ColumnOrder
        );
        // the extension path refuses the same crossing
        let base = Alignment::new_only(&s).unwrap();
        let e = base.extend_with_pattern(&s, 0, &m(&[(1, 0), (0, 1)]));
        assert!(matches!(e, Err(Error::Extension(_))));
    }

    #[test]
    fn symbol_mismatch_rejected() {
        let s = sentence_store();
        let a = Alignment::new_only(&s).unwrap();
        let bad = Alignment {
            rows: a.rows.clone(),
            columns: {
                let mut cols = a.columns.clone();
                let r = cols.remove(4);
                cols[0].cells.push(Cell {
                    row: r.cells[0].row,
                    pos: r.cells[0].pos,
                });
                cols
            },
        };
        let v = validate_alignment(&bad, &s).unwrap_err();
        assert!(matches!(
            v.kind,
            ViolationKind::SameRowTwice | ViolationKind::SymbolMismatch
        ));
        let mut s2 = sentence_store();
        s2.add_pattern(&["r"], 1, &[], Role::Old).unwrap();
        let b = Alignment::new_only(&s2).unwrap();
        // column 0 is 'j', pattern symbol is 'r'
        assert!(b.extend_with_pattern(&s2, 4, &m(&[(0, 0)])).is_err());
        let mut cols = b.columns.clone();
        cols[0].cells.push(Cell { row: 1, pos: 0 });
        let c = Alignment {
            rows: vec![3, 4],
            columns: cols,
        };
        assert_eq!(
            validate_alignment(&c, &s2).unwrap_err().kind,
            ViolationKind::SymbolMismatch
        );
    }

    #[test]
    fn empty_match_adds_unmatched_row() {
        let s = sentence_store();
        let a = Alignment::new_only(&s).unwrap();
        let b = a
            .extend_with_pattern(&s, 0, &PairwiseMatch::empty())
            .unwrap();
        assert_eq!(b.row_count(), 2);
        assert_eq!(b.columns().len(), 8 + 6);
        assert!(b.columns().iter().all(|c| c.len() == 1));
        assert_eq!(a.row_count(), 1);
    }

    #[test]
    fn new_only_scores_zero_and_unifies_to_new() {
        let s = sentence_store();
        let model = CostModel::for_store(&s).unwrap();
        let a = Alignment::new_only(&s).unwrap();
        let sc = a.compression_difference(&s, &model);
        assert_eq!((sc.b_new, sc.b_enc, sc.cd), (0.0, 0.0, 0.0));
        assert_eq!(a.unify(), s.the_new().unwrap().symbols);
    }

    #[test]
    fn fully_matched_without_ids() {
        let mut s = PatternStore::new();
        s.add_pattern(&["a", "a"], 1, &[], Role::Old).unwrap();
        s.add_pattern(&["a", "a"], 1, &[], Role::New).unwrap();
        s.add_pattern(&["b"], 1, &[], Role::Old).unwrap();
        let model = CostModel::for_store(&s).unwrap();
        let a = Alignment::new_only(&s)
            .unwrap()
            .extend_with_pattern(&s, 0, &m(&[(0, 0), (1, 1)]))
            .unwrap();
        let sc = a.compression_difference(&s, &model);
        let ca = model.cost(s.table().get("a").unwrap());
        assert!((sc.cd - 2.0 * ca).abs() < 1e-12);
        assert!(a.read_result().is_empty());
    }

    #[test]
    fn two_id_cells_cannot_share_a_column() {
        let mut s = PatternStore::new();
        s.add_pattern(&["X", "p"], 1, &[0], Role::Old).unwrap();
        s.add_pattern(&["X", "q"], 1, &[0], Role::Old).unwrap();
        s.add_pattern(&["p"], 1, &[], Role::New).unwrap();
        let a = Alignment::new_only(&s)
            .unwrap()
            .extend_with_pattern(&s, 0, &m(&[(0, 1)]))
            .unwrap();
        let x = col_of(&a, 1, 0);
        assert!(a.extend_with_pattern(&s, 1, &m(&[(x, 0)])).is_err());
    }

    #[test]
    fn candidate_gain_equals_score_change() {
        let s = sentence_store();
        let model = CostModel::for_store(&s).unwrap();
        let ctx = MatchContext {
            store: &s,
            model: &model,
            k: 50,
            bounded_skips: false,
            node_limit: 1_000_000,
        };
        let a = Alignment::new_only(&s).unwrap();
        let a = a
            .extend_with_pattern(&s, 1, &m(&[(0, 2), (1, 3), (2, 4), (3, 5)]))
            .unwrap();
        let before = a.compression_difference(&s, &model).cd;
        for p in 0..3 {
            for cand in candidate_matches(&a, p, &ctx) {
                let b = a.extend_with_pattern(&s, p, &cand).unwrap();
                assert_eq!(validate_alignment(&b, &s), Ok(()));
                let after = b.compression_difference(&s, &model).cd;
                assert!(
                    (after - before - cand.gain).abs() < 1e-9,
                    "pattern {p} {:?}",
                    cand.pairs
                );
            }
        }
    }
}
