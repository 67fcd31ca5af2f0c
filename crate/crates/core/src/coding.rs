//! Symbol costs, alignment encodings, alignment probabilities and
//! retrieval of New from its code.

use std::collections::BTreeMap;

use crate::alignment::Alignment;
use crate::error::{Error, Result};
use crate::pattern::{PatternStore, Symbol};
use crate::search::{retrieval_order, search_with, Mode, SearchParams};

/// Per-type probabilities and fractional bit costs, `cost = -log2 p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    probs: Vec<Option<f64>>,
    costs: Vec<Option<f64>>,
}

impl CostModel {
    pub fn from_frequencies(freqs: &BTreeMap<Symbol, u64>) -> Result<Self> {
        let total: u64 = freqs.values().sum();
        if total == 0 {
            return Err(Error::EmptyFrequencyTable);
        }
        let width = freqs.keys().map(|s| s.index() + 1).max().unwrap_or(0);
        let mut probs = vec![None; width];
        let mut costs = vec![None; width];
        for (&sym, &count) in freqs {
            if count == 0 {
                continue;
            }
            let p = count as f64 / total as f64;
            probs[sym.index()] = Some(p);
            costs[sym.index()] = Some(-p.log2());
        }
        Ok(Self { probs, costs })
    }

    pub fn for_store(store: &PatternStore) -> Result<Self> {
        Self::from_frequencies(&store.symbol_frequencies())
    }

    pub fn covers(&self, sym: Symbol) -> bool {
        matches!(self.costs.get(sym.index()), Some(Some(_)))
    }

    /// Cost in bits. Panics if the symbol is not covered; every model built
    /// from a store covers all of that store's symbols.
    pub fn cost(&self, sym: Symbol) -> f64 {
        self.costs
            .get(sym.index())
            .copied()
            .flatten()
            .unwrap_or_else(|| panic!("cost model does not cover symbol type {}", sym.type_id()))
    }

    pub fn prob(&self, sym: Symbol) -> Option<f64> {
        self.probs.get(sym.index()).copied().flatten()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.costs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some())
            .map(|(i, _)| Symbol::from_index(i))
    }
}

pub fn build_cost_model(freqs: &BTreeMap<Symbol, u64>) -> Result<CostModel> {
    CostModel::from_frequencies(freqs)
}

/// Code that stands for a New pattern given an alignment: the shared symbol
/// of every column that has no New cell and at least one ID-position cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub code_symbols: Vec<Symbol>,
    pub source_alignment_id: String,
    pub bits: f64,
}

impl Encoding {
    pub fn is_empty(&self) -> bool {
        self.code_symbols.is_empty()
    }
}

pub fn derive_encoding(a: &Alignment, store: &PatternStore, model: &CostModel) -> Encoding {
    let code_symbols: Vec<Symbol> = a
        .columns()
        .iter()
        .filter(|c| !a.column_has_new(c) && a.column_id_cells(c, store) > 0)
        .map(|c| c.symbol)
        .collect();
    let bits = code_symbols.iter().map(|&s| model.cost(s)).sum();
    Encoding {
        code_symbols,
        source_alignment_id: a.canonical_text(store),
        bits,
    }
}

/// Runs the engine again with the code as New and unifies the best
/// alignment that matches every code symbol.
pub fn retrieve_by_code(
    code: &[&str],
    store: &PatternStore,
    params: &SearchParams,
) -> Result<Vec<String>> {
    if code.is_empty() {
        return Err(Error::NothingToRetrieve);
    }
    let decode_store = store.with_new(code)?;
    let model = CostModel::for_store(&decode_store)?;
    // a code repeats a few ID symbols, so far more matches tie on gain than
    // in a parse; twice the usual k keeps the nested readings in play. A
    // code is not read left to right, so the second pass is skipped.
    let params = SearchParams {
        require_full_new_coverage: true,
        kbest: params.kbest * 2,
        left_to_right: false,
        ..params.clone()
    };
    let outcome = search_with(&decode_store, &model, &params, Mode::Decode)?;
    let best = outcome
        .ranked
        .iter()
        .filter(|s| s.alignment.row_count() > 1 && s.misread == 0)
        .min_by(|a, b| retrieval_order(a, b))
        .ok_or(Error::RetrievalFailed)?;
    let unified = best.alignment.unify();
    Ok(decode_store.names(&unified))
}

/// `p_i = 2^cd_i / sum_j 2^cd_j`, evaluated relative to the largest score
/// so large differences do not overflow.
pub fn alignment_probabilities(cds: &[f64]) -> Vec<f64> {
    let Some(max) = cds.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let weights: Vec<f64> = cds.iter().map(|&cd| (cd - max).exp2()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}
