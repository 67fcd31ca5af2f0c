#![allow(dead_code)]

use std::path::PathBuf;

use icmaus::coding::CostModel;
use icmaus::io::load_store;
use icmaus::{beam_search, Alignment, PatternStore, Role, SearchOutcome, SearchParams};
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn load(name: &str) -> (PatternStore, CostModel) {
    let store = load_store(
        &read_fixture(&format!("{name}.old")),
        &read_fixture(&format!("{name}.new")),
    )
    .unwrap();
    let model = CostModel::for_store(&store).unwrap();
    (store, model)
}

pub fn run(name: &str, params: &SearchParams) -> (PatternStore, CostModel, SearchOutcome) {
    let (store, model) = load(name);
    let out = beam_search(&store, &model, params).unwrap();
    (store, model, out)
}

/// Unified symbols of the columns that hold no Old ID cell.
pub fn non_id_symbols(a: &Alignment, store: &PatternStore) -> Vec<String> {
    a.columns()
        .iter()
        .filter(|c| a.column_id_cells(c, store) == 0)
        .map(|c| store.table().name(c.symbol).to_string())
        .collect()
}

/// Unified symbols of the columns without a New cell.
pub fn result_symbols(a: &Alignment, store: &PatternStore) -> Vec<String> {
    store.names(&a.read_result())
}

pub fn joined(v: &[String]) -> String {
    v.join(" ")
}

/// Keeps only the symbols in `alphabet`, in order. Everything else in the
/// unary and adder grammars is a service symbol.
pub fn only(v: &[String], alphabet: &[&str]) -> String {
    v.iter()
        .filter(|s| alphabet.contains(&s.as_str()))
        .cloned()
        .collect::<Vec<_>>()
        .join(" ")
}

pub const FIXTURES: [&str; 10] = [
    "fig1",
    "fig4",
    "fig6",
    "fig8",
    "fig9",
    "fig11",
    "fig13",
    "fig15",
    "fig16",
    "chain-AB-BC",
];

/// Parameters each fixture is run with: defaults, except that generation
/// from "0" has no natural end and is capped at five cycles.
pub fn fixture_params(name: &str) -> SearchParams {
    match name {
        "fig8" => SearchParams {
            max_cycles: 5,
            ..SearchParams::default()
        },
        _ => SearchParams::default(),
    }
}

pub fn expected_canonical(name: &str) -> String {
    read_fixture(&format!("expected/{name}.canonical"))
}

/// How many rows of the alignment are occurrences of the pattern whose
/// symbols read `text`.
pub fn rows_of(a: &Alignment, store: &PatternStore, text: &str) -> usize {
    a.rows()
        .iter()
        .filter(|&&p| store.names(&store.patterns()[p].symbols).join(" ") == text)
        .count()
}

fn random_word<'a>(rng: &mut impl Rng, alphabet: &[&'a str], max_len: usize) -> Vec<&'a str> {
    let n = rng.gen_range(1..=max_len);
    (0..n)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
        .collect()
}

/// A small random store within the oracle's bounds: one or two Old
/// patterns of up to three symbols, some of them ID symbols, and a New of
/// up to four, over an alphabet of two to four letters.
pub fn random_instance(rng: &mut impl Rng) -> PatternStore {
    let letters = ["a", "b", "c", "d"];
    let alphabet = &letters[..rng.gen_range(2..=4)];
    let mut store = PatternStore::new();
    for _ in 0..rng.gen_range(1..=2) {
        let w = random_word(rng, alphabet, 3);
        let ids: Vec<usize> = (0..w.len()).filter(|_| rng.gen_bool(0.25)).collect();
        store
            .add_pattern(&w, rng.gen_range(1..=3), &ids, Role::Old)
            .unwrap();
    }
    let w = random_word(rng, alphabet, 4);
    store.add_pattern(&w, 1, &[], Role::New).unwrap();
    store
}

/// Engine parameters matching the oracle's row bound.
pub fn oracle_params() -> SearchParams {
    SearchParams {
        max_rows: icmaus::oracle::ORACLE_MAX_ROWS,
        ..SearchParams::default()
    }
}
