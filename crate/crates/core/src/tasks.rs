//! Procedures built on the core: recasting a rewrite grammar as patterns,
//! and set formation, union and intersection by whole-pattern unification.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::pattern::PatternSpec;

/// One rewrite rule `lhs -> rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub lhs: String,
    pub rhs: Vec<String>,
}

/// Nonterminals are the tokens that start with an ASCII capital letter.
pub fn is_nonterminal(token: &str) -> bool {
    token.starts_with(|c: char| c.is_ascii_uppercase())
}

/// Rule `X -> body`, the i-th rule for `X` in input order, becomes
/// `X i body' #X`, where every nonterminal call `Y` in the body is written
/// `Y #Y`. The ID groups are `X i` and the closing `#X`.
pub fn recast_grammar(rules: &[Rule]) -> Result<Vec<PatternSpec>> {
    let defined: std::collections::HashSet<&str> = rules.iter().map(|r| r.lhs.as_str()).collect();
    let mut numbers: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(rules.len());
    for rule in rules {
        if rule.rhs.is_empty() {
            return Err(Error::EmptyRule(rule.lhs.clone()));
        }
        let n = numbers.entry(rule.lhs.as_str()).or_insert(0);
        *n += 1;
        let mut symbols = vec![rule.lhs.clone(), n.to_string()];
        for tok in &rule.rhs {
            symbols.push(tok.clone());
            if is_nonterminal(tok) {
                if !defined.contains(tok.as_str()) {
                    return Err(Error::UndefinedNonterminal(tok.clone()));
                }
                symbols.push(format!("#{tok}"));
            }
        }
        symbols.push(format!("#{}", rule.lhs));
        let last = symbols.len() - 1;
        out.push(PatternSpec {
            symbols,
            id_positions: vec![0, 1, last],
            frequency: 1,
        });
    }
    Ok(out)
}

/// Undoes [`recast_grammar`]: drops rule numbers and terminators.
pub fn unrecast(patterns: &[PatternSpec]) -> Result<Vec<Rule>> {
    let bad = |msg: String| Error::Format { line: 0, msg };
    let mut numbers: HashMap<String, usize> = HashMap::new();
    let mut rules = Vec::with_capacity(patterns.len());
    for p in patterns {
        let s = &p.symbols;
        if s.len() < 4 {
            return Err(bad(format!("too short for a recast rule: {}", s.join(" "))));
        }
        let lhs = s[0].clone();
        let n = numbers.entry(lhs.clone()).or_insert(0);
        *n += 1;
        if s[1] != n.to_string() || s[s.len() - 1] != format!("#{lhs}") {
            return Err(bad(format!("not a recast rule: {}", s.join(" "))));
        }
        let body = &s[2..s.len() - 1];
        let mut rhs = Vec::new();
        let mut i = 0;
        while i < body.len() {
            let tok = &body[i];
            rhs.push(tok.clone());
            if is_nonterminal(tok) {
                if body.get(i + 1) != Some(&format!("#{tok}")) {
                    return Err(bad(format!("call {tok} without terminator")));
                }
                i += 1;
            }
            i += 1;
        }
        rules.push(Rule { lhs, rhs });
    }
    Ok(rules)
}

/// Distinct patterns of a bag with their counts, in order of first occurrence.
pub fn bag_to_set(bag: &[Vec<String>]) -> Vec<(Vec<String>, usize)> {
    let mut index: BTreeMap<&[String], usize> = BTreeMap::new();
    let mut out: Vec<(Vec<String>, usize)> = Vec::new();
    for p in bag {
        match index.get(p.as_slice()) {
            Some(&i) => out[i].1 += 1,
            None => {
                index.insert(p.as_slice(), out.len());
                out.push((p.clone(), 1));
            }
        }
    }
    out
}

/// Union (Old first, then New's additions) and intersection (in Old order).
pub fn set_union_intersection(
    new_set: &[Vec<String>],
    old_set: &[Vec<String>],
) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut union: Vec<Vec<String>> = Vec::new();
    for p in old_set.iter().chain(new_set) {
        if !union.contains(p) {
            union.push(p.clone());
        }
    }
    let inter = old_set
        .iter()
        .filter(|p| new_set.contains(p))
        .cloned()
        .collect();
    (union, inter)
}
