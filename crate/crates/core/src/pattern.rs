//! Interned symbols, patterns and the New/Old pattern store.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// An interned atomic mark. Two symbols are equal iff their names are
/// byte-identical; the wrapped value is the dense type id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u32);

impl Symbol {
    pub fn type_id(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub(crate) fn from_index(i: usize) -> Self {
        Symbol(i as u32)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    names: Vec<String>,
    counts: Vec<u64>,
    lookup: HashMap<String, Symbol>,
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains('|') || name.chars().any(char::is_whitespace) {
        return Err(Error::BadSymbol(name.to_string()));
    }
    Ok(())
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Result<Symbol> {
        if let Some(&sym) = self.lookup.get(name) {
            return Ok(sym);
        }
        check_name(name)?;
        let sym = Symbol(self.names.len() as u32);
        self.names.push(name.to_string());
        self.counts.push(0);
        self.lookup.insert(name.to_string(), sym);
        Ok(sym)
    }

    pub fn get(&self, name: &str) -> Option<Symbol> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, sym: Symbol) -> &str {
        &self.names[sym.index()]
    }

    /// Weighted occurrence count of a symbol type.
    pub fn frequency(&self, sym: Symbol) -> u64 {
        self.counts[sym.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.names.len() as u32).map(Symbol)
    }

    fn bump(&mut self, sym: Symbol, by: u64) {
        self.counts[sym.index()] += by;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Old,
    New,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub id: String,
    pub role: Role,
    pub symbols: Vec<Symbol>,
    pub frequency: u64,
    is_id: Vec<bool>,
}

impl Pattern {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Whether `pos` is a code (ID-group) position.
    pub fn is_id(&self, pos: usize) -> bool {
        self.is_id[pos]
    }

    pub fn id_positions(&self) -> Vec<usize> {
        (0..self.is_id.len()).filter(|&p| self.is_id[p]).collect()
    }

    pub fn has_id_groups(&self) -> bool {
        self.is_id.iter().any(|&b| b)
    }
}

/// A pattern as written in a file, before its symbols are interned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSpec {
    pub symbols: Vec<String>,
    pub id_positions: Vec<usize>,
    pub frequency: u64,
}

impl PatternSpec {
    pub fn plain<S: AsRef<str>>(symbols: &[S]) -> Self {
        Self {
            symbols: symbols.iter().map(|s| s.as_ref().to_string()).collect(),
            id_positions: Vec::new(),
            frequency: 1,
        }
    }
}

/// Old and New patterns plus the symbol table they are interned in.
/// Patterns are never mutated after insertion.
#[derive(Debug, Clone, Default)]
pub struct PatternStore {
    patterns: Vec<Pattern>,
    table: SymbolTable,
    old_count: usize,
    new_count: usize,
}

impl PatternStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn intern(&mut self, name: &str) -> Result<Symbol> {
        self.table.intern(name)
    }

    pub fn add_pattern<S: AsRef<str>>(
        &mut self,
        names: &[S],
        frequency: u64,
        id_positions: &[usize],
        role: Role,
    ) -> Result<&Pattern> {
        if names.is_empty() {
            return Err(Error::EmptyPattern);
        }
        if frequency < 1 {
            return Err(Error::ZeroFrequency);
        }
        let mut is_id = vec![false; names.len()];
        for &p in id_positions {
            if p >= names.len() {
                return Err(Error::BadIdPosition {
                    position: p,
                    len: names.len(),
                });
            }
            is_id[p] = true;
        }
        // validate every name before touching the table so a failure leaves no trace
        for n in names {
            if self.table.get(n.as_ref()).is_none() {
                check_name(n.as_ref())?;
            }
        }
        let symbols = names
            .iter()
            .map(|n| self.table.intern(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        for &s in &symbols {
            self.table.bump(s, frequency);
        }
        let id = match role {
            Role::Old => {
                self.old_count += 1;
                format!("o{}", self.old_count)
            }
            Role::New => {
                self.new_count += 1;
                format!("n{}", self.new_count)
            }
        };
        self.patterns.push(Pattern {
            id,
            role,
            symbols,
            frequency,
            is_id,
        });
        Ok(self.patterns.last().unwrap())
    }

    pub fn add_spec(&mut self, spec: &PatternSpec, role: Role) -> Result<&Pattern> {
        self.add_pattern(&spec.symbols, spec.frequency, &spec.id_positions, role)
    }

    /// Index of a pattern in [`PatternStore::patterns`].
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.patterns.iter().position(|p| p.id == id)
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn old_patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.patterns.iter().filter(|p| p.role == Role::Old)
    }

    pub fn new_patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.patterns.iter().filter(|p| p.role == Role::New)
    }

    pub fn pattern(&self, id: &str) -> Option<&Pattern> {
        self.patterns.iter().find(|p| p.id == id)
    }

    /// The single New pattern, or an error if there are none or several.
    pub fn the_new(&self) -> Result<&Pattern> {
        let mut it = self.new_patterns();
        match (it.next(), it.next()) {
            (Some(p), None) => Ok(p),
            (None, _) => Err(Error::EmptyNew),
            _ => Err(Error::NewCount(self.new_patterns().count())),
        }
    }

    /// Weighted occurrence counts per symbol type, over Old and New.
    pub fn symbol_frequencies(&self) -> BTreeMap<Symbol, u64> {
        self.table
            .symbols()
            .filter(|&s| self.table.frequency(s) > 0)
            .map(|s| (s, self.table.frequency(s)))
            .collect()
    }

    pub fn names(&self, symbols: &[Symbol]) -> Vec<String> {
        symbols
            .iter()
            .map(|&s| self.table.name(s).to_string())
            .collect()
    }

    /// A fresh store holding this store's Old patterns (same ids, same order)
    /// and `new_names` as its only New pattern.
    pub fn with_new<S: AsRef<str>>(&self, new_names: &[S]) -> Result<PatternStore> {
        let mut out = PatternStore::new();
        for p in self.old_patterns() {
            let names = self.names(&p.symbols);
            out.add_pattern(&names, p.frequency, &p.id_positions(), Role::Old)?;
        }
        out.add_pattern(new_names, 1, &[], Role::New)?;
        Ok(out)
    }
}
