//! Pattern files, rewrite-grammar files and the alignment picture.
//!
//! Pattern file syntax, one pattern per line:
//!
//! ```text
//! // comment
//! N 0 | j o h n | #N
//! | A 1 #A | NOT R | 0 | #R
//! mammal vertebrate #v furry warm_blood milk *6
//! ```
//!
//! `|` splits a line into groups that alternate between ID and content,
//! starting with ID; a leading `|` makes the first group content. A line
//! without `|` has no ID positions. A trailing `*N` sets the frequency.

use crate::alignment::Alignment;
use crate::error::{Error, Result};
use crate::pattern::{PatternSpec, PatternStore, Role};
use crate::tasks::Rule;

fn strip_comment(line: &str) -> &str {
    match line.find("//") {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<PatternSpec> {
    let err = |msg: &str| Error::Format {
        line: lineno,
        msg: msg.to_string(),
    };
    let mut tokens: Vec<&str> = line.split_whitespace().collect();
    let mut frequency = 1;
    if let Some(last) = tokens.last() {
        if let Some(n) = last.strip_prefix('*') {
            frequency = n
                .parse::<u64>()
                .ok()
                .filter(|&f| f >= 1)
                .ok_or_else(|| err("bad frequency"))?;
            tokens.pop();
        }
    }
    if tokens.is_empty() {
        return Err(err("empty pattern"));
    }
    let mut groups: Vec<Vec<&str>> = vec![Vec::new()];
    for t in &tokens {
        if *t == "|" {
            groups.push(Vec::new());
        } else if t.contains('|') {
            return Err(err("'|' must stand alone"));
        } else {
            groups.last_mut().unwrap().push(t);
        }
    }
    let mut symbols = Vec::new();
    let mut id_positions = Vec::new();
    if groups.len() > 1 {
        let mut id = true;
        if groups[0].is_empty() {
            groups.remove(0);
            id = false;
        }
        for g in &groups {
            if g.is_empty() {
                return Err(err("empty group"));
            }
            for t in g {
                if id {
                    id_positions.push(symbols.len());
                }
                symbols.push(t.to_string());
            }
            id = !id;
        }
    } else {
        symbols = groups[0].iter().map(|t| t.to_string()).collect();
    }
    Ok(PatternSpec {
        symbols,
        id_positions,
        frequency,
    })
}

/// One pattern per non-empty, non-comment line.
pub fn parse_grammar_file(text: &str) -> Result<Vec<PatternSpec>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)))
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| parse_line(l, n))
        .collect()
}

/// Writes patterns back in the file syntax; `parse_grammar_file` inverts it.
pub fn serialize_patterns(patterns: &[PatternSpec]) -> String {
    let mut out = String::new();
    for p in patterns {
        let mut toks: Vec<&str> = Vec::new();
        if !p.id_positions.is_empty() {
            let mut in_id = true;
            if !p.id_positions.contains(&0) {
                toks.push("|");
                in_id = false;
            }
            for (i, s) in p.symbols.iter().enumerate() {
                let is_id = p.id_positions.contains(&i);
                if is_id != in_id {
                    toks.push("|");
                    in_id = is_id;
                }
                toks.push(s);
            }
        } else {
            toks.extend(p.symbols.iter().map(String::as_str));
        }
        out.push_str(&toks.join(" "));
        if p.frequency != 1 {
            out.push_str(&format!(" *{}", p.frequency));
        }
        out.push('\n');
    }
    out
}

/// A store from an Old pattern file and a New file holding exactly one
/// pattern.
pub fn load_store(old_text: &str, new_text: &str) -> Result<PatternStore> {
    let old = parse_grammar_file(old_text)?;
    let new = parse_grammar_file(new_text)?;
    match new.len() {
        0 => return Err(Error::EmptyNew),
        1 => {}
        n => return Err(Error::NewCount(n)),
    }
    let mut store = PatternStore::new();
    for p in &old {
        store.add_spec(p, Role::Old)?;
    }
    store.add_spec(&new[0], Role::New)?;
    Ok(store)
}

/// Rewrite rules, one per line: `F -> ( F R F )`.
pub fn parse_bnf(text: &str) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Format {
            line: i + 1,
            msg: msg.to_string(),
        };
        let (lhs, rhs) = line.split_once("->").ok_or_else(|| err("missing '->'"))?;
        let lhs = lhs.trim();
        if lhs.is_empty() || lhs.contains(char::is_whitespace) {
            return Err(err("left-hand side must be one symbol"));
        }
        rules.push(Rule {
            lhs: lhs.to_string(),
            rhs: rhs.split_whitespace().map(String::from).collect(),
        });
    }
    Ok(rules)
}

/// Display order of rows: New first, then repeatedly the remaining row that
/// shares the most columns with the last row placed (ties: most shared with
/// any placed row, then lowest row index).
pub fn display_order(a: &Alignment) -> Vec<usize> {
    let n = a.row_count();
    let mut share = vec![vec![0usize; n]; n];
    for col in a.columns() {
        for x in &col.cells {
            for y in &col.cells {
                if x.row != y.row {
                    share[x.row][y.row] += 1;
                }
            }
        }
    }
    let mut order = vec![0];
    let mut left: Vec<usize> = (1..n).collect();
    while !left.is_empty() {
        let last = *order.last().unwrap();
        let (k, _) = left
            .iter()
            .enumerate()
            .max_by_key(|&(_, &r)| {
                let any: usize = order.iter().map(|&o| share[o][r]).sum();
                (share[last][r], any, std::cmp::Reverse(r))
            })
            .unwrap();
        order.push(left.remove(k));
    }
    order
}

/// The alignment as a picture: one line per row, labelled with its display
/// number at both ends, matched symbols stacked in one column, and a `|`
/// between vertically adjacent rows wherever both have a cell in a column.
pub fn render_alignment(a: &Alignment, store: &PatternStore) -> String {
    let order = display_order(a);
    let n = order.len();
    let label_w = (n - 1).to_string().len();
    let per_row = a.cell_columns();
    let mut present = vec![vec![false; a.columns().len()]; a.row_count()];
    for (r, cols) in per_row.iter().enumerate() {
        for &c in cols {
            present[r][c] = true;
        }
    }
    let names: Vec<&str> = a
        .columns()
        .iter()
        .map(|c| store.table().name(c.symbol))
        .collect();
    let widths: Vec<usize> = names.iter().map(|s| s.chars().count()).collect();

    let row_line = |disp: usize, r: usize| -> String {
        let mut s = format!("{disp:>label_w$}");
        for (c, name) in names.iter().enumerate() {
            s.push(' ');
            if present[r][c] {
                s.push_str(name);
            } else {
                s.push_str(&" ".repeat(widths[c]));
            }
        }
        s.push_str(&format!(" {disp}"));
        s
    };
    let bar_line = |r1: usize, r2: usize| -> String {
        let mut s = " ".repeat(label_w);
        for (c, w) in widths.iter().enumerate() {
            s.push(' ');
            if present[r1][c] && present[r2][c] {
                s.push('|');
                s.push_str(&" ".repeat(w - 1));
            } else {
                s.push_str(&" ".repeat(*w));
            }
        }
        s.trim_end().to_string()
    };

    let mut out = String::new();
    for (d, &r) in order.iter().enumerate() {
        if d > 0 {
            out.push_str(&bar_line(order[d - 1], r));
            out.push('\n');
        }
        out.push_str(&row_line(d, r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::PairwiseMatch;

    #[test]
    fn noun_line() {
        let p = parse_grammar_file("N 0 | j o h n | #N").unwrap();
        assert_eq!(p[0].symbols.len(), 7);
        assert_eq!(p[0].id_positions, vec![0, 1, 6]);
        assert_eq!(p[0].frequency, 1);
    }

    #[test]
    fn frequency_suffix_and_no_ids() {
        let p = parse_grammar_file("mammal vertebrate #v furry warm_blood milk #m *6").unwrap();
        assert_eq!(p[0].frequency, 6);
        assert!(p[0].id_positions.is_empty());
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = parse_grammar_file("// comment\n\n  a b // trailing\n").unwrap();
        assert_eq!(p, vec![PatternSpec::plain(&["a", "b"])]);
    }

    #[test]
    fn leading_bar_starts_with_content() {
        let p = parse_grammar_file("| A 1 #A | NOT R | 0 | #R").unwrap();
        assert_eq!(p[0].id_positions, vec![3, 4, 6]);
    }

    #[test]
    fn format_errors() {
        for bad in ["a b *x", "a *0", "*3", "a | | b", "a b |", "a|b"] {
            assert!(
                matches!(parse_grammar_file(bad), Err(Error::Format { line: 1, .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn serialize_round_trip() {
        let text = "N 0 | j o h n | #N\n| A 1 #A | NOT R | 0 | #R\na b *3\nX | y *2\n";
        let p = parse_grammar_file(text).unwrap();
        assert_eq!(serialize_patterns(&p), text);
    }

    #[test]
    fn bnf_lines() {
        let r = parse_bnf("F -> ( F R F )\n// x\nR -> =>\n").unwrap();
        assert_eq!(r[0].rhs.len(), 5);
        assert_eq!(r[1].rhs, vec!["=>".to_string()]);
        assert!(parse_bnf("F ( F )").is_err());
    }

    #[test]
    fn new_file_must_hold_one_pattern() {
        assert_eq!(load_store("a", "").unwrap_err(), Error::EmptyNew);
        assert_eq!(load_store("a", "a\nb").unwrap_err(), Error::NewCount(2));
    }

    #[test]
    fn single_row_has_no_bars() {
        let s = load_store("x", "a b").unwrap();
        let a = Alignment::new_only(&s).unwrap();
        assert_eq!(render_alignment(&a, &s), "0 a b 0\n");
    }

    #[test]
    fn bars_between_matching_symbols() {
        let s = load_store("x a y b", "a b").unwrap();
        let a = Alignment::new_only(&s).unwrap();
        let a = a
            .extend_with_pattern(
                &s,
                0,
                &PairwiseMatch {
                    pairs: vec![(0, 1), (1, 3)],
                    gain: 0.0,
                },
            )
            .unwrap();
        let pic = render_alignment(&a, &s);
        let lines: Vec<&str> = pic.lines().collect();
        assert_eq!(lines.len(), 3);
        for (i, _) in lines[1].char_indices().filter(|(_, c)| *c == '|') {
            let up = lines[0][i..].chars().next().unwrap();
            let down = lines[2][i..].chars().next().unwrap();
            assert_eq!(up, down);
            assert!(up != ' ');
        }
        assert_eq!(lines[1].matches('|').count(), 2);
    }
}
