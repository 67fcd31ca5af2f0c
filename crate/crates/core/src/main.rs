use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use icmaus::coding::{alignment_probabilities, retrieve_by_code, CostModel};
use icmaus::io::{load_store, parse_bnf, parse_grammar_file, render_alignment, serialize_patterns};
use icmaus::search::{beam_search, SearchParams};
use icmaus::tasks::{bag_to_set, recast_grammar, set_union_intersection};
use icmaus::PatternSpec;

#[derive(Parser)]
#[command(
    name = "icmaus",
    about = "Compression by multiple alignment, unification and search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SearchArgs {
    /// Beam width
    #[arg(long, default_value_t = 50)]
    beam: usize,
    /// Matches kept per (alignment, pattern) pair
    #[arg(long, default_value_t = 10)]
    kbest: usize,
    #[arg(long, default_value_t = 8)]
    max_cycles: usize,
    /// Rows per alignment, New included
    #[arg(long, default_value_t = 12)]
    max_rows: usize,
    /// Skip the extra pass that explains New from left to right
    #[arg(long)]
    no_left_to_right: bool,
}

impl SearchArgs {
    fn params(&self, full: bool) -> SearchParams {
        SearchParams {
            beam_width: self.beam,
            kbest: self.kbest,
            max_cycles: self.max_cycles,
            max_rows: self.max_rows,
            require_full_new_coverage: full,
            left_to_right: !self.no_left_to_right,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Align New against Old and print the best alignments
    Align {
        #[arg(long)]
        old: String,
        #[arg(long)]
        new: String,
        #[arg(long, default_value_t = 1)]
        top: usize,
        #[command(flatten)]
        search: SearchArgs,
        /// Only alignments that match every New symbol
        #[arg(long)]
        full_coverage: bool,
        /// Append relative probabilities of the printed alignments
        #[arg(long)]
        probs: bool,
        /// Print canonical text instead of the picture
        #[arg(long)]
        canonical: bool,
    },
    /// Decode a code into the pattern it stands for
    Retrieve {
        #[arg(long)]
        old: String,
        /// Code symbols, space separated
        #[arg(long)]
        code: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Rewrite a grammar of `X -> ...` rules as patterns
    Recast {
        #[arg(long)]
        bnf: String,
    },
    /// Set formation, union and intersection of patterns
    Setops {
        #[arg(long)]
        old: String,
        #[arg(long)]
        new: String,
        #[arg(long, value_enum)]
        op: SetOp,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SetOp {
    Toset,
    Union,
    Intersect,
}

fn read(path: &str) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))
}

fn symbols_of(specs: Vec<PatternSpec>) -> Vec<Vec<String>> {
    specs.into_iter().map(|p| p.symbols).collect()
}

fn print_set(set: &[Vec<String>]) -> String {
    let specs: Vec<PatternSpec> = set.iter().map(|p| PatternSpec::plain(p)).collect();
    serialize_patterns(&specs)
}

fn run(cli: Cli) -> Result<String, String> {
    let err = |e: icmaus::Error| e.to_string();
    match cli.command {
        Command::Align {
            old,
            new,
            top,
            search,
            full_coverage,
            probs,
            canonical,
        } => {
            let store = load_store(&read(&old)?, &read(&new)?).map_err(err)?;
            let model = CostModel::for_store(&store).map_err(err)?;
            let outcome =
                beam_search(&store, &model, &search.params(full_coverage)).map_err(err)?;
            let shown: Vec<_> = outcome.ranked.iter().take(top.max(1)).collect();
            let mut out = String::new();
            for (i, s) in shown.iter().enumerate() {
                out.push_str(&format!(
                    "alignment {} cd {:.4} b_new {:.4} b_enc {:.4}\n",
                    i + 1,
                    s.score.cd,
                    s.score.b_new,
                    s.score.b_enc
                ));
                if canonical {
                    out.push_str(&s.canonical);
                } else {
                    out.push_str(&render_alignment(&s.alignment, &store));
                }
                out.push('\n');
            }
            if probs {
                let cds: Vec<f64> = shown.iter().map(|s| s.score.cd).collect();
                out.push_str("probabilities\n");
                for (i, p) in alignment_probabilities(&cds).iter().enumerate() {
                    out.push_str(&format!("{} {p:.6}\n", i + 1));
                }
            }
            Ok(out)
        }
        Command::Retrieve { old, code, search } => {
            let specs = parse_grammar_file(&read(&old)?).map_err(err)?;
            let mut store = icmaus::PatternStore::new();
            for p in &specs {
                store.add_spec(p, icmaus::Role::Old).map_err(err)?;
            }
            let code: Vec<&str> = code.split_whitespace().collect();
            let pattern = retrieve_by_code(&code, &store, &search.params(true)).map_err(err)?;
            Ok(format!("{}\n", pattern.join(" ")))
        }
        Command::Recast { bnf } => {
            let rules = parse_bnf(&read(&bnf)?).map_err(err)?;
            let patterns = recast_grammar(&rules).map_err(err)?;
            Ok(serialize_patterns(&patterns))
        }
        Command::Setops { old, new, op } => {
            let old = symbols_of(parse_grammar_file(&read(&old)?).map_err(err)?);
            let new = symbols_of(parse_grammar_file(&read(&new)?).map_err(err)?);
            match op {
                SetOp::Toset => {
                    let specs: Vec<PatternSpec> = bag_to_set(&new)
                        .into_iter()
                        .map(|(symbols, n)| PatternSpec {
                            frequency: n as u64,
                            ..PatternSpec::plain(&symbols)
                        })
                        .collect();
                    Ok(serialize_patterns(&specs))
                }
                SetOp::Union | SetOp::Intersect => {
                    let dedup = |bag: &[Vec<String>]| -> Vec<Vec<String>> {
                        bag_to_set(bag).into_iter().map(|(p, _)| p).collect()
                    };
                    let (union, inter) = set_union_intersection(&dedup(&new), &dedup(&old));
                    Ok(print_set(if matches!(op, SetOp::Union) {
                        &union
                    } else {
                        &inter
                    }))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(out) => {
            // a closed pipe (e.g. `| head`) is not an error worth a panic
            let _ = std::io::Write::write_all(&mut std::io::stdout(), out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
