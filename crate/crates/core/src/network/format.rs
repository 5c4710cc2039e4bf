//! Line-oriented text format for discrete networks.
//!
//! ```text
//! # comment
//! node rain { states: no, yes }
//! node wet { states: no, yes }
//! cpt rain { 0.8 0.2 }
//! cpt wet | rain {
//!   0.9 0.2
//!   0.1 0.8
//! }
//! ```
//!
//! Node declarations must appear in topological order: every parent named in
//! a `cpt` block has to be declared before the child. CPT tables are written
//! row-major with one row per child state and one column per parent
//! configuration (first parent most significant). Commas between numbers
//! are optional.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Cpt, DiscreteBayesNet, NetworkError};
use crate::dag::Dag;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid network: {0}")]
    Validation(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Spanned> {
    let mut out = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut chars = line.char_indices().peekable();
        while let Some(&(ci, c)) = chars.peek() {
            if c.is_whitespace() {
                chars.next();
            } else if "{}|,:".contains(c) {
                out.push(Spanned { tok: Tok::Punct(c), line: li + 1, column: ci + 1 });
                chars.next();
            } else {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || "{}|,:".contains(c) {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                out.push(Spanned { tok: Tok::Word(word), line: li + 1, column: ci + 1 });
            }
        }
    }
    out
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn err<T>(&self, at: Option<&Spanned>, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, column) = at.map(|s| (s.line, s.column)).unwrap_or(self.eof);
        Err(ParseError::Syntax { line, column, message: message.into() })
    }

    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn word(&mut self, what: &str) -> Result<(String, Spanned), ParseError> {
        match self.next() {
            Some(s) => match &s.tok {
                Tok::Word(w) => Ok((w.clone(), s.clone())),
                Tok::Punct(c) => self.err(Some(&s), format!("expected {what}, found `{c}`")),
            },
            None => self.err(None, format!("expected {what}, found end of input")),
        }
    }

    fn punct(&mut self, want: char) -> Result<(), ParseError> {
        match self.next() {
            Some(Spanned { tok: Tok::Punct(c), .. }) if c == want => Ok(()),
            Some(s) => {
                let found = match &s.tok {
                    Tok::Word(w) => w.clone(),
                    Tok::Punct(c) => c.to_string(),
                };
                self.err(Some(&s), format!("expected `{want}`, found `{found}`"))
            }
            None => self.err(None, format!("expected `{want}`, found end of input")),
        }
    }

    fn at_punct(&self, want: char) -> bool {
        matches!(self.peek(), Some(Spanned { tok: Tok::Punct(c), .. }) if *c == want)
    }

    /// `a, b, c` (at least one item).
    fn word_list(&mut self, what: &str) -> Result<Vec<(String, Spanned)>, ParseError> {
        let mut items = vec![self.word(what)?];
        while self.at_punct(',') {
            self.next();
            items.push(self.word(what)?);
        }
        Ok(items)
    }
}

struct CptBlock {
    parents: Vec<usize>,
    values: Vec<f64>,
}

pub fn parse_network(text: &str) -> Result<DiscreteBayesNet, ParseError> {
    let toks = tokenize(text);
    let eof = (text.lines().count().max(1), 1);
    let mut p = Parser { toks, pos: 0, eof };

    let mut names: Vec<String> = Vec::new();
    let mut states: Vec<Vec<String>> = Vec::new();
    let mut blocks: Vec<Option<CptBlock>> = Vec::new();

    while p.peek().is_some() {
        let (kw, kw_at) = p.word("`node` or `cpt`")?;
        match kw.as_str() {
            "node" => {
                let (name, at) = p.word("node name")?;
                if names.contains(&name) {
                    return p.err(Some(&at), format!("node `{name}` declared twice"));
                }
                p.punct('{')?;
                let (key, key_at) = p.word("`states`")?;
                if key != "states" {
                    return p.err(Some(&key_at), format!("expected `states`, found `{key}`"));
                }
                p.punct(':')?;
                let list = p.word_list("state label")?;
                p.punct('}')?;
                let labels: Vec<String> = list.into_iter().map(|(w, _)| w).collect();
                for (i, l) in labels.iter().enumerate() {
                    if labels[..i].contains(l) {
                        return p.err(Some(&at), format!("state `{l}` repeated in `{name}`"));
                    }
                }
                names.push(name);
                states.push(labels);
                blocks.push(None);
            }
            "cpt" => {
                let (name, at) = p.word("node name")?;
                let Some(child) = names.iter().position(|n| *n == name) else {
                    return p.err(Some(&at), format!("cpt for undeclared node `{name}`"));
                };
                if blocks[child].is_some() {
                    return p.err(Some(&at), format!("second cpt for `{name}`"));
                }
                let mut parents = Vec::new();
                if p.at_punct('|') {
                    p.next();
                    for (pn, pat) in p.word_list("parent name")? {
                        match names.iter().position(|n| *n == pn) {
                            Some(pi) if pi < child => {
                                if parents.contains(&pi) {
                                    return p.err(Some(&pat), format!("parent `{pn}` repeated"));
                                }
                                parents.push(pi);
                            }
                            Some(_) => {
                                return p.err(
                                    Some(&pat),
                                    format!("parent `{pn}` must be declared before `{name}`"),
                                )
                            }
                            None => {
                                return p.err(Some(&pat), format!("undeclared parent `{pn}`"))
                            }
                        }
                    }
                }
                p.punct('{')?;
                let mut rows = Vec::new();
                loop {
                    match p.peek().cloned() {
                        Some(Spanned { tok: Tok::Punct('}'), .. }) => {
                            p.next();
                            break;
                        }
                        Some(Spanned { tok: Tok::Punct(','), .. }) => {
                            p.next();
                        }
                        _ => {
                            let (w, wat) = p.word("probability")?;
                            match w.parse::<f64>() {
                                Ok(v) if v.is_finite() => rows.push(v),
                                _ => return p.err(Some(&wat), format!("`{w}` is not a probability")),
                            }
                        }
                    }
                }
                let cards: usize = parents.iter().map(|&q: &usize| states[q].len()).product();
                let k = states[child].len();
                if rows.len() != cards * k {
                    return p.err(
                        Some(&at),
                        format!("cpt `{name}` has {} entries, expected {}", rows.len(), cards * k),
                    );
                }
                // Row-major (state, config) to column-major storage.
                let mut values = vec![0.0; rows.len()];
                for s in 0..k {
                    for j in 0..cards {
                        values[j * k + s] = rows[s * cards + j];
                    }
                }
                blocks[child] = Some(CptBlock { parents, values });
            }
            other => {
                return p.err(Some(&kw_at), format!("expected `node` or `cpt`, found `{other}`"));
            }
        }
    }

    let mut parent_lists = Vec::with_capacity(names.len());
    let mut cpts = Vec::with_capacity(names.len());
    for (i, block) in blocks.into_iter().enumerate() {
        let Some(block) = block else {
            return p.err(None, format!("missing cpt for `{}`", names[i]));
        };
        let configs = block.values.len() / states[i].len();
        cpts.push(Cpt::new(states[i].len(), configs, block.values));
        parent_lists.push(block.parents);
    }
    let dag = Dag::from_parents(&names, parent_lists).map_err(NetworkError::from)?;
    Ok(DiscreteBayesNet::new(dag, states, cpts)?)
}

/// Writes nodes in topological order (lowest index first among ready
/// nodes), so networks whose index order is already topological round-trip
/// with identical node indices.
pub fn serialize_network(bn: &DiscreteBayesNet) -> String {
    let dag = bn.dag();
    let order = dag.topological_order().expect("network DAG is acyclic");
    let mut out = String::new();
    for &i in &order {
        let _ = writeln!(out, "node {} {{ states: {} }}", dag.name(i), bn.states(i).join(", "));
    }
    for &i in &order {
        let parents: Vec<&str> = dag.parents(i).iter().map(|&p| dag.name(p)).collect();
        out.push('\n');
        if parents.is_empty() {
            let _ = writeln!(out, "cpt {} {{", dag.name(i));
        } else {
            let _ = writeln!(out, "cpt {} | {} {{", dag.name(i), parents.join(", "));
        }
        let cpt = bn.cpt(i);
        for s in 0..cpt.states() {
            let row: Vec<String> = (0..cpt.configs()).map(|j| format!("{}", cpt.prob(s, j))).collect();
            let _ = writeln!(out, "  {}", row.join(" "));
        }
        out.push_str("}\n");
    }
    out
}
