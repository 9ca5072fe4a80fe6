//! Context-free grammars in BNF and the codon-driven genotype-to-phenotype
//! mapping.
//!
//! A grammar file is a list of rules of the form
//!
//! ```text
//! # comment
//! <expr> ::= <expr>+<expr> |
//!            x[:,0] | x[:,1]
//! ```
//!
//! Alternatives may continue on following lines. Inside an alternative,
//! `<name>` is a nonterminal and every other run of characters is a terminal;
//! whitespace separates terminals unless it sits inside a quoted literal
//! (`"a b"` or `'a b'`). Rule order is semantic: a codon `c` selects the
//! production `c mod r` of the nonterminal being expanded.

mod derive;

pub use derive::{derive, Derivation, DerivationNode, DerivationTree, Invalid};

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// The grammar the paper-style ensembles are evolved with.
pub const ENSEMBLE_BNF: &str = include_str!("../../grammars/ensemble.bnf");
/// Reduced operator set used by the interpretable variant.
pub const ENSEMBLE_INTERP_BNF: &str = include_str!("../../grammars/ensemble_interp.bnf");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: nonterminal <{name}> is used but never defined")]
    UndefinedNonterminal { name: String, line: usize },
    #[error("line {line}: <{name}> has an empty production")]
    EmptyProduction { name: String, line: usize },
    #[error("line {line}: <{name}> is already defined on line {first}")]
    DuplicateDefinition { name: String, line: usize, first: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("grammar defines no rules")]
    NoRules,
    #[error("symbol `{0}` is used both as a terminal and a nonterminal")]
    AmbiguousSymbol(String),
}

/// A grammar symbol, referring by index into the owning [`Grammar`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Terminal(usize),
    NonTerminal(usize),
}

pub type Production = Vec<Symbol>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    rules: Vec<Vec<Production>>,
    start: usize,
    /// Minimum derivation-tree depth needed to fully expand each nonterminal,
    /// counting the nonterminal itself and terminal leaves. `None` if the
    /// nonterminal can never terminate.
    min_depths: Vec<Option<usize>>,
}

impl Grammar {
    /// Parses BNF source. The first rule's left-hand side is the start symbol.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        parse_grammar(text)
    }

    pub fn ensemble() -> Self {
        Self::parse(ENSEMBLE_BNF).expect("bundled grammar is valid")
    }

    pub fn ensemble_interp() -> Self {
        Self::parse(ENSEMBLE_INTERP_BNF).expect("bundled grammar is valid")
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn start_name(&self) -> &str {
        &self.nonterminals[self.start]
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn nonterminal_index(&self, name: &str) -> Option<usize> {
        self.nonterminals.iter().position(|n| n == name)
    }

    /// Productions of a nonterminal, in source order.
    pub fn productions(&self, nonterminal: usize) -> &[Production] {
        &self.rules[nonterminal]
    }

    pub fn terminal(&self, index: usize) -> &str {
        &self.terminals[index]
    }

    pub fn nonterminal(&self, index: usize) -> &str {
        &self.nonterminals[index]
    }

    pub fn symbol_name(&self, symbol: Symbol) -> &str {
        match symbol {
            Symbol::Terminal(t) => &self.terminals[t],
            Symbol::NonTerminal(n) => &self.nonterminals[n],
        }
    }

    pub fn min_depth(&self, nonterminal: usize) -> Option<usize> {
        self.min_depths[nonterminal]
    }

    /// Depth a node using `production` needs below itself: 1 for an all
    /// terminal production, otherwise the deepest child's minimum depth.
    pub fn production_min_depth(&self, production: &Production) -> Option<usize> {
        production_depth(production, &self.min_depths)
    }

    /// Returns a copy with one nonterminal's productions reordered so that
    /// new position `i` holds old production `order[i]`.
    pub fn with_permuted_rule(&self, nonterminal: usize, order: &[usize]) -> Self {
        let old = &self.rules[nonterminal];
        assert_eq!(order.len(), old.len(), "permutation length");
        let mut out = self.clone();
        out.rules[nonterminal] = order.iter().map(|&i| old[i].clone()).collect();
        out
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (nt, productions) in self.rules.iter().enumerate() {
            write!(f, "<{}> ::= ", self.nonterminals[nt])?;
            for (i, production) in productions.iter().enumerate() {
                if i > 0 {
                    f.write_str(" | ")?;
                }
                for symbol in production {
                    match *symbol {
                        Symbol::NonTerminal(n) => write!(f, "<{}>", self.nonterminals[n])?,
                        Symbol::Terminal(t) => write_terminal(f, &self.terminals[t])?,
                    }
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn write_terminal(f: &mut fmt::Formatter<'_>, text: &str) -> fmt::Result {
    let needs_quotes = text.is_empty()
        || text
            .chars()
            .any(|c| c.is_whitespace() || c == '|' || c == '"' || c == '\'' || c == '<');
    if !needs_quotes {
        return f.write_str(text);
    }
    if text.contains('"') {
        write!(f, "'{text}'")
    } else {
        write!(f, "\"{text}\"")
    }
}

fn production_depth(production: &Production, min_depths: &[Option<usize>]) -> Option<usize> {
    production.iter().try_fold(1usize, |acc, symbol| match *symbol {
        Symbol::Terminal(_) => Some(acc),
        Symbol::NonTerminal(n) => min_depths[n].map(|d| acc.max(d)),
    })
}

fn compute_min_depths(rules: &[Vec<Production>]) -> Vec<Option<usize>> {
    let mut depths: Vec<Option<usize>> = vec![None; rules.len()];
    loop {
        let mut changed = false;
        for (nt, productions) in rules.iter().enumerate() {
            let best = productions
                .iter()
                .filter_map(|p| production_depth(p, &depths))
                .min()
                .map(|d| d + 1);
            if best.is_some() && (depths[nt].is_none() || best < depths[nt]) {
                depths[nt] = best;
                changed = true;
            }
        }
        if !changed {
            return depths;
        }
    }
}

/// Token of a right-hand side before symbol interning.
#[derive(Debug, Clone, PartialEq)]
enum RawSymbol {
    Terminal(String),
    NonTerminal(String),
}

struct RawRule {
    name: String,
    line: usize,
    alternatives: Vec<(Vec<RawSymbol>, usize)>,
}

fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut raw_rules: Vec<RawRule> = Vec::new();
    // Right-hand side text of the rule currently being read, with the line
    // each fragment starts on.
    let mut pending: Vec<(usize, String)> = Vec::new();

    let flush = |pending: &mut Vec<(usize, String)>, raw_rules: &mut Vec<RawRule>| -> Result<(), GrammarError> {
        if pending.is_empty() {
            return Ok(());
        }
        let rule = raw_rules.last_mut().expect("pending text belongs to a rule");
        rule.alternatives = split_alternatives(&rule.name, pending)?;
        pending.clear();
        Ok(())
    };

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some((name, rhs)) = rule_head(trimmed) {
            flush(&mut pending, &mut raw_rules)?;
            if let Some(first) = raw_rules.iter().find(|r| r.name == name) {
                return Err(GrammarError::DuplicateDefinition {
                    name: name.to_string(),
                    line: line_no,
                    first: first.line,
                });
            }
            raw_rules.push(RawRule {
                name: name.to_string(),
                line: line_no,
                alternatives: Vec::new(),
            });
            pending.push((line_no, rhs.to_string()));
        } else if raw_rules.is_empty() {
            return Err(GrammarError::Syntax {
                line: line_no,
                message: format!("expected `<name> ::= ...`, found `{trimmed}`"),
            });
        } else {
            pending.push((line_no, trimmed.to_string()));
        }
    }
    flush(&mut pending, &mut raw_rules)?;

    if raw_rules.is_empty() {
        return Err(GrammarError::NoRules);
    }

    let nonterminals: Vec<String> = raw_rules.iter().map(|r| r.name.clone()).collect();
    let index: HashMap<&str, usize> = nonterminals.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let mut terminals: Vec<String> = Vec::new();
    let mut terminal_index: HashMap<String, usize> = HashMap::new();
    let mut rules = Vec::with_capacity(raw_rules.len());
    for rule in &raw_rules {
        if rule.alternatives.is_empty() {
            return Err(GrammarError::EmptyProduction {
                name: rule.name.clone(),
                line: rule.line,
            });
        }
        let mut productions = Vec::with_capacity(rule.alternatives.len());
        for (alternative, line) in &rule.alternatives {
            let mut production = Vec::with_capacity(alternative.len());
            for symbol in alternative {
                match symbol {
                    RawSymbol::NonTerminal(name) => match index.get(name.as_str()) {
                        Some(&n) => production.push(Symbol::NonTerminal(n)),
                        None => {
                            return Err(GrammarError::UndefinedNonterminal {
                                name: name.clone(),
                                line: *line,
                            })
                        }
                    },
                    RawSymbol::Terminal(text) => {
                        let next = terminals.len();
                        let t = *terminal_index.entry(text.clone()).or_insert_with(|| {
                            terminals.push(text.clone());
                            next
                        });
                        production.push(Symbol::Terminal(t));
                    }
                }
            }
            productions.push(production);
        }
        rules.push(productions);
    }

    if let Some(clash) = terminals
        .iter()
        .find(|t| t.starts_with('<') && t.ends_with('>') && index.contains_key(&t[1..t.len() - 1]))
    {
        return Err(GrammarError::AmbiguousSymbol(clash.clone()));
    }

    let min_depths = compute_min_depths(&rules);
    Ok(Grammar {
        nonterminals,
        terminals,
        rules,
        start: 0,
        min_depths,
    })
}

/// Recognizes `<name> ::= rest`, returning the name and the remaining text.
fn rule_head(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('<')?;
    let close = rest.find('>')?;
    let name = &rest[..close];
    if !is_nonterminal_name(name) {
        return None;
    }
    let after = rest[close + 1..].trim_start();
    let rhs = after.strip_prefix("::=")?;
    Some((name, rhs))
}

fn is_nonterminal_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Splits the accumulated right-hand-side text of one rule into alternatives.
fn split_alternatives(rule: &str, fragments: &[(usize, String)]) -> Result<Vec<(Vec<RawSymbol>, usize)>, GrammarError> {
    let mut alternatives = Vec::new();
    let mut current: Vec<RawSymbol> = Vec::new();
    let mut current_line = fragments[0].0;
    let mut seen_bar = false;

    for (line, text) in fragments {
        let mut chars = text.char_indices().peekable();
        let mut word = String::new();
        let push_word = |word: &mut String, current: &mut Vec<RawSymbol>| {
            if !word.is_empty() {
                current.push(RawSymbol::Terminal(std::mem::take(word)));
            }
        };
        if current.is_empty() {
            current_line = *line;
        }
        while let Some((pos, c)) = chars.next() {
            match c {
                '|' => {
                    push_word(&mut word, &mut current);
                    if current.is_empty() {
                        return Err(GrammarError::EmptyProduction {
                            name: rule.to_string(),
                            line: *line,
                        });
                    }
                    alternatives.push((std::mem::take(&mut current), current_line));
                    current_line = *line;
                    seen_bar = true;
                }
                '"' | '\'' => {
                    push_word(&mut word, &mut current);
                    let rest = &text[pos + 1..];
                    let Some(end) = rest.find(c) else {
                        return Err(GrammarError::Syntax {
                            line: *line,
                            message: format!("unterminated quoted terminal in <{rule}>"),
                        });
                    };
                    current.push(RawSymbol::Terminal(rest[..end].to_string()));
                    for _ in 0..rest[..end].chars().count() + 1 {
                        chars.next();
                    }
                }
                '<' => {
                    let rest = &text[pos + 1..];
                    match rest.find('>') {
                        Some(end) if is_nonterminal_name(&rest[..end]) => {
                            push_word(&mut word, &mut current);
                            current.push(RawSymbol::NonTerminal(rest[..end].to_string()));
                            for _ in 0..end + 1 {
                                chars.next();
                            }
                        }
                        _ => word.push(c),
                    }
                }
                c if c.is_whitespace() => push_word(&mut word, &mut current),
                c => word.push(c),
            }
        }
        push_word(&mut word, &mut current);
    }

    if current.is_empty() {
        // Trailing `|` or a bare `<s> ::=`.
        let line = if seen_bar { current_line } else { fragments[0].0 };
        return Err(GrammarError::EmptyProduction {
            name: rule.to_string(),
            line,
        });
    }
    alternatives.push((current, current_line));
    Ok(alternatives)
}
