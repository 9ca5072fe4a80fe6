use super::{Grammar, Symbol};

/// Why a genome failed to map to a complete phenotype.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invalid {
    /// Nonterminals remained when the genome ran out of codons.
    CodonsExhausted,
    /// An expansion would have placed a node deeper than the limit.
    DepthExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationNode {
    pub symbol: Symbol,
    pub children: Vec<usize>,
    /// `(production index, codon)` for expanded nonterminals.
    pub choice: Option<(usize, u32)>,
    pub depth: usize,
}

/// A complete derivation tree. Node 0 is the root; nodes are stored in the
/// order they were created.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTree<'g> {
    grammar: &'g Grammar,
    nodes: Vec<DerivationNode>,
    codons: Vec<u32>,
    depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Derivation<'g> {
    Complete(DerivationTree<'g>),
    Invalid(Invalid),
}

impl<'g> Derivation<'g> {
    pub fn tree(&self) -> Option<&DerivationTree<'g>> {
        match self {
            Derivation::Complete(tree) => Some(tree),
            Derivation::Invalid(_) => None,
        }
    }

    pub fn into_tree(self) -> Option<DerivationTree<'g>> {
        match self {
            Derivation::Complete(tree) => Some(tree),
            Derivation::Invalid(_) => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, Derivation::Complete(_))
    }
}

impl<'g> DerivationTree<'g> {
    pub fn grammar(&self) -> &'g Grammar {
        self.grammar
    }

    pub fn nodes(&self) -> &[DerivationNode] {
        &self.nodes
    }

    pub fn root(&self) -> &DerivationNode {
        &self.nodes[0]
    }

    /// Codons consumed, in derivation order. This is the effective prefix of
    /// the genome.
    pub fn consumed_codons(&self) -> &[u32] {
        &self.codons
    }

    /// Longest root-to-leaf path, counted in nodes.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Concatenation of the terminal leaves, left to right.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            match node.symbol {
                Symbol::Terminal(t) => out.push_str(self.grammar.terminal(t)),
                Symbol::NonTerminal(_) => stack.extend(node.children.iter().rev()),
            }
        }
        out
    }
}

/// Maps a genome to a derivation tree by leftmost expansion.
///
/// Every nonterminal expansion consumes the next codon `c` and applies
/// production `c mod r`, including nonterminals with a single production.
/// The genome is read once; there is no wrapping.
pub fn derive<'g>(grammar: &'g Grammar, genome: &[u32], max_depth: usize) -> Derivation<'g> {
    let mut nodes = vec![DerivationNode {
        symbol: Symbol::NonTerminal(grammar.start()),
        children: Vec::new(),
        choice: None,
        depth: 1,
    }];
    let mut codons = Vec::new();
    let mut depth = 1;
    if max_depth < 1 {
        return Derivation::Invalid(Invalid::DepthExceeded);
    }

    // Nonterminal node ids awaiting expansion, leftmost on top.
    let mut pending = vec![0usize];
    while let Some(id) = pending.pop() {
        let Symbol::NonTerminal(nt) = nodes[id].symbol else {
            unreachable!("only nonterminals are queued");
        };
        let Some(&codon) = genome.get(codons.len()) else {
            return Derivation::Invalid(Invalid::CodonsExhausted);
        };
        let child_depth = nodes[id].depth + 1;
        if child_depth > max_depth {
            return Derivation::Invalid(Invalid::DepthExceeded);
        }
        codons.push(codon);

        let productions = grammar.productions(nt);
        let choice = codon as usize % productions.len();
        let first_child = nodes.len();
        for &symbol in &productions[choice] {
            nodes.push(DerivationNode {
                symbol,
                children: Vec::new(),
                choice: None,
                depth: child_depth,
            });
        }
        let last_child = nodes.len();
        depth = depth.max(child_depth);
        nodes[id].children = (first_child..last_child).collect();
        nodes[id].choice = Some((choice, codon));
        for child in (first_child..last_child).rev() {
            if matches!(nodes[child].symbol, Symbol::NonTerminal(_)) {
                pending.push(child);
            }
        }
    }

    Derivation::Complete(DerivationTree {
        grammar,
        nodes,
        codons,
        depth,
    })
}
