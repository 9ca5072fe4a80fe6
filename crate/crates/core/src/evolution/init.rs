use rand::Rng;

use crate::grammar::{Grammar, Symbol};

use super::{EvolutionError, Genome};

/// Grows one random derivation within `max_depth` and returns the codons that
/// reproduce it under leftmost mapping.
///
/// At each nonterminal only productions that can still finish inside the
/// depth budget are eligible, so recursive productions drop out as the
/// budget runs low and growth always completes. The chosen production index
/// is written back as `choice + r * k` for a random `k`, keeping the residue
/// and the codon inside `[0, codon_domain)`.
pub fn grow_genome<R: Rng + ?Sized>(
    grammar: &Grammar,
    max_depth: usize,
    codon_domain: u32,
    rng: &mut R,
) -> Result<Genome, EvolutionError> {
    let start = grammar.start();
    match grammar.min_depth(start) {
        Some(d) if d <= max_depth => {}
        _ => return Err(EvolutionError::GrammarNotGrowable { max_depth }),
    }
    let mut codons = Vec::new();
    grow(grammar, start, 1, max_depth, codon_domain, rng, &mut codons);
    Ok(Genome::from_vec(codons))
}

fn grow<R: Rng + ?Sized>(
    grammar: &Grammar,
    nonterminal: usize,
    depth: usize,
    max_depth: usize,
    codon_domain: u32,
    rng: &mut R,
    codons: &mut Vec<u32>,
) {
    let productions = grammar.productions(nonterminal);
    let feasible: Vec<usize> = (0..productions.len())
        .filter(|&i| {
            grammar
                .production_min_depth(&productions[i])
                .is_some_and(|d| depth + d <= max_depth)
        })
        .collect();
    debug_assert!(!feasible.is_empty(), "caller checked the budget");
    let choice = feasible[rng.gen_range(0..feasible.len())];
    codons.push(encode_choice(choice, productions.len(), codon_domain, rng));
    for symbol in &productions[choice] {
        if let Symbol::NonTerminal(child) = *symbol {
            grow(grammar, child, depth + 1, max_depth, codon_domain, rng, codons);
        }
    }
}

/// A random codon in `[0, codon_domain)` whose residue mod `rule_count` is
/// `choice`.
pub fn encode_choice<R: Rng + ?Sized>(choice: usize, rule_count: usize, codon_domain: u32, rng: &mut R) -> u32 {
    let r = rule_count as u64;
    let c = choice as u64;
    let max_k = (codon_domain as u64 - 1 - c) / r;
    (c + r * rng.gen_range(0..=max_k)) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::derive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grown_genomes_derive_within_budget() {
        let g = Grammar::ensemble();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let genome = grow_genome(&g, 10, 65536, &mut rng).unwrap();
            let tree = derive(&g, genome.codons(), 10)
                .into_tree()
                .expect("valid by construction");
            assert!(tree.depth() <= 10);
            assert_eq!(tree.consumed_codons(), genome.codons());
        }
    }

    #[test]
    fn encode_keeps_residue() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let c = encode_choice(14, 15, 65536, &mut rng);
            assert_eq!(c % 15, 14);
            assert!(c < 65536);
        }
        assert_eq!(encode_choice(0, 1, 1, &mut rng), 0);
    }

    #[test]
    fn not_growable() {
        let g = Grammar::parse("<s> ::= <t>\n<t> ::= <u>\n<u> ::= a").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(grow_genome(&g, 4, 65536, &mut rng).is_ok());
        assert!(matches!(
            grow_genome(&g, 3, 65536, &mut rng),
            Err(EvolutionError::GrammarNotGrowable { max_depth: 3 })
        ));
        let looping = Grammar::parse("<s> ::= <s>+<s>").unwrap();
        assert!(grow_genome(&looping, 10, 65536, &mut rng).is_err());
    }
}
