use rand::Rng;

use super::{Genome, Individual};

/// Variable one-point crossover. With probability `probability`, cut points
/// are drawn independently in `[1, len - 1]` for each parent and the tails
/// are swapped. Genomes of length 1 cannot be cut and pass through. Either
/// way, children longer than `max_length` are truncated.
pub fn crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    probability: f64,
    max_length: usize,
    rng: &mut R,
) -> (Genome, Genome) {
    if a.len() < 2 || b.len() < 2 || !rng.gen_bool(probability) {
        return (a.truncated(max_length), b.truncated(max_length));
    }
    let ka = rng.gen_range(1..a.len());
    let kb = rng.gen_range(1..b.len());
    crossover_at(a, b, ka, kb, max_length)
}

/// Deterministic part of [`crossover`] for fixed cut points.
pub fn crossover_at(a: &Genome, b: &Genome, ka: usize, kb: usize, max_length: usize) -> (Genome, Genome) {
    let (a, b) = (a.codons(), b.codons());
    let mut first: Vec<u32> = a[..ka].iter().chain(&b[kb..]).copied().collect();
    let mut second: Vec<u32> = b[..kb].iter().chain(&a[ka..]).copied().collect();
    first.truncate(max_length);
    second.truncate(max_length);
    (Genome::from_vec(first), Genome::from_vec(second))
}

/// Per-codon integer flip: each codon is independently replaced, with
/// probability `per_codon`, by a uniform draw from `[0, codon_domain)`.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, per_codon: f64, codon_domain: u32, rng: &mut R) -> Genome {
    let codons = genome
        .codons()
        .iter()
        .map(|&c| {
            if per_codon > 0.0 && rng.gen_bool(per_codon.min(1.0)) {
                rng.gen_range(0..codon_domain)
            } else {
                c
            }
        })
        .collect();
    Genome::from_vec(codons)
}

/// Total order used for selection, elitism and best-so-far tracking: higher
/// fitness first, then fewer tree nodes. Invalid individuals sort last.
pub fn compare(a: &Individual, b: &Individual) -> std::cmp::Ordering {
    match (a.fitness, b.fitness) {
        (Some(fa), Some(fb)) => fb.total_cmp(&fa).then(a.node_count.cmp(&b.node_count)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    }
}

/// Index of the tournament winner among `tournament_size` draws, with
/// replacement, from the valid individuals. `None` if no individual is valid.
pub fn tournament_index<R: Rng + ?Sized>(
    population: &[Individual],
    tournament_size: usize,
    rng: &mut R,
) -> Option<usize> {
    let valid: Vec<usize> = (0..population.len()).filter(|&i| population[i].is_valid()).collect();
    tournament_among(population, &valid, tournament_size, rng)
}

pub(crate) fn tournament_among<R: Rng + ?Sized>(
    population: &[Individual],
    valid: &[usize],
    tournament_size: usize,
    rng: &mut R,
) -> Option<usize> {
    if valid.is_empty() {
        return None;
    }
    (0..tournament_size.max(1))
        .map(|_| valid[rng.gen_range(0..valid.len())])
        .min_by(|&i, &j| compare(&population[i], &population[j]).then(i.cmp(&j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(v: &[u32]) -> Genome {
        Genome::from_vec(v.to_vec())
    }

    #[test]
    fn fixed_point_crossover() {
        let (c, d) = crossover_at(&g(&[1, 2, 3, 4]), &g(&[5, 6, 7, 8]), 2, 2, 1000);
        assert_eq!(c.codons(), [1, 2, 7, 8]);
        assert_eq!(d.codons(), [5, 6, 3, 4]);
    }

    #[test]
    fn crossover_truncates() {
        let (c, d) = crossover_at(&g(&[1, 2, 3, 4]), &g(&[5, 6, 7, 8]), 3, 1, 5);
        assert_eq!(c.codons(), [1, 2, 3, 6, 7]);
        assert_eq!(d.codons(), [5, 4]);
    }

    #[test]
    fn probability_zero_copies_parents() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = (g(&[1, 2, 3]), g(&[4, 5, 6, 7]));
        for _ in 0..50 {
            assert_eq!(crossover(&a, &b, 0.0, 1000, &mut rng), (a.clone(), b.clone()));
        }
        let single = g(&[9]);
        assert_eq!(crossover(&single, &b, 1.0, 1000, &mut rng), (single.clone(), b.clone()));
    }

    #[test]
    fn mutation_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = g(&[3, 1, 4, 1, 5]);
        assert_eq!(mutate(&a, 0.0, 65536, &mut rng), a);
        assert_eq!(mutate(&a, 1.0, 1, &mut rng).codons(), [0, 0, 0, 0, 0]);
    }
}
