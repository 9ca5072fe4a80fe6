//! Reference implementations used as test oracles. Each is written
//! independently of the library code it checks.

#![allow(dead_code)]

/// Outcome of the brute-force mapper.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Brute {
    Ok(String),
    Exhausted,
    TooDeep,
}

/// A grammar as plain data: `rules[i]` lists the productions of nonterminal
/// `i`, each a sequence of tokens where `Err(j)` names nonterminal `j` and
/// `Ok(s)` is a terminal string. Nonterminal 0 is the start.
pub type RawGrammar = Vec<Vec<Vec<Result<&'static str, usize>>>>;

/// Leftmost rewriting of a sentential form. Each item is either finished
/// text or a pending nonterminal with the depth of its node (root = 1).
pub fn brute_derive(grammar: &RawGrammar, genome: &[u32], max_depth: usize) -> Brute {
    #[derive(Clone)]
    enum Item {
        Text(String),
        Pending(usize, usize),
    }
    if max_depth < 1 {
        return Brute::TooDeep;
    }
    let mut form = vec![Item::Pending(0, 1)];
    let mut next_codon = 0;
    loop {
        let Some(pos) = form.iter().position(|i| matches!(i, Item::Pending(..))) else {
            let text: String = form
                .iter()
                .map(|i| match i {
                    Item::Text(s) => s.as_str(),
                    Item::Pending(..) => unreachable!(),
                })
                .collect();
            return Brute::Ok(text);
        };
        let Item::Pending(nt, depth) = form[pos].clone() else {
            unreachable!()
        };
        if next_codon >= genome.len() {
            return Brute::Exhausted;
        }
        if depth + 1 > max_depth {
            return Brute::TooDeep;
        }
        let productions = &grammar[nt];
        let production = &productions[genome[next_codon] as usize % productions.len()];
        next_codon += 1;
        let replacement: Vec<Item> = production
            .iter()
            .map(|t| match *t {
                Ok(s) => Item::Text(s.to_string()),
                Err(j) => Item::Pending(j, depth + 1),
            })
            .collect();
        form.splice(pos..=pos, replacement);
    }
}

/// Every sequence over `0..base` of each length in `0..=max_len`.
pub fn all_genomes(base: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for g in &layer {
            for c in 0..base {
                let mut h = g.clone();
                h.push(c);
                next.push(h);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Textbook two-pass sample correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Average ranks by counting: rank = #less + (#equal + 1) / 2.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Least squares with intercept by Gaussian elimination on the normal
/// equations. Returns `[intercept, b_1, ..., b_p]`.
#[allow(clippy::needless_range_loop)]
pub fn normal_equations(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let p = columns.len() + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { columns[j - 1][i] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = (0..n).map(|i| x(i, r) * x(i, c)).sum();
        }
        a[r][p] = (0..n).map(|i| x(i, r) * y[i]).sum();
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..p).map(|r| a[r][p] / a[r][r]).collect()
}

/// Node count of a formula in grammar surface syntax, counted from the text:
/// one per function call, infix operator, feature reference and constant.
pub fn count_nodes_in_text(formula: &str) -> usize {
    let bytes = formula.as_bytes();
    let mut count = 0;
    let mut i = 0;
    while i < bytes.len() {
        let rest = &formula[i..];
        if rest.starts_with("x[:,") {
            count += 1;
            i += rest.find(']').unwrap() + 1;
        } else if bytes[i].is_ascii_digit() {
            count += 1;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
        } else if bytes[i].is_ascii_alphabetic() {
            // Function name up to its opening parenthesis.
            count += 1;
            i += rest.find('(').unwrap() + 1;
        } else {
            if matches!(bytes[i], b'+' | b'-' | b'*') {
                count += 1;
            }
            i += 1;
        }
    }
    count
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// SHA-256 of every file under `root`, keyed by relative path.
pub fn tree_hashes(root: &std::path::Path) -> Vec<(String, String)> {
    use sha2::{Digest, Sha256};
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, format!("{:x}", Sha256::digest(&bytes))));
            }
        }
    }
    out.sort();
    out
}

/// `<s> ::= <s> + <s> | x`
pub fn plus_grammar() -> RawGrammar {
    vec![vec![vec![Err(0), Ok("+"), Err(0)], vec![Ok("x")]]]
}
