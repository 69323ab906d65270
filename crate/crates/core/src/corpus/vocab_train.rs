use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::tokenizer::Vocab;
use crate::error::Result;

/// Trains a sub-word vocabulary by iterative pair merging over word counts.
///
/// The vocabulary starts with every character seen, then appends the most
/// frequent adjacent symbol pair as a new entry until `target_size` entries
/// exist or no pair occurs at least twice. Ties break on the lexicographically
/// smallest merged string so the result is deterministic.
pub fn train_vocab(word_counts: &BTreeMap<String, u64>, target_size: usize) -> Result<Vocab> {
    let mut chars = BTreeSet::new();
    let mut words: Vec<(Vec<String>, u64)> = Vec::with_capacity(word_counts.len());
    for (word, &count) in word_counts {
        if word.is_empty() || count == 0 {
            continue;
        }
        let symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        chars.extend(symbols.iter().cloned());
        words.push((symbols, count));
    }

    let mut entries: Vec<String> = chars.into_iter().collect();
    let mut known: BTreeSet<String> = entries.iter().cloned().collect();

    while entries.len() < target_size {
        let mut pairs: HashMap<(&str, &str), u64> = HashMap::new();
        for (symbols, count) in &words {
            for pair in symbols.windows(2) {
                *pairs.entry((pair[0].as_str(), pair[1].as_str())).or_default() += count;
            }
        }
        let best = pairs
            .into_iter()
            .filter(|&(_, c)| c >= 2)
            .map(|((a, b), c)| (c, format!("{a}{b}"), a.len()))
            .max_by(|x, y| x.0.cmp(&y.0).then_with(|| y.1.cmp(&x.1)));
        let Some((_, merged, left_len)) = best else { break };
        let (left, right) = merged.split_at(left_len);
        let (left, right) = (left.to_string(), right.to_string());

        for (symbols, _) in words.iter_mut() {
            let mut i = 0;
            while i + 1 < symbols.len() {
                if symbols[i] == left && symbols[i + 1] == right {
                    symbols[i] = merged.clone();
                    symbols.remove(i + 1);
                }
                i += 1;
            }
        }
        if known.insert(merged.clone()) {
            entries.push(merged);
        }
    }
    Vocab::from_tokens(entries)
}
