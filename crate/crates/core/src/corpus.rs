//! Parallel token data: preprocessing, splits, auxiliary sampling and a
//! synthetic corpus generator used for self-contained experiments.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::rng::seeded;
use crate::{Error, Result};

/// A historical wordform and its gold modern normalization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenPair {
    pub historical: String,
    pub modern: String,
}

impl TokenPair {
    pub fn new(historical: impl Into<String>, modern: impl Into<String>) -> Self {
        TokenPair {
            historical: historical.into(),
            modern: modern.into(),
        }
    }
}

/// One text, its pairs in document order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TextDataset {
    pub id: String,
    pub pairs: Vec<TokenPair>,
}

impl TextDataset {
    pub fn new(id: impl Into<String>, pairs: Vec<TokenPair>) -> Self {
        TextDataset {
            id: id.into(),
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub eval_size: usize,
    pub dev_size: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            eval_size: 1000,
            dev_size: 1000,
        }
    }
}

impl SplitSpec {
    /// Number of leading pairs reserved for evaluation and development.
    pub fn held_out(&self) -> usize {
        self.eval_size + self.dev_size
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub eval: TextDataset,
    pub dev: TextDataset,
    pub train: TextDataset,
}

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

fn is_punctuation_only(word: &str) -> bool {
    !word.is_empty() && word.chars().all(is_punctuation)
}

/// Drops punctuation-only tokens and lowercases both sides.
pub fn preprocess(d: &TextDataset) -> TextDataset {
    let pairs = d
        .pairs
        .iter()
        .filter(|p| !is_punctuation_only(&p.historical))
        .map(|p| TokenPair {
            historical: p.historical.to_lowercase(),
            modern: p.modern.to_lowercase(),
        })
        .collect();
    TextDataset {
        id: d.id.clone(),
        pairs,
    }
}

/// Eval is the first `eval_size` pairs, dev the next `dev_size`, train the rest.
pub fn split(d: &TextDataset, spec: SplitSpec) -> Result<Split> {
    let held_out = spec.held_out();
    if d.len() <= held_out {
        return Err(Error::DatasetTooSmall {
            len: d.len(),
            required: held_out,
        });
    }
    let part = |range: core::ops::Range<usize>| TextDataset {
        id: d.id.clone(),
        pairs: d.pairs[range].to_vec(),
    };
    Ok(Split {
        eval: part(0..spec.eval_size),
        dev: part(spec.eval_size..held_out),
        train: part(held_out..d.len()),
    })
}

/// Draws `n` items uniformly from the union of `pools`: without replacement
/// while `n` fits in the pool, with replacement beyond that.
pub fn sample_pooled<T: Clone>(pools: &[&[T]], n: usize, seed: u64) -> Result<Vec<T>> {
    let total: usize = pools.iter().map(|p| p.len()).sum();
    if total == 0 {
        return Err(Error::EmptyPool);
    }
    let lookup = |mut i: usize| -> &T {
        for pool in pools {
            if i < pool.len() {
                return &pool[i];
            }
            i -= pool.len();
        }
        unreachable!("index below pool total")
    };
    let mut rng = seeded(seed);
    if n <= total {
        Ok(index::sample(&mut rng, total, n)
            .into_iter()
            .map(|i| lookup(i).clone())
            .collect())
    } else {
        Ok((0..n)
            .map(|_| lookup(rng.gen_range(0..total)).clone())
            .collect())
    }
}

/// Samples auxiliary pairs from `sources`. Callers pass the sources'
/// training regions so that no evaluation tokens leak into training.
pub fn sample_auxiliary(sources: &[TextDataset], n: usize, seed: u64) -> Result<Vec<TokenPair>> {
    let pools: Vec<&[TokenPair]> = sources.iter().map(|d| d.pairs.as_slice()).collect();
    sample_pooled(&pools, n, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RulePosition {
    Initial,
    Final,
    Anywhere,
}

/// A deterministic modern-to-historical rewrite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub position: RulePosition,
    pub from: String,
    pub to: String,
}

impl RewriteRule {
    pub fn new(position: RulePosition, from: &str, to: &str) -> Self {
        RewriteRule {
            position,
            from: from.to_string(),
            to: to.to_string(),
        }
    }

    pub fn fires(&self, word: &str) -> bool {
        if self.from.is_empty() {
            return false;
        }
        match self.position {
            RulePosition::Initial => word.starts_with(self.from.as_str()),
            RulePosition::Final => word.ends_with(self.from.as_str()),
            RulePosition::Anywhere => word.contains(self.from.as_str()),
        }
    }

    pub fn apply(&self, word: &str) -> String {
        if !self.fires(word) {
            return word.to_string();
        }
        match self.position {
            RulePosition::Initial => {
                let mut out = self.to.clone();
                out.push_str(&word[self.from.len()..]);
                out
            }
            RulePosition::Final => {
                let mut out = word[..word.len() - self.from.len()].to_string();
                out.push_str(&self.to);
                out
            }
            RulePosition::Anywhere => word.replace(self.from.as_str(), &self.to),
        }
    }
}

/// Rules applied in order, each to the output of the previous one.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleSet {
    pub rules: Vec<RewriteRule>,
}

impl RuleSet {
    pub fn new(rules: Vec<RewriteRule>) -> Self {
        RuleSet { rules }
    }

    pub fn apply(&self, modern: &str) -> String {
        self.rules
            .iter()
            .fold(modern.to_string(), |word, rule| rule.apply(&word))
    }

    /// Indices of rules that change `modern` when the set is applied.
    pub fn firing(&self, modern: &str) -> Vec<usize> {
        let mut word = modern.to_string();
        let mut fired = Vec::new();
        for (i, rule) in self.rules.iter().enumerate() {
            let next = rule.apply(&word);
            if next != word {
                fired.push(i);
            }
            word = next;
        }
        fired
    }

    /// Six rules in the style of Early New High German spellings. Every
    /// historical side they introduce uses letters absent from
    /// [`LexiconSpec::german_like`], so the inverse mapping is a function.
    pub fn enhg_like() -> Self {
        use RulePosition::*;
        RuleSet::new(alloc::vec![
            RewriteRule::new(Initial, "u", "v"),
            RewriteRule::new(Anywhere, "ei", "ey"),
            RewriteRule::new(Anywhere, "ih", "j"),
            RewriteRule::new(Anywhere, "z", "cz"),
            RewriteRule::new(Anywhere, "ü", "ů"),
            RewriteRule::new(Anywhere, "au", "aw"),
        ])
    }

    /// Rules that reuse the historical letters of [`RuleSet::enhg_like`]
    /// with conflicting modern readings.
    pub fn divergent() -> Self {
        use RulePosition::*;
        RuleSet::new(alloc::vec![
            RewriteRule::new(Initial, "w", "v"),
            RewriteRule::new(Anywhere, "ü", "y"),
            RewriteRule::new(Anywhere, "ie", "j"),
            RewriteRule::new(Anywhere, "s", "cs"),
            RewriteRule::new(Anywhere, "o", "ů"),
            RewriteRule::new(Anywhere, "u", "w"),
        ])
    }

    /// Rules over [`LexiconSpec::alien`]'s alphabet; they share nothing with
    /// the other presets.
    pub fn alien() -> Self {
        use RulePosition::*;
        RuleSet::new(alloc::vec![
            RewriteRule::new(Initial, "α", "ω"),
            RewriteRule::new(Anywhere, "ει", "ψ"),
            RewriteRule::new(Anywhere, "λ", "λλ"),
            RewriteRule::new(Final, "ς", ""),
        ])
    }
}

/// Syllable inventory for random word generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconSpec {
    pub onsets: Vec<String>,
    pub nuclei: Vec<String>,
    pub codas: Vec<String>,
    pub min_syllables: usize,
    pub max_syllables: usize,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl LexiconSpec {
    /// German-looking words over a modern alphabet without c, j, v, w, y.
    pub fn german_like() -> Self {
        LexiconSpec {
            onsets: strings(&[
                "", "", "", "b", "d", "f", "g", "h", "k", "l", "m", "n", "r", "s", "t", "z", "st",
                "br", "tr", "gr", "sp",
            ]),
            nuclei: strings(&["a", "e", "i", "o", "u", "u", "ü", "ei", "au", "ie", "i"]),
            codas: strings(&["", "", "n", "r", "s", "t", "l", "m", "h", "h", "nd", "rt", "z"]),
            min_syllables: 1,
            max_syllables: 3,
        }
    }

    pub fn alien() -> Self {
        LexiconSpec {
            onsets: strings(&["", "β", "γ", "δ", "κ", "λ", "μ", "π", "τ"]),
            nuclei: strings(&["α", "ε", "ι", "ο", "ει", "ου"]),
            codas: strings(&["", "", "ς", "ν", "λ"]),
            min_syllables: 1,
            max_syllables: 3,
        }
    }

    /// Up to `size` distinct words, generated in a seed-determined order.
    pub fn generate(&self, size: usize, seed: u64) -> Vec<String> {
        let mut rng = seeded(seed);
        let mut seen = alloc::collections::BTreeSet::new();
        let mut words = Vec::with_capacity(size);
        let max_attempts = size.saturating_mul(50).max(100);
        let pick = |rng: &mut crate::rng::SeededRng, items: &[String]| -> String {
            if items.is_empty() {
                String::new()
            } else {
                items[rng.gen_range(0..items.len())].clone()
            }
        };
        for _ in 0..max_attempts {
            if words.len() == size {
                break;
            }
            let syllables = rng.gen_range(self.min_syllables..=self.max_syllables.max(self.min_syllables));
            let mut word = String::new();
            for _ in 0..syllables.max(1) {
                word.push_str(&pick(&mut rng, &self.onsets));
                word.push_str(&pick(&mut rng, &self.nuclei));
                word.push_str(&pick(&mut rng, &self.codas));
            }
            if seen.insert(word.clone()) {
                words.push(word);
            }
        }
        words
    }
}

/// `n` pairs whose modern side is drawn uniformly from `lexicon` and whose
/// historical side is `rules` applied to it.
pub fn generate_synthetic(
    rules: &RuleSet,
    lexicon: &[String],
    n: usize,
    seed: u64,
) -> Result<TextDataset> {
    if lexicon.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    let mut rng = seeded(seed);
    let pairs = (0..n)
        .map(|_| {
            let modern = &lexicon[rng.gen_range(0..lexicon.len())];
            TokenPair::new(rules.apply(modern), modern.clone())
        })
        .collect();
    Ok(TextDataset::new("synthetic", pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ds(pairs: &[(&str, &str)]) -> TextDataset {
        TextDataset::new("t", pairs.iter().map(|(h, m)| TokenPair::new(*h, *m)).collect())
    }

    fn numbered(n: usize) -> TextDataset {
        TextDataset::new(
            "n",
            (0..n).map(|i| TokenPair::new(alloc::format!("w{i}"), "x")).collect(),
        )
    }

    #[test]
    fn preprocess_drops_punctuation_and_lowercases() {
        assert_eq!(preprocess(&ds(&[("Fraw", "Frau"), (".", ".")])), ds(&[("fraw", "frau")]));
        assert_eq!(preprocess(&ds(&[("JN", "IHN")])), ds(&[("jn", "ihn")]));
        assert!(preprocess(&ds(&[("...", "...")])).is_empty());
    }

    #[test]
    fn mixed_tokens_are_kept() {
        let out = preprocess(&ds(&[("vnd.", "und."), ("«»", ""), ("—", "-")]));
        assert_eq!(out, ds(&[("vnd.", "und.")]));
    }

    #[test]
    fn split_boundaries() {
        let s = split(&numbered(4718), SplitSpec::default()).unwrap();
        assert_eq!((s.eval.len(), s.dev.len(), s.train.len()), (1000, 1000, 2718));
        assert_eq!(s.train.pairs[0].historical, "w2000");

        let s = split(&numbered(2001), SplitSpec::default()).unwrap();
        assert_eq!(s.train.len(), 1);

        assert_eq!(
            split(&numbered(2000), SplitSpec::default()),
            Err(Error::DatasetTooSmall { len: 2000, required: 2000 })
        );
    }

    #[test]
    fn sampling_sizes_and_errors() {
        let sources = vec![numbered(5), numbered(3)];
        assert!(sample_auxiliary(&sources, 0, 1).unwrap().is_empty());
        assert_eq!(sample_auxiliary(&sources, 8, 1).unwrap().len(), 8);
        assert_eq!(sample_auxiliary(&sources, 100, 1).unwrap().len(), 100);
        assert_eq!(sample_auxiliary(&[], 3, 1), Err(Error::EmptyPool));
        assert_eq!(
            sample_auxiliary(&[TextDataset::default()], 0, 1),
            Err(Error::EmptyPool)
        );
    }

    #[test]
    fn sampling_without_replacement_has_no_duplicates() {
        let sources = vec![numbered(50)];
        let mut got = sample_auxiliary(&sources, 50, 9).unwrap();
        got.sort();
        got.dedup();
        assert_eq!(got.len(), 50);
    }

    #[test]
    fn rules_apply_by_position() {
        let initial = RewriteRule::new(RulePosition::Initial, "u", "v");
        assert_eq!(initial.apply("und"), "vnd");
        assert_eq!(initial.apply("kuh"), "kuh");
        let fin = RewriteRule::new(RulePosition::Final, "e", "");
        assert_eq!(fin.apply("fahre"), "fahr");
        assert_eq!(fin.apply("eben"), "eben");
        let any = RewriteRule::new(RulePosition::Anywhere, "ei", "ey");
        assert_eq!(any.apply("eineinhalb"), "eyneynhalb");
    }

    #[test]
    fn synthetic_generation() {
        let rules = RuleSet::new(vec![RewriteRule::new(RulePosition::Initial, "u", "v")]);
        let lex = vec!["und".to_string()];
        let d = generate_synthetic(&rules, &lex, 3, 0).unwrap();
        assert!(d.pairs.iter().all(|p| p == &TokenPair::new("vnd", "und")));

        let lex = LexiconSpec::german_like().generate(40, 3);
        let d = generate_synthetic(&RuleSet::default(), &lex, 30, 5).unwrap();
        assert!(d.pairs.iter().all(|p| p.historical == p.modern));

        assert_eq!(
            generate_synthetic(&rules, &[], 3, 0),
            Err(Error::EmptyLexicon)
        );
    }

    #[test]
    fn enhg_rules_touch_only_reserved_letters() {
        let lex = LexiconSpec::german_like().generate(500, 11);
        assert_eq!(lex.len(), 500);
        for w in &lex {
            assert!(!w.contains(['c', 'j', 'v', 'w', 'y', 'ů']), "{w}");
        }
        let rules = RuleSet::enhg_like();
        assert_eq!(rules.apply("ihn"), "jn");
        assert_eq!(rules.apply("und"), "vnd");
        assert_eq!(rules.apply("frau"), "fraw");
        assert_eq!(rules.apply("zeit"), "czeyt");
        assert_eq!(rules.apply("für"), "fůr");
    }
}
