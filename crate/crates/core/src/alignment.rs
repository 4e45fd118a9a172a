//! Character alignment of historical/modern pairs and the conversion of
//! aligned pairs into per-character label sequences.
//!
//! Alignment starts from plain Levenshtein costs. Each further pass
//! re-estimates substitution and gap costs from the pointwise mutual
//! information of the segments aligned in the previous pass, so characters
//! that tend to co-occur get cheap to align. Passes stop once alignments
//! no longer change.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::TextDataset;
use crate::math::ln;
use crate::{Error, Result};

/// An input position of a labeled sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    /// Prepended to every word so word-initial insertions have a carrier.
    Start,
    Char(char),
}

/// Output for one input position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// The input symbol produces nothing.
    Epsilon,
    /// One or more modern characters.
    Chars(String),
}

impl Label {
    pub fn as_str(&self) -> &str {
        match self {
            Label::Epsilon => "",
            Label::Chars(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlignStep {
    pub src: Option<char>,
    pub tgt: Option<char>,
}

impl AlignStep {
    pub fn pair(src: char, tgt: char) -> Self {
        AlignStep {
            src: Some(src),
            tgt: Some(tgt),
        }
    }

    pub fn deletion(src: char) -> Self {
        AlignStep {
            src: Some(src),
            tgt: None,
        }
    }

    pub fn insertion(tgt: char) -> Self {
        AlignStep {
            src: None,
            tgt: Some(tgt),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharAlignment {
    pub steps: Vec<AlignStep>,
    pub cost: f64,
}

impl CharAlignment {
    pub fn source(&self) -> String {
        self.steps.iter().filter_map(|s| s.src).collect()
    }

    pub fn target(&self) -> String {
        self.steps.iter().filter_map(|s| s.tgt).collect()
    }

    /// No step is empty on both sides.
    pub fn is_well_formed(&self) -> bool {
        self.steps.iter().all(|s| s.src.is_some() || s.tgt.is_some())
    }
}

/// Segment key: `None` on either side stands for a gap.
pub type Segment = (Option<char>, Option<char>);

/// Alignment costs. Without estimated statistics this is unit-cost
/// Levenshtein: identical characters are free, everything else costs 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub match_costs: BTreeMap<(char, char), f64>,
    /// Cost of a historical character aligned to nothing.
    pub gap_cost_src: f64,
    /// Cost of a modern character aligned to nothing.
    pub gap_cost_tgt: f64,
    /// Raw (unsmoothed) counts of aligned segments.
    pub counts: BTreeMap<Segment, f64>,
    /// Cost for character pairs missing from `match_costs`; `None` means
    /// unit costs.
    pub unseen_cost: Option<f64>,
}

impl CostModel {
    pub fn unit() -> Self {
        CostModel {
            match_costs: BTreeMap::new(),
            gap_cost_src: 1.0,
            gap_cost_tgt: 1.0,
            counts: BTreeMap::new(),
            unseen_cost: None,
        }
    }

    pub fn substitution(&self, src: char, tgt: char) -> f64 {
        if let Some(c) = self.match_costs.get(&(src, tgt)) {
            return *c;
        }
        match self.unseen_cost {
            Some(c) => c,
            None if src == tgt => 0.0,
            None => 1.0,
        }
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmiConfig {
    /// Added to every segment count before estimating probabilities.
    pub smoothing: f64,
    /// Substitution costs are rescaled to `[0, max_substitution_cost]`.
    pub max_substitution_cost: f64,
    pub min_gap_cost: f64,
}

impl Default for PmiConfig {
    fn default() -> Self {
        PmiConfig {
            smoothing: 0.1,
            max_substitution_cost: 2.0,
            min_gap_cost: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub max_iters: usize,
    pub pmi: PmiConfig,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            max_iters: 10,
            pmi: PmiConfig::default(),
        }
    }
}

#[derive(Clone, Copy)]
enum Move {
    Diagonal,
    Deletion,
    Insertion,
}

/// Minimum-cost alignment of `src` to `tgt`.
///
/// Ties are broken while tracing back from the end of both strings:
/// substitution/match first, then deletion (a step that consumes the
/// historical character), then insertion.
pub fn levenshtein_align(src: &str, tgt: &str, costs: &CostModel) -> CharAlignment {
    let a: Vec<char> = src.chars().collect();
    let b: Vec<char> = tgt.chars().collect();
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut dist = alloc::vec![0.0f64; (n + 1) * width];
    for i in 1..=n {
        dist[i * width] = dist[(i - 1) * width] + costs.gap_cost_src;
    }
    for j in 1..=m {
        dist[j] = dist[j - 1] + costs.gap_cost_tgt;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = dist[(i - 1) * width + j - 1] + costs.substitution(a[i - 1], b[j - 1]);
            let del = dist[(i - 1) * width + j] + costs.gap_cost_src;
            let ins = dist[i * width + j - 1] + costs.gap_cost_tgt;
            dist[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut steps = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        let mv = if i > 0
            && j > 0
            && dist[(i - 1) * width + j - 1] + costs.substitution(a[i - 1], b[j - 1]) == here
        {
            Move::Diagonal
        } else if i > 0 && dist[(i - 1) * width + j] + costs.gap_cost_src == here {
            Move::Deletion
        } else {
            Move::Insertion
        };
        match mv {
            Move::Diagonal => {
                steps.push(AlignStep::pair(a[i - 1], b[j - 1]));
                i -= 1;
                j -= 1;
            }
            Move::Deletion => {
                steps.push(AlignStep::deletion(a[i - 1]));
                i -= 1;
            }
            Move::Insertion => {
                steps.push(AlignStep::insertion(b[j - 1]));
                j -= 1;
            }
        }
    }
    steps.reverse();
    CharAlignment {
        steps,
        cost: dist[n * width + m],
    }
}

pub fn estimate_pmi_costs(alignments: &[CharAlignment]) -> Result<CostModel> {
    estimate_pmi_costs_with(alignments, &PmiConfig::default())
}

/// PMI over aligned segments, turned into costs by `max PMI - PMI`.
///
/// Every cell of the (historical alphabet + gap) x (modern alphabet + gap)
/// table is smoothed, so unseen pairs of known characters still get a
/// finite PMI. Gap costs use the PMI of "any character vs. gap" and go
/// through the same affine map as substitutions.
pub fn estimate_pmi_costs_with(
    alignments: &[CharAlignment],
    cfg: &PmiConfig,
) -> Result<CostModel> {
    let mut counts: BTreeMap<Segment, f64> = BTreeMap::new();
    for step in alignments.iter().flat_map(|a| a.steps.iter()) {
        *counts.entry((step.src, step.tgt)).or_insert(0.0) += 1.0;
    }
    if counts.is_empty() {
        return Err(Error::NoAlignmentSteps);
    }

    let mut src_chars: Vec<char> = counts.keys().filter_map(|k| k.0).collect();
    src_chars.sort_unstable();
    src_chars.dedup();
    let mut tgt_chars: Vec<char> = counts.keys().filter_map(|k| k.1).collect();
    tgt_chars.sort_unstable();
    tgt_chars.dedup();

    let rows: Vec<Option<char>> = src_chars.iter().copied().map(Some).chain([None]).collect();
    let cols: Vec<Option<char>> = tgt_chars.iter().copied().map(Some).chain([None]).collect();
    let cell = |x: Option<char>, y: Option<char>| -> f64 {
        counts.get(&(x, y)).copied().unwrap_or(0.0) + cfg.smoothing
    };

    let mut row_sum: BTreeMap<Option<char>, f64> = BTreeMap::new();
    let mut col_sum: BTreeMap<Option<char>, f64> = BTreeMap::new();
    let mut total = 0.0;
    for &x in &rows {
        for &y in &cols {
            if x.is_none() && y.is_none() {
                continue;
            }
            let c = cell(x, y);
            *row_sum.entry(x).or_insert(0.0) += c;
            *col_sum.entry(y).or_insert(0.0) += c;
            total += c;
        }
    }
    let pmi = |joint: f64, left: f64, right: f64| ln(joint * total / (left * right));

    let mut pair_pmi = BTreeMap::new();
    let (mut best, mut worst) = (f64::NEG_INFINITY, f64::INFINITY);
    for &a in &src_chars {
        for &b in &tgt_chars {
            let v = pmi(cell(Some(a), Some(b)), row_sum[&Some(a)], col_sum[&Some(b)]);
            best = best.max(v);
            worst = worst.min(v);
            pair_pmi.insert((a, b), v);
        }
    }
    if pair_pmi.is_empty() {
        (best, worst) = (0.0, 0.0);
    }
    let scale = if best > worst {
        cfg.max_substitution_cost / (best - worst)
    } else {
        0.0
    };
    let to_cost = |v: f64| ((best - v) * scale).max(0.0);

    let match_costs = pair_pmi.iter().map(|(k, v)| (*k, to_cost(*v))).collect();

    let deleted: f64 = src_chars.iter().map(|&a| cell(Some(a), None)).sum();
    let src_mass: f64 = src_chars.iter().map(|&a| row_sum[&Some(a)]).sum();
    let inserted: f64 = tgt_chars.iter().map(|&b| cell(None, Some(b))).sum();
    let tgt_mass: f64 = tgt_chars.iter().map(|&b| col_sum[&Some(b)]).sum();
    let gap_cost = |joint: f64, left: f64, right: f64| {
        if left > 0.0 && right > 0.0 {
            to_cost(pmi(joint, left, right)).max(cfg.min_gap_cost)
        } else {
            cfg.max_substitution_cost
        }
    };
    let gap_cost_src = gap_cost(deleted, src_mass, col_sum.get(&None).copied().unwrap_or(0.0));
    let gap_cost_tgt = gap_cost(inserted, row_sum.get(&None).copied().unwrap_or(0.0), tgt_mass);

    Ok(CostModel {
        match_costs,
        gap_cost_src,
        gap_cost_tgt,
        counts,
        unseen_cost: Some(cfg.max_substitution_cost),
    })
}

fn align_all(d: &TextDataset, costs: &CostModel) -> Vec<CharAlignment> {
    d.pairs
        .iter()
        .map(|p| levenshtein_align(&p.historical, &p.modern, costs))
        .collect()
}

fn same_steps(a: &[CharAlignment], b: &[CharAlignment]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.steps == y.steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IteratedAlignment {
    /// One alignment per input pair, in input order.
    pub alignments: Vec<CharAlignment>,
    /// Alignment passes performed, the unit-cost pass included.
    pub passes: usize,
    /// Whether the last pass reproduced the previous one.
    pub converged: bool,
    /// Costs used by the last pass.
    pub costs: CostModel,
}

/// Iterated Levenshtein alignment over one text. At most `max_iters`
/// passes run (at least one); the first uses unit costs.
pub fn iterated_align(d: &TextDataset, cfg: &AlignConfig) -> IteratedAlignment {
    let mut costs = CostModel::unit();
    let mut alignments = align_all(d, &costs);
    let mut passes = 1;
    let mut converged = false;
    while passes < cfg.max_iters {
        let next_costs = match estimate_pmi_costs_with(&alignments, &cfg.pmi) {
            Ok(c) => c,
            // nothing to estimate from: only empty words
            Err(_) => break,
        };
        let next = align_all(d, &next_costs);
        passes += 1;
        costs = next_costs;
        let done = same_steps(&next, &alignments);
        alignments = next;
        if done {
            converged = true;
            break;
        }
    }
    IteratedAlignment {
        alignments,
        passes,
        converged,
        costs,
    }
}

/// Per-character training instance: `inputs[0]` is [`Symbol::Start`], one
/// label per input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledSequence {
    pub inputs: Vec<Symbol>,
    pub labels: Vec<Label>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn target(&self) -> String {
        labels_to_word(&self.labels)
    }
}

/// `_` followed by the characters of `word`.
pub fn input_symbols(word: &str) -> Vec<Symbol> {
    core::iter::once(Symbol::Start)
        .chain(word.chars().map(Symbol::Char))
        .collect()
}

/// Labels an alignment. Deleted historical characters get epsilon; modern
/// characters aligned to nothing are merged onto the label of the closest
/// preceding input symbol (the start symbol for word-initial insertions).
pub fn to_label_sequence(a: &CharAlignment) -> LabeledSequence {
    let mut inputs = alloc::vec![Symbol::Start];
    let mut chunks = alloc::vec![String::new()];
    for step in &a.steps {
        if let Some(c) = step.src {
            inputs.push(Symbol::Char(c));
            chunks.push(String::new());
        }
        if let Some(c) = step.tgt {
            chunks.last_mut().expect("start chunk").push(c);
        }
    }
    let labels = chunks
        .into_iter()
        .map(|s| if s.is_empty() { Label::Epsilon } else { Label::Chars(s) })
        .collect();
    LabeledSequence { inputs, labels }
}

pub fn labels_to_word(labels: &[Label]) -> String {
    labels.iter().map(Label::as_str).collect()
}

/// Aligns a text (iterated) and labels every pair.
pub fn label_dataset(d: &TextDataset, cfg: &AlignConfig) -> Vec<LabeledSequence> {
    iterated_align(d, cfg)
        .alignments
        .iter()
        .map(to_label_sequence)
        .collect()
}
