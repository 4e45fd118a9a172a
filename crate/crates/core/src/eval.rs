//! Word accuracy, benchmark runs over a collection of texts, learning
//! curves and rank correlation.
//!
//! A benchmark is a grid of independent cells (text x method x setup x
//! training size). [`Benchmark::run_cell`] evaluates one; callers may run
//! cells in any order or in parallel and assemble the rows with
//! [`EvalReport::from_rows`], which sorts them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;

use crate::alignment::{label_dataset, AlignConfig, LabeledSequence};
use crate::baseline::{train_averaged_perceptron, PerceptronConfig};
use crate::corpus::{preprocess, sample_pooled, split, SplitSpec, TextDataset, TokenPair};
use crate::math::sqrt;
use crate::model::{train_mtl, train_single, Task, TrainingConfig};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

pub fn word_accuracy(predictions: &[String], gold: &[String]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let hits = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Output = input; the floor every learned method has to beat.
pub fn identity_baseline(words: &[String]) -> Vec<String> {
    words.to_vec()
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of the average ranks. Returns 0 when
/// either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: xs.len(),
        });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    BiLstm,
    Perceptron,
    Identity,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::BiLstm => "bilstm",
            Method::Perceptron => "perceptron",
            Method::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bilstm" | "bi-lstm" | "lstm" => Some(Method::BiLstm),
            "perceptron" | "crf" => Some(Method::Perceptron),
            "identity" => Some(Method::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setup {
    /// Own training set only.
    S,
    /// Own training set plus auxiliary data: multi-task learning for the
    /// bi-LSTM, concatenated samples for the perceptron.
    SA,
}

impl Setup {
    pub fn name(&self) -> &'static str {
        match self {
            Setup::S => "S",
            Setup::SA => "S+A",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "S" | "s" => Some(Setup::S),
            "S+A" | "s+a" | "SA" | "sa" => Some(Setup::SA),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub text_id: String,
    /// Pairs in the preprocessed text.
    pub token_count: usize,
    pub method: Method,
    pub setup: Setup,
    /// Main-task training pairs used.
    pub train_size: usize,
    pub eval_size: usize,
    pub accuracy: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub setup: Setup,
    pub texts: usize,
    pub mean_accuracy: f64,
}

/// Per-text `S+A - S` accuracy differences of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupDifference {
    pub method: Method,
    pub texts: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single text).
    pub std_dev: f64,
}

type SetupPair = [Option<f64>; 2];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub summaries: Vec<Summary>,
    pub differences: Vec<SetupDifference>,
}

impl EvalReport {
    /// Sorts rows by (text, method, setup, train size) and computes the
    /// aggregates.
    pub fn from_rows(mut rows: Vec<EvalRow>) -> Self {
        rows.sort_by(|a, b| {
            (&a.text_id, a.method, a.setup, a.train_size).cmp(&(&b.text_id, b.method, b.setup, b.train_size))
        });
        let mut groups: BTreeMap<(Method, Setup), Vec<f64>> = BTreeMap::new();
        for r in &rows {
            groups.entry((r.method, r.setup)).or_default().push(r.accuracy);
        }
        let summaries = groups
            .iter()
            .map(|((method, setup), accs)| Summary {
                method: *method,
                setup: *setup,
                texts: accs.len(),
                mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
            })
            .collect();

        // method -> (text, train size) -> [S, S+A]
        let mut paired: BTreeMap<Method, BTreeMap<(String, usize), SetupPair>> = BTreeMap::new();
        for r in &rows {
            let slot = paired
                .entry(r.method)
                .or_default()
                .entry((r.text_id.clone(), r.train_size))
                .or_default();
            slot[usize::from(r.setup == Setup::SA)] = Some(r.accuracy);
        }
        let differences = paired
            .into_iter()
            .filter_map(|(method, cells)| {
                let diffs: Vec<f64> = cells
                    .values()
                    .filter_map(|c| match c {
                        [Some(s), Some(sa)] => Some(sa - s),
                        _ => None,
                    })
                    .collect();
                if diffs.is_empty() {
                    return None;
                }
                let n = diffs.len() as f64;
                let mean = diffs.iter().sum::<f64>() / n;
                let std_dev = if diffs.len() > 1 {
                    sqrt(diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0))
                } else {
                    0.0
                };
                Some(SetupDifference {
                    method,
                    texts: diffs.len(),
                    mean,
                    std_dev,
                })
            })
            .collect();
        EvalReport {
            rows,
            summaries,
            differences,
        }
    }

    pub fn summary(&self, method: Method, setup: Setup) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.setup == setup)
    }

    pub fn difference(&self, method: Method) -> Option<&SetupDifference> {
        self.differences.iter().find(|d| d.method == method)
    }
}

/// How a training set is cut down to a requested size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// First `size` pairs in document order.
    #[default]
    Prefix,
    /// `size` pairs drawn without replacement, kept in document order.
    SeededSubsample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkConfig {
    pub split: SplitSpec,
    pub align: AlignConfig,
    pub training: TrainingConfig,
    pub perceptron: PerceptronConfig,
    /// Auxiliary pairs added to the perceptron's training set in S+A.
    pub aux_samples: usize,
    pub truncation: Truncation,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            split: SplitSpec::default(),
            align: AlignConfig::default(),
            training: TrainingConfig::default(),
            perceptron: PerceptronConfig::default(),
            aux_samples: 10_000,
            truncation: Truncation::Prefix,
            seed: 1,
        }
    }
}

/// A text after preprocessing, splitting and aligning its training region.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedText {
    pub id: String,
    pub token_count: usize,
    pub eval: Vec<TokenPair>,
    pub train: Vec<LabeledSequence>,
}

/// Identifies one benchmark cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub text: usize,
    pub method: Method,
    pub setup: Setup,
    /// `None` = full training set.
    pub train_size: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub texts: Vec<PreparedText>,
    pub config: BenchmarkConfig,
}

impl Benchmark {
    /// Preprocesses, splits and aligns every text; alignment statistics are
    /// estimated per text over its training region.
    pub fn prepare(texts: &[TextDataset], config: BenchmarkConfig) -> Result<Self> {
        let texts = texts
            .iter()
            .map(|t| prepare_text(t, &config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Benchmark { texts, config })
    }

    pub fn from_prepared(texts: Vec<PreparedText>, config: BenchmarkConfig) -> Self {
        Benchmark { texts, config }
    }

    /// Every (text, method, setup) cell at full training size.
    pub fn cells(&self, methods: &[Method], setups: &[Setup]) -> Vec<CellKey> {
        let mut out = Vec::new();
        for text in 0..self.texts.len() {
            for &method in methods {
                for &setup in setups {
                    out.push(CellKey {
                        text,
                        method,
                        setup,
                        train_size: None,
                    });
                }
            }
        }
        out
    }

    /// Seed used for training in a cell; independent of the training size
    /// so curve points at full size reproduce benchmark rows.
    pub fn cell_seed(&self, text: usize, method: Method, setup: Setup) -> u64 {
        derive_seed(
            self.config.seed,
            &format!("{}/{}/{}", self.texts[text].id, method.name(), setup.name()),
        )
    }

    fn training_slice(&self, key: &CellKey) -> Result<Vec<LabeledSequence>> {
        let pool = &self.texts[key.text].train;
        let size = match key.train_size {
            None => return Ok(pool.clone()),
            Some(s) => s,
        };
        if size > pool.len() {
            return Err(Error::SizeExceedsPool {
                size,
                available: pool.len(),
            });
        }
        Ok(match self.config.truncation {
            Truncation::Prefix => pool[..size].to_vec(),
            Truncation::SeededSubsample => {
                let mut rng = seeded(derive_seed(
                    self.config.seed,
                    &format!("{}/subsample/{}", self.texts[key.text].id, size),
                ));
                let mut picked = index::sample(&mut rng, pool.len(), size).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|i| pool[i].clone()).collect()
            }
        })
    }

    pub fn run_cell(&self, key: &CellKey) -> Result<EvalRow> {
        let text = &self.texts[key.text];
        let seed = self.cell_seed(key.text, key.method, key.setup);
        let train = self.training_slice(key)?;
        let others: Vec<&PreparedText> = self
            .texts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != key.text)
            .map(|(_, t)| t)
            .collect();
        if key.setup == Setup::SA && others.is_empty() {
            return Err(Error::UnsupportedCell(String::from(
                "S+A needs at least one other text",
            )));
        }
        let words: Vec<String> = text.eval.iter().map(|p| p.historical.clone()).collect();
        let gold: Vec<String> = text.eval.iter().map(|p| p.modern.clone()).collect();

        let predictions: Vec<String> = match (key.method, key.setup) {
            (Method::Identity, Setup::S) => identity_baseline(&words),
            (Method::Identity, Setup::SA) => {
                return Err(Error::UnsupportedCell(String::from(
                    "identity has no S+A variant",
                )))
            }
            (Method::BiLstm, setup) => {
                let cfg = TrainingConfig {
                    seed,
                    ..self.config.training
                };
                let model = match setup {
                    Setup::S => train_single(&train, &cfg)?.0,
                    Setup::SA => {
                        let aux: Vec<Task<'_>> = others
                            .iter()
                            .filter(|t| !t.train.is_empty())
                            .map(|t| Task {
                                name: &t.id,
                                sequences: &t.train,
                            })
                            .collect();
                        let main = Task {
                            name: &text.id,
                            sequences: &train,
                        };
                        train_mtl(main, &aux, &cfg)?.0
                    }
                };
                words.iter().map(|w| model.predict(w)).collect()
            }
            (Method::Perceptron, setup) => {
                let mut data = train;
                if setup == Setup::SA {
                    let pools: Vec<&[LabeledSequence]> = others.iter().map(|t| t.train.as_slice()).collect();
                    let sample_seed = derive_seed(self.config.seed, &format!("{}/aux-sample", text.id));
                    data.extend(sample_pooled(&pools, self.config.aux_samples, sample_seed)?);
                }
                let cfg = PerceptronConfig {
                    seed,
                    ..self.config.perceptron
                };
                let model = train_averaged_perceptron(&data, &cfg)?;
                words.iter().map(|w| model.predict(w)).collect()
            }
        };
        Ok(EvalRow {
            text_id: text.id.clone(),
            token_count: text.token_count,
            method: key.method,
            setup: key.setup,
            train_size: key.train_size.unwrap_or(text.train.len()),
            eval_size: gold.len(),
            accuracy: word_accuracy(&predictions, &gold)?,
            seed,
        })
    }
}

pub fn prepare_text(text: &TextDataset, config: &BenchmarkConfig) -> Result<PreparedText> {
    let clean = preprocess(text);
    let parts = split(&clean, config.split)?;
    Ok(PreparedText {
        id: clean.id.clone(),
        token_count: clean.len(),
        eval: parts.eval.pairs,
        train: label_dataset(&parts.train, &config.align),
    })
}

/// Every text x method x setup cell, run sequentially.
pub fn run_benchmark(
    texts: &[TextDataset],
    methods: &[Method],
    setups: &[Setup],
    config: &BenchmarkConfig,
) -> Result<EvalReport> {
    if texts.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let bench = Benchmark::prepare(texts, *config)?;
    let rows = bench
        .cells(methods, setups)
        .iter()
        .map(|k| bench.run_cell(k))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CurveSize {
    Count(usize),
    Full,
}

impl CurveSize {
    /// 100, 200, 300, 500, 1000, 1500, 2000, 2500 and the full set.
    pub fn default_grid() -> Vec<CurveSize> {
        [100, 200, 300, 500, 1000, 1500, 2000, 2500]
            .into_iter()
            .map(CurveSize::Count)
            .chain([CurveSize::Full])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub method: Method,
    pub setup: Setup,
    pub train_size: usize,
    pub accuracy: f64,
    pub eval_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub text_id: String,
    /// Grouped by (method, setup), sizes strictly increasing within a group.
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn series(&self, method: Method, setup: Setup) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.method == method && p.setup == setup)
            .map(|p| (p.train_size, p.accuracy))
            .collect()
    }
}

/// Sorted, deduplicated absolute sizes; errors if one exceeds `available`.
pub fn resolve_sizes(sizes: &[CurveSize], available: usize) -> Result<Vec<Option<usize>>> {
    let mut out: Vec<usize> = Vec::with_capacity(sizes.len());
    for s in sizes {
        match *s {
            CurveSize::Full => out.push(available),
            CurveSize::Count(n) if n > available => {
                return Err(Error::SizeExceedsPool { size: n, available })
            }
            CurveSize::Count(n) => out.push(n),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out
        .into_iter()
        .map(|n| if n == available { None } else { Some(n) })
        .collect())
}

impl Benchmark {
    /// Cells of a learning curve for text `text`.
    pub fn curve_cells(
        &self,
        text: usize,
        sizes: &[CurveSize],
        methods: &[Method],
        setups: &[Setup],
    ) -> Result<Vec<CellKey>> {
        let resolved = resolve_sizes(sizes, self.texts[text].train.len())?;
        let mut out = Vec::new();
        for &method in methods {
            for &setup in setups {
                for &train_size in &resolved {
                    out.push(CellKey {
                        text,
                        method,
                        setup,
                        train_size,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Assembles curve rows (any order) into a [`LearningCurve`].
pub fn curve_from_rows(text_id: &str, rows: &[EvalRow]) -> LearningCurve {
    let mut points: Vec<CurvePoint> = rows
        .iter()
        .map(|r| CurvePoint {
            method: r.method,
            setup: r.setup,
            train_size: r.train_size,
            accuracy: r.accuracy,
            eval_size: r.eval_size,
            seed: r.seed,
        })
        .collect();
    points.sort_by_key(|p| (p.method, p.setup, p.train_size));
    LearningCurve {
        text_id: text_id.to_string(),
        points,
    }
}

/// Accuracy on `text`'s evaluation split for growing training sets.
/// `aux_texts` supply the auxiliary data of S+A cells.
pub fn learning_curve(
    text: &TextDataset,
    aux_texts: &[TextDataset],
    sizes: &[CurveSize],
    methods: &[Method],
    setups: &[Setup],
    config: &BenchmarkConfig,
) -> Result<LearningCurve> {
    let all: Vec<TextDataset> = core::iter::once(text.clone())
        .chain(aux_texts.iter().cloned())
        .collect();
    let bench = Benchmark::prepare(&all, *config)?;
    let rows = bench
        .curve_cells(0, sizes, methods, setups)?
        .iter()
        .map(|k| bench.run_cell(k))
        .collect::<Result<Vec<_>>>()?;
    Ok(curve_from_rows(&bench.texts[0].id, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(word_accuracy(&s(&["ausführt", "ihn"]), &s(&["ausführt", "ihm"])).unwrap(), 0.5);
        assert_eq!(word_accuracy(&s(&["a", "b"]), &s(&["a", "b"])).unwrap(), 1.0);
        assert_eq!(word_accuracy(&s(&["a", "b"]), &s(&["c", "d"])).unwrap(), 0.0);
        assert_eq!(
            word_accuracy(&s(&["a"]), &s(&["a", "b"])),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn identity() {
        assert_eq!(identity_baseline(&s(&["jn"])), s(&["jn"]));
        assert!(identity_baseline(&[]).is_empty());
    }

    #[test]
    fn spearman_cases() {
        assert_eq!(spearman(&[1., 2., 3.], &[10., 20., 30.]).unwrap(), 1.0);
        assert_eq!(spearman(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0);
        assert!((spearman(&[1., 2., 3., 4.], &[2., 1., 4., 3.]).unwrap() - 0.6).abs() < 1e-12);
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn report_aggregates() {
        let row = |t: &str, setup, acc| EvalRow {
            text_id: t.into(),
            token_count: 10,
            method: Method::BiLstm,
            setup,
            train_size: 5,
            eval_size: 2,
            accuracy: acc,
            seed: 0,
        };
        let r = EvalReport::from_rows(vec![
            row("b", Setup::SA, 0.9),
            row("a", Setup::S, 0.5),
            row("a", Setup::SA, 0.7),
            row("b", Setup::S, 0.8),
        ]);
        assert_eq!(r.rows[0].text_id, "a");
        assert!((r.summary(Method::BiLstm, Setup::S).unwrap().mean_accuracy - 0.65).abs() < 1e-12);
        let d = r.difference(Method::BiLstm).unwrap();
        assert!((d.mean - 0.15).abs() < 1e-12);
        assert!((d.std_dev - sqrt(0.005)).abs() < 1e-12);
    }

    #[test]
    fn size_resolution() {
        assert_eq!(
            resolve_sizes(&[CurveSize::Full, CurveSize::Count(10), CurveSize::Count(5)], 20).unwrap(),
            vec![Some(5), Some(10), None]
        );
        assert_eq!(resolve_sizes(&[CurveSize::Count(20), CurveSize::Full], 20).unwrap(), vec![None]);
        assert_eq!(
            resolve_sizes(&[CurveSize::Count(21)], 20),
            Err(Error::SizeExceedsPool { size: 21, available: 20 })
        );
    }
}
