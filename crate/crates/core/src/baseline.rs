//! Structured-perceptron character tagger used as the comparison system.
//!
//! It reads the same labeled sequences as the bi-LSTM. Emission features
//! are the input symbols in a five-symbol window plus a bias; first-order
//! label transitions are scored separately. Decoding is exact Viterbi and
//! training returns averaged weights.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::alignment::{input_symbols, labels_to_word, Label, LabeledSequence, Symbol};
use crate::model::{LabelTable, EPSILON_ID};
use crate::neural::Tensor;
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// Window half-width.
pub const WINDOW: i8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Context {
    /// Outside the word.
    Pad,
    Symbol(Symbol),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Bias,
    /// Symbol at a relative offset from the current position.
    Window(i8, Context),
}

/// Window features for offsets -2..=2 followed by the bias.
pub fn extract_features(inputs: &[Symbol], t: usize) -> Vec<Feature> {
    let mut out = Vec::with_capacity(2 * WINDOW as usize + 2);
    for off in -WINDOW..=WINDOW {
        let pos = t as isize + off as isize;
        let ctx = if pos >= 0 && (pos as usize) < inputs.len() {
            Context::Symbol(inputs[pos as usize])
        } else {
            Context::Pad
        };
        out.push(Feature::Window(off, ctx));
    }
    out.push(Feature::Bias);
    out
}

/// Exact highest-scoring label sequence for `emissions` (`T x L`) and
/// `transitions` (`L x L`, row = previous label). Among equally scored
/// sequences the lexicographically smallest is returned.
pub fn viterbi(emissions: &Tensor, transitions: &Tensor) -> Vec<usize> {
    let steps = emissions.rows();
    let labels = emissions.cols();
    if steps == 0 || labels == 0 {
        return Vec::new();
    }
    // best score of positions t.. given label at t, filled right to left
    let mut suffix = alloc::vec![0.0; steps * labels];
    suffix[(steps - 1) * labels..].copy_from_slice(emissions.row(steps - 1));
    for t in (0..steps - 1).rev() {
        for y in 0..labels {
            let next = &suffix[(t + 1) * labels..(t + 2) * labels];
            let best = (0..labels)
                .map(|z| transitions.row(y)[z] + next[z])
                .fold(f64::NEG_INFINITY, f64::max);
            suffix[t * labels + y] = emissions.row(t)[y] + best;
        }
    }
    let first_max = |scores: &mut dyn Iterator<Item = f64>| -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, s) in scores.enumerate() {
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        best
    };
    let mut path = Vec::with_capacity(steps);
    path.push(first_max(&mut suffix[..labels].iter().copied()));
    for t in 1..steps {
        let prev = path[t - 1];
        let row = &suffix[t * labels..(t + 1) * labels];
        path.push(first_max(
            &mut (0..labels).map(|z| transitions.row(prev)[z] + row[z]),
        ));
    }
    path
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerceptronConfig {
    pub epochs: usize,
    pub seed: u64,
    pub use_transitions: bool,
}

impl Default for PerceptronConfig {
    fn default() -> Self {
        PerceptronConfig {
            epochs: 10,
            seed: 1,
            use_transitions: true,
        }
    }
}

/// Interned features and labels with their (averaged) weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptronModel {
    pub features: BTreeMap<Feature, usize>,
    pub labels: LabelTable,
    /// `features x labels`, row-major.
    pub weights: Vec<f64>,
    /// `labels x labels`, row = previous label.
    pub transitions: Vec<f64>,
    pub use_transitions: bool,
}

impl PerceptronModel {
    fn emissions(&self, inputs: &[Symbol]) -> Tensor {
        emission_scores(&self.features, &self.weights, self.labels.len(), inputs)
    }

    fn transition_tensor(&self) -> Tensor {
        let l = self.labels.len();
        let data = if self.use_transitions {
            self.transitions.clone()
        } else {
            alloc::vec![0.0; l * l]
        };
        Tensor::matrix(l, l, data).expect("square transition table")
    }

    pub fn predict_labels(&self, word: &str) -> Vec<Label> {
        let inputs = input_symbols(word);
        viterbi(&self.emissions(&inputs), &self.transition_tensor())
            .into_iter()
            .map(|id| self.labels.label(id).clone())
            .collect()
    }

    pub fn predict(&self, word: &str) -> String {
        labels_to_word(&self.predict_labels(word))
    }
}

pub fn predict_baseline(m: &PerceptronModel, word: &str) -> String {
    m.predict(word)
}

fn emission_scores(
    features: &BTreeMap<Feature, usize>,
    weights: &[f64],
    labels: usize,
    inputs: &[Symbol],
) -> Tensor {
    let mut out = Tensor::zeros(&[inputs.len(), labels]);
    for t in 0..inputs.len() {
        let row = out.row_mut(t);
        for f in extract_features(inputs, t) {
            if let Some(&fid) = features.get(&f) {
                for (s, w) in row.iter_mut().zip(&weights[fid * labels..(fid + 1) * labels]) {
                    *s += w;
                }
            }
        }
    }
    out
}

/// Raw weights plus the running sums needed for averaging.
///
/// Averaging uses the usual lazy form: an update of `delta` made after `c`
/// completed instances also adds `c * delta` to an accumulator, and the
/// average after `n` instances is `w - acc / n`, which equals the mean of
/// the weight vectors observed after each instance.
#[derive(Debug, Clone)]
pub struct PerceptronTrainer {
    features: BTreeMap<Feature, usize>,
    labels: LabelTable,
    use_transitions: bool,
    weights: Vec<f64>,
    transitions: Vec<f64>,
    acc_weights: Vec<f64>,
    acc_transitions: Vec<f64>,
    instances: u64,
}

struct Instance {
    inputs: Vec<Symbol>,
    features: Vec<Vec<usize>>,
    gold: Vec<usize>,
}

impl PerceptronTrainer {
    /// Interns every feature and label of `train`.
    pub fn new(train: &[LabeledSequence], use_transitions: bool) -> Self {
        let mut features = BTreeMap::new();
        let mut all: Vec<Feature> = train
            .iter()
            .flat_map(|s| (0..s.inputs.len()).flat_map(move |t| extract_features(&s.inputs, t)))
            .collect();
        all.sort_unstable();
        all.dedup();
        for (i, f) in all.into_iter().enumerate() {
            features.insert(f, i);
        }
        let labels = LabelTable::new(train.iter().flat_map(|s| s.labels.iter().cloned()));
        let l = labels.len();
        let nf = features.len();
        PerceptronTrainer {
            features,
            labels,
            use_transitions,
            weights: alloc::vec![0.0; nf * l],
            transitions: alloc::vec![0.0; l * l],
            acc_weights: alloc::vec![0.0; nf * l],
            acc_transitions: alloc::vec![0.0; l * l],
            instances: 0,
        }
    }

    fn instance(&self, seq: &LabeledSequence) -> Instance {
        Instance {
            inputs: seq.inputs.clone(),
            features: (0..seq.inputs.len())
                .map(|t| {
                    extract_features(&seq.inputs, t)
                        .iter()
                        .filter_map(|f| self.features.get(f).copied())
                        .collect()
                })
                .collect(),
            gold: seq
                .labels
                .iter()
                .map(|l| self.labels.id(l).unwrap_or(EPSILON_ID))
                .collect(),
        }
    }

    fn bump_weight(&mut self, idx: usize, delta: f64) {
        self.weights[idx] += delta;
        self.acc_weights[idx] += self.instances as f64 * delta;
    }

    fn bump_transition(&mut self, idx: usize, delta: f64) {
        self.transitions[idx] += delta;
        self.acc_transitions[idx] += self.instances as f64 * delta;
    }

    fn learn(&mut self, inst: &Instance) {
        let l = self.labels.len();
        let emissions = emission_scores(&self.features, &self.weights, l, &inst.inputs);
        let trans = if self.use_transitions {
            self.transitions.clone()
        } else {
            alloc::vec![0.0; l * l]
        };
        let pred = viterbi(&emissions, &Tensor::matrix(l, l, trans).expect("square"));
        if pred != inst.gold {
            for t in 0..pred.len() {
                let (g, p) = (inst.gold[t], pred[t]);
                if g != p {
                    for &f in &inst.features[t] {
                        self.bump_weight(f * l + g, 1.0);
                        self.bump_weight(f * l + p, -1.0);
                    }
                }
                if self.use_transitions && t > 0 {
                    let (g0, p0) = (inst.gold[t - 1], pred[t - 1]);
                    if (g0, g) != (p0, p) {
                        self.bump_transition(g0 * l + g, 1.0);
                        self.bump_transition(p0 * l + p, -1.0);
                    }
                }
            }
        }
        self.instances += 1;
    }

    /// Decodes `seq` with the current weights and updates on mistakes.
    pub fn train_instance(&mut self, seq: &LabeledSequence) {
        let inst = self.instance(seq);
        self.learn(&inst);
    }

    pub fn instances(&self) -> u64 {
        self.instances
    }

    /// Current (non-averaged) weights and transitions.
    pub fn raw(&self) -> (&[f64], &[f64]) {
        (&self.weights, &self.transitions)
    }

    /// Model with weights averaged over all instances seen so far.
    pub fn averaged(&self) -> PerceptronModel {
        let n = self.instances as f64;
        let avg = |w: &[f64], acc: &[f64]| -> Vec<f64> {
            if self.instances == 0 {
                return w.to_vec();
            }
            w.iter().zip(acc).map(|(w, a)| w - a / n).collect()
        };
        PerceptronModel {
            features: self.features.clone(),
            labels: self.labels.clone(),
            weights: avg(&self.weights, &self.acc_weights),
            transitions: avg(&self.transitions, &self.acc_transitions),
            use_transitions: self.use_transitions,
        }
    }
}

pub fn train_averaged_perceptron(
    train: &[LabeledSequence],
    cfg: &PerceptronConfig,
) -> Result<PerceptronModel> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut trainer = PerceptronTrainer::new(train, cfg.use_transitions);
    let instances: Vec<Instance> = train.iter().map(|s| trainer.instance(s)).collect();
    let mut rng = seeded(derive_seed(cfg.seed, "perceptron"));
    let mut order: Vec<usize> = (0..instances.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            trainer.learn(&instances[i]);
        }
    }
    Ok(trainer.averaged())
}
