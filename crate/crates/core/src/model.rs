//! The normalizer: vocabularies, single-task and multi-task training of the
//! bi-LSTM tagger, and greedy decoding.
//!
//! In multi-task mode all tasks share the embedding and the bi-LSTM stack;
//! each task owns its prediction layer and label table. Training alternates
//! strictly between a main-task instance and an instance from a uniformly
//! chosen auxiliary task.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::alignment::{input_symbols, labels_to_word, Label, LabeledSequence, Symbol};
use crate::neural::{
    backward, forward, optimizer_step, AdamConfig, AdamState, Dense, Encoder, Tensor,
};
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::{Error, Result};

/// Id reserved for input symbols never seen in training.
pub const UNK_ID: usize = 0;
/// Id of the epsilon label in every label table.
pub const EPSILON_ID: usize = 0;

/// Input symbols; id 0 is UNK, known symbols follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
    index: BTreeMap<Symbol, usize>,
}

impl SymbolTable {
    pub fn new(symbols: impl IntoIterator<Item = Symbol>) -> Self {
        let mut sorted: Vec<Symbol> = symbols.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        let index = sorted.iter().enumerate().map(|(i, s)| (*s, i + 1)).collect();
        SymbolTable {
            symbols: sorted,
            index,
        }
    }

    /// Table size, UNK included.
    pub fn len(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, s: Symbol) -> usize {
        self.index.get(&s).copied().unwrap_or(UNK_ID)
    }

    /// `None` for UNK.
    pub fn symbol(&self, id: usize) -> Option<Symbol> {
        id.checked_sub(1).and_then(|i| self.symbols.get(i).copied())
    }

    /// Known symbols in id order (UNK excluded).
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }
}

/// Labels of one task; epsilon is id 0, the rest sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    labels: Vec<Label>,
    index: BTreeMap<Label, usize>,
}

impl LabelTable {
    pub fn new(labels: impl IntoIterator<Item = Label>) -> Self {
        let mut rest: Vec<Label> = labels.into_iter().filter(|l| *l != Label::Epsilon).collect();
        rest.sort_unstable();
        rest.dedup();
        let labels: Vec<Label> = core::iter::once(Label::Epsilon).chain(rest).collect();
        let index = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        LabelTable { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, label: &Label) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &Label {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskLabels {
    pub name: String,
    pub table: LabelTable,
}

/// Shared input symbol table plus one label table per task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub chars: SymbolTable,
    pub tasks: Vec<TaskLabels>,
}

impl Vocabulary {
    pub fn input_ids(&self, inputs: &[Symbol]) -> Vec<usize> {
        inputs.iter().map(|s| self.chars.id(*s)).collect()
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.name == name)
    }
}

/// A named set of training sequences.
#[derive(Debug, Clone, Copy)]
pub struct Task<'a> {
    pub name: &'a str,
    pub sequences: &'a [LabeledSequence],
}

pub fn build_vocab(tasks: &[Task<'_>]) -> Vocabulary {
    let chars = SymbolTable::new(
        tasks
            .iter()
            .flat_map(|t| t.sequences.iter())
            .flat_map(|s| s.inputs.iter().copied()),
    );
    let tasks = tasks
        .iter()
        .map(|t| TaskLabels {
            name: t.name.to_string(),
            table: LabelTable::new(t.sequences.iter().flat_map(|s| s.labels.iter().cloned())),
        })
        .collect();
    Vocabulary { chars, tasks }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub embed_dim: usize,
    /// Per direction.
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            embed_dim: 128,
            hidden_dim: 128,
            num_layers: 3,
            dropout: 0.1,
            epochs: 30,
            seed: 1,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerModel {
    pub config: TrainingConfig,
    pub vocab: Vocabulary,
    pub encoder: Encoder,
    /// One prediction layer per entry of `vocab.tasks`.
    pub heads: Vec<Dense>,
    pub main_task: usize,
}

impl NormalizerModel {
    /// Randomly initialized model for `vocab`.
    pub fn init(vocab: Vocabulary, config: TrainingConfig, main_task: usize) -> Self {
        let mut rng = seeded(derive_seed(config.seed, "init"));
        let encoder = Encoder::init(
            vocab.chars.len(),
            config.embed_dim,
            config.hidden_dim,
            config.num_layers,
            &mut rng,
        );
        let width = encoder.output_width();
        let heads = vocab
            .tasks
            .iter()
            .map(|t| Dense::init(t.table.len(), width, &mut rng))
            .collect();
        NormalizerModel {
            config,
            vocab,
            encoder,
            heads,
            main_task,
        }
    }

    /// Per-position label distribution of the main head, dropout off.
    pub fn probabilities(&self, word: &str) -> Tensor {
        self.task_probabilities(self.main_task, word)
    }

    pub fn task_probabilities(&self, task: usize, word: &str) -> Tensor {
        let ids = self.vocab.input_ids(&input_symbols(word));
        forward(&self.encoder, &self.heads[task], &ids, None)
            .expect("ids come from this model's vocabulary")
            .probs
    }

    pub fn predict_labels(&self, word: &str) -> Vec<Label> {
        let table = &self.vocab.tasks[self.main_task].table;
        greedy_decode(&self.probabilities(word))
            .into_iter()
            .map(|id| table.label(id).clone())
            .collect()
    }

    pub fn predict(&self, word: &str) -> String {
        labels_to_word(&self.predict_labels(word))
    }
}

pub fn predict(m: &NormalizerModel, word: &str) -> String {
    m.predict(word)
}

/// Highest-probability label per row; ties go to the lowest id.
pub fn greedy_decode(probs: &Tensor) -> Vec<usize> {
    (0..probs.rows())
        .map(|t| {
            let row = probs.row(t);
            let mut best = 0;
            for (l, v) in row.iter().enumerate().skip(1) {
                if *v > row[best] {
                    best = l;
                }
            }
            best
        })
        .collect()
}

/// A sequence mapped through the vocabulary of one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    pub inputs: Vec<usize>,
    pub gold: Vec<usize>,
}

pub fn encode(vocab: &Vocabulary, task: usize, seq: &LabeledSequence) -> EncodedSequence {
    let table = &vocab.tasks[task].table;
    EncodedSequence {
        inputs: vocab.input_ids(&seq.inputs),
        gold: seq
            .labels
            .iter()
            .map(|l| table.id(l).unwrap_or(EPSILON_ID))
            .collect(),
    }
}

/// Per-update bookkeeping of a training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub updates: usize,
    pub main_updates: usize,
    pub aux_updates: usize,
    /// Mean main-task loss per epoch (with dropout active).
    pub epoch_losses: Vec<f64>,
}

/// Owns a model during training together with its optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: NormalizerModel,
    encoder_state: AdamState,
    head_states: Vec<AdamState>,
    dropout_rng: SeededRng,
    updates: usize,
}

impl Trainer {
    pub fn new(model: NormalizerModel) -> Self {
        let encoder_state = AdamState::new(&model.encoder);
        let head_states = model.heads.iter().map(AdamState::new).collect();
        let dropout_rng = seeded(derive_seed(model.config.seed, "dropout"));
        Trainer {
            model,
            encoder_state,
            head_states,
            dropout_rng,
            updates: 0,
        }
    }

    pub fn model(&self) -> &NormalizerModel {
        &self.model
    }

    pub fn into_model(self) -> NormalizerModel {
        self.model
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Forward, backward and one optimizer step on `seq` for `task`.
    /// Only the shared encoder and that task's head change.
    pub fn step(&mut self, task: usize, seq: &EncodedSequence) -> Result<f64> {
        let cfg = self.model.config;
        let head = &self.model.heads[task];
        let trace = forward(
            &self.model.encoder,
            head,
            &seq.inputs,
            Some((cfg.dropout, &mut self.dropout_rng)),
        )?;
        let loss = trace.loss(&seq.gold)?;
        let grads = backward(&self.model.encoder, head, &trace, &seq.gold)?;
        optimizer_step(
            &mut self.model.encoder,
            &grads.encoder,
            &mut self.encoder_state,
            &cfg.adam,
        )?;
        optimizer_step(
            &mut self.model.heads[task],
            &grads.head,
            &mut self.head_states[task],
            &cfg.adam,
        )?;
        self.updates += 1;
        Ok(loss)
    }
}

/// Shuffled index order for one epoch.
fn epoch_order(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

pub fn train_single(
    train: &[LabeledSequence],
    cfg: &TrainingConfig,
) -> Result<(NormalizerModel, TrainingLog)> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let vocab = build_vocab(&[Task {
        name: "main",
        sequences: train,
    }]);
    let encoded: Vec<EncodedSequence> = train.iter().map(|s| encode(&vocab, 0, s)).collect();
    let mut trainer = Trainer::new(NormalizerModel::init(vocab, *cfg, 0));
    let mut order_rng = seeded(derive_seed(cfg.seed, "order"));
    let mut log = TrainingLog::default();
    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        for i in epoch_order(encoded.len(), &mut order_rng) {
            total += trainer.step(0, &encoded[i])?;
            log.main_updates += 1;
        }
        log.epoch_losses.push(total / encoded.len() as f64);
    }
    log.updates = trainer.updates();
    Ok((trainer.into_model(), log))
}

/// Multi-task training. The main task is task 0 (named `main.name`);
/// auxiliary tasks follow in the given order.
pub fn train_mtl(
    main: Task<'_>,
    aux: &[Task<'_>],
    cfg: &TrainingConfig,
) -> Result<(NormalizerModel, TrainingLog)> {
    if aux.is_empty() {
        return Err(Error::NoAuxiliaryTasks);
    }
    for t in core::iter::once(&main).chain(aux) {
        if t.sequences.is_empty() {
            return Err(Error::EmptyTask(t.name.to_string()));
        }
    }
    let tasks: Vec<Task<'_>> = core::iter::once(main).chain(aux.iter().copied()).collect();
    let vocab = build_vocab(&tasks);
    let encoded: Vec<Vec<EncodedSequence>> = tasks
        .iter()
        .enumerate()
        .map(|(k, t)| t.sequences.iter().map(|s| encode(&vocab, k, s)).collect())
        .collect();
    let mut trainer = Trainer::new(NormalizerModel::init(vocab, *cfg, 0));
    let mut order_rng = seeded(derive_seed(cfg.seed, "order"));
    let mut aux_rng = seeded(derive_seed(cfg.seed, "aux"));
    let mut log = TrainingLog::default();
    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        for i in epoch_order(encoded[0].len(), &mut order_rng) {
            total += trainer.step(0, &encoded[0][i])?;
            log.main_updates += 1;
            let task = 1 + aux_rng.gen_range(0..aux.len());
            let j = aux_rng.gen_range(0..encoded[task].len());
            trainer.step(task, &encoded[task][j])?;
            log.aux_updates += 1;
        }
        log.epoch_losses.push(total / encoded[0].len() as f64);
    }
    log.updates = trainer.updates();
    Ok((trainer.into_model(), log))
}
