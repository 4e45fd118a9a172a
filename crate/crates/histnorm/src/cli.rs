//! The `histnorm` command line.
//!
//! Status messages go to stderr; data goes to the file named by `--out`
//! (or `--csv`), or to stdout when none is given.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use histnorm_core::alignment::{iterated_align, label_dataset, to_label_sequence, AlignConfig, PmiConfig};
use histnorm_core::baseline::{train_averaged_perceptron, PerceptronConfig};
use histnorm_core::corpus::{generate_synthetic, preprocess, split, LexiconSpec, RuleSet, SplitSpec, TextDataset};
use histnorm_core::eval::{word_accuracy, BenchmarkConfig, CurveSize, EvalReport, EvalRow, Method, Setup, Truncation};
use histnorm_core::model::{train_mtl, train_single, Task, TrainingConfig};
use histnorm_core::neural::AdamConfig;

use crate::io::{format_dataset, format_labeled_file, load_dataset, write_file};
use crate::modelfile::{load_model, save_model, SavedModel};
use crate::report::{render_report, report_to_csv, curve_to_csv, ReferenceTable};
use crate::runner;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "histnorm", version, about = "Historical spelling normalization with bi-LSTM taggers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic parallel corpus from a rewrite-rule preset.
    Synth(SynthArgs),
    /// Align word pairs and write character-labeled sequences.
    Align(AlignArgs),
    /// Train a bi-LSTM (optionally multi-task) or perceptron model.
    Train(TrainArgs),
    /// Normalize words with a trained model.
    Predict(PredictArgs),
    /// Score a saved model, or run the S / S+A benchmark over texts.
    Evaluate(EvaluateArgs),
    /// Accuracy for growing training-set sizes on one text.
    Curve(CurveArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RulePreset {
    /// Six spelling rules in the style of Early New High German.
    Enhg,
    /// Rules reusing the same historical letters with other readings.
    Divergent,
    /// Rules over a disjoint (Greek) alphabet.
    Alien,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LexiconPreset {
    German,
    Alien,
}

#[derive(Debug, Args, Clone)]
pub struct SeedArg {
    /// Random seed.
    #[arg(long, env = "HISTNORM_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "enhg")]
    pub rules: RulePreset,
    #[arg(long, value_enum, default_value = "german")]
    pub lexicon: LexiconPreset,
    /// Distinct modern words to draw tokens from.
    #[arg(long, default_value_t = 3000)]
    pub lexicon_size: usize,
    /// Number of token pairs.
    #[arg(long, default_value_t = 2000)]
    pub size: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct AlignOpts {
    /// Maximum alignment passes; 1 keeps the unit-cost alignment.
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    /// Additive smoothing of aligned-pair counts.
    #[arg(long, default_value_t = 0.1)]
    pub smoothing: f64,
}

impl AlignOpts {
    pub fn config(&self) -> Result<AlignConfig> {
        if self.max_iters == 0 {
            return Err(Error::Usage("--max-iters must be at least 1".into()));
        }
        if self.smoothing.is_nan() || self.smoothing <= 0.0 {
            return Err(Error::Usage("--smoothing must be positive".into()));
        }
        Ok(AlignConfig {
            max_iters: self.max_iters,
            pmi: PmiConfig {
                smoothing: self.smoothing,
                ..PmiConfig::default()
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Token file (`historical<TAB>modern` per line).
    pub input: PathBuf,
    #[command(flatten)]
    pub align: AlignOpts,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct NetOpts {
    /// Character embedding size.
    #[arg(long, default_value_t = 128)]
    pub embed_dim: usize,
    /// Hidden units per LSTM direction.
    #[arg(long, default_value_t = 128)]
    pub hidden_dim: usize,
    /// Stacked bi-LSTM layers.
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    /// Dropout after each bi-LSTM layer.
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    /// Passes over the main training set.
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Passes of the perceptron baseline.
    #[arg(long, default_value_t = 10)]
    pub perceptron_epochs: usize,
    /// Drop label-transition features from the perceptron.
    #[arg(long)]
    pub no_transitions: bool,
}

impl NetOpts {
    pub fn training(&self, seed: u64) -> Result<TrainingConfig> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.layers == 0 {
            return Err(Error::Usage("--embed-dim, --hidden-dim and --layers must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Usage("--dropout must be in [0, 1)".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Usage("--learning-rate must be positive".into()));
        }
        Ok(TrainingConfig {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            num_layers: self.layers,
            dropout: self.dropout,
            epochs: self.epochs,
            seed,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
        })
    }

    pub fn perceptron(&self, seed: u64) -> PerceptronConfig {
        PerceptronConfig {
            epochs: self.perceptron_epochs,
            seed,
            use_transitions: !self.no_transitions,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Main-task token file.
    pub input: PathBuf,
    /// Auxiliary token file; each one becomes its own task (repeatable).
    #[arg(long)]
    pub aux: Vec<PathBuf>,
    /// Train the perceptron baseline instead of the bi-LSTM.
    #[arg(long)]
    pub baseline: bool,
    #[command(flatten)]
    pub net: NetOpts,
    #[command(flatten)]
    pub align: AlignOpts,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// One word per line; only the first tab-separated field is used.
    pub input: PathBuf,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bilstm,
    Perceptron,
    Identity,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bilstm => Method::BiLstm,
            MethodArg::Perceptron => Method::Perceptron,
            MethodArg::Identity => Method::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetupArg {
    #[value(name = "S")]
    S,
    #[value(name = "S+A")]
    SA,
}

impl From<SetupArg> for Setup {
    fn from(s: SetupArg) -> Self {
        match s {
            SetupArg::S => Setup::S,
            SetupArg::SA => Setup::SA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruncationArg {
    /// First N training pairs.
    Prefix,
    /// N pairs sampled with the run seed.
    Subsample,
}

#[derive(Debug, Args, Clone)]
pub struct ExperimentOpts {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bilstm,perceptron")]
    pub methods: Vec<MethodArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "S,S+A")]
    pub setups: Vec<SetupArg>,
    /// Evaluation pairs taken from the start of each text.
    #[arg(long, default_value_t = 1000)]
    pub eval_size: usize,
    /// Development pairs following the evaluation region (unused in training).
    #[arg(long, default_value_t = 1000)]
    pub dev_size: usize,
    /// Auxiliary pairs added to the perceptron's training set in S+A.
    #[arg(long, default_value_t = 10_000)]
    pub aux_samples: usize,
    #[command(flatten)]
    pub net: NetOpts,
    #[command(flatten)]
    pub align: AlignOpts,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl ExperimentOpts {
    pub fn config(&self, truncation: Truncation) -> Result<BenchmarkConfig> {
        let seed = self.seed.seed;
        Ok(BenchmarkConfig {
            split: SplitSpec {
                eval_size: self.eval_size,
                dev_size: self.dev_size,
            },
            align: self.align.config()?,
            training: self.net.training(seed)?,
            perceptron: self.net.perceptron(seed),
            aux_samples: self.aux_samples,
            truncation,
            seed,
        })
    }

    fn methods(&self) -> Vec<Method> {
        self.methods.iter().map(|&m| m.into()).collect()
    }

    fn setups(&self) -> Vec<Setup> {
        self.setups.iter().map(|&s| s.into()).collect()
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Token files, one text each.
    #[arg(required = true)]
    pub texts: Vec<PathBuf>,
    /// Score this saved model on the single given text instead of
    /// running the benchmark.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// With --model: score only the evaluation region (first --eval-size pairs).
    #[arg(long)]
    pub eval_split: bool,
    #[command(flatten)]
    pub exp: ExperimentOpts,
    /// CSV output (`text_id,method,setup,train_size,eval_size,accuracy,seed`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Print published reference accuracies next to matching text ids.
    #[arg(long)]
    pub reference: bool,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Token file of the text to evaluate.
    pub text: PathBuf,
    /// Other texts, used as auxiliary data in S+A.
    #[arg(long)]
    pub aux: Vec<PathBuf>,
    /// Training sizes; `full` is the whole training region.
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,500,1000,1500,2000,2500,full")]
    pub sizes: Vec<String>,
    #[arg(long, value_enum, default_value = "prefix")]
    pub truncation: TruncationArg,
    #[command(flatten)]
    pub exp: ExperimentOpts,
    /// CSV output (stdout if omitted).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Align(a) => cmd_align(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Curve(a) => cmd_curve(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let rules = match a.rules {
        RulePreset::Enhg => RuleSet::enhg_like(),
        RulePreset::Divergent => RuleSet::divergent(),
        RulePreset::Alien => RuleSet::alien(),
    };
    let lexicon = match a.lexicon {
        LexiconPreset::German => LexiconSpec::german_like(),
        LexiconPreset::Alien => LexiconSpec::alien(),
    };
    let seed = a.seed.seed;
    let words = lexicon.generate(a.lexicon_size, histnorm_core::rng::derive_seed(seed, "lexicon"));
    let d = generate_synthetic(&rules, &words, a.size, histnorm_core::rng::derive_seed(seed, "tokens"))?;
    emit(a.out.as_deref(), &format_dataset(&d))?;
    eprintln!("generated {} pairs over {} words", d.len(), words.len());
    Ok(())
}

fn load_clean(path: &Path) -> Result<TextDataset> {
    Ok(preprocess(&load_dataset(path)?))
}

fn cmd_align(a: AlignArgs) -> Result<()> {
    let cfg = a.align.config()?;
    let d = load_clean(&a.input)?;
    let result = iterated_align(&d, &cfg);
    let seqs: Vec<_> = result.alignments.iter().map(to_label_sequence).collect();
    emit(a.out.as_deref(), &format_labeled_file(&seqs))?;
    eprintln!(
        "aligned {} pairs in {} pass(es){}",
        seqs.len(),
        result.passes,
        if result.converged { "" } else { " (pass limit reached)" }
    );
    Ok(())
}

fn training_accuracy(model: &SavedModel, d: &TextDataset) -> Result<f64> {
    let preds: Vec<String> = d.pairs.iter().map(|p| model.predict(&p.historical)).collect();
    let gold: Vec<String> = d.pairs.iter().map(|p| p.modern.clone()).collect();
    Ok(word_accuracy(&preds, &gold)?)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    if a.baseline && !a.aux.is_empty() {
        return Err(Error::Usage(
            "--baseline has no task heads; concatenate auxiliary data into the input instead of --aux".into(),
        ));
    }
    let seed = a.seed.seed;
    let align = a.align.config()?;
    let training = a.net.training(seed)?;
    let main = load_clean(&a.input)?;
    if main.is_empty() {
        return Err(Error::Core(histnorm_core::Error::EmptyTrainingSet));
    }
    let main_seqs = label_dataset(&main, &align);
    let (model, loss) = if a.baseline {
        let m = train_averaged_perceptron(&main_seqs, &a.net.perceptron(seed))?;
        (SavedModel::Perceptron(m), None)
    } else if a.aux.is_empty() {
        let (m, log) = train_single(&main_seqs, &training)?;
        (SavedModel::Neural(m), log.epoch_losses.last().copied())
    } else {
        let aux: Vec<TextDataset> = a.aux.iter().map(|p| load_clean(p)).collect::<Result<_>>()?;
        let aux_seqs: Vec<_> = aux.iter().map(|d| label_dataset(d, &align)).collect();
        let tasks: Vec<Task<'_>> = aux
            .iter()
            .zip(&aux_seqs)
            .map(|(d, s)| Task {
                name: &d.id,
                sequences: s,
            })
            .collect();
        let main_task = Task {
            name: &main.id,
            sequences: &main_seqs,
        };
        let (m, log) = train_mtl(main_task, &tasks, &training)?;
        (SavedModel::Neural(m), log.epoch_losses.last().copied())
    };
    save_model(&a.out, &model)?;
    let acc = training_accuracy(&model, &main)?;
    match loss {
        Some(l) => eprintln!("final epoch loss {l:.6}; training word accuracy {:.2}%", 100.0 * acc),
        None => eprintln!("training word accuracy {:.2}%", 100.0 * acc),
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let text = std::fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let mut out = String::new();
    for line in text.lines() {
        let word = line.split('\t').next().unwrap_or_default().trim_end_matches('\r');
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        let word = word.to_lowercase();
        out.push_str(&word);
        out.push('\t');
        out.push_str(&model.predict(&word));
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let report = match &a.model {
        Some(path) => {
            if a.texts.len() != 1 {
                return Err(Error::Usage("--model takes exactly one text".into()));
            }
            let model = load_model(path)?;
            let mut d = load_clean(&a.texts[0])?;
            if a.eval_split {
                let spec = SplitSpec {
                    eval_size: a.exp.eval_size,
                    dev_size: a.exp.dev_size,
                };
                d = split(&d, spec)?.eval;
            }
            let preds: Vec<String> = d.pairs.iter().map(|p| model.predict(&p.historical)).collect();
            let gold: Vec<String> = d.pairs.iter().map(|p| p.modern.clone()).collect();
            let (method, setup) = match &model {
                SavedModel::Neural(m) if m.heads.len() > 1 => (Method::BiLstm, Setup::SA),
                SavedModel::Neural(_) => (Method::BiLstm, Setup::S),
                SavedModel::Perceptron(_) => (Method::Perceptron, Setup::S),
            };
            let seed = match &model {
                SavedModel::Neural(m) => m.config.seed,
                SavedModel::Perceptron(_) => 0,
            };
            EvalReport::from_rows(vec![EvalRow {
                text_id: d.id.clone(),
                token_count: d.len(),
                method,
                setup,
                train_size: 0,
                eval_size: gold.len(),
                accuracy: word_accuracy(&preds, &gold)?,
                seed,
            }])
        }
        None => {
            let cfg = a.exp.config(Truncation::Prefix)?;
            let texts: Vec<TextDataset> = a.texts.iter().map(|p| load_dataset(p)).collect::<Result<_>>()?;
            runner::run_benchmark(&texts, &a.exp.methods(), &a.exp.setups(), &cfg, a.exp.jobs)?
        }
    };
    if let Some(p) = &a.csv {
        write_file(p, report_to_csv(&report)?.as_bytes())?;
    }
    let reference = a.reference.then(ReferenceTable::bundled);
    emit(None, &render_report(&report, reference.as_ref()))
}

pub fn parse_size(s: &str) -> Result<CurveSize> {
    if s == "full" {
        return Ok(CurveSize::Full);
    }
    s.parse()
        .map(CurveSize::Count)
        .map_err(|_| Error::Usage(format!("bad training size {s:?} (expected a count or `full`)")))
}

fn cmd_curve(a: CurveArgs) -> Result<()> {
    let truncation = match a.truncation {
        TruncationArg::Prefix => Truncation::Prefix,
        TruncationArg::Subsample => Truncation::SeededSubsample,
    };
    let cfg = a.exp.config(truncation)?;
    let sizes = a.sizes.iter().map(|s| parse_size(s)).collect::<Result<Vec<_>>>()?;
    let text = load_dataset(&a.text)?;
    let aux: Vec<TextDataset> = a.aux.iter().map(|p| load_dataset(p)).collect::<Result<_>>()?;
    let curve = runner::learning_curve(&text, &aux, &sizes, &a.exp.methods(), &a.exp.setups(), &cfg, a.exp.jobs)?;
    emit(a.csv.as_deref(), &curve_to_csv(&curve)?)?;
    eprintln!("{} curve point(s) for {}", curve.points.len(), curve.text_id);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("full").unwrap(), CurveSize::Full);
        assert_eq!(parse_size("100").unwrap(), CurveSize::Count(100));
        assert!(parse_size("x").is_err());
    }

    #[test]
    fn usage_exit_codes() {
        assert_eq!(run(["histnorm", "frobnicate"]), 1);
        assert_eq!(run(["histnorm", "train", "--baseline", "--aux", "a", "--out", "m", "x"]), 1);
    }
}
