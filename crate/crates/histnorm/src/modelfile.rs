//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "HNRM"  u32 version  [u8; 4] kind  u64 payload length  payload  u32 CRC-32
//! ```
//!
//! `kind` is `LSTM` for a [`NormalizerModel`] and `PERC` for a
//! [`PerceptronModel`]. The checksum covers every preceding byte. Strings
//! are a u32 byte length plus UTF-8; tensors are a u32 rank, u64 dims and
//! f64 values.

use std::collections::BTreeMap;
use std::path::Path;

use histnorm_core::alignment::{Label, Symbol};
use histnorm_core::baseline::{Context, Feature, PerceptronModel};
use histnorm_core::model::{LabelTable, NormalizerModel, SymbolTable, TaskLabels, TrainingConfig, Vocabulary};
use histnorm_core::neural::{AdamConfig, Dense, Encoder, LstmDirection, LstmLayerParams, Tensor};

use crate::error::FormatError;
use crate::io::write_file;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"HNRM";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Neural(NormalizerModel),
    Perceptron(PerceptronModel),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Neural(_) => "LSTM",
            SavedModel::Perceptron(_) => "PERC",
        }
    }

    pub fn predict(&self, word: &str) -> String {
        match self {
            SavedModel::Neural(m) => m.predict(word),
            SavedModel::Perceptron(m) => m.predict(word),
        }
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn symbol(&mut self, s: Symbol) {
        match s {
            Symbol::Start => self.u8(0),
            Symbol::Char(c) => {
                self.u8(1);
                self.u32(c as u32);
            }
        }
    }

    fn label(&mut self, l: &Label) {
        match l {
            Label::Epsilon => self.u8(0),
            Label::Chars(s) => {
                self.u8(1);
                self.str(s);
            }
        }
    }

    fn tensor(&mut self, t: &Tensor) {
        self.u32(t.shape().len() as u32);
        for &d in t.shape() {
            self.usize(d);
        }
        for &v in t.data() {
            self.f64(v);
        }
    }

    fn floats(&mut self, v: &[f64]) {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

type Parse<T> = std::result::Result<T, FormatError>;

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Parse<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(FormatError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Parse<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Parse<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Parse<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Parse<usize> {
        usize::try_from(self.u64()?).map_err(|_| malformed("count overflows usize"))
    }

    /// A count of items at least `min_item` bytes each; guards allocations.
    fn count(&mut self, min_item: usize) -> Parse<usize> {
        let n = self.usize()?;
        if n.saturating_mul(min_item) > self.buf.len() - self.pos {
            return Err(FormatError::Truncated);
        }
        Ok(n)
    }

    fn f64(&mut self) -> Parse<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> Parse<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| malformed("invalid UTF-8"))
    }

    fn symbol(&mut self) -> Parse<Symbol> {
        match self.u8()? {
            0 => Ok(Symbol::Start),
            1 => char::from_u32(self.u32()?)
                .map(Symbol::Char)
                .ok_or_else(|| malformed("invalid character")),
            t => Err(malformed(format!("unknown symbol tag {t}"))),
        }
    }

    fn label(&mut self) -> Parse<Label> {
        match self.u8()? {
            0 => Ok(Label::Epsilon),
            1 => Ok(Label::Chars(self.str()?)),
            t => Err(malformed(format!("unknown label tag {t}"))),
        }
    }

    fn tensor(&mut self) -> Parse<Tensor> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(malformed(format!("tensor rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.usize()).collect::<Parse<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| malformed("tensor too large"))?;
        if len.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(FormatError::Truncated);
        }
        let data = (0..len).map(|_| self.f64()).collect::<Parse<Vec<_>>>()?;
        Tensor::from_vec(&shape, data).map_err(|e| malformed(e.to_string()))
    }

    fn floats(&mut self) -> Parse<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
}

fn wrap(kind: &[u8; 4], payload: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(kind);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn write_direction(w: &mut Writer, d: &LstmDirection) {
    w.tensor(&d.w);
    w.tensor(&d.u);
    w.tensor(&d.b);
}

pub fn encode_neural(m: &NormalizerModel) -> Vec<u8> {
    let mut w = Writer::default();
    let c = &m.config;
    w.usize(c.embed_dim);
    w.usize(c.hidden_dim);
    w.usize(c.num_layers);
    w.f64(c.dropout);
    w.usize(c.epochs);
    w.u64(c.seed);
    w.f64(c.adam.learning_rate);
    w.f64(c.adam.beta1);
    w.f64(c.adam.beta2);
    w.f64(c.adam.epsilon);
    w.usize(m.main_task);

    w.usize(m.vocab.chars.symbols().len());
    for &s in m.vocab.chars.symbols() {
        w.symbol(s);
    }
    w.usize(m.vocab.tasks.len());
    for t in &m.vocab.tasks {
        w.str(&t.name);
        w.usize(t.table.len());
        for l in t.table.labels() {
            w.label(l);
        }
    }

    w.tensor(&m.encoder.embedding);
    w.usize(m.encoder.layers.len());
    for layer in &m.encoder.layers {
        write_direction(&mut w, &layer.forward);
        write_direction(&mut w, &layer.backward);
    }
    w.usize(m.heads.len());
    for h in &m.heads {
        w.tensor(&h.weight);
        w.tensor(&h.bias);
    }
    wrap(b"LSTM", w.buf)
}

fn feature(w: &mut Writer, f: &Feature) {
    match f {
        Feature::Bias => w.u8(0),
        Feature::Window(off, ctx) => {
            w.u8(1);
            w.u8(*off as u8);
            match ctx {
                Context::Pad => w.u8(0),
                Context::Symbol(s) => {
                    w.u8(1);
                    w.symbol(*s);
                }
            }
        }
    }
}

pub fn encode_perceptron(m: &PerceptronModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(u8::from(m.use_transitions));
    w.usize(m.labels.len());
    for l in m.labels.labels() {
        w.label(l);
    }
    let mut by_id: Vec<(&Feature, usize)> = m.features.iter().map(|(f, &i)| (f, i)).collect();
    by_id.sort_by_key(|&(_, i)| i);
    w.usize(by_id.len());
    for (f, _) in by_id {
        feature(&mut w, f);
    }
    w.floats(&m.weights);
    w.floats(&m.transitions);
    wrap(b"PERC", w.buf)
}

pub fn encode(m: &SavedModel) -> Vec<u8> {
    match m {
        SavedModel::Neural(n) => encode_neural(n),
        SavedModel::Perceptron(p) => encode_perceptron(p),
    }
}

fn read_direction(r: &mut Reader<'_>) -> Parse<LstmDirection> {
    Ok(LstmDirection {
        w: r.tensor()?,
        u: r.tensor()?,
        b: r.tensor()?,
    })
}

fn check_shape(t: &Tensor, expected: &[usize], what: &str) -> Parse<()> {
    if t.shape() == expected {
        Ok(())
    } else {
        Err(malformed(format!("{what} has shape {:?}, expected {expected:?}", t.shape())))
    }
}

fn decode_neural(r: &mut Reader<'_>) -> Parse<NormalizerModel> {
    let config = TrainingConfig {
        embed_dim: r.usize()?,
        hidden_dim: r.usize()?,
        num_layers: r.usize()?,
        dropout: r.f64()?,
        epochs: r.usize()?,
        seed: r.u64()?,
        adam: AdamConfig {
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        },
    };
    let main_task = r.usize()?;
    let n = r.count(1)?;
    let symbols = (0..n).map(|_| r.symbol()).collect::<Parse<Vec<_>>>()?;
    let chars = SymbolTable::new(symbols.iter().copied());
    if chars.symbols() != symbols.as_slice() {
        return Err(malformed("symbol table not in canonical order"));
    }
    let n = r.count(1)?;
    let mut tasks = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.str()?;
        let k = r.count(1)?;
        let labels = (0..k).map(|_| r.label()).collect::<Parse<Vec<_>>>()?;
        let table = LabelTable::new(labels.iter().cloned());
        if table.labels() != labels.as_slice() {
            return Err(malformed(format!("label table of task {name} not in canonical order")));
        }
        tasks.push(TaskLabels { name, table });
    }
    if main_task >= tasks.len() {
        return Err(malformed("main task index out of range"));
    }

    let embedding = r.tensor()?;
    check_shape(&embedding, &[chars.len(), config.embed_dim], "embedding")?;
    let n = r.count(1)?;
    if n != config.num_layers {
        return Err(malformed("layer count differs from config"));
    }
    let mut layers = Vec::with_capacity(n);
    let h = config.hidden_dim;
    for k in 0..n {
        let input = if k == 0 { config.embed_dim } else { 2 * h };
        let layer = LstmLayerParams {
            forward: read_direction(r)?,
            backward: read_direction(r)?,
        };
        for d in [&layer.forward, &layer.backward] {
            check_shape(&d.w, &[4 * h, input], "lstm input weights")?;
            check_shape(&d.u, &[4 * h, h], "lstm recurrent weights")?;
            check_shape(&d.b, &[4 * h], "lstm bias")?;
        }
        layers.push(layer);
    }
    let encoder = Encoder { embedding, layers };
    let width = encoder.output_width();
    let n = r.count(1)?;
    if n != tasks.len() {
        return Err(malformed("head count differs from task count"));
    }
    let mut heads = Vec::with_capacity(n);
    for t in &tasks {
        let head = Dense {
            weight: r.tensor()?,
            bias: r.tensor()?,
        };
        check_shape(&head.weight, &[t.table.len(), width], "head weights")?;
        check_shape(&head.bias, &[t.table.len()], "head bias")?;
        heads.push(head);
    }
    Ok(NormalizerModel {
        config,
        vocab: Vocabulary { chars, tasks },
        encoder,
        heads,
        main_task,
    })
}

fn read_feature(r: &mut Reader<'_>) -> Parse<Feature> {
    match r.u8()? {
        0 => Ok(Feature::Bias),
        1 => {
            let off = r.u8()? as i8;
            let ctx = match r.u8()? {
                0 => Context::Pad,
                1 => Context::Symbol(r.symbol()?),
                t => return Err(malformed(format!("unknown context tag {t}"))),
            };
            Ok(Feature::Window(off, ctx))
        }
        t => Err(malformed(format!("unknown feature tag {t}"))),
    }
}

fn decode_perceptron(r: &mut Reader<'_>) -> Parse<PerceptronModel> {
    let use_transitions = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(malformed("bad transition flag")),
    };
    let k = r.count(1)?;
    let labels_list = (0..k).map(|_| r.label()).collect::<Parse<Vec<_>>>()?;
    let labels = LabelTable::new(labels_list.iter().cloned());
    if labels.labels() != labels_list.as_slice() {
        return Err(malformed("label table not in canonical order"));
    }
    let n = r.count(1)?;
    let mut features = BTreeMap::new();
    for i in 0..n {
        if features.insert(read_feature(r)?, i).is_some() {
            return Err(malformed("duplicate feature"));
        }
    }
    let weights = r.floats()?;
    let transitions = r.floats()?;
    if weights.len() != n * labels.len() || transitions.len() != labels.len() * labels.len() {
        return Err(malformed("weight table sizes differ from feature and label counts"));
    }
    Ok(PerceptronModel {
        features,
        labels,
        weights,
        transitions,
        use_transitions,
    })
}

/// Checks magic, version, length and checksum, in that order, then decodes.
pub fn decode(bytes: &[u8]) -> Parse<SavedModel> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let kind: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    let len = r.usize()?;
    let body_end = HEADER_LEN.checked_add(len).ok_or(FormatError::Truncated)?;
    let total = body_end.checked_add(4).ok_or(FormatError::Truncated)?;
    if bytes.len() < total {
        return Err(FormatError::Truncated);
    }
    if bytes.len() > total {
        return Err(malformed("trailing bytes after checksum"));
    }
    let stored = u32::from_le_bytes(bytes[body_end..total].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(FormatError::ChecksumMismatch { stored, computed });
    }
    let mut body = Reader {
        buf: &bytes[..body_end],
        pos: HEADER_LEN,
    };
    let model = match &kind {
        b"LSTM" => SavedModel::Neural(decode_neural(&mut body)?),
        b"PERC" => SavedModel::Perceptron(decode_perceptron(&mut body)?),
        other => return Err(malformed(format!("unknown model kind {:?}", String::from_utf8_lossy(other)))),
    };
    if body.pos != body_end {
        return Err(malformed("unused bytes in payload"));
    }
    Ok(model)
}

pub fn save_model(path: &Path, m: &SavedModel) -> Result<()> {
    write_file(path, &encode(m))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|source| Error::Format {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_neural(path: &Path) -> Result<NormalizerModel> {
    match load_model(path)? {
        SavedModel::Neural(m) => Ok(m),
        other => Err(Error::Format {
            path: path.display().to_string(),
            source: FormatError::WrongKind {
                expected: "LSTM".into(),
                found: other.kind().into(),
            },
        }),
    }
}

pub fn load_perceptron(path: &Path) -> Result<PerceptronModel> {
    match load_model(path)? {
        SavedModel::Perceptron(m) => Ok(m),
        other => Err(Error::Format {
            path: path.display().to_string(),
            source: FormatError::WrongKind {
                expected: "PERC".into(),
                found: other.kind().into(),
            },
        }),
    }
}
