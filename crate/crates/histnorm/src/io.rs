//! Parallel token files and labeled-sequence files.
//!
//! A token file holds one `historical<TAB>modern` pair per line. Lines
//! starting with `#` and blank lines are skipped.
//!
//! A labeled-sequence file holds one `symbols<TAB>labels` line per word.
//! Both sides are space-separated; `<W>` is the start-of-word symbol,
//! `<EPS>` the empty label, and inside ordinary tokens `\s`, `\t`, `\n`,
//! `\<` and `\\` stand for space, tab, newline, `<` and backslash.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use histnorm_core::alignment::{Label, LabeledSequence, Symbol};
use histnorm_core::corpus::{TextDataset, TokenPair};

use crate::{Error, Result};

/// Dataset id for a path: the file stem.
pub fn dataset_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn parse_dataset(id: &str, origin: &str, text: &str) -> Result<TextDataset> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(hist), Some(modern), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: "expected exactly two tab-separated fields".into(),
            });
        };
        if hist.is_empty() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: "empty historical form".into(),
            });
        }
        pairs.push(TokenPair::new(hist, modern));
    }
    Ok(TextDataset::new(id, pairs))
}

pub fn load_dataset(path: &Path) -> Result<TextDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&dataset_id(path), &path.display().to_string(), &text)
}

pub fn format_dataset(d: &TextDataset) -> String {
    let mut out = String::new();
    for p in &d.pairs {
        let _ = writeln!(out, "{}\t{}", p.historical, p.modern);
    }
    out
}

pub fn save_dataset(path: &Path, d: &TextDataset) -> Result<()> {
    write_file(path, format_dataset(d).as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn escape(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\\' => out.push_str("\\\\"),
            '<' => out.push_str("\\<"),
            c => out.push(c),
        }
    }
}

fn unescape(token: &str) -> Option<String> {
    let mut out = String::new();
    let mut chars = token.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            's' => ' ',
            't' => '\t',
            'n' => '\n',
            '\\' => '\\',
            '<' => '<',
            _ => return None,
        });
    }
    Some(out)
}

pub fn format_labeled(seq: &LabeledSequence) -> String {
    let mut out = String::new();
    for (i, s) in seq.inputs.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match s {
            Symbol::Start => out.push_str("<W>"),
            Symbol::Char(c) => escape(c.encode_utf8(&mut [0; 4]), &mut out),
        }
    }
    out.push('\t');
    for (i, l) in seq.labels.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match l {
            Label::Epsilon => out.push_str("<EPS>"),
            Label::Chars(s) => escape(s, &mut out),
        }
    }
    out
}

pub fn parse_labeled_line(line: &str) -> Option<LabeledSequence> {
    let (left, right) = line.split_once('\t')?;
    let inputs = left
        .split(' ')
        .map(|tok| match tok {
            "<W>" => Some(Symbol::Start),
            _ => {
                let s = unescape(tok)?;
                let mut cs = s.chars();
                match (cs.next(), cs.next()) {
                    (Some(c), None) => Some(Symbol::Char(c)),
                    _ => None,
                }
            }
        })
        .collect::<Option<Vec<_>>>()?;
    let labels = right
        .split(' ')
        .map(|tok| match tok {
            "<EPS>" => Some(Label::Epsilon),
            "" => None,
            _ => unescape(tok).map(Label::Chars),
        })
        .collect::<Option<Vec<_>>>()?;
    (inputs.len() == labels.len()).then_some(LabeledSequence { inputs, labels })
}

pub fn format_labeled_file(seqs: &[LabeledSequence]) -> String {
    let mut out = String::new();
    for s in seqs {
        out.push_str(&format_labeled(s));
        out.push('\n');
    }
    out
}

pub fn parse_labeled_file(origin: &str, text: &str) -> Result<Vec<LabeledSequence>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            parse_labeled_line(l).ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: "malformed labeled sequence".into(),
            })
        })
        .collect()
}

pub fn load_labeled(path: &Path) -> Result<Vec<LabeledSequence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_file(&path.display().to_string(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_lines() {
        let d = parse_dataset("x", "x.tsv", "# c\n\nvnd\tund\r\njn\tihn\n").unwrap();
        assert_eq!(d.id, "x");
        assert_eq!(d.pairs, vec![TokenPair::new("vnd", "und"), TokenPair::new("jn", "ihn")]);
        assert_eq!(format_dataset(&d), "vnd\tund\njn\tihn\n");
    }

    #[test]
    fn dataset_errors_carry_line() {
        match parse_dataset("x", "x.tsv", "a\tb\nbroken\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_dataset("x", "x.tsv", "a\tb\tc\n").is_err());
        assert!(parse_dataset("x", "x.tsv", "\tb\n").is_err());
    }

    #[test]
    fn labeled_format() {
        let seq = LabeledSequence {
            inputs: vec![Symbol::Start, Symbol::Char('j'), Symbol::Char(' ')],
            labels: vec![Label::Epsilon, Label::Chars("ih".into()), Label::Chars("<\\".into())],
        };
        let line = format_labeled(&seq);
        assert_eq!(line, "<W> j \\s\t<EPS> ih \\<\\\\");
        assert_eq!(parse_labeled_line(&line), Some(seq));
        assert_eq!(parse_labeled_line("<W> a\t<EPS>"), None);
        assert_eq!(parse_labeled_line("ab\tx"), None);
        assert_eq!(parse_labeled_line("\\q\tx"), None);
    }
}
