//! CoNLL-style labeled corpora, plain unlabeled corpora, and vocabularies.
//!
//! The internal label scheme is BIO2. CoNLL-2003 files ship IOB1 and must be
//! run through [`normalize_tag_scheme`] with [`TagScheme::Iob1`] after
//! reading; files already in BIO2 pass through unchanged.

mod vocab;

pub use vocab::{
    build_vocabulary, BigramCounter, Vocabulary, VocabularyBuilder, BOUNDARY_SYMBOL, UNK_SYMBOL,
};

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::{Error, Result};

/// The four CoNLL entity categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityType {
    Loc,
    Misc,
    Org,
    Per,
}

impl EntityType {
    pub const ALL: [EntityType; 4] = [
        EntityType::Loc,
        EntityType::Misc,
        EntityType::Org,
        EntityType::Per,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::Loc => "LOC",
            EntityType::Misc => "MISC",
            EntityType::Org => "ORG",
            EntityType::Per => "PER",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LOC" => Ok(EntityType::Loc),
            "MISC" => Ok(EntityType::Misc),
            "ORG" => Ok(EntityType::Org),
            "PER" => Ok(EntityType::Per),
            other => Err(Error::data(format!("unknown entity type `{other}`"))),
        }
    }
}

/// A parsed token-level entity label: `O`, `B-X`, or `I-X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeLabel {
    Outside,
    Begin(EntityType),
    Inside(EntityType),
}

impl NeLabel {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(NeLabel::Outside);
        }
        if let Some(ty) = s.strip_prefix("B-") {
            return Ok(NeLabel::Begin(ty.parse()?));
        }
        if let Some(ty) = s.strip_prefix("I-") {
            return Ok(NeLabel::Inside(ty.parse()?));
        }
        Err(Error::data(format!("invalid entity label `{s}`")))
    }

    pub fn entity_type(&self) -> Option<EntityType> {
        match self {
            NeLabel::Outside => None,
            NeLabel::Begin(ty) | NeLabel::Inside(ty) => Some(*ty),
        }
    }
}

impl fmt::Display for NeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeLabel::Outside => f.write_str("O"),
            NeLabel::Begin(ty) => write!(f, "B-{ty}"),
            NeLabel::Inside(ty) => write!(f, "I-{ty}"),
        }
    }
}

/// One token with its optional annotation columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub pos: Option<String>,
    pub lemma: Option<String>,
    pub chunk: Option<String>,
    /// Entity label as read from the file (`O`, `B-PER`, ... in either scheme).
    pub ne_label: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>, ne_label: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            pos: None,
            lemma: None,
            chunk: None,
            ne_label: Some(ne_label.into()),
        }
    }
}

/// A non-empty token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Raw label strings, `"O"` where no label is present.
    pub fn labels(&self) -> Vec<&str> {
        self.tokens
            .iter()
            .map(|t| t.ne_label.as_deref().unwrap_or("O"))
            .collect()
    }
}

/// Column separator of a CoNLL file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Separator {
    #[default]
    Space,
    Tab,
}

impl Separator {
    pub fn as_char(&self) -> char {
        match self {
            Separator::Space => ' ',
            Separator::Tab => '\t',
        }
    }
}

impl FromStr for Separator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "space" => Ok(Separator::Space),
            "tab" => Ok(Separator::Tab),
            other => Err(Error::data(format!(
                "unknown separator `{other}` (expected `space` or `tab`)"
            ))),
        }
    }
}

/// Which column holds what. Absorbs the CoNLL-2002 vs. CoNLL-2003 layout
/// differences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub word_col: usize,
    pub ne_col: usize,
    pub pos_col: Option<usize>,
    pub lemma_col: Option<usize>,
    pub chunk_col: Option<usize>,
    pub separator: Separator,
}

impl ColumnSpec {
    /// CoNLL-2003 layout: `word pos chunk ne`, space-separated.
    pub fn conll2003() -> Self {
        ColumnSpec {
            word_col: 0,
            ne_col: 3,
            pos_col: Some(1),
            lemma_col: None,
            chunk_col: Some(2),
            separator: Separator::Space,
        }
    }

    /// CoNLL-2002 layout: `word ne`, space-separated.
    pub fn conll2002() -> Self {
        ColumnSpec {
            word_col: 0,
            ne_col: 1,
            pos_col: None,
            lemma_col: None,
            chunk_col: None,
            separator: Separator::Space,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = Vec::new();
        let mut push = |col: Option<usize>| -> Result<()> {
            if let Some(c) = col {
                if seen.contains(&c) {
                    return Err(Error::data(format!("column index {c} used twice")));
                }
                seen.push(c);
            }
            Ok(())
        };
        push(Some(self.word_col))?;
        push(Some(self.ne_col))?;
        push(self.pos_col)?;
        push(self.lemma_col)?;
        push(self.chunk_col)?;
        Ok(())
    }

    /// Highest referenced column index.
    pub fn max_col(&self) -> usize {
        [
            Some(self.word_col),
            Some(self.ne_col),
            self.pos_col,
            self.lemma_col,
            self.chunk_col,
        ]
        .into_iter()
        .flatten()
        .max()
        .unwrap()
    }
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec::conll2003()
    }
}

/// Tag scheme of a labeled file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagScheme {
    Iob1,
    #[default]
    Bio2,
}

impl FromStr for TagScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iob1" => Ok(TagScheme::Iob1),
            "bio2" => Ok(TagScheme::Bio2),
            other => Err(Error::data(format!(
                "unknown tag scheme `{other}` (expected `iob1` or `bio2`)"
            ))),
        }
    }
}

/// A labeled corpus plus the column layout it was read with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub sentences: Vec<Sentence>,
    pub label_set: BTreeSet<EntityType>,
    pub column_spec: ColumnSpec,
}

impl LabeledCorpus {
    pub fn new(sentences: Vec<Sentence>, column_spec: ColumnSpec) -> Result<Self> {
        let mut label_set = BTreeSet::new();
        for (si, sentence) in sentences.iter().enumerate() {
            for (ti, token) in sentence.tokens.iter().enumerate() {
                if let Some(raw) = &token.ne_label {
                    let label = NeLabel::parse(raw).map_err(|e| Error::Label {
                        sentence: si,
                        position: ti,
                        msg: e.to_string(),
                    })?;
                    if let Some(ty) = label.entity_type() {
                        label_set.insert(ty);
                    }
                }
            }
        }
        Ok(LabeledCorpus {
            sentences,
            label_set,
            column_spec,
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Set of surface forms, for OOV analysis.
    pub fn surface_set(&self) -> BTreeSet<&str> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.surface.as_str()))
            .collect()
    }
}

/// Reads a CoNLL file: one token per line, blank line between sentences,
/// `-DOCSTART-` sentences dropped. Labels are kept exactly as read.
pub fn read_conll<R: BufRead>(reader: R, spec: &ColumnSpec) -> Result<LabeledCorpus> {
    spec.validate()?;
    let sep = spec.separator.as_char();
    let max_col = spec.max_col();

    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut flush = |current: &mut Vec<Token>| {
        if !current.is_empty() {
            let tokens = std::mem::take(current);
            if tokens[0].surface != "-DOCSTART-" {
                sentences.push(Sentence { tokens });
            }
        }
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            flush(&mut current);
            continue;
        }
        let fields: Vec<&str> = line.split(sep).collect();
        if fields.len() <= max_col {
            return Err(Error::Parse {
                line: lineno,
                msg: format!(
                    "expected at least {} columns, found {}",
                    max_col + 1,
                    fields.len()
                ),
            });
        }
        let surface = fields[spec.word_col];
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("bad token surface `{surface}`"),
            });
        }
        let get = |col: Option<usize>| col.map(|c| fields[c].to_string());
        current.push(Token {
            surface: surface.to_string(),
            pos: get(spec.pos_col),
            lemma: get(spec.lemma_col),
            chunk: get(spec.chunk_col),
            ne_label: Some(fields[spec.ne_col].to_string()),
        });
    }
    flush(&mut current);

    LabeledCorpus::new(sentences, spec.clone())
}

/// Writes a corpus back in the layout of its [`ColumnSpec`]. Columns not
/// covered by the spec are filled with `-`.
pub fn write_conll<W: Write>(corpus: &LabeledCorpus, writer: &mut W) -> Result<()> {
    write_conll_with(corpus, writer, |_, _| None)
}

/// Like [`write_conll`] but appends one extra column per token, typically
/// predicted labels. The callback receives (sentence index, token index).
pub fn write_conll_with<W: Write>(
    corpus: &LabeledCorpus,
    writer: &mut W,
    mut extra: impl FnMut(usize, usize) -> Option<String>,
) -> Result<()> {
    let spec = &corpus.column_spec;
    let sep = spec.separator.as_char();
    let width = spec.max_col() + 1;
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let mut fields: Vec<&str> = vec!["-"; width];
            fields[spec.word_col] = &token.surface;
            if let (Some(c), Some(v)) = (spec.pos_col, token.pos.as_deref()) {
                fields[c] = v;
            }
            if let (Some(c), Some(v)) = (spec.lemma_col, token.lemma.as_deref()) {
                fields[c] = v;
            }
            if let (Some(c), Some(v)) = (spec.chunk_col, token.chunk.as_deref()) {
                fields[c] = v;
            }
            fields[spec.ne_col] = token.ne_label.as_deref().unwrap_or("O");
            let appended = extra(si, ti);
            let mut line = fields.join(&sep.to_string());
            if let Some(extra_col) = appended {
                line.push(sep);
                line.push_str(&extra_col);
            }
            writeln!(writer, "{line}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Rewrites all labels into well-formed BIO2. Entity spans are preserved
/// exactly; labels violating the declared source scheme are an error.
pub fn normalize_tag_scheme(corpus: &LabeledCorpus, source: TagScheme) -> Result<LabeledCorpus> {
    let mut out = corpus.clone();
    for (si, sentence) in out.sentences.iter_mut().enumerate() {
        let mut prev: Option<NeLabel> = None;
        for ti in 0..sentence.tokens.len() {
            let raw = sentence.tokens[ti].ne_label.as_deref().unwrap_or("O");
            let label = NeLabel::parse(raw).map_err(|e| Error::Label {
                sentence: si,
                position: ti,
                msg: e.to_string(),
            })?;
            let normalized = match (source, label) {
                (_, NeLabel::Outside) => NeLabel::Outside,
                (TagScheme::Iob1, NeLabel::Inside(ty)) => {
                    // IOB1: I-X starts an entity unless it continues one of
                    // the same type.
                    if prev.and_then(|p| p.entity_type()) == Some(ty) {
                        NeLabel::Inside(ty)
                    } else {
                        NeLabel::Begin(ty)
                    }
                }
                (TagScheme::Iob1, NeLabel::Begin(ty)) => {
                    // IOB1 uses B-X only between two adjacent X entities.
                    if prev.and_then(|p| p.entity_type()) != Some(ty) {
                        return Err(Error::Label {
                            sentence: si,
                            position: ti,
                            msg: format!("`B-{ty}` not preceded by a `{ty}` label under IOB1"),
                        });
                    }
                    NeLabel::Begin(ty)
                }
                (TagScheme::Bio2, NeLabel::Begin(ty)) => NeLabel::Begin(ty),
                (TagScheme::Bio2, NeLabel::Inside(ty)) => {
                    let continues = matches!(
                        prev,
                        Some(NeLabel::Begin(p) | NeLabel::Inside(p)) if p == ty
                    );
                    if !continues {
                        return Err(Error::Label {
                            sentence: si,
                            position: ti,
                            msg: format!("`I-{ty}` does not continue a `{ty}` span under BIO2"),
                        });
                    }
                    NeLabel::Inside(ty)
                }
            };
            sentence.tokens[ti].ne_label = Some(normalized.to_string());
            prev = Some(label);
        }
    }
    Ok(out)
}

/// Iterator over whitespace-tokenized sentences of a plain corpus, one
/// sentence per line. Blank lines are skipped; invalid UTF-8 reports the
/// byte offset.
pub struct PlainSentences<R> {
    reader: R,
    offset: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> PlainSentences<R> {
    pub fn new(reader: R) -> Self {
        PlainSentences {
            reader,
            offset: 0,
            buf: Vec::new(),
        }
    }
}

impl<R: BufRead> Iterator for PlainSentences<R> {
    type Item = Result<Vec<String>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Err(e) => return Some(Err(e.into())),
                Ok(0) => return None,
                Ok(n) => {
                    let line_start = self.offset;
                    self.offset += n;
                    let line = match std::str::from_utf8(&self.buf) {
                        Ok(s) => s,
                        Err(e) => {
                            return Some(Err(Error::Utf8 {
                                offset: line_start + e.valid_up_to(),
                            }))
                        }
                    };
                    let tokens: Vec<String> =
                        line.split_whitespace().map(str::to_string).collect();
                    if !tokens.is_empty() {
                        return Some(Ok(tokens));
                    }
                }
            }
        }
    }
}

/// Tokenizes a whole plain-text stream into sentences.
pub fn tokenize_plain<R: BufRead>(reader: R) -> Result<Vec<Vec<String>>> {
    PlainSentences::new(reader).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn spec2003() -> ColumnSpec {
        ColumnSpec::conll2003()
    }

    #[test]
    fn read_two_token_sentence() {
        let input = "Obama NNP I-NP B-PER\nspoke VBD I-VP O\n\n";
        let corpus = read_conll(Cursor::new(input), &spec2003()).unwrap();
        assert_eq!(corpus.sentences.len(), 1);
        let s = &corpus.sentences[0];
        assert_eq!(s.len(), 2);
        assert_eq!(s.tokens[0].surface, "Obama");
        assert_eq!(s.tokens[0].pos.as_deref(), Some("NNP"));
        assert_eq!(s.labels(), vec!["B-PER", "O"]);
        assert_eq!(
            corpus.label_set.into_iter().collect::<Vec<_>>(),
            vec![EntityType::Per]
        );
    }

    #[test]
    fn docstart_sentences_dropped() {
        let input = "-DOCSTART- -X- O O\n\n-DOCSTART- -X- O O\n\n";
        let corpus = read_conll(Cursor::new(input), &spec2003()).unwrap();
        assert_eq!(corpus.sentences.len(), 0);
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        let corpus = read_conll(Cursor::new(""), &spec2003()).unwrap();
        assert!(corpus.sentences.is_empty());
    }

    #[test]
    fn missing_column_is_parse_error_with_line() {
        let input = "Obama NNP I-NP B-PER\nspoke VBD\n\n";
        let err = read_conll(Cursor::new(input), &spec2003()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn iob1_read_verbatim_then_normalized() {
        // Entity at sentence start is written I-PER under IOB1.
        let input = "Fischler NNP I-NP I-PER\nsaid VBD I-VP O\n\n";
        let corpus = read_conll(Cursor::new(input), &spec2003()).unwrap();
        assert_eq!(corpus.sentences[0].labels(), vec!["I-PER", "O"]);
        let norm = normalize_tag_scheme(&corpus, TagScheme::Iob1).unwrap();
        assert_eq!(norm.sentences[0].labels(), vec!["B-PER", "O"]);
    }

    fn corpus_from_labels(labels: &[&str]) -> LabeledCorpus {
        let tokens = labels
            .iter()
            .enumerate()
            .map(|(i, l)| Token::new(format!("w{i}"), *l))
            .collect();
        LabeledCorpus::new(vec![Sentence { tokens }], ColumnSpec::conll2002()).unwrap()
    }

    #[test]
    fn iob1_span_initial_rewrite() {
        let corpus = corpus_from_labels(&["I-PER", "I-PER", "O"]);
        let norm = normalize_tag_scheme(&corpus, TagScheme::Iob1).unwrap();
        assert_eq!(norm.sentences[0].labels(), vec!["B-PER", "I-PER", "O"]);
    }

    #[test]
    fn iob1_adjacent_entities() {
        let corpus = corpus_from_labels(&["I-PER", "B-PER"]);
        let norm = normalize_tag_scheme(&corpus, TagScheme::Iob1).unwrap();
        assert_eq!(norm.sentences[0].labels(), vec!["B-PER", "B-PER"]);
    }

    #[test]
    fn bio2_input_is_identity() {
        let corpus = corpus_from_labels(&["B-PER", "I-PER", "O", "B-LOC"]);
        let norm = normalize_tag_scheme(&corpus, TagScheme::Bio2).unwrap();
        assert_eq!(norm, corpus);
    }

    #[test]
    fn scheme_violation_names_sentence_and_position() {
        let corpus = corpus_from_labels(&["O", "I-LOC"]);
        let err = normalize_tag_scheme(&corpus, TagScheme::Bio2).unwrap_err();
        match err {
            Error::Label {
                sentence, position, ..
            } => {
                assert_eq!((sentence, position), (0, 1));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn iob1_rejects_b_after_o() {
        let corpus = corpus_from_labels(&["O", "B-PER"]);
        assert!(normalize_tag_scheme(&corpus, TagScheme::Iob1).is_err());
    }

    #[test]
    fn tokenize_splits_on_whitespace_runs() {
        let sents = tokenize_plain(Cursor::new("Barack Obama hat 2012\n")).unwrap();
        assert_eq!(sents, vec![vec!["Barack", "Obama", "hat", "2012"]]);
        let sents = tokenize_plain(Cursor::new("a\tb  c\n")).unwrap();
        assert_eq!(sents, vec![vec!["a", "b", "c"]]);
    }

    #[test]
    fn blank_and_space_only_lines_skipped() {
        let sents = tokenize_plain(Cursor::new("a b\n   \n\nc\n")).unwrap();
        assert_eq!(sents, vec![vec!["a", "b"], vec!["c"]]);
    }

    #[test]
    fn invalid_utf8_reports_offset() {
        let bytes = b"ok line\nbad \xff byte\n";
        let err = tokenize_plain(Cursor::new(&bytes[..])).unwrap_err();
        match err {
            Error::Utf8 { offset } => assert_eq!(offset, 12),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn round_trip_preserves_content() {
        let input = "Obama NNP I-NP B-PER\nspoke VBD I-VP O\n\nEU NNP I-NP B-ORG\n\n";
        let corpus = read_conll(Cursor::new(input), &spec2003()).unwrap();
        let mut out = Vec::new();
        write_conll(&corpus, &mut out).unwrap();
        let reread = read_conll(Cursor::new(&out), &spec2003()).unwrap();
        assert_eq!(corpus, reread);
    }

    #[test]
    fn column_spec_rejects_duplicate_indices() {
        let spec = ColumnSpec {
            word_col: 0,
            ne_col: 0,
            pos_col: None,
            lemma_col: None,
            chunk_col: None,
            separator: Separator::Space,
        };
        assert!(spec.validate().is_err());
    }
}
