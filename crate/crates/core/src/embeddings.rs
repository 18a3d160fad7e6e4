//! Word2vec embedding files, vector lookup and the norm-vs-frequency
//! diagnostic.
//!
//! Vectors are kept exactly as stored in the file. They are not scaled to
//! unit length: the norm of a skip-gram vector grows with word frequency and
//! that is what damps the contribution of rare words to a context average.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::text::normalize_word;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl EmbeddingFormat {
    /// `.bin` files are binary, everything else is text.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

impl fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingFormat::Text => "text",
            EmbeddingFormat::Binary => "binary",
        })
    }
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(EmbeddingFormat::Text),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            other => Err(Error::Config(format!("unknown embedding format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingMeta {
    pub source: PathBuf,
    pub format: EmbeddingFormat,
    /// Records that repeated an earlier word (after normalization); the last
    /// occurrence wins.
    pub duplicates: usize,
}

/// Immutable word → vector map with a fixed dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    dim: usize,
    entries: HashMap<String, Vec<f32>>,
    meta: Option<EmbeddingMeta>,
}

impl EmbeddingModel {
    /// Builds a model from in-memory vectors. Keys are normalized the same
    /// way as on load; later duplicates replace earlier ones.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: AsRef<str>,
    {
        if dim == 0 {
            return Err(Error::Input("embedding dimension must be positive".into()));
        }
        let mut map = HashMap::new();
        for (word, vector) in entries {
            let key = normalize_word(word.as_ref());
            if key.is_empty() {
                return Err(Error::Input("empty vocabulary key".into()));
            }
            if vector.len() != dim {
                return Err(Error::Input(format!(
                    "vector for {key:?} has length {}, expected {dim}",
                    vector.len()
                )));
            }
            if let Some(x) = vector.iter().find(|x| !x.is_finite()) {
                return Err(Error::Input(format!(
                    "non-finite component {x} for {key:?}"
                )));
            }
            map.insert(key, vector);
        }
        Ok(EmbeddingModel {
            dim,
            entries: map,
            meta: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn meta(&self) -> Option<&EmbeddingMeta> {
        self.meta.as_ref()
    }

    /// Exact-match lookup after NFC normalization and lowercasing.
    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        if let Some(v) = self.entries.get(token) {
            return Some(v);
        }
        self.entries.get(&normalize_word(token)).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup(token).is_some()
    }

    /// Vocabulary in sorted order.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        words.sort_unstable();
        words
    }

    /// Writes the model in word2vec layout, words in sorted order.
    pub fn save(&self, path: &Path, format: EmbeddingFormat) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "{} {}", self.entries.len(), self.dim).map_err(io)?;
        for word in self.words() {
            let vector = &self.entries[word];
            match format {
                EmbeddingFormat::Text => {
                    write!(out, "{word}").map_err(io)?;
                    for x in vector {
                        // Debug formatting of f32 round-trips exactly.
                        write!(out, " {x:?}").map_err(io)?;
                    }
                    writeln!(out).map_err(io)?;
                }
                EmbeddingFormat::Binary => {
                    out.write_all(word.as_bytes()).map_err(io)?;
                    out.write_all(b" ").map_err(io)?;
                    for x in vector {
                        out.write_all(&x.to_le_bytes()).map_err(io)?;
                    }
                    out.write_all(b"\n").map_err(io)?;
                }
            }
        }
        out.flush().map_err(io)
    }
}

/// Loads a word2vec text or binary file.
pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let (declared, dim) = parse_header(header.trim()).ok_or_else(|| {
        Error::format(
            path,
            1,
            format!("malformed header {:?}, expected \"V D\"", header.trim()),
        )
    })?;

    let records = match format {
        EmbeddingFormat::Text => read_text_records(path, reader, dim)?,
        EmbeddingFormat::Binary => read_binary_records(path, reader, dim)?,
    };
    if records.len() != declared {
        return Err(Error::format(
            path,
            1,
            format!(
                "header declares {declared} words but file holds {}",
                records.len()
            ),
        ));
    }

    let mut entries = HashMap::with_capacity(records.len());
    let mut duplicates = 0;
    for (word, vector) in records {
        if entries.insert(word, vector).is_some() {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!(
            "{}: {duplicates} duplicate words, last occurrence kept",
            path.display()
        );
    }

    Ok(EmbeddingModel {
        dim,
        entries,
        meta: Some(EmbeddingMeta {
            source: path.to_path_buf(),
            format,
            duplicates,
        }),
    })
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let vocab = parts.next()?.parse().ok()?;
    let dim: usize = parts.next()?.parse().ok()?;
    if parts.next().is_some() || dim == 0 {
        return None;
    }
    Some((vocab, dim))
}

fn checked_word(path: &Path, line: usize, raw: &str) -> Result<String> {
    let word = normalize_word(raw);
    if word.is_empty() {
        return Err(Error::format(path, line, "empty word"));
    }
    Ok(word)
}

fn read_text_records<R: BufRead>(
    path: &Path,
    reader: R,
    dim: usize,
) -> Result<Vec<(String, Vec<f32>)>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = checked_word(path, lineno, parts.next().unwrap_or_default())?;
        let mut vector = Vec::with_capacity(dim);
        for part in parts {
            let x: f32 = part
                .parse()
                .map_err(|_| Error::format(path, lineno, format!("bad number {part:?}")))?;
            if !x.is_finite() {
                return Err(Error::format(
                    path,
                    lineno,
                    format!("non-finite value {part}"),
                ));
            }
            vector.push(x);
        }
        if vector.len() != dim {
            return Err(Error::format(
                path,
                lineno,
                format!(
                    "vector for {word:?} has {} values, expected {dim}",
                    vector.len()
                ),
            ));
        }
        records.push((word, vector));
    }
    Ok(records)
}

fn read_binary_records<R: Read>(
    path: &Path,
    reader: R,
    dim: usize,
) -> Result<Vec<(String, Vec<f32>)>> {
    let mut bytes = Vec::new();
    let mut reader = reader;
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;

    let mut records = Vec::new();
    let mut pos = 0;
    loop {
        // A newline after the previous vector is tolerated.
        while pos < bytes.len() && bytes[pos] == b'\n' {
            pos += 1;
        }
        if pos >= bytes.len() {
            break;
        }
        let record = records.len() + 1;
        let space = bytes[pos..]
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| Error::format(path, record, "word token not terminated by a space"))?;
        let raw = std::str::from_utf8(&bytes[pos..pos + space])
            .map_err(|_| Error::format(path, record, "word is not valid UTF-8"))?;
        let word = checked_word(path, record, raw)?;
        pos += space + 1;

        let end = pos + 4 * dim;
        if end > bytes.len() {
            return Err(Error::format(
                path,
                record,
                format!("truncated vector for {word:?}, expected {dim} floats"),
            ));
        }
        let vector: Vec<f32> = bytes[pos..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if let Some(x) = vector.iter().find(|x| !x.is_finite()) {
            return Err(Error::format(
                path,
                record,
                format!("non-finite value {x} for {word:?}"),
            ));
        }
        pos = end;
        records.push((word, vector));
    }
    Ok(records)
}

/// Word occurrence counts; absent words count 0.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, count: u64) {
        self.counts.insert(normalize_word(word), count);
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts
            .get(word)
            .or_else(|| self.counts.get(&normalize_word(word)))
            .copied()
            .unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Reads a `word<TAB>count` file.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table = FrequencyTable::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(path, i + 1, "expected word<TAB>count"))?;
            let count = count
                .trim()
                .parse()
                .map_err(|_| Error::format(path, i + 1, format!("bad count {count:?}")))?;
            table.insert(word, count);
        }
        Ok(table)
    }
}

impl<S: AsRef<str>> FromIterator<(S, u64)> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut table = FrequencyTable::new();
        for (w, c) in iter {
            table.insert(w.as_ref(), c);
        }
        table
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub word: String,
    pub frequency: u64,
    pub norm: f64,
}

/// Samples up to `sample_size` distinct words present in both the model and
/// the frequency table and reports each word's frequency and vector norm.
/// Rows come back sorted by word, so a given seed always yields the same
/// bytes.
pub fn norm_frequency_report(
    model: &EmbeddingModel,
    freqs: &FrequencyTable,
    sample_size: usize,
    seed: u64,
) -> Result<Vec<NormRow>> {
    if model.is_empty() {
        return Err(Error::Input("embedding model is empty".into()));
    }
    let eligible: Vec<&str> = model
        .words()
        .into_iter()
        .filter(|w| freqs.contains(w))
        .collect();
    if eligible.is_empty() {
        return Err(Error::Input(
            "no word is present in both the model and the frequency table".into(),
        ));
    }
    let amount = sample_size.min(eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, eligible.len(), amount).into_vec();
    picked.sort_unstable();

    Ok(picked
        .into_iter()
        .map(|i| {
            let word = eligible[i];
            let norm = model.entries[word]
                .iter()
                .map(|&x| f64::from(x) * f64::from(x))
                .sum::<f64>()
                .sqrt();
            NormRow {
                word: word.to_string(),
                frequency: freqs.get(word),
                norm,
            }
        })
        .collect())
}

pub fn write_norm_report<W: Write>(rows: &[NormRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "word\tfrequency\tnorm")?;
    for row in rows {
        writeln!(out, "{}\t{}\t{}", row.word, row.frequency, row.norm)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> PathBuf {
        let path = dir.path().join(name);
        File::create(&path).unwrap().write_all(bytes).unwrap();
        path
    }

    #[test]
    fn loads_text_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "m.txt", b"2 3\na 1 0 0\nb 0 1 0\n");
        let model = load_embeddings(&path, EmbeddingFormat::Text).unwrap();
        assert_eq!(model.dim(), 3);
        assert_eq!(model.len(), 2);
        assert_eq!(model.lookup("a"), Some(&[1.0, 0.0, 0.0][..]));
        assert_eq!(model.lookup("b"), Some(&[0.0, 1.0, 0.0][..]));
        assert_eq!(model.lookup("zz"), None);
        assert_eq!(model.lookup("A"), Some(&[1.0, 0.0, 0.0][..]));
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "m.txt", b"3 2\na 1 0\nb 0 1\n");
        let err = load_embeddings(&path, EmbeddingFormat::Text).unwrap_err();
        assert!(err.to_string().contains("declares 3"), "{err}");
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in [
            ("header", &b"two 3\na 1 0 0\n"[..]),
            ("short", b"1 3\na 1 0\n"),
            ("nan", b"1 2\na NaN 0\n"),
            ("inf", b"1 2\na inf 0\n"),
        ] {
            let path = write_file(&dir, name, body);
            assert!(
                load_embeddings(&path, EmbeddingFormat::Text).is_err(),
                "{name}"
            );
        }
    }

    #[test]
    fn binary_nonfinite_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = b"1 2\na ".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        let path = write_file(&dir, "m.bin", &bytes);
        assert!(load_embeddings(&path, EmbeddingFormat::Binary).is_err());
    }

    #[test]
    fn duplicates_keep_last() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "m.txt", b"3 1\na 1\nb 2\nA 3\n");
        let model = load_embeddings(&path, EmbeddingFormat::Text).unwrap();
        assert_eq!(model.len(), 2);
        assert_eq!(model.lookup("a"), Some(&[3.0][..]));
        assert_eq!(model.meta().unwrap().duplicates, 1);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            EmbeddingFormat::from_extension(Path::new("m.bin")),
            EmbeddingFormat::Binary
        );
        assert_eq!(
            EmbeddingFormat::from_extension(Path::new("m.vec")),
            EmbeddingFormat::Text
        );
    }

    #[test]
    fn report_clamps_and_is_deterministic() {
        let model = EmbeddingModel::from_entries(
            2,
            (0..100).map(|i| (format!("w{i}"), vec![i as f32, 1.0])),
        )
        .unwrap();
        let freqs: FrequencyTable = (0..100).map(|i| (format!("w{i}"), i as u64)).collect();
        let all = norm_frequency_report(&model, &freqs, 1_000_000, 0).unwrap();
        assert_eq!(all.len(), 100);

        let a = norm_frequency_report(&model, &freqs, 10, 7).unwrap();
        let b = norm_frequency_report(&model, &freqs, 10, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let mut words: Vec<_> = a.iter().map(|r| &r.word).collect();
        words.dedup();
        assert_eq!(words.len(), 10);
    }

    #[test]
    fn report_needs_overlap() {
        let model = EmbeddingModel::from_entries(1, [("a", vec![1.0])]).unwrap();
        let freqs: FrequencyTable = [("b", 3u64)].into_iter().collect();
        assert!(norm_frequency_report(&model, &freqs, 10, 0).is_err());
    }

    #[test]
    fn frequency_table_defaults_to_zero() {
        let freqs: FrequencyTable = [("Берег", 3u64)].into_iter().collect();
        assert_eq!(freqs.get("берег"), 3);
        assert_eq!(freqs.get("река"), 0);
    }
}
