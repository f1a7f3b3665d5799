//! Pruned tri-gram vocabulary, bag-of-words counts and TF-IDF weighting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayViewMut1};

use crate::corpus::TokenizedDoc;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_DF: usize = 3;
pub const DEFAULT_MAX_DF_FRACTION: f64 = 0.5;

const VOCAB_MAGIC: &str = "#narrembed-vocab";
const MATRIX_MAGIC: &str = "#narrembed-sparse";
const FORMAT_VERSION: u32 = 1;

/// Term ↔ id map with document frequencies. Ids are contiguous and follow
/// lexicographic term order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    term_to_id: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    fn from_sorted(entries: Vec<(String, usize)>, n_docs: usize) -> Self {
        let mut terms = Vec::with_capacity(entries.len());
        let mut doc_freq = Vec::with_capacity(entries.len());
        for (t, df) in entries {
            terms.push(t);
            doc_freq.push(df);
        }
        let term_to_id = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { terms, term_to_id, doc_freq, n_docs }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.term_to_id.get(term).copied()
    }

    pub fn term(&self, id: usize) -> Option<&str> {
        self.terms.get(id).map(String::as_str)
    }

    pub fn doc_freq(&self, id: usize) -> usize {
        self.doc_freq[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_to_id(&self) -> &HashMap<String, usize> {
        &self.term_to_id
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        for t in &self.terms {
            if t.contains(['\t', '\n', '\r']) {
                return Err(Error::Format(format!("term {t:?} contains a tab or newline")));
            }
        }
        write_file(path, |out| {
            writeln!(out, "{VOCAB_MAGIC}\tv{FORMAT_VERSION}")?;
            writeln!(out, "n_docs\t{}\tn_terms\t{}", self.n_docs, self.terms.len())?;
            for (id, (t, df)) in self.terms.iter().zip(&self.doc_freq).enumerate() {
                writeln!(out, "{t}\t{id}\t{df}")?;
            }
            Ok(())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut lines = read_lines(path)?.into_iter().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Format("empty vocabulary file".into()))?;
        check_header(&header, VOCAB_MAGIC)?;
        let (_, dims) = lines.next().ok_or_else(|| Error::Format("missing dims line".into()))?;
        let dims: Vec<&str> = dims.split('\t').collect();
        if dims.len() != 4 || dims[0] != "n_docs" || dims[2] != "n_terms" {
            return Err(Error::Format("malformed dims line".into()));
        }
        let n_docs: usize = parse_field(dims[1], 2)?;
        let n_terms: usize = parse_field(dims[3], 2)?;
        let mut entries = Vec::with_capacity(n_terms);
        for (idx, line) in lines {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::Parse { line: idx + 1, message: "expected term<TAB>id<TAB>df".into() });
            }
            let id: usize = parse_field(f[1], idx + 1)?;
            let df: usize = parse_field(f[2], idx + 1)?;
            if id != entries.len() {
                return Err(Error::Parse { line: idx + 1, message: format!("non-contiguous id {id}") });
            }
            entries.push((f[0].to_string(), df));
        }
        if entries.len() != n_terms {
            return Err(Error::Format(format!("expected {n_terms} terms, found {}", entries.len())));
        }
        Ok(Self::from_sorted(entries, n_docs))
    }
}

/// Keep terms whose document frequency lies in `[min_df, max_df_fraction * n_docs]`.
pub fn build_vocabulary(docs: &[TokenizedDoc], min_df: usize, max_df_fraction: f64) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::config("cannot build a vocabulary from zero documents"));
    }
    if !(max_df_fraction > 0.0 && max_df_fraction <= 1.0) {
        return Err(Error::config(format!("max_df_fraction {max_df_fraction} not in (0, 1]")));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let unique: HashSet<&str> = doc.terms.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let max_df = max_df_fraction * docs.len() as f64;
    let entries: Vec<(String, usize)> =
        df.into_iter().filter(|&(_, n)| n >= min_df && n as f64 <= max_df).map(|(t, n)| (t.to_string(), n)).collect();
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok(Vocabulary::from_sorted(entries, docs.len()))
}

/// Row-compressed sparse matrix with one labelled row per document.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows<T> {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
    row_ids: Vec<String>,
}

pub type CountMatrix = SparseRows<u32>;

impl<T: Copy> SparseRows<T> {
    /// Build from per-row `(column, value)` lists. Columns must be strictly
    /// increasing within a row and below `n_cols`.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, T)>>, row_ids: Vec<String>) -> Result<Self> {
        if rows.len() != row_ids.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: row_ids.len() });
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            let mut prev: Option<usize> = None;
            for (col, v) in row {
                if col >= n_cols || prev.is_some_and(|p| p >= col) {
                    return Err(Error::Format(format!("bad column {col} (n_cols {n_cols})")));
                }
                prev = Some(col);
                indices.push(col);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self { n_cols, indptr, indices, values, row_ids })
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// `(column, value)` pairs of row `r`, in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    /// All `(row, column, value)` triples in row-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }
}

impl<T: Copy + Into<f64>> SparseRows<T> {
    /// Scatter row `r` into a zeroed dense vector.
    pub fn densify_row_into(&self, r: usize, mut out: ArrayViewMut1<'_, f64>) {
        out.fill(0.0);
        for (c, v) in self.row(r) {
            out[c] = v.into();
        }
    }

    /// Dense copy of the selected rows, in the given order.
    pub fn dense_rows(&self, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.n_cols));
        for (i, &r) in rows.iter().enumerate() {
            self.densify_row_into(r, out.row_mut(i));
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let all: Vec<usize> = (0..self.n_rows()).collect();
        self.dense_rows(&all)
    }
}

impl<T: Copy + Display + FromStr> SparseRows<T> {
    fn save_as(&self, path: &Path, kind: &str) -> Result<()> {
        for id in &self.row_ids {
            if id.contains(['\t', '\n', '\r']) {
                return Err(Error::Format(format!("row id {id:?} contains a tab or newline")));
            }
        }
        write_file(path, |out| {
            writeln!(out, "{MATRIX_MAGIC}\tv{FORMAT_VERSION}\t{kind}")?;
            writeln!(out, "dims\t{}\t{}\t{}", self.n_rows(), self.n_cols, self.nnz())?;
            for id in &self.row_ids {
                writeln!(out, "row\t{id}")?;
            }
            for (r, c, v) in self.triples() {
                writeln!(out, "{r}\t{c}\t{v}")?;
            }
            Ok(())
        })
    }

    fn load_as(path: &Path, kind: &str) -> Result<Self> {
        let lines = read_lines(path)?;
        let mut it = lines.iter().enumerate();
        let (_, header) = it.next().ok_or_else(|| Error::Format("empty matrix file".into()))?;
        let rest = check_header(header, MATRIX_MAGIC)?;
        if rest != [kind] {
            return Err(Error::Format(format!("expected a {kind} matrix, found {rest:?}")));
        }
        let (_, dims) = it.next().ok_or_else(|| Error::Format("missing dims line".into()))?;
        let d: Vec<&str> = dims.split('\t').collect();
        if d.len() != 4 || d[0] != "dims" {
            return Err(Error::Format("malformed dims line".into()));
        }
        let (n_rows, n_cols, nnz): (usize, usize, usize) =
            (parse_field(d[1], 2)?, parse_field(d[2], 2)?, parse_field(d[3], 2)?);
        let mut row_ids = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let (idx, line) = it.next().ok_or_else(|| Error::Format("truncated row id block".into()))?;
            let id = line
                .strip_prefix("row\t")
                .ok_or_else(|| Error::Parse { line: idx + 1, message: "expected row id".into() })?;
            row_ids.push(id.to_string());
        }
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n_rows];
        let mut count = 0;
        for (idx, line) in it {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::Parse { line: idx + 1, message: "expected row<TAB>col<TAB>value".into() });
            }
            let r: usize = parse_field(f[0], idx + 1)?;
            let c: usize = parse_field(f[1], idx + 1)?;
            let v: T = parse_field(f[2], idx + 1)?;
            if r >= n_rows {
                return Err(Error::Parse { line: idx + 1, message: format!("row {r} out of range") });
            }
            rows[r].push((c, v));
            count += 1;
        }
        if count != nnz {
            return Err(Error::Format(format!("expected {nnz} entries, found {count}")));
        }
        Self::from_rows(n_cols, rows, row_ids)
    }
}

impl CountMatrix {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.save_as(path.as_ref(), "counts")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_as(path.as_ref(), "counts")
    }

    /// Number of rows each column appears in.
    pub fn doc_freq(&self) -> Vec<usize> {
        let mut df = vec![0; self.n_cols];
        for &c in &self.indices {
            df[c] += 1;
        }
        df
    }
}

/// Bag-of-words counts. Out-of-vocabulary terms are ignored.
pub fn term_document_counts(docs: &[TokenizedDoc], vocab: &Vocabulary) -> CountMatrix {
    let rows = docs
        .iter()
        .map(|doc| {
            let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
            for t in &doc.terms {
                if let Some(id) = vocab.id(t) {
                    *counts.entry(id).or_default() += 1;
                }
            }
            counts.into_iter().collect()
        })
        .collect();
    let ids = docs.iter().map(|d| d.record_id.clone()).collect();
    CountMatrix::from_rows(vocab.len(), rows, ids).expect("vocabulary ids are in range and sorted")
}

/// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// TF-IDF weights: documents × terms, raw tf times smoothed idf, optionally
/// L2-normalized per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfMatrix {
    weights: SparseRows<f64>,
    normalized: bool,
}

impl TfIdfMatrix {
    pub fn from_sparse(weights: SparseRows<f64>, normalized: bool) -> Result<Self> {
        if let Some(w) = weights.values.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Format(format!("tf-idf weight {w} is negative or non-finite")));
        }
        Ok(Self { weights, normalized })
    }

    pub fn n_docs(&self) -> usize {
        self.weights.n_rows()
    }

    pub fn n_terms(&self) -> usize {
        self.weights.n_cols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row_ids(&self) -> &[String] {
        self.weights.row_ids()
    }

    pub fn sparse(&self) -> &SparseRows<f64> {
        &self.weights
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.row(r)
    }

    pub fn row_norm(&self, r: usize) -> f64 {
        self.row(r).map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dense_rows(&self, rows: &[usize]) -> Array2<f64> {
        self.weights.dense_rows(rows)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.weights.to_dense()
    }

    /// Per-column mean over all rows.
    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_terms()];
        for (_, c, w) in self.weights.triples() {
            mean[c] += w;
        }
        let n = self.n_docs().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let kind = if self.normalized { "tfidf-l2" } else { "tfidf" };
        self.weights.save_as(path.as_ref(), kind)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match SparseRows::load_as(path, "tfidf-l2") {
            Ok(w) => Self::from_sparse(w, true),
            Err(Error::Format(msg)) if msg.starts_with("expected a tfidf-l2") => {
                Self::from_sparse(SparseRows::load_as(path, "tfidf")?, false)
            }
            Err(e) => Err(e),
        }
    }
}

/// TF-IDF with L2 row normalization.
pub fn tfidf(counts: &CountMatrix) -> TfIdfMatrix {
    tfidf_with(counts, true)
}

/// TF-IDF where document frequencies come from `counts` itself.
pub fn tfidf_with(counts: &CountMatrix, l2_normalize: bool) -> TfIdfMatrix {
    let n = counts.n_rows();
    let idf: Vec<f64> = counts.doc_freq().into_iter().map(|df| smoothed_idf(n, df)).collect();
    let rows = (0..n)
        .map(|r| {
            let mut row: Vec<(usize, f64)> = counts.row(r).map(|(c, tf)| (c, tf as f64 * idf[c])).collect();
            if l2_normalize {
                let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|(_, w)| *w /= norm);
                }
            }
            row
        })
        .collect();
    let weights = SparseRows::from_rows(counts.n_cols(), rows, counts.row_ids().to_vec())
        .expect("columns copied from a valid matrix");
    TfIdfMatrix { weights, normalized: l2_normalize }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file).lines().collect::<std::io::Result<Vec<_>>>().map_err(|e| Error::io(path, e))
}

/// Validate `magic<TAB>vN[<TAB>rest...]` and return the trailing fields.
fn check_header<'a>(line: &'a str, magic: &str) -> Result<Vec<&'a str>> {
    let mut f = line.split('\t');
    if f.next() != Some(magic) {
        return Err(Error::Format(format!("bad magic header {line:?}")));
    }
    let version = f
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::Format("missing format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { expected: FORMAT_VERSION, found: version });
    }
    Ok(f.collect())
}

fn parse_field<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse {s:?}") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, terms: &[&str]) -> TokenizedDoc {
        TokenizedDoc { record_id: id.into(), terms: terms.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn max_df_excludes_ubiquitous_terms() {
        let docs = vec![
            doc("0", &["gun point demanded", "x"]),
            doc("1", &["gun point demanded"]),
            doc("2", &["gun point demanded", "x"]),
        ];
        let err = build_vocabulary(&docs, 1, 0.5).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary));
        let v = build_vocabulary(&docs, 1, 0.7).unwrap();
        assert_eq!(v.id("x"), Some(0));
        assert_eq!(v.id("gun point demanded"), None);
    }

    #[test]
    fn min_df_excludes_rare_terms() {
        let docs = vec![doc("0", &["r", "c"]), doc("1", &["c"]), doc("2", &[])];
        let v = build_vocabulary(&docs, 2, 1.0).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.id("r"), None);
        assert_eq!(v.doc_freq(0), 2);
    }

    #[test]
    fn ids_follow_lexicographic_order() {
        let docs = vec![doc("0", &["b", "a"]), doc("1", &["b", "a"])];
        let v = build_vocabulary(&docs, 1, 1.0).unwrap();
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));
    }

    #[test]
    fn counting_ignores_oov() {
        let docs = vec![doc("0", &["x", "y"]), doc("1", &["x", "y"])];
        let v = build_vocabulary(&docs, 1, 1.0).unwrap();
        let probe = vec![doc("a", &["x", "x", "y"]), doc("b", &["zz", "qq"]), doc("c", &[])];
        let m = term_document_counts(&probe, &v);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 2), (1, 1)]);
        assert_eq!(m.row_nnz(1), 0);
        assert_eq!(m.row_nnz(2), 0);
        assert_eq!(m.row_ids(), ["a", "b", "c"]);
    }

    #[test]
    fn idf_hand_values() {
        assert_eq!(smoothed_idf(2, 2), 1.0);
        let w = 2.0 * smoothed_idf(4, 1);
        assert!((w - 3.832_581_463_748_31).abs() < 1e-12);
    }

    #[test]
    fn single_entry_row_normalizes_to_one() {
        let counts = CountMatrix::from_rows(2, vec![vec![(0, 1)], vec![(1, 3)]], vec!["0".into(), "1".into()]).unwrap();
        let t = tfidf(&counts);
        assert_eq!(t.row(0).collect::<Vec<_>>(), vec![(0, 1.0)]);
    }

    #[test]
    fn vocabulary_round_trip_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let docs = vec![doc("0", &["a b c", "b c d"]), doc("1", &["a b c"])];
        let v = build_vocabulary(&docs, 1, 1.0).unwrap();
        let p = dir.path().join("vocab.tsv");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);

        std::fs::write(&p, "#not-a-vocab\tv1\n").unwrap();
        assert!(matches!(Vocabulary::load(&p), Err(Error::Format(_))));
        std::fs::write(&p, "#narrembed-vocab\tv9\n").unwrap();
        assert!(matches!(Vocabulary::load(&p), Err(Error::VersionMismatch { found: 9, .. })));
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let counts = CountMatrix::from_rows(
            3,
            vec![vec![(0, 2), (2, 1)], vec![], vec![(1, 7)]],
            vec!["r0".into(), "r1".into(), "r2".into()],
        )
        .unwrap();
        let t = tfidf(&counts);
        let p = dir.path().join("m.txt");
        t.save(&p).unwrap();
        let back = TfIdfMatrix::load(&p).unwrap();
        assert_eq!(back, t);
        assert!(back.is_normalized());

        let raw = tfidf_with(&counts, false);
        raw.save(&p).unwrap();
        assert_eq!(TfIdfMatrix::load(&p).unwrap(), raw);

        counts.save(&p).unwrap();
        assert_eq!(CountMatrix::load(&p).unwrap(), counts);
        assert!(TfIdfMatrix::load(&p).is_err());
    }

    #[test]
    fn truncated_matrix_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        std::fs::write(&p, "#narrembed-sparse\tv1\tcounts\ndims\t2\t2\t1\nrow\ta\n").unwrap();
        assert!(matches!(CountMatrix::load(&p), Err(Error::Format(_))));
    }

    fn arb_counts() -> impl Strategy<Value = CountMatrix> {
        (1usize..8, 1usize..6).prop_flat_map(|(rows, cols)| {
            proptest::collection::vec(proptest::collection::vec(0u32..4, cols), rows).prop_map(move |dense| {
                let ids = (0..dense.len()).map(|i| format!("d{i}")).collect();
                let rows =
                    dense.into_iter().map(|r| r.into_iter().enumerate().filter(|&(_, c)| c > 0).collect()).collect();
                CountMatrix::from_rows(cols, rows, ids).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn normalized_rows_have_unit_or_zero_norm(counts in arb_counts()) {
            let t = tfidf(&counts);
            for r in 0..t.n_docs() {
                let n = t.row_norm(r);
                prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
                prop_assert!(t.row(r).all(|(_, w)| w >= 0.0));
            }
        }

        #[test]
        fn idf_strictly_decreasing_in_df(n in 1usize..1000, a in 0usize..1000, b in 0usize..1000) {
            let (a, b) = (a.min(n), b.min(n));
            if a < b {
                prop_assert!(smoothed_idf(n, a) > smoothed_idf(n, b));
            }
        }

        #[test]
        fn row_order_only_permutes(counts in arb_counts()) {
            let n = counts.n_rows();
            let rev: Vec<Vec<(usize, u32)>> = (0..n).rev().map(|r| counts.row(r).collect()).collect();
            let ids = counts.row_ids().iter().rev().cloned().collect();
            let reversed = CountMatrix::from_rows(counts.n_cols(), rev, ids).unwrap();
            let (a, b) = (tfidf(&counts), tfidf(&reversed));
            for r in 0..n {
                prop_assert_eq!(a.row(r).collect::<Vec<_>>(), b.row(n - 1 - r).collect::<Vec<_>>());
            }
        }

        #[test]
        fn adding_a_document_never_lowers_df(counts in arb_counts(), extra in proptest::collection::vec(0u32..3, 6)) {
            let cols = counts.n_cols();
            let mut rows: Vec<Vec<(usize, u32)>> = (0..counts.n_rows()).map(|r| counts.row(r).collect()).collect();
            rows.push(extra.into_iter().take(cols).enumerate().filter(|&(_, c)| c > 0).collect());
            let mut ids = counts.row_ids().to_vec();
            ids.push("extra".into());
            let grown = CountMatrix::from_rows(cols, rows, ids).unwrap();
            for (before, after) in counts.doc_freq().iter().zip(grown.doc_freq()) {
                prop_assert!(after >= *before);
            }
        }
    }
}
