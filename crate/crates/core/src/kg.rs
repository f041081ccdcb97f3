//! Triple ingestion, vocabularies, splits and training targets.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::rng::{self, Purpose};

/// Suffix given to the relation added for each original relation by
/// [`TripleStore::add_reciprocals`].
pub const INVERSE_SUFFIX: &str = "_inv";

const CACHE_MAGIC: &[u8; 5] = b"KKGE1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub rel: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, rel: usize, tail: usize) -> Self {
        Self { head, rel, tail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// Entity and relation names, indexed by order of first occurrence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_ids: HashMap<String, usize>,
    relation_ids: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_names(entities: Vec<String>, relations: Vec<String>) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        for e in entities {
            if vocab.entity_ids.contains_key(&e) {
                return Err(Error::VocabMismatch(format!("duplicate entity {e:?}")));
            }
            vocab.intern_entity(&e);
        }
        for r in relations {
            if vocab.relation_ids.contains_key(&r) {
                return Err(Error::VocabMismatch(format!("duplicate relation {r:?}")));
            }
            vocab.intern_relation(&r);
        }
        Ok(vocab)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_ids.get(name).copied()
    }

    fn intern_entity(&mut self, name: &str) -> usize {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entities.len();
        self.entities.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        id
    }

    fn intern_relation(&mut self, name: &str) -> usize {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relations.len();
        self.relations.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
}

impl DatasetPaths {
    /// `train.txt`, `valid.txt` and `test.txt` inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            train: dir.join("train.txt"),
            valid: dir.join("valid.txt"),
            test: dir.join("test.txt"),
        }
    }
}

/// Indexed splits of a knowledge graph plus the ranking filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleStore {
    vocab: Vocabulary,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    filter: HashMap<(usize, usize), BTreeSet<usize>>,
    reciprocal: bool,
    /// The last `noise_len` training triples were injected as noise.
    noise_len: usize,
    filter_includes_noise: bool,
}

type NamedTriple = (String, String, String);

fn parse_tsv(path: &Path) -> Result<Vec<NamedTriple>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                found: cols.len(),
            });
        }
        out.push((cols[0].to_owned(), cols[1].to_owned(), cols[2].to_owned()));
    }
    Ok(out)
}

impl TripleStore {
    /// Reads three tab-separated triple files and indexes them.
    pub fn ingest(paths: &DatasetPaths) -> Result<Self> {
        let train = parse_tsv(&paths.train)?;
        let valid = parse_tsv(&paths.valid)?;
        let test = parse_tsv(&paths.test)?;
        Self::from_named(&train, &valid, &test)
    }

    /// Indexes named triples. Vocabulary order is first occurrence scanning
    /// train, then valid, then test.
    pub fn from_named(train: &[NamedTriple], valid: &[NamedTriple], test: &[NamedTriple]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrain);
        }
        let mut vocab = Vocabulary::default();
        let mut index = |split: &[NamedTriple]| -> Vec<Triple> {
            split
                .iter()
                .map(|(h, r, t)| {
                    let head = vocab.intern_entity(h);
                    let rel = vocab.intern_relation(r);
                    let tail = vocab.intern_entity(t);
                    Triple { head, rel, tail }
                })
                .collect()
        };
        let train = index(train);
        let valid = index(valid);
        let test = index(test);
        Ok(Self::from_parts(vocab, train, valid, test))
    }

    /// Builds a store from already-indexed splits.
    pub fn from_indexed(vocab: Vocabulary, train: Vec<Triple>, valid: Vec<Triple>, test: Vec<Triple>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrain);
        }
        let (ne, nr) = (vocab.num_entities(), vocab.num_relations());
        for t in train.iter().chain(&valid).chain(&test) {
            if t.head >= ne || t.tail >= ne || t.rel >= nr {
                return Err(Error::VocabMismatch(format!(
                    "triple {t:?} out of range for |E|={ne}, |R|={nr}"
                )));
            }
        }
        Ok(Self::from_parts(vocab, train, valid, test))
    }

    fn from_parts(vocab: Vocabulary, train: Vec<Triple>, valid: Vec<Triple>, test: Vec<Triple>) -> Self {
        let mut store = Self {
            vocab,
            train,
            valid,
            test,
            filter: HashMap::new(),
            reciprocal: false,
            noise_len: 0,
            filter_includes_noise: true,
        };
        store.rebuild_filter();
        store
    }

    fn rebuild_filter(&mut self) {
        let clean_train = self.train.len() - self.noise_len;
        let train: &[Triple] = if self.filter_includes_noise {
            &self.train
        } else {
            &self.train[..clean_train]
        };
        let mut filter: HashMap<(usize, usize), BTreeSet<usize>> = HashMap::new();
        for t in train.iter().chain(&self.valid).chain(&self.test) {
            filter.entry((t.head, t.rel)).or_default().insert(t.tail);
        }
        self.filter = filter;
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.num_entities()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn has_reciprocals(&self) -> bool {
        self.reciprocal
    }

    /// Noise triples injected by [`TripleStore::inject_noise`]; they sit at the end of `train`.
    pub fn noise(&self) -> &[Triple] {
        &self.train[self.train.len() - self.noise_len..]
    }

    /// Known true tails for `(head, rel)` over every split.
    pub fn filter_for(&self, head: usize, rel: usize) -> Option<&BTreeSet<usize>> {
        self.filter.get(&(head, rel))
    }

    pub fn filter_len(&self) -> usize {
        self.filter.len()
    }

    /// Whether injected noise triples take part in the ranking filter (default: yes).
    pub fn set_filter_includes_noise(&mut self, include: bool) {
        if include != self.filter_includes_noise {
            self.filter_includes_noise = include;
            self.rebuild_filter();
        }
    }

    /// Appends an inverse relation per relation and the inverse of every
    /// triple to its split. May be applied once.
    pub fn add_reciprocals(&self) -> Result<Self> {
        if self.reciprocal {
            return Err(Error::ReciprocalsAlreadyAdded);
        }
        let mut vocab = self.vocab.clone();
        let nr = vocab.num_relations();
        for r in 0..nr {
            let mut name = format!("{}{INVERSE_SUFFIX}", vocab.relations[r]);
            while vocab.relation_ids.contains_key(&name) {
                name.push_str(INVERSE_SUFFIX);
            }
            vocab.intern_relation(&name);
        }
        let double = |split: &[Triple]| -> Vec<Triple> {
            let inverse = split.iter().map(|t| Triple::new(t.tail, t.rel + nr, t.head));
            split.iter().copied().chain(inverse).collect()
        };
        let mut out = Self::from_parts(vocab, double(&self.train), double(&self.valid), double(&self.test));
        out.reciprocal = true;
        Ok(out)
    }

    /// Appends `round(fraction · |train|)` uniformly sampled triples that are
    /// neither in train nor duplicates of each other.
    pub fn inject_noise(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::NoiseFraction(fraction));
        }
        let requested = noise_count(fraction, self.train.len());
        let (ne, nr) = (self.num_entities(), self.num_relations());
        let mut seen: HashSet<Triple> = self.train.iter().copied().collect();
        let space = (ne as u128) * (ne as u128) * (nr as u128);
        let available = space - seen.len() as u128;
        if (requested as u128) > available {
            return Err(Error::NoiseExhausted {
                requested,
                available: available as usize,
            });
        }
        let mut rng = rng::stream(seed, Purpose::Noise, 0);
        let mut noise = Vec::with_capacity(requested);
        while noise.len() < requested {
            let t = Triple::new(rng.gen_range(0..ne), rng.gen_range(0..nr), rng.gen_range(0..ne));
            if seen.insert(t) {
                noise.push(t);
            }
        }
        let mut out = self.clone();
        out.train.extend(noise);
        out.noise_len += requested;
        out.rebuild_filter();
        Ok(out)
    }

    /// All tails `x` with `(head, rel, x)` in train.
    pub fn train_tails(&self, head: usize, rel: usize) -> BTreeSet<usize> {
        self.train
            .iter()
            .filter(|t| t.head == head && t.rel == rel)
            .map(|t| t.tail)
            .collect()
    }

    /// Multi-label target for a `(head, rel)` pair seen in train.
    pub fn k_vs_all_targets(&self, head: usize, rel: usize) -> Result<TargetVector> {
        let tails = self.train_tails(head, rel);
        if tails.is_empty() {
            return Err(Error::UnseenPair { head, rel });
        }
        let mut labels = DenseVector::zeros(self.num_entities());
        for t in tails {
            labels[t] = 1.0;
        }
        Ok(TargetVector {
            pair: (head, rel),
            labels,
        })
    }

    /// Writes the splits back out as TSV files named after the vocabulary.
    pub fn write_tsv(&self, paths: &DatasetPaths) -> Result<()> {
        for (path, split) in [
            (&paths.train, &self.train),
            (&paths.valid, &self.valid),
            (&paths.test, &self.test),
        ] {
            let mut out = io::BufWriter::new(fs::File::create(path)?);
            for t in split {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    self.vocab.entities[t.head], self.vocab.relations[t.rel], self.vocab.entities[t.tail]
                )?;
            }
            out.flush()?;
        }
        Ok(())
    }

    /// Serializes the store into the binary cache format.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.push(u8::from(self.reciprocal));
        buf.push(u8::from(self.filter_includes_noise));
        put_u64(&mut buf, self.noise_len as u64);
        for names in [&self.vocab.entities, &self.vocab.relations] {
            put_u64(&mut buf, names.len() as u64);
            for n in names {
                put_u64(&mut buf, n.len() as u64);
                buf.extend_from_slice(n.as_bytes());
            }
        }
        for split in [&self.train, &self.valid, &self.test] {
            put_u64(&mut buf, split.len() as u64);
            for t in split {
                for v in [t.head, t.rel, t.tail] {
                    buf.extend_from_slice(&(v as u32).to_le_bytes());
                }
            }
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor::new(&bytes);
        if cur.take(CACHE_MAGIC.len())? != CACHE_MAGIC {
            return Err(Error::BadMagic);
        }
        let reciprocal = cur.take(1)?[0] != 0;
        let filter_includes_noise = cur.take(1)?[0] != 0;
        let noise_len = cur.u64()? as usize;
        let mut names = [Vec::new(), Vec::new()];
        for list in &mut names {
            let n = cur.u64()? as usize;
            for _ in 0..n {
                let len = cur.u64()? as usize;
                let s = std::str::from_utf8(cur.take(len)?).map_err(|e| Error::Malformed(e.to_string()))?;
                list.push(s.to_owned());
            }
        }
        let [entities, relations] = names;
        let vocab = Vocabulary::from_names(entities, relations)?;
        let mut splits = [Vec::new(), Vec::new(), Vec::new()];
        for split in &mut splits {
            let n = cur.u64()? as usize;
            for _ in 0..n {
                split.push(Triple::new(
                    cur.u32()? as usize,
                    cur.u32()? as usize,
                    cur.u32()? as usize,
                ));
            }
        }
        let [train, valid, test] = splits;
        if noise_len > train.len() {
            return Err(Error::Malformed("noise count exceeds training split".into()));
        }
        let mut store = Self::from_indexed(vocab, train, valid, test)?;
        store.reciprocal = reciprocal;
        store.noise_len = noise_len;
        store.filter_includes_noise = filter_includes_noise;
        store.rebuild_filter();
        Ok(store)
    }
}

/// Number of noise triples for a fraction of the training split (round half up).
pub fn noise_count(fraction: f64, train_len: usize) -> usize {
    (fraction * train_len as f64 + 0.5).floor() as usize
}

/// Dense label vector over all entities for one `(head, rel)` query.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    pub pair: (usize, usize),
    pub labels: DenseVector,
}

/// 1vsAll target: `positive` at the triple's tail, `negative` elsewhere.
pub fn one_vs_all_targets(num_entities: usize, triple: Triple, positive: f64, negative: f64) -> TargetVector {
    debug_assert!(negative < positive);
    let mut labels: DenseVector = vec![negative; num_entities].into();
    labels[triple.tail] = positive;
    TargetVector {
        pair: (triple.head, triple.rel),
        labels,
    }
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Bounds-checked little-endian reader.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Malformed("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
