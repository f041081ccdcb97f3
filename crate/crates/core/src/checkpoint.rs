//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "KKGECKPT"            8-byte magic
//! u32                   format version
//! u64 + bytes           UTF-8 metadata, one `key=value` per line
//! f64 * n               E, R, BN γ/β per layer, BN running mean/var per layer,
//!                       Adam m per buffer, Adam v per buffer
//! u64                   FNV-1a of every preceding byte
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kg::{Cursor, Vocabulary};
use crate::linalg::DenseMatrix;
use crate::loss::{LossKind, LossSpec};
use crate::model::{BatchNorm, ModelState, Variant};
use crate::optim::AdamState;
use crate::trainer::{TrainConfig, Trainer};

pub const MAGIC: &[u8; 8] = b"KKGECKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub state: ModelState,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer, vocab: &Vocabulary) -> Self {
        Self {
            config: trainer.config.clone(),
            vocab: vocab.clone(),
            state: trainer.state.clone(),
            adam: trainer.adam.clone(),
            epoch: trainer.epoch,
        }
    }

    /// A trainer that continues exactly where this checkpoint stopped.
    pub fn into_trainer(self) -> Trainer {
        Trainer {
            config: self.config,
            state: self.state,
            adam: self.adam,
            epoch: self.epoch,
        }
    }

    pub fn expect_variant(&self, requested: Variant) -> Result<()> {
        if self.state.variant != requested {
            return Err(Error::VariantMismatch {
                found: self.state.variant.to_string(),
                requested: requested.to_string(),
            });
        }
        Ok(())
    }

    fn metadata(&self) -> String {
        let c = &self.config;
        let s = &self.state;
        let a = &self.adam;
        let mut lines = vec![
            format!("variant={}", s.variant),
            format!("d={}", s.dim),
            format!("num_entities={}", s.num_entities()),
            format!("num_relations={}", s.num_relations()),
            format!("epoch={}", self.epoch),
            format!("loss={}", c.loss.kind.flag()),
            format!("alpha={}", c.loss.alpha),
            format!("seed={}", c.seed),
            format!("epochs={}", c.epochs),
            format!("lr={}", c.lr),
            format!("batch_size={}", c.batch_size),
            format!("reciprocal={}", c.reciprocal),
            format!("noise_fraction={}", c.noise_fraction),
            format!("eval_every={}", c.eval_every),
            format!("bn_layers={}", s.bn.len()),
            format!("adam_lr={}", a.lr),
            format!("adam_beta1={}", a.beta1),
            format!("adam_beta2={}", a.beta2),
            format!("adam_epsilon={}", a.epsilon),
            format!("adam_step={}", a.step),
        ];
        for (i, l) in s.bn.iter().enumerate() {
            lines.push(format!("bn{i}_momentum={}", l.momentum));
            lines.push(format!("bn{i}_epsilon={}", l.epsilon));
        }
        lines.extend(self.vocab.entity_names().iter().map(|n| format!("entity={n}")));
        lines.extend(self.vocab.relation_names().iter().map(|n| format!("relation={n}")));
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        let meta = self.metadata();
        buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        buf.extend_from_slice(meta.as_bytes());
        let mut put = |xs: &[f64]| {
            for x in xs {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        };
        put(self.state.entities.data());
        put(self.state.relations.data());
        for l in &self.state.bn {
            put(&l.gamma);
            put(&l.beta);
        }
        for l in &self.state.bn {
            put(&l.running_mean);
            put(&l.running_var);
        }
        for m in &self.adam.m {
            put(m);
        }
        for v in &self.adam.v {
            put(v);
        }
        let sum = fnv1a(&buf);
        buf.extend_from_slice(&sum.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 {
            return Err(Error::Checksum);
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        if bytes.len() < 12 + 8 {
            return Err(Error::Checksum);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
            return Err(Error::Checksum);
        }

        let mut cur = Cursor::new(&body[12..]);
        let meta_len = cur.u64()? as usize;
        let meta = std::str::from_utf8(cur.take(meta_len)?).map_err(|e| Error::Malformed(e.to_string()))?;
        let mut kv: HashMap<&str, &str> = HashMap::new();
        let mut entities = Vec::new();
        let mut relations = Vec::new();
        for line in meta.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Malformed(format!("metadata line {line:?}")))?;
            match k {
                "entity" => entities.push(v.to_owned()),
                "relation" => relations.push(v.to_owned()),
                _ => {
                    kv.insert(k, v);
                }
            }
        }
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| Error::Malformed(format!("missing key {k}")))
        };
        fn parse<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Malformed(format!("bad value for {k}: {v:?}")))
        }
        let num = |k: &str| -> Result<usize> { parse(k, get(k)?) };
        let float = |k: &str| -> Result<f64> { parse(k, get(k)?) };

        let variant = Variant::from_flag(get("variant")?).ok_or_else(|| Error::Malformed("unknown variant".into()))?;
        let dim = num("d")?;
        let ne = num("num_entities")?;
        let nr = num("num_relations")?;
        let loss_kind = LossKind::from_flag(get("loss")?).ok_or_else(|| Error::Malformed("unknown loss".into()))?;
        let config = TrainConfig {
            variant,
            dim,
            loss: LossSpec {
                kind: loss_kind,
                alpha: float("alpha")?,
            },
            epochs: num("epochs")?,
            lr: float("lr")?,
            batch_size: num("batch_size")?,
            seed: parse("seed", get("seed")?)?,
            reciprocal: parse("reciprocal", get("reciprocal")?)?,
            noise_fraction: float("noise_fraction")?,
            eval_every: num("eval_every")?,
        };
        let vocab = Vocabulary::from_names(entities, relations)?;
        if vocab.num_entities() != ne || vocab.num_relations() != nr {
            return Err(Error::Malformed("vocabulary size disagrees with header".into()));
        }

        let (de, dr) = variant.stored_dims(dim)?;
        let layers = num("bn_layers")?;
        let bn_dim = match variant {
            Variant::DistMult | Variant::KdRel => dim,
            Variant::KdDistMult => de,
        };
        let mut read = |n: usize| -> Result<Vec<f64>> { (0..n).map(|_| cur.f64()).collect() };
        let entities = DenseMatrix::from_vec(ne, de, read(ne * de)?)?;
        let relations = DenseMatrix::from_vec(nr, dr, read(nr * dr)?)?;
        let mut bn = Vec::with_capacity(layers);
        for i in 0..layers {
            let mut l = BatchNorm::new(bn_dim);
            l.gamma = read(bn_dim)?;
            l.beta = read(bn_dim)?;
            l.momentum = float(&format!("bn{i}_momentum"))?;
            l.epsilon = float(&format!("bn{i}_epsilon"))?;
            bn.push(l);
        }
        for l in &mut bn {
            l.running_mean = read(bn_dim)?;
            l.running_var = read(bn_dim)?;
        }
        let state = ModelState {
            variant,
            dim,
            entities,
            relations,
            bn,
        };
        let shapes: Vec<usize> = state.params().iter().map(|p| p.len()).collect();
        let m = shapes.iter().map(|&n| read(n)).collect::<Result<Vec<_>>>()?;
        let v = shapes.iter().map(|&n| read(n)).collect::<Result<Vec<_>>>()?;
        if cur.remaining() != 0 {
            return Err(Error::Malformed(format!("{} trailing bytes", cur.remaining())));
        }
        let adam = AdamState {
            lr: float("adam_lr")?,
            beta1: float("adam_beta1")?,
            beta2: float("adam_beta2")?,
            epsilon: float("adam_epsilon")?,
            step: parse("adam_step", get("adam_step")?)?,
            m,
            v,
        };
        Ok(Self {
            config,
            vocab,
            state,
            adam,
            epoch: num("epoch")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
