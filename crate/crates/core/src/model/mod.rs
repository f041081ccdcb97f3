//! DistMult and its Kronecker-decomposed variants.
//!
//! * [`Variant::DistMult`]: `score = (h ∘ r) · t`, all vectors of size `d`.
//! * [`Variant::KdRel`]: relations are stored with `√d` entries and expanded
//!   to `r ⊗ r` before scoring.
//! * [`Variant::KdDistMult`]: entities and relations are stored with `m = √d`
//!   entries. With `M = reshape((h ⊗ h) ∘ (r ⊗ r), m, m)` a triple scores
//!   `1ᵀ M t`, so `c = 1ᵀ M` is formed once per query and every tail is
//!   scored with an `m`-dimensional dot product.
//!
//! Batch normalization sits on the head, the (expanded) relation and their
//! product for the first two variants, and on the stored relation and the
//! query `c` for the third.

mod batchnorm;

use serde::{Deserialize, Serialize};

pub use batchnorm::{BatchNorm, BatchNormCache, NormMode};

use crate::error::{Error, Result};
use crate::linalg::{self, gemm, DenseMatrix, DenseVector, Operand};
use crate::rng::{self, Purpose};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "distmult")]
    DistMult,
    #[serde(rename = "kd-rel")]
    KdRel,
    #[serde(rename = "kd-distmult")]
    KdDistMult,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::DistMult, Variant::KdRel, Variant::KdDistMult];

    pub fn flag(self) -> &'static str {
        match self {
            Variant::DistMult => "distmult",
            Variant::KdRel => "kd-rel",
            Variant::KdDistMult => "kd-distmult",
        }
    }

    pub fn from_flag(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.flag() == s)
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Variant::DistMult => "DistMult",
            Variant::KdRel => "KD-Rel-DistMult",
            Variant::KdDistMult => "KD-DistMult",
        }
    }

    /// Stored `(entity, relation)` widths for embedding size `d`.
    pub fn stored_dims(self, d: usize) -> Result<(usize, usize)> {
        if d == 0 {
            return Err(Error::InvalidArgument("embedding size must be positive".into()));
        }
        match self {
            Variant::DistMult => Ok((d, d)),
            Variant::KdRel => {
                let s = linalg::exact_sqrt(d).ok_or(Error::NotPerfectSquare(d))?;
                Ok((d, s))
            }
            Variant::KdDistMult => {
                let s = linalg::exact_sqrt(d).ok_or(Error::NotPerfectSquare(d))?;
                Ok((s, s))
            }
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.flag())
    }
}

/// Trainable parameter count for a configuration, without building it.
///
/// DistMult: `(|E|+|R|)·d + 6d`; KD-Rel: `|E|·d + |R|·√d + 6d`;
/// KD-DistMult: `(|E|+|R|)·m + 4m` with `m = √d`.
pub fn param_count_for(variant: Variant, d: usize, num_entities: usize, num_relations: usize) -> Result<usize> {
    let (de, dr) = variant.stored_dims(d)?;
    let bn = match variant {
        Variant::DistMult | Variant::KdRel => 3 * 2 * d,
        Variant::KdDistMult => 2 * 2 * de,
    };
    Ok(num_entities * de + num_relations * dr + bn)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub variant: Variant,
    /// Configured embedding size `d`.
    pub dim: usize,
    pub entities: DenseMatrix,
    pub relations: DenseMatrix,
    /// Head, relation and (for DistMult/KD-Rel) product normalizers. Empty
    /// when normalization is disabled.
    pub bn: Vec<BatchNorm>,
}

/// Per-parameter gradients, laid out like [`ModelState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub entities: DenseMatrix,
    pub relations: DenseMatrix,
    /// `(dgamma, dbeta)` per normalization layer.
    pub bn: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(state: &ModelState) -> Self {
        Self {
            entities: DenseMatrix::zeros(state.entities.rows(), state.entities.cols()),
            relations: DenseMatrix::zeros(state.relations.rows(), state.relations.cols()),
            bn: state
                .bn
                .iter()
                .map(|l| (vec![0.0; l.dim()], vec![0.0; l.dim()]))
                .collect(),
        }
    }

    /// Gradient buffers in canonical order: E, R, then γ and β per layer.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.entities.data(), self.relations.data()];
        for (g, b) in &self.bn {
            out.push(g);
            out.push(b);
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.entities.data_mut(), self.relations.data_mut()];
        for (g, b) in &mut self.bn {
            out.push(g.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

/// Intermediate values of a batched forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    heads: Vec<usize>,
    rels: Vec<usize>,
    /// Normalized heads, `rows × entity_dim`.
    head: Vec<f64>,
    head_cache: Option<BatchNormCache>,
    /// Normalized (expanded) relations, `rows × width`.
    rel: Vec<f64>,
    rel_cache: Option<BatchNormCache>,
    hidden_cache: Option<BatchNormCache>,
    /// Vector dotted with every tail, `rows × entity_dim`.
    query: Vec<f64>,
    /// `rows × |E|` tail scores.
    pub logits: Vec<f64>,
}

impl Forward {
    pub fn rows(&self) -> usize {
        self.heads.len()
    }

    pub fn logits_row(&self, i: usize) -> &[f64] {
        let n = self.logits.len() / self.rows().max(1);
        &self.logits[i * n..(i + 1) * n]
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("shape")
}

fn gather(matrix: &DenseMatrix, ids: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ids.len() * matrix.cols());
    for &i in ids {
        out.extend_from_slice(matrix.row(i));
    }
    out
}

/// Positions where a normalization layer can sit.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Head = 0,
    Relation = 1,
    Hidden = 2,
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::NonFinite(format!("{what} contains {v}"))),
        None => Ok(()),
    }
}

impl ModelState {
    /// Glorot-uniform embeddings and identity batch normalization.
    pub fn init(variant: Variant, dim: usize, num_entities: usize, num_relations: usize, seed: u64) -> Result<Self> {
        let (de, dr) = variant.stored_dims(dim)?;
        let mut rng = rng::stream(seed, Purpose::Init, 0);
        let entities = glorot(num_entities, de, &mut rng);
        let relations = glorot(num_relations, dr, &mut rng);
        let bn = match variant {
            Variant::DistMult | Variant::KdRel => vec![BatchNorm::new(dim); 3],
            Variant::KdDistMult => vec![BatchNorm::new(de); 2],
        };
        Ok(Self {
            variant,
            dim,
            entities,
            relations,
            bn,
        })
    }

    /// Builds a state from explicit embeddings, without normalization layers.
    pub fn from_embeddings(
        variant: Variant,
        dim: usize,
        entities: DenseMatrix,
        relations: DenseMatrix,
    ) -> Result<Self> {
        let (de, dr) = variant.stored_dims(dim)?;
        if entities.cols() != de || relations.cols() != dr {
            return Err(Error::Shape(format!(
                "{variant} with d={dim} stores {de}/{dr} columns, got {}/{}",
                entities.cols(),
                relations.cols()
            )));
        }
        Ok(Self {
            variant,
            dim,
            entities,
            relations,
            bn: Vec::new(),
        })
    }

    pub fn without_batch_norm(mut self) -> Self {
        self.bn.clear();
        self
    }

    pub fn num_entities(&self) -> usize {
        self.entities.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.rows()
    }

    pub fn entity_dim(&self) -> usize {
        self.entities.cols()
    }

    pub fn relation_dim(&self) -> usize {
        self.relations.cols()
    }

    /// Trainable parameters: embeddings plus γ/β of every normalization layer.
    pub fn param_count(&self) -> usize {
        self.entities.data().len() + self.relations.data().len() + self.bn.iter().map(|l| 2 * l.dim()).sum::<usize>()
    }

    /// Parameter buffers in the order of [`Gradients::slices`].
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.entities.data_mut(), self.relations.data_mut()];
        for l in &mut self.bn {
            out.push(l.gamma.as_mut_slice());
            out.push(l.beta.as_mut_slice());
        }
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = vec![self.entities.data(), self.relations.data()];
        for l in &self.bn {
            out.push(&l.gamma);
            out.push(&l.beta);
        }
        out
    }

    /// Index into `bn` of the layer at `slot`, if that slot is normalized.
    fn layer(&self, slot: Slot) -> Option<usize> {
        let layer = match (self.variant, slot) {
            (Variant::KdDistMult, Slot::Head) => return None,
            (Variant::KdDistMult, Slot::Relation) => 0,
            (Variant::KdDistMult, Slot::Hidden) => 1,
            (_, slot) => slot as usize,
        };
        (layer < self.bn.len()).then_some(layer)
    }

    fn normalize(&self, slot: Slot, x: Vec<f64>, rows: usize, mode: NormMode) -> (Vec<f64>, Option<BatchNormCache>) {
        match self.layer(slot).map(|l| &self.bn[l]) {
            Some(bn) => {
                let mut out = vec![0.0; x.len()];
                let cache = bn.forward(&x, rows, mode, &mut out);
                (out, Some(cache))
            }
            None => (x, None),
        }
    }

    fn denormalize(
        &self,
        slot: Slot,
        cache: &Option<BatchNormCache>,
        dy: Vec<f64>,
        rows: usize,
        grads: &mut Gradients,
    ) -> Vec<f64> {
        match (self.layer(slot), cache) {
            (Some(layer), Some(cache)) => {
                let (dx, dgamma, dbeta) = self.bn[layer].backward(cache, &dy, rows);
                grads.bn[layer] = (dgamma, dbeta);
                dx
            }
            _ => dy,
        }
    }

    /// Scores every entity as the tail of each `(heads[i], rels[i])` query.
    ///
    /// In [`Mode::Train`] normalization uses batch statistics, except for a
    /// single-row batch which falls back to the running statistics.
    pub fn forward(&self, heads: &[usize], rels: &[usize], mode: Mode) -> Forward {
        assert_eq!(heads.len(), rels.len());
        let rows = heads.len();
        let norm_mode = if mode == Mode::Train && rows > 1 {
            NormMode::Batch
        } else {
            NormMode::Running
        };
        let de = self.entity_dim();
        let (head, head_cache) = self.normalize(Slot::Head, gather(&self.entities, heads), rows, norm_mode);
        let rel_raw = match self.variant {
            Variant::DistMult | Variant::KdDistMult => gather(&self.relations, rels),
            Variant::KdRel => {
                let dr = self.relation_dim();
                let mut out = vec![0.0; rows * dr * dr];
                for (i, &r) in rels.iter().enumerate() {
                    linalg::self_kron_into(self.relations.row(r), &mut out[i * dr * dr..(i + 1) * dr * dr]);
                }
                out
            }
        };
        let (rel, rel_cache) = self.normalize(Slot::Relation, rel_raw, rows, norm_mode);

        let (query, hidden_cache) = match self.variant {
            Variant::DistMult | Variant::KdRel => {
                let product: Vec<f64> = head.iter().zip(&rel).map(|(a, b)| a * b).collect();
                self.normalize(Slot::Hidden, product, rows, norm_mode)
            }
            Variant::KdDistMult => {
                let m = de;
                let mut query = vec![0.0; rows * m];
                let mut hh = vec![0.0; m * m];
                let mut rr = vec![0.0; m * m];
                for i in 0..rows {
                    linalg::self_kron_into(&head[i * m..(i + 1) * m], &mut hh);
                    linalg::self_kron_into(&rel[i * m..(i + 1) * m], &mut rr);
                    // Column sums of the row-major m×m matrix (hh ∘ rr).
                    let q = &mut query[i * m..(i + 1) * m];
                    for a in 0..m {
                        for b in 0..m {
                            q[b] += hh[a * m + b] * rr[a * m + b];
                        }
                    }
                }
                self.normalize(Slot::Hidden, query, rows, norm_mode)
            }
        };

        let ne = self.num_entities();
        let mut logits = vec![0.0; rows * ne];
        gemm(
            Operand::plain(&query, rows, de),
            Operand::transposed(self.entities.data(), de, ne),
            &mut logits,
            false,
        );
        Forward {
            heads: heads.to_vec(),
            rels: rels.to_vec(),
            head,
            head_cache,
            rel,
            rel_cache,
            hidden_cache,
            query,
            logits,
        }
    }

    /// Analytic gradients of `Σ upstream ⊙ logits` for the batch in `fwd`.
    pub fn backward(&self, fwd: &Forward, upstream: &[f64]) -> Result<Gradients> {
        let rows = fwd.rows();
        let ne = self.num_entities();
        let de = self.entity_dim();
        if upstream.len() != rows * ne {
            return Err(Error::Shape(format!(
                "upstream gradient has {} entries, expected {rows}x{ne}",
                upstream.len()
            )));
        }
        check_finite(upstream, "upstream gradient")?;
        let mut grads = Gradients::zeros_like(self);

        // Tails: dE += Gᵀ·Q. Query: dQ = G·E.
        gemm(
            Operand::transposed(upstream, ne, rows),
            Operand::plain(&fwd.query, rows, de),
            grads.entities.data_mut(),
            false,
        );
        let mut d_query = vec![0.0; rows * de];
        gemm(
            Operand::plain(upstream, rows, ne),
            Operand::plain(self.entities.data(), ne, de),
            &mut d_query,
            false,
        );

        let (d_head, d_rel) = match self.variant {
            Variant::DistMult | Variant::KdRel => {
                let d_product = self.denormalize(Slot::Hidden, &fwd.hidden_cache, d_query, rows, &mut grads);
                let d_head: Vec<f64> = d_product.iter().zip(&fwd.rel).map(|(g, r)| g * r).collect();
                let d_rel: Vec<f64> = d_product.iter().zip(&fwd.head).map(|(g, h)| g * h).collect();
                (d_head, d_rel)
            }
            Variant::KdDistMult => {
                let m = de;
                let d_query = self.denormalize(Slot::Hidden, &fwd.hidden_cache, d_query, rows, &mut grads);
                let mut d_head = vec![0.0; rows * m];
                let mut d_rel = vec![0.0; rows * m];
                let mut hh = vec![0.0; m * m];
                let mut rr = vec![0.0; m * m];
                let mut d_hh = vec![0.0; m * m];
                let mut d_rr = vec![0.0; m * m];
                for i in 0..rows {
                    let h = &fwd.head[i * m..(i + 1) * m];
                    let r = &fwd.rel[i * m..(i + 1) * m];
                    linalg::self_kron_into(h, &mut hh);
                    linalg::self_kron_into(r, &mut rr);
                    let g = &d_query[i * m..(i + 1) * m];
                    // q[b] = Σ_a hh[a,b]·rr[a,b]  ⇒  d(hh)[a,b] = g[b]·rr[a,b]
                    for a in 0..m {
                        for b in 0..m {
                            d_hh[a * m + b] = g[b] * rr[a * m + b];
                            d_rr[a * m + b] = g[b] * hh[a * m + b];
                        }
                    }
                    linalg::self_kron_vjp(h, &d_hh, &mut d_head[i * m..(i + 1) * m]);
                    linalg::self_kron_vjp(r, &d_rr, &mut d_rel[i * m..(i + 1) * m]);
                }
                (d_head, d_rel)
            }
        };

        let d_head = self.denormalize(Slot::Head, &fwd.head_cache, d_head, rows, &mut grads);
        let d_rel = self.denormalize(Slot::Relation, &fwd.rel_cache, d_rel, rows, &mut grads);

        for (i, &h) in fwd.heads.iter().enumerate() {
            for (e, g) in grads.entities.row_mut(h).iter_mut().zip(&d_head[i * de..(i + 1) * de]) {
                *e += g;
            }
        }
        let dr = self.relation_dim();
        match self.variant {
            Variant::DistMult | Variant::KdDistMult => {
                for (i, &r) in fwd.rels.iter().enumerate() {
                    for (e, g) in grads.relations.row_mut(r).iter_mut().zip(&d_rel[i * dr..(i + 1) * dr]) {
                        *e += g;
                    }
                }
            }
            Variant::KdRel => {
                let width = dr * dr;
                for (i, &r) in fwd.rels.iter().enumerate() {
                    let stored = self.relations.row(r).to_vec();
                    linalg::self_kron_vjp(&stored, &d_rel[i * width..(i + 1) * width], grads.relations.row_mut(r));
                }
            }
        }
        Ok(grads)
    }

    /// Smallest per-feature batch variance over the normalization layers of
    /// a train-mode pass.
    pub fn min_batch_variance(fwd: &Forward) -> Option<f64> {
        [&fwd.head_cache, &fwd.rel_cache, &fwd.hidden_cache]
            .into_iter()
            .flatten()
            .filter_map(|c| c.batch_stats.as_ref())
            .flat_map(|(_, var, _)| var.iter().copied())
            .reduce(f64::min)
    }

    /// Folds the batch statistics of a train-mode pass into the running estimates.
    pub fn update_running_stats(&mut self, fwd: &Forward) {
        let caches = [
            (Slot::Head, &fwd.head_cache),
            (Slot::Relation, &fwd.rel_cache),
            (Slot::Hidden, &fwd.hidden_cache),
        ];
        for (slot, cache) in caches {
            if let (Some(layer), Some(cache)) = (self.layer(slot), cache) {
                self.bn[layer].update_running(cache);
            }
        }
    }

    /// Logits for every candidate tail of one query.
    pub fn score_all_tails(&self, head: usize, rel: usize, mode: Mode) -> DenseVector {
        self.forward(&[head], &[rel], mode).logits.into()
    }
}

/// `(h ∘ r) · t`.
pub fn score_distmult(h: &[f64], r: &[f64], t: &[f64]) -> Result<f64> {
    if h.len() != r.len() || h.len() != t.len() {
        return Err(Error::Shape(format!(
            "distmult: lengths {}, {}, {}",
            h.len(),
            r.len(),
            t.len()
        )));
    }
    Ok(h.iter().zip(r).zip(t).map(|((a, b), c)| a * b * c).sum())
}

/// `h ∘ (r ⊗ r) · t` with `r` stored at `√d` entries.
pub fn score_kd_rel(h: &[f64], r_stored: &[f64], t: &[f64]) -> Result<f64> {
    if r_stored.len() * r_stored.len() != h.len() {
        return Err(Error::Shape(format!(
            "kd-rel: relation of length {} cannot expand to {}",
            r_stored.len(),
            h.len()
        )));
    }
    score_distmult(h, &linalg::kron_vec(r_stored, r_stored), t)
}

/// `1ᵀ · reshape((h ⊗ h) ∘ (r ⊗ r), m, m) · t`.
pub fn score_kd_full(h: &[f64], r: &[f64], t: &[f64]) -> Result<f64> {
    let m = h.len();
    if r.len() != m || t.len() != m {
        return Err(Error::Shape(format!(
            "kd-distmult: lengths {}, {}, {}",
            h.len(),
            r.len(),
            t.len()
        )));
    }
    let u = linalg::hadamard(&linalg::kron_vec(h, h), &linalg::kron_vec(r, r))?;
    let mt = linalg::reshape(&u, m, m)?.matvec(t)?;
    Ok(mt.iter().sum())
}
