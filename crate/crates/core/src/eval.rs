//! Filtered tail ranking, MRR and Hits@N.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Split, Triple, TripleStore};
use crate::model::{Mode, ModelState};

/// How competitors with a score equal to the target's are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Ties never worsen the rank.
    #[default]
    Optimistic,
    /// Every tie ranks ahead of the target.
    Pessimistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub tie: TieBreak,
    /// Skip competitors that form known true triples.
    pub filtered: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            tie: TieBreak::Optimistic,
            filtered: true,
        }
    }
}

/// `1 + |{x ≠ target, x ∉ filter_out : scores[x] > scores[target]}|`
/// (or `≥` under [`TieBreak::Pessimistic`]).
pub fn filtered_rank(scores: &[f64], target: usize, filter_out: &BTreeSet<usize>, tie: TieBreak) -> Result<usize> {
    if target >= scores.len() {
        return Err(Error::TargetOutOfRange {
            target,
            len: scores.len(),
        });
    }
    let s = scores[target];
    let beats = |x: f64| match tie {
        TieBreak::Optimistic => x > s,
        TieBreak::Pessimistic => x >= s,
    };
    let above = scores.iter().filter(|&&x| beats(x)).count() - usize::from(beats(s));
    let filtered_above = filter_out
        .iter()
        .filter(|&&x| x != target && x < scores.len() && beats(scores[x]))
        .count();
    Ok(1 + above - filtered_above)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub param_count: usize,
    pub n_triples: usize,
    pub wall_time_secs: f64,
}

impl EvalReport {
    /// Aggregates ranks (all ≥ 1) in order.
    pub fn from_ranks(split: &str, ranks: &[usize], param_count: usize) -> Self {
        let n = ranks.len();
        let denom = n.max(1) as f64;
        let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / denom;
        Self {
            split: split.to_owned(),
            mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / denom,
            hits1: hits(1),
            hits3: hits(3),
            hits10: hits(10),
            param_count,
            n_triples: n,
            wall_time_secs: 0.0,
        }
    }
}

const EVAL_BATCH: usize = 512;

/// Tail ranks for every triple in `triples`.
pub fn ranks(state: &ModelState, store: &TripleStore, triples: &[Triple], options: EvalOptions) -> Result<Vec<usize>> {
    if state.num_entities() != store.num_entities() || state.num_relations() != store.num_relations() {
        return Err(Error::VocabMismatch(format!(
            "model has |E|={}, |R|={}; data has |E|={}, |R|={}",
            state.num_entities(),
            state.num_relations(),
            store.num_entities(),
            store.num_relations()
        )));
    }
    let empty = BTreeSet::new();
    let mut out = Vec::with_capacity(triples.len());
    for chunk in triples.chunks(EVAL_BATCH) {
        let heads: Vec<usize> = chunk.iter().map(|t| t.head).collect();
        let rels: Vec<usize> = chunk.iter().map(|t| t.rel).collect();
        let fwd = state.forward(&heads, &rels, Mode::Eval);
        for (i, t) in chunk.iter().enumerate() {
            let filter = if options.filtered {
                store.filter_for(t.head, t.rel).unwrap_or(&empty)
            } else {
                &empty
            };
            out.push(filtered_rank(fwd.logits_row(i), t.tail, filter, options.tie)?);
        }
    }
    Ok(out)
}

pub fn evaluate(state: &ModelState, store: &TripleStore, split: Split, options: EvalOptions) -> Result<EvalReport> {
    let start = Instant::now();
    let ranks = ranks(state, store, store.split(split), options)?;
    let mut report = EvalReport::from_ranks(split.name(), &ranks, state.param_count());
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
