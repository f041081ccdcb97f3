mod support;

use std::path::Path;

use kronkge::eval::{self, EvalOptions};
use kronkge::{filtered_rank, DatasetPaths, ModelState, Split, TieBreak, TripleStore, Variant};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracle::{ranking_case, sort_rank};

#[test]
fn filtered_rank_matches_sort_oracle_on_1000_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let (scores, target, filter) = ranking_case(&mut rng);
        for tie in [TieBreak::Optimistic, TieBreak::Pessimistic] {
            assert_eq!(
                filtered_rank(&scores, target, &filter, tie).unwrap(),
                sort_rank(&scores, target, &filter, tie),
                "{scores:?} target {target} filter {filter:?} {tie:?}"
            );
        }
    }
}

#[test]
fn filtering_more_never_worsens_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let (scores, target, mut filter) = ranking_case(&mut rng);
        let before = filtered_rank(&scores, target, &filter, TieBreak::Optimistic).unwrap();
        let extra = rng.gen_range(0..scores.len());
        if extra != target {
            filter.insert(extra);
        }
        let after = filtered_rank(&scores, target, &filter, TieBreak::Optimistic).unwrap();
        assert!(after <= before);
    }
}

fn umls() -> TripleStore {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/umls");
    TripleStore::ingest(&DatasetPaths::in_dir(dir)).unwrap()
}

#[test]
fn filtered_mrr_dominates_raw_and_evaluation_is_pure() {
    let store = umls();
    for variant in Variant::ALL {
        let state = ModelState::init(variant, 16, store.num_entities(), store.num_relations(), 3).unwrap();
        let filtered = eval::evaluate(&state, &store, Split::Test, EvalOptions::default()).unwrap();
        let raw = eval::evaluate(
            &state,
            &store,
            Split::Test,
            EvalOptions {
                filtered: false,
                ..EvalOptions::default()
            },
        )
        .unwrap();
        assert!(filtered.mrr >= raw.mrr);
        let again = eval::evaluate(&state, &store, Split::Test, EvalOptions::default()).unwrap();
        assert_eq!(
            (again.mrr, again.hits1, again.hits3, again.hits10),
            (filtered.mrr, filtered.hits1, filtered.hits3, filtered.hits10)
        );
        assert!(filtered.hits1 <= filtered.hits3 && filtered.hits3 <= filtered.hits10);
        assert!(filtered.mrr >= filtered.hits1 && filtered.mrr <= 1.0);
    }
}

/// Expected filtered MRR of uniformly random score vectors, by simulation.
fn random_ranking_mrr(store: &TripleStore, draws: usize, rng: &mut impl Rng) -> f64 {
    let ne = store.num_entities();
    let test = store.test();
    let mut total = 0.0;
    for i in 0..draws {
        let t = test[i % test.len()];
        let mut order: Vec<usize> = (0..ne).collect();
        order.shuffle(rng);
        let filter = store.filter_for(t.head, t.rel).unwrap();
        let rank = order
            .iter()
            .filter(|&&x| x == t.tail || !filter.contains(&x))
            .position(|&x| x == t.tail)
            .unwrap()
            + 1;
        total += 1.0 / rank as f64;
    }
    total / draws as f64
}

#[test]
fn untrained_models_rank_like_chance() {
    let store = umls();
    let baseline = random_ranking_mrr(&store, 10_000, &mut ChaCha8Rng::seed_from_u64(1));
    for variant in Variant::ALL {
        let state = ModelState::init(variant, 64, store.num_entities(), store.num_relations(), 1).unwrap();
        let mrr = eval::evaluate(&state, &store, Split::Test, EvalOptions::default())
            .unwrap()
            .mrr;
        assert!(
            mrr >= 0.5 * baseline && mrr <= 2.0 * baseline,
            "{variant}: MRR {mrr} vs chance {baseline}"
        );
    }
}
