mod support;

use kronkge::report::average_params;
use kronkge::{param_count_for, ModelState, Variant};
use support::{COLUMNS, KINSHIP, UMLS};

#[test]
fn every_expected_count_is_reproduced() {
    for c in COLUMNS {
        let mut computed: Vec<usize> = c
            .dims
            .iter()
            .map(|&d| param_count_for(c.variant, d, c.dataset.0, c.dataset.1).unwrap())
            .collect();
        let avg = average_params(&computed);
        computed.sort_unstable();
        let mut expected = c.params.to_vec();
        expected.sort_unstable();
        assert_eq!(computed, expected, "{} {:?} {}", c.table, c.dataset, c.variant);
        if let Some(want) = c.average {
            assert_eq!(avg, want, "{} {:?} {} average", c.table, c.dataset, c.variant);
        }
    }
}

#[test]
fn headline_counts() {
    let count = |v, d, (e, r): (usize, usize)| param_count_for(v, d, e, r).unwrap();
    assert_eq!(count(Variant::DistMult, 289, UMLS), 67_915);
    assert_eq!(count(Variant::DistMult, 400, UMLS), 94_000);
    assert_eq!(count(Variant::KdRel, 400, KINSHIP), 45_420);
    assert_eq!(count(Variant::KdDistMult, 256, UMLS), 3_728);
    assert_eq!(count(Variant::KdDistMult, 400, KINSHIP), 3_200);
}

#[test]
fn built_models_agree_with_the_formula() {
    for variant in Variant::ALL {
        for d in [4, 16, 289] {
            let state = ModelState::init(variant, d, UMLS.0, UMLS.1, 1).unwrap();
            let trainable: usize = state.params().iter().map(|p| p.len()).sum();
            assert_eq!(state.param_count(), trainable);
            assert_eq!(
                state.param_count(),
                param_count_for(variant, d, UMLS.0, UMLS.1).unwrap()
            );
        }
    }
}
