//! Reference trainable-parameter counts and brute-force oracles.

#![allow(dead_code)]

pub mod oracle;

use kronkge::Variant;

/// Vocabulary sizes `(|E|, |R|)` the reference counts are based on.
pub const UMLS: (usize, usize) = (136, 93);
pub const KINSHIP: (usize, usize) = (105, 51);

pub const LOWER: &[usize] = &[4, 9, 16, 25, 36, 49, 64, 81, 100];
pub const UPPER: &[usize] = &[121, 144, 169, 196, 225, 256, 289, 324, 361, 400];
pub const NOISY: &[usize] = &[100, 121, 144, 169, 196, 225, 256, 289, 324, 361, 400];

pub struct Column {
    pub table: &'static str,
    pub dataset: (usize, usize),
    pub variant: Variant,
    pub dims: &'static [usize],
    /// Counts as printed; rows may appear out of order.
    pub params: &'static [usize],
    /// Printed average over the column, if any.
    pub average: Option<usize>,
}

const fn col(
    table: &'static str,
    dataset: (usize, usize),
    variant: Variant,
    dims: &'static [usize],
    params: &'static [usize],
    average: Option<usize>,
) -> Column {
    Column {
        table,
        dataset,
        variant,
        dims,
        params,
        average,
    }
}

use Variant::{DistMult as DM, KdDistMult as KD, KdRel as KR};

pub const COLUMNS: &[Column] = &[
    col("best", UMLS, DM, &[289], &[67_915], None),
    col("best", UMLS, KR, &[289], &[42_619], None),
    col("best", UMLS, KD, &[256], &[3_728], None),
    col("best", KINSHIP, DM, &[289], &[46_818], None),
    col("best", KINSHIP, KR, &[400], &[45_420], None),
    col("best", KINSHIP, KD, &[400], &[3_200], None),
    col("calibration", UMLS, DM, &[289], &[67_915], None),
    col("calibration", UMLS, KR, &[289], &[42_619], None),
    col("calibration", UMLS, KD, &[256], &[3_728], None),
    col("calibration", KINSHIP, DM, &[289], &[46_818], None),
    col("calibration", KINSHIP, KR, &[289], &[32_946], None),
    col("calibration", KINSHIP, KD, &[400], &[3_200], None),
    col(
        "noisy",
        UMLS,
        DM,
        NOISY,
        &[
            23_500, 28_435, 33_840, 39_715, 46_060, 52_875, 60_160, 67_915, 76_140, 84_835, 94_000,
        ],
        Some(55_225),
    ),
    col(
        "noisy",
        UMLS,
        KR,
        NOISY,
        &[
            15_130, 18_205, 21_564, 25_207, 29_134, 33_345, 37_840, 42_619, 47_682, 53_029, 58_660,
        ],
        Some(34_765),
    ),
    col(
        "noisy",
        UMLS,
        KD,
        NOISY,
        &[
            2_330, 2_563, 2_796, 3_029, 3_262, 3_495, 3_728, 3_961, 4_427, 4_194, 4_660,
        ],
        Some(3_495),
    ),
    col(
        "noisy",
        KINSHIP,
        DM,
        NOISY,
        &[
            16_200, 19_602, 23_328, 27_378, 31_752, 36_450, 41_472, 46_818, 52_488, 58_482, 64_800,
        ],
        Some(38_070),
    ),
    col(
        "noisy",
        KINSHIP,
        KR,
        NOISY,
        &[
            11_610, 13_992, 16_596, 19_422, 22_470, 25_740, 29_232, 32_946, 36_882, 41_040, 45_420,
        ],
        Some(26_850),
    ),
    col(
        "noisy",
        KINSHIP,
        KD,
        NOISY,
        &[
            1_600, 1_760, 1_920, 2_080, 2_240, 2_400, 2_560, 2_720, 2_880, 3_040, 3_200,
        ],
        Some(2_400),
    ),
    col(
        "upper",
        UMLS,
        DM,
        UPPER,
        &[
            28_435, 33_840, 39_715, 46_060, 52_875, 60_160, 67_915, 76_140, 84_835, 94_000,
        ],
        Some(58_397),
    ),
    col(
        "upper",
        UMLS,
        KR,
        UPPER,
        &[
            18_205, 21_564, 25_207, 29_134, 33_345, 37_840, 42_619, 47_682, 53_029, 58_660,
        ],
        Some(36_728),
    ),
    col(
        "upper",
        UMLS,
        KD,
        UPPER,
        &[2_563, 2_796, 3_029, 3_262, 3_495, 3_728, 3_961, 4_194, 4_427, 4_660],
        Some(3_611),
    ),
    col(
        "upper",
        KINSHIP,
        DM,
        UPPER,
        &[
            19_602, 23_328, 27_378, 31_752, 36_450, 41_472, 46_818, 52_488, 58_482, 64_800,
        ],
        Some(40_257),
    ),
    col(
        "upper",
        KINSHIP,
        KR,
        UPPER,
        &[
            13_992, 16_596, 19_422, 22_470, 25_740, 29_232, 32_946, 36_882, 41_040, 45_420,
        ],
        Some(28_374),
    ),
    col(
        "upper",
        KINSHIP,
        KD,
        UPPER,
        &[1_760, 1_920, 2_080, 2_240, 2_400, 2_560, 2_720, 2_880, 3_040, 3_200],
        Some(2_480),
    ),
    col(
        "lower",
        UMLS,
        DM,
        LOWER,
        &[940, 2_115, 3_760, 5_875, 8_460, 11_515, 15_040, 19_035, 23_500],
        Some(10_026),
    ),
    col(
        "lower",
        UMLS,
        KR,
        LOWER,
        &[754, 1_557, 2_644, 4_015, 5_670, 7_609, 9_832, 12_339, 15_130],
        Some(6_616),
    ),
    col(
        "lower",
        UMLS,
        KD,
        LOWER,
        &[466, 699, 932, 1_165, 1_398, 1_631, 1_864, 2_097, 2_330],
        Some(1_398),
    ),
    col(
        "lower",
        KINSHIP,
        DM,
        LOWER,
        &[648, 1_458, 2_592, 4_050, 5_832, 7_938, 10_368, 13_122, 16_200],
        Some(6_912),
    ),
    col(
        "lower",
        KINSHIP,
        KR,
        LOWER,
        &[546, 1_152, 1_980, 3_030, 4_302, 5_796, 7_512, 9_450, 11_610],
        Some(5_042),
    ),
    col(
        "lower",
        KINSHIP,
        KD,
        LOWER,
        &[320, 480, 640, 800, 960, 1_120, 1_280, 1_440, 1_600],
        Some(960),
    ),
];
