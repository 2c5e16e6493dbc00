//! The bundled documents are exactly what the generators produce, and the
//! reduction pipeline reproduces the published per-stage counts on them.

use std::path::PathBuf;

use nwr::io::{model_to_string, read_model};
use nwr::pipeline::run_pipeline;
use nwr_benchmodels::{standard_instances, BrpLabel, ConsensusLabel, Instance};

fn bundled_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/benchmarks")
}

#[test]
fn bundled_documents_match_generators() {
    for inst in standard_instances() {
        let path = bundled_dir().join(format!("{}.json", inst.file_stem()));
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let fresh = model_to_string(&inst.build(), Some(inst.source()));
        assert!(on_disk == fresh, "{} differs from the generator output", path.display());
    }
}

/// (instance, original, preprocessed, under-approximated) as `(states, choices)`.
type Row = (Instance, (usize, usize), (usize, usize), (usize, usize));

fn published_rows() -> Vec<Row> {
    use ConsensusLabel::*;
    let c = |k, label| Instance::Consensus { k, label };
    let b = |max, label| Instance::Brp { n: 64, max, label };
    vec![
        (c(2, Disagree), (274, 400), (232, 344), (148, 260)),
        (c(4, Disagree), (530, 784), (488, 728), (308, 548)),
        (c(8, Disagree), (1042, 1552), (1000, 1496), (628, 1124)),
        (c(16, Disagree), (2066, 3088), (2024, 3032), (1268, 2276)),
        (c(2, All1), (274, 400), (173, 280), (127, 232)),
        (c(4, All1), (530, 784), (365, 600), (271, 504)),
        (c(8, All1), (1042, 1552), (749, 1240), (561, 1052)),
        (c(16, All1), (2066, 3088), (1517, 2520), (1137, 2140)),
        (c(2, NotAll1), (274, 400), (165, 268), (123, 226)),
        (c(4, NotAll1), (530, 784), (357, 588), (267, 498)),
        (c(8, NotAll1), (1042, 1552), (741, 1228), (555, 1042)),
        (c(16, NotAll1), (2066, 3088), (1509, 2508), (1131, 2130)),
        (b(2, BrpLabel::NoSuccTrans), (2695, 2693), (1982, 1980), (768, 766)),
        (b(3, BrpLabel::NoSuccTrans), (3528, 3526), (2812, 2810), (1087, 1085)),
        (b(4, BrpLabel::NoSuccTrans), (4361, 4359), (3642, 3640), (1406, 1404)),
        (b(5, BrpLabel::NoSuccTrans), (5194, 5192), (4472, 4470), (1725, 1723)),
        (b(2, BrpLabel::NotRecButSent), (2695, 2693), (8, 6), (5, 3)),
        (b(3, BrpLabel::NotRecButSent), (3528, 3526), (10, 8), (6, 4)),
        (b(4, BrpLabel::NotRecButSent), (4361, 4359), (12, 10), (7, 5)),
        (b(5, BrpLabel::NotRecButSent), (5194, 5192), (14, 12), (8, 6)),
    ]
}

#[test]
fn published_stage_counts() {
    let mut failures = Vec::new();
    for (inst, orig, pre, ua) in published_rows() {
        let m = read_model(&bundled_dir().join(format!("{}.json", inst.file_stem()))).unwrap();
        let r = run_pipeline(&m, &inst.reference_config()).unwrap().reduction.report;
        let got = (
            (r.original.states, r.original.choices),
            (r.preprocessed.states, r.preprocessed.choices),
            (r.reduced.states, r.reduced.choices),
        );
        r.check_monotone().unwrap();
        if got != (orig, pre, ua) {
            failures.push(format!("{}: got {got:?}, expected {:?}", inst.file_stem(), (orig, pre, ua)));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
