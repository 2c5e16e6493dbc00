mod common;

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use nwr::analysis::{is_essential, mec_decomposition, mec_quotient, value0_vertices, value1_vertices};
use nwr::graph::MdpGraph;
use nwr::mc_equiv::{mc_collapse, mc_equiv_classes};
use nwr::oracle::{check_value_preservation, falsify_nwr, sample_valuation, solve_exact, SampleProfile};
use nwr::poly::{Monomial, Polynomial, Rational};
use nwr::reduce::{reduce, PruneConfig};
use nwr::ua::{UaOptions, UnderApproxGraph};
use nwr::valuation::instantiate;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params() -> Vec<String> {
    vec!["x".into(), "y".into(), "z".into()]
}

fn polynomial() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0u32..3, 3), -9i64..=9, 1i64..=4), 0..5).prop_map(|terms| {
        Polynomial::from_terms(
            terms.into_iter().map(|(e, n, d)| (Monomial::from_exponents(e), Rational::new(n.into(), d.into()))),
        )
    })
}

fn point() -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((-6i64..=6, 1i64..=5).prop_map(|(n, d)| Rational::new(n.into(), d.into())), 3)
}

fn tp_model(max_internal: usize) -> impl Strategy<Value = nwr::model::WpMdp> {
    (any::<u64>(), 1..=max_internal).prop_map(|(seed, n)| common::random_tp(&mut ChaCha8Rng::seed_from_u64(seed), n, 3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_text_round_trips(p in polynomial()) {
        let ps = params();
        prop_assert_eq!(Polynomial::parse(&p.to_text(&ps), &ps).unwrap(), p);
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(p in polynomial(), q in polynomial(), x in point()) {
        let (a, b) = (p.eval(&x).unwrap(), q.eval(&x).unwrap());
        prop_assert_eq!(p.add(&q).eval(&x).unwrap(), &a + &b);
        prop_assert_eq!(p.mul(&q).eval(&x).unwrap(), &a * &b);
        prop_assert_eq!(p.sub(&p).eval(&x).unwrap(), Rational::zero());
    }

    #[test]
    fn graph_is_bipartite_and_deterministic(m in tp_model(10)) {
        let g = MdpGraph::build(&m);
        prop_assert_eq!(&g, &MdpGraph::build(&m));
        for (a, b) in g.edges() {
            prop_assert_ne!(g.is_state(a), g.is_state(b));
        }
        for v in 0..g.num_vertices() {
            if !g.is_state(v) {
                prop_assert!(g.predecessors(v).len() <= 1);
            }
        }
    }

    #[test]
    fn extremal_vertices_agree_with_sampled_values(m in tp_model(8), seed in any::<u64>()) {
        let g = MdpGraph::build(&m);
        let (zero, one) = (value0_vertices(&g), value1_vertices(&g));
        let val = sample_valuation(&m, SampleProfile::Uniform, seed).unwrap();
        let x = solve_exact(&instantiate(&m, &val).unwrap()).by_vertex(&g);
        for v in 0..g.num_vertices() {
            prop_assert_eq!(zero[v], x[v].is_zero(), "vertex {}", v);
            prop_assert_eq!(one[v], x[v].is_one(), "vertex {}", v);
        }
    }

    #[test]
    fn end_components_share_values(m in tp_model(8), seed in any::<u64>()) {
        let g = MdpGraph::build(&m);
        let dec = mec_decomposition(&g);
        let val = sample_valuation(&m, SampleProfile::Adversarial, seed).unwrap();
        let x = solve_exact(&instantiate(&m, &val).unwrap()).state;
        for mec in &dec.mecs {
            prop_assert!(mec.states.iter().all(|&s| x[s] == x[mec.states[0]]));
        }
    }

    #[test]
    fn end_component_quotient_is_idempotent(m in tp_model(10)) {
        let (once, _) = mec_quotient(&m).unwrap();
        let (twice, _) = mec_quotient(&once).unwrap();
        prop_assert_eq!(once.num_states(), twice.num_states());
        prop_assert_eq!(once.num_choices(), twice.num_choices());
    }

    #[test]
    fn essential_sets_are_upward_closed(m in tp_model(8), u in 0usize..8, w in prop::collection::vec(0usize..40, 0..4), extra in 0usize..40) {
        let g = MdpGraph::build(&m);
        let n = g.num_vertices();
        let u = [u % m.num_states()];
        let w: Vec<usize> = w.into_iter().map(|x| x % n).collect();
        if is_essential(&g, &u, &w) {
            let mut bigger = w.clone();
            bigger.push(extra % n);
            prop_assert!(is_essential(&g, &u, &bigger));
        }
    }

    #[test]
    fn fixpoint_is_monotone_and_sound(m in tp_model(6), w in 0usize..8, extra in 0usize..8, seed in any::<u64>()) {
        let g = MdpGraph::build(&m);
        let (w, extra) = (w % m.num_states(), extra % m.num_states());
        let small = UnderApproxGraph::new(&g, UaOptions::default()).lfp_f(&[w]);
        let mut both = vec![w, extra];
        both.sort_unstable();
        both.dedup();
        let large = UnderApproxGraph::new(&g, UaOptions::default()).lfp_f(&both);
        let large: BTreeSet<usize> = large.into_iter().collect();
        prop_assert!(small.iter().all(|z| large.contains(z)));
        for &z in &small {
            let found = falsify_nwr(&m, &[z], &[w], 5, seed, SampleProfile::Adversarial).unwrap();
            prop_assert!(found.is_none(), "vertex {} beats {}", z, w);
        }
    }

    #[test]
    fn mc_equivalence_matches_pairwise_oracle(seed in any::<u64>(), n in 1usize..=7) {
        let m = common::random_chain(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let p = mc_equiv_classes(&m).unwrap();
        let got: BTreeSet<BTreeSet<usize>> = p.classes.iter().map(|c| c.iter().copied().collect()).collect();
        prop_assert_eq!(got, common::mc_oracle(&m));
        let (r, map) = mc_collapse(&m, &p);
        let rep = check_value_preservation(&m, &r, &map, 3, seed, SampleProfile::Uniform).unwrap();
        prop_assert!(rep.ok(), "{:?}", rep.violations);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reduction_preserves_values(m in tp_model(10), seed in any::<u64>(), setup in 0usize..3) {
        let cfg = match setup {
            0 => PruneConfig::setup1(),
            1 => PruneConfig { skip_first_outer_inner: false, inner_max: None, ..PruneConfig::setup1() },
            _ => PruneConfig::setup2(),
        };
        let out = reduce(&m, &cfg).unwrap();
        prop_assert!(out.model.num_states() <= m.num_states());
        out.report.check_monotone().unwrap();
        let rep = check_value_preservation(&m, &out.model, &out.map, 5, seed, SampleProfile::Adversarial).unwrap();
        prop_assert!(rep.ok(), "{:?}", rep.violations);
    }

    #[test]
    fn reduction_is_deterministic(m in tp_model(10)) {
        let a = reduce(&m, &PruneConfig::setup1()).unwrap();
        let b = reduce(&m, &PruneConfig::setup1()).unwrap();
        prop_assert_eq!(a.model, b.model);
        prop_assert_eq!(a.map, b.map);
    }
}
