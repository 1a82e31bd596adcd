use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qwalk_core::dataset::{
    augment_by_shuffle, balance, prune_by_diff, split, ClassPair, Dataset, DatasetHeader,
    LabelConfig, PruneMode,
};
use qwalk_core::graphs::{pad_adjacency, random_graph, random_tail_permutation, Graph};
use qwalk_core::neuralnet::{softmax, Confusion, EvalReport, Tensor};
use qwalk_core::pipeline::label_graphs;
use qwalk_core::walksim::{
    detection_probability, simulate, threshold_for, InitialState, QuantumSetup, SimConfig,
    WalkerKind,
};

fn quick() -> SimConfig {
    SimConfig {
        t_max: 60.0,
        dt: 0.02,
        ..SimConfig::default()
    }
}

fn graph() -> impl Strategy<Value = Graph> {
    (4usize..=7, 0.2f64..0.7, any::<u64>()).prop_map(|(n, p, s)| random_graph(n, p, s).unwrap())
}

/// A small labeled dataset built from real simulations.
fn dataset() -> impl Strategy<Value = Dataset> {
    (prop::collection::vec(graph(), 6..24), any::<bool>()).prop_map(|(graphs, t)| {
        let pair = if t { ClassPair::ClassicalVsQuantumT } else { ClassPair::ClassicalVsQuantum };
        let cfg = LabelConfig {
            sim: SimConfig {
                stop_on_hit: true,
                ..quick()
            },
            p_th: None,
        };
        let run = label_graphs(&graphs, pair, &cfg, 1);
        let n = graphs.iter().map(Graph::n).max().unwrap();
        Dataset::new(DatasetHeader::new(pair, n, &cfg, vec![1]).unwrap(), run.samples)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn arrival_probability_is_monotone_and_bounded(g in graph()) {
        for walker in [WalkerKind::Classical, WalkerKind::Quantum, WalkerKind::QuantumT] {
            let r = simulate(&g, walker, &quick(), 0.9).unwrap();
            prop_assert!(r.target_prob.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
            for w in r.target_prob.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12, "{walker} not monotone on {g}");
            }
        }
    }

    #[test]
    fn sink_never_exceeds_detection_probability(g in graph()) {
        for (extra, init) in [(false, InitialState::NodeZero), (true, InitialState::TState)] {
            let setup = QuantumSetup::new(&g, 1.0, extra).unwrap();
            let p_det = detection_probability(&setup, init).unwrap();
            let walker = if extra { WalkerKind::QuantumT } else { WalkerKind::Quantum };
            let r = simulate(&g, walker, &quick(), 0.9).unwrap();
            prop_assert!(*r.target_prob.last().unwrap() <= p_det + 1e-6);
        }
    }

    #[test]
    fn relabeling_tail_nodes_keeps_hitting_times(g in graph(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = g.relabel(&random_tail_permutation(g.n(), &mut rng)).unwrap();
        let p_th = threshold_for(g.n()).unwrap();
        for walker in [WalkerKind::Classical, WalkerKind::Quantum] {
            let a = simulate(&g, walker, &quick(), p_th).unwrap();
            let b = simulate(&h, walker, &quick(), p_th).unwrap();
            for (x, y) in a.target_prob.iter().zip(&b.target_prob) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn padding_keeps_the_top_left_block(g in graph(), extra in 0usize..5) {
        let a = g.adjacency();
        let big = pad_adjacency(&a, g.n() + extra).unwrap();
        for i in 0..g.n() + extra {
            for j in 0..g.n() + extra {
                let want = if i < g.n() && j < g.n() { a.get(i, j) } else { 0 };
                prop_assert_eq!(big.get(i, j), want);
            }
        }
    }

    #[test]
    fn jsonl_round_trip_is_exact(ds in dataset()) {
        let mut buf = Vec::new();
        ds.write_jsonl(&mut buf).unwrap();
        prop_assert_eq!(Dataset::read_jsonl(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn balanced_split_keeps_groups_together(ds in dataset(), seed in any::<u64>(), copies in 0usize..3) {
        // A single-class draw cannot be balanced.
        let Ok(b) = balance(&ds, seed) else { return Ok(()) };
        let counts = b.class_counts();
        prop_assert_eq!(counts[0], counts[1]);
        let aug = augment_by_shuffle(&b, copies, seed).unwrap();
        prop_assert_eq!(aug.len(), b.len() * (copies + 1));
        if let Ok(sp) = split(&aug, 0.75, seed) {
            let s = sp.split().unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..aug.len()).collect::<Vec<_>>());
            let id = |i: &usize| (aug.samples[*i].label, aug.samples[*i].meta.graph_id);
            let train_ids: std::collections::HashSet<_> = s.train.iter().map(id).collect();
            prop_assert!(s.test.iter().all(|i| !train_ids.contains(&id(i))));
        }
    }

    #[test]
    fn pruning_modes_partition_finite_differences(ds in dataset(), k in 0u64..400) {
        let minor = prune_by_diff(&ds, PruneMode::DropMinor, k);
        let major = prune_by_diff(&ds, PruneMode::DropMajor, k);
        for s in &minor.samples {
            prop_assert!(s.step_diff().magnitude().map_or(true, |d| d > k));
        }
        for s in &major.samples {
            prop_assert!(s.step_diff().magnitude().is_some_and(|d| d < k));
        }
        let exact = ds.samples.iter().filter(|s| s.step_diff().magnitude() == Some(k)).count();
        prop_assert_eq!(minor.len() + major.len() + exact, ds.len());
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, vals in prop::collection::vec(-500.0f64..500.0, 12)) {
        let data: Vec<f64> = vals.iter().cycle().take(rows * 2).copied().collect();
        let p = softmax(&Tensor::new(vec![rows, 2], data).unwrap());
        for r in 0..rows {
            let row = p.row(r);
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn f1_identity(tp in 0usize..300, tn in 0usize..300, fp in 0usize..300, fn_ in 0usize..300) {
        prop_assume!(tp + tn + fp + fn_ > 0);
        let c = Confusion { tp, tn, fp, fn_ };
        let r = EvalReport::from_confusion(c, 0.0);
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
        prop_assert_eq!(r.f1[1], f1);
        prop_assert_eq!(r.accuracy, (tp + tn) as f64 / (tp + tn + fp + fn_) as f64);
        let swapped = EvalReport::from_confusion(c.swapped(), 0.0);
        prop_assert_eq!(swapped.f1[1], r.f1[0]);
        prop_assert_eq!(swapped.precision[0], r.precision[1]);
    }
}
