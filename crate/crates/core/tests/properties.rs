#![allow(clippy::needless_range_loop)]
mod common;

use std::collections::BTreeMap;

use common::*;
use hinweight::recommend::{evaluate_split, Split};
use hinweight::{
    aggregate_pathsim, gradient, loocv_split, objective, profile_similarity, recommend_topn, train, BipartiteNetwork,
    GlobalWeights, InteractionSet, MetaPathConfig, SimilarityMatrix, TrainConfig,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn network_strategy() -> impl Strategy<Value = BipartiteNetwork> {
    (1usize..10, 1usize..8, any::<u64>()).prop_map(|(items, users, seed)| {
        let mut r = rng(seed);
        random_network(&mut r, items, users, 0.35)
    })
}

fn permuted_network(net: &BipartiteNetwork, perm: &[usize]) -> BipartiteNetwork {
    let mut inverse = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let pairs: Vec<(usize, usize)> = net.weights().triplets().map(|(i, u, _)| (inverse[i], u)).collect();
    BipartiteNetwork::from_pairs(net.n_items(), net.n_users(), pairs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pathsim_is_symmetric_bounded_with_unit_diagonal(net in network_strategy(), depth in 1usize..4) {
        let s = aggregate_pathsim(&net, &MetaPathConfig::new(depth).unwrap());
        for i in 0..net.n_items() {
            let connected = !net.weights().row(i).0.is_empty();
            prop_assert_eq!(s.get(i, i), if connected { 1.0 } else { 0.0 });
            for j in 0..net.n_items() {
                prop_assert_eq!(s.get(i, j).to_bits(), s.get(j, i).to_bits());
                prop_assert!(s.get(i, j) >= 0.0 && s.get(i, j) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn pathsim_is_relabeling_equivariant(net in network_strategy(), depth in 1usize..4, seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..net.n_items()).collect();
        perm.shuffle(&mut rng(seed));
        let cfg = MetaPathConfig::new(depth).unwrap();
        let s = aggregate_pathsim(&net, &cfg);
        let sp = aggregate_pathsim(&permuted_network(&net, &perm), &cfg);
        let relabeled = s.permuted(&perm);
        for i in 0..net.n_items() {
            for j in 0..net.n_items() {
                prop_assert!((sp.get(i, j) - relabeled.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_similarity_is_scale_invariant(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let mut r = rng(seed);
        let (ci, ct) = (r.random_range(1..12), r.random_range(1..15));
        let corpus = random_corpus(&mut r, ci, ct, 0.3);
        let w = random_weights(&mut r, corpus.n_terms(), 0.0, 2.0);
        let a = profile_similarity(&corpus, &w).unwrap();
        let b = profile_similarity(&corpus, &w.scaled(c).unwrap()).unwrap();
        for i in 0..corpus.n_items() {
            for j in 0..corpus.n_items() {
                prop_assert!((a.get(i, j) - b.get(i, j)).abs() <= 1e-10);
                prop_assert!(a.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn zero_weight_equals_dropping_the_term(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (ci, ct) = (r.random_range(1..10), r.random_range(2..12));
        let corpus = random_corpus(&mut r, ci, ct, 0.4);
        let t = corpus.n_terms();
        let drop = r.random_range(0..t);
        let mut w = random_weights(&mut r, t, 0.1, 2.0).into_inner();
        w[drop] = 0.0;
        let with_zero = profile_similarity(&corpus, &GlobalWeights::new(w.clone()).unwrap()).unwrap();

        let keep: Vec<usize> = (0..t).filter(|&k| k != drop).collect();
        let local = corpus.local_weights().select_columns(&keep);
        let vocab = keep.iter().map(|&k| corpus.vocabulary()[k].clone()).collect();
        // a term may be the only one in some item; keep dropping it consistent by not pruning
        let reduced = match hinweight::load_corpus(&local, vocab, hinweight::LocalWeighting::Raw) {
            Ok((c, report)) if report.pruned_terms.is_empty() => c,
            _ => return Ok(()),
        };
        let w_reduced = GlobalWeights::from_vec(keep.iter().map(|&k| w[k]).collect()).unwrap();
        let without = profile_similarity(&reduced, &w_reduced).unwrap();
        for i in 0..corpus.n_items() {
            for j in 0..corpus.n_items() {
                prop_assert!((with_zero.get(i, j) - without.get(i, j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn unit_diagonals_contribute_nothing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..12);
        let (ci, ct) = (n, r.random_range(2..15));
        let corpus = random_corpus(&mut r, ci, ct, 0.3);
        let w = random_weights(&mut r, corpus.n_terms(), 0.1, 2.0);
        let target = random_target(&mut r, n);
        // a target whose diagonal is 1 everywhere, matching S_f (every item has a profile)
        let mut full = target.view().to_owned();
        for i in 0..n { full[[i, i]] = 1.0; }
        let target = SimilarityMatrix::new(full).unwrap();

        let local = dense_local(&corpus);
        let wv = w.as_array().as_slice().unwrap();
        let s = direct_cosine(&local, wv);
        let mut masked_fit = 0.0;
        for i in 0..n { for j in 0..n { if i != j { masked_fit += (s[i][j] - target.get(i, j)).powi(2); } } }
        let j = objective(&corpus, &w, &target, 0.0).unwrap();
        prop_assert!((j - 0.5 * masked_fit).abs() <= 1e-10 * j.max(1e-12));

        // masked gradient: the element-wise oracle with a target equal to S_f on the diagonal
        // gives the same values as skipping i == j altogether
        let d = norms(&local, wv);
        let g = gradient(&corpus, &w, &target, 0.0).unwrap();
        for k in 0..wv.len() {
            let mut masked = 0.0;
            for i in 0..n { for jj in 0..n {
                if i == jj { continue; }
                let q = s[i][jj] - target.get(i, jj);
                masked += q * (local[i][k] * local[jj][k] / (d[i] * d[jj])
                    - 0.5 * s[i][jj] * (local[i][k].powi(2) / d[i].powi(2) + local[jj][k].powi(2) / d[jj].powi(2)));
            }}
            prop_assert!(gradient_close(g[k], masked), "term {}: {} vs {}", k, g[k], masked);
        }
    }

    #[test]
    fn descent_is_monotone_and_feasible(seed in any::<u64>(), lambda in prop_oneof![Just(0.0), Just(0.01), Just(1.0)]) {
        let mut r = rng(seed);
        let n = r.random_range(2..12);
        let (ci, ct) = (n, r.random_range(2..15));
        let corpus = random_corpus(&mut r, ci, ct, 0.3);
        let w0 = random_weights(&mut r, corpus.n_terms(), 0.0, 3.0);
        let target = random_target(&mut r, n);
        let cfg = TrainConfig { lambda, max_iters: 40, ..TrainConfig::default() };
        let (w, trace) = train(&corpus, &target, w0, &cfg).unwrap();
        prop_assert!(w.as_array().iter().all(|&v| v >= 0.0));
        for pair in trace.records.windows(2) {
            prop_assert!(pair[1].objective <= pair[0].objective);
        }
        for rec in &trace.records {
            prop_assert!((rec.objective - rec.fit - rec.penalty).abs() <= 1e-9 * rec.objective.abs().max(1e-300));
        }
    }

    #[test]
    fn metrics_are_monotone_in_cutoff(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n_items = r.random_range(3..25);
        let users = r.random_range(2..15);
        let net = random_network(&mut r, n_items, users, 0.3);
        let interactions = InteractionSet::from_network(&net);
        let s = aggregate_pathsim(&net, &MetaPathConfig::new(1).unwrap());
        let split = loocv_split(&interactions, seed);
        let cutoffs: Vec<usize> = (1..=n_items).collect();
        let (metrics, _) = evaluate_split(&s, &split, &cutoffs, None).unwrap();
        for m in &metrics {
            prop_assert!(m.arhr <= m.hr);
            prop_assert!(m.hits <= split.test.len());
        }
        for pair in metrics.windows(2) {
            prop_assert!(pair[1].hr >= pair[0].hr);
            prop_assert!(pair[1].arhr >= pair[0].arhr);
        }
    }

    #[test]
    fn recommendations_exclude_history(seed in any::<u64>(), k in prop::option::of(1usize..6)) {
        let mut r = rng(seed);
        let n = r.random_range(2..15);
        let net = random_network(&mut r, n, 6, 0.4);
        let s = aggregate_pathsim(&net, &MetaPathConfig::new(2).unwrap());
        let history: Vec<usize> = (0..n).filter(|_| r.random_bool(0.3)).collect();
        let list = recommend_topn(&s, &history, n, k);
        prop_assert!(list.items.iter().all(|i| !history.contains(i)));
        for pair in list.items.iter().zip(&list.scores).collect::<Vec<_>>().windows(2) {
            let ((i0, s0), (i1, s1)) = (pair[0], pair[1]);
            prop_assert!(s0 > s1 || (s0 == s1 && i0 < i1));
        }
    }

    #[test]
    fn evaluation_is_relabeling_invariant(seed in any::<u64>()) {
        // distinct random similarities, so no ties depend on item labels
        let mut r = rng(seed);
        let n = r.random_range(3..15);
        let mut m = Array2::from_shape_fn((n, n), |_| r.random::<f64>());
        for i in 0..n { m[[i, i]] = 1.0; for j in 0..i { m[[i, j]] = m[[j, i]]; } }
        let s = SimilarityMatrix::new(m).unwrap();
        let net = random_network(&mut r, n, 8, 0.35);
        let interactions = InteractionSet::from_network(&net);
        let split = loocv_split(&interactions, seed);

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() { inverse[old] = new; }
        let permuted_split = Split {
            train: split.train.permuted_items(&perm),
            test: split.test.iter().map(|(u, i)| (*u, inverse[*i])).collect::<BTreeMap<_, _>>(),
            excluded: split.excluded.clone(),
        };
        let cutoffs = [1, 3, 5, 10];
        let (a, _) = evaluate_split(&s, &split, &cutoffs, None).unwrap();
        let (b, _) = evaluate_split(&s.permuted(&perm), &permuted_split, &cutoffs, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.hits, y.hits);
            prop_assert!((x.arhr - y.arhr).abs() < 1e-15);
        }
    }
}
