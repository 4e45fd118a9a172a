use std::collections::BTreeMap;

use histnorm_core::alignment::*;
use histnorm_core::baseline::viterbi;
use histnorm_core::corpus::*;
use histnorm_core::eval::spearman;
use histnorm_core::model::*;
use histnorm_core::neural::{softmax_in_place, AdamConfig, Tensor};
use proptest::prelude::*;

fn edit_distance(a: &[char], b: &[char]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = edit_distance(ra, rb) + usize::from(x != y);
            sub.min(edit_distance(ra, b) + 1).min(edit_distance(a, rb) + 1)
        }
    }
}

fn word(max: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'd', 'e']), 0..=max)
        .prop_map(|v| v.into_iter().collect())
}

fn nonempty_word(max: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'd', 'e', 'ä', 'ů']), 1..=max)
        .prop_map(|v| v.into_iter().collect())
}

fn brute_viterbi(em: &Tensor, tr: &Tensor) -> (f64, Vec<Vec<usize>>) {
    let (t, l) = (em.rows(), em.cols());
    let mut best = f64::NEG_INFINITY;
    let mut paths: Vec<Vec<usize>> = Vec::new();
    for code in 0..l.pow(t as u32) {
        let mut path = Vec::with_capacity(t);
        let mut c = code;
        for _ in 0..t {
            path.push(c % l);
            c /= l;
        }
        path.reverse();
        let mut score = 0.0;
        for (i, &y) in path.iter().enumerate() {
            score += em.row(i)[y];
            if i > 0 {
                score += tr.row(path[i - 1])[y];
            }
        }
        if score > best + 1e-12 {
            best = score;
            paths = vec![path];
        } else if (score - best).abs() <= 1e-12 {
            paths.push(path);
        }
    }
    (best, paths)
}

proptest! {
    #[test]
    fn unit_alignment_cost_is_edit_distance(a in word(8), b in word(8)) {
        let al = levenshtein_align(&a, &b, &CostModel::unit());
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        prop_assert_eq!(al.cost, edit_distance(&ac, &bc) as f64);
        prop_assert_eq!(al.source(), a);
        prop_assert_eq!(al.target(), b);
        prop_assert!(al.is_well_formed());
        let step_cost: f64 = al.steps.iter().map(|s| match (s.src, s.tgt) {
            (Some(x), Some(y)) => f64::from(u8::from(x != y)),
            _ => 1.0,
        }).sum();
        prop_assert_eq!(step_cost, al.cost);
    }

    #[test]
    fn labels_reproduce_modern_word(pairs in proptest::collection::vec((nonempty_word(7), word(7)), 1..20)) {
        let d = TextDataset::new("p", pairs.iter().map(|(h, m)| TokenPair::new(h.clone(), m.clone())).collect());
        let it = iterated_align(&d, &AlignConfig::default());
        prop_assert!(it.passes >= 1 && it.passes <= 10);
        for (a, p) in it.alignments.iter().zip(&d.pairs) {
            let seq = to_label_sequence(a);
            prop_assert_eq!(seq.inputs.len(), p.historical.chars().count() + 1);
            prop_assert_eq!(seq.inputs[0], Symbol::Start);
            prop_assert_eq!(labels_to_word(&seq.labels), p.modern.clone());
        }
    }

    #[test]
    fn preprocess_is_idempotent(pairs in proptest::collection::vec(("[A-Za-zÄÖÜäöü.,;!?]{1,5}", "[A-Za-zäöü.,]{0,5}"), 0..30)) {
        let d = TextDataset::new("p", pairs.iter().map(|(h, m)| TokenPair::new(h.clone(), m.clone())).collect());
        let once = preprocess(&d);
        prop_assert_eq!(preprocess(&once), once.clone());
        for p in &once.pairs {
            prop_assert!(!p.historical.chars().all(is_punctuation));
            prop_assert_eq!(p.historical.to_lowercase(), p.historical.clone());
        }
    }

    #[test]
    fn split_partitions_in_order(n in 1usize..60, e in 0usize..20, v in 0usize..20) {
        let d = TextDataset::new("p", (0..n).map(|i| TokenPair::new(i.to_string(), "x")).collect());
        let spec = SplitSpec { eval_size: e, dev_size: v };
        match split(&d, spec) {
            Ok(s) => {
                prop_assert!(n > e + v);
                prop_assert_eq!(s.eval.len(), e);
                prop_assert_eq!(s.dev.len(), v);
                let joined: Vec<TokenPair> = s.eval.pairs.iter().chain(&s.dev.pairs).chain(&s.train.pairs).cloned().collect();
                prop_assert_eq!(joined, d.pairs.clone());
            }
            Err(_) => prop_assert!(n <= e + v),
        }
    }

    #[test]
    fn pooled_sampling_size_and_membership(sizes in proptest::collection::vec(0usize..30, 1..4), n in 0usize..80, seed in any::<u64>()) {
        let pools: Vec<Vec<usize>> = sizes.iter().enumerate().map(|(k, &s)| (0..s).map(|i| k * 100 + i).collect()).collect();
        let refs: Vec<&[usize]> = pools.iter().map(|p| p.as_slice()).collect();
        let total: usize = sizes.iter().sum();
        match sample_pooled(&refs, n, seed) {
            Ok(s) => {
                prop_assert_eq!(s.len(), n);
                prop_assert!(s.iter().all(|x| pools.iter().any(|p| p.contains(x))));
                if n <= total {
                    let mut u = s.clone();
                    u.sort_unstable();
                    u.dedup();
                    prop_assert_eq!(u.len(), n);
                }
                prop_assert_eq!(sample_pooled(&refs, n, seed).unwrap(), s);
            }
            Err(_) => prop_assert_eq!(total, 0),
        }
    }

    #[test]
    fn viterbi_matches_enumeration(t in 1usize..=4, l in 1usize..=5, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // Small integer scores make ties common.
        let em = Tensor::matrix(t, l, (0..t * l).map(|_| rng.gen_range(-2..=2) as f64).collect()).unwrap();
        let tr = Tensor::matrix(l, l, (0..l * l).map(|_| rng.gen_range(-2..=2) as f64).collect()).unwrap();
        let path = viterbi(&em, &tr);
        let (_, optimal) = brute_viterbi(&em, &tr);
        prop_assert_eq!(&path, optimal.iter().min().unwrap());
    }

    #[test]
    fn softmax_is_a_distribution(v in proptest::collection::vec(-800.0f64..800.0, 1..12)) {
        let mut x = v.clone();
        softmax_in_place(&mut x);
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(x.iter().all(|p| *p > 0.0 && *p <= 1.0));
    }

    #[test]
    fn spearman_is_bounded_and_rank_invariant(v in proptest::collection::vec((-50i32..50, -50i32..50), 2..15)) {
        let xs: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
        let r = spearman(&xs, &ys).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        let cubed: Vec<f64> = xs.iter().map(|x| x * x * x + 7.0).collect();
        prop_assert_eq!(spearman(&cubed, &ys).unwrap(), r);
        prop_assert_eq!(spearman(&ys, &xs).unwrap(), r);
    }
}

fn pmi_oracle(steps: &[(Option<char>, Option<char>)], smoothing: f64) -> BTreeMap<(char, char), f64> {
    let mut counts: BTreeMap<(Option<char>, Option<char>), f64> = BTreeMap::new();
    for s in steps {
        *counts.entry(*s).or_default() += 1.0;
    }
    let mut xs: Vec<Option<char>> = counts.keys().filter(|k| k.0.is_some()).map(|k| k.0).collect();
    xs.sort();
    xs.dedup();
    xs.push(None);
    let mut ys: Vec<Option<char>> = counts.keys().filter(|k| k.1.is_some()).map(|k| k.1).collect();
    ys.sort();
    ys.dedup();
    ys.push(None);
    let c = |x: Option<char>, y: Option<char>| counts.get(&(x, y)).copied().unwrap_or(0.0) + smoothing;
    let cells: Vec<(Option<char>, Option<char>)> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .filter(|(x, y)| x.is_some() || y.is_some())
        .collect();
    let total: f64 = cells.iter().map(|&(x, y)| c(x, y)).sum();
    let mut out = BTreeMap::new();
    for &(x, y) in &cells {
        if let (Some(a), Some(b)) = (x, y) {
            let row: f64 = cells.iter().filter(|k| k.0 == x).map(|&(p, q)| c(p, q)).sum();
            let col: f64 = cells.iter().filter(|k| k.1 == y).map(|&(p, q)| c(p, q)).sum();
            out.insert((a, b), ((c(x, y) / total) / ((row / total) * (col / total))).ln());
        }
    }
    out
}

proptest! {
    #[test]
    fn pmi_costs_reverse_pmi_order(pairs in proptest::collection::vec((nonempty_word(5), nonempty_word(5)), 1..15)) {
        let alignments: Vec<CharAlignment> = pairs.iter().map(|(h, m)| levenshtein_align(h, m, &CostModel::unit())).collect();
        let steps: Vec<(Option<char>, Option<char>)> = alignments.iter().flat_map(|a| a.steps.iter().map(|s| (s.src, s.tgt))).collect();
        let costs = estimate_pmi_costs(&alignments).unwrap();
        let pmi = pmi_oracle(&steps, 0.1);
        prop_assert_eq!(costs.match_costs.len(), pmi.len());
        let best = pmi.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        let worst = pmi.values().cloned().fold(f64::INFINITY, f64::min);
        for (k, v) in &pmi {
            let expected = if best > worst { 2.0 * (best - v) / (best - worst) } else { 0.0 };
            prop_assert!((costs.match_costs[k] - expected).abs() < 1e-9);
        }
        for (k1, v1) in &pmi {
            for (k2, v2) in &pmi {
                if v1 > &(v2 + 1e-9) {
                    prop_assert!(costs.match_costs[k1] <= costs.match_costs[k2]);
                }
            }
        }
        prop_assert!(costs.gap_cost_src >= 0.5 && costs.gap_cost_tgt >= 0.5);
    }
}

/// Raising a pair's count does not always lower its cost: PMI divides by
/// the marginals, which grow with the same count.
#[test]
fn pmi_cost_is_not_monotone_in_count() {
    let steps = |k: usize| -> Vec<CharAlignment> {
        let mut out = Vec::new();
        for _ in 0..40 {
            out.push(CharAlignment { steps: vec![AlignStep::pair('x', 'x')], cost: 0.0 });
        }
        for _ in 0..3 {
            out.push(CharAlignment { steps: vec![AlignStep::pair('z', 'z')], cost: 0.0 });
        }
        out.push(CharAlignment { steps: vec![AlignStep::pair('x', 'z')], cost: 0.0 });
        for _ in 0..k {
            out.push(CharAlignment { steps: vec![AlignStep::pair('a', 'b')], cost: 0.0 });
        }
        out
    };
    let low = estimate_pmi_costs(&steps(5)).unwrap().match_costs[&('a', 'b')];
    let high = estimate_pmi_costs(&steps(50)).unwrap().match_costs[&('a', 'b')];
    assert!(high > low, "cost at count 5 = {low}, at count 50 = {high}");
}

fn tiny_config(seed: u64) -> TrainingConfig {
    TrainingConfig {
        embed_dim: 6,
        hidden_dim: 5,
        num_layers: 2,
        dropout: 0.1,
        epochs: 3,
        seed,
        adam: AdamConfig::default(),
    }
}

fn labeled(pairs: &[(&str, &str)]) -> Vec<LabeledSequence> {
    let d = TextDataset::new("t", pairs.iter().map(|(h, m)| TokenPair::new(*h, *m)).collect());
    label_dataset(&d, &AlignConfig::default())
}

#[test]
fn aux_updates_touch_only_shared_layers_and_their_head() {
    let main = labeled(&[("vnd", "und"), ("jn", "ihn"), ("seyn", "sein")]);
    let aux_a = labeled(&[("kath", "kat"), ("thal", "tal")]);
    let aux_b = labeled(&[("ab", "ba")]);
    let tasks = [
        Task { name: "main", sequences: &main },
        Task { name: "a", sequences: &aux_a },
        Task { name: "b", sequences: &aux_b },
    ];
    let vocab = build_vocab(&tasks);
    let mut trainer = Trainer::new(NormalizerModel::init(vocab.clone(), tiny_config(5), 0));
    let before = trainer.model().clone();
    let enc = encode(&vocab, 1, &aux_a[0]);
    trainer.step(1, &enc).unwrap();
    let after = trainer.model();
    assert_eq!(after.heads[0], before.heads[0]);
    assert_eq!(after.heads[2], before.heads[2]);
    assert_ne!(after.heads[1], before.heads[1]);
    assert_ne!(after.encoder, before.encoder);
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = labeled(&[("vnd", "und"), ("jn", "ihn"), ("seyn", "sein"), ("vns", "uns")]);
    let (a, la) = train_single(&data, &tiny_config(9)).unwrap();
    let (b, lb) = train_single(&data, &tiny_config(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    let (c, _) = train_single(&data, &tiny_config(10)).unwrap();
    assert_ne!(a.encoder, c.encoder);
}

#[test]
fn prediction_is_greedy_decoding_of_probabilities() {
    let data = labeled(&[("vnd", "und"), ("jn", "ihn"), ("seyn", "sein"), ("vns", "uns")]);
    let (m, _) = train_single(&data, &tiny_config(2)).unwrap();
    for w in ["vnd", "jn", "xq", "seynvnd", "ů"] {
        let probs = m.probabilities(w);
        let mut labels = Vec::new();
        for t in 0..probs.rows() {
            let row = probs.row(t);
            let mut best = 0;
            for (k, p) in row.iter().enumerate() {
                if *p > row[best] {
                    best = k;
                }
            }
            labels.push(m.vocab.tasks[0].table.label(best).clone());
        }
        assert_eq!(m.predict(w), labels_to_word(&labels));
        assert_eq!(m.predict(w), m.predict(w));
    }
}
