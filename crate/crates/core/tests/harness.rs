use histnorm_core::baseline::PerceptronConfig;
use histnorm_core::corpus::*;
use histnorm_core::eval::*;
use histnorm_core::model::TrainingConfig;
use histnorm_core::Error;

fn quick() -> BenchmarkConfig {
    BenchmarkConfig {
        split: SplitSpec { eval_size: 100, dev_size: 20 },
        training: TrainingConfig {
            embed_dim: 8,
            hidden_dim: 8,
            num_layers: 1,
            epochs: 2,
            ..TrainingConfig::default()
        },
        perceptron: PerceptronConfig { epochs: 3, ..PerceptronConfig::default() },
        aux_samples: 150,
        ..BenchmarkConfig::default()
    }
}

fn text(id: &str, rules: &RuleSet, n: usize, seed: u64) -> TextDataset {
    let lexicon = LexiconSpec::german_like().generate(800, 4);
    let mut d = generate_synthetic(rules, &lexicon, n, seed).unwrap();
    d.id = id.into();
    d
}

#[test]
fn one_text_two_methods_gives_two_rows() {
    let texts = [text("a", &RuleSet::enhg_like(), 400, 1)];
    let r = run_benchmark(&texts, &[Method::BiLstm, Method::Perceptron], &[Setup::S], &quick()).unwrap();
    assert_eq!(r.rows.len(), 2);
    for row in &r.rows {
        assert_eq!(row.train_size, 280);
        assert_eq!(row.eval_size, 100);
        assert_eq!(row.token_count, 400);
        assert!((0.0..=1.0).contains(&row.accuracy));
    }
    assert!(r.differences.is_empty());
}

#[test]
fn unsupported_cells_are_errors() {
    let texts = [text("a", &RuleSet::enhg_like(), 400, 1)];
    assert!(matches!(
        run_benchmark(&texts, &[Method::BiLstm], &[Setup::SA], &quick()),
        Err(Error::UnsupportedCell(_))
    ));
    let two = [texts[0].clone(), text("b", &RuleSet::enhg_like(), 400, 2)];
    assert!(matches!(
        run_benchmark(&two, &[Method::Identity], &[Setup::SA], &quick()),
        Err(Error::UnsupportedCell(_))
    ));
    assert!(run_benchmark(&[], &[Method::BiLstm], &[Setup::S], &quick()).is_err());
}

#[test]
fn identity_accuracy_is_share_of_untouched_tokens() {
    let rules = RuleSet::enhg_like();
    let texts = [text("a", &rules, 400, 3)];
    let r = run_benchmark(&texts, &[Method::Identity], &[Setup::S], &quick()).unwrap();
    let untouched = texts[0].pairs[..100].iter().filter(|p| rules.firing(&p.modern).is_empty()).count();
    assert_eq!(r.rows[0].accuracy, untouched as f64 / 100.0);
}

#[test]
fn aggregates_and_reproducibility() {
    let texts = [
        text("a", &RuleSet::enhg_like(), 300, 1),
        text("b", &RuleSet::enhg_like(), 300, 2),
        text("c", &RuleSet::divergent(), 300, 3),
    ];
    let cfg = quick();
    let methods = [Method::BiLstm, Method::Perceptron];
    let setups = [Setup::S, Setup::SA];
    let r = run_benchmark(&texts, &methods, &setups, &cfg).unwrap();
    assert_eq!(r.rows.len(), 12);
    for s in &r.summaries {
        let rows: Vec<f64> = r
            .rows
            .iter()
            .filter(|x| x.method == s.method && x.setup == s.setup)
            .map(|x| x.accuracy)
            .collect();
        let mean = rows.iter().sum::<f64>() / rows.len() as f64;
        assert!((s.mean_accuracy - mean).abs() < 1e-12);
    }
    for m in methods {
        let d = r.difference(m).unwrap();
        assert_eq!(d.texts, 3);
        let s = r.summary(m, Setup::S).unwrap().mean_accuracy;
        let sa = r.summary(m, Setup::SA).unwrap().mean_accuracy;
        assert!((d.mean - (sa - s)).abs() < 1e-12);
    }
    assert_eq!(run_benchmark(&texts, &methods, &setups, &cfg).unwrap(), r);

    let bench = Benchmark::prepare(&texts, cfg).unwrap();
    let mut cells = bench.cells(&methods, &setups);
    cells.reverse();
    let rows: Vec<EvalRow> = cells.iter().map(|k| bench.run_cell(k).unwrap()).collect();
    assert_eq!(EvalReport::from_rows(rows), r);
}

#[test]
fn full_size_curve_point_equals_benchmark_row() {
    let main = text("main", &RuleSet::enhg_like(), 420, 5);
    let aux = [text("aux", &RuleSet::enhg_like(), 300, 6)];
    let cfg = quick();
    let curve = learning_curve(
        &main,
        &aux,
        &[CurveSize::Full],
        &[Method::BiLstm, Method::Perceptron],
        &[Setup::S, Setup::SA],
        &cfg,
    )
    .unwrap();
    let all = [main.clone(), aux[0].clone()];
    let bench = run_benchmark(&all, &[Method::BiLstm, Method::Perceptron], &[Setup::S, Setup::SA], &cfg).unwrap();
    assert_eq!(curve.points.len(), 4);
    for p in &curve.points {
        let row = bench
            .rows
            .iter()
            .find(|r| r.text_id == "main" && r.method == p.method && r.setup == p.setup)
            .unwrap();
        assert_eq!(p.accuracy, row.accuracy);
        assert_eq!(p.train_size, row.train_size);
    }
}

#[test]
fn curve_sizes() {
    let main = text("main", &RuleSet::enhg_like(), 420, 5);
    let aux = [text("aux", &RuleSet::enhg_like(), 300, 6)];
    let cfg = quick();
    let c = learning_curve(&main, &aux, &[CurveSize::Count(100)], &[Method::BiLstm], &[Setup::SA], &cfg).unwrap();
    assert_eq!(c.series(Method::BiLstm, Setup::SA).len(), 1);
    assert_eq!(c.points[0].train_size, 100);

    let c = learning_curve(
        &main,
        &[],
        &[CurveSize::Full, CurveSize::Count(50), CurveSize::Count(150)],
        &[Method::Perceptron],
        &[Setup::S],
        &cfg,
    )
    .unwrap();
    let sizes: Vec<usize> = c.points.iter().map(|p| p.train_size).collect();
    assert_eq!(sizes, vec![50, 150, 300]);

    assert_eq!(
        learning_curve(&main, &[], &[CurveSize::Count(301)], &[Method::Perceptron], &[Setup::S], &cfg),
        Err(Error::SizeExceedsPool { size: 301, available: 300 })
    );

    let sub = BenchmarkConfig { truncation: Truncation::SeededSubsample, ..cfg };
    let a = learning_curve(&main, &[], &[CurveSize::Count(150)], &[Method::Perceptron], &[Setup::S], &sub).unwrap();
    let b = learning_curve(&main, &[], &[CurveSize::Count(150)], &[Method::Perceptron], &[Setup::S], &sub).unwrap();
    assert_eq!(a, b);
}
