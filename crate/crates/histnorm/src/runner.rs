//! Runs benchmark cells on a thread pool. Each cell trains on one thread;
//! results are merged in cell-key order, so output does not depend on the
//! number of workers.

use histnorm_core::corpus::TextDataset;
use histnorm_core::eval::{
    curve_from_rows, Benchmark, BenchmarkConfig, CellKey, CurveSize, EvalReport, EvalRow,
    LearningCurve, Method, Setup,
};

use crate::{Error, Result};

pub fn run_cells(bench: &Benchmark, cells: &[CellKey], jobs: usize) -> Result<Vec<EvalRow>> {
    if jobs <= 1 {
        return cells
            .iter()
            .map(|k| bench.run_cell(k).map_err(Error::from))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    use rayon::prelude::*;
    pool.install(|| {
        cells
            .par_iter()
            .map(|k| bench.run_cell(k).map_err(Error::from))
            .collect()
    })
}

pub fn run_benchmark(
    texts: &[TextDataset],
    methods: &[Method],
    setups: &[Setup],
    config: &BenchmarkConfig,
    jobs: usize,
) -> Result<EvalReport> {
    if texts.is_empty() {
        return Err(Error::Usage("no texts given".into()));
    }
    let bench = Benchmark::prepare(texts, *config)?;
    let cells = bench.cells(methods, setups);
    Ok(EvalReport::from_rows(run_cells(&bench, &cells, jobs)?))
}

pub fn learning_curve(
    text: &TextDataset,
    aux_texts: &[TextDataset],
    sizes: &[CurveSize],
    methods: &[Method],
    setups: &[Setup],
    config: &BenchmarkConfig,
    jobs: usize,
) -> Result<LearningCurve> {
    let all: Vec<TextDataset> = std::iter::once(text.clone())
        .chain(aux_texts.iter().cloned())
        .collect();
    let bench = Benchmark::prepare(&all, *config)?;
    let cells = bench.curve_cells(0, sizes, methods, setups)?;
    let rows = run_cells(&bench, &cells, jobs)?;
    Ok(curve_from_rows(&bench.texts[0].id, &rows))
}
