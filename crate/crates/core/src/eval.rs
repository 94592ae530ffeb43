//! Post-selection classification, cross-validated grid search over `beta` and
//! `p`, accuracy curves and averaged performance differences.
//!
//! The validation classifier is a least-squares linear map (with a bias
//! column) from the selected features to one-hot targets, decoded by argmax
//! with ties going to the lowest class index.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{supfl_solve, supmvlfl_solve};
use crate::data::{FoldPlan, MultiViewDataset};
use crate::error::{Error, Result};
use crate::featsel::{score_features, select_top};
use crate::numerics::{self, Matrix, Seed};
use crate::optimizer::{run_reference, Hyperparams, LabelMatrix};

/// Relative ridge added to the classifier's normal equations so that
/// collinear selections stay solvable.
const CLASSIFIER_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mmvfl,
    Supfl,
    Supmvlfl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mmvfl, Method::Supfl, Method::Supmvlfl];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mmvfl => "mmvfl",
            Method::Supfl => "supfl",
            Method::Supmvlfl => "supmvlfl",
        }
    }

    /// Name used in difference tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Mmvfl => "MMVFL",
            Method::Supfl => "supFL",
            Method::Supmvlfl => "supMVLFL",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// One grid point on one fold for one participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: Method,
    /// 0-based; written 1-based in CSV files.
    pub participant: usize,
    pub p: f64,
    pub fold: usize,
    pub beta: f64,
    pub accuracy: f64,
}

fn with_bias(x: &Matrix) -> Matrix {
    x.clone().insert_column(x.ncols(), 1.0)
}

/// Trains the least-squares classifier on `train_x` and returns accuracy on
/// the validation rows.
pub fn classify_eval(
    train_x: &Matrix,
    train_labels: &[usize],
    val_x: &Matrix,
    val_labels: &[usize],
    num_classes: usize,
) -> Result<f64> {
    if train_x.ncols() == 0 || val_x.ncols() == 0 {
        return Err(Error::DegenerateInput("no features selected".into()));
    }
    if train_x.ncols() != val_x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "training has {} features, validation {}",
            train_x.ncols(),
            val_x.ncols()
        )));
    }
    if train_x.nrows() != train_labels.len() || val_x.nrows() != val_labels.len() {
        return Err(Error::DimensionMismatch(
            "label count differs from row count".into(),
        ));
    }
    if val_labels.is_empty() {
        return Err(Error::DegenerateInput("empty validation set".into()));
    }
    let y = LabelMatrix::from_labels(train_labels, num_classes)?;
    if let Some(c) = (0..num_classes).find(|&c| !train_labels.contains(&c)) {
        return Err(Error::DegenerateInput(format!(
            "class {c} has no training samples"
        )));
    }
    let xb = with_bias(train_x);
    let (n, d) = xb.shape();
    let coef = if d <= n {
        let mut gram = xb.tr_mul(&xb);
        let lambda = CLASSIFIER_RIDGE * gram.trace() / d as f64;
        for i in 0..d {
            gram[(i, i)] += lambda;
        }
        numerics::solve_spd(&gram, &xb.tr_mul(y.matrix()))?
    } else {
        let mut kernel = &xb * xb.transpose();
        let lambda = CLASSIFIER_RIDGE * kernel.trace() / n as f64;
        for i in 0..n {
            kernel[(i, i)] += lambda;
        }
        xb.tr_mul(&numerics::solve_spd(&kernel, y.matrix())?)
    };
    let scores = with_bias(val_x) * coef;
    let correct = (0..scores.nrows())
        .filter(|&i| argmax(scores.row(i).iter()) == val_labels[i])
        .count();
    Ok(correct as f64 / val_labels.len() as f64)
}

/// Index of the largest value; the first one wins ties.
fn argmax<'a, I: Iterator<Item = &'a f64>>(values: I) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Transformation matrices learned by `method` on `train` at one `beta`.
/// The label owner for MMVFL is participant 0.
pub fn fit_weights(
    method: Method,
    train: &MultiViewDataset,
    beta: f64,
    hyper: &Hyperparams,
    seed: Seed,
) -> Result<Vec<Matrix>> {
    let k = train.num_views();
    let y = train.label_matrix()?;
    match method {
        Method::Mmvfl => {
            let mut h = hyper.clone();
            h.beta = vec![beta; k];
            let run = run_reference(&train.views, &y, &h, seed)?;
            Ok(run.states.into_iter().map(|s| s.w).collect())
        }
        Method::Supfl => train
            .views
            .iter()
            .map(|x| {
                supfl_solve(x, &y, beta, hyper.epsilon, hyper.inner_tol, hyper.inner_max)
                    .map(|s| s.w)
            })
            .collect(),
        Method::Supmvlfl => Ok(supmvlfl_solve(
            &train.views,
            &y,
            &vec![beta; k],
            hyper.epsilon,
            hyper.inner_tol,
            hyper.inner_max,
        )?
        .w),
    }
}

/// Validation accuracy of every participant at every `p`, given the weights
/// learned on the training part.
fn evaluate_cell(
    method: Method,
    train: &MultiViewDataset,
    val: &MultiViewDataset,
    weights: &[Matrix],
    p_grid: &[f64],
    fold: usize,
    beta: f64,
) -> Result<Vec<ExperimentResult>> {
    let mut out = Vec::with_capacity(weights.len() * p_grid.len());
    for (k, w) in weights.iter().enumerate() {
        let ranking = score_features(w);
        for &p in p_grid {
            let cols = select_top(&ranking, p)?;
            let accuracy = classify_eval(
                &train.views[k].select_columns(&cols),
                &train.labels,
                &val.views[k].select_columns(&cols),
                &val.labels,
                train.num_classes,
            )?;
            out.push(ExperimentResult {
                method,
                participant: k,
                p,
                fold,
                beta,
                accuracy,
            });
        }
    }
    Ok(out)
}

/// Every grid point of one method, sorted by participant, `p`, fold, then
/// the position of `beta` in its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub method: Method,
    pub beta_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub num_folds: usize,
    pub num_participants: usize,
    pub runs: Vec<ExperimentResult>,
}

/// Trains `method` once per (fold, beta) and evaluates every (participant,
/// p) on the held-out fold. Cells run in parallel; the result does not
/// depend on completion order.
pub fn grid_search(
    method: Method,
    dataset: &MultiViewDataset,
    folds: &FoldPlan,
    beta_grid: &[f64],
    p_grid: &[f64],
    hyper: &Hyperparams,
    seed: Seed,
) -> Result<GridSearch> {
    if beta_grid.is_empty() || p_grid.is_empty() {
        return Err(Error::InvalidArgument("grids must not be empty".into()));
    }
    if folds.assignments.len() != dataset.num_samples() {
        return Err(Error::DimensionMismatch(format!(
            "fold plan covers {} samples, dataset has {}",
            folds.assignments.len(),
            dataset.num_samples()
        )));
    }
    let cells: Vec<(usize, f64)> = (0..folds.num_folds)
        .flat_map(|f| beta_grid.iter().map(move |&b| (f, b)))
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(fold, beta)| {
            let (train, val) = folds.split(dataset, fold);
            let weights = fit_weights(method, &train, beta, hyper, seed)?;
            log::debug!("{method}: fold {fold}, beta {beta} trained");
            evaluate_cell(method, &train, &val, &weights, p_grid, fold, beta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridSearch::from_runs(
        method,
        beta_grid,
        p_grid,
        folds.num_folds,
        dataset.num_views(),
        per_cell.into_iter().flatten().collect(),
    ))
}

fn grid_position(grid: &[f64], v: f64) -> usize {
    grid.iter().position(|&g| g == v).unwrap_or(grid.len())
}

impl GridSearch {
    /// Collects runs in any order into canonical order.
    pub fn from_runs(
        method: Method,
        beta_grid: &[f64],
        p_grid: &[f64],
        num_folds: usize,
        num_participants: usize,
        mut runs: Vec<ExperimentResult>,
    ) -> Self {
        runs.sort_by(|a, b| {
            (
                a.participant,
                grid_position(p_grid, a.p),
                a.fold,
                grid_position(beta_grid, a.beta),
            )
                .cmp(&(
                    b.participant,
                    grid_position(p_grid, b.p),
                    b.fold,
                    grid_position(beta_grid, b.beta),
                ))
        });
        GridSearch {
            method,
            beta_grid: beta_grid.to_vec(),
            p_grid: p_grid.to_vec(),
            num_folds,
            num_participants,
            runs,
        }
    }

    /// Best run per (participant, p, fold); the smallest-index `beta` wins
    /// ties.
    pub fn best(&self) -> Vec<ExperimentResult> {
        let mut best: Vec<ExperimentResult> = Vec::new();
        for r in &self.runs {
            match best.last_mut() {
                Some(b) if b.participant == r.participant && b.p == r.p && b.fold == r.fold => {
                    if r.accuracy > b.accuracy {
                        *b = *r;
                    }
                }
                _ => best.push(*r),
            }
        }
        best
    }

    /// Fold-averaged best accuracy for every (participant, p).
    pub fn curves(&self) -> AccuracyCurves {
        let mut acc = vec![vec![0.0; self.p_grid.len()]; self.num_participants];
        let mut counts = vec![vec![0usize; self.p_grid.len()]; self.num_participants];
        for b in self.best() {
            let j = grid_position(&self.p_grid, b.p);
            acc[b.participant][j] += b.accuracy;
            counts[b.participant][j] += 1;
        }
        for (row, c) in acc.iter_mut().zip(&counts) {
            for (a, &n) in row.iter_mut().zip(c) {
                *a /= n.max(1) as f64;
            }
        }
        AccuracyCurves {
            method: self.method,
            p_grid: self.p_grid.clone(),
            accuracy: acc,
        }
    }
}

/// Mean validation accuracy against `p`, one curve per participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurves {
    pub method: Method,
    pub p_grid: Vec<f64>,
    /// `accuracy[participant][i]` is the accuracy at `p_grid[i]`.
    pub accuracy: Vec<Vec<f64>>,
}

impl AccuracyCurves {
    pub fn num_participants(&self) -> usize {
        self.accuracy.len()
    }

    /// Mean over participants and `p`.
    pub fn mean(&self) -> f64 {
        let all: Vec<f64> = self.accuracy.iter().flatten().copied().collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    }
}

/// Averaged differences `A - B` in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub per_participant: Vec<f64>,
    pub average: f64,
}

/// Per participant, the mean over `p` of `accuracy_A - accuracy_B` in
/// percentage points, and the mean of those. Positive means `A` is better.
pub fn diff_table(a: &AccuracyCurves, b: &AccuracyCurves) -> Result<DiffRow> {
    if a.p_grid != b.p_grid {
        return Err(Error::GridMismatch(format!(
            "p grids differ: {:?} vs {:?}",
            a.p_grid, b.p_grid
        )));
    }
    if a.num_participants() != b.num_participants() || a.num_participants() == 0 {
        return Err(Error::GridMismatch(format!(
            "{} vs {} participants",
            a.num_participants(),
            b.num_participants()
        )));
    }
    let per_participant: Vec<f64> = a
        .accuracy
        .iter()
        .zip(&b.accuracy)
        .map(|(ra, rb)| {
            let sum: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y) * 100.0).sum();
            sum / ra.len() as f64
        })
        .collect();
    let average = per_participant.iter().sum::<f64>() / per_participant.len() as f64;
    Ok(DiffRow {
        per_participant,
        average,
    })
}

/// Two decimals, halves rounded away from zero. Values within `1e-6` of a
/// half are treated as halves so that binary representation error does not
/// flip the printed digit.
pub fn format_points(x: f64) -> String {
    let hundredths = ((x * 100.0).abs() + 0.5 + 1e-6).floor() as i64;
    let sign = if x < 0.0 && hundredths != 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", hundredths / 100, hundredths % 100)
}

/// One line of a difference table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub dataset: String,
    pub comparison: String,
    pub diff: DiffRow,
}

impl TableRow {
    pub fn new(dataset: &str, a: Method, b: Method, diff: DiffRow) -> Self {
        TableRow {
            dataset: dataset.to_string(),
            comparison: format!("{}-{}", a.display_name(), b.display_name()),
            diff,
        }
    }
}

/// Difference table as CSV: `dataset,comparison,1,..,K,Avg`, with blank
/// cells for participants a dataset does not have.
pub fn format_table(rows: &[TableRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.diff.per_participant.len())
        .max()
        .unwrap_or(0);
    let mut out = String::from("dataset,comparison");
    for k in 1..=width {
        out.push_str(&format!(",{k}"));
    }
    out.push_str(",Avg\n");
    for r in rows {
        out.push_str(&format!("{},{}", r.dataset, r.comparison));
        for k in 0..width {
            out.push(',');
            if let Some(&v) = r.diff.per_participant.get(k) {
                out.push_str(&format_points(v));
            }
        }
        out.push_str(&format!(",{}\n", format_points(r.diff.average)));
    }
    out
}

pub const RESULTS_HEADER: &str = "method,participant,p,fold,beta,accuracy";

pub fn write_results_csv(path: &Path, runs: &[ExperimentResult]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in runs {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.participant + 1,
            r.p,
            r.fold,
            r.beta,
            r.accuracy
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ExperimentResult>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let file = path.display().to_string();
    let mut runs = Vec::new();
    for (i, rec) in reader.deserialize::<ExperimentResult>().enumerate() {
        let mut r = rec?;
        if r.participant == 0 {
            return Err(Error::Parse {
                file,
                row: i + 2,
                col: 2,
                msg: "participants are numbered from 1".into(),
            });
        }
        r.participant -= 1;
        runs.push(r);
    }
    Ok(runs)
}

/// Rebuilds per-method grid searches from a flat list of runs (for example a
/// results file). Grids are taken from the values present, in first-seen
/// order.
pub fn searches_from_runs(runs: &[ExperimentResult]) -> Vec<GridSearch> {
    let mut by_method: BTreeMap<Method, Vec<ExperimentResult>> = BTreeMap::new();
    for r in runs {
        by_method.entry(r.method).or_default().push(*r);
    }
    by_method
        .into_iter()
        .map(|(method, runs)| {
            let mut betas = Vec::new();
            let mut ps = Vec::new();
            let mut folds = 0;
            let mut participants = 0;
            for r in &runs {
                if !betas.contains(&r.beta) {
                    betas.push(r.beta);
                }
                if !ps.contains(&r.p) {
                    ps.push(r.p);
                }
                folds = folds.max(r.fold + 1);
                participants = participants.max(r.participant + 1);
            }
            ps.sort_by(f64::total_cmp);
            GridSearch::from_runs(method, &betas, &ps, folds, participants, runs)
        })
        .collect()
}

/// Writes one plot-ready file per participant, `<dataset>_participant_<k>.csv`
/// with a `p` column and one accuracy column per method. Returns the files
/// written and warnings for expected methods that are absent.
pub fn emit_curves(
    runs: &[ExperimentResult],
    dataset: &str,
    out_dir: &Path,
) -> Result<(Vec<PathBuf>, Vec<String>)> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no results to plot".into()));
    }
    let curves: Vec<AccuracyCurves> = searches_from_runs(runs)
        .iter()
        .map(GridSearch::curves)
        .collect();
    let warnings: Vec<String> = Method::ALL
        .iter()
        .filter(|m| !curves.iter().any(|c| c.method == **m))
        .map(|m| format!("no results for method {m}"))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut p_grid: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.p_grid.iter().copied())
        .collect();
    p_grid.sort_by(f64::total_cmp);
    p_grid.dedup();
    let participants = curves
        .iter()
        .map(AccuracyCurves::num_participants)
        .max()
        .unwrap_or(0);
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::with_capacity(participants);
    for k in 0..participants {
        let path = out_dir.join(format!("{dataset}_participant_{}.csv", k + 1));
        let mut out = BufWriter::new(File::create(&path)?);
        let names: Vec<&str> = curves.iter().map(|c| c.method.as_str()).collect();
        writeln!(out, "p,{}", names.join(","))?;
        for &p in &p_grid {
            let cells: Vec<String> = curves
                .iter()
                .map(|c| {
                    c.p_grid
                        .iter()
                        .position(|&q| q == p)
                        .and_then(|j| c.accuracy.get(k).map(|row| row[j].to_string()))
                        .unwrap_or_default()
                })
                .collect();
            writeln!(out, "{p},{}", cells.join(","))?;
        }
        out.flush()?;
        files.push(path);
    }
    Ok((files, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_folds, synth_planted, SynthConfig};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn curves(method: Method, acc: Vec<Vec<f64>>) -> AccuracyCurves {
        let p_grid = (1..=acc[0].len()).map(|i| i as f64).collect();
        AccuracyCurves {
            method,
            p_grid,
            accuracy: acc,
        }
    }

    #[test]
    fn memorizes_separable_training_set() {
        let cfg = SynthConfig {
            sigma: 0.0,
            ..SynthConfig::default()
        };
        let p = synth_planted(&cfg, Seed(4)).unwrap();
        let x = p.dataset.views[0].select_columns(&p.informative[0]);
        let acc = classify_eval(&x, &p.dataset.labels, &x, &p.dataset.labels, 3).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn wide_selection_uses_dual_form() {
        let mut rng = Seed(2).rng();
        let x = numerics::standard_normal(12, 40, &mut rng);
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        assert_eq!(classify_eval(&x, &labels, &x, &labels, 3).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        let x = Matrix::zeros(6, 0);
        let labels = vec![0, 1, 0, 1, 0, 1];
        assert!(matches!(
            classify_eval(&x, &labels, &x, &labels, 2),
            Err(Error::DegenerateInput(_))
        ));
        let x = Matrix::from_element(6, 2, 1.0);
        assert!(matches!(
            classify_eval(&x, &[0; 6], &x, &labels, 2),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax([1.0, 3.0, 3.0].iter()), 1);
        assert_eq!(argmax([0.0, 0.0].iter()), 0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn diff_of_identical_curves_is_zero() {
        let a = curves(Method::Mmvfl, vec![vec![0.5, 0.7], vec![0.2, 0.9]]);
        let d = diff_table(&a, &a).unwrap();
        assert!(d.per_participant.iter().all(|&v| v == 0.0));
        assert_eq!(d.average, 0.0);
    }

    #[test]
    fn diff_rejects_mismatched_grids() {
        let a = curves(Method::Mmvfl, vec![vec![0.5, 0.7]]);
        let b = curves(Method::Supfl, vec![vec![0.5, 0.7, 0.1]]);
        assert!(matches!(diff_table(&a, &b), Err(Error::GridMismatch(_))));
        let c = curves(Method::Supfl, vec![vec![0.5, 0.7], vec![0.5, 0.7]]);
        assert!(matches!(diff_table(&a, &c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn formatting_rounds_halves_away_from_zero() {
        assert_eq!(format_points(1.416), "1.42");
        assert_eq!(format_points(-1.205), "-1.21");
        assert_eq!(format_points(-0.875), "-0.88");
        assert_eq!(format_points(2.308), "2.31");
        assert_eq!(format_points(-0.001), "0.00");
        assert_eq!(format_points(0.0), "0.00");
        assert_eq!(format_points(-6.29), "-6.29");
        assert_eq!(format_points(12.5), "12.50");
    }

    #[test]
    fn table_pads_shorter_rows() {
        let rows = vec![
            TableRow::new(
                "A",
                Method::Mmvfl,
                Method::Supfl,
                DiffRow {
                    per_participant: vec![1.0, -2.0],
                    average: -0.5,
                },
            ),
            TableRow::new(
                "B",
                Method::Mmvfl,
                Method::Supmvlfl,
                DiffRow {
                    per_participant: vec![0.25, 0.5, 0.75],
                    average: 0.5,
                },
            ),
        ];
        assert_eq!(
            format_table(&rows),
            "dataset,comparison,1,2,3,Avg\n\
             A,MMVFL-supFL,1.00,-2.00,,-0.50\n\
             B,MMVFL-supMVLFL,0.25,0.50,0.75,0.50\n"
        );
    }

    fn tiny_grid() -> (MultiViewDataset, FoldPlan) {
        let cfg = SynthConfig {
            num_samples: 60,
            dims: vec![8, 6],
            informative: 2,
            ..SynthConfig::default()
        };
        let ds = synth_planted(&cfg, Seed(1)).unwrap().dataset;
        let folds = make_folds(&ds.labels, ds.num_classes, 5, Seed(2)).unwrap();
        (ds, folds)
    }

    #[test]
    fn grid_search_counts_and_order_independence() {
        let (ds, folds) = tiny_grid();
        let hyper = Hyperparams::uniform(2, 0.1, 10.0, 10.0);
        let betas = [0.01, 1.0];
        let ps = [25.0, 50.0, 100.0];
        let g = grid_search(Method::Supfl, &ds, &folds, &betas, &ps, &hyper, Seed(0)).unwrap();
        assert_eq!(g.runs.len(), 2 * 3 * 5 * 2);
        assert_eq!(g.best().len(), 2 * 3 * 5);
        let c = g.curves();
        assert_eq!((c.accuracy.len(), c.accuracy[0].len()), (2, 3));

        let mut shuffled = g.runs.clone();
        shuffled.shuffle(&mut Seed(9).rng());
        let again = GridSearch::from_runs(Method::Supfl, &betas, &ps, 5, 2, shuffled);
        assert_eq!(again, g);
        assert_eq!(again.curves(), c);

        for b in g.best() {
            assert!(g
                .runs
                .iter()
                .filter(|r| r.participant == b.participant && r.p == b.p && r.fold == b.fold)
                .all(|r| r.accuracy <= b.accuracy));
        }
    }

    #[test]
    fn singleton_grids_give_one_run_per_fold() {
        let (ds, folds) = tiny_grid();
        let hyper = Hyperparams::uniform(2, 0.1, 10.0, 10.0);
        let g = grid_search(Method::Mmvfl, &ds, &folds, &[0.1], &[50.0], &hyper, Seed(0)).unwrap();
        assert_eq!(g.runs.len(), 5 * 2);
        assert_eq!(g.best(), g.runs);
    }

    #[test]
    fn results_csv_round_trip_and_curves() {
        let dir = tempfile::tempdir().unwrap();
        let mut runs = Vec::new();
        for method in [Method::Mmvfl, Method::Supfl] {
            for participant in 0..2 {
                for &p in &[10.0, 100.0] {
                    for fold in 0..5 {
                        for &beta in &[1e-5, 10.0] {
                            runs.push(ExperimentResult {
                                method,
                                participant,
                                p,
                                fold,
                                beta,
                                accuracy: 0.75,
                            });
                        }
                    }
                }
            }
        }
        let path = dir.path().join("results.csv");
        write_results_csv(&path, &runs).unwrap();
        assert_eq!(read_results_csv(&path).unwrap(), runs);

        let (files, warnings) = emit_curves(&runs, "flat", dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(warnings, vec!["no results for method supmvlfl".to_string()]);
        let text = std::fs::read_to_string(&files[1]).unwrap();
        assert_eq!(text, "p,mmvfl,supfl\n10,0.75,0.75\n100,0.75,0.75\n");
    }

    proptest! {
        #[test]
        fn diff_is_exactly_antisymmetric(
            a in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 14), 1..7),
            seed in any::<u64>(),
        ) {
            let mut rng = Seed(seed).rng();
            let b: Vec<Vec<f64>> = a
                .iter()
                .map(|row| row.iter().map(|_| rand::Rng::random::<f64>(&mut rng)).collect())
                .collect();
            let ca = curves(Method::Mmvfl, a);
            let cb = curves(Method::Supfl, b);
            let ab = diff_table(&ca, &cb).unwrap();
            let ba = diff_table(&cb, &ca).unwrap();
            for (x, y) in ab.per_participant.iter().zip(&ba.per_participant) {
                prop_assert_eq!(x.to_bits(), (-y).to_bits());
            }
            prop_assert_eq!(ab.average.to_bits(), (-ba.average).to_bits());
        }
    }
}
