//! Multi-view datasets: CSV ingestion, stratified folds, planted synthetic data.
//!
//! On-disk format: one headerless CSV per view (one row per sample, the same
//! sample order in every view) and a label file with one integer per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::message::format_f64;
use crate::numerics::{Matrix, Seed};
use crate::optimizer::LabelMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<Matrix>,
    /// Class index per sample, in `0..num_classes`.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Original label value for each class index, when loaded from disk.
    pub class_names: Option<Vec<String>>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<Matrix>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let ds = MultiViewDataset {
            views,
            labels,
            num_classes,
            class_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::InvalidArgument("dataset has no views".into()));
        }
        let n = self.labels.len();
        for (view, x) in self.views.iter().enumerate() {
            if x.nrows() != n {
                return Err(Error::RowCountMismatch {
                    view,
                    found: x.nrows(),
                    expected: n,
                });
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&c| c >= self.num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 0..{}",
                self.num_classes
            )));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::ncols).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    pub fn is_balanced(&self) -> bool {
        let counts = self.class_counts();
        counts.iter().all(|&c| c == counts[0])
    }

    pub fn label_matrix(&self) -> Result<LabelMatrix> {
        LabelMatrix::from_labels(&self.labels, self.num_classes)
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> MultiViewDataset {
        MultiViewDataset {
            views: self.views.iter().map(|x| x.select_rows(indices)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            class_names: self.class_names.clone(),
        }
    }
}

/// Reads a headerless numeric CSV. LF and CRLF line endings are accepted;
/// blank lines are skipped.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let file = path.display().to_string();
    let handle = std::fs::File::open(path).map_err(|source| Error::Open {
        path: file.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(handle));
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                file,
                row,
                col: record.len().min(expected) + 1,
                msg: format!("row has {} fields, expected {expected}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                file: file.clone(),
                row,
                col: c + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    file: file.clone(),
                    row,
                    col: c + 1,
                    msg: format!("not finite: {cell:?}"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse {
        file,
        row: 1,
        col: 1,
        msg: "no data".into(),
    })?;
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

/// Reads one integer label per line. Distinct values are mapped to class
/// indices in ascending order; the original values become the class names.
pub fn read_labels_csv(path: &Path) -> Result<(Vec<usize>, Vec<String>)> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Open {
        path: file.clone(),
        source,
    })?;
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        let v: i64 = cell.parse().map_err(|_| Error::Parse {
            file: file.clone(),
            row: i + 1,
            col: 1,
            msg: format!("not an integer label: {cell:?}"),
        })?;
        raw.push(v);
    }
    let classes: BTreeMap<i64, usize> = {
        let mut distinct = raw.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect()
    };
    let labels = raw.iter().map(|v| classes[v]).collect();
    let names = classes.keys().map(i64::to_string).collect();
    Ok((labels, names))
}

pub fn load_csv<P: AsRef<Path>>(view_paths: &[P], label_path: &Path) -> Result<MultiViewDataset> {
    let (labels, names) = read_labels_csv(label_path)?;
    let views = view_paths
        .iter()
        .map(|p| read_matrix_csv(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut ds = MultiViewDataset::new(views, labels, names.len())?;
    ds.class_names = Some(names);
    Ok(ds)
}

/// Writes a matrix as headerless CSV with 17 significant digits, so reading
/// it back gives the same bits.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for l in labels {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `view_1.csv .. view_K.csv` and `labels.csv` into `dir`. Returns the
/// view paths and the label path.
pub fn write_dataset(dir: &Path, ds: &MultiViewDataset) -> Result<(Vec<PathBuf>, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(ds.num_views());
    for (k, x) in ds.views.iter().enumerate() {
        let p = dir.join(format!("view_{}.csv", k + 1));
        write_matrix_csv(&p, x)?;
        paths.push(p);
    }
    let labels = dir.join("labels.csv");
    write_labels_csv(&labels, &ds.labels)?;
    Ok((paths, labels))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// Fold index per sample.
    pub assignments: Vec<usize>,
    pub num_folds: usize,
    pub seed: Seed,
}

impl FoldPlan {
    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    /// Training and validation subsets for one fold.
    pub fn split(
        &self,
        ds: &MultiViewDataset,
        fold: usize,
    ) -> (MultiViewDataset, MultiViewDataset) {
        (
            ds.subset(&self.train_indices(fold)),
            ds.subset(&self.validation_indices(fold)),
        )
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin
/// into `k` folds, so per-class fold sizes differ by at most one.
pub fn make_folds(labels: &[usize], num_classes: usize, k: usize, seed: Seed) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &c) in labels.iter().enumerate() {
        if c >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {c} outside 0..{num_classes}"
            )));
        }
        by_class[c].push(i);
    }
    let mut rng = seed.rng();
    let mut assignments = vec![0; labels.len()];
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                needed: k,
            });
        }
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignments[i] = pos % k;
        }
    }
    Ok(FoldPlan {
        assignments,
        num_folds: k,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub num_samples: usize,
    pub dims: Vec<usize>,
    /// Informative columns per view.
    pub informative: usize,
    pub sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 3,
            num_samples: 300,
            dims: vec![30, 30, 30],
            informative: 5,
            sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedData {
    pub dataset: MultiViewDataset,
    /// Informative column indices per view, ascending.
    pub informative: Vec<Vec<usize>>,
}

/// Synthetic views where a few columns carry class information.
///
/// In an informative column every class gets its own mean on a grid with
/// spacing `4 sigma + 1` (the class order is shuffled per column) and samples
/// add `N(0, sigma^2)` noise. All other columns are `N(0, 1)`. Classes are
/// balanced and the sample order is shuffled.
pub fn synth_planted(config: &SynthConfig, seed: Seed) -> Result<PlantedData> {
    let SynthConfig {
        num_classes: nc,
        num_samples: n,
        ref dims,
        informative,
        sigma,
    } = *config;
    if nc < 2 || n < nc || dims.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need >= 2 classes, >= 1 view and at least one sample per class; got {nc} classes, {n} samples, {} views",
            dims.len()
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    if let Some(&d) = dims.iter().find(|&&d| d < informative || d == 0) {
        return Err(Error::InvalidArgument(format!(
            "{informative} informative columns do not fit in {d} columns"
        )));
    }

    let mut rng = seed.stream(0);
    let mut labels: Vec<usize> = (0..n).map(|i| i % nc).collect();
    labels.shuffle(&mut rng);

    let spacing = 4.0 * sigma + 1.0;
    let center = (nc as f64 - 1.0) / 2.0;
    let mut views = Vec::with_capacity(dims.len());
    let mut planted = Vec::with_capacity(dims.len());
    for (k, &d) in dims.iter().enumerate() {
        let mut rng = seed.stream(k as u64 + 1);
        let mut cols: Vec<usize> = (0..d).collect();
        cols.shuffle(&mut rng);
        let mut chosen = cols[..informative].to_vec();
        chosen.sort_unstable();

        let mut x = Matrix::zeros(n, d);
        for j in 0..d {
            if chosen.binary_search(&j).is_ok() {
                let mut order: Vec<usize> = (0..nc).collect();
                order.shuffle(&mut rng);
                for i in 0..n {
                    let noise: f64 = rng.sample(StandardNormal);
                    x[(i, j)] = (order[labels[i]] as f64 - center) * spacing + sigma * noise;
                }
            } else {
                for i in 0..n {
                    x[(i, j)] = rng.sample(StandardNormal);
                }
            }
        }
        views.push(x);
        planted.push(chosen);
    }
    Ok(PlantedData {
        dataset: MultiViewDataset::new(views, labels, nc)?,
        informative: planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_views_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let v1 = write(dir.path(), "a.csv", "1,2\r\n3,4\r\n5,6\r\n");
        let v2 = write(dir.path(), "b.csv", "0.5\n-1e-3\n7\n");
        let y = write(dir.path(), "y.csv", "3\n1\n3\n");
        let ds = load_csv(&[v1, v2], &y).unwrap();
        assert_eq!(ds.dims(), vec![2, 1]);
        assert_eq!(ds.labels, vec![1, 0, 1]);
        assert_eq!(ds.class_names, Some(vec!["1".to_string(), "3".to_string()]));
        assert_eq!(ds.views[0][(2, 1)], 6.0);
        assert_eq!(ds.views[1][(1, 0)], -1e-3);
    }

    #[test]
    fn non_numeric_cell_names_location() {
        let dir = tempfile::tempdir().unwrap();
        let v = write(dir.path(), "a.csv", "1,2\n3,x\n");
        match read_matrix_csv(&v) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (2, 2)),
            other => panic!("{other:?}"),
        }
        let ragged = write(dir.path(), "r.csv", "1,2\n3\n");
        assert!(matches!(
            read_matrix_csv(&ragged),
            Err(Error::Parse { row: 2, .. })
        ));
        let y = write(dir.path(), "y.csv", "0\n1.5\n");
        assert!(matches!(
            read_labels_csv(&y),
            Err(Error::Parse { row: 2, col: 1, .. })
        ));
    }

    #[test]
    fn row_count_mismatch_names_view() {
        let dir = tempfile::tempdir().unwrap();
        let v1 = write(dir.path(), "a.csv", "1\n2\n");
        let v2 = write(dir.path(), "b.csv", "1\n2\n3\n");
        let y = write(dir.path(), "y.csv", "0\n1\n");
        match load_csv(&[v1, v2], &y) {
            Err(Error::RowCountMismatch {
                view,
                found,
                expected,
            }) => {
                assert_eq!((view, found, expected), (1, 3, 2))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_then_read_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let planted = synth_planted(&SynthConfig::default(), Seed(3)).unwrap();
        let (paths, labels) = write_dataset(dir.path(), &planted.dataset).unwrap();
        let back = load_csv(&paths, &labels).unwrap();
        assert_eq!(back.views, planted.dataset.views);
        assert_eq!(back.labels, planted.dataset.labels);
    }

    #[test]
    fn folds_of_160_per_class() {
        let labels: Vec<usize> = (0..1600).map(|i| i % 10).collect();
        let plan = make_folds(&labels, 10, 5, Seed(1)).unwrap();
        for f in 0..5 {
            let val = plan.validation_indices(f);
            let train = plan.train_indices(f);
            assert_eq!(val.len(), 320);
            assert_eq!(train.len(), 1280);
            for c in 0..10 {
                assert_eq!(val.iter().filter(|&&i| labels[i] == c).count(), 32);
                assert_eq!(train.iter().filter(|&&i| labels[i] == c).count(), 128);
            }
        }
        assert_eq!(plan, make_folds(&labels, 10, 5, Seed(1)).unwrap());
        assert_ne!(plan, make_folds(&labels, 10, 5, Seed(2)).unwrap());
    }

    #[test]
    fn small_class_is_rejected() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1];
        assert!(matches!(
            make_folds(&labels, 2, 5, Seed(0)),
            Err(Error::ClassTooSmall {
                class: 1,
                count: 4,
                needed: 5
            })
        ));
    }

    #[test]
    fn planted_shapes_and_separation() {
        let cfg = SynthConfig {
            sigma: 0.0,
            ..SynthConfig::default()
        };
        let p = synth_planted(&cfg, Seed(9)).unwrap();
        assert_eq!(p.dataset.dims(), vec![30, 30, 30]);
        assert!(p.dataset.is_balanced());
        for (k, cols) in p.informative.iter().enumerate() {
            assert_eq!(cols.len(), 5);
            for &j in cols {
                // noiseless: each class sits on a single value, distinct per class
                let mut values = vec![None; 3];
                for i in 0..300 {
                    let c = p.dataset.labels[i];
                    let v = p.dataset.views[k][(i, j)];
                    assert_eq!(*values[c].get_or_insert(v), v);
                }
                let mut vs: Vec<f64> = values.into_iter().map(Option::unwrap).collect();
                vs.sort_by(f64::total_cmp);
                assert!(vs.windows(2).all(|w| w[1] - w[0] >= 1.0));
            }
        }
        assert_eq!(synth_planted(&cfg, Seed(9)).unwrap().dataset, p.dataset);
    }

    #[test]
    fn too_many_informative_columns_rejected() {
        let cfg = SynthConfig {
            dims: vec![4, 30],
            ..SynthConfig::default()
        };
        assert!(synth_planted(&cfg, Seed(0)).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_each_class(
            counts in proptest::collection::vec(5usize..40, 2..6),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let labels: Vec<usize> = counts
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
                .collect();
            let plan = make_folds(&labels, counts.len(), k, Seed(seed)).unwrap();
            let mut seen = vec![0usize; labels.len()];
            for f in 0..k {
                for i in plan.validation_indices(f) {
                    seen[i] += 1;
                }
                let train = plan.train_indices(f);
                prop_assert_eq!(train.len() + plan.validation_indices(f).len(), labels.len());
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            for (c, _) in counts.iter().enumerate() {
                let sizes: Vec<usize> = (0..k)
                    .map(|f| plan.validation_indices(f).iter().filter(|&&i| labels[i] == c).count())
                    .collect();
                let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }

        #[test]
        fn csv_round_trip_is_bit_exact(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let dir = tempfile::tempdir().unwrap();
            let m = crate::numerics::standard_normal(rows, cols, &mut Seed(seed).rng()) * 1e3;
            let p = dir.path().join("m.csv");
            write_matrix_csv(&p, &m).unwrap();
            let back = read_matrix_csv(&p).unwrap();
            prop_assert!(m.iter().zip(back.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
