//! Embedding quality: neighborhood preservation, K sweeps, curvature
//! histograms and nearest-neighbor classification.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::{generate, write_atomic, DataSet, GenSpec};
use crate::error::{CamlError, Result};
use crate::localgeom::CurvatureField;
use crate::neighborhood::knn_graph;
use crate::pipeline::{run, Algorithm, PipelineConfig};
use crate::scalar::{to_f64, Real};

/// Neighborhood preserving ratio.
#[derive(Debug, Clone, Serialize)]
pub struct NprReport {
    pub k: usize,
    pub value: f64,
    pub per_point: Vec<f64>,
}

/// Mean fraction of each point's `k` nearest neighbors in `x` that are also
/// among its `k` nearest neighbors in `y`.
pub fn npr<T: Real, U: Real>(x: &DataSet<T>, y: &DataSet<U>, k: usize) -> Result<NprReport> {
    if x.len() != y.len() {
        return Err(CamlError::invalid(format!(
            "row count mismatch: {} original vs {} embedded points",
            x.len(),
            y.len()
        )));
    }
    let gx = knn_graph(x, k)?;
    let gy = knn_graph(y, k)?;
    let overlaps: Vec<usize> = gx
        .neighbors
        .iter()
        .zip(&gy.neighbors)
        .map(|(a, b)| a.iter().filter(|j| b.contains(j)).count())
        .collect();
    let value = overlaps.iter().sum::<usize>() as f64 / (k * overlaps.len()) as f64;
    let per_point = overlaps.into_iter().map(|c| c as f64 / k as f64).collect();
    Ok(NprReport { k, value, per_point })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Index of the most populated bin (lowest on ties).
    pub fn mode_bin(&self) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lo,hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", self.edges[i], self.edges[i + 1], c).unwrap();
        }
        out
    }
}

/// Equal-width histogram of `values`. Without an explicit range the bins
/// span `[0, max]` (curvatures are nonnegative); values outside an explicit
/// range are counted in the end bins so the total is always `values.len()`.
pub fn histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(CamlError::invalid("histogram needs at least one bin"));
    }
    let (lo, mut hi) = match range {
        Some((lo, hi)) if lo.is_finite() && hi.is_finite() && lo < hi => (lo, hi),
        Some((lo, hi)) => return Err(CamlError::invalid(format!("invalid histogram range [{lo}, {hi}]"))),
        None => {
            let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
            (values.iter().copied().fold(0.0f64, f64::min), max)
        }
    };
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = if v.is_nan() {
            0
        } else {
            (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
        };
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

pub fn curvature_histogram<T: Real>(field: &CurvatureField<T>, bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    let values: Vec<f64> = field.values.iter().map(|&c| to_f64(c)).collect();
    histogram(&values, bins, range)
}

/// Seed-averaged NPR for every (algorithm, K) cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub ks: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// `rows[a][k]`: mean NPR over seeds.
    pub rows: Vec<Vec<f64>>,
    /// `cells[a][k][s]`: NPR for one seed.
    pub cells: Vec<Vec<Vec<f64>>>,
}

impl SweepReport {
    pub fn get(&self, alg: Algorithm, k: usize) -> Option<f64> {
        let a = self.algorithms.iter().position(|&x| x == alg)?;
        let j = self.ks.iter().position(|&x| x == k)?;
        Some(self.rows[a][j])
    }

    /// One row per algorithm, one column per K.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm");
        for k in &self.ks {
            write!(out, ",k{k}").unwrap();
        }
        out.push('\n');
        for (a, row) in self.algorithms.iter().zip(&self.rows) {
            out.push_str(a.name());
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// For each seed, generates `spec` with that seed, embeds it with every
/// algorithm at every K (with `d = config.d`), and scores NPR at the same K.
/// Cells run in parallel; results are ordered by (algorithm, K, seed).
pub fn k_sweep<T: Real>(
    spec: &GenSpec,
    algorithms: &[Algorithm],
    ks: &[usize],
    seeds: &[u64],
    config: &PipelineConfig<T>,
) -> Result<SweepReport> {
    if algorithms.is_empty() || ks.is_empty() || seeds.is_empty() {
        return Err(CamlError::invalid("sweep needs at least one algorithm, K and seed"));
    }
    let datasets: Vec<DataSet<T>> = seeds
        .iter()
        .map(|&s| generate(&spec.clone().with_seed(s)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..algorithms.len())
        .flat_map(|a| (0..ks.len()).flat_map(move |k| (0..seeds.len()).map(move |s| (a, k, s))))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(a, ki, s)| {
            let (alg, k, seed) = (algorithms[a], ks[ki], seeds[s]);
            let cell = || -> Result<f64> {
                let cfg = config.with_k(k);
                let out = run(&datasets[s], alg, &cfg)?;
                let y = out.embedding.as_dataset(None)?;
                Ok(npr(&datasets[s], &y, k)?.value)
            };
            cell().map_err(|e| CamlError::InCell {
                algorithm: alg.name().to_string(),
                k,
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    let mut flat = results.into_iter();
    let mut cells = vec![vec![vec![0.0; seeds.len()]; ks.len()]; algorithms.len()];
    for &(a, k, s) in &jobs {
        cells[a][k][s] = flat.next().unwrap()?;
    }
    let rows = cells
        .iter()
        .map(|r| r.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64).collect())
        .collect();
    Ok(SweepReport {
        ks: ks.to_vec(),
        algorithms: algorithms.to_vec(),
        seeds: seeds.to_vec(),
        rows,
        cells,
    })
}

/// Fraction of `test` points whose majority label among the `k` nearest
/// `train` points matches their own. Vote ties go to the label of the
/// nearest tied neighbor; distance ties to the lower training index.
pub fn knn_classify<T: Real>(train: &DataSet<T>, test: &DataSet<T>, k: usize) -> Result<f64> {
    let (Some(train_labels), Some(test_labels)) = (&train.labels, &test.labels) else {
        return Err(CamlError::invalid("classification needs labels on both training and test data"));
    };
    if train.is_empty() || test.is_empty() {
        return Err(CamlError::invalid("classification needs nonempty training and test sets"));
    }
    if train.dim() != test.dim() {
        return Err(CamlError::invalid(format!(
            "training data has {} columns, test data {}",
            train.dim(),
            test.dim()
        )));
    }
    if k == 0 || k > train.len() {
        return Err(CamlError::invalid(format!("k must be in 1..={} (got {k})", train.len())));
    }
    let correct: usize = (0..test.len())
        .into_par_iter()
        .map(|t| {
            let mut d: Vec<(T, usize)> = (0..train.len())
                .map(|i| {
                    let diff = train.points.row(i) - test.points.row(t);
                    (diff.norm_squared(), i)
                })
                .collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let nearest = &d[..k];
            let mut votes: Vec<(i64, usize, usize)> = Vec::new(); // (label, count, first rank)
            for (rank, &(_, i)) in nearest.iter().enumerate() {
                let l = train_labels[i];
                match votes.iter_mut().find(|v| v.0 == l) {
                    Some(v) => v.1 += 1,
                    None => votes.push((l, 1, rank)),
                }
            }
            let best = votes.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2))).unwrap();
            usize::from(best.0 == test_labels[t])
        })
        .sum();
    Ok(correct as f64 / test.len() as f64)
}

/// Splits `data` into train/test, embeds all points jointly, and reports
/// 1-NN accuracy in the ambient space and in the embedding.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub algorithm: Algorithm,
    pub train: usize,
    pub test: usize,
    pub ambient_accuracy: f64,
    pub embedded_accuracy: f64,
}

pub fn classification_protocol<T: Real>(
    data: &DataSet<T>,
    alg: Algorithm,
    config: &PipelineConfig<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<ClassificationReport> {
    let Some(labels) = &data.labels else {
        return Err(CamlError::invalid("classification needs labeled data"));
    };
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CamlError::invalid(format!("train fraction must be in (0, 1) (got {train_fraction})")));
    }
    let n = data.len();
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n.saturating_sub(1));
    if n_train == 0 || n_train >= n {
        return Err(CamlError::invalid("too few points to split into training and test sets"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha12Rng::seed_from_u64(seed));
    let (tr, te) = order.split_at(n_train);
    let subset = |m: &nalgebra::DMatrix<T>, idx: &[usize]| -> Result<DataSet<T>> {
        let rows = nalgebra::DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)]);
        DataSet::new(rows, Some(idx.iter().map(|&i| labels[i]).collect()), data.name.clone())
    };
    let ambient_accuracy = knn_classify(&subset(&data.points, tr)?, &subset(&data.points, te)?, 1)?;
    let y = run(data, alg, config)?.embedding.y;
    let embedded_accuracy = knn_classify(&subset(&y, tr)?, &subset(&y, te)?, 1)?;
    Ok(ClassificationReport {
        algorithm: alg,
        train: tr.len(),
        test: te.len(),
        ambient_accuracy,
        embedded_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{two_blobs, ManifoldKind};
    use crate::localgeom::FitOptions;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn cloud(n: usize, dim: usize, seed: u64) -> DataSet<f64> {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let m = DMatrix::from_fn(n, dim, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s as f64 / u64::MAX as f64
        });
        DataSet::new(m, None, "cloud").unwrap()
    }

    /// All-pairs reference: sort every row of the distance table.
    fn brute_npr(x: &DataSet<f64>, y: &DataSet<f64>, k: usize) -> f64 {
        let knn = |d: &DataSet<f64>, i: usize| -> Vec<usize> {
            let mut v: Vec<(f64, usize)> = (0..d.len()).filter(|&j| j != i).map(|j| (d.dist2(i, j), j)).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.into_iter().take(k).map(|p| p.1).collect()
        };
        let mut total = 0usize;
        for i in 0..x.len() {
            let a = knn(x, i);
            let b = knn(y, i);
            total += a.iter().filter(|j| b.contains(j)).count();
        }
        total as f64 / (k * x.len()) as f64
    }

    #[test]
    fn identity_embedding_scores_one() {
        let x = cloud(80, 3, 1);
        for k in [1, 5, 20, 79] {
            let r = npr(&x, &x, k).unwrap();
            assert_eq!(r.value, 1.0);
            assert_eq!(r.per_point.len(), 80);
        }
    }

    #[test]
    fn matches_brute_force_on_small_clouds() {
        for seed in 0..5 {
            let x = cloud(50, 3, seed);
            let y = cloud(50, 2, seed + 100);
            for k in [1, 5, 10] {
                assert_eq!(npr(&x, &y, k).unwrap().value, brute_npr(&x, &y, k));
            }
        }
    }

    #[test]
    fn random_permutation_scores_chance() {
        // independent point clouds: each K-NN set in y is a random subset
        let n = 400;
        let k = 10;
        let trials = 10;
        let mut mean = 0.0;
        for t in 0..trials {
            let x = cloud(n, 3, 7 + t);
            let y = cloud(n, 2, 1000 + t);
            mean += npr(&x, &y, k).unwrap().value / trials as f64;
        }
        let chance = k as f64 / (n as f64 - 1.0);
        assert!((mean - chance).abs() < 0.5 * chance, "{mean} vs {chance}");
    }

    #[test]
    fn size_mismatch_is_an_error() {
        assert!(npr(&cloud(10, 2, 1), &cloud(11, 2, 1), 3).is_err());
        assert!(npr(&cloud(10, 2, 1), &cloud(10, 2, 1), 10).is_err());
    }

    proptest! {
        #[test]
        fn npr_is_similarity_invariant(
            seed in 0u64..1000,
            k in 1usize..8,
            angle in 0.0f64..std::f64::consts::TAU,
            scale in 0.1f64..10.0,
            tx in -5.0f64..5.0,
        ) {
            let x = cloud(30, 3, seed);
            let y = cloud(30, 2, seed + 1);
            let (c, s) = (angle.cos(), angle.sin());
            let mut moved = &y.points * DMatrix::from_row_slice(2, 2, &[c, -s, s, c]) * scale;
            moved.column_mut(0).add_scalar_mut(tx);
            let moved = DataSet::new(moved, None, "m").unwrap();
            let a = npr(&x, &y, k).unwrap();
            let b = npr(&x, &moved, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&a.value));
            prop_assert_eq!(a.per_point, b.per_point);
        }
    }

    #[test]
    fn histogram_conserves_mass() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0, 2.0], 4, None).unwrap();
        assert_eq!(h.total(), 5);
        assert_eq!(h.counts, vec![1, 1, 2, 1]);
        let h = histogram(&[-1.0, 0.5, 9.0], 2, Some((0.0, 1.0))).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
        assert!(histogram(&[1.0], 0, None).is_err());
        let flat = histogram(&[0.0; 10], 5, None).unwrap();
        assert_eq!(flat.counts[0], 10);
    }

    #[test]
    fn plane_and_sphere_histograms() {
        let plane = DMatrix::from_fn(400, 3, |i, c| match c {
            0 => (i % 20) as f64 * 0.1,
            1 => (i / 20) as f64 * 0.1,
            _ => 0.0,
        });
        let plane = DataSet::new(plane, None, "plane").unwrap();
        let g = knn_graph(&plane, 10).unwrap();
        let field = crate::localgeom::curvature_field(&plane, &g, 2, FitOptions::default(), false).unwrap();
        let h = curvature_histogram(&field, 10, Some((0.0, 4.0))).unwrap();
        assert_eq!(h.counts[0], 400);

        let sphere: DataSet<f64> = generate(&GenSpec::new(ManifoldKind::UnitSphere, 1500, 3)).unwrap();
        let g = knn_graph(&sphere, 10).unwrap();
        let field = crate::localgeom::curvature_field(&sphere, &g, 2, FitOptions::default(), false).unwrap();
        let h = curvature_histogram(&field, 8, Some((0.0, 4.0))).unwrap();
        assert_eq!(h.total(), 1500);
        let m = h.mode_bin();
        assert!(h.edges[m] <= 2.0 + 0.5 && h.edges[m + 1] >= 2.0 - 0.5, "{h:?}");
    }

    #[test]
    fn classify_blobs_and_degenerate_cases() {
        let train: DataSet<f64> = two_blobs(100, 3, 10.0, 1.0, 1).unwrap();
        let test: DataSet<f64> = two_blobs(100, 3, 10.0, 1.0, 2).unwrap();
        assert!(knn_classify(&train, &test, 1).unwrap() >= 0.95);
        assert_eq!(knn_classify(&train, &train, 1).unwrap(), 1.0);

        let single = DataSet::new(DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 0.0]), Some(vec![1]), "one").unwrap();
        let expect = test.labels.as_ref().unwrap().iter().filter(|&&l| l == 1).count() as f64 / 200.0;
        assert_eq!(knn_classify(&single, &test, 1).unwrap(), expect);

        let unlabeled = DataSet::new(train.points.clone(), None, "u").unwrap();
        assert!(knn_classify(&unlabeled, &test, 1).is_err());
    }

    #[test]
    fn sweep_cell_matches_manual_run() {
        let spec = GenSpec::new(ManifoldKind::TwinPeaks, 250, 0);
        let cfg = PipelineConfig::<f64>::default();
        let rep = k_sweep(&spec, &[Algorithm::Lep, Algorithm::CaLep], &[8, 12], &[3, 4], &cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[0].len(), 2);
        let data: DataSet<f64> = generate(&spec.clone().with_seed(4)).unwrap();
        let out = run(&data, Algorithm::CaLep, &cfg.with_k(12)).unwrap();
        let manual = npr(&data, &out.embedding.as_dataset(None).unwrap(), 12).unwrap().value;
        assert_eq!(rep.cells[1][1][1], manual);
        let again = k_sweep(&spec, &[Algorithm::Lep, Algorithm::CaLep], &[8, 12], &[3, 4], &cfg).unwrap();
        assert_eq!(rep.cells, again.cells);
        assert_eq!(rep.to_csv().lines().count(), 3);
    }

    #[test]
    fn sweep_errors_name_the_cell() {
        let spec = GenSpec::new(ManifoldKind::SwissRoll, 30, 0);
        let err = k_sweep(&spec, &[Algorithm::Lep], &[40], &[0], &PipelineConfig::<f64>::default()).unwrap_err();
        match err {
            CamlError::InCell { algorithm, k, seed, .. } => {
                assert_eq!((algorithm.as_str(), k, seed), ("lep", 40, 0));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn protocol_on_blobs() {
        let data: DataSet<f64> = two_blobs(60, 3, 8.0, 1.0, 9).unwrap();
        let rep = classification_protocol(&data, Algorithm::Pca, &PipelineConfig::default(), 0.5, 1).unwrap();
        assert_eq!(rep.train + rep.test, 120);
        assert!(rep.ambient_accuracy >= 0.95 && rep.embedded_accuracy >= 0.95);
    }
}
