//! Acceptance criteria. Each test prints one `criterion N ... PASS|FAIL`
//! line; run with `--nocapture` (and `--test-threads=1` for tidy output).

use std::time::{Duration, Instant};

use caml::embedding::{laplacian_spectrum, reconstruction_error_spectrum};
use caml::evaluation::k_sweep;
use caml::localgeom::{local_geometry, LocalGeometry};
use caml::weights::{affine_objective, ca_lep_weights, ca_lle_weights, lep_weights, lle_weights, tangent_lle_weights, PatchFeatures};
use caml::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn report(n: u32, title: &str, ok: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let within = elapsed <= budget;
    println!(
        "criterion {n} ({title}): {} [{:.2?} of {:.0?}] {detail}",
        if ok && within { "PASS" } else { "FAIL" },
        elapsed,
        budget
    );
    assert!(ok, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} exceeded its {budget:?} budget ({elapsed:?})");
}

fn sphere(n: usize, radius: f64, seed: u64) -> DataSet64 {
    generate(&GenSpec::new(ManifoldKind::UnitSphere, n, seed).with_params(vec![radius])).unwrap()
}

#[test]
fn criterion_1_hessian_oracle() {
    let t = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (a, b, c): (f64, f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        // vertex plus six antipodal pairs: the patch is symmetric under
        // (x, y) → (−x, −y), so its PCA tangent plane is the xy plane
        let mut rows = vec![0.0; 3];
        for _ in 0..6 {
            let (x, y): (f64, f64) = (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            let z = a * x * x + b * y * y + c * x * y;
            rows.extend_from_slice(&[x, y, z, -x, -y, z]);
        }
        let data = DataSet::new(DMatrix::from_row_slice(13, 3, &rows), None, "paraboloid").unwrap();
        let graph = knn_graph(&data, 12).unwrap();
        let frame = local_frame(&data, &graph, 0, 2).unwrap();
        let fit = quadratic_fit(&frame, FitOptions::default()).unwrap();
        // back to ambient xy coordinates, with the normal oriented along +z
        let sign = frame.normal[(2, 0)].signum();
        let tan = frame.tangent.rows(0, 2).into_owned();
        let h = &tan * &fit.hessians[0] * tan.transpose() * sign;
        let want = DMatrix::from_row_slice(2, 2, &[2.0 * a, c, c, 2.0 * b]);
        worst = worst.max((h - want).amax());
    }
    report(
        1,
        "Hessian oracle",
        worst <= 1e-6,
        t.elapsed(),
        Duration::from_secs(1),
        &format!("max |H - H*| = {worst:.3e} over 50 paraboloids (tol 1e-6)"),
    );
}

#[test]
fn criterion_2_sphere_curvature() {
    let t = Instant::now();
    let mut means = Vec::new();
    for radius in [1.0, 2.0] {
        let data = sphere(2000, radius, 11);
        let graph = knn_graph(&data, 10).unwrap();
        let field = curvature_field(&data, &graph, 2, FitOptions::default(), false).unwrap();
        means.push(field.mean());
    }
    let ok = (1.8..=2.2).contains(&means[0]) && (0.4..=0.6).contains(&means[1]);
    report(
        2,
        "sphere curvature",
        ok,
        t.elapsed(),
        Duration::from_secs(10),
        &format!("mean c: r=1 {:.4} (want [1.8, 2.2]), r=2 {:.4} (want [0.4, 0.6])", means[0], means[1]),
    );
}

#[test]
fn criterion_3_eigenvalue_ordering() {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for kind in ManifoldKind::BENCHMARKS {
        let data: DataSet64 = generate(&GenSpec::new(kind, 500, 0)).unwrap();
        let knn = knn_graph(&data, 10).unwrap();
        let sym = knn.symmetrize();
        let geometry = local_geometry(&data, &knn, 2, FitOptions::default()).unwrap();
        let lep = lep_weights(&data, &sym, Bandwidth::Auto).unwrap();
        let shared = Bandwidth::Fixed(lep.sigma.unwrap());
        let ca = ca_lep_weights(&data, &sym, &geometry, shared, Bandwidth::Auto, CurvatureMode::PointHessian).unwrap();
        let s_ca = laplacian_spectrum(&ca).unwrap();
        let s_lep = laplacian_spectrum(&lep).unwrap();
        let worst = s_ca.iter().zip(s_lep.iter()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        let e_ca = reconstruction_error_spectrum(&ca, 2).unwrap();
        let e_lep = reconstruction_error_spectrum(&lep, 2).unwrap();
        ok &= worst <= 1e-9 && e_ca <= e_lep;
        detail += &format!("{kind}: max(λ_CA - λ_LEP) = {worst:.2e}, Σλ {e_ca:.4} ≤ {e_lep:.4}; ");
    }
    report(3, "eigenvalue ordering", ok, t.elapsed(), Duration::from_secs(30), &detail);
}

#[test]
fn criterion_4_benchmark_npr_ordering() {
    let t = Instant::now();
    let cfg = PipelineConfig::<f64>::default();
    let algs = [Algorithm::Lep, Algorithm::CaLep, Algorithm::Lle, Algorithm::CaLle];
    let mut ok = true;
    let mut detail = String::new();
    for kind in [ManifoldKind::PuncturedSphere, ManifoldKind::TwinPeaks, ManifoldKind::SwissRoll] {
        let rep = k_sweep(&GenSpec::new(kind, 2000, 0), &algs, &[10], &SEEDS, &cfg).unwrap();
        let v = |a| rep.get(a, 10).unwrap();
        let (lep, ca_lep, lle, ca_lle) = (v(Algorithm::Lep), v(Algorithm::CaLep), v(Algorithm::Lle), v(Algorithm::CaLle));
        detail += &format!("{kind}: LEP {lep:.4} CA-LEP {ca_lep:.4} LLE {lle:.4} CA-LLE {ca_lle:.4}; ");
        match kind {
            ManifoldKind::SwissRoll => ok &= (ca_lle - lle).abs() <= 0.1,
            _ => {
                ok &= ca_lep - lep >= 0.02 && ca_lle - lle >= 0.02;
                if kind == ManifoldKind::PuncturedSphere {
                    ok &= (0.67..=0.87).contains(&ca_lep);
                }
            }
        }
    }
    report(4, "benchmark NPR ordering", ok, t.elapsed(), Duration::from_secs(300), &detail);
}

#[test]
fn criterion_5_k_stability() {
    let t = Instant::now();
    let ks: Vec<usize> = (1..=7).map(|i| 10 * i).collect();
    let rep = k_sweep(
        &GenSpec::new(ManifoldKind::TwinPeaks, 2000, 0),
        &[Algorithm::CaLep],
        &ks,
        &SEEDS,
        &PipelineConfig::<f64>::default(),
    )
    .unwrap();
    let row = &rep.rows[0];
    let curve: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
    report(
        5,
        "K stability",
        row[6] >= row[0] - 0.02,
        t.elapsed(),
        Duration::from_secs(600),
        &format!("CA-LEP NPR over K=10..70: [{}]", curve.join(", ")),
    );
}

fn brute_npr(x: &DMatrix<f64>, y: &DMatrix<f64>, k: usize) -> f64 {
    let n = x.nrows();
    let knn = |m: &DMatrix<f64>, i: usize| {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| ((m.row(i) - m.row(j)).norm_squared(), j))
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d.truncate(k);
        d.into_iter().map(|p| p.1).collect::<Vec<_>>()
    };
    let hits: usize = (0..n).map(|i| {
        let b = knn(y, i);
        knn(x, i).iter().filter(|j| b.contains(j)).count()
    }).sum();
    hits as f64 / (n * k) as f64
}

#[test]
fn criterion_6_npr_oracle() {
    let t = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut cases = 0;
    for _ in 0..20 {
        let x = DMatrix::from_fn(50, 3, |_, _| rng.random::<f64>());
        // half the cases embed by a noisy projection, half are unrelated
        let y = if cases % 2 == 0 {
            DMatrix::from_fn(50, 2, |i, c| x[(i, c)] + 0.05 * rng.random::<f64>())
        } else {
            DMatrix::from_fn(50, 2, |_, _| rng.random::<f64>())
        };
        let xs = DataSet::new(x.clone(), None, "x").unwrap();
        let ys = DataSet::new(y.clone(), None, "y").unwrap();
        for k in [1, 5, 10] {
            cases += 1;
            if npr(&xs, &ys, k).unwrap().value != brute_npr(&x, &y, k) {
                mismatches += 1;
            }
        }
    }
    report(
        6,
        "NPR oracle",
        mismatches == 0,
        t.elapsed(),
        Duration::from_secs(60),
        &format!("{mismatches} of {cases} (dataset, k) cases differ from the all-pairs oracle"),
    );
}

#[test]
fn criterion_7_invariant_suite() {
    let t = Instant::now();
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    for kind in ManifoldKind::BENCHMARKS {
        let data: DataSet64 = generate(&GenSpec::new(kind, 600, 7).with_noise(0.01)).unwrap();
        let knn = knn_graph(&data, 10).unwrap();
        let sym = knn.symmetrize();
        let geometry = local_geometry(&data, &knn, 2, FitOptions::default()).unwrap();

        let frames_ok = geometry.iter().all(|g| {
            let f = &g.frame;
            (f.tangent.tr_mul(&f.tangent) - DMatrix::identity(2, 2)).amax() < 1e-10
                && (f.normal.tr_mul(&f.normal) - DMatrix::identity(1, 1)).amax() < 1e-10
                && f.tangent.tr_mul(&f.normal).amax() < 1e-10
        });
        check(&format!("{kind}: frame orthonormality"), frames_ok);

        let lep = lep_weights(&data, &sym, Bandwidth::Auto).unwrap();
        let shared = Bandwidth::Fixed(lep.sigma.unwrap());
        let ca = ca_lep_weights(&data, &sym, &geometry, shared, Bandwidth::Auto, CurvatureMode::PointHessian).unwrap();
        let dominated = (0..data.len()).all(|i| ca.rows[i].iter().all(|&(j, w)| w <= lep.get(i, j)));
        check(&format!("{kind}: CA-LEP <= LEP"), dominated);

        let lle = lle_weights(&data, &knn, 1e-3).unwrap();
        let features = PatchFeatures::from_geometry(&geometry);
        let ca_lle = ca_lle_weights(&features, 1e-3).unwrap();
        let stochastic = |w: &WeightMatrix64| w.row_sums().iter().all(|s| (s - 1.0).abs() <= 1e-10);
        check(&format!("{kind}: LLE row sums"), stochastic(&lle));
        check(&format!("{kind}: CA-LLE row sums"), stochastic(&ca_lle));

        let objective_ok = (0..data.len()).all(|i| {
            let nb = &features.neighbors[i];
            let f = features.stacked(i);
            let w_ca = DVector::from_iterator(nb.len(), nb.iter().map(|&j| ca_lle.get(i, j)));
            let w_lle = DVector::from_iterator(nb.len(), nb.iter().map(|&j| lle.get(i, j)));
            let (a, b) = (affine_objective(&f, &w_ca, 1e-3), affine_objective(&f, &w_lle, 1e-3));
            a <= b * (1.0 + 1e-9) + 1e-15
        });
        check(&format!("{kind}: CA-LLE objective <= LLE objective"), objective_ok);

        let emb = laplacian_embedding(&ca, 2).unwrap();
        let dg = DMatrix::from_diagonal(&DVector::from_vec(ca.row_sums()));
        let gram = emb.y.transpose() * dg * &emb.y;
        check(&format!("{kind}: YᵀDgY = I"), (gram - DMatrix::identity(2, 2)).amax() <= 1e-8);
        let emb = lle_embedding(&ca_lle, 2).unwrap();
        let gram = emb.y.transpose() * &emb.y;
        let centered = emb.y.column_iter().all(|c| c.sum().abs() <= 1e-8);
        check(&format!("{kind}: YᵀY = I, Y'1 = 0"), (gram - DMatrix::identity(2, 2)).amax() <= 1e-8 && centered);

        let y = emb.as_dataset(None).unwrap();
        for k in [1, 10, 30] {
            let r = npr(&data, &y, k).unwrap();
            check(&format!("{kind}: NPR in [0, 1]"), (0.0..=1.0).contains(&r.value));
            check(&format!("{kind}: NPR(X, X) = 1"), npr(&data, &data, k).unwrap().value == 1.0);
        }

        let again: DataSet64 = generate(&GenSpec::new(kind, 600, 7).with_noise(0.01)).unwrap();
        check(&format!("{kind}: generator determinism"), again.points == data.points);
    }
    report(
        7,
        "invariant suite",
        failures.is_empty(),
        t.elapsed(),
        Duration::from_secs(60),
        &if failures.is_empty() { "all invariants hold on 4 datasets".to_string() } else { failures.join("; ") },
    );
}

#[test]
fn criterion_8_reduction_to_baseline() {
    let t = Instant::now();
    let mut worst_lep = 0.0f64;
    let mut worst_lle = 0.0f64;
    for kind in ManifoldKind::BENCHMARKS {
        let data: DataSet64 = generate(&GenSpec::new(kind, 400, 8)).unwrap();
        let knn = knn_graph(&data, 10).unwrap();
        let sym = knn.symmetrize();
        let flat: Vec<LocalGeometry<f64>> = local_geometry(&data, &knn, 2, FitOptions::default())
            .unwrap()
            .into_iter()
            .map(|g| LocalGeometry { fit: g.fit.zeroed(), frame: g.frame })
            .collect();
        let lep = lep_weights(&data, &sym, Bandwidth::Auto).unwrap();
        let ca = ca_lep_weights(&data, &sym, &flat, Bandwidth::Fixed(lep.sigma.unwrap()), Bandwidth::Auto, CurvatureMode::PointHessian)
            .unwrap();
        worst_lep = worst_lep.max((ca.to_dense() - lep.to_dense()).amax());
        let features = PatchFeatures::from_geometry(&flat);
        let ca_lle = ca_lle_weights(&features, 1e-3).unwrap();
        let tangent = tangent_lle_weights(&features, 1e-3).unwrap();
        worst_lle = worst_lle.max((ca_lle.to_dense() - tangent.to_dense()).amax());
    }
    report(
        8,
        "reduction to baseline",
        worst_lep <= 1e-12 && worst_lle <= 1e-12,
        t.elapsed(),
        Duration::from_secs(60),
        &format!("max |CA-LEP - LEP| = {worst_lep:.1e}, max |CA-LLE - tangent LLE| = {worst_lle:.1e} (tol 1e-12)"),
    );
}
