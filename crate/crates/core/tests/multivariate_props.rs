#[path = "support/oracles.rs"]
mod oracles;

use inclusiveness::multivariate::{
    bartlett, build_index, construct_index, kaiser_count, kmo, pca_fit, scores, varimax, variance_table, IndexOptions,
    Retention, Weighting,
};
use inclusiveness::numerics::{correlation_of_complete, SymMatrix};
use inclusiveness::synth::{simulate_panel, CovariateMode, DgpSpec};
use nalgebra::DMatrix;
use oracles::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn to_mat(m: &DMatrix<f64>) -> Mat {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn standardize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    for mut c in m.column_iter_mut() {
        let mean = c.sum() / n;
        c.add_scalar_mut(-mean);
        let sd = (c.norm_squared() / (n - 1.0)).sqrt();
        c /= sd;
    }
    m
}

/// Correlated data: two latent factors plus noise.
fn factor_data(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    let w: Vec<(f64, f64)> = (0..p).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mut d = DMatrix::zeros(n, p);
    for i in 0..n {
        let f1: f64 = StandardNormal.sample(rng);
        let f2: f64 = StandardNormal.sample(rng);
        for j in 0..p {
            let e: f64 = StandardNormal.sample(rng);
            d[(i, j)] = w[j].0 * f1 + w[j].1 * f2 + e;
        }
    }
    standardize(d)
}

fn syms(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("V{j}")).collect()
}

fn random_correlation(rng: &mut ChaCha8Rng, p: usize) -> SymMatrix {
    correlation_of_complete(&factor_data(rng, 60, p)).unwrap()
}

#[test]
fn kmo_matches_textbook_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let r = random_correlation(&mut rng, 5);
        let got = kmo(&r, None).unwrap();
        let (overall, msa) = oracles::kmo_textbook(&to_mat(r.as_matrix()));
        assert!((got.overall - overall).abs() < 1e-10);
        for (a, b) in got.per_variable_msa.iter().zip(&msa) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((0.0..=1.0).contains(&got.overall));
    }
}

#[test]
fn bartlett_matches_hand_formula_with_lu_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let r = random_correlation(&mut rng, 6);
    let b = bartlett(&r, 60).unwrap();
    let det = oracles::lu_det(&to_mat(r.as_matrix()));
    let expect = -(60.0 - 1.0 - 17.0 / 6.0) * det.ln();
    assert!((b.chi_square - expect).abs() < 1e-9 * expect);
    assert_eq!(b.df, 15);
    assert!((b.p_value - oracles::chi2_sf_quadrature(b.chi_square, 15)).abs() < 1e-7);
}

#[test]
fn varimax_properties_on_random_loadings() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..100 {
        let m = 2 + case % 3;
        let p = rng.random_range(m + 1..=10);
        let l = DMatrix::from_fn(p, m, |_, _| rng.random_range(-1.0..1.0));
        let v = varimax(&l).unwrap();
        let before = oracles::varimax_objective(&to_mat(&l));
        let after = oracles::varimax_objective(&to_mat(&v.loadings));
        assert!(after >= before - 1e-12, "case {case}: {before} -> {after}");
        let qtq = v.rotation.transpose() * &v.rotation;
        assert!((qtq - DMatrix::identity(m, m)).abs().max() < 1e-10);
        for i in 0..p {
            let h0 = l.row(i).norm_squared();
            let h1 = v.loadings.row(i).norm_squared();
            assert!((h0 - h1).abs() < 1e-10);
        }
        assert!(((&l * &v.rotation) - &v.loadings).abs().max() < 1e-10);
    }
}

#[test]
fn full_reconstruction_of_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let data = factor_data(&mut rng, 200, 7);
    let model = pca_fit(&data, &syms(7), Retention::TopK(7)).unwrap();
    let recon = &model.loadings * model.loadings.transpose();
    assert!((recon - model.correlation.as_matrix()).abs().max() < 1e-8);
    assert!(model.communalities().iter().all(|h| (h - 1.0).abs() < 1e-8));
    let total: f64 = model.variance_table.iter().map(|r| r.pct_of_variance).sum();
    assert!((total - 100.0).abs() < 1e-6);
    assert!(model.variance_table.windows(2).all(|w| w[1].cumulative_pct >= w[0].cumulative_pct));
}

#[test]
fn score_variance_tracks_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let data = factor_data(&mut rng, 500, 6);
    let model = pca_fit(&data, &syms(6), Retention::TopK(3)).unwrap();
    let s = scores(&model, &data, false).unwrap();
    for k in 0..3 {
        let col: Vec<f64> = s.column(k).iter().copied().collect();
        let var = oracles::sample_variance(&col);
        assert!((var / model.eigen.values[k] - 1.0).abs() < 0.02);
    }
}

#[test]
fn index_cells_present_iff_all_inputs_present() {
    let spec = DgpSpec {
        n_countries: 20,
        n_years: 15,
        beta: vec![],
        gamma: vec![],
        n_covariates: 6,
        covariates: CovariateMode::FactorStructure { k_factors: 2, loadings_scale: 2.0 },
        missing_fraction: 0.03,
        ..DgpSpec::default()
    };
    let sim = simulate_panel(&spec).unwrap();
    let vars = spec.covariate_symbols();
    let mut opts = IndexOptions::new(vars.clone());
    opts.anchor = Some("X1".into());
    let built = construct_index(&sim.panel, &opts).unwrap();
    let cols: Vec<&[Option<f64>]> = vars.iter().map(|v| sim.panel.column(v).unwrap()).collect();
    for (cell, v) in built.series.values.iter().enumerate() {
        let all = cols.iter().all(|c| c[cell].is_some());
        assert_eq!(v.is_some(), all, "cell {cell}");
    }
    let w: f64 = built.series.metadata.weights.iter().sum();
    assert!((w - 1.0).abs() < 1e-12);
    let pairs: Vec<(f64, f64)> = built
        .series
        .values
        .iter()
        .zip(cols[0])
        .filter_map(|(v, a)| Some((*v.as_ref()?, *a.as_ref()?)))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let oriented = oracles::pearson(&xs, &ys);
    assert!(oriented > 0.0);
    let before = built.series.metadata.anchor_correlation.unwrap();
    assert!((oriented - before.abs()).abs() < 1e-12);
    assert_eq!(built.series.metadata.negated, before < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kaiser_counts_eigenvalues_above_one(vals in prop::collection::vec(0.0f64..3.0, 1..20), at_one in 0usize..3) {
        let mut v = vals;
        for _ in 0..at_one {
            v.push(1.0);
        }
        v.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(kaiser_count(&v), v.iter().filter(|&&l| l > 1.0).count());
        let t = variance_table(&v, v.len() as f64);
        prop_assert!(t.windows(2).all(|w| w[1].cumulative_pct >= w[0].cumulative_pct));
    }

    #[test]
    fn adequacy_is_permutation_invariant(seed in any::<u64>(), p in 3usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_correlation(&mut rng, p);
        let mut perm: Vec<usize> = (0..p).collect();
        for i in (1..p).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let rp = r.permuted(&perm);
        let (k0, k1) = (kmo(&r, None).unwrap(), kmo(&rp, None).unwrap());
        prop_assert!((k0.overall - k1.overall).abs() < 1e-12);
        for (i, &src) in perm.iter().enumerate() {
            prop_assert!((k1.per_variable_msa[i] - k0.per_variable_msa[src]).abs() < 1e-12);
        }
        let (b0, b1) = (bartlett(&r, 60).unwrap(), bartlett(&rp, 60).unwrap());
        prop_assert!((b0.chi_square - b1.chi_square).abs() < 1e-9 * b0.chi_square.max(1.0));
    }

    #[test]
    fn index_ignores_component_order(seed in any::<u64>(), weighting in prop_oneof![Just(Weighting::VarianceShare), Just(Weighting::Equal)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = factor_data(&mut rng, 80, 6);
        let model = pca_fit(&data, &syms(6), Retention::TopK(3)).unwrap();
        let s = scores(&model, &data, false).unwrap();
        let (base, _) = build_index(&s, &model, weighting, false).unwrap();

        let perm = [2usize, 0, 1];
        let mut shuffled = model.clone();
        for (dst, &src) in perm.iter().enumerate() {
            shuffled.eigen.values[dst] = model.eigen.values[src];
            shuffled.eigen.vectors.set_column(dst, &model.eigen.vectors.column(src));
            shuffled.loadings.set_column(dst, &model.loadings.column(src));
        }
        let sp = DMatrix::from_fn(s.nrows(), 3, |i, j| s[(i, perm[j])]);
        let (moved, _) = build_index(&sp, &shuffled, weighting, false).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
