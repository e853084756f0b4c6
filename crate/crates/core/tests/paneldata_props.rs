use inclusiveness::paneldata::{
    lag, load_panel_csv, read_panel_csv, shift_log, write_panel_csv, zscore, PanelDataset, VariableDef, DEFAULT_SHIFT,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn panel_strategy() -> impl Strategy<Value = PanelDataset> {
    (1usize..5, 2usize..7, 1usize..4).prop_flat_map(|(n_c, n_t, n_v)| {
        let cell = prop_oneof![1 => Just(None), 4 => any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(Some)];
        prop::collection::vec(prop::collection::vec(cell, n_c * n_t), n_v).prop_map(move |columns| {
            PanelDataset::new(
                (0..n_c).map(|c| format!("K{c}")).collect(),
                1995,
                n_t,
                (0..n_v).map(|v| VariableDef::new(format!("V{v}"))).collect(),
                columns,
            )
            .unwrap()
        })
    })
}

fn normal_panel(seed: u64, n_c: usize, n_t: usize) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let col: Vec<Option<f64>> = (0..n_c * n_t).map(|_| Some(StandardNormal.sample(&mut rng))).collect();
    PanelDataset::new((0..n_c).map(|c| format!("K{c:02}")).collect(), 2000, n_t, vec![VariableDef::new("X")], vec![col])
        .unwrap()
}

fn values(ds: &PanelDataset, sym: &str) -> Vec<f64> {
    ds.column(sym).unwrap().iter().flatten().copied().collect()
}

#[test]
fn zero_maps_to_ln_four() {
    let ds = PanelDataset::new(vec!["A".into()], 2000, 1, vec![VariableDef::new("X")], vec![vec![Some(0.0)]]).unwrap();
    let out = shift_log(&ds, &["X".into()], DEFAULT_SHIFT).unwrap();
    assert!((out.column("X").unwrap()[0].unwrap() - 4f64.ln()).abs() < 1e-12);
}

#[test]
fn sign_of_shifted_log_follows_minus_three() {
    // ln(z + 4) > 0 exactly when z > −3; Gaussian tails put ~0.13% of draws below that
    let z = zscore(&normal_panel(77, 100, 100), &["X".into()]).unwrap();
    let defined: Vec<Option<f64>> = z.column("X").unwrap().iter().map(|v| v.filter(|x| *x > -4.0)).collect();
    let z = z.with_column("X", defined).unwrap();
    let zs = values(&z, "X");
    let out = values(&shift_log(&z, &["X".into()], DEFAULT_SHIFT).unwrap(), "X");
    assert!(out.len() > 9_990);
    for (x, y) in zs.iter().zip(&out) {
        assert_eq!(*y > 0.0, *x > -3.0);
    }
}

#[test]
fn pooled_mean_after_shift_log_is_near_ln_four() {
    // E[ln(4 + Z)] ≈ ln 4 − 1/32 for unit-variance data, within the 0.05 band
    let z = zscore(&normal_panel(78, 32, 22), &["X".into()]).unwrap();
    let v = values(&shift_log(&z, &["X".into()], DEFAULT_SHIFT).unwrap(), "X");
    let m = v.iter().sum::<f64>() / v.len() as f64;
    assert!((m - 4f64.ln()).abs() < 0.05, "{m}");
}

#[test]
fn file_round_trip() {
    let ds = normal_panel(3, 4, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    write_panel_csv(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_panel_csv(&path, ds.variables()).unwrap();
    assert_eq!(back.column("X").unwrap(), ds.column("X").unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(ds in panel_strategy()) {
        let mut buf = Vec::new();
        write_panel_csv(&ds, &mut buf).unwrap();
        let back = read_panel_csv(buf.as_slice(), ds.variables()).unwrap();
        prop_assert_eq!(back.countries(), ds.countries());
        prop_assert_eq!(back.years(), ds.years());
        for sym in ds.symbols() {
            let a = ds.column(sym).unwrap();
            let b = back.column(sym).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(x.map(f64::to_bits), y.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn zscore_is_idempotent(seed in any::<u64>(), n_c in 2usize..8, n_t in 2usize..10, scale in 0.01f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let col: Vec<Option<f64>> = (0..n_c * n_t)
            .map(|_| if rng.random_bool(0.15) { None } else { Some(scale * rng.random_range(-1.0..1.0) + 7.0) })
            .collect();
        prop_assume!(col.iter().flatten().count() >= 3);
        let ds = PanelDataset::new((0..n_c).map(|c| format!("K{c}")).collect(), 2000, n_t, vec![VariableDef::new("X")], vec![col]).unwrap();
        let vars = ["X".to_string()];
        let Ok(once) = zscore(&ds, &vars) else { return Ok(()) };
        let twice = zscore(&once, &vars).unwrap();
        let (a, b) = (once.column("X").unwrap(), twice.column("X").unwrap());
        for (x, y) in a.iter().zip(b) {
            prop_assert_eq!(x.is_some(), y.is_some());
            if let (Some(x), Some(y)) = (x, y) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
        prop_assert_eq!(ds.missing_mask("X").unwrap(), once.missing_mask("X").unwrap());
    }

    #[test]
    fn shift_log_is_strictly_monotone(mut xs in prop::collection::vec(-3.9f64..50.0, 2..30)) {
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let n = xs.len();
        let ds = PanelDataset::new(vec!["A".into()], 2000, n, vec![VariableDef::new("X")], vec![xs.iter().map(|x| Some(*x)).collect()]).unwrap();
        let out = values(&shift_log(&ds, &["X".into()], 4.0).unwrap(), "X");
        prop_assert!(out.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn lag_leaves_existing_variables_untouched(ds in panel_strategy(), k in 1usize..3) {
        prop_assume!(k < ds.n_years());
        let out = lag(&ds, "V0", k).unwrap();
        for sym in ds.symbols() {
            let a: Vec<Option<u64>> = ds.column(sym).unwrap().iter().map(|v| v.map(f64::to_bits)).collect();
            let b: Vec<Option<u64>> = out.column(sym).unwrap().iter().map(|v| v.map(f64::to_bits)).collect();
            prop_assert_eq!(a, b);
        }
        let lagged = format!("V0_L{}", k);
        prop_assert!(out.has_variable(&lagged));
    }
}
