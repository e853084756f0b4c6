//! Data-generating processes shared by the simulation tests.

#![allow(dead_code)]

use inclusiveness::econometrics::{
    build_design, build_instruments, gmm_two_step, Design, Effects, GmmEstimate, GmmModelSpec, InstrumentRecipe,
    Instruments,
};
use inclusiveness::synth::{simulate_panel, DgpSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const IV_BETA: f64 = 0.5;
pub const IV_INTERCEPT: f64 = 1.0;

fn n01(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Cross-section IV problem: y = 1 + 0.5·x + u with x endogenous through a
/// shared shock. X = [1, x]; Z = [1, z1, z2] (one over-identifying restriction).
/// With `invalid > 0`, the second instrument is contaminated by `invalid · u`.
pub struct IvSample {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

pub fn iv_sample(rng: &mut ChaCha8Rng, n: usize, invalid: f64) -> IvSample {
    let mut y = DVector::zeros(n);
    let mut x = DMatrix::zeros(n, 2);
    let mut z = DMatrix::zeros(n, 3);
    for i in 0..n {
        let (z1, z2, v, e) = (n01(rng), n01(rng), n01(rng), n01(rng));
        let u = 0.5 * v + 0.75f64.sqrt() * e;
        let xi = 0.6 * z1 + 0.6 * z2 + v;
        y[i] = IV_INTERCEPT + IV_BETA * xi + u;
        x[(i, 0)] = 1.0;
        x[(i, 1)] = xi;
        z[(i, 0)] = 1.0;
        z[(i, 1)] = z1;
        z[(i, 2)] = z2 + invalid * u;
    }
    IvSample { y, x, z }
}

pub fn fit_iv(s: &IvSample) -> GmmEstimate {
    let design = Design::from_arrays(s.y.clone(), s.x.clone(), None);
    let inst = Instruments::from_matrix(s.z.clone(), &design);
    gmm_two_step(&design, &inst).expect("iv estimate")
}

pub fn ols_slope(s: &IvSample) -> f64 {
    let xtx = s.x.transpose() * &s.x;
    let xty = s.x.transpose() * &s.y;
    xtx.lu().solve(&xty).expect("ols")[1]
}

pub const DYN_RHO: f64 = 0.8;
pub const DYN_BETA: [f64; 2] = [0.5, -0.3];

pub fn dynamic_spec(seed: u64, n_countries: usize, n_years: usize, rho: f64) -> DgpSpec {
    DgpSpec {
        n_countries,
        n_years,
        rho,
        beta: DYN_BETA.to_vec(),
        gamma: vec![],
        n_covariates: 2,
        sigma_mu: 0.2,
        sigma_t: 0.2,
        sigma_eps: 1.0,
        seed,
        ..DgpSpec::default()
    }
}

pub fn dynamic_model() -> GmmModelSpec {
    let mut spec = GmmModelSpec::new("Y", true);
    spec.controls = vec!["X1".into(), "X2".into()];
    spec.effects = Effects::FirstDifferencePlusTime;
    spec.instruments = InstrumentRecipe::default_for("Y");
    spec
}

/// First-difference GMM with collapsed lag-2..3 instruments on one simulated panel.
pub fn dynamic_fit(rng: &mut ChaCha8Rng, n_countries: usize, n_years: usize, rho: f64) -> GmmEstimate {
    let sim = simulate_panel(&dynamic_spec(rng.random(), n_countries, n_years, rho)).expect("simulate");
    let model = dynamic_model();
    let design = build_design(&sim.panel, &model).expect("design");
    let inst = build_instruments(&sim.panel, &model, &design).expect("instruments");
    gmm_two_step(&design, &inst).expect("estimate")
}
