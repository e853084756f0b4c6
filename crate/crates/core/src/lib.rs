//! Composite inclusiveness index construction (principal components on a
//! country-year indicator panel) and its dynamic-panel GMM analysis.

pub mod econometrics;
pub mod multivariate;
pub mod numerics;
pub mod paneldata;
pub mod parallel;
pub mod synth;
