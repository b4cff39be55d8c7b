//! Pulling the background metric back by a diffeomorphism moves it visibly
//! in C^0 but leaves every geodesic length unchanged: the marked length
//! spectrum only sees the metric up to gauge.

use mlslab::experiments::GaugeMap;
use mlslab::homotopy::{enumerate_torus_classes, ConjugacyClass};
use mlslab::models::{SurfaceModel, TorusModel};
use mlslab::solver::{spectrum_batch, SolveOptions};
use mlslab::tensors::{Field, TorusField};

fn main() {
    let model = TorusModel::square();
    let surface = SurfaceModel::Torus(model.clone());

    // phi = time-1 flow of a small random vector field
    let mut v = TorusField::random(17, 1, 4);
    v.scale(5e-3 / v.c0_surrogate(64));
    let mut phi = GaugeMap::identity();
    phi.push(v);
    let h = phi.pullback_difference(&model.gram, None, 12);
    println!("||phi* g0 - g0||_C0 = {:.4e}", h.c0_surrogate(64));

    let classes: Vec<ConjugacyClass> = enumerate_torus_classes(3)
        .into_iter()
        .map(ConjugacyClass::Torus)
        .collect();
    let recs = spectrum_batch(
        &surface,
        Some(&Field::Torus(h)),
        &classes,
        &SolveOptions::default(),
    );
    let mut worst = 0.0f64;
    for r in &recs {
        worst = worst.max((r.ratio - 1.0).abs());
    }
    println!("max |L(phi* g0)/L(g0) - 1| over {} classes = {:.3e}", classes.len(), worst);
}
