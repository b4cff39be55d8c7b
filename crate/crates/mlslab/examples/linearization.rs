//! The length spectrum is differentiable at the background metric with
//! derivative half the X-ray transform: the remainder
//! R(t) = sup_c |L(g0 + t f)(c) - 1 - (t/2) I_2 f(c)| decays like t^2.

use mlslab::experiments::linearization_check;
use mlslab::homotopy::{enumerate_torus_classes, ConjugacyClass};
use mlslab::models::{SurfaceModel, TorusModel};
use mlslab::solver::SolveOptions;
use mlslab::tensors::{Field, TorusField};

fn main() {
    let model = SurfaceModel::Torus(TorusModel::square());
    let mut f = TorusField::random(3, 2, 4);
    f.scale(1.0 / f.c0_surrogate(64));

    let classes: Vec<ConjugacyClass> = enumerate_torus_classes(4)
        .into_iter()
        .map(ConjugacyClass::Torus)
        .collect();
    let r = linearization_check(
        &model,
        &Field::Torus(f),
        &[1e-2, 5e-3, 2.5e-3],
        &classes,
        &SolveOptions::default(),
    )
    .unwrap();

    println!("t, sup remainder, remainder / t^2:");
    for line in r.csv.lines().skip(1) {
        println!("  {line}");
    }
    for a in &r.assertions {
        println!("{}: {} (value {:.3e})", a.name, if a.pass { "ok" } else { "violated" }, a.value);
    }
}
