//! The X-ray transform I_m along closed geodesics and its kernel: potential
//! tensors Dp integrate to zero in every class, while the transform of the
//! perturbation itself gives the derivative of the length spectrum.

use mlslab::homotopy::{enumerate_torus_classes, ConjugacyClass};
use mlslab::models::{SurfaceModel, TorusModel};
use mlslab::tensors::{Field, TorusField};
use mlslab::xray::xray_batch;

fn main() {
    let model = SurfaceModel::Torus(TorusModel::square());
    let classes: Vec<ConjugacyClass> = enumerate_torus_classes(6)
        .into_iter()
        .map(ConjugacyClass::Torus)
        .collect();

    // symmetric derivative of a random one-form: a degree-2 potential
    let p = TorusField::random(7, 1, 5);
    let dp = p.symmetric_derivative();
    let (_, sup) = xray_batch(&model, &Field::Torus(dp), &classes).unwrap();
    println!("sup over {} classes of |I_2(Dp)| = {sup:.3e}  (kernel)", classes.len());

    // a generic field is visible
    let f = TorusField::random(8, 2, 5);
    let (recs, sup) = xray_batch(&model, &Field::Torus(f), &classes).unwrap();
    println!("sup |I_2(f)| = {sup:.3e}  (generic field)");
    println!("\nfirst few values:");
    for r in recs.iter().take(6) {
        println!("  ({:5})  I_2 f = {:+.12e}", r.class_id, r.value);
    }
}
