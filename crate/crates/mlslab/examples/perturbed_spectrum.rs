//! Marked length spectrum of a perturbed flat metric: solve the closed
//! geodesic in every class up to a bound and print L_g / L_{g0}.
//!
//! The perturbation (1+eps) dx^2 has the closed form
//! L((p,q)) = sqrt((1+eps) p^2 + q^2), printed alongside for comparison.

use mlslab::homotopy::{enumerate_torus_classes, ConjugacyClass};
use mlslab::models::{SurfaceModel, TorusModel};
use mlslab::solver::{spectrum_batch, SolveOptions};
use mlslab::tensors::{Field, TorusField};
use num_complex::Complex64;

fn main() {
    let eps = 0.1;
    let model = SurfaceModel::Torus(TorusModel::square());
    let mut f = TorusField::zero(2, 1);
    f.set_coeff(0, 0, 0, Complex64::new(eps, 0.0));

    let classes: Vec<ConjugacyClass> = enumerate_torus_classes(3)
        .into_iter()
        .map(ConjugacyClass::Torus)
        .collect();
    let recs = spectrum_batch(
        &model,
        Some(&Field::Torus(f)),
        &classes,
        &SolveOptions::default(),
    );

    println!("{:>6} {:>18} {:>18} {:>12}", "class", "solved L", "exact L", "rel err");
    for (r, c) in recs.iter().zip(&classes) {
        let ConjugacyClass::Torus(tc) = c else { unreachable!() };
        let (p, q) = (tc.p as f64, tc.q as f64);
        let exact = ((1.0 + eps) * p * p + q * q).sqrt();
        println!(
            "{:>6} {:>18.12} {:>18.12} {:>12.2e}",
            r.class_id,
            r.length,
            exact,
            (r.length - exact).abs() / exact
        );
    }
}
