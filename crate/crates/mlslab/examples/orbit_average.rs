//! Equidistribution of closed geodesics: length-weighted orbit averages of
//! an observable converge to its Liouville average as the length cutoff
//! grows.

use mlslab::experiments::parry_average;
use mlslab::models::FuchsianModel;
use mlslab::tensors::{Field, HyperbolicField};
use num_complex::Complex64;

fn main() {
    let model = FuchsianModel::bolza().unwrap();

    // the constant observable is reproduced exactly at every cutoff
    let r = parry_average(&model, None, &[4.0, 6.0], 8).unwrap();
    println!("constant observable:");
    for line in r.csv.lines().skip(1) {
        println!("  {line}");
    }

    // a centered bump equidistributes with the expected slow decay
    let bump = HyperbolicField::scalar_bump(&model, Complex64::new(0.0, 0.0), 0.8, 0.5);
    let r = parry_average(&model, Some(&Field::Hyperbolic(bump)), &[4.0, 6.0, 8.0], 8).unwrap();
    println!("\ncentered bump (T, classes, average, liouville, error):");
    for line in r.csv.lines().skip(1) {
        println!("  {line}");
    }
}
