//! The Bolza surface as a Fuchsian group: relator residual, generator
//! traces, the systole, and ball enumeration of conjugacy classes by
//! geodesic length.

use mlslab::homotopy::{canonicalize, RELATOR};
use mlslab::models::FuchsianModel;

fn main() {
    let model = FuchsianModel::bolza().unwrap();
    println!("relator residual |rho([a,b][c,d]) - id| = {:.3e}", model.rho(&RELATOR).dist_to_identity());

    println!("\ngenerator traces and translation lengths:");
    for (name, l) in [("a", 0u8), ("b", 2), ("c", 4), ("d", 6)] {
        let w = canonicalize(&[l]).unwrap();
        println!(
            "  {name}: |tr| = {:.9}, length = {:.12}",
            model.rho(w.letters()).trace().abs(),
            model.length(&w).unwrap()
        );
    }
    println!("systole 2 arccosh(1 + sqrt 2)  = {:.12}", 2.0 * (1.0 + 2f64.sqrt()).acosh());

    println!("\nclasses with geodesic length <= T (word length <= 10):");
    for t in [3.0, 4.0, 5.0, 6.0, 7.0] {
        let classes = model.classes_up_to_length(t, 10, 2.0).unwrap();
        let shortest = classes
            .iter()
            .map(|(_, l)| *l)
            .fold(f64::INFINITY, f64::min);
        println!("  T = {t}: {:5} classes, shortest {shortest:.6}", classes.len());
    }
}
