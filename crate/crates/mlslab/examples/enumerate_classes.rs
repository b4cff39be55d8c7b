//! Free-homotopy classes and their background geodesic lengths on both
//! models: integer pairs on the flat torus, cyclic words on the Bolza
//! surface.

use mlslab::models::{FuchsianModel, SurfaceModel, TorusModel};

fn main() {
    let torus = SurfaceModel::Torus(TorusModel::new(1.3, 0.2, 0.9).unwrap());
    println!("torus (g11=1.3, g12=0.2, g22=0.9), classes with max(|p|,|q|) <= 2:");
    for c in torus.enumerate_classes(2).unwrap() {
        println!("  ({})  L0 = {:.12}", c.id(), torus.background_length(&c).unwrap());
    }

    let bolza = SurfaceModel::Bolza(FuchsianModel::bolza().unwrap());
    println!("\nBolza surface, classes with word length <= 2:");
    for c in bolza.enumerate_classes(2).unwrap() {
        println!("  {:6} L0 = {:.12}", c.id(), bolza.background_length(&c).unwrap());
    }
    println!("\nthe systole 2 arccosh(1 + sqrt 2) = {:.12}", 2.0 * (1.0 + 2f64.sqrt()).acosh());
}
