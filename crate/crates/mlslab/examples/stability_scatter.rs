//! Stability-estimate ensemble on the flat torus: for random solenoidal
//! fields, compare the weak Sobolev norm of the perturbation against the
//! interpolation bound built from sup-norm and Holder data, and fit the
//! constant.

use mlslab::experiments::{stability_probe, ExperimentConfig};
use mlslab::models::TorusModel;

fn main() {
    let cfg = ExperimentConfig {
        ensemble_size: 20,
        bound: 6,
        k_max: 6,
        ..ExperimentConfig::default()
    };
    let r = stability_probe(&TorusModel::square(), &cfg).unwrap();

    for a in &r.assertions {
        println!(
            "{}: {} (value {:.4e}, tolerance {:.1e})",
            a.name,
            if a.pass { "ok" } else { "violated" },
            a.value,
            a.tolerance
        );
    }
    println!("\nscatter data (seed, lhs, linf, holder, rhs):");
    for line in r.csv.lines().skip(1).take(8) {
        println!("  {line}");
    }
    println!("  ...");
}
