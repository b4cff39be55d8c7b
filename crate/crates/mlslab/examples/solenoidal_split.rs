//! Decompose a symmetric 2-tensor field into its divergence-free part plus a
//! potential, f = f^s + Dp, and verify the defining residuals.

use mlslab::models::TorusModel;
use mlslab::tensors::TorusField;

fn main() {
    let gram = TorusModel::new(1.3, 0.2, 0.9).unwrap().gram;
    let f = TorusField::random(42, 2, 8);
    let (fs, p) = f.solenoidal_project(&gram).unwrap();

    let mut recon = f.clone();
    recon.add_scaled(&fs, -1.0);
    recon.add_scaled(&p.symmetric_derivative(), -1.0);

    println!("||f||_L2            = {:.6}", f.l2_norm(&gram));
    println!("||f^s||_L2          = {:.6}", fs.l2_norm(&gram));
    println!("||Dp||_L2           = {:.6}", p.symmetric_derivative().l2_norm(&gram));
    println!("||f - f^s - Dp||_L2 = {:.3e}", recon.l2_norm(&gram));
    println!("||D* f^s||_L2       = {:.3e}", fs.divergence(&gram).unwrap().l2_norm(&gram));

    // iterative solve agrees with the direct one
    let (fs_cg, _) = f.solenoidal_project_cg(&gram, 1e-12, 2000).unwrap();
    let mut gap = fs_cg.clone();
    gap.add_scaled(&fs, -1.0);
    println!("direct vs cg        = {:.3e}", gap.l2_norm(&gram));
}
