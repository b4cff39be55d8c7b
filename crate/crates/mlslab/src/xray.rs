//! Length-normalized X-ray transforms I_m along background closed geodesics.
//! Torus values are evaluated exactly per Fourier mode; hyperbolic values use
//! adaptive Simpson quadrature along the axis.

use crate::error::{Error, Result};
use crate::homotopy::ConjugacyClass;
use crate::models::SurfaceModel;
use crate::tensors::{binom, Field};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct XrayRecord {
    pub class_id: String,
    pub background_length: f64,
    pub value: f64,
    pub quad_error_estimate: f64,
}

/// I_m f(c) = (1/L_{g0}(c)) * integral of the pullback of f along the
/// background geodesic of c.
pub fn xray_tensor(model: &SurfaceModel, f: &Field, c: &ConjugacyClass) -> Result<XrayRecord> {
    match (model, f, c) {
        (SurfaceModel::Torus(t), Field::Torus(tf), ConjugacyClass::Torus(tc)) => {
            let len = t.length(tc)?;
            let v = [tc.p as f64 / len, tc.q as f64 / len];
            // only frequencies orthogonal to (p,q) survive the average of
            // e^{2 pi i (k.v) t} over a full period
            let m = tf.degree;
            let mut value = 0.0;
            for (k1, k2) in tf.frequencies() {
                if k1 * tc.p + k2 * tc.q != 0 {
                    continue;
                }
                for alpha in 0..=m {
                    value += binom(m, alpha)
                        * v[0].powi((m - alpha) as i32)
                        * v[1].powi(alpha as i32)
                        * tf.coeff(alpha, k1, k2).re;
                }
            }
            Ok(XrayRecord {
                class_id: c.id(),
                background_length: len,
                value,
                quad_error_estimate: 0.0,
            })
        }
        (SurfaceModel::Bolza(_), Field::Hyperbolic(_), ConjugacyClass::Surface(_)) => {
            let geo = model.background_geodesic(c)?;
            let len = geo.length;
            let eval = |t: f64| -> Result<f64> {
                let p = geo.point_at(model, t)?;
                f.pullback(&p)
            };
            let (integral, err) = adaptive_simpson(&eval, 0.0, len, 1e-10 * len.max(1.0))?;
            Ok(XrayRecord {
                class_id: c.id(),
                background_length: len,
                value: integral / len,
                quad_error_estimate: err / len,
            })
        }
        _ => Err(Error::Config(
            "model, field, and class kinds do not match".to_string(),
        )),
    }
}

/// All records plus the sup of |value|, in input class order.
pub fn xray_batch(
    model: &SurfaceModel,
    f: &Field,
    classes: &[ConjugacyClass],
) -> Result<(Vec<XrayRecord>, f64)> {
    let records: Vec<XrayRecord> = classes
        .par_iter()
        .map(|c| xray_tensor(model, f, c))
        .collect::<Result<Vec<_>>>()?;
    let sup = records.iter().fold(0.0f64, |m, r| m.max(r.value.abs()));
    Ok((records, sup))
}

/// Composite adaptive Simpson quadrature: a fixed base grid (so narrow bumps
/// are not missed) refined recursively. Returns (integral, error estimate).
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let panels = 16.max(4 * (b - a).ceil() as usize);
    let mut total = 0.0;
    let mut err = 0.0;
    let h = (b - a) / panels as f64;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let fx0 = f(x0)?;
        let fm = f(0.5 * (x0 + x1))?;
        let fx1 = f(x1)?;
        let whole = h / 6.0 * (fx0 + 4.0 * fm + fx1);
        let (v, e) = simpson_rec(f, x0, x1, fx0, fm, fx1, whole, tol / panels as f64, 40)?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = f(0.5 * (a + m))?;
    let rm = f(0.5 * (m + b))?;
    let h = b - a;
    let left = h / 12.0 * (fa + 4.0 * lm + fm);
    let right = h / 12.0 * (fm + 4.0 * rm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || h < 1e-12 {
        return Ok((left + right + delta / 15.0, delta.abs() / 15.0));
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure(format!(
            "adaptive Simpson depth exhausted on [{a}, {b}]"
        )));
    }
    let (lv, le) = simpson_rec(f, a, m, fa, lm, fm, left, 0.5 * tol, depth - 1)?;
    let (rv, re) = simpson_rec(f, m, b, fm, rm, fb, right, 0.5 * tol, depth - 1)?;
    Ok((lv + rv, le + re))
}
