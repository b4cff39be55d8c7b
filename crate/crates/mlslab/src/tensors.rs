//! Symmetric m-tensor fields. Torus fields are truncated Fourier series per
//! component and support the full calculus: pullback, symmetric derivative D,
//! divergence D*, solenoidal decomposition, Sobolev and sampled Holder norms,
//! and seeded random generation. Hyperbolic fields are finite sums of
//! compactly supported bumps and support evaluation only.

use crate::disk::Mobius;
use crate::error::{Error, Result};
use crate::linalg::Sym2;
use crate::models::{FuchsianModel, SurfacePoint};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MAX_DEGREE: usize = 3;
const TWO_PI_I: Complex64 = Complex64::new(0.0, 2.0 * PI);

pub fn binom(m: usize, a: usize) -> f64 {
    let mut v = 1.0;
    for t in 0..a {
        v = v * (m - t) as f64 / (t + 1) as f64;
    }
    v
}

/// Component Gram matrix of the inner product on symmetric m-tensors induced
/// by the dual metric H: W[a][b] = sum over index tuples I (a twos) and J
/// (b twos) of prod_t H[i_t][j_t]. Components are indexed by the number of
/// indices equal to the second coordinate.
pub fn weight_matrix(m: usize, h: &Sym2) -> Vec<Vec<f64>> {
    let hm = [[h.xx, h.xy], [h.xy, h.yy]];
    let mut w = vec![vec![0.0; m + 1]; m + 1];
    let tuples = 1usize << m;
    for bi in 0..tuples {
        for bj in 0..tuples {
            let mut prod = 1.0;
            for t in 0..m {
                let i = (bi >> t) & 1;
                let j = (bj >> t) & 1;
                prod *= hm[i][j];
            }
            w[(bi as u32).count_ones() as usize][(bj as u32).count_ones() as usize] += prod;
        }
    }
    w
}

/// Truncated Fourier representation of a real symmetric tensor field on the
/// unit-cell torus. Component alpha holds the coefficient of
/// dx^{m-alpha} (sym) dy^{alpha}; the stored scalar includes the binomial
/// multiplicity only at pullback time.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    pub degree: usize,
    pub k_max: i64,
    coeffs: Vec<Vec<Complex64>>,
}

impl TorusField {
    pub fn zero(degree: usize, k_max: i64) -> Self {
        assert!(degree <= MAX_DEGREE && k_max >= 0);
        let side = (2 * k_max + 1) as usize;
        TorusField {
            degree,
            k_max,
            coeffs: vec![vec![Complex64::new(0.0, 0.0); side * side]; degree + 1],
        }
    }

    pub fn n_components(&self) -> usize {
        self.degree + 1
    }

    fn side(&self) -> usize {
        (2 * self.k_max + 1) as usize
    }

    fn idx(&self, k1: i64, k2: i64) -> usize {
        ((k1 + self.k_max) as usize) * self.side() + (k2 + self.k_max) as usize
    }

    pub fn coeff(&self, comp: usize, k1: i64, k2: i64) -> Complex64 {
        if k1.abs() > self.k_max || k2.abs() > self.k_max {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[comp][self.idx(k1, k2)]
    }

    pub fn set_coeff(&mut self, comp: usize, k1: i64, k2: i64, v: Complex64) {
        let i = self.idx(k1, k2);
        self.coeffs[comp][i] = v;
    }

    /// Frequencies in row-major order.
    pub fn frequencies(&self) -> impl Iterator<Item = (i64, i64)> {
        let k = self.k_max;
        (-k..=k).flat_map(move |k1| (-k..=k).map(move |k2| (k1, k2)))
    }

    /// Enforce the reality condition coeff(-k) = conj(coeff(k)).
    pub fn symmetrize_real(&mut self) {
        let k = self.k_max;
        for comp in 0..self.n_components() {
            for k1 in -k..=k {
                for k2 in -k..=k {
                    if (k1, k2) < (-k1, -k2) {
                        continue;
                    }
                    let ip = self.idx(k1, k2);
                    let im = self.idx(-k1, -k2);
                    let avg = 0.5 * (self.coeffs[comp][ip] + self.coeffs[comp][im].conj());
                    self.coeffs[comp][ip] = avg;
                    self.coeffs[comp][im] = avg.conj();
                }
            }
        }
    }

    pub fn component_value(&self, comp: usize, x: [f64; 2]) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let e1 = (TWO_PI_I * x[0]).exp();
        let e2 = (TWO_PI_I * x[1]).exp();
        let mut p1 = (TWO_PI_I * (-self.k_max as f64) * x[0]).exp();
        for k1 in -self.k_max..=self.k_max {
            let mut p = p1 * (TWO_PI_I * (-self.k_max as f64) * x[1]).exp();
            let row = &self.coeffs[comp]
                [self.idx(k1, -self.k_max)..=self.idx(k1, self.k_max)];
            for c in row {
                acc += c * p;
                p *= e2;
            }
            p1 *= e1;
        }
        acc.re
    }

    /// All component values at once (shares the exponential table).
    pub fn all_component_values(&self, x: [f64; 2]) -> Vec<f64> {
        let n = self.n_components();
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let e1 = (TWO_PI_I * x[0]).exp();
        let e2 = (TWO_PI_I * x[1]).exp();
        let mut p1 = (TWO_PI_I * (-self.k_max as f64) * x[0]).exp();
        for k1 in -self.k_max..=self.k_max {
            let mut p = p1 * (TWO_PI_I * (-self.k_max as f64) * x[1]).exp();
            let base = self.idx(k1, -self.k_max);
            for j in 0..self.side() {
                for (comp, a) in acc.iter_mut().enumerate() {
                    *a += self.coeffs[comp][base + j] * p;
                }
                p *= e2;
            }
            p1 *= e1;
        }
        acc.into_iter().map(|c| c.re).collect()
    }

    /// The field as a quadratic form (degree 2 only).
    pub fn value_sym2(&self, x: [f64; 2]) -> Sym2 {
        assert_eq!(self.degree, 2);
        let v = self.all_component_values(x);
        Sym2::new(v[0], v[1], v[2])
    }

    /// f(x)(v, ..., v) for a tangent vector v in lattice coordinates.
    pub fn pullback(&self, x: [f64; 2], v: [f64; 2]) -> f64 {
        let vals = self.all_component_values(x);
        let m = self.degree;
        let mut out = 0.0;
        for (alpha, val) in vals.iter().enumerate() {
            out += binom(m, alpha) * val * v[0].powi((m - alpha) as i32) * v[1].powi(alpha as i32);
        }
        out
    }

    /// Symmetrized derivative D = sym(grad); exact per frequency.
    pub fn symmetric_derivative(&self) -> TorusField {
        let m = self.degree;
        assert!(m < MAX_DEGREE);
        let mut out = TorusField::zero(m + 1, self.k_max);
        for (k1, k2) in self.frequencies() {
            for beta in 0..=(m + 1) {
                let mut v = Complex64::new(0.0, 0.0);
                if beta <= m {
                    v += ((m + 1 - beta) as f64 * k1 as f64) * self.coeff(beta, k1, k2);
                }
                if beta >= 1 {
                    v += (beta as f64 * k2 as f64) * self.coeff(beta - 1, k1, k2);
                }
                out.set_coeff(beta, k1, k2, TWO_PI_I / (m + 1) as f64 * v);
            }
        }
        out
    }

    /// Divergence D* (formal adjoint of -D contraction by the dual metric).
    pub fn divergence(&self, gram: &Sym2) -> Result<TorusField> {
        if self.degree == 0 {
            return Err(Error::Unsupported(
                "divergence of a scalar field".to_string(),
            ));
        }
        let h = gram.inverse();
        let m = self.degree;
        let mut out = TorusField::zero(m - 1, self.k_max);
        for (k1, k2) in self.frequencies() {
            let hk = [
                h.xx * k1 as f64 + h.xy * k2 as f64,
                h.xy * k1 as f64 + h.yy * k2 as f64,
            ];
            for beta in 0..m {
                let v = hk[0] * self.coeff(beta, k1, k2) + hk[1] * self.coeff(beta + 1, k1, k2);
                out.set_coeff(beta, k1, k2, -TWO_PI_I * v);
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, s: f64) {
        for comp in &mut self.coeffs {
            for c in comp.iter_mut() {
                *c *= s;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &TorusField, s: f64) {
        assert_eq!(self.degree, other.degree);
        let k = self.k_max.max(other.k_max);
        if k > self.k_max {
            *self = self.embed(k);
        }
        for comp in 0..self.n_components() {
            for (k1, k2) in other.frequencies() {
                let v = self.coeff(comp, k1, k2) + s * other.coeff(comp, k1, k2);
                self.set_coeff(comp, k1, k2, v);
            }
        }
    }

    /// The same field with a larger band limit.
    pub fn embed(&self, k_max: i64) -> TorusField {
        assert!(k_max >= self.k_max);
        let mut out = TorusField::zero(self.degree, k_max);
        for comp in 0..self.n_components() {
            for (k1, k2) in self.frequencies() {
                out.set_coeff(comp, k1, k2, self.coeff(comp, k1, k2));
            }
        }
        out
    }

    /// L2 inner product of two fields of equal degree, with the component
    /// contraction induced by the dual of `gram` and the metric volume.
    pub fn inner(&self, other: &TorusField, gram: &Sym2) -> f64 {
        assert_eq!(self.degree, other.degree);
        let w = weight_matrix(self.degree, &gram.inverse());
        let vol = gram.det().sqrt();
        let n = self.n_components();
        let k = self.k_max.max(other.k_max);
        let mut acc = 0.0;
        for k1 in -k..=k {
            for k2 in -k..=k {
                for a in 0..n {
                    for b in 0..n {
                        acc += w[a][b]
                            * (self.coeff(a, k1, k2) * other.coeff(b, k1, k2).conj()).re;
                    }
                }
            }
        }
        acc * vol
    }

    pub fn l2_norm(&self, gram: &Sym2) -> f64 {
        self.inner(self, gram).max(0.0).sqrt()
    }

    /// Sobolev norm with the per-frequency multiplier (1 + 4 pi^2 k.Hk)^s on
    /// the L2 sum (s = 0 reproduces the L2 norm).
    pub fn sobolev_norm(&self, s: f64, gram: &Sym2) -> f64 {
        let h = gram.inverse();
        let w = weight_matrix(self.degree, &h);
        let vol = gram.det().sqrt();
        let n = self.n_components();
        let mut acc = 0.0;
        for (k1, k2) in self.frequencies() {
            let kv = [k1 as f64, k2 as f64];
            let mult = (1.0 + 4.0 * PI * PI * h.quad(kv)).powf(s);
            let mut q = 0.0;
            for a in 0..n {
                for b in 0..n {
                    q += w[a][b] * (self.coeff(a, k1, k2) * self.coeff(b, k1, k2).conj()).re;
                }
            }
            acc += mult * q;
        }
        (acc * vol).max(0.0).sqrt()
    }

    /// Per-frequency least-squares solenoidal decomposition f = f_s + Dp with
    /// D* f_s = 0 and mean-zero p.
    pub fn solenoidal_project(&self, gram: &Sym2) -> Result<(TorusField, TorusField)> {
        if self.degree == 0 {
            return Err(Error::Unsupported(
                "solenoidal projection of a scalar field".to_string(),
            ));
        }
        let m = self.degree;
        let h = gram.inverse();
        let w = weight_matrix(m, &h);
        let np = m; // components of the degree m-1 potential
        let mut p = TorusField::zero(m - 1, self.k_max);
        for (k1, k2) in self.frequencies() {
            if (k1, k2) == (0, 0) {
                continue;
            }
            // A: matrix of D at this frequency, (m+1) x m
            let mut a = vec![vec![Complex64::new(0.0, 0.0); np]; m + 1];
            for beta in 0..=m {
                if beta < np {
                    a[beta][beta] = TWO_PI_I / m as f64 * ((m - beta) as f64 * k1 as f64);
                }
                if beta >= 1 {
                    a[beta][beta - 1] += TWO_PI_I / m as f64 * (beta as f64 * k2 as f64);
                }
            }
            // normal equations (A^H W A) x = A^H W f
            let mut gmat = vec![vec![Complex64::new(0.0, 0.0); np]; np];
            let mut rhs = vec![Complex64::new(0.0, 0.0); np];
            for i in 0..np {
                for j in 0..np {
                    let mut s = Complex64::new(0.0, 0.0);
                    for r in 0..=m {
                        for t in 0..=m {
                            s += a[r][i].conj() * w[r][t] * a[t][j];
                        }
                    }
                    gmat[i][j] = s;
                }
                let mut s = Complex64::new(0.0, 0.0);
                for r in 0..=m {
                    for t in 0..=m {
                        s += a[r][i].conj() * w[r][t] * self.coeff(t, k1, k2);
                    }
                }
                rhs[i] = s;
            }
            let sol = solve_complex(gmat, rhs)?;
            for (i, v) in sol.into_iter().enumerate() {
                p.set_coeff(i, k1, k2, v);
            }
        }
        let mut fs = self.clone();
        fs.add_scaled(&p.symmetric_derivative(), -1.0);
        Ok((fs, p))
    }

    /// Independent route to the same decomposition: conjugate gradients on
    /// the normal operator D* D p = D* f.
    pub fn solenoidal_project_cg(
        &self,
        gram: &Sym2,
        tol: f64,
        max_iter: usize,
    ) -> Result<(TorusField, TorusField)> {
        if self.degree == 0 {
            return Err(Error::Unsupported(
                "solenoidal projection of a scalar field".to_string(),
            ));
        }
        let m = self.degree;
        let apply = |p: &TorusField| -> Result<TorusField> {
            p.symmetric_derivative().divergence(gram)
        };
        let mut b = self.divergence(gram)?;
        // gauge fix: no mean in the potential
        for comp in 0..b.n_components() {
            b.set_coeff(comp, 0, 0, Complex64::new(0.0, 0.0));
        }
        let bnorm = b.l2_norm(gram);
        let mut p = TorusField::zero(m - 1, self.k_max);
        if bnorm > 0.0 {
            let mut r = b.clone();
            let mut d = r.clone();
            let mut rs = r.inner(&r, gram);
            for _ in 0..max_iter {
                if rs.sqrt() <= tol * bnorm {
                    break;
                }
                let ad = apply(&d)?;
                let alpha = rs / d.inner(&ad, gram);
                p.add_scaled(&d, alpha);
                r.add_scaled(&ad, -alpha);
                let rs_new = r.inner(&r, gram);
                let beta = rs_new / rs;
                rs = rs_new;
                let mut dn = r.clone();
                dn.add_scaled(&d, beta);
                d = dn;
            }
            if rs.sqrt() > tol * bnorm {
                return Err(Error::SolverFailure(format!(
                    "conjugate gradients stalled at residual {:.3e}",
                    rs.sqrt() / bnorm
                )));
            }
        }
        let mut fs = self.clone();
        fs.add_scaled(&p.symmetric_derivative(), -1.0);
        Ok((fs, p))
    }

    /// Component values on an n x n uniform grid, row-major.
    pub fn grid_values(&self, comp: usize, n: usize) -> Vec<f64> {
        let side = self.side();
        let root: Vec<Complex64> = (0..n)
            .map(|t| (TWO_PI_I * t as f64 / n as f64).exp())
            .collect();
        let pow = |k: i64, idx: usize| root[(k.rem_euclid(n as i64) as usize * idx) % n];
        // partial[k1 index][j] = sum_k2 c e^{2 pi i k2 j / n}
        let mut partial = vec![Complex64::new(0.0, 0.0); side * n];
        for (r, k1) in (-self.k_max..=self.k_max).enumerate() {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k2 in -self.k_max..=self.k_max {
                    s += self.coeff(comp, k1, k2) * pow(k2, j);
                }
                partial[r * n + j] = s;
            }
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for (r, k1) in (-self.k_max..=self.k_max).enumerate() {
                    s += partial[r * n + j] * pow(k1, i);
                }
                out[i * n + j] = s.re;
            }
        }
        out
    }

    /// Sampled sup norm over all components.
    pub fn c0_surrogate(&self, n: usize) -> f64 {
        (0..self.n_components())
            .map(|c| {
                self.grid_values(c, n)
                    .into_iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }

    /// Sampled Holder surrogate: grid sup norm plus the max Holder quotient
    /// over dyadic axis-aligned offsets on a 256^2 grid.
    pub fn holder_surrogate(&self, alpha: f64) -> f64 {
        let n = 256usize;
        let mut sup = 0.0f64;
        let mut quot = 0.0f64;
        for comp in 0..self.n_components() {
            let v = self.grid_values(comp, n);
            for &x in &v {
                sup = sup.max(x.abs());
            }
            let mut d = 1usize;
            while d <= n / 2 {
                let dist = (d as f64 / n as f64).powf(alpha);
                for i in 0..n {
                    for j in 0..n {
                        let a = v[i * n + j];
                        let bx = v[((i + d) % n) * n + j];
                        let by = v[i * n + (j + d) % n];
                        quot = quot.max((bx - a).abs() / dist).max((by - a).abs() / dist);
                    }
                }
                d *= 2;
            }
        }
        sup + quot
    }

    /// Sum of sampled sup norms of all partial derivatives of order <= 3.
    pub fn c3_surrogate(&self) -> f64 {
        let n = 128usize;
        let mut total = 0.0;
        for b1 in 0..=3usize {
            for b2 in 0..=(3 - b1) {
                let mut d = self.clone();
                for (k1, k2) in self.frequencies() {
                    let mult = (TWO_PI_I * k1 as f64).powu(b1 as u32)
                        * (TWO_PI_I * k2 as f64).powu(b2 as u32);
                    for comp in 0..self.n_components() {
                        let v = self.coeff(comp, k1, k2) * mult;
                        d.set_coeff(comp, k1, k2, v);
                    }
                }
                total += d.c0_surrogate(n);
            }
        }
        total
    }

    /// Gaussian random field with |k|^{-3} coefficient decay; real-valued,
    /// mean-free, deterministic in the seed.
    pub fn random(seed: u64, degree: usize, k_max: i64) -> TorusField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = TorusField::zero(degree, k_max);
        for comp in 0..f.n_components() {
            for k1 in -k_max..=k_max {
                for k2 in -k_max..=k_max {
                    if (k1, k2) <= (0, 0) {
                        continue;
                    }
                    let decay = ((k1 * k1 + k2 * k2) as f64).sqrt().powi(-3);
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let c = Complex64::new(re, im) * decay;
                    f.set_coeff(comp, k1, k2, c);
                    f.set_coeff(comp, -k1, -k2, c.conj());
                }
            }
        }
        f
    }

    /// Random solenoidal field rescaled so the Holder surrogate at `alpha`
    /// equals `target`.
    pub fn random_solenoidal(
        seed: u64,
        degree: usize,
        k_max: i64,
        gram: &Sym2,
        alpha: f64,
        target: f64,
    ) -> Result<TorusField> {
        let mut s = seed;
        loop {
            let raw = TorusField::random(s, degree, k_max);
            let (mut fs, _) = raw.solenoidal_project(gram)?;
            let norm = fs.holder_surrogate(alpha);
            if norm > 0.0 {
                fs.scale(target / norm);
                return Ok(fs);
            }
            s += 1;
        }
    }

    /// Conformal multiple of the background metric: u * gram.
    pub fn conformal(u: &TorusField, gram: &Sym2) -> TorusField {
        assert_eq!(u.degree, 0);
        let mut f = TorusField::zero(2, u.k_max);
        for (k1, k2) in u.frequencies() {
            let c = u.coeff(0, k1, k2);
            f.set_coeff(0, k1, k2, c * gram.xx);
            f.set_coeff(1, k1, k2, c * gram.xy);
            f.set_coeff(2, k1, k2, c * gram.yy);
        }
        f
    }

    pub fn to_file(&self) -> FieldFile {
        let basis = match self.degree {
            0 => "1",
            1 => "dx,dy",
            2 => "dxx,dxy,dyy",
            _ => "dxxx,dxxy,dxyy,dyyy",
        };
        let coeffs = self
            .frequencies()
            .map(|(k1, k2)| {
                let mut row = vec![k1 as f64, k2 as f64];
                for comp in 0..self.n_components() {
                    let c = self.coeff(comp, k1, k2);
                    row.push(c.re);
                    row.push(c.im);
                }
                row
            })
            .collect();
        FieldFile {
            degree: self.degree,
            k: self.k_max,
            basis: basis.to_string(),
            coeffs,
        }
    }

    pub fn from_file(file: &FieldFile) -> Result<TorusField> {
        if file.degree > MAX_DEGREE {
            return Err(Error::Config(format!("degree {} > 3", file.degree)));
        }
        let mut f = TorusField::zero(file.degree, file.k);
        for row in &file.coeffs {
            if row.len() != 2 + 2 * f.n_components() {
                return Err(Error::Config(format!(
                    "coefficient row has {} entries, expected {}",
                    row.len(),
                    2 + 2 * f.n_components()
                )));
            }
            let (k1, k2) = (row[0] as i64, row[1] as i64);
            if k1.abs() > file.k || k2.abs() > file.k {
                return Err(Error::Config(format!("frequency ({k1},{k2}) out of band")));
            }
            for comp in 0..f.n_components() {
                f.set_coeff(
                    comp,
                    k1,
                    k2,
                    Complex64::new(row[2 + 2 * comp], row[3 + 2 * comp]),
                );
            }
        }
        Ok(f)
    }

    pub fn norms(&self, s_list: &[f64], alpha_list: &[f64], gram: &Sym2) -> NormReport {
        NormReport {
            l2: self.l2_norm(gram),
            sobolev: s_list
                .iter()
                .map(|&s| (s, self.sobolev_norm(s, gram)))
                .collect(),
            holder_surrogate: alpha_list
                .iter()
                .map(|&a| (a, self.holder_surrogate(a)))
                .collect(),
            c3_surrogate: self.c3_surrogate(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub l2: f64,
    pub sobolev: Vec<(f64, f64)>,
    pub holder_surrogate: Vec<(f64, f64)>,
    pub c3_surrogate: f64,
}

/// On-disk field format; coefficients in row-major frequency order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldFile {
    pub degree: usize,
    pub k: i64,
    pub basis: String,
    pub coeffs: Vec<Vec<f64>>,
}

fn solve_complex(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
            .unwrap();
        if a[piv][col].norm() < 1e-300 {
            return Err(Error::SolverFailure("singular projection system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[row][c] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in (row + 1)..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Hyperbolic bump fields
// ---------------------------------------------------------------------------

/// One compactly supported bump on the Bolza surface, stored with the deck
/// images of its center that can intersect the fundamental octagon.
#[derive(Debug, Clone)]
pub struct BumpTerm {
    pub center: Complex64,
    /// Hyperbolic support radius.
    pub radius: f64,
    /// Coefficient data: degree 0 uses coeff[0]; degree 1 uses (coeff[0],
    /// coeff[1]) as a covector; degree 2 uses (xx, xy, yy) of a symmetric
    /// matrix acting on the unit Euclidean fiber direction.
    pub coeff: [f64; 3],
    /// (image center, frame rotation) for every deck image near the octagon.
    images: Vec<(Complex64, f64)>,
}

impl BumpTerm {
    pub fn new(model: &FuchsianModel, center: Complex64, radius: f64, coeff: [f64; 3]) -> Self {
        // collect deck images of the center whose bump can reach the octagon
        let circumradius = (3.0 + 2.0 * 2f64.sqrt()).acosh();
        let reach = circumradius + radius + 0.5;
        let pairings = model.side_pairings();
        let mut moves = Vec::new();
        for h in pairings {
            moves.push(h);
            moves.push(h.inverse());
        }
        let mut elems: Vec<Mobius> = vec![Mobius::identity()];
        let mut frontier = elems.clone();
        for _ in 0..2 {
            let mut next = Vec::new();
            for g in &frontier {
                for m in &moves {
                    let cand = m.compose(g);
                    if elems
                        .iter()
                        .all(|e| cand.compose(&e.inverse()).dist_to_identity() > 1e-9)
                    {
                        elems.push(cand);
                        next.push(cand);
                    }
                }
            }
            frontier = next;
        }
        let images = elems
            .into_iter()
            .filter_map(|g| {
                let zc = g.apply(center);
                if crate::disk::hyperbolic_distance(zc, Complex64::new(0.0, 0.0)) <= reach {
                    Some((zc, g.derivative(center).arg()))
                } else {
                    None
                }
            })
            .collect();
        BumpTerm {
            center,
            radius,
            coeff,
            images,
        }
    }
}

/// Sum of bump terms on the Bolza surface; evaluation only.
#[derive(Debug, Clone)]
pub struct HyperbolicField {
    pub degree: usize,
    pub terms: Vec<BumpTerm>,
}

fn bump_profile(d: f64, radius: f64) -> f64 {
    if d >= radius {
        return 0.0;
    }
    let u = d / radius;
    (1.0 - 1.0 / (1.0 - u * u)).exp()
}

impl HyperbolicField {
    pub fn scalar_bump(model: &FuchsianModel, center: Complex64, radius: f64, amp: f64) -> Self {
        HyperbolicField {
            degree: 0,
            terms: vec![BumpTerm::new(model, center, radius, [amp, 0.0, 0.0])],
        }
    }

    pub fn one_form_bump(
        model: &FuchsianModel,
        center: Complex64,
        radius: f64,
        w: [f64; 2],
    ) -> Self {
        HyperbolicField {
            degree: 1,
            terms: vec![BumpTerm::new(model, center, radius, [w[0], w[1], 0.0])],
        }
    }

    /// Conformal degree-2 bump: amp * bump * g0; its pullback on unit
    /// tangents is amp * bump, independent of the fiber.
    pub fn conformal_bump(
        model: &FuchsianModel,
        center: Complex64,
        radius: f64,
        amp: f64,
    ) -> Self {
        HyperbolicField {
            degree: 2,
            terms: vec![BumpTerm::new(model, center, radius, [amp, 0.0, amp])],
        }
    }

    /// f(x)(v, ..., v) at a point of the unit tangent bundle given in
    /// fundamental-domain coordinates.
    pub fn pullback(&self, p: &SurfacePoint) -> Result<f64> {
        let SurfacePoint::Disk { z, theta } = p else {
            return Err(Error::Config(
                "hyperbolic field evaluated at a torus point".into(),
            ));
        };
        let mut acc = 0.0;
        for term in &self.terms {
            for &(zc, psi) in &term.images {
                let d = crate::disk::hyperbolic_distance(*z, zc);
                if d >= term.radius {
                    continue;
                }
                let phi = bump_profile(d, term.radius);
                let ang = theta - psi;
                acc += phi
                    * match self.degree {
                        0 => term.coeff[0],
                        1 => term.coeff[0] * ang.cos() + term.coeff[1] * ang.sin(),
                        _ => {
                            let (c, s) = (ang.cos(), ang.sin());
                            term.coeff[0] * c * c
                                + 2.0 * term.coeff[1] * c * s
                                + term.coeff[2] * s * s
                        }
                    };
            }
        }
        Ok(acc)
    }

    /// The field as a quadratic form on Euclidean tangent vectors at a cover
    /// point (degree 2 only); used by the geodesic solver. The argument must
    /// already be reduced to the fundamental octagon.
    pub fn quad_form(&self, z: Complex64) -> Sym2 {
        assert_eq!(self.degree, 2);
        let lam = crate::disk::conformal_factor(z);
        let mut q = Sym2::zero();
        for term in &self.terms {
            for &(zc, psi) in &term.images {
                let d = crate::disk::hyperbolic_distance(z, zc);
                if d >= term.radius {
                    continue;
                }
                let phi = bump_profile(d, term.radius) * lam * lam;
                // rotate the coefficient matrix by the image frame angle
                let (c, s) = (psi.cos(), psi.sin());
                let m = Sym2::new(term.coeff[0], term.coeff[1], term.coeff[2]);
                let rot = Sym2::new(
                    c * c * m.xx - 2.0 * c * s * m.xy + s * s * m.yy,
                    c * s * (m.xx - m.yy) + (c * c - s * s) * m.xy,
                    s * s * m.xx + 2.0 * c * s * m.xy + c * c * m.yy,
                );
                q = q.add(&rot.scale(phi));
            }
        }
        q
    }
}

/// A perturbation field for either model.
#[derive(Debug, Clone)]
pub enum Field {
    Torus(TorusField),
    Hyperbolic(HyperbolicField),
}

impl Field {
    pub fn degree(&self) -> usize {
        match self {
            Field::Torus(f) => f.degree,
            Field::Hyperbolic(f) => f.degree,
        }
    }

    pub fn pullback(&self, p: &SurfacePoint) -> Result<f64> {
        match (self, p) {
            (Field::Torus(f), SurfacePoint::Torus { x, v }) => Ok(f.pullback(*x, *v)),
            (Field::Hyperbolic(f), p @ SurfacePoint::Disk { .. }) => f.pullback(p),
            _ => Err(Error::Config("field and point kinds do not match".into())),
        }
    }

    /// The field multiplied by a scalar.
    pub fn scaled(&self, s: f64) -> Field {
        match self {
            Field::Torus(f) => {
                let mut g = f.clone();
                g.scale(s);
                Field::Torus(g)
            }
            Field::Hyperbolic(f) => {
                let mut g = f.clone();
                for term in &mut g.terms {
                    for c in &mut term.coeff {
                        *c *= s;
                    }
                }
                Field::Hyperbolic(g)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TorusModel;

    fn id() -> Sym2 {
        Sym2::identity()
    }

    #[test]
    fn weights_identity_metric() {
        let w = weight_matrix(2, &id());
        assert_eq!(w[0][0], 1.0);
        assert_eq!(w[1][1], 2.0);
        assert_eq!(w[2][2], 1.0);
        assert_eq!(w[0][1], 0.0);
        assert_eq!(w[0][2], 0.0);
    }

    #[test]
    fn derivative_of_sin_dx() {
        // p = sin(2 pi x) dx -> Dp = 2 pi cos(2 pi x) dx^2
        let mut p = TorusField::zero(1, 2);
        p.set_coeff(0, 1, 0, Complex64::new(0.0, -0.5));
        p.set_coeff(0, -1, 0, Complex64::new(0.0, 0.5));
        let dp = p.symmetric_derivative();
        for &x in &[0.0, 0.13, 0.71] {
            let want = 2.0 * PI * (2.0 * PI * x).cos();
            let got = dp.component_value(0, [x, 0.4]);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            assert!(dp.component_value(1, [x, 0.4]).abs() < 1e-12);
            assert!(dp.component_value(2, [x, 0.4]).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_matches_mixed_partials() {
        // DDu on a scalar: the dxy component equals the mixed partial
        let mut u = TorusField::zero(0, 3);
        u.set_coeff(0, 1, 2, Complex64::new(0.3, -0.1));
        u.set_coeff(0, -1, -2, Complex64::new(0.3, 0.1));
        let ddu = u.symmetric_derivative().symmetric_derivative();
        let h = 1e-5;
        for &(x, y) in &[(0.2, 0.3), (0.8, 0.05)] {
            let f = |a: f64, b: f64| u.component_value(0, [a, b]);
            let mixed = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h))
                / (4.0 * h * h);
            let got = ddu.component_value(1, [x, y]);
            assert!((got - mixed).abs() < 1e-4, "{got} vs {mixed}");
        }
    }

    #[test]
    fn adjointness_random_fields() {
        let grams = [id(), Sym2::new(1.4, 0.3, 0.9)];
        for gram in grams {
            for m in 0..=2usize {
                for seed in 0..5 {
                    let p = TorusField::random(seed, m, 4);
                    let h = TorusField::random(seed + 100, m + 1, 4);
                    let lhs = p.symmetric_derivative().inner(&h, &gram);
                    let rhs = p.inner(&h.divergence(&gram).unwrap(), &gram);
                    assert!(
                        (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()),
                        "m={m} seed={seed}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn solenoidal_decomposition_properties() {
        let gram = Sym2::new(1.2, 0.1, 0.8);
        for seed in 0..5 {
            let f = TorusField::random(seed, 2, 8);
            let (fs, p) = f.solenoidal_project(&gram).unwrap();
            // reconstruction
            let mut rec = fs.clone();
            rec.add_scaled(&p.symmetric_derivative(), 1.0);
            rec.add_scaled(&f, -1.0);
            assert!(rec.l2_norm(&gram) < 1e-10);
            // divergence-free
            assert!(fs.divergence(&gram).unwrap().l2_norm(&gram) < 1e-10);
            // idempotence
            let (fs2, p2) = fs.solenoidal_project(&gram).unwrap();
            let mut diff = fs2.clone();
            diff.add_scaled(&fs, -1.0);
            assert!(diff.l2_norm(&gram) < 1e-10);
            assert!(p2.l2_norm(&gram) < 1e-10);
            // pure potential projects to zero
            let dp = p.symmetric_derivative();
            let (dps, _) = dp.solenoidal_project(&gram).unwrap();
            assert!(dps.l2_norm(&gram) < 1e-10);
            // agreement with the conjugate-gradient route
            let (fs_cg, _) = f.solenoidal_project_cg(&gram, 1e-13, 2000).unwrap();
            let mut d2 = fs_cg.clone();
            d2.add_scaled(&fs, -1.0);
            assert!(d2.l2_norm(&gram) < 1e-8);
        }
    }

    #[test]
    fn sobolev_single_mode() {
        let mut f = TorusField::zero(2, 2);
        f.set_coeff(0, 1, 0, Complex64::new(0.5, 0.0));
        f.set_coeff(0, -1, 0, Complex64::new(0.5, 0.0));
        // f = cos(2 pi x) dx^2; L2 norm^2 = 2 * |0.5|^2 = 1/2
        let l2 = f.l2_norm(&id());
        assert!((l2 - 0.5f64.sqrt()).abs() < 1e-12);
        for s in [-1.0, 0.3, 1.0] {
            let want = (1.0 + 4.0 * PI * PI).powf(s / 2.0) * l2;
            assert!((f.sobolev_norm(s, &id()) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sobolev_interpolation_inequality() {
        for seed in 0..20 {
            let f = TorusField::random(seed, 2, 5);
            let h0 = f.sobolev_norm(0.0, &id());
            let hm = f.sobolev_norm(-1.0, &id());
            let hp = f.sobolev_norm(1.0, &id());
            assert!(h0 <= (hm * hp).sqrt() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn norm_monotone_in_s() {
        let f = TorusField::random(3, 2, 4);
        let mut prev = 0.0;
        for s in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let v = f.sobolev_norm(s, &id());
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn pullback_basics() {
        let mut f = TorusField::zero(2, 1);
        f.set_coeff(0, 0, 0, Complex64::new(1.0, 0.0)); // f = dx^2
        assert!(f.pullback([0.2, 0.7], [0.0, 1.0]).abs() < 1e-14);
        assert!((f.pullback([0.2, 0.7], [1.0, 0.0]) - 1.0).abs() < 1e-14);
        let t = TorusModel::square();
        let g2 = TorusField::conformal(
            &{
                let mut u = TorusField::zero(0, 1);
                u.set_coeff(0, 0, 0, Complex64::new(2.0, 0.0));
                u
            },
            &t.gram,
        );
        for theta in [0.1, 2.2, 4.0] {
            let v = t.unit_vector(theta);
            assert!((g2.pullback([0.3, 0.9], v) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fiber_average_is_half_trace() {
        let t = TorusModel::new(1.3, 0.25, 0.9).unwrap();
        let f = TorusField::random(9, 2, 4);
        let x = [0.31, 0.77];
        let n = 64;
        let mut avg = 0.0;
        for k in 0..n {
            let v = t.unit_vector(2.0 * PI * k as f64 / n as f64);
            avg += f.pullback(x, v);
        }
        avg /= n as f64;
        let h = t.gram.inverse();
        let fx = f.value_sym2(x);
        let tr = h.xx * fx.xx + 2.0 * h.xy * fx.xy + h.yy * fx.yy;
        assert!((avg - 0.5 * tr).abs() < 1e-10, "{avg} vs {}", 0.5 * tr);
    }

    #[test]
    fn random_fields_deterministic_and_solenoidal() {
        let gram = id();
        let a = TorusField::random_solenoidal(7, 2, 8, &gram, 0.5, 1.25).unwrap();
        let b = TorusField::random_solenoidal(7, 2, 8, &gram, 0.5, 1.25).unwrap();
        assert_eq!(a, b);
        assert!(a.divergence(&gram).unwrap().l2_norm(&gram) < 1e-10);
        assert!((a.holder_surrogate(0.5) - 1.25).abs() < 1e-9);
    }

    #[test]
    fn field_file_round_trip() {
        let f = TorusField::random(11, 2, 3);
        let file = f.to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back: FieldFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file, back);
        let g = TorusField::from_file(&back).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn hyperbolic_bump_evaluation() {
        let model = FuchsianModel::bolza().unwrap();
        let f = HyperbolicField::conformal_bump(&model, Complex64::new(0.0, 0.0), 0.8, 0.3);
        let at = |z, theta| {
            f.pullback(&SurfacePoint::Disk { z, theta }).unwrap()
        };
        assert!((at(Complex64::new(0.0, 0.0), 0.7) - 0.3 * 1f64.exp().recip() * 1f64.exp()).abs() < 1e-12);
        // conformal field is fiber-independent
        let z = Complex64::new(0.1, 0.05);
        assert!((at(z, 0.0) - at(z, 1.9)).abs() < 1e-14);
        // vanishes outside the support
        assert!(at(Complex64::new(0.6, 0.0), 0.0).abs() < 1e-300);
    }

    #[test]
    fn hyperbolic_bump_deck_invariance() {
        let model = FuchsianModel::bolza().unwrap();
        let smodel = crate::models::SurfaceModel::Bolza(model.clone());
        // a bump straddling the octagon boundary
        let center = Complex64::new(0.55, 0.1);
        let f = HyperbolicField::scalar_bump(&model, center, 0.9, 1.0);
        // evaluate at points around a side, comparing direct and deck-moved
        for &(x, y) in &[(0.7, 0.0), (0.72, 0.05), (0.68, -0.04)] {
            let z = Complex64::new(x, y);
            let (p, _) = smodel
                .reduce_to_fundamental_domain(SurfacePoint::Disk { z, theta: 0.0 })
                .unwrap();
            let direct = f.pullback(&SurfacePoint::Disk { z, theta: 0.0 }).unwrap();
            let reduced = f.pullback(&p).unwrap();
            assert!(
                (direct - reduced).abs() < 1e-10,
                "invariance broken at ({x},{y}): {direct} vs {reduced}"
            );
        }
    }
}
