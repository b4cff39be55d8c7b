//! Background geometries: a flat torus with constant metric given by a Gram
//! matrix, and the Bolza genus-2 hyperbolic surface built from the regular
//! octagon. Both expose exact length oracles, explicit background geodesics,
//! fundamental-domain reduction, and mass-1 Liouville averaging.

use crate::disk::{self, Mobius};
use crate::error::{Error, Result};
use crate::homotopy::{
    canonicalize, letter_inverse, word_from_str, word_to_string, ConjugacyClass, CyclicWord,
    TorusClass,
};
use crate::linalg::{gauss_legendre, mat_vec, Sym2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A point of the unit tangent bundle, in the coordinates of the model's
/// fundamental domain.
#[derive(Debug, Clone, Copy)]
pub enum SurfacePoint {
    /// Position in the unit cell, tangent vector in lattice coordinates
    /// (unit length for the Gram metric).
    Torus { x: [f64; 2], v: [f64; 2] },
    /// Position in the disk, Euclidean angle of the unit tangent.
    Disk { z: Complex64, theta: f64 },
}

/// Deck transformation applied by fundamental-domain reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeckWord {
    Torus(i64, i64),
    Surface(String),
}

impl std::fmt::Display for DeckWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeckWord::Torus(m, n) => write!(f, "({m},{n})"),
            DeckWord::Surface(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: String,
    #[serde(default)]
    pub torus: Option<TorusConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TorusConfig {
    /// [g11, g12, g22]
    pub gram: [f64; 3],
}

#[derive(Debug, Clone)]
pub enum SurfaceModel {
    Torus(TorusModel),
    Bolza(FuchsianModel),
}

impl SurfaceModel {
    pub fn from_config(cfg: &ModelConfig) -> Result<SurfaceModel> {
        match cfg.model.as_str() {
            "torus" => {
                let gram = cfg
                    .torus
                    .as_ref()
                    .map(|t| t.gram)
                    .unwrap_or([1.0, 0.0, 1.0]);
                Ok(SurfaceModel::Torus(TorusModel::new(
                    gram[0], gram[1], gram[2],
                )?))
            }
            "bolza" => Ok(SurfaceModel::Bolza(FuchsianModel::bolza()?)),
            other => Err(Error::Config(format!("unknown model \"{other}\""))),
        }
    }

    pub fn background_length(&self, c: &ConjugacyClass) -> Result<f64> {
        match (self, c) {
            (SurfaceModel::Torus(t), ConjugacyClass::Torus(tc)) => t.length(tc),
            (SurfaceModel::Bolza(b), ConjugacyClass::Surface(w)) => b.length(w),
            _ => Err(Error::Config(
                "class kind does not match the model".to_string(),
            )),
        }
    }

    pub fn background_geodesic(&self, c: &ConjugacyClass) -> Result<BackgroundGeodesic> {
        match (self, c) {
            (SurfaceModel::Torus(t), ConjugacyClass::Torus(tc)) => t.geodesic(tc),
            (SurfaceModel::Bolza(b), ConjugacyClass::Surface(w)) => b.geodesic(w),
            _ => Err(Error::Config(
                "class kind does not match the model".to_string(),
            )),
        }
    }

    /// Nontrivial classes with the given enumeration bound, sorted by
    /// background length (ties by class id).
    pub fn enumerate_classes(&self, bound: usize) -> Result<Vec<ConjugacyClass>> {
        let mut out: Vec<(f64, ConjugacyClass)> = match self {
            SurfaceModel::Torus(_) => crate::homotopy::enumerate_torus_classes(bound as i64)
                .into_iter()
                .map(ConjugacyClass::Torus)
                .map(|c| (self.background_length(&c).unwrap(), c))
                .collect(),
            SurfaceModel::Bolza(_) => crate::homotopy::enumerate_surface_classes(bound)?
                .into_iter()
                .map(ConjugacyClass::Surface)
                .map(|c| (self.background_length(&c).unwrap(), c))
                .collect(),
        };
        out.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then_with(|| a.1.id().cmp(&b.1.id()))
        });
        Ok(out.into_iter().map(|(_, c)| c).collect())
    }

    pub fn reduce_to_fundamental_domain(
        &self,
        p: SurfacePoint,
    ) -> Result<(SurfacePoint, DeckWord)> {
        match (self, p) {
            (SurfaceModel::Torus(_), SurfacePoint::Torus { x, v }) => {
                let (y, m, n) = TorusModel::reduce(x);
                Ok((SurfacePoint::Torus { x: y, v }, DeckWord::Torus(m, n)))
            }
            (SurfaceModel::Bolza(b), SurfacePoint::Disk { z, theta }) => {
                let (w, deck, word) = b.reduce(z)?;
                let th = theta + deck.derivative(z).arg();
                Ok((SurfacePoint::Disk { z: w, theta: th }, DeckWord::Surface(word)))
            }
            _ => Err(Error::Config("point kind does not match the model".into())),
        }
    }

    /// Geodesic flow of the background metric for time `t`.
    pub fn flow(&self, p: &SurfacePoint, t: f64) -> Result<SurfacePoint> {
        match (self, p) {
            (SurfaceModel::Torus(_), SurfacePoint::Torus { x, v }) => {
                let y = [x[0] + t * v[0], x[1] + t * v[1]];
                let (y, _, _) = TorusModel::reduce(y);
                Ok(SurfacePoint::Torus { x: y, v: *v })
            }
            (SurfaceModel::Bolza(b), SurfacePoint::Disk { z, theta }) => {
                let (w, th) = disk::geodesic_flow(*z, *theta, t);
                let (wr, deck, _) = b.reduce(w)?;
                Ok(SurfacePoint::Disk {
                    z: wr,
                    theta: th + deck.derivative(w).arg(),
                })
            }
            _ => Err(Error::Config("point kind does not match the model".into())),
        }
    }

    pub fn torus(&self) -> Option<&TorusModel> {
        match self {
            SurfaceModel::Torus(t) => Some(t),
            _ => None,
        }
    }

    pub fn bolza(&self) -> Option<&FuchsianModel> {
        match self {
            SurfaceModel::Bolza(b) => Some(b),
            _ => None,
        }
    }
}

/// A closed background geodesic with arclength parametrization.
#[derive(Debug, Clone)]
pub struct BackgroundGeodesic {
    pub class: ConjugacyClass,
    pub length: f64,
    path: Path,
}

#[derive(Debug, Clone)]
enum Path {
    Torus { x0: [f64; 2], v: [f64; 2] },
    Bolza { from_axis: Mobius },
}

impl BackgroundGeodesic {
    /// Point and unit tangent at arclength `t`, reduced to the fundamental
    /// domain.
    pub fn point_at(&self, model: &SurfaceModel, t: f64) -> Result<SurfacePoint> {
        let raw = self.point_at_cover(t);
        let (p, _) = model.reduce_to_fundamental_domain(raw)?;
        Ok(p)
    }

    /// Point and tangent at arclength `t` in the universal cover.
    pub fn point_at_cover(&self, t: f64) -> SurfacePoint {
        match &self.path {
            Path::Torus { x0, v } => SurfacePoint::Torus {
                x: [x0[0] + t * v[0], x0[1] + t * v[1]],
                v: *v,
            },
            Path::Bolza { from_axis } => {
                let x = Complex64::new((t / 2.0).tanh(), 0.0);
                let z = from_axis.apply(x);
                let theta = from_axis.derivative(x).arg();
                SurfacePoint::Disk { z, theta }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Torus
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TorusModel {
    pub gram: Sym2,
    /// G^{-1/2}, used to parametrize the unit-circle fiber.
    inv_sqrt_gram: [[f64; 2]; 2],
}

impl TorusModel {
    pub fn new(g11: f64, g12: f64, g22: f64) -> Result<Self> {
        let gram = Sym2::new(g11, g12, g22);
        if !gram.is_positive_definite() {
            return Err(Error::InvalidModel(format!(
                "gram matrix [{g11}, {g12}, {g22}] is not positive-definite"
            )));
        }
        Ok(TorusModel {
            gram,
            inv_sqrt_gram: gram.inv_sqrt(),
        })
    }

    pub fn square() -> Self {
        TorusModel::new(1.0, 0.0, 1.0).unwrap()
    }

    pub fn length(&self, c: &TorusClass) -> Result<f64> {
        if c.is_trivial() {
            return Err(Error::TrivialClass("(0,0)".into()));
        }
        Ok(self.gram.quad([c.p as f64, c.q as f64]).sqrt())
    }

    pub fn geodesic(&self, c: &TorusClass) -> Result<BackgroundGeodesic> {
        let len = self.length(c)?;
        let v = [c.p as f64 / len, c.q as f64 / len];
        Ok(BackgroundGeodesic {
            class: ConjugacyClass::Torus(*c),
            length: len,
            path: Path::Torus { x0: [0.0, 0.0], v },
        })
    }

    /// Reduce into the half-open unit cell; returns (point, deck integers).
    pub fn reduce(x: [f64; 2]) -> ([f64; 2], i64, i64) {
        let m = x[0].floor();
        let n = x[1].floor();
        ([x[0] - m, x[1] - n], m as i64, n as i64)
    }

    /// Unit tangent vector for the Gram metric in fiber direction `theta`.
    pub fn unit_vector(&self, theta: f64) -> [f64; 2] {
        mat_vec(self.inv_sqrt_gram, [theta.cos(), theta.sin()])
    }

    /// Mass-1 Liouville average with an n x n spatial grid and n_theta fiber
    /// points; spectrally exact for band-limited integrands.
    pub fn liouville_average<F>(&self, f: F, n: usize, n_theta: usize) -> f64
    where
        F: Fn(&SurfacePoint) -> f64,
    {
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 / n as f64, j as f64 / n as f64];
                for k in 0..n_theta {
                    let theta = 2.0 * PI * k as f64 / n_theta as f64;
                    let v = self.unit_vector(theta);
                    sum += f(&SurfacePoint::Torus { x, v });
                }
            }
        }
        sum / (n * n * n_theta) as f64
    }

    /// Riemannian volume of the torus.
    pub fn volume(&self) -> f64 {
        self.gram.det().sqrt()
    }
}

// ---------------------------------------------------------------------------
// Bolza surface
// ---------------------------------------------------------------------------

/// The Bolza genus-2 surface: the hyperbolic structure from the regular
/// octagon with angle pi/4, with generators satisfying [a,b][c,d] = Id.
///
/// The construction starts from the four opposite-side translations h_k of
/// the octagon (translation length 2 arccosh(1+sqrt(2)) along direction
/// k pi/4) and combines them into standard generators
///   a = h0, b = h1^-1 h2 h3^-1, c = h1^-1 h2, d = h3^-1 h2,
/// all of which are systolic (|trace| = 2(1+sqrt(2))).
#[derive(Debug, Clone)]
pub struct FuchsianModel {
    /// Generators a, b, c, d as disk-model SU(1,1) elements.
    gens: [Mobius; 4],
    /// The same generators as real SL(2, R) matrices (half-plane model).
    pub generators: [[[f64; 2]; 2]; 4],
    /// Octagon vertices in the unit disk.
    pub octagon_vertices: [Complex64; 8],
    /// Opposite-side pairing translations h_0..h_3.
    opposite: [Mobius; 4],
    /// Letter words for h_0..h_3 in terms of a, b, c, d.
    opposite_words: [&'static str; 4],
    /// Euclidean centers of the 8 side-geodesic circles (|z - c_k| = side_radius).
    side_centers: [Complex64; 8],
    side_radius: f64,
    /// Inradius (hyperbolic) of the octagon.
    pub inradius: f64,
}

pub const REDUCTION_STEP_CAP: usize = 10_000;

/// Lexicographically minimal rotation, used as a cheap pre-dedup key for
/// cyclic words before full conjugacy canonicalization.
fn min_rotation(w: &[u8]) -> Vec<u8> {
    let n = w.len();
    let mut best: Option<Vec<u8>> = None;
    for i in 0..n {
        let mut r = Vec::with_capacity(n);
        r.extend_from_slice(&w[i..]);
        r.extend_from_slice(&w[..i]);
        if best.as_ref().is_none_or(|b| r < *b) {
            best = Some(r);
        }
    }
    best.unwrap_or_default()
}

impl FuchsianModel {
    pub fn bolza() -> Result<Self> {
        let sqrt2 = 2f64.sqrt();
        let inradius = (1.0 + sqrt2).acosh();
        let h: Vec<Mobius> = (0..4)
            .map(|k| Mobius::translation_dir(k as f64 * PI / 4.0, 2.0 * inradius))
            .collect();
        let a = h[0];
        let b = h[1].inverse().compose(&h[2]).compose(&h[3].inverse());
        let c = h[1].inverse().compose(&h[2]);
        let d = h[3].inverse().compose(&h[2]);
        let gens = [a, b, c, d];

        // startup validation: relator residual and hyperbolicity
        let comm =
            |x: &Mobius, y: &Mobius| x.compose(y).compose(&x.inverse()).compose(&y.inverse());
        let rel = comm(&a, &b).compose(&comm(&c, &d));
        if rel.dist_to_identity() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "relator residual {:.3e} exceeds 1e-9",
                rel.dist_to_identity()
            )));
        }
        for (i, g) in gens.iter().enumerate() {
            if g.trace().abs() <= 2.0 {
                return Err(Error::InvalidModel(format!(
                    "generator {i} is not hyperbolic (trace {})",
                    g.trace()
                )));
            }
        }

        let circumradius = (3.0 + 2.0 * sqrt2).acosh();
        let rho_v = (circumradius / 2.0).tanh();
        let mut octagon_vertices = [Complex64::new(0.0, 0.0); 8];
        for (k, v) in octagon_vertices.iter_mut().enumerate() {
            *v = Complex64::from_polar(rho_v, (2.0 * k as f64 + 1.0) * PI / 8.0);
        }

        let rho_mid = (inradius / 2.0).tanh();
        let xc = (1.0 + rho_mid * rho_mid) / (2.0 * rho_mid);
        let side_radius = (xc * xc - 1.0).sqrt();
        let mut side_centers = [Complex64::new(0.0, 0.0); 8];
        for (k, s) in side_centers.iter_mut().enumerate() {
            *s = Complex64::from_polar(xc, k as f64 * PI / 4.0);
        }

        let generators = [
            su11_to_sl2r(&a)?,
            su11_to_sl2r(&b)?,
            su11_to_sl2r(&c)?,
            su11_to_sl2r(&d)?,
        ];

        Ok(FuchsianModel {
            gens,
            generators,
            octagon_vertices,
            opposite: [h[0], h[1], h[2], h[3]],
            opposite_words: ["a", "BcdC", "Bcd", "Bc"],
            side_centers,
            side_radius,
            inradius,
        })
    }

    /// Opposite-side pairing translations of the octagon.
    pub fn side_pairings(&self) -> [Mobius; 4] {
        self.opposite
    }

    pub fn generator(&self, letter: u8) -> Mobius {
        let g = self.gens[(letter >> 1) as usize];
        if letter & 1 == 1 {
            g.inverse()
        } else {
            g
        }
    }

    /// Holonomy representation: the matrix of a word, composing left to right.
    pub fn rho(&self, word: &[u8]) -> Mobius {
        let mut m = Mobius::identity();
        for &l in word {
            m = m.compose(&self.generator(l));
        }
        m
    }

    pub fn length(&self, w: &CyclicWord) -> Result<f64> {
        let m = self.rho(w.letters());
        m.translation_length().ok_or_else(|| {
            Error::InvalidModel(format!(
                "word {w} is not hyperbolic (|trace| = {:.6} <= 2)",
                m.trace().abs()
            ))
        })
    }

    pub fn geodesic(&self, w: &CyclicWord) -> Result<BackgroundGeodesic> {
        let m = self.rho(w.letters());
        let length = m.translation_length().ok_or_else(|| {
            Error::InvalidModel(format!("word {w} is not hyperbolic"))
        })?;
        let (zm, zp) = m
            .axis_endpoints()
            .ok_or_else(|| Error::InvalidModel(format!("word {w} has no axis")))?;
        let from_axis = axis_chart(zm, zp).inverse();
        Ok(BackgroundGeodesic {
            class: ConjugacyClass::Surface(w.clone()),
            length,
            path: Path::Bolza { from_axis },
        })
    }

    /// All conjugacy classes with translation length <= t_max, found by a
    /// depth-first search over freely reduced words. A branch is pruned when
    /// its orbit point leaves the ball of radius
    /// t_max + 2 * circumradius + margin: a cyclically reduced spelling of a
    /// class of length <= t_max fellow-travels its axis, which passes through
    /// the octagon, so its prefix orbit stays within that radius up to the
    /// fellow-traveling slack absorbed by margin. Word length is capped at
    /// max_word_len. Returns (canonical word, length), sorted by length.
    pub fn classes_up_to_length(
        &self,
        t_max: f64,
        max_word_len: usize,
        margin: f64,
    ) -> Result<Vec<(CyclicWord, f64)>> {
        let circumradius = (3.0 + 2.0 * 2f64.sqrt()).acosh();
        let prune = t_max + 2.0 * circumradius + margin;
        let gens: Vec<Mobius> = (0..8u8).map(|l| self.generator(l)).collect();
        let mut minrot_seen: std::collections::HashSet<Vec<u8>> = Default::default();
        let mut classes: std::collections::HashMap<String, (CyclicWord, f64)> =
            Default::default();
        // stack of (group element, word, depth)
        let mut word: Vec<u8> = Vec::with_capacity(max_word_len);
        let mut stack: Vec<(Mobius, u8, usize)> = (0..8u8)
            .map(|l| (gens[l as usize], l, 1))
            .collect();
        while let Some((g, letter, depth)) = stack.pop() {
            word.truncate(depth - 1);
            word.push(letter);
            if disk::hyperbolic_distance(Complex64::new(0.0, 0.0), g.apply(Complex64::new(0.0, 0.0))) > prune {
                continue;
            }
            // candidate check: cyclically reduced and short enough
            if word[0] != letter_inverse(letter) {
                if let Some(len) = g.translation_length() {
                    if len <= t_max && len > 0.5 {
                        let key = min_rotation(&word);
                        if minrot_seen.insert(key) {
                            let canon = canonicalize(&word)?;
                            if !canon.is_empty() {
                                classes.entry(canon.to_string()).or_insert((canon, len));
                            }
                        }
                    }
                }
            }
            if depth < max_word_len {
                for l in 0..8u8 {
                    if l != letter_inverse(letter) {
                        stack.push((g.compose(&gens[l as usize]), l, depth + 1));
                    }
                }
            }
        }
        let mut out: Vec<(CyclicWord, f64)> = classes.into_values().collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.to_string().cmp(&b.0.to_string())));
        Ok(out)
    }

    /// Is z inside the closed fundamental octagon (within tol)?
    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        self.side_centers
            .iter()
            .all(|&c| (z - c).norm() >= self.side_radius - tol)
    }

    /// Reduce z into the fundamental octagon. Returns the reduced point, the
    /// deck transformation W applied (reduced = W(z)), and W as a letter word.
    pub fn reduce(&self, z: Complex64) -> Result<(Complex64, Mobius, String)> {
        if z.norm() >= 1.0 {
            return Err(Error::InvalidModel(
                "point is not in the open unit disk".into(),
            ));
        }
        let mut cur = z;
        let mut deck = Mobius::identity();
        let mut word = String::new();
        for _ in 0..REDUCTION_STEP_CAP {
            if self.contains(cur, 1e-12) {
                return Ok((cur, deck, word));
            }
            // greedy: apply the side pairing that brings the point closest
            // to the origin
            let mut best: Option<(f64, Mobius, String)> = None;
            for k in 0..4 {
                for inv in [false, true] {
                    let g = if inv {
                        self.opposite[k].inverse()
                    } else {
                        self.opposite[k]
                    };
                    let cand = g.apply(cur);
                    let letters = if inv {
                        word_to_string(&crate::homotopy::word_inverse(
                            &word_from_str(self.opposite_words[k]).unwrap(),
                        ))
                    } else {
                        self.opposite_words[k].to_string()
                    };
                    if best.as_ref().map_or(true, |(n, _, _)| cand.norm() < *n) {
                        best = Some((cand.norm(), g, letters));
                    }
                }
            }
            let (norm, g, letters) = best.unwrap();
            if norm >= cur.norm() {
                // no move improves: the point is on a boundary within noise
                return Ok((cur, deck, word));
            }
            cur = g.apply(cur);
            deck = g.compose(&deck);
            word = format!("{letters}{word}");
        }
        Err(Error::ReductionFailure(REDUCTION_STEP_CAP))
    }

    /// Mass-1 Liouville average over the unit tangent bundle, by per-sector
    /// Gauss-Legendre quadrature in polar coordinates and a uniform fiber
    /// rule; self-normalized by the computed area.
    pub fn liouville_average<F>(&self, f: F, n_phi: usize, n_rho: usize, n_theta: usize) -> f64
    where
        F: Fn(&SurfacePoint) -> f64,
    {
        let gl_phi = gauss_legendre(n_phi);
        let gl_rho = gauss_legendre(n_rho);
        let mut num = 0.0;
        let mut mass = 0.0;
        for k in 0..8 {
            let phi0 = k as f64 * PI / 4.0 - PI / 8.0;
            let phi1 = k as f64 * PI / 4.0 + PI / 8.0;
            for &(xp, wp) in &gl_phi {
                let phi = 0.5 * (phi0 + phi1) + 0.5 * (phi1 - phi0) * xp;
                let jac_phi = 0.5 * (phi1 - phi0) * wp;
                let rho_max = self.boundary_radius(phi - k as f64 * PI / 4.0);
                for &(xr, wr) in &gl_rho {
                    let rho = 0.5 * rho_max * (1.0 + xr);
                    let jac = jac_phi * 0.5 * rho_max * wr;
                    let z = Complex64::from_polar(rho, phi);
                    let lam2 = {
                        let l = 2.0 / (1.0 - rho * rho);
                        l * l
                    };
                    let darea = lam2 * rho * jac;
                    let mut fiber = 0.0;
                    for t in 0..n_theta {
                        let theta = 2.0 * PI * t as f64 / n_theta as f64;
                        fiber += f(&SurfacePoint::Disk { z, theta });
                    }
                    num += darea * fiber / n_theta as f64;
                    mass += darea;
                }
            }
        }
        num / mass
    }

    /// Euclidean radius of the octagon boundary at angular offset `dphi` from
    /// the nearest side midpoint direction (|dphi| <= pi/8).
    fn boundary_radius(&self, dphi: f64) -> f64 {
        let xc = self.side_centers[0].norm();
        let c = dphi.cos();
        xc * c - (xc * xc * c * c - 1.0).sqrt()
    }

    /// Hyperbolic area of the octagon via the same quadrature (for testing;
    /// the exact value is 4 pi).
    pub fn area(&self, n_phi: usize, n_rho: usize) -> f64 {
        let gl_phi = gauss_legendre(n_phi);
        let gl_rho = gauss_legendre(n_rho);
        let mut mass = 0.0;
        for k in 0..8 {
            let phi0 = k as f64 * PI / 4.0 - PI / 8.0;
            let phi1 = k as f64 * PI / 4.0 + PI / 8.0;
            for &(xp, wp) in &gl_phi {
                let phi = 0.5 * (phi0 + phi1) + 0.5 * (phi1 - phi0) * xp;
                let jac_phi = 0.5 * (phi1 - phi0) * wp;
                let rho_max = self.boundary_radius(phi - k as f64 * PI / 4.0);
                for &(xr, wr) in &gl_rho {
                    let rho = 0.5 * rho_max * (1.0 + xr);
                    let jac = jac_phi * 0.5 * rho_max * wr;
                    let l = 2.0 / (1.0 - rho * rho);
                    mass += l * l * rho * jac;
                }
            }
        }
        mass
    }
}

/// Chart sending the axis with endpoints (zm, zp) on the unit circle to the
/// real diameter, zm -> -1 and zp -> +1.
fn axis_chart(zm: Complex64, zp: Complex64) -> Mobius {
    let phi_p = zp.arg();
    let mut delta = zm.arg() - phi_p;
    while delta <= 0.0 {
        delta += 2.0 * PI;
    }
    while delta > 2.0 * PI {
        delta -= 2.0 * PI;
    }
    let sigma = delta / 2.0; // in (0, pi)
    let r1 = Mobius::rotation(-phi_p - sigma);
    // endpoints now at e^{+- i sigma}; the geodesic crosses the real axis at
    let x0 = (PI / 4.0 - sigma / 2.0).tan();
    let d0 = 2.0 * x0.atanh();
    let t = Mobius::translation_x(-d0);
    let w = t.compose(&r1).apply(zp);
    Mobius::rotation(-w.arg()).compose(&t).compose(&r1)
}

/// Convert an SU(1,1) disk-model isometry to a real SL(2,R) matrix via the
/// Cayley transform.
fn su11_to_sl2r(m: &Mobius) -> Result<[[f64; 2]; 2]> {
    let i = Complex64::new(0.0, 1.0);
    // C: upper half-plane -> disk, z -> (z - i)/(z + i)
    let c = [[Complex64::new(1.0, 0.0), -i], [Complex64::new(1.0, 0.0), i]];
    let cinv_det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let cinv = [
        [c[1][1] / cinv_det, -c[0][1] / cinv_det],
        [-c[1][0] / cinv_det, c[0][0] / cinv_det],
    ];
    let mm = [[m.a, m.b], [m.b.conj(), m.a.conj()]];
    let mul = |x: [[Complex64; 2]; 2], y: [[Complex64; 2]; 2]| {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                out[r][s] = x[r][0] * y[0][s] + x[r][1] * y[1][s];
            }
        }
        out
    };
    let res = mul(mul(cinv, mm), c);
    let det = res[0][0] * res[1][1] - res[0][1] * res[1][0];
    let scale = det.sqrt();
    let mut real = [[0.0f64; 2]; 2];
    for r in 0..2 {
        for s in 0..2 {
            let e = res[r][s] / scale;
            if e.im.abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "Cayley conjugation produced a non-real entry {e}"
                )));
            }
            real[r][s] = e.re;
        }
    }
    Ok(real)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homotopy::canonicalize;

    fn bolza() -> FuchsianModel {
        FuchsianModel::bolza().unwrap()
    }

    fn word(s: &str) -> CyclicWord {
        canonicalize(&word_from_str(s).unwrap()).unwrap()
    }

    #[test]
    fn torus_lengths() {
        let t = TorusModel::square();
        let c = TorusClass::new(2, 1);
        assert!((t.length(&c).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!(t.length(&TorusClass::new(0, 0)).is_err());
    }

    #[test]
    fn bolza_generator_traces_and_systole() {
        let b = bolza();
        let expect = 2.0 * (1.0 + 2f64.sqrt());
        for l in [0u8, 2, 4, 6] {
            assert!((b.generator(l).trace().abs() - expect).abs() < 1e-9);
        }
        let systole = 2.0 * (1.0 + 2f64.sqrt()).acosh();
        assert!((b.length(&word("a")).unwrap() - systole).abs() < 1e-9);
    }

    #[test]
    fn bolza_real_generators_satisfy_relator() {
        let b = bolza();
        let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
            let mut o = [[0.0; 2]; 2];
            for r in 0..2 {
                for s in 0..2 {
                    o[r][s] = x[r][0] * y[0][s] + x[r][1] * y[1][s];
                }
            }
            o
        };
        let inv = |x: [[f64; 2]; 2]| [[x[1][1], -x[0][1]], [-x[1][0], x[0][0]]];
        let [a, bb, c, d] = b.generators;
        let comm = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| mul(mul(x, y), mul(inv(x), inv(y)));
        let rel = mul(comm(a, bb), comm(c, d));
        // sign-insensitive distance to the identity
        let res: f64 = {
            let dp: f64 = (0..2)
                .map(|r| {
                    (0..2)
                        .map(|s| {
                            let id = if r == s { 1.0 } else { 0.0 };
                            (rel[r][s] - id).powi(2)
                        })
                        .sum::<f64>()
                })
                .sum();
            let dm: f64 = (0..2)
                .map(|r| {
                    (0..2)
                        .map(|s| {
                            let id = if r == s { -1.0 } else { 0.0 };
                            (rel[r][s] - id).powi(2)
                        })
                        .sum::<f64>()
                })
                .sum();
            dp.min(dm).sqrt()
        };
        assert!(res < 1e-9, "relator residual {res}");
        for g in b.generators {
            assert!(((g[0][0] * g[1][1] - g[0][1] * g[1][0]) - 1.0).abs() < 1e-10);
            assert!((g[0][0] + g[1][1]).abs() > 2.0);
        }
    }

    #[test]
    fn opposite_letter_words_match() {
        let b = bolza();
        for k in 0..4 {
            let w = word_from_str(b.opposite_words[k]).unwrap();
            let res = b
                .rho(&w)
                .compose(&b.opposite[k].inverse())
                .dist_to_identity();
            assert!(res < 1e-9, "h_{k} letter word residual {res}");
        }
    }

    #[test]
    fn reduction_recovers_generator_word() {
        let b = bolza();
        let z = b.generator(0).apply(Complex64::new(0.0, 0.0)); // a . origin
        let (w, deck, word) = b.reduce(z).unwrap();
        assert!(w.norm() < 1e-9);
        assert_eq!(word, "A");
        // inverse deck word recovers the input
        assert!((deck.inverse().apply(w) - z).norm() < 1e-9);
    }

    #[test]
    fn reduction_random_points_roundtrip() {
        use rand::{Rng, SeedableRng};
        let b = bolza();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let z = Complex64::from_polar(rng.gen_range(0.0..0.97), rng.gen_range(0.0..2.0 * PI));
            let (w, deck, word) = b.reduce(z).unwrap();
            assert!(b.contains(w, 1e-9));
            assert!((deck.inverse().apply(w) - z).norm() < 1e-9, "roundtrip failed");
            // the deck word letters reproduce the deck matrix
            let m = b.rho(&word_from_str(&word).unwrap());
            assert!(m.compose(&deck.inverse()).dist_to_identity() < 1e-7);
        }
    }

    #[test]
    fn bolza_area_is_4pi() {
        let b = bolza();
        let area = b.area(24, 48);
        assert!((area - 4.0 * PI).abs() / (4.0 * PI) < 1e-8, "area {area}");
    }

    #[test]
    fn axis_periodicity() {
        let b = bolza();
        for s in ["a", "ab", "abC"] {
            let w = word(s);
            let geo = b.geodesic(&w).unwrap();
            let m = b.rho(w.letters());
            let SurfacePoint::Disk { z: z0, theta: th0 } = geo.point_at_cover(0.0) else {
                panic!()
            };
            let SurfacePoint::Disk { z: z1, theta: th1 } = geo.point_at_cover(geo.length) else {
                panic!()
            };
            // translation by the holonomy maps gamma(0) to gamma(L)
            assert!((m.apply(z0) - z1).norm() < 1e-8, "axis mismatch for {s}");
            let dth = (m.derivative(z0).arg() + th0 - th1).rem_euclid(2.0 * PI);
            assert!(dth.min(2.0 * PI - dth) < 1e-8);
        }
    }

    #[test]
    fn length_symmetry_and_powers() {
        let b = bolza();
        for s in ["a", "ab", "abC", "bD"] {
            let w = word(s);
            let li = b.length(&w.inverse()).unwrap();
            let l = b.length(&w).unwrap();
            assert!((l - li).abs() < 1e-10);
        }
        // power law on the torus
        let t = TorusModel::new(1.3, 0.2, 0.9).unwrap();
        let l1 = t.length(&TorusClass::new(1, 2)).unwrap();
        let l3 = t.length(&TorusClass::new(3, 6)).unwrap();
        assert!((l3 - 3.0 * l1).abs() < 1e-9);
        // power law for a hyperbolic word
        let w3 = word("ababab");
        assert!((b.length(&w3).unwrap() - 3.0 * b.length(&word("ab")).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn geodesic_unit_speed_and_length_consistency() {
        let b = bolza();
        let geo = b.geodesic(&word("ab")).unwrap();
        // numerically integrate the speed along the path; arclength
        // parametrization makes this equal to the length
        let n = 2000;
        let dt = geo.length / n as f64;
        let mut acc = 0.0;
        let mut prev = match geo.point_at_cover(0.0) {
            SurfacePoint::Disk { z, .. } => z,
            _ => panic!(),
        };
        for i in 1..=n {
            let z = match geo.point_at_cover(i as f64 * dt) {
                SurfacePoint::Disk { z, .. } => z,
                _ => panic!(),
            };
            acc += crate::disk::hyperbolic_distance(prev, z);
            prev = z;
        }
        assert!((acc - geo.length).abs() < 1e-8 * geo.length);
    }

    #[test]
    fn liouville_averages_torus() {
        let t = TorusModel::square();
        let one = t.liouville_average(|_| 1.0, 16, 16);
        assert!((one - 1.0).abs() < 1e-14);
        // fiber average of v1^2 over the unit circle is 1/2
        let dx2 = t.liouville_average(
            |p| match p {
                SurfacePoint::Torus { v, .. } => v[0] * v[0],
                _ => 0.0,
            },
            16,
            16,
        );
        assert!((dx2 - 0.5).abs() < 1e-12);
        // any 1-form averages to zero by fiber parity
        let oneform = t.liouville_average(
            |p| match p {
                SurfacePoint::Torus { v, .. } => 0.3 * v[0] - 1.7 * v[1],
                _ => 0.0,
            },
            16,
            16,
        );
        assert!(oneform.abs() < 1e-14);
    }

    #[test]
    fn liouville_flow_invariance_torus() {
        let t = TorusModel::new(1.1, 0.1, 0.8).unwrap();
        let model = SurfaceModel::Torus(t.clone());
        let f = |p: &SurfacePoint| match p {
            SurfacePoint::Torus { x, v } => {
                (2.0 * PI * x[0]).cos() * v[1] * v[1] + (2.0 * PI * (x[0] + x[1])).sin() * v[0]
            }
            _ => 0.0,
        };
        let base = t.liouville_average(f, 32, 32);
        let flowed = t.liouville_average(
            |p| {
                let q = model.flow(p, 0.37).unwrap();
                f(&q)
            },
            32,
            32,
        );
        assert!((base - flowed).abs() < 1e-6, "{base} vs {flowed}");
    }
}
