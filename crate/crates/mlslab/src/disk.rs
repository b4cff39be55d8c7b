//! Moebius transformations of the unit disk in SU(1,1) form and basic
//! hyperbolic geometry helpers (Poincare disk model, curvature -1).

use num_complex::Complex64;

/// An orientation-preserving isometry of the unit disk, stored as the
/// SU(1,1) matrix [[a, b], [conj(b), conj(a)]] with |a|^2 - |b|^2 = 1.
/// It acts by z -> (a z + b) / (conj(b) z + conj(a)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
}

impl Mobius {
    pub fn identity() -> Self {
        Mobius {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    /// Hyperbolic translation along the positive real axis by distance `len`.
    pub fn translation_x(len: f64) -> Self {
        Mobius {
            a: Complex64::new((len / 2.0).cosh(), 0.0),
            b: Complex64::new((len / 2.0).sinh(), 0.0),
        }
    }

    /// Rotation about the origin by angle `theta`.
    pub fn rotation(theta: f64) -> Self {
        Mobius {
            a: Complex64::from_polar(1.0, theta / 2.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    /// The isometry sending `p` to the origin: z -> (z - p)/(1 - conj(p) z).
    pub fn point_to_origin(p: Complex64) -> Self {
        let s = (1.0 - p.norm_sqr()).sqrt();
        Mobius {
            a: Complex64::new(1.0 / s, 0.0),
            b: -p / s,
        }
    }

    /// Translation along the geodesic through the origin in direction `theta`
    /// by hyperbolic distance `len`.
    pub fn translation_dir(theta: f64, len: f64) -> Self {
        let r = Mobius::rotation(theta);
        r.compose(&Mobius::translation_x(len)).compose(&r.inverse())
    }

    /// The unique orientation-preserving isometry sending `p1 -> q1` and
    /// `p2 -> q2`; requires d(p1, p2) = d(q1, q2).
    pub fn from_two_points(
        p1: Complex64,
        p2: Complex64,
        q1: Complex64,
        q2: Complex64,
    ) -> Self {
        let m = Mobius::point_to_origin(p1);
        let n = Mobius::point_to_origin(q1);
        let phi_p = m.apply(p2).arg();
        let phi_q = n.apply(q2).arg();
        n.inverse()
            .compose(&Mobius::rotation(phi_q - phi_p))
            .compose(&m)
    }

    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    pub fn inverse(&self) -> Mobius {
        Mobius {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    /// Derivative dw/dz of the action at `z` (the map is holomorphic).
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let den = self.b.conj() * z + self.a.conj();
        1.0 / (den * den)
    }

    /// Trace of the SU(1,1) matrix (always real).
    pub fn trace(&self) -> f64 {
        2.0 * self.a.re
    }

    /// Frobenius distance to the identity or its negative, whichever is
    /// smaller (the group acts through PSU(1,1)).
    pub fn dist_to_identity(&self) -> f64 {
        let d = |sign: f64| {
            ((self.a - sign).norm_sqr() + self.b.norm_sqr()).sqrt() * std::f64::consts::SQRT_2
        };
        d(1.0).min(d(-1.0))
    }

    /// Translation length 2 arccosh(|tr|/2) of a hyperbolic element.
    pub fn translation_length(&self) -> Option<f64> {
        let t = self.trace().abs() / 2.0;
        if t > 1.0 {
            Some(2.0 * t.acosh())
        } else {
            None
        }
    }

    /// Attracting and repelling fixed points on the unit circle of a
    /// hyperbolic element, as (repelling, attracting).
    pub fn axis_endpoints(&self) -> Option<(Complex64, Complex64)> {
        // Fixed points solve conj(b) z^2 + (conj(a) - a) z - b = 0.
        let cb = self.b.conj();
        if cb.norm() < 1e-15 {
            return None; // rotation about the origin or identity
        }
        let bb = self.a.conj() - self.a;
        let disc = (bb * bb + 4.0 * cb * self.b).sqrt();
        let z1 = (-bb + disc) / (2.0 * cb);
        let z2 = (-bb - disc) / (2.0 * cb);
        // Attracting fixed point: |derivative| < 1.
        if self.derivative(z1).norm() < 1.0 {
            Some((z2, z1))
        } else {
            Some((z1, z2))
        }
    }
}

/// Hyperbolic distance between two points of the disk.
pub fn hyperbolic_distance(z: Complex64, w: Complex64) -> f64 {
    let num = (z - w).norm_sqr();
    let den = (1.0 - z.norm_sqr()) * (1.0 - w.norm_sqr());
    (1.0 + 2.0 * num / den).acosh()
}

/// Point at hyperbolic distance `s` from the origin along direction `theta`.
pub fn point_at(theta: f64, s: f64) -> Complex64 {
    Complex64::from_polar((s / 2.0).tanh(), theta)
}

/// Conformal factor lambda(z) with metric ds^2 = lambda^2 |dz|^2.
pub fn conformal_factor(z: Complex64) -> f64 {
    2.0 / (1.0 - z.norm_sqr())
}

/// Geodesic flow for time `t` starting at `z` with unit direction `theta`
/// (Euclidean angle of the velocity); returns the new point and direction.
pub fn geodesic_flow(z: Complex64, theta: f64, t: f64) -> (Complex64, f64) {
    let m = Mobius::point_to_origin(z);
    // Direction transforms by the argument of the holomorphic derivative.
    let phi = theta + m.derivative(z).arg();
    let back = m.inverse().compose(&Mobius::translation_dir(phi, t));
    let w = back.apply(Complex64::new(0.0, 0.0));
    let dir = (back.derivative(Complex64::new(0.0, 0.0)) * Complex64::from_polar(1.0, phi)).arg();
    (w, dir)
}
