//! Minimal 2x2 real linear algebra used throughout.

/// Symmetric 2x2 matrix / quadratic form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn identity() -> Self {
        Sym2::new(1.0, 0.0, 1.0)
    }

    pub fn zero() -> Self {
        Sym2::new(0.0, 0.0, 0.0)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    /// Quadratic form value q(u, u).
    pub fn quad(&self, u: [f64; 2]) -> f64 {
        self.xx * u[0] * u[0] + 2.0 * self.xy * u[0] * u[1] + self.yy * u[1] * u[1]
    }

    /// Bilinear form value q(u, w).
    pub fn bilin(&self, u: [f64; 2], w: [f64; 2]) -> f64 {
        self.xx * u[0] * w[0] + self.xy * (u[0] * w[1] + u[1] * w[0]) + self.yy * u[1] * w[1]
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, u: [f64; 2]) -> [f64; 2] {
        [
            self.xx * u[0] + self.xy * u[1],
            self.xy * u[0] + self.yy * u[1],
        ]
    }

    pub fn inverse(&self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    /// Eigen-decomposition: returns (eigenvalues, orthonormal eigenvectors).
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let tr = self.trace();
        let disc = ((self.xx - self.yy) * 0.5).hypot(self.xy);
        let l1 = tr * 0.5 + disc;
        let l2 = tr * 0.5 - disc;
        let v1 = if self.xy.abs() > 1e-300 {
            let v = [self.xy, l1 - self.xx];
            let n = v[0].hypot(v[1]);
            [v[0] / n, v[1] / n]
        } else if self.xx >= self.yy {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let v2 = [-v1[1], v1[0]];
        ([l1, l2], [v1, v2])
    }

    /// Inverse square root G^{-1/2} of a positive-definite form.
    pub fn inv_sqrt(&self) -> [[f64; 2]; 2] {
        let ([l1, l2], [v1, v2]) = self.eigen();
        let (s1, s2) = (1.0 / l1.sqrt(), 1.0 / l2.sqrt());
        [
            [
                s1 * v1[0] * v1[0] + s2 * v2[0] * v2[0],
                s1 * v1[0] * v1[1] + s2 * v2[0] * v2[1],
            ],
            [
                s1 * v1[0] * v1[1] + s2 * v2[0] * v2[1],
                s1 * v1[1] * v1[1] + s2 * v2[1] * v2[1],
            ],
        ]
    }
}

pub fn mat_vec(m: [[f64; 2]; 2], u: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * u[0] + m[0][1] * u[1],
        m[1][0] * u[0] + m[1][1] * u[1],
    ]
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // initial guess (Chebyshev-like), Newton iteration on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0f64, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}


/// Prefactored solver for a symmetric cyclic tridiagonal system with
/// constant diagonal and off-diagonal entries (periodic 1D stencil).
#[derive(Debug, Clone)]
pub struct CyclicTridiagonal {
    n: usize,
    off: f64,
    gamma: f64,
    cp: Vec<f64>,
    den: Vec<f64>,
    q: Vec<f64>,
    denom: f64,
}

impl CyclicTridiagonal {
    pub fn new(n: usize, diag: f64, off: f64) -> Self {
        assert!(n >= 3);
        let gamma = -diag;
        let b0p = diag - gamma;
        let bnp = diag - off * off / gamma;
        let bi = |i: usize| {
            if i == 0 {
                b0p
            } else if i == n - 1 {
                bnp
            } else {
                diag
            }
        };
        let mut cp = vec![0.0; n];
        let mut den = vec![0.0; n];
        den[0] = bi(0);
        cp[0] = off / den[0];
        for i in 1..n {
            den[i] = bi(i) - off * cp[i - 1];
            cp[i] = off / den[i];
        }
        let mut s = CyclicTridiagonal {
            n,
            off,
            gamma,
            cp,
            den,
            q: Vec::new(),
            denom: 1.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        s.q = s.solve_inner(&u);
        s.denom = 1.0 + s.q[0] + off / gamma * s.q[n - 1];
        s
    }

    fn solve_inner(&self, d: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut dp = vec![0.0; n];
        dp[0] = d[0] / self.den[0];
        for i in 1..n {
            dp[i] = (d[i] - self.off * dp[i - 1]) / self.den[i];
        }
        let mut x = dp;
        for i in (0..n - 1).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
        x
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let y = self.solve_inner(rhs);
        let fac = (y[0] + self.off / self.gamma * y[self.n - 1]) / self.denom;
        y.into_iter()
            .zip(self.q.iter())
            .map(|(yi, qi)| yi - fac * qi)
            .collect()
    }
}

#[cfg(test)]
mod cyclic_tests {
    use super::*;

    #[test]
    fn cyclic_tridiagonal_solve() {
        let n = 12;
        let (diag, off) = (2.02, -1.0);
        let solver = CyclicTridiagonal::new(n, diag, off);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = solver.solve(&rhs);
        for i in 0..n {
            let got = diag * x[i] + off * (x[(i + 1) % n] + x[(i + n - 1) % n]);
            assert!((got - rhs[i]).abs() < 1e-12, "row {i}: {got} vs {}", rhs[i]);
        }
    }
}
