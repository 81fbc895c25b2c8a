use nalgebra::{DMatrix, SMatrix};

/// 2x2 Gauss points on [0, 1].
pub const GAUSS2: [f64; 2] = [0.5 - 0.5 / 1.732_050_807_568_877_2, 0.5 + 0.5 / 1.732_050_807_568_877_2];

/// 3x3 Gauss rule on [0, 1]: (points, weights).
pub const GAUSS3: ([f64; 3], [f64; 3]) = (
    [0.5 - 0.387_298_334_620_741_7, 0.5, 0.5 + 0.387_298_334_620_741_7],
    [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
);

pub type Mat8 = SMatrix<f64, 8, 8>;
pub type Mat4 = SMatrix<f64, 4, 4>;

/// Bilinear shape functions on the unit square, corners (0,0), (1,0), (0,1), (1,1).
#[inline]
pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), (1.0 - xi) * eta, xi * eta]
}

/// Reference derivatives `(d/dxi, d/deta)` of the shape functions.
#[inline]
pub fn shape_grad_ref(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [-eta, 1.0 - xi],
        [eta, xi],
    ]
}

/// Q1 vector element on an `hx x hy` rectangle with precomputed stiffness parts.
///
/// The stiffness of a cell with constant Lamé parameters is
/// `lambda * k_lambda + mu * k_mu`, both integrated exactly by 2x2 Gauss.
/// Dofs are interleaved: `2a + c` for corner `a`, component `c`.
#[derive(Clone, Debug)]
pub struct Q1Element {
    pub hx: f64,
    pub hy: f64,
    pub k_lambda: Mat8,
    pub k_mu: Mat8,
    /// Scalar consistent mass.
    pub mass: Mat4,
}

impl Q1Element {
    pub fn new(hx: f64, hy: f64) -> Self {
        let mut k_lambda = Mat8::zeros();
        let mut k_mu = Mat8::zeros();
        let mut mass = Mat4::zeros();
        let w = 0.25 * hx * hy;
        for &xi in &GAUSS2 {
            for &eta in &GAUSS2 {
                let (div, strain) = Self::strain_rows(hx, hy, xi, eta);
                let n = shape(xi, eta);
                for a in 0..8 {
                    for b in 0..8 {
                        k_lambda[(a, b)] += w * div[a] * div[b];
                        // 2 mu eps:eps = mu (2 e11^2 + 2 e22^2 + g12^2)
                        k_mu[(a, b)] += w
                            * (2.0 * strain[0][a] * strain[0][b]
                                + 2.0 * strain[1][a] * strain[1][b]
                                + strain[2][a] * strain[2][b]);
                    }
                }
                for a in 0..4 {
                    for b in 0..4 {
                        mass[(a, b)] += w * n[a] * n[b];
                    }
                }
            }
        }
        Self { hx, hy, k_lambda, k_mu, mass }
    }

    /// Rows of the divergence and the strain `(e11, e22, 2 e12)` in terms of the 8 dofs.
    pub fn strain_rows(hx: f64, hy: f64, xi: f64, eta: f64) -> ([f64; 8], [[f64; 8]; 3]) {
        let g = shape_grad_ref(xi, eta);
        let mut div = [0.0; 8];
        let mut strain = [[0.0; 8]; 3];
        for a in 0..4 {
            let (dx, dy) = (g[a][0] / hx, g[a][1] / hy);
            div[2 * a] = dx;
            div[2 * a + 1] = dy;
            strain[0][2 * a] = dx;
            strain[1][2 * a + 1] = dy;
            strain[2][2 * a] = dy;
            strain[2][2 * a + 1] = dx;
        }
        (div, strain)
    }

    pub fn stiffness(&self, lambda: f64, mu: f64) -> Mat8 {
        self.k_lambda * lambda + self.k_mu * mu
    }

    /// Vector mass `M (x) I_2` scaled by `w`.
    pub fn vector_mass(&self, w: f64) -> Mat8 {
        let mut m = Mat8::zeros();
        for a in 0..4 {
            for b in 0..4 {
                let v = w * self.mass[(a, b)];
                m[(2 * a, 2 * b)] = v;
                m[(2 * a + 1, 2 * b + 1)] = v;
            }
        }
        m
    }

    /// Physical gradients of the four shape functions at a reference point.
    pub fn grads(&self, xi: f64, eta: f64) -> [[f64; 2]; 4] {
        let g = shape_grad_ref(xi, eta);
        g.map(|[a, b]| [a / self.hx, b / self.hy])
    }
}

/// 1D consistent mass on a segment of length `len`, scaled by `w`.
#[inline]
pub fn segment_mass(len: f64, w: f64) -> [[f64; 2]; 2] {
    let d = w * len / 3.0;
    let o = w * len / 6.0;
    [[d, o], [o, d]]
}

pub fn mat8_to_dmatrix(m: &Mat8) -> DMatrix<f64> {
    DMatrix::from_fn(8, 8, |i, j| m[(i, j)])
}
