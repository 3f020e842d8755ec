use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Gaussian radial kernel `exp(-|x - y|^2 / (2 h^2))`, so `K(x, x) = 1`.
#[inline]
pub fn gaussian_kernel(x: Point, y: Point, bandwidth: f64) -> f64 {
    let (dx, dy) = (x[0] - y[0], x[1] - y[1]);
    (-(dx * dx + dy * dy) / (2.0 * bandwidth * bandwidth)).exp()
}

/// `side x side` cell-centred points on `[-1, 1]^2`, row-major with `y`
/// as the row index.
pub fn cell_centred_lattice(side: usize) -> Vec<Point> {
    let h = 2.0 / side as f64;
    let coord = |i: usize| -1.0 + (i as f64 + 0.5) * h;
    (0..side)
        .flat_map(|r| (0..side).map(move |c| [coord(c), coord(r)]))
        .collect()
}

/// Pixel grid, photometric and geometric control points, and the two kernel
/// bandwidths of the template model.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSpec {
    pub grid_side: usize,
    pub photo_side: usize,
    pub geo_side: usize,
    pub photo_bandwidth: f64,
    pub geo_bandwidth: f64,
    pixels: Vec<Point>,
    photo_points: Vec<Point>,
    geo_points: Vec<Point>,
    /// `K_g(v_u, x_gj)`, row-major `pixels x geo points`.
    geo_at_pixels: Vec<f64>,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        Self::square(20, 5, 3).expect("default spec is valid")
    }
}

impl TemplateSpec {
    /// Lattices of the given sides with bandwidths equal to the control-point
    /// spacing.
    pub fn square(grid_side: usize, photo_side: usize, geo_side: usize) -> Result<Self> {
        if photo_side == 0 || geo_side == 0 {
            return Err(Error::InvalidParameter(
                "control lattices need at least one point".into(),
            ));
        }
        Self::new(
            grid_side,
            photo_side,
            geo_side,
            2.0 / photo_side as f64,
            2.0 / geo_side as f64,
        )
    }

    pub fn new(
        grid_side: usize,
        photo_side: usize,
        geo_side: usize,
        photo_bandwidth: f64,
        geo_bandwidth: f64,
    ) -> Result<Self> {
        if grid_side == 0 || photo_side == 0 || geo_side == 0 {
            return Err(Error::InvalidParameter(
                "grid and lattices need at least one point".into(),
            ));
        }
        if !(photo_bandwidth > 0.0 && geo_bandwidth > 0.0) {
            return Err(Error::InvalidParameter(
                "kernel bandwidths must be positive".into(),
            ));
        }
        let pixels = cell_centred_lattice(grid_side);
        let photo_points = cell_centred_lattice(photo_side);
        let geo_points = cell_centred_lattice(geo_side);
        let geo_at_pixels = pixels
            .iter()
            .flat_map(|v| {
                geo_points
                    .iter()
                    .map(move |x| gaussian_kernel(*v, *x, geo_bandwidth))
            })
            .collect();
        let spec = Self {
            grid_side,
            photo_side,
            geo_side,
            photo_bandwidth,
            geo_bandwidth,
            pixels,
            photo_points,
            geo_points,
            geo_at_pixels,
        };
        for (name, points, h) in [
            ("photometric", &spec.photo_points, photo_bandwidth),
            ("geometric", &spec.geo_points, geo_bandwidth),
        ] {
            if gram_min_eigenvalue(points, h) <= 1e-12 {
                return Err(Error::NotPositiveDefinite(if name == "photometric" {
                    "photometric kernel Gram matrix"
                } else {
                    "geometric kernel Gram matrix"
                }));
            }
        }
        Ok(spec)
    }

    pub fn pixels(&self) -> &[Point] {
        &self.pixels
    }

    pub fn n_pixels(&self) -> usize {
        self.pixels.len()
    }

    pub fn photo_points(&self) -> &[Point] {
        &self.photo_points
    }

    pub fn geo_points(&self) -> &[Point] {
        &self.geo_points
    }

    pub fn k_p(&self) -> usize {
        self.photo_points.len()
    }

    pub fn k_g(&self) -> usize {
        self.geo_points.len()
    }

    /// Dimension of one deformation vector, `2 k_g`.
    pub fn latent_dim(&self) -> usize {
        2 * self.geo_points.len()
    }

    pub(crate) fn geo_row(&self, pixel: usize) -> &[f64] {
        let k = self.k_g();
        &self.geo_at_pixels[pixel * k..(pixel + 1) * k]
    }

    /// `I_alpha(v) = sum_j K_p(v, x_pj) alpha_j` at each point.
    pub fn eval_template(&self, alpha: &[f64], points: &[Point]) -> Vec<f64> {
        points
            .iter()
            .map(|v| {
                self.photo_points
                    .iter()
                    .zip(alpha)
                    .map(|(x, a)| a * gaussian_kernel(*v, *x, self.photo_bandwidth))
                    .sum()
            })
            .collect()
    }

    /// `m_z(v) = sum_j K_g(v, x_gj) z_j` with `z_j = (z[2j], z[2j+1])`.
    pub fn eval_deformation(&self, z: &[f64], points: &[Point]) -> Vec<Point> {
        points
            .iter()
            .map(|v| {
                let mut m = [0.0; 2];
                for (j, x) in self.geo_points.iter().enumerate() {
                    let k = gaussian_kernel(*v, *x, self.geo_bandwidth);
                    m[0] += k * z[2 * j];
                    m[1] += k * z[2 * j + 1];
                }
                m
            })
            .collect()
    }

    /// Template value and spatial gradient at one point.
    #[inline]
    pub(crate) fn template_value_and_gradient(&self, alpha: &[f64], w: Point) -> (f64, Point) {
        let inv_h2 = 1.0 / (self.photo_bandwidth * self.photo_bandwidth);
        let (mut val, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for (x, a) in self.photo_points.iter().zip(alpha) {
            let ka = a * gaussian_kernel(w, *x, self.photo_bandwidth);
            val += ka;
            gx -= ka * (w[0] - x[0]) * inv_h2;
            gy -= ka * (w[1] - x[1]) * inv_h2;
        }
        (val, [gx, gy])
    }

    /// Displaced pixel positions `v_u - m_z(v_u)`.
    pub(crate) fn warped_pixels(&self, z: &[f64]) -> Vec<Point> {
        let k = self.k_g();
        self.pixels
            .iter()
            .enumerate()
            .map(|(u, v)| {
                let row = self.geo_row(u);
                let mut w = *v;
                for j in 0..k {
                    w[0] -= row[j] * z[2 * j];
                    w[1] -= row[j] * z[2 * j + 1];
                }
                w
            })
            .collect()
    }

    /// Design matrix `Phi(z)` with `Phi[u][j] = K_p(v_u - m_z(v_u), x_pj)`,
    /// row-major `pixels x k_p`.
    pub fn design_matrix(&self, z: &[f64]) -> Vec<f64> {
        self.warped_pixels(z)
            .iter()
            .flat_map(|w| {
                self.photo_points
                    .iter()
                    .map(move |x| gaussian_kernel(*w, *x, self.photo_bandwidth))
            })
            .collect()
    }

    /// `I_alpha(v_u - m_z(v_u))` on the pixel grid. Exact kernel evaluation,
    /// no interpolation.
    pub fn deformed_template(&self, alpha: &[f64], z: &[f64]) -> Vec<f64> {
        self.eval_template(alpha, &self.warped_pixels(z))
    }

    /// Jacobian of [`Self::deformed_template`] with respect to `z`,
    /// `pixels x 2 k_g`: `d I_u / d z_{j,c} = -dI/dw_c (w_u) K_g(v_u, x_gj)`.
    pub fn deformation_jacobian(&self, alpha: &[f64], z: &[f64]) -> DMatrix<f64> {
        let k = self.k_g();
        let warped = self.warped_pixels(z);
        let mut jac = DMatrix::zeros(self.n_pixels(), 2 * k);
        for (u, w) in warped.iter().enumerate() {
            let (_, g) = self.template_value_and_gradient(alpha, *w);
            for (j, kg) in self.geo_row(u).iter().enumerate() {
                jac[(u, 2 * j)] = -g[0] * kg;
                jac[(u, 2 * j + 1)] = -g[1] * kg;
            }
        }
        jac
    }

    /// Gram matrix of the geometric kernel at the control points.
    pub fn geo_gram(&self) -> DMatrix<f64> {
        gram(&self.geo_points, self.geo_bandwidth)
    }

    pub fn photo_gram(&self) -> DMatrix<f64> {
        gram(&self.photo_points, self.photo_bandwidth)
    }
}

pub fn gram(points: &[Point], bandwidth: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        gaussian_kernel(points[i], points[j], bandwidth)
    })
}

fn gram_min_eigenvalue(points: &[Point], bandwidth: f64) -> f64 {
    SymmetricEigen::new(gram(points, bandwidth))
        .eigenvalues
        .min()
}
