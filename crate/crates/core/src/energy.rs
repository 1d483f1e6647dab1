//! Energy normalization layers placed after transmitter networks, with their
//! vector-Jacobian products.

use crate::matrix::Matrix;

/// Smallest norm or scale divided by.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Scales every row of `u` (a `[re | im]` block of `symbols` complex symbols)
/// to `||x||^2 = symbols`. Returns the normalized rows and the row norms.
pub fn normalize_rows(u: &Matrix, symbols: usize) -> (Matrix, Vec<f64>) {
    let target = (symbols as f64).sqrt();
    let mut x = u.clone();
    let mut norms = Vec::with_capacity(u.rows());
    for i in 0..u.rows() {
        let norm = u.row(i).iter().map(|v| v * v).sum::<f64>().sqrt().max(SCALE_FLOOR);
        let c = target / norm;
        x.row_mut(i).iter_mut().for_each(|v| *v *= c);
        norms.push(norm);
    }
    (x, norms)
}

/// Pulls a gradient w.r.t. the row-normalized output back to `u`.
///
/// For `x = c u / ||u||`: `g_u = c / ||u|| (g - (u.g / ||u||^2) u)`.
pub fn normalize_rows_vjp(u: &Matrix, norms: &[f64], symbols: usize, g: &Matrix) -> Matrix {
    let target = (symbols as f64).sqrt();
    let mut out = Matrix::zeros(u.rows(), u.cols());
    for i in 0..u.rows() {
        let (ur, gr) = (u.row(i), g.row(i));
        let norm = norms[i];
        let dot: f64 = ur.iter().zip(gr).map(|(a, b)| a * b).sum();
        let c = target / norm;
        let k = dot / (norm * norm);
        for ((o, &gv), &uv) in out.row_mut(i).iter_mut().zip(gr).zip(ur) {
            *o = c * (gv - k * uv);
        }
    }
    out
}

/// Root-mean-square symbol amplitude of a block: `sqrt(mean_i ||u_i||^2 / N)`.
pub fn batch_scale(u: &Matrix, symbols: usize) -> f64 {
    let total: f64 = u.as_slice().iter().map(|v| v * v).sum();
    (total / (u.rows() * symbols) as f64).sqrt()
}

/// Pulls a gradient w.r.t. `x = u / s(u)` back to `u`, where `s` is the
/// batch scale. Every row depends on every other row through `s`:
/// `g_u_j = g_j / s - (sum_i g_i.u_i) u_j / (S N s^3)`.
pub fn normalize_batch_vjp(u: &Matrix, scale: f64, symbols: usize, g: &Matrix) -> Matrix {
    let n = (u.rows() * symbols) as f64;
    let dot: f64 = u.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
    let k = dot / (n * scale.powi(3));
    let mut out = g.map(|v| v / scale);
    for (o, &uv) in out.as_mut_slice().iter_mut().zip(u.as_slice()) {
        *o -= k * uv;
    }
    out
}
