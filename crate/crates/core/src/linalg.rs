//! Small dense helpers on top of nalgebra's fixed-size types.

use nalgebra::{Complex, Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

pub fn mat_from_rows(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

pub fn mat_to_rows(m: &Mat3) -> [[f64; 3]; 3] {
    let mut rows = [[0.0; 3]; 3];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    rows
}

/// Infinity norm (maximum absolute row sum).
pub fn norm_inf(m: &Mat3) -> f64 {
    (0..3)
        .map(|i| (0..3).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm_inf(v: &Vec3) -> f64 {
    v.amax()
}

/// Eigenvalues sorted by ascending modulus (ties broken by imaginary part).
pub fn eigenvalues_sorted(m: &Mat3) -> Vec<Complex<f64>> {
    let mut eig: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.total_cmp(&b.im)));
    eig
}

/// Unit vector spanning the kernel of `m - lambda I` for a simple real eigenvalue.
///
/// The kernel is the cross product of the two rows of the shifted matrix whose
/// cross product has the largest norm.
pub fn real_eigenvector(m: &Mat3, lambda: f64) -> Vec3 {
    let s = m - Mat3::identity() * lambda;
    let rows: [Vec3; 3] = [s.row(0).transpose(), s.row(1).transpose(), s.row(2).transpose()];
    let candidates = [rows[0].cross(&rows[1]), rows[1].cross(&rows[2]), rows[2].cross(&rows[0])];
    let best = candidates
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .copied()
        .unwrap_or_else(Vec3::zeros);
    let n = best.norm();
    if n > 0.0 {
        best / n
    } else {
        best
    }
}

/// Angle between two nonzero vectors, in radians.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    let c = a.cross(b).norm();
    let d = a.dot(b);
    c.atan2(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvector_of_diagonal_matrix() {
        let m = Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0));
        let v = real_eigenvector(&m, 2.0);
        assert!((v.y.abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_sorted_by_modulus() {
        let m = Mat3::from_diagonal(&Vec3::new(-3.0, 0.5, 2.0));
        let e = eigenvalues_sorted(&m);
        assert!((e[0].re - 0.5).abs() < 1e-12);
        assert!((e[2].re + 3.0).abs() < 1e-12);
    }

    #[test]
    fn infinity_norm_is_max_row_sum() {
        let m = mat_from_rows(&[[1.0, -2.0, 0.0], [0.5, 0.5, 0.5], [3.0, 0.0, 0.1]]);
        assert!((norm_inf(&m) - 3.1).abs() < 1e-15);
    }
}
