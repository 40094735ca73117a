//! Dense linear-algebra helpers shared across the crate: rotations in
//! SO(2)/SO(3), orthonormal frames, quaternion conversion.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

/// 2x2 rotation by `theta` radians.
pub fn rot2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Angle of a 2x2 rotation.
pub fn rot2_angle(r: &DMatrix<f64>) -> f64 {
    r[(1, 0)].atan2(r[(0, 0)])
}

/// 3x3 rotation about `axis` (need not be normalized) by `angle` radians.
pub fn rot3_axis_angle(axis: &Vector3<f64>, angle: f64) -> DMatrix<f64> {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return DMatrix::identity(3, 3);
    }
    let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
    dmatrix_from3(rot.matrix())
}

/// Exponential map of so(d): d=2 takes `v = [theta]`, d=3 takes a rotation vector.
pub fn so_exp(d: usize, v: &[f64]) -> DMatrix<f64> {
    match d {
        2 => rot2(v[0]),
        3 => {
            let w = Vector3::new(v[0], v[1], v[2]);
            rot3_axis_angle(&w, w.norm())
        }
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Skew-symmetric generator basis of so(d); one element for d=2, three for d=3.
pub fn so_generators(d: usize) -> Vec<DMatrix<f64>> {
    match d {
        2 => vec![DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])],
        3 => vec![
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]),
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ],
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Symmetric part (M + M^T)/2.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Q factor of the thin QR decomposition, with the positive-diagonal-R
/// convention so the result is unique.
pub fn qf(m: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = m.nrows();
    let cols = m.ncols();
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..cols.min(rows) {
        if r[(k, k)] < 0.0 {
            for i in 0..rows {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    q
}

/// Nearest orthogonal matrix U V^T (no determinant constraint).
pub fn nearest_orthogonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Nearest rotation: orthogonal Procrustes projection with the determinant
/// corrected by flipping the singular direction of the smallest singular value.
pub fn nearest_rotation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let mut u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let r = &u * &v_t;
    if r.determinant() < 0.0 {
        let k = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(m.ncols() - 1);
        for i in 0..u.nrows() {
            u[(i, k)] = -u[(i, k)];
        }
        u * v_t
    } else {
        r
    }
}

/// Quaternion (qx, qy, qz, qw) of a d-dimensional rotation; 2D rotations embed
/// as yaw about +z. The scalar part is kept nonnegative.
pub fn quat_of_rotation(r: &DMatrix<f64>) -> [f64; 4] {
    let q = match r.nrows() {
        2 => {
            let half = rot2_angle(r) * 0.5;
            [0.0, 0.0, half.sin(), half.cos()]
        }
        3 => {
            let rot = Rotation3::from_matrix_unchecked(matrix3_from(r));
            let uq = UnitQuaternion::from_rotation_matrix(&rot);
            [uq.i, uq.j, uq.k, uq.w]
        }
        d => panic!("unsupported dimension {d}"),
    };
    if q[3] < 0.0 {
        [-q[0], -q[1], -q[2], -q[3]]
    } else {
        q
    }
}

/// 3x3 rotation from a (qx, qy, qz, qw) quaternion (assumed near unit norm).
pub fn rot3_of_quat(qx: f64, qy: f64, qz: f64, qw: f64) -> DMatrix<f64> {
    let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(qw, qx, qy, qz));
    dmatrix_from3(uq.to_rotation_matrix().matrix())
}

/// Uniform random rotation: uniform angle for d=2, uniform quaternion for d=3.
pub fn random_rotation<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    match d {
        2 => rot2(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
        3 => {
            let q: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = q.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            rot3_of_quat(q[0] / n, q[1] / n, q[2] / n, q[3] / n)
        }
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Random r x d frame with orthonormal columns (Haar via QR of a Gaussian).
pub fn random_stiefel<R: Rng>(r: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(r, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    qf(&g)
}

/// Uniform random unit vector in R^3.
pub fn random_unit_axis<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Max-abs deviation of R^T R from the identity.
pub fn orthogonality_deviation(r: &DMatrix<f64>) -> f64 {
    let d = r.ncols();
    let g = r.transpose() * r - DMatrix::identity(d, d);
    g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn matrix3_from(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(i, j)])
}

fn dmatrix_from3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a % two_pi;
    if x <= -std::f64::consts::PI {
        x += two_pi;
    } else if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

/// Column-stack of a matrix as a vector (column-major), used for chordal
/// residuals.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn qf_is_orthonormal_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = DMatrix::from_fn(5, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let q = qf(&m);
            assert!(orthogonality_deviation(&q) < 1e-12);
            assert_eq!(q, qf(&m));
        }
    }

    #[test]
    fn nearest_rotation_has_unit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2usize, 3] {
            for _ in 0..20 {
                let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let r = nearest_rotation(&m);
                assert!(orthogonality_deviation(&r) < 1e-10);
                assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn quaternion_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let r = random_rotation(3, &mut rng);
            let q = quat_of_rotation(&r);
            let r2 = rot3_of_quat(q[0], q[1], q[2], q[3]);
            assert!((r - r2).abs().max() < 1e-12);
        }
    }

    #[test]
    fn yaw_quaternion_matches_half_angle() {
        let q = quat_of_rotation(&rot2(std::f64::consts::FRAC_PI_2));
        assert_abs_diff_eq!(q[2], (0.5f64).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(q[3], (0.5f64).sqrt(), epsilon = 1e-15);
    }
}
