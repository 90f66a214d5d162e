use nalgebra::{Matrix3, SymmetricEigen};

use crate::math::{quat_from_matrix, Quat, Vec3};

/// Diagonalizes a symmetric inertia tensor given in `frame`. Returns the
/// principal moments and the rotation from the body frame to the principal
/// axes. Tensors that are already diagonal keep `frame` untouched.
pub fn diagonalize(tensor: &Matrix3<f64>, frame: Quat) -> (Vec3, Quat) {
    let scale = tensor.diagonal().abs().max().max(1e-300);
    let off = tensor[(0, 1)]
        .abs()
        .max(tensor[(0, 2)].abs())
        .max(tensor[(1, 2)].abs());
    if off <= 1e-12 * scale {
        return (tensor.diagonal(), frame);
    }
    let eig = SymmetricEigen::new(*tensor);
    // Assign eigenvectors to the coordinate axis they are most aligned with so
    // nearly-diagonal inputs stay close to the input frame.
    let mut used = [false; 3];
    let mut cols = [Vec3::zeros(); 3];
    let mut vals = Vec3::zeros();
    for axis in 0..3 {
        let mut best = None;
        let mut best_score = -1.0;
        for k in 0..3 {
            if used[k] {
                continue;
            }
            let score = eig.eigenvectors[(axis, k)].abs();
            if score > best_score {
                best_score = score;
                best = Some(k);
            }
        }
        let k = best.expect("three eigenvectors");
        used[k] = true;
        let mut v: Vec3 = eig.eigenvectors.column(k).into();
        if v[axis] < 0.0 {
            v = -v;
        }
        cols[axis] = v;
        vals[axis] = eig.eigenvalues[k];
    }
    let mut m = Matrix3::from_columns(&cols);
    if m.determinant() < 0.0 {
        m.set_column(2, &(-cols[2]));
    }
    (vals, frame * quat_from_matrix(&m))
}

/// Full symmetric tensor from the six URDF/MJCF components.
pub fn tensor(ixx: f64, iyy: f64, izz: f64, ixy: f64, ixz: f64, iyz: f64) -> Matrix3<f64> {
    Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
}

pub fn solid_sphere(mass: f64, radius: f64) -> Vec3 {
    let i = 0.4 * mass * radius * radius;
    Vec3::new(i, i, i)
}

/// Solid box with full extents `size`.
pub fn solid_box(mass: f64, size: &[f64; 3]) -> Vec3 {
    let [x, y, z] = *size;
    Vec3::new(
        mass * (y * y + z * z) / 12.0,
        mass * (x * x + z * z) / 12.0,
        mass * (x * x + y * y) / 12.0,
    )
}
