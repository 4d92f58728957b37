//! Dense 3x3 helpers used by the block-sparse solver.

use crate::scalar::Real;

pub type Mat3<T> = [[T; 3]; 3];
pub type Vec3<T> = [T; 3];

pub fn zeros<T: Real>() -> Mat3<T> {
    [[T::zero(); 3]; 3]
}

pub fn identity<T: Real>() -> Mat3<T> {
    diag([T::one(); 3])
}

pub fn diag<T: Real>(d: Vec3<T>) -> Mat3<T> {
    let mut m = zeros();
    for k in 0..3 {
        m[k][k] = d[k];
    }
    m
}

pub fn transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let mut t = zeros();
    for r in 0..3 {
        for c in 0..3 {
            t[c][r] = a[r][c];
        }
    }
    t
}

pub fn mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut m = zeros();
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
        }
    }
    m
}

/// `a * b^T`
pub fn mul_bt<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut m = zeros();
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = a[r][0] * b[c][0] + a[r][1] * b[c][1] + a[r][2] * b[c][2];
        }
    }
    m
}

/// `a^T * b`
pub fn tmul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut m = zeros();
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = a[0][r] * b[0][c] + a[1][r] * b[1][c] + a[2][r] * b[2][c];
        }
    }
    m
}

pub fn mul_vec<T: Real>(a: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

/// `a^T * v`
pub fn tmul_vec<T: Real>(a: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [
        a[0][0] * v[0] + a[1][0] * v[1] + a[2][0] * v[2],
        a[0][1] * v[0] + a[1][1] * v[1] + a[2][1] * v[2],
        a[0][2] * v[0] + a[1][2] * v[1] + a[2][2] * v[2],
    ]
}

pub fn add_assign<T: Real>(a: &mut Mat3<T>, b: &Mat3<T>) {
    for r in 0..3 {
        for c in 0..3 {
            a[r][c] += b[r][c];
        }
    }
}

pub fn sub_assign<T: Real>(a: &mut Mat3<T>, b: &Mat3<T>) {
    for r in 0..3 {
        for c in 0..3 {
            a[r][c] -= b[r][c];
        }
    }
}

pub fn quad_form<T: Real>(omega: &Mat3<T>, e: &Vec3<T>) -> T {
    let oe = mul_vec(omega, e);
    e[0] * oe[0] + e[1] * oe[1] + e[2] * oe[2]
}

/// Lower Cholesky factor of a symmetric 3x3 matrix, `None` unless positive definite.
pub fn cholesky<T: Real>(a: &Mat3<T>) -> Option<Mat3<T>> {
    let mut l = zeros();
    for j in 0..3 {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[j][j] = ljj;
        for i in j + 1..3 {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `l * x = b` for lower-triangular `l`.
pub fn forward_sub<T: Real>(l: &Mat3<T>, b: &Vec3<T>) -> Vec3<T> {
    let x0 = b[0] / l[0][0];
    let x1 = (b[1] - l[1][0] * x0) / l[1][1];
    let x2 = (b[2] - l[2][0] * x0 - l[2][1] * x1) / l[2][2];
    [x0, x1, x2]
}

/// Solves `l^T * x = b` for lower-triangular `l`.
pub fn backward_sub_t<T: Real>(l: &Mat3<T>, b: &Vec3<T>) -> Vec3<T> {
    let x2 = b[2] / l[2][2];
    let x1 = (b[1] - l[2][1] * x2) / l[1][1];
    let x0 = (b[0] - l[1][0] * x1 - l[2][0] * x2) / l[0][0];
    [x0, x1, x2]
}

/// Solves `x * l^T = a` for `x`, i.e. `x = a * l^{-T}`, row by row.
pub fn right_solve_lt<T: Real>(a: &Mat3<T>, l: &Mat3<T>) -> Mat3<T> {
    // row r of x satisfies l * x_r^T = a_r^T
    [forward_sub(l, &a[0]), forward_sub(l, &a[1]), forward_sub(l, &a[2])]
}

pub fn is_symmetric<T: Real>(a: &Mat3<T>) -> bool {
    (0..3).all(|r| (0..3).all(|c| a[r][c] == a[c][r]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a: Mat3<f64> = [[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let r = mul_bt(&l, &l);
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - a[i][j]).abs() < 1e-14);
            }
        }
        let b = [1.0, -2.0, 0.5];
        let y = forward_sub(&l, &b);
        let x = backward_sub_t(&l, &y);
        let ax = mul_vec(&a, &x);
        for k in 0..3 {
            assert!((ax[k] - b[k]).abs() < 1e-14);
        }
        assert!(cholesky::<f64>(&[[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_none());
    }

    #[test]
    fn right_solve_matches_definition() {
        let l = cholesky::<f64>(&[[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]]).unwrap();
        let a = [[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0], [0.0, 0.0, 1.0]];
        let x = right_solve_lt(&a, &l);
        let back = mul_bt(&x, &l);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-14);
            }
        }
    }
}
