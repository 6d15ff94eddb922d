//! Rotations and homogeneous transforms over expressions.
//!
//! Every helper takes expressions, so numeric inputs (constants) fold to
//! numeric outputs. Quaternions are `(x, y, z, w)` column vectors with
//! `w >= 0`; roll-pitch-yaw is extrinsic x-y-z, `R = Rz(yaw) Ry(pitch) Rx(roll)`.

use crate::expr::{Expr, Scalar};

use super::KinematicsError;

fn c(v: f64) -> Scalar {
    Scalar::constant(v)
}

fn mat3(m: [[Scalar; 3]; 3]) -> Expr {
    Expr::from_fn(3, 3, |r, k| m[r][k].clone())
}

fn scalar_of(theta: &Expr) -> Result<Scalar, KinematicsError> {
    Ok(theta.as_scalar()?.clone())
}

fn check_shape(e: &Expr, shape: (usize, usize)) -> Result<(), KinematicsError> {
    if e.shape() != shape {
        return Err(KinematicsError::Shape { expected: shape, got: e.shape() });
    }
    Ok(())
}

pub fn rotation_x(theta: &Expr) -> Result<Expr, KinematicsError> {
    let t = scalar_of(theta)?;
    let (s, co) = (t.sin(), t.cos());
    Ok(mat3([[c(1.0), c(0.0), c(0.0)], [c(0.0), co.clone(), s.neg()], [c(0.0), s, co]]))
}

pub fn rotation_y(theta: &Expr) -> Result<Expr, KinematicsError> {
    let t = scalar_of(theta)?;
    let (s, co) = (t.sin(), t.cos());
    Ok(mat3([[co.clone(), c(0.0), s.clone()], [c(0.0), c(1.0), c(0.0)], [s.neg(), c(0.0), co]]))
}

pub fn rotation_z(theta: &Expr) -> Result<Expr, KinematicsError> {
    let t = scalar_of(theta)?;
    let (s, co) = (t.sin(), t.cos());
    Ok(mat3([[co.clone(), s.neg(), c(0.0)], [s, co, c(0.0)], [c(0.0), c(0.0), c(1.0)]]))
}

/// Rotation by `theta` about a unit `axis` (Rodrigues). Axis-aligned axes
/// reduce to the elementary rotations.
pub fn axis_angle(axis: [f64; 3], theta: &Expr) -> Result<Expr, KinematicsError> {
    for (i, f) in [rotation_x, rotation_y, rotation_z].into_iter().enumerate() {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        if axis == e {
            return f(theta);
        }
        e[i] = -1.0;
        if axis == e {
            return f(&theta.neg());
        }
    }
    let t = scalar_of(theta)?;
    let (s, vc) = (t.sin(), c(1.0).sub(&t.cos()));
    let [x, y, z] = axis;
    let k = [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]];
    Ok(Expr::from_fn(3, 3, |r, j| {
        let k2: f64 = (0..3).map(|m| k[r][m] * k[m][j]).sum();
        let id = if r == j { 1.0 } else { 0.0 };
        c(id).add(&s.mul(&c(k[r][j]))).add(&vc.mul(&c(k2)))
    }))
}

/// `Rz(y) Ry(p) Rx(r)` for `rpy = (r, p, y)`.
pub fn rpy_to_matrix(rpy: &Expr) -> Result<Expr, KinematicsError> {
    check_shape(rpy, (3, 1))?;
    let rz = rotation_z(&rpy.elem(2))?;
    let ry = rotation_y(&rpy.elem(1))?;
    let rx = rotation_x(&rpy.elem(0))?;
    Ok(&(&rz * &ry) * &rx)
}

/// Inverse of [`rpy_to_matrix`]; singular at pitch = ±π/2.
pub fn matrix_to_rpy(r: &Expr) -> Result<Expr, KinematicsError> {
    check_shape(r, (3, 3))?;
    let m = |i, j| r.at(i, j).clone();
    let roll = m(2, 1).atan2(&m(2, 2));
    let pitch = m(2, 0).neg().atan2(&m(2, 1).square().add(&m(2, 2).square()).sqrt());
    let yaw = m(1, 0).atan2(&m(0, 0));
    Ok(Expr::vector(vec![roll, pitch, yaw]))
}

fn min(a: &Scalar, b: &Scalar) -> Scalar {
    Scalar::select(&a.sub(b), b, a)
}

/// Shepperd's method with branch selection on the largest diagonal term,
/// sign fixed so that `w >= 0`. Constant inputs are checked for
/// orthonormality to 1e-6.
pub fn matrix_to_quaternion(r: &Expr) -> Result<Expr, KinematicsError> {
    check_shape(r, (3, 3))?;
    if let Some(m) = r.to_matrix() {
        let err = (m.transpose() * &m - nalgebra::DMatrix::identity(3, 3)).amax();
        if err > 1e-6 || m.determinant() < 0.0 {
            return Err(KinematicsError::NotOrthonormal(err));
        }
    }
    let m = |i, j| r.at(i, j).clone();
    let (r11, r22, r33) = (m(0, 0), m(1, 1), m(2, 2));
    let trace = r11.add(&r22).add(&r33);
    let quarter = c(0.25);
    let branch = |diag: Scalar| diag.add(&c(1.0)).sqrt().mul(&c(2.0));

    let s = branch(trace.clone());
    let qw = [
        m(2, 1).sub(&m(1, 2)).div(&s),
        m(0, 2).sub(&m(2, 0)).div(&s),
        m(1, 0).sub(&m(0, 1)).div(&s),
        s.mul(&quarter),
    ];
    let s = branch(r11.sub(&r22).sub(&r33));
    let qx = [
        s.mul(&quarter),
        m(0, 1).add(&m(1, 0)).div(&s),
        m(0, 2).add(&m(2, 0)).div(&s),
        m(2, 1).sub(&m(1, 2)).div(&s),
    ];
    let s = branch(r22.sub(&r11).sub(&r33));
    let qy = [
        m(0, 1).add(&m(1, 0)).div(&s),
        s.mul(&quarter),
        m(1, 2).add(&m(2, 1)).div(&s),
        m(0, 2).sub(&m(2, 0)).div(&s),
    ];
    let s = branch(r33.sub(&r11).sub(&r22));
    let qz = [
        m(0, 2).add(&m(2, 0)).div(&s),
        m(1, 2).add(&m(2, 1)).div(&s),
        s.mul(&quarter),
        m(1, 0).sub(&m(0, 1)).div(&s),
    ];

    // trace largest, else r11, else r22, else r33
    let use_w = min(&trace.sub(&r11), &min(&trace.sub(&r22), &trace.sub(&r33)));
    let use_x = min(&r11.sub(&r22), &r11.sub(&r33));
    let use_y = r22.sub(&r33);
    let q: Vec<Scalar> = (0..4)
        .map(|i| {
            let yz = Scalar::select(&use_y, &qy[i], &qz[i]);
            let xyz = Scalar::select(&use_x, &qx[i], &yz);
            Scalar::select(&use_w, &qw[i], &xyz)
        })
        .collect();
    let w = q[3].clone();
    Ok(Expr::vector(q.iter().map(|e| Scalar::select(&w, e, &e.neg())).collect()))
}

/// Rotation matrix of a unit quaternion `(x, y, z, w)`.
pub fn quaternion_to_matrix(q: &Expr) -> Result<Expr, KinematicsError> {
    check_shape(q, (4, 1))?;
    let e = |i: usize| q.elements()[i].clone();
    let (x, y, z, w) = (e(0), e(1), e(2), e(3));
    let two = c(2.0);
    let one = c(1.0);
    let p = |a: &Scalar, b: &Scalar| a.mul(b).mul(&two);
    Ok(mat3([
        [one.sub(&p(&y, &y)).sub(&p(&z, &z)), p(&x, &y).sub(&p(&z, &w)), p(&x, &z).add(&p(&y, &w))],
        [p(&x, &y).add(&p(&z, &w)), one.sub(&p(&x, &x)).sub(&p(&z, &z)), p(&y, &z).sub(&p(&x, &w))],
        [p(&x, &z).sub(&p(&y, &w)), p(&y, &z).add(&p(&x, &w)), one.sub(&p(&x, &x)).sub(&p(&y, &y))],
    ]))
}

/// Hamilton product `a * b`, normalized, with `w >= 0`.
pub fn quaternion_product(a: &Expr, b: &Expr) -> Result<Expr, KinematicsError> {
    check_shape(a, (4, 1))?;
    check_shape(b, (4, 1))?;
    let (ax, ay, az, aw) = (a.at(0, 0), a.at(1, 0), a.at(2, 0), a.at(3, 0));
    let (bx, by, bz, bw) = (b.at(0, 0), b.at(1, 0), b.at(2, 0), b.at(3, 0));
    let x = aw.mul(bx).add(&ax.mul(bw)).add(&ay.mul(bz)).sub(&az.mul(by));
    let y = aw.mul(by).sub(&ax.mul(bz)).add(&ay.mul(bw)).add(&az.mul(bx));
    let z = aw.mul(bz).add(&ax.mul(by)).sub(&ay.mul(bx)).add(&az.mul(bw));
    let w = aw.mul(bw).sub(&ax.mul(bx)).sub(&ay.mul(by)).sub(&az.mul(bz));
    let q = Expr::vector(vec![x, y, z, w.clone()]);
    let q = q.try_elem_div(&q.norm())?;
    Ok(q.map(|e| Scalar::select(&w, e, &e.neg())))
}

/// 4x4 transform from a 3x3 rotation and a 3-vector translation.
pub fn transform(rotation: &Expr, translation: &Expr) -> Result<Expr, KinematicsError> {
    check_shape(rotation, (3, 3))?;
    check_shape(translation, (3, 1))?;
    Ok(Expr::from_fn(4, 4, |r, k| match (r, k) {
        (3, 3) => c(1.0),
        (3, _) => c(0.0),
        (_, 3) => translation.at(r, 0).clone(),
        _ => rotation.at(r, k).clone(),
    }))
}

/// Translation-only transform.
pub fn translation(xyz: &Expr) -> Result<Expr, KinematicsError> {
    transform(&Expr::identity(3), xyz)
}

/// Transform from a numeric origin `(xyz, rpy)`.
pub fn origin_transform(xyz: [f64; 3], rpy: [f64; 3]) -> Expr {
    let r = rpy_to_matrix(&Expr::column(&rpy)).expect("3-vector");
    transform(&r, &Expr::column(&xyz)).expect("shapes")
}

pub fn transform_compose(a: &Expr, b: &Expr) -> Result<Expr, KinematicsError> {
    check_shape(a, (4, 4))?;
    check_shape(b, (4, 4))?;
    Ok(a * b)
}

/// Inverse of a rigid transform: `[R^T, -R^T p]`.
pub fn transform_invert(t: &Expr) -> Result<Expr, KinematicsError> {
    check_shape(t, (4, 4))?;
    let rt = t.block(0, 0, 3, 3).transpose();
    let p = t.block(0, 3, 3, 1);
    transform(&rt, &(&rt * &p).neg())
}

/// Rotation block of a 4x4 transform.
pub fn rotation_of(t: &Expr) -> Expr {
    t.block(0, 0, 3, 3)
}

/// Translation column of a 4x4 transform.
pub fn position_of(t: &Expr) -> Expr {
    t.block(0, 3, 3, 1)
}
