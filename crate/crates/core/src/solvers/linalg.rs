//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Symmetric positive definite matrix closest in spirit to `h`: eigenvalues
/// replaced by their absolute values, floored at `rel * max(1, |lambda|max)`.
pub fn make_positive_definite(h: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let n = h.nrows();
    if n == 0 {
        return h.clone();
    }
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = rel * top.max(1.0);
    let d = eig.eigenvalues.map(|v| v.abs().max(floor));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&d) * q.transpose();
    (&out + out.transpose()) * 0.5
}

/// Powell-damped BFGS update of `b` for step `s` and gradient change `y`.
/// Returns whether the raw pair satisfied the curvature condition.
pub fn damped_bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> bool {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    let sy = s.dot(y);
    let curvature_ok = sy > 1e-12 * s.norm() * y.norm();
    if sbs <= 0.0 || !sbs.is_finite() {
        return curvature_ok;
    }
    let r = if sy >= 0.2 * sbs {
        y.clone()
    } else {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    };
    let sr = s.dot(&r);
    if sr <= 0.0 || !sr.is_finite() {
        return curvature_ok;
    }
    *b -= &bs * bs.transpose() / sbs;
    *b += &r * r.transpose() / sr;
    let sym = (&*b + b.transpose()) * 0.5;
    *b = sym;
    curvature_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn pd_projection() {
        let h = dmatrix![1.0, 0.0; 0.0, -3.0];
        let p = make_positive_definite(&h, 1e-8);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12 && (p[(1, 1)] - 3.0).abs() < 1e-12);
        let z = make_positive_definite(&DMatrix::zeros(2, 2), 1e-8);
        assert!((z[(0, 0)] - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn bfgs_secant_and_damping() {
        let mut b = DMatrix::identity(2, 2);
        let s = dvector![1.0, 0.0];
        let y = dvector![2.0, 1.0];
        assert!(damped_bfgs_update(&mut b, &s, &y));
        assert!((&b * &s - &y).amax() < 1e-12);
        let mut b = DMatrix::identity(2, 2);
        assert!(!damped_bfgs_update(&mut b, &s, &dvector![-1.0, 0.0]));
        assert!(b.clone().cholesky().is_some());
    }
}
