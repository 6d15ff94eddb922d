use nalgebra::{DMatrix, DVector, Matrix3};
use optask::expr::{self, leaf_block, Function, LeafKind};
use optask::fixtures::ARM6_URDF;
use optask::kinematics::spatial;
use optask::par::{self, ExecMode};
use optask::solvers::qp::{self, QpProblem, QpSettings, QpStatus};
use optask::{Expr, RobotModel};
use proptest::prelude::*;

fn eval(f: &Function, x: &[f64]) -> Vec<DMatrix<f64>> {
    f.eval(x).unwrap()
}

fn mat3(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_iterator(m.iter().copied())
}

/// Smooth scalar over three inputs with coefficients `c`.
fn template(x: &Expr, c: &[f64]) -> Expr {
    let (x0, x1, x2) = (x.elem(0), x.elem(1), x.elem(2));
    (&x0 * &x1).sin().scale(c[0])
        + x2.scale(c[1]).exp()
        + (&(&x0 * &x0) * &x2).scale(c[2])
        + (&(&x1 * &x1) + 1.0).ln()
        + (&x0 / &(&(&x2 * &x2) + 2.0)).scale(c[3])
        + x1.cos().powf(3.0)
}

fn fd_gradient(f: &Function, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[i] += h;
            b[i] -= h;
            (eval(f, &a)[0][0] - eval(f, &b)[0][0]) / (2.0 * h)
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs + rel * a.abs().max(b.abs())
}

fn chain_urdf(lengths: &[f64]) -> String {
    let mut s = String::from("<robot name=\"chain\"><link name=\"base\"/>");
    for i in 0..lengths.len() {
        s += &format!("<link name=\"l{i}\"/>");
    }
    s += "<link name=\"tip\"/>";
    for i in 0..lengths.len() {
        let parent = if i == 0 { "base".to_string() } else { format!("l{}", i - 1) };
        let x = if i == 0 { 0.0 } else { lengths[i - 1] };
        s += &format!(
            "<joint name=\"j{i}\" type=\"revolute\"><parent link=\"{parent}\"/><child link=\"l{i}\"/>\
             <origin xyz=\"{x} 0 0\" rpy=\"0 0 0\"/><axis xyz=\"0 0 1\"/>\
             <limit lower=\"-3\" upper=\"3\" effort=\"1\" velocity=\"1\"/></joint>"
        );
    }
    let last = lengths.len() - 1;
    s += &format!(
        "<joint name=\"jt\" type=\"fixed\"><parent link=\"l{last}\"/><child link=\"tip\"/>\
         <origin xyz=\"{} 0 0\" rpy=\"0 0 0\"/></joint></robot>",
        lengths[last]
    );
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(
        c in proptest::collection::vec(-2.0f64..2.0, 4),
        x in proptest::collection::vec(-1.5f64..1.5, 3),
    ) {
        let v = leaf_block("x", LeafKind::Variable, 3, 1);
        let e = template(&v, &c);
        let g = expr::gradient(&e, &v).unwrap();
        let f = Function::new(&[&v], &[&e]).unwrap();
        let fg = Function::new(&[&v], &[&g]).unwrap();
        let ad = eval(&fg, &x)[0].clone();
        for (a, n) in ad.iter().zip(fd_gradient(&f, &x, 1e-6)) {
            prop_assert!(close(*a, n, 1e-6, 1e-7), "ad {a} fd {n}");
        }
    }

    #[test]
    fn hessian_is_symmetric_and_matches_gradient_differences(
        c in proptest::collection::vec(-2.0f64..2.0, 4),
        x in proptest::collection::vec(-1.5f64..1.5, 3),
    ) {
        let v = leaf_block("x", LeafKind::Variable, 3, 1);
        let e = template(&v, &c);
        let g = expr::gradient(&e, &v).unwrap();
        let h = expr::hessian(&e, &v).unwrap();
        let fh = Function::new(&[&v], &[&h]).unwrap();
        let fg = Function::new(&[&v], &[&g]).unwrap();
        let hv = eval(&fh, &x)[0].clone();
        prop_assert!((&hv - hv.transpose()).amax() <= 1e-12);
        let step = 1e-6;
        for j in 0..3 {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[j] += step;
            b[j] -= step;
            let col = (&eval(&fg, &a)[0] - &eval(&fg, &b)[0]) / (2.0 * step);
            for i in 0..3 {
                prop_assert!(close(hv[(i, j)], col[i], 1e-5, 1e-6), "H[{i},{j}] {} fd {}", hv[(i, j)], col[i]);
            }
        }
    }

    #[test]
    fn jacobian_of_linear_map_is_its_matrix(a in proptest::collection::vec(-5.0f64..5.0, 12)) {
        let m = DMatrix::from_vec(4, 3, a);
        let v = leaf_block("x", LeafKind::Variable, 3, 1);
        let y = &Expr::from_matrix(&m) * &v;
        let j = expr::jacobian(&y, &v).unwrap();
        prop_assert_eq!(j.to_matrix().unwrap(), m);
    }

    #[test]
    fn arm_rotations_are_proper(q in proptest::collection::vec(-3.0f64..3.0, 6)) {
        let robot = RobotModel::from_urdf_str("arm", ARM6_URDF, &[0]).unwrap();
        let v = leaf_block("q", LeafKind::Variable, 6, 1);
        let r = robot.global_link_rotation("ee", &v).unwrap();
        let f = Function::new(&[&v], &[&r]).unwrap();
        let rm = mat3(&eval(&f, &q)[0]);
        prop_assert!((rm.transpose() * rm - Matrix3::identity()).amax() <= 1e-12);
        prop_assert!((rm.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rpy_round_trip(roll in -3.1f64..3.1, pitch in -1.45f64..1.45, yaw in -3.1f64..3.1) {
        let v = leaf_block("rpy", LeafKind::Variable, 3, 1);
        let back = spatial::matrix_to_rpy(&spatial::rpy_to_matrix(&v).unwrap()).unwrap();
        let f = Function::new(&[&v], &[&back]).unwrap();
        let out = eval(&f, &[roll, pitch, yaw])[0].clone();
        for (a, b) in out.iter().zip([roll, pitch, yaw]) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn quaternion_round_trip(roll in -3.1f64..3.1, pitch in -1.5f64..1.5, yaw in -3.1f64..3.1) {
        let r = spatial::rpy_to_matrix(&Expr::column(&[roll, pitch, yaw])).unwrap();
        let quat = spatial::matrix_to_quaternion(&r).unwrap();
        let back = spatial::quaternion_to_matrix(&quat).unwrap();
        let qn = quat.to_matrix().unwrap().norm();
        prop_assert!((qn - 1.0).abs() <= 1e-12);
        prop_assert!((back.to_matrix().unwrap() - r.to_matrix().unwrap()).amax() <= 1e-12);
    }

    #[test]
    fn planar_chain_matches_angle_sums(
        lengths in proptest::collection::vec(0.1f64..2.0, 1..6),
        seed in proptest::collection::vec(-3.0f64..3.0, 6),
    ) {
        let robot = RobotModel::from_urdf_str("c", &chain_urdf(&lengths), &[0]).unwrap();
        let n = lengths.len();
        prop_assert_eq!(robot.ndof(), n);
        let v = leaf_block("q", LeafKind::Variable, n, 1);
        let f = Function::new(&[&v], &[&robot.global_link_position("tip", &v).unwrap()]).unwrap();
        let q = &seed[..n];
        let (mut x, mut y, mut angle) = (0.0, 0.0, 0.0);
        for (l, qi) in lengths.iter().zip(q) {
            angle += qi;
            x += l * angle.cos();
            y += l * angle.sin();
        }
        let p = eval(&f, q)[0].clone();
        prop_assert!((p[0] - x).abs() <= 1e-12 && (p[1] - y).abs() <= 1e-12 && p[2].abs() <= 1e-12);
    }

    #[test]
    fn qp_solution_satisfies_kkt(
        n in 2usize..6,
        m in 1usize..6,
        data in proptest::collection::vec(-1.0f64..1.0, 80),
    ) {
        let mut it = data.iter().copied().cycle();
        let g = DMatrix::from_fn(n, n, |_, _| it.next().unwrap());
        let h = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
        let q = DVector::from_fn(n, |_, _| 3.0 * it.next().unwrap());
        let a = DMatrix::from_fn(m, n, |_, _| it.next().unwrap());
        // Bounds around A*x0 keep the problem feasible.
        let x0 = DVector::from_fn(n, |_, _| it.next().unwrap());
        let ax0 = &a * &x0;
        let l = ax0.map(|v| v - 0.1);
        let u = DVector::from_fn(m, |i, _| ax0[i] + 0.1 + 0.5 * it.next().unwrap().abs());
        let p = QpProblem { h: &h, q: &q, a: &a, l: &l, u: &u };
        let s = qp::solve(&p, &QpSettings::default(), None);
        prop_assert_eq!(s.status, QpStatus::Solved);
        prop_assert!(p.primal_violation(&s.x) <= 1e-6);
        prop_assert!(p.stationarity(&s.x, &s.y) <= 1e-6);
        let ax = &a * &s.x;
        for i in 0..m {
            // Upper-bound multipliers are positive, lower-bound ones negative.
            prop_assert!(s.y[i] <= 1e-6 || (ax[i] - u[i]).abs() <= 1e-6);
            prop_assert!(s.y[i] >= -1e-6 || (ax[i] - l[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn batch_modes_agree(xs in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 0..40)) {
        let v = leaf_block("x", LeafKind::Variable, 3, 1);
        let f = Function::new(&[&v], &[&template(&v, &[0.5, -0.3, 1.0, 0.2])]).unwrap();
        let a = f.eval_batch(&xs, ExecMode::Parallel).unwrap();
        let b = f.eval_batch(&xs, ExecMode::Sequential).unwrap();
        prop_assert_eq!(&a, &b);
        let c = par::map_mode(ExecMode::Parallel, &xs, |x| eval(&f, x)[0][0]);
        prop_assert_eq!(c, b.iter().map(|r| r[0]).collect::<Vec<_>>());
    }
}
