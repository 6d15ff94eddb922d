use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use optask::expr::{self, leaf_block, named_values, Function, LeafKind};
use optask::fixtures::ARM6_URDF;
use optask::par::{self, ExecMode};
use optask::solvers::{SolverOptions, SolverSession};
use optask::{OptimizationBuilder, Problem, RobotModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, ExecMode); 2] = [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)];

fn random_configs(n: usize, dof: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dof).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect()
}

fn fk_batch(c: &mut Criterion) {
    let robot = RobotModel::from_urdf_str("arm", ARM6_URDF, &[0]).unwrap();
    let q = leaf_block("q", LeafKind::Variable, 6, 1);
    let p = robot.global_link_position("ee", &q).unwrap();
    let j = expr::jacobian(&p, &q).unwrap();
    let f = Function::new(&[&q], &[&p, &j]).unwrap();
    let inputs = random_configs(4096, 6, 1);

    let mut group = c.benchmark_group("fk_jacobian_batch");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| black_box(f.eval_batch(&inputs, mode).unwrap()))
        });
    }
    group.finish();
}

fn ik_problem(robot: &RobotModel) -> Problem {
    let mut b = OptimizationBuilder::new(1, &[robot.clone()], &[], true, false).unwrap();
    let q = b.get_model_state("arm", 0, 0).unwrap();
    let goal = b.add_parameter("goal", 3, 1).unwrap();
    let p = robot.global_link_position("ee", &q).unwrap();
    b.add_cost_term("goal", &(&p - &goal).sumsqr()).unwrap();
    b.enforce_model_limits("arm").unwrap();
    b.build().unwrap()
}

fn ik_batch(c: &mut Criterion) {
    let robot = RobotModel::from_urdf_str("arm", ARM6_URDF, &[0]).unwrap();
    let problem = Arc::new(ik_problem(&robot));
    let q = leaf_block("q", LeafKind::Variable, 6, 1);
    let fk = Function::new(&[&q], &[&robot.global_link_position("ee", &q).unwrap()]).unwrap();
    let goals: Vec<Vec<f64>> = random_configs(64, 6, 2).iter().map(|q| fk.eval(q).unwrap()[0].as_slice().to_vec()).collect();
    let seed = [0.0, -0.6, 1.4, 0.0, 0.8, 0.0];

    let solve = |goal: &Vec<f64>| {
        let mut s = SolverSession::new(problem.clone());
        s.setup("sqp", SolverOptions::default()).unwrap();
        s.reset_parameters(&named_values([("goal", DMatrix::from_column_slice(3, 1, goal))])).unwrap();
        s.reset_initial_seed(&named_values([("arm/q", DMatrix::from_column_slice(6, 1, &seed))])).unwrap();
        s.solve().unwrap().objective
    };

    let mut group = c.benchmark_group("ik_batch");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| black_box(par::map_mode(mode, &goals, solve)))
        });
    }
    group.finish();
}

criterion_group!(benches, fk_batch, ik_batch);
criterion_main!(benches);
