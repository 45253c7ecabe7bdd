use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use orthotropic_core::grid::{Field, Grid, SpaceCube};
use orthotropic_core::scenarios::{heat_final_error, heat_problem, DefaultScenario};
use orthotropic_core::solver::{
    epsilon_sweep, implicit_step, solve, weak_residual, CauchyDirichletProblem, SolverConfig,
};
use orthotropic_core::{Error, ProblemParams};

fn square_grid(nodes: usize, steps: usize) -> Grid {
    Grid::new(SpaceCube::new(vec![0.0, 0.0], 1.0).unwrap(), nodes, (0.0, 0.1), steps).unwrap()
}

#[test]
fn affine_data_is_stationary() {
    let grid = square_grid(17, 5);
    for params in [
        ProblemParams::new(3.0, vec![1.0, 1.0], 0.1).unwrap(),
        ProblemParams::new(2.0, vec![1.0, 1.0], 0.1).unwrap(),
        ProblemParams::new(2.5, vec![0.5, 0.0], 0.2).unwrap(),
    ] {
        let data = Field::from_fn(grid.clone(), |x, _| 1.7 * x[0] - 0.6 * x[1] + 0.3).unwrap();
        let problem = CauchyDirichletProblem::new(params, data.clone()).unwrap();
        let result = solve(&problem, &SolverConfig::default()).unwrap();
        for (a, b) in result.solution.values().iter().zip(data.values()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn zero_and_constant_data() {
    let grid = square_grid(9, 3);
    let params = ProblemParams::new(3.0, vec![1.0, 0.5], 0.1).unwrap();
    let zero = CauchyDirichletProblem::new(params.clone(), Field::zeros(grid.clone())).unwrap();
    let result = solve(&zero, &SolverConfig::default()).unwrap();
    assert!(result.solution.values().iter().all(|&v| v == 0.0));
    let c = Field::from_fn(grid, |_, _| 2.5).unwrap();
    let problem = CauchyDirichletProblem::new(params, c).unwrap();
    let (next, record) =
        implicit_step(problem.reference().slice(0), 0.01, 1, &problem, &SolverConfig::default())
            .unwrap();
    assert!(next.iter().all(|&v| v == 2.5));
    assert_eq!(record.newton_iterations, 0);
}

#[test]
fn degenerate_limit_outside_heat_mode_is_rejected() {
    let grid = square_grid(9, 3);
    let params = ProblemParams::new(3.0, vec![1.0, 1.0], 0.0).unwrap();
    assert!(matches!(
        CauchyDirichletProblem::new(params, Field::zeros(grid)),
        Err(Error::InvalidParameter { .. })
    ));
}

#[test]
fn heat_mode_matches_oracle() {
    let coarse = solve(&heat_problem(2, 9, 0.005, 200).unwrap(), &SolverConfig::default()).unwrap();
    let fine = solve(&heat_problem(2, 17, 0.005, 200).unwrap(), &SolverConfig::default()).unwrap();
    let (e1, e2) = (heat_final_error(&coarse), heat_final_error(&fine));
    assert!(e1 / e2 >= 1.8, "{e1} {e2}");
}

#[test]
fn step_energy_decreases_and_residual_converges() {
    let scenario = DefaultScenario {
        nodes_per_axis: 17,
        time_steps: Some(10),
        ..Default::default()
    };
    let problem = CauchyDirichletProblem::new(scenario.params(0.05).unwrap(), scenario.data().unwrap()).unwrap();
    let result = solve(&problem, &SolverConfig::default()).unwrap();
    assert!(result.is_converged());
    for record in &result.diagnostics {
        assert!(record.energy_monotone(), "{record:?}");
        assert!(record.energy_after <= record.energy_before);
    }
    let mut lines = Vec::new();
    result.write_diagnostics_jsonl(&mut lines).unwrap();
    let text = String::from_utf8(lines).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().next().unwrap().contains("\"newton_iterations\""));
}

#[test]
fn solves_are_bitwise_deterministic() {
    let scenario = DefaultScenario {
        nodes_per_axis: 17,
        time_steps: Some(4),
        ..Default::default()
    };
    let problem = CauchyDirichletProblem::new(scenario.params(0.1).unwrap(), scenario.data().unwrap()).unwrap();
    let a = solve(&problem, &SolverConfig::default()).unwrap();
    let b = solve(&problem, &SolverConfig::default()).unwrap();
    let bits = |f: &Field| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.solution), bits(&b.solution));
}

#[test]
fn discrete_maximum_principle() {
    let grid = square_grid(17, 10);
    let m = 1.0;
    let data = Field::from_fn(grid, |x, t| {
        if t == 0.0 && x.iter().all(|v| v.abs() < 1.0) {
            m - 1.5 * (PI * x[0]).cos().powi(2) * (PI * x[1] / 2.0).cos()
        } else {
            m
        }
    })
    .unwrap();
    let params = ProblemParams::new(3.0, vec![0.5, 0.5], 0.1).unwrap();
    let result = solve(&CauchyDirichletProblem::new(params, data).unwrap(), &SolverConfig::default()).unwrap();
    let max = result.solution.values().iter().fold(f64::MIN, |a, &b| a.max(b));
    assert!(max <= m + 1e-10, "{max}");
}

#[test]
fn weak_residual_separates_solutions_from_noise() {
    let result = solve(&heat_problem(2, 65, 0.02, 40).unwrap(), &SolverConfig::default()).unwrap();
    let grid = result.grid().clone();
    let (t0, t1) = grid.time_interval();
    let phi = Field::from_fn(grid.clone(), |x, t| {
        let s = (t - t0) / (t1 - t0);
        (PI * s).sin() * x.iter().map(|xi| (PI * xi).sin().powi(2)).product::<f64>()
    })
    .unwrap();
    let solved = weak_residual(&result, &phi).unwrap();
    assert_eq!(weak_residual(&result, &Field::zeros(grid.clone())).unwrap(), 0.0);
    let mut noisy = result.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values = result.solution.values().iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
    noisy.solution = Field::new(grid.clone(), values).unwrap();
    let noise = weak_residual(&noisy, &phi).unwrap();
    assert!(noise.abs() > 10.0 * solved.abs(), "{solved} {noise}");
}

#[test]
fn sweep_is_ordered_and_shares_data() {
    let scenario = DefaultScenario {
        nodes_per_axis: 9,
        time_steps: Some(3),
        ..Default::default()
    };
    let problem = CauchyDirichletProblem::new(scenario.params(0.1).unwrap(), scenario.data().unwrap()).unwrap();
    let sweep = epsilon_sweep(&problem, &[0.05, 0.1, 2.0], &SolverConfig::default());
    assert_eq!(sweep.iter().map(|e| e.epsilon).collect::<Vec<_>>(), vec![2.0, 0.1, 0.05]);
    assert!(sweep[0].result.is_err());
    let a = sweep[1].result.as_ref().unwrap();
    let b = sweep[2].result.as_ref().unwrap();
    let grid = a.grid();
    for k in 0..grid.slices() {
        for node in 0..grid.spatial_len() {
            if k == 0 || grid.is_boundary(node) {
                assert_eq!(a.solution.slice(k)[node].to_bits(), b.solution.slice(k)[node].to_bits());
            }
        }
    }
    let single = epsilon_sweep(&problem, &[0.1], &SolverConfig::default());
    let direct = solve(&problem, &SolverConfig::default()).unwrap();
    assert_eq!(single[0].result.as_ref().unwrap().solution, direct.solution);
}
