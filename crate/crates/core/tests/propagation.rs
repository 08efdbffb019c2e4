use decoh_core::lindblad::{self, DensityMatrix, PropagationConfig, Trajectory};
use decoh_core::qsystem::{build_model, Decoherence, Model};
use decoh_core::reproduce::{self, Target};
use decoh_core::{ControlField, LevelSystem};

fn cfg() -> PropagationConfig<f64> {
    PropagationConfig::default()
}

fn field_for(sys: &LevelSystem<f64>, amp: f64) -> ControlField<f64> {
    let m = sys.carriers().len();
    let amps: Vec<f64> = (0..m).map(|i| amp * (1.0 + 0.3 * i as f64)).collect();
    let phases: Vec<f64> = (0..m).map(|i| 0.7 * i as f64).collect();
    ControlField::resonant(&sys.carriers(), &amps, &phases).unwrap()
}

fn assert_physical(traj: &Trajectory<f64>, pure: bool) {
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        assert!((rho.trace().re - 1.0).abs() < 1e-9 && rho.trace().im.abs() < 1e-9, "trace at {t}");
        assert!(rho.hermiticity_residual() < 1e-10, "hermiticity at {t}");
        assert!(rho.min_eigenvalue() >= -1e-8, "positivity at {t}");
        if pure {
            assert!((rho.purity() - 1.0).abs() < 1e-8, "purity at {t}");
        }
    }
}

#[test]
fn table_one_populations() {
    let rows = reproduce::table_one_rows(&cfg()).unwrap();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert!(r.pass == Some(true), "{r:?}");
    }
}

#[test]
fn table_one_runs_quickly() {
    let sys = build_model::<f64>(Model::M1);
    let start = std::time::Instant::now();
    for g in [0.01, 0.03, 0.05] {
        lindblad::final_state(&sys, None, &Decoherence::uniform(&sys, g).unwrap(), &cfg()).unwrap();
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn field_free_columns_except_model_three() {
    for t in [Target::Table(2), Target::Table(3), Target::Table(4), Target::Table(6)] {
        for r in reproduce::field_free_rows(t, &cfg()).unwrap() {
            assert!(r.pass == Some(true), "{t}: {r:?}");
        }
    }
}

#[test]
fn invariants_hold_along_trajectories() {
    for model in Model::ALL {
        let sys = build_model::<f64>(model);
        let field = field_for(&sys, 0.05);
        for g in [0.0, 0.05] {
            let dec = Decoherence::uniform(&sys, g).unwrap();
            let rho0 = DensityMatrix::pure(sys.n_levels, sys.initial_state);
            let traj = lindblad::propagate_with(&sys, Some(&field), &dec, &rho0, &cfg().with_store_every(500)).unwrap();
            assert_eq!(traj.states.len(), 41);
            assert_physical(&traj, g == 0.0);
        }
    }
}

#[test]
fn dt_halving_changes_little() {
    for model in [Model::M1, Model::M4] {
        let sys = build_model::<f64>(model);
        let field = field_for(&sys, 0.05);
        let dec = Decoherence::uniform(&sys, 0.03).unwrap();
        let a = lindblad::final_state(&sys, Some(&field), &dec, &cfg()).unwrap().populations();
        let b = lindblad::final_state(&sys, Some(&field), &dec, &cfg().with_dt(0.005)).unwrap().populations();
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6, "{model}: {diff}");
    }
}

#[test]
fn fourth_order_convergence() {
    let sys = build_model::<f64>(Model::M1);
    let field = field_for(&sys, 0.1);
    let dec = Decoherence::uniform(&sys, 0.03).unwrap();
    let pops = |dt: f64| lindblad::final_state(&sys, Some(&field), &dec, &cfg().with_dt(dt)).unwrap().populations();
    let reference = pops(0.003125);
    let err = |dt: f64| pops(dt).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (e1, e2, e3) = (err(0.05), err(0.025), err(0.0125));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn matches_exponential_oracle_without_field() {
    for model in Model::ALL {
        let sys = build_model::<f64>(model);
        let dec = Decoherence::uniform(&sys, 0.05).unwrap();
        let rho0 = DensityMatrix::pure(sys.n_levels, 0);
        let rk = lindblad::final_state(&sys, None, &dec, &cfg()).unwrap();
        let exact = lindblad::superop_propagate_oracle(&sys, &dec, &rho0, 200.0).unwrap();
        let diff = rk
            .matrix()
            .iter()
            .zip(exact.matrix().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{model}: {diff}");
    }
}

#[test]
fn split_decoherence_on_model_four() {
    let sys = build_model::<f64>(Model::M4);
    let o = |gl: f64, gr: f64| {
        let dec = Decoherence::split(&sys, Model::M4.right_path_levels(), gl, gr).unwrap();
        lindblad::yield_of(&sys, None, &dec, &cfg()).unwrap() * 100.0
    };
    assert!((o(0.04, 0.0) - 1.42).abs() < 0.15);
    assert!((o(0.0, 0.04) - 0.85).abs() < 0.15);
    assert_eq!(o(0.0, 0.0), 0.0);
}

#[test]
fn single_precision_tracks_double() {
    let sys64 = build_model::<f64>(Model::M1);
    let sys32 = build_model::<f32>(Model::M1);
    let dec32 = Decoherence::uniform(&sys32, 0.03f32).unwrap();
    let f32field = ControlField::resonant(&sys32.carriers(), &[0.05f32, 0.06, 0.07, 0.05], &[0.0, 0.7, 1.4, 2.1]).unwrap();
    let f64field = ControlField::resonant(&sys64.carriers(), &[0.05, 0.06, 0.07, 0.05], &[0.0, 0.7, 1.4, 2.1]).unwrap();
    let cfg32 = PropagationConfig::<f32>::default().with_dt(0.02);
    let o32 = lindblad::yield_of(&sys32, Some(&f32field), &dec32, &cfg32).unwrap() as f64;
    let o64 = lindblad::yield_of(&sys64, Some(&f64field), &Decoherence::uniform(&sys64, 0.03).unwrap(), &cfg()).unwrap();
    assert!((o32 - o64).abs() < 1e-4, "{o32} vs {o64}");
}
