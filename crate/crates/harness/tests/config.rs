use lsoc::scenarios::{ControlMode, Scenario};
use lsoc_harness::{load_config, load_config_with, HarnessError, Mode, Overrides};

#[test]
fn minimal_file_takes_defaults() {
    let c = load_config("scenario = \"grid\"").unwrap();
    assert_eq!(c.mode, Mode::Compose);
    assert_eq!(c.seed, 0);
    assert_eq!(c.runs, 1);
    assert_eq!(c.control, ControlMode::Receding);
    assert_eq!(c.sampling.n_rollouts, 1000);
    assert_eq!(c.sampling.dt, 0.05);
    assert_eq!(c.sampling.horizon_steps, 100);
    assert_eq!(c.solver.compare_tol, 1e-9);
    let Scenario::Grid(g) = &c.scenario else {
        panic!("expected a grid")
    };
    assert_eq!((g.rows, g.cols, g.step_cap), (5, 5, 200));
}

#[test]
fn scenario_is_required() {
    let err = load_config("seed = 3").unwrap_err();
    assert!(
        matches!(err, HarnessError::Field { ref field, .. } if field == "scenario"),
        "{err}"
    );
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn negative_dt_names_the_field() {
    let err = load_config("scenario = \"uav-example2\"\n[sampling]\ndt = -0.1").unwrap_err();
    assert!(
        matches!(err, HarnessError::Field { ref field, .. } if field == "dt"),
        "{err}"
    );
    assert!(err.to_string().contains("dt"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_keys_are_rejected() {
    for text in [
        "scenario = \"grid\"\nspeed = 1",
        "scenario = \"grid\"\n[sampling]\nrollouts = 10",
        "scenario = \"grid\"\n[grid]\nwalls = []",
    ] {
        let err = load_config(text).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
}

#[test]
fn parse_errors_carry_position() {
    let err = load_config("scenario = \"grid\"\nseed = = 4\n").unwrap_err();
    match err {
        HarnessError::Parse { line, column, .. } => {
            assert_eq!(line, 2);
            assert!(column > 1);
        }
        e => panic!("expected a parse error, got {e}"),
    }
}

#[test]
fn constants_round_trip_bit_exactly() {
    let text = "scenario = \"uav-example2\"\nkernel_width = 0.05\n[sampling]\ndt = 0.05\n[uav]\nsigma = 0.05\nnu = 0.025\ngoal_weight = 0.9\n";
    let c = load_config(text).unwrap();
    let Scenario::Uav(u) = &c.scenario else {
        panic!("expected a unicycle team")
    };
    assert_eq!(c.sampling.dt.to_bits(), 0.05f64.to_bits());
    assert_eq!(u.kernel_width.to_bits(), 0.05f64.to_bits());
    assert_eq!(u.sigma.to_bits(), 0.05f64.to_bits());
    assert_eq!(u.nu.to_bits(), 0.025f64.to_bits());
    assert_eq!(u.goal_weight.to_bits(), 0.9f64.to_bits());

    let again = toml::to_string(&c.scenario).unwrap();
    let back: Scenario = toml::from_str(&again).unwrap();
    assert_eq!(back, c.scenario);
}

#[test]
fn overlays_replace_single_fields() {
    let c = load_config("scenario = \"grid\"\n[grid]\nobstacles = [[1, 3]]\nstep_cap = 50").unwrap();
    let Scenario::Grid(g) = &c.scenario else {
        panic!("expected a grid")
    };
    assert_eq!(g.obstacles, vec![[1, 3]]);
    assert_eq!(g.step_cap, 50);
    assert_eq!(g.free_value, 2.5);
}

#[test]
fn wrong_section_for_scenario() {
    let err = load_config("scenario = \"grid\"\n[uav]\nsigma = 0.1").unwrap_err();
    assert!(
        matches!(err, HarnessError::Field { ref field, .. } if field == "uav"),
        "{err}"
    );
}

#[test]
fn command_line_overrides_file() {
    let o = Overrides {
        seed: Some(9),
        dt: Some(0.01),
        control: Some(ControlMode::Tape),
        ..Default::default()
    };
    let c = load_config_with("scenario = \"uav-example1\"\nseed = 2\n[sampling]\ndt = 0.1", &o).unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.sampling.dt, 0.01);
    assert_eq!(c.control, ControlMode::Tape);
}

#[test]
fn mode_constraints() {
    let err = load_config("scenario = \"uav-example2\"\nmode = \"compare\"").unwrap_err();
    assert!(
        matches!(err, HarnessError::Field { ref field, .. } if field == "mode"),
        "{err}"
    );
    let err = load_config("scenario = \"grid\"\nmode = \"run-component\"").unwrap_err();
    assert!(
        matches!(err, HarnessError::Field { ref field, .. } if field == "component"),
        "{err}"
    );
    let err = load_config("scenario = \"grid\"\nmode = \"run-component\"\ncomponent = 2").unwrap_err();
    assert!(
        matches!(err, HarnessError::Field { ref field, .. } if field == "component"),
        "{err}"
    );
    let err = load_config("scenario = \"mars\"").unwrap_err();
    assert!(
        matches!(err, HarnessError::Field { ref field, .. } if field == "scenario"),
        "{err}"
    );
}
