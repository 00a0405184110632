use alip_core::model::{propagate_passive, RobotParams};
use alip_core::synth::{default_profile, synthesize_nominal};
use alip_core::trajectory::{check_periodicity, TrajectoryLibrary};
use alip_core::NominalTrajectory;

fn params() -> RobotParams {
    RobotParams::with_mass(32.0).unwrap()
}

fn orbit(incline: f64) -> NominalTrajectory {
    synthesize_nominal(incline, 0.5, 0.4, &params(), &default_profile()).unwrap()
}

#[test]
fn orbits_are_periodic_across_inclines() {
    for incline in [0.0, 4.0, 8.0, 15.0, 20.0] {
        let traj = orbit(incline);
        let report = check_periodicity(&traj, &params(), 1e-6).unwrap();
        assert!(report.passed(), "{incline} deg: residual {}", report.residual);
        assert!(traj.is_periodic());
    }
}

/// Torque-free re-integration from the stored start state reproduces the
/// stored curves over the whole step.
#[test]
fn stored_curves_match_reintegration() {
    let p = params();
    for incline in [0.0, 15.0] {
        let traj = orbit(incline);
        let x0 = traj.nominal_state(0.0);
        let profile = &traj.sagittal().profile;
        for k in 1..=20 {
            let t = traj.duration() * k as f64 / 20.0;
            let x = propagate_passive(x0, 0.0, t, traj.integration_dt(), &p, profile).unwrap();
            let stored = traj.nominal_state(t);
            assert!((x.theta - stored.theta).abs() < 1e-3, "{incline} deg t {t}");
            assert!((x.momentum - stored.momentum).abs() / stored.momentum.abs() < 1e-3, "{incline} deg t {t}");
        }
    }
}

#[test]
fn forward_walking_signs() {
    let traj = orbit(8.0);
    let start = traj.nominal_state(0.0);
    let end = traj.nominal_state(traj.duration());
    assert!(start.theta > 0.0 && end.theta < 0.0);
    assert!(start.momentum < 0.0);
    assert!(traj.step_displacement().horizontal < 0.0);
    assert!(traj.step_displacement().vertical > 0.0);
}

#[test]
fn library_text_round_trip_and_selection() {
    let lib = TrajectoryLibrary::new(vec![orbit(0.0), orbit(8.0), orbit(15.0)]).unwrap();
    assert_eq!(lib.breakpoints(), vec![8.0, 15.0]);
    let back = TrajectoryLibrary::from_text(&lib.to_text()).unwrap();
    assert_eq!(back, lib);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lib.txt");
    lib.save(&path).unwrap();
    assert_eq!(TrajectoryLibrary::load(&path).unwrap(), lib);
    for (incline, name) in [(-3.0, "flat"), (7.999, "flat"), (8.0, "incline8"), (14.9, "incline8"), (15.0, "incline15"), (25.0, "incline15")] {
        assert_eq!(lib.select_by_incline(incline).name(), name, "{incline}");
    }
}

#[test]
fn unsorted_library_is_rejected() {
    assert!(TrajectoryLibrary::new(vec![orbit(8.0), orbit(0.0)]).is_err());
    assert!(TrajectoryLibrary::new(vec![]).is_err());
}
