use ptstab_sim::{lyapunov_monitors, SafeguardActivity, Sample, Trajectory};

fn sample(k: usize, v: f64, v_bar: f64) -> Sample {
    let tau = k as f64 * 1e-3;
    Sample {
        t: tau,
        tau,
        x: vec![0.0, 0.0],
        z: vec![],
        eta: vec![0.0],
        u: 0.0,
        u1: 0.0,
        u2: 0.0,
        r: 1.0 + tau,
        theta_hat: 1.0 + tau,
        theta1_hat: 0.0,
        v,
        v_bar,
        alpha: 1.0,
    }
}

fn traj(samples: Vec<Sample>) -> Trajectory {
    Trajectory {
        n: 2,
        n_z: 0,
        samples,
        d_tau: 1e-3,
        record_stride: 1,
        steps: 0,
        safeguards: SafeguardActivity::default(),
        metadata: vec![],
    }
}

#[test]
fn resting_trajectory_passes_with_equality() {
    let t = traj((0..50).map(|k| sample(k, 0.0, 0.0)).collect());
    let rep = lyapunov_monitors(&t, 0.3, 0.01);
    assert!(rep.pass, "{rep}");
    assert_eq!(rep.decay_worst_excess, 0.0);
    assert_eq!(rep.tau0, Some(0.0));
}

#[test]
fn bumped_vbar_is_flagged_at_its_sample() {
    let mut s: Vec<Sample> = (0..50).map(|k| sample(k, 0.0, 100.0 - k as f64)).collect();
    s[20].v_bar += 10.0;
    let rep = lyapunov_monitors(&traj(s), 0.3, 0.01);
    assert!(!rep.vbar_monotone);
    assert_eq!(rep.vbar_worst_index, Some(20));
    assert!(!rep.pass);
}

#[test]
fn exponential_decay_detected_after_transient() {
    let kappa = 0.5;
    let s: Vec<Sample> = (0..400)
        .map(|k| {
            let tau = k as f64 * 1e-3;
            // growth until tau = 0.1, then decay at rate 2 kappa
            let v = if tau < 0.1 { 1.0 + tau } else { 1.1 * (-2.0 * kappa * (tau - 0.1)).exp() };
            sample(k, v, 10.0 - tau)
        })
        .collect();
    let rep = lyapunov_monitors(&traj(s), kappa, 0.2);
    let tau0 = rep.tau0.expect("decay phase should be found");
    assert!((tau0 - 0.1).abs() < 3e-3, "tau0 {tau0}");
    assert!(rep.pass, "{rep}");
}

#[test]
fn growth_at_the_end_leaves_no_tau0() {
    let s: Vec<Sample> = (0..100).map(|k| sample(k, 1.0 + k as f64, 0.0)).collect();
    let rep = lyapunov_monitors(&traj(s), 0.5, 0.05);
    assert_eq!(rep.tau0, None);
    assert!(!rep.pass);
}

#[test]
fn floor_and_monotonicity_violations() {
    let mut s: Vec<Sample> = (0..10).map(|k| sample(k, 0.0, 0.0)).collect();
    s[5].r = 0.5;
    let rep = lyapunov_monitors(&traj(s), 0.5, 0.005);
    assert!(!rep.floors_hold);
    assert!(!rep.states_monotone);
    assert!((rep.floor_deficit_r - 0.5).abs() < 1e-15);
    assert!(rep.to_kv().contains("pass=false"));
}

#[test]
fn interpolated_norm_at_check_time() {
    let mut s: Vec<Sample> = (0..3).map(|k| sample(k, 0.0, 0.0)).collect();
    s[1].x = vec![3.0, 4.0];
    let t = traj(s);
    assert_eq!(t.x_norm_at(1e-3), Some(5.0));
    assert!((t.x_norm_at(1.5e-3).unwrap() - 2.5).abs() < 1e-12);
    assert_eq!(t.x_norm_at(1.0), None);
}
