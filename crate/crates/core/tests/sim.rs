use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robreg_core::etc_bounds::{qtilde, Bound, TriggerMatrix};
use robreg_core::model::{ControllerGains, Nonlinearity, PlantModel, RegulationTask, UncertaintyRealization};
use robreg_core::sim::*;
use robreg_core::synthesis::{certify, default_zeta_grid};

fn scalar_model(a: f64, ab: f64, bb: f64) -> PlantModel {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    PlantModel::new(m(a), m(1.0), m(1.0), m(ab), m(bb), 0.0).unwrap()
}

fn pi_gains(b_c: f64, c_c: f64, d_c: f64) -> ControllerGains {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    ControllerGains {
        b_c: m(b_c),
        c_c: m(c_c),
        d_c: m(d_c),
    }
}

fn task(y: f64) -> RegulationTask {
    RegulationTask::new(DVector::from_element(1, y))
}

fn config(t_end: f64, step: f64, h: f64, trigger: Trigger) -> SimConfig {
    SimConfig {
        t_end,
        rk4_step: step,
        schedule: SampleSchedule::Periodic { h },
        trigger,
        x0: None,
        w0: None,
        tail_fraction: 0.2,
        record: true,
    }
}

/// `exp(M t)` by scaling and squaring of a Taylor polynomial.
fn expm(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let s = 20;
    let a = m * (t / 2f64.powi(s));
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..20 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

#[test]
fn scalar_loop_matches_closed_form() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let (b_c, c_c, d_c) = (-1.0, 1.0, -0.5);
    let gains = pi_gains(b_c, c_c, d_c);
    let y_d = 1.0;
    let real = UncertaintyRealization::nominal(&model);
    let cfg = config(30.0, 1e-3, 1.0, Trigger::None);
    let traj = simulate_continuous(&model, &gains, &task(y_d), &real, &cfg).unwrap();
    // z = (x, w): ż = M z + c with e = x − y_d.
    let m = DMatrix::from_row_slice(2, 2, &[-1.0 + d_c, c_c, b_c, 0.0]);
    let c = DVector::from_vec(vec![-d_c * y_d, -b_c * y_d]);
    let z_eq = -m.clone().try_inverse().unwrap() * &c;
    assert!((z_eq[0] - y_d).abs() < 1e-12);
    for (k, t) in traj.times.iter().enumerate().step_by(997) {
        let z = &z_eq + expm(&m, *t) * (-&z_eq);
        assert!((traj.x[k][0] - z[0]).abs() < 1e-9, "t = {t}");
        assert!((traj.w[k][0] - z[1]).abs() < 1e-9, "t = {t}");
    }
    assert!(traj.regulation_error_tail <= 1e-6);
}

#[test]
fn synthesized_scalar_loop_regulates() {
    let model = scalar_model(-1.0, 0.1, 0.1);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let cert = certify(&model, &gains, &default_zeta_grid()).unwrap();
    assert!(cert.certified());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let real = sample_realization(&model, &RealizationMode::Uniform, Nonlinearity::None, &mut rng);
        let traj = simulate_continuous(&model, &gains, &task(1.0), &real, &config(40.0, 1e-2, 1.0, Trigger::None)).unwrap();
        assert!(traj.regulation_error_tail <= 1e-6, "{}", traj.regulation_error_tail);
    }
}

#[test]
fn constant_nonlinearity_is_absorbed() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let mut real = UncertaintyRealization::nominal(&model);
    real.nonlinearity = Nonlinearity::Constant(DVector::from_element(1, 0.7));
    let traj = simulate_continuous(&model, &gains, &task(2.0), &real, &config(40.0, 1e-2, 1.0, Trigger::None)).unwrap();
    assert!(traj.regulation_error_tail <= 1e-6);
}

#[test]
fn zero_trigger_updates_every_sample() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let real = UncertaintyRealization::nominal(&model);
    let q = TriggerMatrix { q: DMatrix::zeros(5, 5) };
    let traj = simulate_aetc(&model, &gains, &task(1.0), &real, &config(10.0, 0.01, 0.1, Trigger::Matrix(q))).unwrap();
    assert!(traj.events.iter().all(|e| *e));
    assert_eq!(traj.event_rate, 1.0);
    assert_eq!(traj.sample_times.len(), traj.events.len());
}

#[test]
fn huge_threshold_updates_once() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let real = UncertaintyRealization::nominal(&model);
    let trig = Trigger::Thresholds { q0: 1e12, q1: 0.0 };
    let traj = simulate_aetc(&model, &gains, &task(1.0), &real, &config(5.0, 0.01, 0.1, trig)).unwrap();
    assert_eq!(traj.event_count(), 1);
    assert!(traj.events[0]);
    assert!((traj.event_rate - 1.0 / traj.sample_times.len() as f64).abs() < 1e-15);
}

#[test]
fn hold_structure_between_samples() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let real = UncertaintyRealization::nominal(&model);
    let trig = Trigger::Thresholds { q0: 1e-3, q1: 1e-3 };
    let cfg = config(8.0, 0.01, 0.1, trig);
    let traj = simulate_aetc(&model, &gains, &task(1.0), &real, &cfg).unwrap();
    assert!(traj.event_count() > 1 && traj.event_count() < traj.events.len());
    assert!(traj.event_count() <= traj.sample_times.len());
    for k in 1..traj.times.len() {
        if !traj.row_events[k] {
            assert_eq!(traj.u[k], traj.u[k - 1], "u changed without an event at {}", traj.times[k]);
        }
    }
    // w is affine between consecutive sample instants.
    let is_sample = |t: f64| traj.sample_times.iter().any(|s| (s - t).abs() < 1e-12);
    for k in 1..traj.times.len() - 1 {
        if !is_sample(traj.times[k]) {
            let (t0, t1, t2) = (traj.times[k - 1], traj.times[k], traj.times[k + 1]);
            let (w0, w1, w2) = (traj.w[k - 1][0], traj.w[k][0], traj.w[k + 1][0]);
            let slope_a = (w1 - w0) / (t1 - t0);
            let slope_b = (w2 - w1) / (t2 - t1);
            assert!((slope_a - slope_b).abs() < 1e-8, "kink at {t1}");
        }
    }
}

#[test]
fn aetc_approaches_continuous_for_fast_sampling() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let mut real = UncertaintyRealization::nominal(&model);
    real.nonlinearity = Nonlinearity::sinusoid(0.5);
    let cont = simulate_continuous(&model, &gains, &task(1.0), &real, &config(5.0, 1e-4, 1e-3, Trigger::None)).unwrap();
    let trig = Trigger::Thresholds { q0: 0.0, q1: 0.0 };
    let aetc = simulate_aetc(&model, &gains, &task(1.0), &real, &config(5.0, 1e-4, 1e-3, trig)).unwrap();
    let (a, b) = (cont.regulation_error_tail, aetc.regulation_error_tail);
    assert!(a > 1e-3);
    assert!((a - b).abs() <= 0.05 * a, "{a} vs {b}");
}

#[test]
fn halving_the_step_changes_little() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let mut real = UncertaintyRealization::nominal(&model);
    real.nonlinearity = Nonlinearity::sinusoid(1.0);
    let run = |step: f64| {
        simulate_continuous(&model, &gains, &task(1.0), &real, &config(5.0, step, 1.0, Trigger::None))
            .unwrap()
            .regulation_error_tail
    };
    let (a, b) = (run(2e-3), run(1e-3));
    assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-300), "{a} vs {b}");
}

#[test]
fn runs_are_bit_identical() {
    let model = scalar_model(-1.0, 0.1, 0.1);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let mut cfg = config(5.0, 0.01, 0.05, Trigger::Thresholds { q0: 1e-4, q1: 1e-2 });
    cfg.schedule = SampleSchedule::Jittered {
        h_min: 0.05,
        h_max: 0.2,
        seed: 9,
    };
    let csv = || {
        let mut rng = task_rng(4, 0);
        let real = sample_realization(&model, &RealizationMode::Uniform, Nonlinearity::sinusoid(0.3), &mut rng);
        let traj = simulate_aetc(&model, &gains, &task(1.0), &real, &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        buf
    };
    assert_eq!(csv(), csv());
}

#[test]
fn csv_layout() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let real = UncertaintyRealization::nominal(&model);
    let traj = simulate_aetc(&model, &gains, &task(1.0), &real, &config(0.2, 0.01, 0.1, Trigger::Thresholds { q0: 0.0, q1: 0.0 })).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,w1,u1,y1,event");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 6);
    assert_eq!(first[0], "0.0000000000000000e0");
    assert_eq!(first[5], "1");
    assert_eq!(text.lines().count(), traj.times.len() + 1);
}

#[test]
fn divergence_is_reported_with_partial_trajectory() {
    let model = scalar_model(1.0, 0.0, 0.0);
    let gains = pi_gains(0.0, 1.0, 0.0);
    let mut cfg = config(100.0, 0.01, 1.0, Trigger::None);
    cfg.x0 = Some(DVector::from_element(1, 1.0));
    let real = UncertaintyRealization::nominal(&model);
    match simulate_continuous(&model, &gains, &task(0.0), &real, &cfg) {
        Err(SimError::NonFiniteState { t, partial }) => {
            assert!(t > 20.0 && t < 30.0, "{t}");
            assert!(!partial.times.is_empty());
            assert!(partial.x.last().unwrap()[0] <= DIVERGENCE_GUARD);
        }
        other => panic!("expected divergence, got {:?}", other.map(|t| t.regulation_error_tail)),
    }
}

#[test]
fn config_invariants_are_checked() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let real = UncertaintyRealization::nominal(&model);
    let bad_step = config(1.0, 0.05, 0.1, Trigger::Thresholds { q0: 0.0, q1: 0.0 });
    assert!(matches!(simulate_aetc(&model, &gains, &task(1.0), &real, &bad_step), Err(SimError::InvalidConfig(_))));
    let mut bad_tail = config(1.0, 0.01, 0.1, Trigger::None);
    bad_tail.tail_fraction = 1.0;
    assert!(bad_tail.check().is_err());
    let mut bad_x0 = config(1.0, 0.01, 0.1, Trigger::None);
    bad_x0.x0 = Some(DVector::zeros(3));
    assert!(simulate_continuous(&model, &gains, &task(1.0), &real, &bad_x0).is_err());
    let bad_q = Trigger::Matrix(TriggerMatrix { q: DMatrix::zeros(3, 3) });
    assert!(simulate_aetc(&model, &gains, &task(1.0), &real, &config(1.0, 0.01, 0.1, bad_q)).is_err());
}

#[test]
fn jittered_schedule_covers_horizon() {
    let s = SampleSchedule::Jittered {
        h_min: 0.1,
        h_max: 0.3,
        seed: 5,
    };
    let t = s.instants(10.0);
    assert_eq!(t[0], 0.0);
    assert!(*t.last().unwrap() >= 10.0);
    assert!(t.windows(2).all(|w| w[1] - w[0] >= 0.1 - 1e-12 && w[1] - w[0] <= 0.3 + 1e-12));
    assert_eq!(t, s.instants(10.0));
    assert_eq!(s.h_bar(), 0.3);
}

#[test]
fn realization_modes() {
    let zero = scalar_model(-1.0, 0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = sample_realization(&zero, &RealizationMode::Uniform, Nonlinearity::None, &mut rng);
    assert_eq!((r.da[(0, 0)], r.db[(0, 0)]), (0.0, 0.0));

    let model = PlantModel::new(
        DMatrix::from_element(3, 3, -1.0),
        DMatrix::from_element(3, 2, 1.0),
        DMatrix::from_element(1, 3, 1.0),
        DMatrix::from_fn(3, 3, |i, j| 0.1 * (i + j + 1) as f64),
        DMatrix::from_element(3, 2, 0.05),
        0.0,
    )
    .unwrap();
    let v = sample_realization(&model, &RealizationMode::Vertex, Nonlinearity::None, &mut rng);
    assert_eq!(v.da.abs(), model.a_bound);
    assert_eq!(v.db.abs(), model.b_bound);

    let mut lo = DMatrix::from_element(3, 3, f64::INFINITY);
    let mut hi = DMatrix::from_element(3, 3, f64::NEG_INFINITY);
    for _ in 0..10_000 {
        let u = sample_realization(&model, &RealizationMode::Uniform, Nonlinearity::None, &mut rng);
        assert!(u.in_box(&model));
        lo = lo.zip_map(&u.da, f64::min);
        hi = hi.zip_map(&u.da, f64::max);
    }
    for i in 0..9 {
        assert!(hi[i] <= model.a_bound[i] && lo[i] >= -model.a_bound[i]);
        assert!(hi[i] > 0.9 * model.a_bound[i] && lo[i] < -0.9 * model.a_bound[i]);
    }

    let a = sample_realization(&model, &RealizationMode::Uniform, Nonlinearity::None, &mut task_rng(7, 3));
    let b = sample_realization(&model, &RealizationMode::Uniform, Nonlinearity::None, &mut task_rng(7, 3));
    assert_eq!((a.da, a.db), (b.da, b.db));
}

#[test]
fn kb_sweep_with_zero_amplitude() {
    let model = scalar_model(-1.0, 0.1, 0.1);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let cert = certify(&model, &gains, &default_zeta_grid()).unwrap();
    let settings = SweepSettings {
        reps: 3,
        seed: 2,
        mode: RealizationMode::Uniform,
    };
    let rows = sweep_kb(&model, &cert, &task(1.0), &[0.0, 0.5], &settings, &config(40.0, 0.01, 1.0, Trigger::None)).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].worst_error <= 1e-6);
    assert_eq!(rows[0].bound, 0.0);
    assert!(rows[1].bound >= rows[1].worst_error);
    assert_eq!(rows[1].increment_bound, 0.5);
    let mut buf = Vec::new();
    write_kb_csv(&rows, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("kb,increment_bound,worst_error,mean_error,eps_c,event_rate,failures\n"));
}

#[test]
fn threshold_sweep_marks_undefined_rows() {
    let model = scalar_model(-1.0, 0.1, 0.1);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let cert = certify(&model, &gains, &default_zeta_grid()).unwrap();
    let aug = robreg_core::model::augment(&model, &gains).unwrap();
    let constants = robreg_core::etc_bounds::etc_constants(&aug, &model, &cert.p, &gains);
    let settings = SweepSettings {
        reps: 2,
        seed: 2,
        mode: RealizationMode::Uniform,
    };
    let cfg = config(10.0, 0.01, 0.05, Trigger::Thresholds { q0: 0.0, q1: 0.0 });
    let rows = sweep_threshold(&model, &cert, &constants, &task(1.0), &[0.5], 0.0, &settings, &cfg).unwrap();
    assert_eq!(rows[0].eps_d, Bound::Undefined);
    assert_eq!(rows[0].h_max, Bound::Undefined);
    assert!(rows[0].worst_error.is_finite());
    assert!(rows[0].event_rate > 0.0);
    let mut buf = Vec::new();
    write_threshold_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("undefined"));
}

#[test]
fn trigger_shorthand_equals_matrix() {
    let model = scalar_model(-1.0, 0.0, 0.0);
    let gains = pi_gains(-1.0, 1.0, -1.0);
    let real = UncertaintyRealization::nominal(&model);
    let a = simulate_aetc(&model, &gains, &task(1.0), &real, &config(5.0, 0.01, 0.1, Trigger::Thresholds { q0: 1e-3, q1: 1e-2 })).unwrap();
    let b = simulate_aetc(&model, &gains, &task(1.0), &real, &config(5.0, 0.01, 0.1, Trigger::Matrix(qtilde(1e-3, 1e-2, 2)))).unwrap();
    assert_eq!(a, b);
}

#[test]
fn default_horizon() {
    assert_eq!(default_t_end(0.5, 2.0), 200.0);
}
