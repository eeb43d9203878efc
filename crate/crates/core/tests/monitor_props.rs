use iplna::learners::{Learner, LearnerSpec};
use iplna::linalg::{frobenius_norm, Matrix, Vector};
use iplna::monitor::{window_condition, AlarmReason, Monitor, MonitorConfig, NormKind};
use iplna::statespace::{LmdStructure, StateSpaceStep};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vector {
    Vector::from((0..n).map(|_| rng.random_range(-r..=r)).collect::<Vec<_>>())
}

fn cfg(p: usize, stride: usize, kind: NormKind) -> MonitorConfig {
    MonitorConfig {
        window_p: p,
        eval_stride: stride,
        norm_kind: kind,
        ..MonitorConfig::default()
    }
}

/// Runs a learner over random bounded data, checking the ISS bound after
/// every step. Returns the number of steps actually checked with a finite bound.
fn check_iss(learner: &str, n: usize, steps: u64, kind: NormKind, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = random_vec(&mut rng, n, 1.0);
    let mut w = random_vec(&mut rng, n, 0.1);
    let mut l: Learner = LearnerSpec::parse(learner).unwrap().build(&w).unwrap();
    let mut mon = Monitor::new(cfg(10, 1, kind)).unwrap();
    mon.init(l.state_vector(&w).norm()).unwrap();
    let mut finite = 0;
    let mut prev_ma = 0.0;
    let (mut prev_mb, mut prev_lu) = (0.0, 0.0);
    for k in 0..steps {
        let g = random_vec(&mut rng, n, 1.0);
        let y = truth.dot(&g) + rng.random_range(-0.1..=0.1);
        let o = l.step(&w, &g, y, k).unwrap();
        w = o.w_next;
        let state = l.state_vector(&w).norm();
        let r = mon.observe(&o.ss, state).unwrap();
        assert!(r.running_ma >= prev_ma && r.running_mb >= prev_mb && r.running_lu >= prev_lu);
        (prev_ma, prev_mb, prev_lu) = (r.running_ma, r.running_mb, r.running_lu);
        let iss = mon.iss_bound().unwrap();
        assert!(iss.beta_term >= 0.0 && iss.gamma_term >= 0.0);
        let total = iss.total();
        assert!(state <= total * (1.0 + 1e-9), "{learner} k={k}: {state} > {total}");
        if total.is_finite() {
            finite += 1;
        }
    }
    finite
}

#[test]
fn iss_bound_holds_for_every_learner() {
    for (spec, steps) in [
        ("gd:mu=0.2", 2000),
        ("ngd:mu=1,eps=1e-6", 2000),
        ("rls:mu=0.99,delta=100", 500),
        ("adam:mu=0.01,beta1=0.9,beta2=0.999,eps=1e-8", 200),
        ("adam:mu=0.01,beta1=0.9,beta2=0.999,eps=1e-8,mode=elementwise", 200),
    ] {
        for n in [1usize, 3] {
            check_iss(spec, n, steps, NormKind::Spectral, 17);
            check_iss(spec, n, steps.min(300), NormKind::Frobenius, 18);
        }
    }
    // spectral NGD bounds stay finite over long runs
    assert_eq!(check_iss("ngd:mu=1,eps=1e-6", 4, 5000, NormKind::Spectral, 3), 5000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn window_norm_below_product_of_norms(
        seed in any::<u64>(), n in 1usize..5, p in 1usize..8, spectral in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = if spectral { NormKind::Spectral } else { NormKind::Frobenius };
        let c = cfg(p, 1, kind);
        let mats: Vec<Matrix> = (0..p)
            .map(|_| Matrix::from_row_major(n, n, random_vec(&mut rng, n * n, 1.5).into_inner()).unwrap())
            .collect();
        let wn = window_condition(&c, &mats).unwrap();
        let prod: f64 = mats.iter().map(|m| kind.of(m).unwrap()).product();
        prop_assert!(wn <= prod * (1.0 + 1e-9) + 1e-12);
        if p == 1 {
            prop_assert_eq!(wn, kind.of(&mats[0]).unwrap());
        }
    }

    #[test]
    fn p1_window_equals_per_step_norm(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mon = Monitor::new(cfg(1, 1, NormKind::Frobenius)).unwrap();
        mon.init(0.0).unwrap();
        for _ in 0..20 {
            let a = Matrix::from_row_major(n, n, random_vec(&mut rng, n * n, 1.0).into_inner()).unwrap();
            let ss = StateSpaceStep::new(a.clone(), Matrix::identity(n), Vector::zeros(n), false, LmdStructure::General).unwrap();
            let r = mon.observe(&ss, 0.0).unwrap();
            prop_assert_eq!(r.window_norm, Some(frobenius_norm(&a).unwrap()));
            prop_assert_eq!(r.window_norm, Some(r.lmd_norm));
        }
    }

    #[test]
    fn alarm_fires_within_latency(
        p in 1usize..40, stride in 1usize..8, prefix in 0u64..60, n in 2usize..5, excess in 0.1f64..1.0,
    ) {
        let mut mon = Monitor::new(cfg(p, stride, NormKind::Frobenius)).unwrap();
        mon.init(0.0).unwrap();
        let mut dir = Vector::zeros(n);
        dir[0] = 1.0;
        // contracting prefix, then GD with η‖g‖² = 2 + excess on a fixed direction
        let ok = StateSpaceStep::new(Matrix::scaled_identity(n, 0.5), Matrix::identity(n), Vector::zeros(n), false, LmdStructure::General).unwrap();
        let c = 2.0 + excess;
        let bad_a = Matrix::identity(n).sub(&Matrix::outer(&dir, &dir).scale(c)).unwrap();
        let bad = StateSpaceStep::new(bad_a, Matrix::identity(n), Vector::zeros(n), false, LmdStructure::RankOneUpdate { coupling: c }).unwrap();
        let mut first = None;
        for k in 0..prefix + (p + stride) as u64 + 5 {
            let ss = if k < prefix { &ok } else { &bad };
            let r = mon.observe(ss, 1.0).unwrap();
            if r.alarm && first.is_none() {
                first = Some(k);
            }
        }
        let first = first.expect("alarm never fired");
        prop_assert!(first >= prefix);
        prop_assert!(first - prefix < (p + stride) as u64, "latency {}", first - prefix);
    }
}

#[test]
fn ngd_on_exciting_inputs_is_silent_and_bounded() {
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = random_vec(&mut rng, n, 1.0);
    let mut w = Vector::zeros(n);
    let mut l = LearnerSpec::parse("ngd:mu=1.5,eps=1e-6").unwrap().build(&w).unwrap();
    let mut mon = Monitor::new(cfg(50, 1, NormKind::Frobenius)).unwrap();
    mon.init(0.0).unwrap();
    let mut certified = 0;
    for k in 0..10_000u64 {
        let g = random_vec(&mut rng, n, 1.0);
        let y = truth.dot(&g) + rng.random_range(-0.5..=0.5);
        let o = l.step(&w, &g, y, k).unwrap();
        w = o.w_next;
        let r = mon.observe(&o.ss, w.norm()).unwrap();
        assert!(!r.alarm, "alarm at {k}: {:?}", r.alarm_reason);
        if let Some(b) = r.bibs_bound {
            certified += 1;
            assert!(w.norm() <= b, "k={k}: {} > {b}", w.norm());
        }
    }
    assert!(certified > 9000);
}

#[test]
fn persistent_rho_excess_alarms_per_step() {
    // stride far larger than the run: only the first window is evaluated
    let mut mon = Monitor::new(cfg(5, 100, NormKind::Frobenius)).unwrap();
    mon.init(0.0).unwrap();
    let a = Matrix::from_rows(&[vec![0.0, -1.2], vec![1.2, 0.0]]).unwrap();
    let ss = StateSpaceStep::new(a, Matrix::identity(2), Vector::zeros(2), false, LmdStructure::General).unwrap();
    let reasons: Vec<_> = (0..8).map(|_| mon.observe(&ss, 1.0).unwrap().alarm_reason).collect();
    assert!(reasons[..4].iter().all(Option::is_none));
    assert_eq!(reasons[4], Some(AlarmReason::WindowProduct));
    assert!(reasons[5..].iter().all(|r| *r == Some(AlarmReason::PerStepNorm)));
}
