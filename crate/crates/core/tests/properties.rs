use nalgebra::{Matrix2, Matrix3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uge_core::cost::{trajectory_cost, CostWeights, GoalSpec};
use uge_core::planners::{select_best, shift_sequence, weighted_update, PlannerConfig};
use uge_core::uncertainty::{
    build_distribution, hellinger_sq_block, hellinger_sq_trajectory, perturb, PerturbationModel,
};
use uge_core::vehicle::{jacobian, propagate_covariance, rollout, step};
use uge_core::world::{footprint_cost, rasterize, Bounds, Circle, ObstacleSet};
use uge_core::*;

fn params() -> VehicleParams {
    VehicleParams::default()
}

fn spd3() -> impl Strategy<Value = Matrix3<f64>> {
    (prop::array::uniform9(-1.0f64..1.0), 0.05f64..1.0).prop_map(|(a, eps)| {
        let m = Matrix3::from_row_slice(&a);
        m * m.transpose() + Matrix3::identity() * eps
    })
}

fn state() -> impl Strategy<Value = State> {
    (-5.0f64..5.0, -5.0f64..5.0, -3.2f64..3.2).prop_map(|(x, y, t)| State::new(x, y, t))
}

fn control() -> impl Strategy<Value = Control> {
    (-1.0f64..1.0, -0.4f64..0.4).prop_map(|(v, d)| Control::new(v, d))
}

fn sequence(len: usize) -> impl Strategy<Value = ControlSequence> {
    prop::collection::vec(control(), len).prop_map(ControlSequence::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_matches_central_differences(s in state(), u in control()) {
        let p = params();
        let a = jacobian(s, u, &p).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut plus = s.to_vector();
            let mut minus = s.to_vector();
            plus[j] += h;
            minus[j] -= h;
            let fp = step(State::from_vector(&plus), u, &p).unwrap().to_vector();
            let fm = step(State::from_vector(&minus), u, &p).unwrap().to_vector();
            let col = (fp - fm) / (2.0 * h);
            for i in 0..3 {
                prop_assert!((a[(i, j)] - col[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn covariance_stays_symmetric_psd(s in state(), seq in sequence(80), q in spd3()) {
        let p = params();
        let states = rollout(s, &seq, &p).unwrap();
        let mut cov = q;
        for (x, u) in states.iter().zip(seq.iter()) {
            cov = propagate_covariance(&cov, &jacobian(*x, *u, &p).unwrap(), &(q * 1e-2)).unwrap();
            prop_assert_eq!(cov, cov.transpose());
            let eig = cov.symmetric_eigen().eigenvalues;
            prop_assert!(eig.iter().all(|e| *e > -1e-9));
        }
    }

    #[test]
    fn rollout_commutes_with_rigid_motion(s in state(), seq in sequence(30), dx in -3.0f64..3.0, dy in -3.0f64..3.0, rot in -3.0f64..3.0) {
        let p = params();
        let (c, sn) = (rot.cos(), rot.sin());
        let moved = |x: &State| State::new(c * x.x - sn * x.y + dx, sn * x.x + c * x.y + dy, x.theta + rot);
        let a: Vec<State> = rollout(s, &seq, &p).unwrap().iter().map(moved).collect();
        let b = rollout(moved(&s), &seq, &p).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u.x - v.x).abs() < 1e-9 && (u.y - v.y).abs() < 1e-9 && (u.theta - v.theta).abs() < 1e-9);
        }
    }

    #[test]
    fn hellinger_block_is_symmetric_and_bounded(ma in prop::array::uniform3(-2.0f64..2.0), mb in prop::array::uniform3(-2.0f64..2.0), ca in spd3(), cb in spd3()) {
        let a = GaussianBelief { mean: State::new(ma[0], ma[1], ma[2]), cov: ca };
        let b = GaussianBelief { mean: State::new(mb[0], mb[1], mb[2]), cov: cb };
        let ab = hellinger_sq_block(&a, &b).unwrap();
        let ba = hellinger_sq_block(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(hellinger_sq_block(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn trajectory_hellinger_bounded_and_zero_on_self(s1 in sequence(20), s2 in sequence(20)) {
        let p = params();
        let q = Cov3::from_diagonal(&Vector3::repeat(1e-2));
        let start = GaussianBelief { mean: State::default(), cov: q };
        let a = build_distribution(&start, &s1, &p, &q).unwrap();
        let b = build_distribution(&start, &s2, &p, &q).unwrap();
        let h = hellinger_sq_trajectory(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!((h - hellinger_sq_trajectory(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(hellinger_sq_trajectory(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn weighted_update_shift_invariant(raw in prop::collection::vec((sequence(6), 0.0f64..50.0), 2..12), shift in -1e3f64..1e3, temp in 0.1f64..10.0) {
        let nominal = ControlSequence::zeros(6);
        let (samples, costs): (Vec<_>, Vec<_>) = raw.into_iter().unzip();
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let a = weighted_update(&nominal, &samples, &costs, temp).unwrap();
        let b = weighted_update(&nominal, &samples, &shifted, temp).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            prop_assert!((u.v - v.v).abs() < 1e-9 && (u.delta - v.delta).abs() < 1e-9);
        }
    }

    #[test]
    fn cost_scales_with_weights(seq in sequence(20), scale in 0.1f64..10.0) {
        let p = params();
        let map = rasterize(&ObstacleSet { circles: vec![Circle { center: [0.5, 0.0], radius: 0.3 }], polygons: vec![] }, &Bounds::new(-3.0, -3.0, 3.0, 3.0), 0.05).unwrap();
        let goal = GoalSpec::new([1.0, 1.0], 0.1).unwrap();
        let w = CostWeights { lambda_u: 0.5, lambda_obs: 50.0, lambda_dist: 10.0, c_collided: 1e3 };
        let ws = CostWeights { lambda_u: 0.5 * scale, lambda_obs: 50.0 * scale, lambda_dist: 10.0 * scale, ..w };
        let states = rollout(State::default(), &seq, &p).unwrap();
        let fp = Footprint::default();
        let a = trajectory_cost(&states, &seq, &map, &fp, &goal, &w);
        let b = trajectory_cost(&states, &seq, &map, &fp, &goal, &ws);
        prop_assert!((a * scale - b).abs() <= 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn shift_drops_first_and_repeats_last(seq in sequence(10)) {
        let s = shift_sequence(&seq);
        prop_assert_eq!(s.len(), seq.len());
        prop_assert_eq!(&s.as_slice()[..9], &seq.as_slice()[1..]);
        prop_assert_eq!(s.as_slice()[9], seq.as_slice()[9]);
    }

    #[test]
    fn select_best_returns_first_minimum(costs in prop::collection::vec(0u8..5, 1..20)) {
        let c: Vec<f64> = costs.iter().map(|&x| x as f64).collect();
        let i = select_best(&c).unwrap();
        let min = c.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(c[i], min);
        prop_assert!(c[..i].iter().all(|&x| x > min));
    }

    #[test]
    fn disc_footprint_cost_ignores_heading(x in -2.0f64..2.0, y in -2.0f64..2.0, t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let map = rasterize(&ObstacleSet { circles: vec![Circle { center: [0.0, 0.0], radius: 0.8 }], polygons: vec![] }, &Bounds::new(-3.0, -3.0, 3.0, 3.0), 0.05).unwrap();
        let fp = Footprint::Disc { radius: 0.25 };
        prop_assert_eq!(footprint_cost(&map, &State::new(x, y, t1), &fp), footprint_cost(&map, &State::new(x, y, t2), &fp));
    }
}

#[test]
fn identity_dynamics_accumulate_process_noise() {
    let q = Matrix3::new(2e-3, 1e-4, 0.0, 1e-4, 1e-3, 5e-5, 0.0, 5e-5, 4e-4);
    let mut cov = q;
    for t in 1..=80 {
        cov = propagate_covariance(&cov, &Matrix3::identity(), &q).unwrap();
        let expect = q * (t as f64 + 1.0);
        assert!((cov - expect).abs().max() < 1e-12, "t={t}");
    }
}

#[test]
fn perturbation_moments_match_sigma() {
    let sigma = Matrix2::new(0.04, 0.01, 0.01, 0.02);
    let model = PerturbationModel::gaussian(sigma).unwrap();
    let wide = VehicleParams { v_max: 100.0, v_min: -100.0, delta_max: 1.5, ..params() };
    let nominal = ControlSequence::constant(Control::new(0.0, 0.0), 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut svv, mut sdd, mut svd, mut n) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..100 {
        for u in perturb(&nominal, &model, &wide, &mut rng).iter() {
            svv += u.v * u.v;
            sdd += u.delta * u.delta;
            svd += u.v * u.delta;
            n += 1.0;
        }
    }
    assert!((svv / n - 0.04).abs() < 2e-3);
    assert!((sdd / n - 0.02).abs() < 1e-3);
    assert!((svd / n - 0.01).abs() < 1e-3);
}

#[test]
fn lognormal_noise_has_heavier_variance() {
    let sigma = Matrix2::new(0.04, 0.0, 0.0, 0.01);
    let wide = VehicleParams { v_max: 100.0, v_min: -100.0, delta_max: 1.5, ..params() };
    let nominal = ControlSequence::zeros(1000);
    let var = |kind| {
        let model = PerturbationModel::new(sigma, kind).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = 0.0;
        for _ in 0..100 {
            s += perturb(&nominal, &model, &wide, &mut rng).iter().map(|u| u.v * u.v).sum::<f64>();
        }
        s / 1e5
    };
    let g = var(SamplerKind::Gaussian);
    let l = var(SamplerKind::NormalLogNormal { sigma_ln: 0.3 });
    // E[exp(2z)] = exp(2 s^2) for z ~ N(0, s^2).
    assert!(l > g * 1.1, "gaussian {g}, nln {l}");
    assert!((l / 0.04 - (2.0f64 * 0.09).exp()).abs() < 0.05);
}

#[test]
fn budget_accounting_matches_defaults() {
    let cfg = PlannerConfig::default();
    assert_eq!(cfg.uge_rollouts(), 16 + 16 * 8 * 8 + 1008);
    assert!(cfg.uge_rollouts() <= cfg.budget);
    let over = PlannerConfig { l: cfg.l + 100, ..cfg };
    assert!(over.validate().is_err());
}

#[test]
fn refined_raster_agrees_away_from_edges() {
    let set = ObstacleSet { circles: vec![Circle { center: [0.1, -0.3], radius: 1.0 }], polygons: vec![] };
    let b = Bounds::new(-2.0, -2.0, 2.0, 2.0);
    let coarse = rasterize(&set, &b, 0.1).unwrap();
    let fine = rasterize(&set, &b, 0.05).unwrap();
    for iy in 0..coarse.height() {
        for ix in 0..coarse.width() {
            let c = coarse.cell_center(ix, iy);
            let r = ((c[0] - 0.1).powi(2) + (c[1] + 0.3).powi(2)).sqrt();
            if (r - 1.0).abs() < 0.15 {
                continue;
            }
            let (fx, fy) = fine.cell_of(c).unwrap();
            let (a, f) = (coarse.get(ix, iy) == 255, fine.get(fx, fy) == 255);
            assert_eq!(a, f, "cell {ix},{iy} at {c:?}");
        }
    }
}
