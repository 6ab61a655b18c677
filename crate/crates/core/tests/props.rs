//! Property tests for structural invariants.

use proptest::prelude::*;
use spawnsim_core::data::{build_dataset, parse_frame_table, split_endpoints, Trajectory};
use spawnsim_core::metrics::ks_distance;
use spawnsim_core::policy::{scripted_step, Observation};
use spawnsim_core::tpp::{make_windows, NtppModel, SpawnSequence};
use spawnsim_core::Vec2;

fn arb_dataset() -> impl Strategy<Value = Vec<Trajectory>> {
    prop::collection::vec((0u64..50, prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..12)), 1..8)
        .prop_map(|raw| {
            raw.into_iter()
                .enumerate()
                .map(|(i, (start, pts))| Trajectory {
                    agent_id: i as u64,
                    start_frame: start,
                    positions: pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect(),
                })
                .collect()
        })
}

proptest! {
    /// Permuting trajectories permutes endpoints identically.
    #[test]
    fn split_endpoints_is_a_pure_projection(trajs in arb_dataset(), seed in 0u64..1000) {
        let ds = build_dataset(trajs.clone()).unwrap();
        let (s, e) = split_endpoints(&ds);
        prop_assert_eq!(s.len(), ds.trajectories.len());
        prop_assert_eq!(e.len(), ds.trajectories.len());

        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..trajs.len()).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<Trajectory> = perm.iter().map(|&i| trajs[i].clone()).collect();
        let ds2 = build_dataset(permuted).unwrap();
        let (s2, e2) = split_endpoints(&ds2);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(s2[k], s[i]);
            prop_assert_eq!(e2[k], e[i]);
        }
    }

    /// Serialize + reload reproduces every coordinate bit.
    #[test]
    fn frame_table_round_trip(trajs in arb_dataset()) {
        let ds = build_dataset(trajs).unwrap();
        let re = parse_frame_table(&ds.to_frame_table()).unwrap();
        // reload groups by agent id; compare per agent
        prop_assert_eq!(ds.trajectories.len(), re.trajectories.len());
        let mut orig: Vec<_> = ds.trajectories.iter().collect();
        orig.sort_by_key(|t| t.agent_id);
        for (a, b) in orig.iter().zip(&re.trajectories) {
            prop_assert_eq!(a.agent_id, b.agent_id);
            prop_assert_eq!(a.start_frame, b.start_frame);
            prop_assert_eq!(a.positions.len(), b.positions.len());
            for (p, q) in a.positions.iter().zip(&b.positions) {
                prop_assert_eq!(p.x.to_bits(), q.x.to_bits());
                prop_assert_eq!(p.y.to_bits(), q.y.to_bits());
            }
        }
    }

    /// Window bookkeeping: expected count, all relative events in (0, w],
    /// strictly positive gaps.
    #[test]
    fn window_invariants(
        raw_times in prop::collection::vec(0.0f64..500.0, 0..60),
        w in 10.0f64..120.0,
        o_frac in 0.0f64..0.9,
    ) {
        let o = (w * o_frac).floor();
        let seq = SpawnSequence::new(0, raw_times, 500.0);
        let windows = make_windows(&seq, w, o).unwrap();
        let stride = w - o;
        let expect = ((500.0f64.max(seq.horizon) - w) / stride + 1e-9).floor() as usize + 1;
        prop_assert_eq!(windows.len(), expect);
        for win in &windows {
            let (deltas, tail) = win.deltas();
            prop_assert!(tail >= 0.0);
            for &e in &win.events {
                prop_assert!(e > 0.0 && e <= win.len);
            }
            for d in deltas {
                prop_assert!(d > 0.0);
            }
        }
    }

    /// Rollout samplers produce strictly increasing times below the horizon.
    #[test]
    fn rollouts_are_monotone(
        shape in 0.4f64..2.5,
        scale in 0.5f64..30.0,
        n_rollouts in 1usize..5,
        seed in 0u64..500,
    ) {
        let model = NtppModel::with_constant_head(0, shape, scale, 100.0);
        let seq = model.sample_rollout(300.0, n_rollouts, seed).unwrap();
        prop_assert!(seq.times.windows(2).all(|p| p[0] < p[1]));
        prop_assert!(seq.times.iter().all(|&t| t > 0.0 && t < 300.0));
    }

    /// KS distance is symmetric and within [0, 1].
    #[test]
    fn ks_symmetric_and_bounded(
        a in prop::collection::vec(-100.0f64..100.0, 1..80),
        b in prop::collection::vec(-100.0f64..100.0, 1..80),
    ) {
        let d1 = ks_distance(&a, &b).unwrap();
        let d2 = ks_distance(&b, &a).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&d1));
    }

    /// Scripted policy reaches any unobstructed goal within
    /// ceil(distance / v_max) + 2 frames, never exceeding v_max per step.
    #[test]
    fn scripted_terminates_within_bound(
        gx in -40.0f64..40.0,
        gy in -40.0f64..40.0,
        v_max in 0.2f64..2.5,
    ) {
        let goal = Vec2::new(gx, gy);
        let mut pos = Vec2::ZERO;
        let mut vel = Vec2::ZERO;
        let bound = (goal.norm() / v_max).ceil() as usize + 2;
        let mut hit = false;
        for _ in 0..=bound {
            if pos.dist(goal) < 1e-9 {
                hit = true;
                break;
            }
            let a = scripted_step(&Observation::new(goal - pos, vel), v_max);
            prop_assert!(a.norm() <= v_max + 1e-12);
            pos += a;
            vel = a;
        }
        prop_assert!(hit, "goal not reached within {} frames", bound);
    }
}
