use cat0_vip::diagnostics::{asymptotic_center_estimate, chain_audit, fejer_audit, TailWindow};
use cat0_vip::geometry::{
    cat0_defect, combine, dist, multi_combine, quasi_inner, Point, SpaceModel, Weights,
};
use cat0_vip::multimap::{
    hausdorff, nearest_selection, projected_multimap, ratio_on_pairs, sample_pairs,
};
use cat0_vip::{
    modified_step, picard_s_step, solve_vip, ConvexSet, FinitePointSet, MapDescriptor, MultiMap,
    Schedule, SystemProblem, SystemSchedule, VipProblem,
};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn space() -> impl Strategy<Value = SpaceModel> {
    prop_oneof![
        (1usize..=8).prop_map(|dim| SpaceModel::Euclidean { dim }),
        (1usize..=4).prop_map(|dim| SpaceModel::Hyperboloid { dim }),
        (2usize..=6).prop_map(|branch_count| SpaceModel::StarTree { branch_count }),
    ]
}

fn point_in(space: &SpaceModel, scale: f64) -> BoxedStrategy<Point> {
    match *space {
        SpaceModel::Euclidean { dim } => prop::collection::vec(-scale..scale, dim)
            .prop_map(Point::euclidean)
            .boxed(),
        SpaceModel::Hyperboloid { dim } => prop::collection::vec(-scale..scale, dim)
            .prop_map(|s| Point::hyperboloid_from_spatial(&s))
            .boxed(),
        SpaceModel::StarTree { branch_count } => prop_oneof![
            1 => Just(Point::tree_origin()),
            9 => (0..branch_count, 0.0..scale).prop_map(|(b, r)| Point::tree(b, r)),
        ]
        .boxed(),
    }
}

fn points(n: usize) -> impl Strategy<Value = (SpaceModel, Vec<Point>)> {
    space().prop_flat_map(move |s| {
        let pts = prop::collection::vec(point_in(&s, 2.0), n);
        (Just(s), pts)
    })
}

/// A closed-form set of `space`.
fn set_in(space: &SpaceModel) -> BoxedStrategy<ConvexSet> {
    let ball = (point_in(space, 1.0), 0.1f64..2.0).prop_map(|(c, r)| ConvexSet::ball(c, r));
    match *space {
        SpaceModel::Euclidean { dim } => prop_oneof![
            ball,
            (prop::collection::vec(-1.0f64..1.0, dim), -1.0f64..1.0)
                .prop_filter("nonzero normal", |(n, _)| n
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    > 1e-3)
                .prop_map(|(n, b)| ConvexSet::half_space(n, b)),
        ]
        .boxed(),
        SpaceModel::Hyperboloid { .. } => ball.boxed(),
        SpaceModel::StarTree { branch_count } => prop_oneof![
            ball,
            (
                prop::collection::btree_set(0..branch_count, 1..=branch_count),
                prop::option::of(0.2f64..3.0)
            )
                .prop_map(|(b, cap)| ConvexSet::sub_tree(b.into_iter().collect::<Vec<_>>(), cap)),
        ]
        .boxed(),
    }
}

fn set_and_points(n: usize) -> impl Strategy<Value = (SpaceModel, ConvexSet, Vec<Point>)> {
    space().prop_flat_map(move |s| {
        let k = set_in(&s);
        let pts = prop::collection::vec(point_in(&s, 3.0), n);
        (Just(s), k, pts)
    })
}

fn weights(n: usize) -> impl Strategy<Value = Weights> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let head: f64 = w[1..].iter().sum();
        w[0] = 1.0 - head;
        Weights::new(w).expect("normalized")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn distance_is_symmetric_and_definite((_, p) in points(2)) {
        let ab = dist(&p[0], &p[1]).unwrap();
        let ba = dist(&p[1], &p[0]).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= TOL);
        prop_assert_eq!(dist(&p[0], &p[0]).unwrap(), 0.0);
        if p[0] != p[1] {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn combination_lies_on_the_geodesic((_, p) in points(2), t in 0.0f64..=1.0) {
        let d = dist(&p[0], &p[1]).unwrap();
        let m = combine(&p[0], &p[1], t).unwrap();
        prop_assert!((dist(&p[0], &m).unwrap() - t * d).abs() <= TOL * (1.0 + d));
        prop_assert!((dist(&p[1], &m).unwrap() - (1.0 - t) * d).abs() <= TOL * (1.0 + d));
    }

    #[test]
    fn metric_is_convex((_, p) in points(3), t in 0.0f64..=1.0) {
        let m = combine(&p[0], &p[1], t).unwrap();
        let lhs = dist(&m, &p[2]).unwrap();
        let rhs = (1.0 - t) * dist(&p[0], &p[2]).unwrap() + t * dist(&p[1], &p[2]).unwrap();
        prop_assert!(lhs <= rhs + TOL);
    }

    #[test]
    fn cn_inequality((s, p) in points(3), t in 0.0f64..=1.0) {
        let defect = cat0_defect(&p[0], &p[1], &p[2], t).unwrap();
        prop_assert!(defect <= TOL, "defect {}", defect);
        if matches!(s, SpaceModel::Euclidean { .. }) {
            prop_assert!(defect.abs() <= 1e-12 * 64.0);
        }
    }

    #[test]
    fn quasi_linearization((_, p) in points(5)) {
        let [a, b, c, d, e] = [&p[0], &p[1], &p[2], &p[3], &p[4]];
        let q = |w: &Point, x: &Point, y: &Point, z: &Point| quasi_inner(w, x, y, z).unwrap();
        let dab = dist(a, b).unwrap();
        let dcd = dist(c, d).unwrap();
        let scale = 1.0 + dab * dab + dcd * dcd + dist(a, e).unwrap().powi(2) + dist(e, b).unwrap().powi(2);
        prop_assert!((q(a, b, a, b) - dab * dab).abs() <= TOL * scale);
        prop_assert!((q(a, b, c, d) + q(b, a, c, d)).abs() <= TOL * scale);
        prop_assert!((q(a, b, c, d) - q(a, e, c, d) - q(e, b, c, d)).abs() <= TOL * scale);
        prop_assert!(q(a, b, c, d).abs() <= dab * dcd + TOL * scale);
    }

    #[test]
    fn one_hot_multi_combine_is_exact((_, p) in points(5), i in 0usize..5) {
        let mut w = vec![0.0; 5];
        w[i] = 1.0;
        prop_assert_eq!(multi_combine(&p, &Weights::new(w).unwrap()).unwrap(), p[i].clone());
    }

    #[test]
    fn multi_combine_is_within_weighted_distances((_, p) in points(6), w in weights(5)) {
        let z = &p[5];
        let c = multi_combine(&p[..5], &w).unwrap();
        let bound: f64 = p[..5].iter().zip(w.values()).map(|(x, l)| l * dist(x, z).unwrap()).sum();
        prop_assert!(dist(&c, z).unwrap() <= bound + TOL);
    }

    #[test]
    fn projection_is_nonexpansive_and_idempotent((_, k, p) in set_and_points(2)) {
        let px = k.project(&p[0]).unwrap();
        let py = k.project(&p[1]).unwrap();
        prop_assert!(k.contains(&px, 1e-9).unwrap());
        prop_assert!(dist(&px, &py).unwrap() <= dist(&p[0], &p[1]).unwrap() + TOL);
        prop_assert!(dist(&k.project(&px).unwrap(), &px).unwrap() <= TOL);
    }

    #[test]
    fn sets_are_geodesically_convex((_, k, p) in set_and_points(2), t in 0.0f64..=1.0) {
        let x = k.project(&p[0]).unwrap();
        let y = k.project(&p[1]).unwrap();
        prop_assert!(k.contains(&combine(&x, &y, t).unwrap(), 1e-9).unwrap());
    }

    #[test]
    fn hausdorff_is_a_metric((s, p) in points(9)) {
        let _ = s;
        let a = FinitePointSet::new(p[0..3].to_vec()).unwrap();
        let b = FinitePointSet::new(p[3..6].to_vec()).unwrap();
        let c = FinitePointSet::new(p[6..9].to_vec()).unwrap();
        let ab = hausdorff(&a, &b).unwrap();
        prop_assert!((ab - hausdorff(&b, &a).unwrap()).abs() <= TOL);
        prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        prop_assert!(ab <= hausdorff(&a, &c).unwrap() + hausdorff(&c, &b).unwrap() + TOL);
    }

    #[test]
    fn nearest_selection_is_nearest((_, p) in points(5)) {
        let t = MultiMap::constant(p[1..].to_vec()).unwrap();
        let u = nearest_selection(&t, &p[0]).unwrap();
        let du = dist(&p[0], &u).unwrap();
        for v in t.evaluate(&p[0]).unwrap().points() {
            prop_assert!(du <= dist(&p[0], v).unwrap());
        }
    }

    #[test]
    fn projection_never_worsens_lipschitz_estimate(
        (_, k, p) in set_and_points(2),
        f1 in 0.1f64..=1.0,
        f2 in 0.1f64..=1.0,
        seed in 0u64..1000,
    ) {
        // Tree balls need the space to sample; subtrees and other models do not.
        prop_assume!(!matches!((&k, &p[0]), (ConvexSet::Ball { .. }, Point::StarTree { .. })));
        let t = MultiMap::union(vec![
            MapDescriptor::contraction(p[0].clone(), f1),
            MapDescriptor::contraction(p[1].clone(), f2),
        ]);
        let pairs = sample_pairs(&k, 64, seed).unwrap();
        let raw = ratio_on_pairs(&t, &pairs).unwrap();
        let projected = ratio_on_pairs(&projected_multimap(&k, &t).unwrap(), &pairs).unwrap();
        prop_assert!(raw <= 1.0 + 1e-7);
        prop_assert!(projected <= raw + TOL);
    }
}

fn contraction_problem(
    ax: f64,
    ay: f64,
    factor: f64,
    x0: (f64, f64),
    a: f64,
    b: f64,
) -> VipProblem {
    let set = ConvexSet::ball(Point::euclidean([0.0, 0.0]), 1.5);
    let anchor = set.project(&Point::euclidean([ax, ay])).unwrap();
    VipProblem {
        space: SpaceModel::Euclidean { dim: 2 },
        map: MultiMap::union(vec![MapDescriptor::contraction(anchor.clone(), factor)]),
        x0: set.project(&Point::euclidean([x0.0, x0.1])).unwrap(),
        set,
        schedule: Schedule::constant(a, b),
        max_iter: 200,
        min_iter: 0,
        tol_fp: 1e-10,
        tol_res: 1e-6,
        sample_size: 64,
        seed: 5,
        fixed_points: vec![anchor],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn runs_are_fejer_monotone(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, factor in 0.1f64..0.95,
        x0 in (-3.0f64..3.0, -3.0f64..3.0), a in 0.0f64..=1.0, b in 0.1f64..=0.9,
    ) {
        let p = contraction_problem(ax, ay, factor, x0, a, b);
        let (sol, trace) = solve_vip(&p).unwrap();
        prop_assert!(fejer_audit(&trace, &p.fixed_points[0]).unwrap() <= TOL);
        prop_assert!(chain_audit(&trace, 0) <= TOL);
        prop_assert!(sol.converged && sol.certified);
    }

    #[test]
    fn single_map_system_step_is_bitwise_identical(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, factor in 0.1f64..0.95,
        x0 in (-3.0f64..3.0, -3.0f64..3.0), a in 0.0f64..=1.0, b in 0.1f64..=0.9, n in 0usize..10,
    ) {
        let p = contraction_problem(ax, ay, factor, x0, a, b);
        let sys = SystemProblem {
            space: p.space,
            sets: vec![p.set.clone()],
            maps: vec![p.map.clone()],
            x0: p.x0.clone(),
            schedule: Some(SystemSchedule::matching_single(a, b)),
            max_iter: p.max_iter,
            min_iter: 0,
            tol_fp: p.tol_fp,
            tol_res: p.tol_res,
            sample_size: p.sample_size,
            seed: p.seed,
            fixed_points: p.fixed_points.clone(),
        };
        let (x1, r1) = picard_s_step(&p, &p.x0, n).unwrap();
        let (x2, r2) = modified_step(&sys, &sys.x0, n).unwrap();
        prop_assert_eq!(x1, x2);
        prop_assert_eq!(r1.d_x_tx.to_bits(), r2.d_x_tx.to_bits());
        prop_assert_eq!(r1.step_displacement.to_bits(), r2.step_displacement.to_bits());
        prop_assert_eq!(r1.d_y_p, r2.d_y_p);
    }

    #[test]
    fn center_radius_is_value_at_center((_, p) in points(7)) {
        let s = match &p[0] {
            Point::Euclidean(c) => SpaceModel::Euclidean { dim: c.len() },
            Point::Hyperboloid(c) => SpaceModel::Hyperboloid { dim: c.len() - 1 },
            Point::StarTree { .. } => SpaceModel::StarTree { branch_count: 6 },
        };
        let (c, r) = asymptotic_center_estimate(&s, &p, TailWindow { start: 0, end: p.len() }).unwrap();
        let f = p.iter().map(|x| dist(&c, x).unwrap()).fold(0.0, f64::max);
        prop_assert_eq!(r, f);
        // The starting point bounds the best value found.
        let start = p.iter().map(|x| dist(&p[6], x).unwrap()).fold(0.0, f64::max);
        prop_assert!(r <= start);
    }
}
