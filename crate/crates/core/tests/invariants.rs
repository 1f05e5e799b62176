use ergopoint::actions::MeasurePreservingMap;
use ergopoint::bits::BitString;
use ergopoint::convolution::{convolve, gcont_bound_check, GridFunction, Mollifier};
use ergopoint::counterexample::WeightSequence;
use ergopoint::measure::{ExtendedMass, IntensityMeasure};
use ergopoint::orders::{back_and_forth, permute_order, sample_uniform_order, OracleKind, OrderOracle};
use ergopoint::perm::Permutation;
use ergopoint::point::Point;
use ergopoint::ppp::{sample_finite, PointConfiguration};
use ergopoint::rng::stream;
use ergopoint::stats::{pool_poisson, poisson_gof};
use ergopoint::whirly::{d_lambda, swap_witness, weak_distance, CellAlgebra, CellMap, CellSet};
use ergopoint::window::Window;
use proptest::prelude::*;

fn grid(k: i64, denom: i64) -> f64 {
    k as f64 / denom as f64
}

fn line_map() -> impl Strategy<Value = MeasurePreservingMap> {
    prop_oneof![
        (-4000i64..4000).prop_map(|k| MeasurePreservingMap::translation(grid(k, 64)).unwrap()),
        ((-160i64..160), (1i64..64)).prop_map(|(q, r)| MeasurePreservingMap::interval_swap(grid(q, 16), grid(r, 16)).unwrap()),
    ]
}

fn line_map_or_composite() -> impl Strategy<Value = MeasurePreservingMap> {
    prop_oneof![
        line_map(),
        prop::collection::vec(line_map(), 0..4).prop_map(|ms| MeasurePreservingMap::compose(ms).unwrap()),
    ]
}

fn window() -> impl Strategy<Value = Window> {
    ((-800i64..800), (1i64..400)).prop_map(|(a, len)| Window::interval(grid(a, 32), grid(a + len, 32)).unwrap())
}

proptest! {
    #[test]
    fn line_maps_are_invertible(g in line_map_or_composite(), x in -500_000i64..500_000) {
        let p = Point::real(grid(x, 1024)).unwrap();
        let back = g.inverse().apply(&g.apply(&p).unwrap()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn line_preimages_preserve_mass_and_membership(g in line_map_or_composite(), w in window(), x in -50_000i64..50_000) {
        let m = IntensityMeasure::uniform_line(1.0).unwrap();
        let pre = g.preimage_window(&w).unwrap();
        prop_assert_eq!(m.measure_of(&pre).unwrap(), m.measure_of(&w).unwrap());
        let p = Point::real(grid(x, 128)).unwrap();
        prop_assert_eq!(pre.contains_point(&p), w.contains_point(&g.apply(&p).unwrap()));
    }

    #[test]
    fn rotations_preserve_circle_mass(t in 0i64..256, a in 0i64..255, len in 1i64..256) {
        let g = MeasurePreservingMap::rotation(grid(t, 256)).unwrap();
        let w = Window::interval(grid(a, 256), grid((a + len).min(256), 256)).unwrap();
        let m = IntensityMeasure::circle(3.0).unwrap();
        prop_assert_eq!(m.measure_of(&g.preimage_window(&w).unwrap()).unwrap(), m.measure_of(&w).unwrap());
    }

    #[test]
    fn permutations_preserve_bernoulli_mass(seed in any::<u64>(), prefix in "[01]{0,6}", p in 0.05f64..0.95) {
        let sigma = Permutation::random(6, &mut stream(seed, 0));
        let g = MeasurePreservingMap::permutation(sigma);
        let w = Window::cylinder(&prefix).unwrap();
        let m = IntensityMeasure::bernoulli(p).unwrap();
        let (ExtendedMass::Finite(a), ExtendedMass::Finite(b)) =
            (m.measure_of(&g.preimage_window(&w).unwrap()).unwrap(), m.measure_of(&w).unwrap())
        else {
            panic!("finite measure")
        };
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn counts_add_over_disjoint_pieces(seed in any::<u64>(), cut in 1i64..32) {
        let m = IntensityMeasure::uniform_line(20.0).unwrap();
        let w = Window::interval(0.0, 1.0).unwrap();
        let f = sample_finite(&m, &w, &mut stream(seed, 0)).unwrap();
        let left = Window::interval(0.0, grid(cut, 32)).unwrap();
        let right = Window::interval(grid(cut, 32), 1.0).unwrap();
        prop_assert_eq!(f.count_in(&left).unwrap() + f.count_in(&right).unwrap(), f.len());
        let back = PointConfiguration::from_text(&f.to_text()).unwrap();
        prop_assert_eq!(back.points.len(), f.points.len());
        for (a, b) in back.points.iter().zip(&f.points) {
            prop_assert!(a.same_point(b));
        }
    }

    #[test]
    fn pooled_cells_keep_totals(counts in prop::collection::vec(0u64..12, 40..400), lambda in 0.5f64..6.0) {
        let cells = pool_poisson(&counts, lambda).unwrap();
        let observed: u64 = cells.iter().map(|c| c.observed).sum();
        let expected: f64 = cells.iter().map(|c| c.expected).sum();
        prop_assert_eq!(observed, counts.len() as u64);
        prop_assert!((expected - counts.len() as f64).abs() < 1e-6 * counts.len() as f64);
        prop_assert!(cells.len() < 2 || cells.iter().all(|c| c.expected >= 5.0));
        if let Ok(r) = poisson_gof(&counts, lambda, 0.001) {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert_eq!(r.pass, r.p_value >= r.alpha);
        }
    }

    #[test]
    fn mollification_bounds(seed in any::<u64>(), eps_k in 4i64..256, h_k in 1i64..512, c in -3.0f64..3.0) {
        let n = 1024;
        let mut rng = stream(seed, 0);
        let f = GridFunction::random_step(n, 6, &mut rng).unwrap();
        let delta = Mollifier::new(grid(eps_k, 1024)).unwrap();
        let smooth = convolve(&delta, &f).unwrap();
        prop_assert!(smooth.l1_norm() <= f.l1_norm() + 1e-8);
        prop_assert!(gcont_bound_check(&delta, &f, &[grid(h_k, 1024)]).unwrap().pass);
        let k = GridFunction::constant(n, c).unwrap();
        prop_assert!(convolve(&delta, &k).unwrap().combine(1.0, &k, -1.0).unwrap().sup_norm() <= 1e-10);
    }

    #[test]
    fn permuting_orders_is_an_action(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = stream(seed, 0);
        let ord = sample_uniform_order(n, &mut rng);
        let sigma = Permutation::random(n, &mut rng);
        let tau = Permutation::random(n, &mut rng);
        let step = permute_order(&sigma, &permute_order(&tau, &ord).unwrap()).unwrap();
        prop_assert_eq!(step, permute_order(&sigma.compose(&tau), &ord).unwrap());
        prop_assert_eq!(permute_order(&Permutation::identity(), &ord).unwrap(), ord);
    }

    #[test]
    fn back_and_forth_is_order_preserving(seed in any::<u64>(), ka in 0usize..3, kb in 0usize..3) {
        let kind = |k: usize, s: u64| match k {
            0 => OracleKind::Rationals,
            1 => OracleKind::Dyadics,
            _ => OracleKind::RandomDense { seed: s },
        };
        let mut a = OrderOracle::new(kind(ka, seed));
        let mut b = OrderOracle::new(kind(kb, seed.wrapping_add(1)));
        let iso = back_and_forth(&mut a, &mut b, 60).unwrap();
        prop_assert_eq!(iso.len(), 60);
        prop_assert!(iso.is_valid());
        prop_assert!(iso.covers_first(30));
    }

    #[test]
    fn cylinder_terms_split_over_children(n in 0usize..200, prefix in "[01]{0,8}") {
        let w = WeightSequence::shipped();
        let p: BitString = prefix.parse().unwrap();
        let split = w.mu_n_cylinder(n, &p.child(false)) + w.mu_n_cylinder(n, &p.child(true));
        prop_assert!((split - w.mu_n_cylinder(n, &p)).abs() < 1e-15);
    }

    #[test]
    fn divergence_witnesses_exceed_their_bound(prefix in "[01]{0,4}", bound in 0.1f64..2000.0) {
        let w = WeightSequence::shipped();
        let p: BitString = prefix.parse().unwrap();
        let witness = w.divergence_witness(&p, bound).unwrap();
        prop_assert!(witness.partial_sum > bound);
    }

    #[test]
    fn d_lambda_triangle(a in any::<u8>(), b in any::<u8>(), c in any::<u8>()) {
        let set = |m: u8| CellSet::from_hex(3, &format!("{m:02x}")).unwrap();
        let (a, b, c) = (set(a), set(b), set(c));
        prop_assert!(d_lambda(&a, &c).unwrap() <= d_lambda(&a, &b).unwrap() + d_lambda(&b, &c).unwrap());
    }

    #[test]
    fn cell_maps_preserve_mass(seed in any::<u64>(), depth in 0u32..7, mask in any::<u64>()) {
        let alg = CellAlgebra::new(depth).unwrap();
        let images = Permutation::random(alg.cells(), &mut stream(seed, 0)).images(alg.cells()).unwrap();
        let t = CellMap::new(images).unwrap();
        let mut a = alg.empty();
        for i in (0..alg.cells()).filter(|i| mask >> i & 1 == 1) {
            a.insert(i);
        }
        prop_assert_eq!(t.apply(&a).unwrap().mass(), a.mass());
        prop_assert_eq!(t.inverse().apply(&t.apply(&a).unwrap()).unwrap(), a);
    }

    #[test]
    fn swap_witnesses_are_whirly(depth in 2u32..9, seed in any::<u64>(), u in 0.0f64..1.0) {
        use rand::Rng;
        let alg = CellAlgebra::new(depth).unwrap();
        let mut rng = stream(seed, 0);
        let mut pick = || {
            let mut s = alg.empty();
            while s.is_empty() {
                for i in 0..alg.cells() {
                    if rng.random::<f64>() < 0.3 {
                        s.insert(i);
                    }
                }
            }
            s
        };
        let (a, b) = (pick(), pick());
        let b = if u < 0.5 && a.difference(&b).unwrap() != a { b.difference(&a).unwrap() } else { b };
        prop_assume!(!b.is_empty());
        let bound = 2.0 * alg.cell_mass();
        let eps = bound + (1.0 - bound) * u + 1e-12;
        let s = swap_witness(&a, &b, eps).unwrap();
        prop_assert!(a.intersection(&s.apply(&b).unwrap()).unwrap().mass() > 0.0);
        prop_assert!(weak_distance(&s, &alg.dyadic_family()).unwrap() < eps);
    }
}

#[test]
fn d_lambda_is_a_metric_at_depth_three() {
    let sets: Vec<CellSet> = (0..=255u8).map(|m| CellSet::from_hex(3, &format!("{m:02x}")).unwrap()).collect();
    for a in &sets {
        for b in &sets {
            let d = d_lambda(a, b).unwrap();
            assert_eq!(d, d_lambda(b, a).unwrap());
            assert_eq!(d == 0.0, a == b);
        }
    }
    for a in sets.iter().step_by(5) {
        for b in sets.iter().step_by(3) {
            for c in sets.iter().step_by(7) {
                assert!(d_lambda(a, c).unwrap() <= d_lambda(a, b).unwrap() + d_lambda(b, c).unwrap());
            }
        }
    }
}
