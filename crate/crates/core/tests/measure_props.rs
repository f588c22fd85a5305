use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use sublevel_core::measure_lab::{
    monomial_measure_exact, slice_check, sublevel_sweep, vdc_check, Budget, Region,
};
use sublevel_core::rational::{int, rat, to_f64};
use sublevel_core::roots::UPoly;
use sublevel_core::{PuiseuxPoly, Rational};

fn fixed(cases: u32, seed: u64) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn exps() -> impl Strategy<Value = (Rational, Rational, Rational)> {
    (
        prop::sample::select(vec![int(0), rat(1, 2), int(1), int(2), int(3)]),
        prop::sample::select(vec![int(0), int(1), int(2)]),
        prop::sample::select(vec![rat(1, 2), int(1), int(2)]),
    )
}

fn catalog() -> impl Strategy<Value = PuiseuxPoly> {
    prop::sample::select(vec![
        vec![(1, 2, 1, 0), (1, 0, 1, 2)],
        vec![(1, 1, 1, 1)],
        vec![(1, 0, 1, 2), (-2, 2, 1, 1), (1, 4, 1, 0)],
        vec![(1, 2, 1, 2), (1, 5, 1, 0)],
        vec![(1, 0, 1, 2), (-1, 3, 1, 0)],
    ])
    .prop_map(|t| PuiseuxPoly::from_ints(&t))
}

proptest! {
    #![proptest_config(fixed(24, 17))]

    #[test]
    fn exact_monomial_agrees_with_mc((al, be, m) in exps(), a in 1i64..=3, k in 2i32..=5, seed in 0u64..1000) {
        prop_assume!(!(al == int(0) && be == int(0)));
        let eps = 10f64.powi(-k);
        let n = 2.0;
        let p = PuiseuxPoly::monomial(int(a), al.clone(), be.to_integer().try_into().unwrap());
        let region = Region::a_mn(&m, &rat(2, 1), 0.5);
        let ex = monomial_measure_exact(a as f64, &al, &be, &m, n, 0.5, eps).unwrap();
        let mc = sublevel_sweep(&p, &region, &[eps], "mc", &Budget { n: 50_000, grid_depth: 0 }, seed).unwrap();
        prop_assert!((mc[0].estimate - ex.value).abs() <= 3.0 * mc[0].stderr + 1e-12 * ex.value,
            "{:?} vs {:?}", mc[0], ex);
    }

    #[test]
    fn monotone_in_eps(p in catalog(), seed in 0u64..1000) {
        let mut eps = vec![1e-2, 3e-3, 1e-3, 1e-4, 1e-5, 1e-6];
        eps.sort_by(f64::total_cmp);
        let s = sublevel_sweep(&p, &Region::Disk { radius: 0.5 }, &eps, "mc", &Budget { n: 10_000, grid_depth: 0 }, seed).unwrap();
        for w in s.windows(2) {
            prop_assert!(w[0].estimate <= w[1].estimate, "{:?}", w);
        }
    }

    #[test]
    fn scaling_by_constant(p in catalog(), c in prop::sample::select(vec![rat(1, 4), int(3), int(-2)]), seed in 0u64..1000) {
        let eps = 1e-3;
        let cf = to_f64(&c).abs();
        let b = Budget { n: 10_000, grid_depth: 3 };
        let r = Region::Disk { radius: 0.5 };
        let scaled = sublevel_sweep(&p.scale(&c), &r, &[eps], "mc", &b, seed).unwrap();
        let base = sublevel_sweep(&p, &r, &[eps / cf], "mc", &b, seed).unwrap();
        prop_assert!((scaled[0].estimate - base[0].estimate).abs() <= base[0].stderr.max(1e-15));
        let scaled = sublevel_sweep(&p.scale(&c), &r, &[eps], "grid", &b, 0).unwrap();
        let base = sublevel_sweep(&p, &r, &[eps / cf], "grid", &b, 0).unwrap();
        prop_assert!((scaled[0].estimate - base[0].estimate).abs() <= 1e-9 * base[0].estimate.max(1e-12));
    }

    #[test]
    fn exact_scaling(a in 1i64..=4, (al, be, m) in exps()) {
        prop_assume!(be != int(0));
        let e = 1e-4;
        let one = monomial_measure_exact(a as f64, &al, &be, &m, 1.0, 1.0, e).unwrap();
        let two = monomial_measure_exact(2.0 * a as f64, &al, &be, &m, 1.0, 1.0, 2.0 * e).unwrap();
        prop_assert!((one.value - two.value).abs() <= 1e-14 * one.value);
    }

    /// `g = a' x^alpha y^beta + lower powers of y`, so `∂_y^beta g = a' beta! x^alpha`.
    #[test]
    fn slice_property(
        a in 1i64..=3,
        bump in 0i64..=2,
        alpha in 1i64..=3,
        beta in 1u32..=3,
        m in prop::sample::select(vec![rat(1, 2), int(1), int(2)]),
        lower in prop::collection::vec((-3i64..=3, 0i64..=4), 0..=3),
        u in 1i64..=15,
        k in 2i32..=8,
    ) {
        let mut g = PuiseuxPoly::monomial(int(a + bump), int(alpha), beta);
        for (l, (c, xa)) in lower.iter().enumerate() {
            let l = l as u32 % beta;
            g = g.add(&PuiseuxPoly::monomial(rat(*c, 4), int(*xa), l));
        }
        let eps = rat(1, 10i64.pow(k as u32));
        let r = slice_check(&g, &int(a), &int(alpha), beta, &m, &int(1), &rat(u, 16), &eps).unwrap();
        let r = r.expect("derivative bound holds by construction");
        prop_assert!(r.measured <= 4.0 * r.monomial * (1.0 + 1e-12), "{:?}", r);
    }

    #[test]
    fn vdc_random_cubics(c3 in (-8i64..=8).prop_filter("cubic", |c| *c != 0), c2 in -8i64..=8, c1 in -8i64..=8, c0 in -8i64..=8, k in -7i32..=-1) {
        let f = UPoly::new(vec![rat(c0, 4), rat(c1, 4), rat(c2, 4), rat(c3, 4)]);
        // f''' = 6 c3/4 = 3! |c3|/4 exactly
        let c = rat(c3.abs(), 4);
        let eps = Rational::new(1.into(), num_bigint::BigInt::from(10).pow((-k) as u32));
        let r = vdc_check(&f, &int(-1), &int(1), 3, &c, &eps).unwrap();
        prop_assert!(r.ok, "{:?}", r);
    }
}

#[test]
fn determinism_across_thread_counts() {
    let p = PuiseuxPoly::from_ints(&[(1, 2, 1, 2), (1, 5, 1, 0)]);
    let eps = [1e-2, 1e-4, 1e-6];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sublevel_sweep(&p, &Region::Disk { radius: 0.5 }, &eps, "mc", &Budget { n: 30_000, grid_depth: 0 }, 42).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
    let bits: Vec<u64> = one.iter().map(|s| s.estimate.to_bits()).collect();
    let again: Vec<u64> = run(3).iter().map(|s| s.estimate.to_bits()).collect();
    assert_eq!(bits, again);
}
