use num_traits::Zero;
use proptest::prelude::*;

use guderley::fields::{solve, SolveOptions};
use guderley::jump_map::{jump, jump_inverse, line_image_kappa};
use guderley::phase_plane::{critical_points, z_m, Params, PhasePoint};
use guderley::polycert::{
    budan_fourier_count, certify_sign, q, sturm_chain, sturm_root_count, Interval, RationalPoly,
    Sign,
};

fn poly_strategy() -> impl Strategy<Value = RationalPoly> {
    prop::collection::vec(-12i64..=12, 2..=8).prop_filter_map("nonconstant", |c| {
        let p = RationalPoly::from_desc(&c);
        (p.degree().unwrap_or(0) > 0).then_some(p)
    })
}

fn interval_strategy() -> impl Strategy<Value = (i64, i64)> {
    (-30i64..30, 1i64..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn jump_round_trips(gamma in 1.01f64..3.0, u in 0.02f64..4.0, kappa in 0.02f64..0.98) {
        let pre = PhasePoint::new(u - 1.0, -kappa * u);
        let post = jump(gamma, pre).unwrap();
        let back = jump_inverse(gamma, post).unwrap();
        prop_assert!(back.dist(pre) <= 1e-12 * (1.0 + u));
        // the image stays on a ray through (-1, 0)
        let i = line_image_kappa(gamma, kappa).unwrap();
        prop_assert!((post.c + i * (1.0 + post.v)).abs() <= 1e-12 * (1.0 + post.v));
        // a subsonic image: the post-shock state lies beyond the sonic line
        prop_assert!(post.c.abs() > (1.0 + post.v).abs());
    }

    #[test]
    fn triple_points_solve_the_algebra(gamma in 1.01f64..3.0, m in 1u32..=2, frac in 0.01f64..1.0) {
        let z = frac * z_m(gamma);
        let p = Params::from_z(gamma, m, z).unwrap();
        let cp = critical_points(&p).unwrap();
        for t in [cp.p6, cp.p8] {
            let (v, c) = (t.v, t.c);
            let g_scale = c * c * p.g1(v).abs() + p.g2(v).abs();
            let d_scale = (1.0 + v).powi(2) + c * c;
            prop_assert!(p.g(v, c).abs() <= 1e-11 * g_scale);
            prop_assert!(p.d(v, c).abs() <= 1e-11 * d_scale);
            prop_assert_eq!(c, 1.0 + v);
            prop_assert!(c > 0.0);
        }
        prop_assert!(cp.w >= 0.0);
        prop_assert!(cp.p6.v <= cp.p8.v);
    }

    #[test]
    fn sturm_never_exceeds_budan_fourier(p in poly_strategy(), (lo, len) in interval_strategy()) {
        let (a, b) = (q(lo, 4), q(lo + len, 4));
        prop_assume!(!p.eval(&a).is_zero() && !p.eval(&b).is_zero());
        let s = sturm_root_count(&p, &a, &b).unwrap();
        let bf = budan_fourier_count(&p, &a, &b).unwrap();
        prop_assert!(s <= bf.bound);
        let squarefree = sturm_chain(&p).last().and_then(|g| g.degree()) == Some(0);
        if squarefree {
            prop_assert_eq!(s % 2, bf.parity);
        }
    }

    #[test]
    fn certified_sign_agrees_with_sampling(p in poly_strategy(), (lo, len) in interval_strategy()) {
        let (a, b) = (q(lo, 4), q(lo + len, 4));
        let iv = Interval::closed(a.clone(), b.clone());
        let pos = certify_sign(&p, &iv, Sign::Positive).unwrap();
        let neg = certify_sign(&p, &iv, Sign::Negative).unwrap();
        prop_assert!(!(pos.holds && neg.holds));
        let (fa, fb) = (lo as f64 / 4.0, (lo + len) as f64 / 4.0);
        for k in 0..=16 {
            let x = fa + (fb - fa) * k as f64 / 16.0;
            let y = p.eval_f64(x);
            if pos.holds { prop_assert!(y > 0.0); }
            if neg.holds { prop_assert!(y < 0.0); }
        }
    }

    #[test]
    fn div_rem_reconstructs(n in poly_strategy(), d in poly_strategy()) {
        let (quo, rem) = n.div_rem(&d);
        prop_assert_eq!(&(&quo * &d) + &rem, n);
        prop_assert!(rem.is_zero() || rem.degree() < d.degree());
    }
}

#[test]
fn branch_interpolant_hits_knots_and_is_smooth() {
    let sol = solve(1.4, 2, &SolveOptions::default()).unwrap();
    for br in [&sol.collapse, &sol.extension, &sol.downstream] {
        for k in &br.knots {
            let [v, c, lr] = br.eval(k[0]);
            assert!((v - k[1]).abs() <= 1e-14 * (1.0 + k[1].abs()));
            assert!((c - k[2]).abs() <= 1e-14 * (1.0 + k[2].abs()));
            assert!((lr - k[3]).abs() <= 1e-14 * (1.0 + k[3].abs()));
        }
        // no interval jumps between knots: midpoints sit near the chord
        for w in br.knots.windows(2) {
            let mid = br.eval(0.5 * (w[0][0] + w[1][0]));
            for j in 0..3 {
                let span = (w[1][j + 1] - w[0][j + 1]).abs();
                let lo = w[0][j + 1].min(w[1][j + 1]) - span - 1e-9;
                let hi = w[0][j + 1].max(w[1][j + 1]) + span + 1e-9;
                assert!(mid[j] >= lo && mid[j] <= hi, "{:?} at {:?}", br.id, w);
            }
        }
    }
}
