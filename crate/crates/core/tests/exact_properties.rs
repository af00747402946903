use proptest::prelude::*;
use rdlab_core::exact::*;
use rdlab_core::model::{total_rate_bound, LocalRate};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generator_rows_sum_to_zero_and_law_is_positive(n in 3usize..=9, gamma in 0.0f64..0.95) {
        let gen = build_generator(n, &LocalRate::example_2_1(gamma).unwrap()).unwrap();
        prop_assert!(gen.max_row_sum() < 1e-10);
        let mu = stationary_distribution(&gen, StationaryMethod::Auto).unwrap();
        prop_assert!(mu.iter().all(|&p| p > 0.0));
        prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_gamma_law_is_symmetric() {
    let n = 8;
    let full = (1usize << n) - 1;
    let gen = build_generator(n, &LocalRate::example_2_1(0.0).unwrap()).unwrap();
    let mu = stationary_distribution(&gen, StationaryMethod::Auto).unwrap();
    let mirror = |s: usize| (0..n).fold(0usize, |m, x| m | (((s >> x) & 1) << ((n - x) % n)));
    for s in 0..=full {
        assert!((mu[s] - mu[s ^ full]).abs() < 1e-14);
        assert!((mu[s] - mu[mirror(s)]).abs() < 1e-14);
    }
}

/// Sets `{density >= theta}` shrink as `theta` grows; their mass and the
/// entrance rate are tabulated, and the mass must decrease.
#[test]
fn shrinking_sets_table() {
    let n = 10;
    let rate = LocalRate::example_2_1(0.25).unwrap();
    let gen = build_generator(n, &rate).unwrap();
    let mu = stationary_distribution(&gen, StationaryMethod::Auto).unwrap();
    let bound = total_rate_bound(n, &rate);
    let mut last = f64::INFINITY;
    println!("theta  mu(A)  r(A^c, A)");
    for k in 6..=10 {
        let theta = k as f64 / 10.0;
        let set = StateSet::density_window(n, theta, 1.0).unwrap();
        let r = rate_into_set(&gen, &mu, &set).unwrap();
        println!("{theta:.1}  {:.3e}  {:.3e}", r.mass, r.rate);
        assert!(r.mass < last);
        assert!(r.rate <= bound);
        last = r.mass;
    }
}

/// The same hitting problem solved directly and from the defining equations.
#[test]
fn hitting_times_satisfy_their_equations() {
    let n = 9;
    let gen = build_generator(n, &LocalRate::example_2_1(0.6).unwrap()).unwrap();
    let target = StateSet::density_window(n, 0.0, 0.2).unwrap();
    let e = mean_hitting_exact(&gen, &target).unwrap();
    for s in 0..gen.states() {
        if target.contains(s) {
            assert_eq!(e[s], 0.0);
            continue;
        }
        let qe: f64 = gen.diag(s) * e[s] + gen.row(s).map(|(t, v)| v * e[t]).sum::<f64>();
        assert!((qe + 1.0).abs() < 1e-8 * e[s].max(1.0));
    }
}
