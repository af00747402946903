use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdlab_core::hydro::*;
use rdlab_core::model::{reaction_polynomials, LocalRate, ReactionPolynomials};
use std::f64::consts::PI;

fn poly(g: f64) -> ReactionPolynomials {
    reaction_polynomials(&LocalRate::example_2_1(g).unwrap())
}

/// A smooth random profile in `[0.05, 0.95]` from three Fourier modes.
fn random_slice(rng: &mut ChaCha8Rng, m: usize) -> DensitySlice {
    let base: f64 = rng.random_range(0.3..0.7);
    let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.08..0.08));
    let ph: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    DensitySlice::from_fn(m, |x| {
        (base + (0..3).map(|k| a[k] * (2.0 * PI * (k + 1) as f64 * x + ph[k]).cos()).sum::<f64>())
            .clamp(0.05, 0.95)
    })
    .unwrap()
}

#[test]
fn metric_is_dominated_by_three_times_l2() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let m = 64;
        let a = random_slice(&mut rng, m);
        let b = random_slice(&mut rng, m);
        let d = fourier_metric(
            &FourierCoeffs::of_slice(&a, DEFAULT_TRUNCATION),
            &FourierCoeffs::of_slice(&b, DEFAULT_TRUNCATION),
            DEFAULT_TRUNCATION,
        );
        assert!(d.value <= 3.0 * l2_distance(&a, &b).unwrap() + d.tail_bound);
    }
}

#[test]
fn l2_contraction_with_the_reaction_lipschitz_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = poly(0.75);
    let c0 = p.reaction_lipschitz() + 1e-3;
    let dt = 0.05 / c0;
    for _ in 0..100 {
        let a = random_slice(&mut rng, 32);
        let b = random_slice(&mut rng, 32);
        let d0 = l2_distance(&a, &b).unwrap();
        let pa = evolve(&a, &p, 5.0, dt).unwrap();
        let pb = evolve(&b, &p, 5.0, dt).unwrap();
        for t in [0.1, 1.0, 5.0] {
            let d = l2_distance(pa.at_time(t), pb.at_time(t)).unwrap();
            assert!(d <= (c0 * t).exp() * d0 + 1e-12, "t = {t}: {d} vs {d0}");
        }
    }
}

#[test]
fn ordered_data_stay_ordered() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = poly(0.5);
    for _ in 0..50 {
        let a = random_slice(&mut rng, 32);
        let lift: f64 = rng.random_range(0.0..0.04);
        let b = DensitySlice::new(a.values().iter().map(|v| v + lift).collect()).unwrap();
        let pa = evolve(&a, &p, 1.0, 0.01).unwrap();
        let pb = evolve(&b, &p, 1.0, 0.01).unwrap();
        for (sa, sb) in pa.slices().iter().zip(pb.slices()) {
            for (x, y) in sa.values().iter().zip(sb.values()) {
                assert!(x <= y);
            }
        }
    }
}

#[test]
fn spatial_error_is_second_order() {
    let p = poly(0.25);
    let f = |x: f64| 0.5 + 0.3 * (2.0 * PI * x).cos();
    let solve = |m: usize| evolve(&DensitySlice::from_fn(m, f).unwrap(), &p, 0.1, 1e-4).unwrap();
    let reference = solve(512);
    let err = |m: usize| {
        let s = solve(m);
        let last = s.last().values();
        let stride = 512 / m;
        (0..m)
            .map(|j| (last[j] - reference.last().values()[j * stride]).abs())
            .fold(0.0, f64::max)
    };
    let (e16, e32) = (err(16), err(32));
    let ratio = e16 / e32;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

/// Shrinking the initial distance tenfold shrinks the distance of the
/// solutions; printed as a table.
#[test]
fn flow_continuity_table() {
    let p = poly(0.75);
    let base = DensitySlice::from_fn(64, |x| 0.5 + 0.2 * (2.0 * PI * x).sin()).unwrap();
    let k = DEFAULT_TRUNCATION;
    let path = evolve(&base, &p, 1.0, 0.01).unwrap();
    let mut last = f64::INFINITY;
    println!("initial d   sup_t d");
    for e in [0.1, 0.01, 0.001] {
        let other = DensitySlice::new(base.values().iter().map(|v| v + e * 0.5).collect()).unwrap();
        let d0 = fourier_metric(&FourierCoeffs::of_slice(&base, k), &FourierCoeffs::of_slice(&other, k), k).value;
        let q = evolve(&other, &p, 1.0, 0.01).unwrap();
        let sup = path
            .slices()
            .iter()
            .zip(q.slices())
            .map(|(a, b)| fourier_metric(&FourierCoeffs::of_slice(a, k), &FourierCoeffs::of_slice(b, k), k).value)
            .fold(0.0, f64::max);
        println!("{d0:.3e}  {sup:.3e}");
        assert!(sup < last);
        last = sup;
    }
}
