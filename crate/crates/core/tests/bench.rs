use qmcnet::bench::{
    basket_call_monte_carlo, basket_call_price, erfc, lookup, normal_cdf, range_euler, range_rk4,
    BasketParams, ProjectileParams, EXAMPLE_NAMES,
};
use qmcnet::rng::SplitMix64;
use qmcnet::variation::{hardy_krause_upper_bound, FnGrid};

fn random_point(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.next_f64()).collect()
}

#[test]
fn every_map_agrees_with_its_oracle() {
    for name in EXAMPLE_NAMES {
        let map = lookup(name).unwrap();
        let mut rng = SplitMix64::new(99);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let y = random_point(&mut rng, map.dim());
            let v = map.evaluate(&y).unwrap();
            let r = map.oracle(&y).unwrap();
            assert!(r.agrees(v), "{name} at {y:?}: {v} vs {} ± {}", r.value, r.tolerance);
            worst = worst.max((v - r.value).abs());
        }
        println!("{name}: worst |evaluate - oracle| = {worst:.3e}");
    }
}

// Series for |x| ≤ 3, Lentz continued fraction above.
fn erfc_oracle(x: f64) -> f64 {
    let a = x.abs();
    let tail = if a <= 3.0 {
        let mut term = a;
        let mut sum = a;
        for n in 1..200 {
            term *= -a * a / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // erfc(a) = e^{-a²}/√π · 1/(a + (1/2)/(a + 1/(a + (3/2)/(a + …))))
        let tiny = 1e-300;
        let mut f = a;
        let mut c = a;
        let mut d = 0.0;
        for k in 1..500 {
            let coeff = k as f64 / 2.0;
            d = a + coeff * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = a + coeff / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-a * a).exp() / std::f64::consts::PI.sqrt() / f
    };
    if x < 0.0 {
        2.0 - tail
    } else {
        tail
    }
}

#[test]
fn erfc_absolute_error_below_1e12() {
    let mut worst = 0.0f64;
    for i in -800..=800 {
        let x = i as f64 * 0.01;
        let err = (erfc(x) - erfc_oracle(x)).abs();
        worst = worst.max(err);
    }
    assert!(worst < 1e-12, "worst {worst:e}");
    assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-15);
}

#[test]
fn projectile_euler_is_first_order() {
    let p = ProjectileParams::default();
    let mut rng = SplitMix64::new(5);
    for _ in 0..5 {
        let y = random_point(&mut rng, 7);
        let exact = range_rk4(&p, &y, 1e-4).unwrap();
        let dts = [0.01, 0.005, 0.0025, 0.00125];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| (range_euler(&p, &y, dt).unwrap() - exact).abs())
            .collect();
        let xs: Vec<f64> = dts.iter().map(|d| d.log2()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.log2()).collect();
        let order = slope(&xs, &ys);
        assert!((order - 1.0).abs() <= 0.15, "order {order} errors {errs:?}");
    }
}

#[test]
fn rk4_reference_is_converged() {
    let p = ProjectileParams::default();
    let y = [0.3, 0.8, 0.1, 0.6, 0.4, 0.9, 0.2];
    let a = range_rk4(&p, &y, 1e-3).unwrap();
    let b = range_rk4(&p, &y, 1e-4).unwrap();
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
}

// With the other inputs nominal the range rises with speed up to y7 ≈ 0.9 and then
// turns over (see the next test for why).
#[test]
fn range_increases_with_speed_at_nominal_parameters() {
    let p = ProjectileParams::default();
    let mut y = [0.5; 7];
    let mut last = f64::NEG_INFINITY;
    for k in 0..=16 {
        y[6] = k as f64 / 20.0;
        let r = range_rk4(&p, &y, 1e-3).unwrap();
        assert!(r > last, "y7 = {}: {r} <= {last}", y[6]);
        last = r;
    }
}

// Drag acts along -e1 with magnitude k|v|^2 even after the horizontal velocity has
// reversed, so a faster throw can drift further back before landing.
#[test]
fn range_is_not_monotone_in_speed_everywhere() {
    let p = ProjectileParams::default();
    let mut y = [0.939288, 0.743842, 0.416172, 0.252358, 0.008480, 0.878718, 0.3];
    let slow = range_rk4(&p, &y, 1e-3).unwrap();
    y[6] = 0.31;
    let fast = range_rk4(&p, &y, 1e-3).unwrap();
    assert!(fast < slow, "{fast} vs {slow}");
}

#[test]
fn basket_matches_monte_carlo_at_one_million_paths() {
    let p = BasketParams::standard(9);
    let s = [0.5; 9];
    let price = basket_call_price(&s, &p).unwrap();
    let mc = basket_call_monte_carlo(&s, &p, 1_000_000, 2024).unwrap();
    let z = (price - mc.mean).abs() / mc.std_error;
    assert!(z < 3.0, "price {price} mc {} se {} z {z}", mc.mean, mc.std_error);
}

#[test]
fn basket_is_monotone_and_bounded() {
    for d in [5, 7, 9] {
        let p = BasketParams::standard(d);
        let mut rng = SplitMix64::new(d as u64);
        for _ in 0..1000 {
            let a = random_point(&mut rng, d);
            let b: Vec<f64> = a.iter().map(|v| v + (1.0 - v) * rng.next_f64()).collect();
            let (a, b): (Vec<f64>, Vec<f64>) = (
                a.iter().map(|v| v.max(1e-6)).collect(),
                b.iter().map(|v| v.max(1e-6)).collect(),
            );
            let pa = basket_call_price(&a, &p).unwrap();
            let pb = basket_call_price(&b, &p).unwrap();
            assert!(pa <= pb, "{pa} > {pb}");
            for (s, v) in [(&a, pa), (&b, pb)] {
                assert!(v >= 0.0);
                assert!(v <= p.forward_bound(s).unwrap() * (1.0 + 1e-15));
            }
        }
    }
}

#[test]
fn owen_with_low_dimension_has_finite_recursion_bound() {
    // d < r + 2: f_{3,4} and f_{2,1}
    for (d, r) in [(3usize, 4u32), (2, 1)] {
        let f = FnGrid::new(d, move |y: &[f64]| qmcnet::bench::owen_f(r, y));
        let coarse = hardy_krause_upper_bound(&f, 16).unwrap();
        let fine = hardy_krause_upper_bound(&f, 32).unwrap();
        assert!(fine.is_finite() && coarse.is_finite());
        assert!((fine - coarse).abs() < 0.1 * fine, "{coarse} vs {fine}");
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
