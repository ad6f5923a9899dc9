use lzbell::stats::special::{normal_cdf, normal_quantile, student_t_cdf};
use lzbell::stats::{
    box_stats, pearson, shannon_entropy, stratified_pearson, welch_t, StratumRecord,
};
use proptest::prelude::*;

/// `Γ((ν+1)/2) / Γ(ν/2)` for integer ν via the two-step recurrence.
fn gamma_ratio(df: u32) -> f64 {
    let mut r = if df % 2 == 1 {
        1.0 / std::f64::consts::PI.sqrt()
    } else {
        std::f64::consts::PI.sqrt() / 2.0
    };
    let mut v = if df % 2 == 1 { 1 } else { 2 };
    while v < df {
        r *= (v as f64 + 1.0) / v as f64;
        v += 2;
    }
    r
}

fn t_density(t: f64, df: u32) -> f64 {
    let v = df as f64;
    gamma_ratio(df) / (v * std::f64::consts::PI).sqrt() * (1.0 + t * t / v).powf(-(v + 1.0) / 2.0)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = (a + b) / 2.0;
    let (l, r) = (simpson(f, a, m), simpson(f, m, b));
    if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
        l + r + (l + r - whole) / 15.0
    } else {
        adaptive(f, a, m, l, tol / 2.0, depth - 1) + adaptive(f, m, b, r, tol / 2.0, depth - 1)
    }
}

fn quad_cdf(t: f64, df: u32) -> f64 {
    let f = |x: f64| t_density(x, df);
    let half = adaptive(&f, 0.0, t.abs(), simpson(&f, 0.0, t.abs()), 1e-12, 50);
    0.5 + half.copysign(t)
}

#[test]
fn t_cdf_matches_quadrature() {
    for df in [1u32, 4, 8, 30] {
        let mut t = -10.0;
        while t <= 10.0 {
            let want = quad_cdf(t, df);
            let got = student_t_cdf(t, df as f64);
            assert!((got - want).abs() < 1e-8, "df={df} t={t}: {got} vs {want}");
            t += 0.25;
        }
    }
    for t in [-3.0, -0.5, 0.0, 0.7, 5.0] {
        let cauchy = 0.5 + f64::atan(t) / std::f64::consts::PI;
        assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-12);
    }
}

#[test]
fn normal_quantile_inverts_cdf() {
    for k in 1..1000 {
        let p = k as f64 / 1000.0;
        assert!(
            (normal_cdf(normal_quantile(p)) - p).abs() < 1e-12,
            "p = {p}"
        );
    }
}

#[test]
fn box_stats_classifies_outliers() {
    let values = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 100.0];
    let b = box_stats(&values).unwrap();
    assert_eq!((b.q1, b.median, b.q3), (3.0, 5.0, 7.0));
    assert_eq!(b.outliers, vec![100.0]);
    assert_eq!((b.whisker_lo, b.whisker_hi), (1.0, 8.0));
}

#[test]
fn single_stratum_equals_plain_pearson() {
    let records: Vec<StratumRecord> = (0..12)
        .map(|i| StratumRecord {
            n: 1000.0 * i as f64,
            s: 2.0 + 0.05 * i as f64,
            value: ((i * 7) % 5) as f64,
        })
        .collect();
    let strata = stratified_pearson(&records, &[]).unwrap();
    assert_eq!(strata.len(), 1);
    let s: Vec<f64> = records.iter().map(|r| r.s).collect();
    let v: Vec<f64> = records.iter().map(|r| r.value).collect();
    assert_eq!(strata[0].result, pearson(&s, &v).unwrap());
}

fn sample(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1000.0f64..1000.0, min..max)
}

proptest! {
    #[test]
    fn entropy_is_relabel_invariant(raw in prop::collection::vec(0.0f64..1.0, 1..12), seed in any::<u64>()) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let dist: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mut permuted = dist.clone();
        let k = (seed % permuted.len() as u64) as usize;
        permuted.rotate_left(k);
        permuted.reverse();
        let h = shannon_entropy(&dist).unwrap();
        prop_assert!((h - shannon_entropy(&permuted).unwrap()).abs() < 1e-9);
        prop_assert!(h >= 0.0 && h <= (dist.len() as f64).log2() + 1e-9);
    }

    #[test]
    fn welch_is_antisymmetric_and_shift_invariant(xs in sample(2, 40), ys in sample(2, 40), shift in -50.0f64..50.0) {
        let Ok(ab) = welch_t(&xs, &ys) else { return Ok(()) };
        let ba = welch_t(&ys, &xs).unwrap();
        prop_assert!((ab.t + ba.t).abs() < 1e-9 * (1.0 + ab.t.abs()));
        prop_assert!((ab.p - ba.p).abs() < 1e-9);
        prop_assert!(ab.p >= 0.0 && ab.p <= 1.0);
        let xs2: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| y + shift).collect();
        let shifted = welch_t(&xs2, &ys2).unwrap();
        prop_assert!((shifted.p - ab.p).abs() < 1e-6);
    }

    #[test]
    fn pearson_affine_invariance_and_ci(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 4..50),
        a in 0.1f64..10.0,
        c in -50.0f64..50.0,
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let Ok(base) = pearson(&xs, &ys) else { return Ok(()) };
        let scaled: Vec<f64> = xs.iter().map(|x| a * x + c).collect();
        let moved = pearson(&scaled, &ys).unwrap();
        prop_assert!((moved.r - base.r).abs() < 1e-9);
        let negated: Vec<f64> = ys.iter().map(|y| -y).collect();
        prop_assert!((pearson(&xs, &negated).unwrap().r + base.r).abs() < 1e-12);
        prop_assert!(base.ci95[0] <= base.r && base.r <= base.ci95[1]);
    }
}
