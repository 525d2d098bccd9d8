use std::collections::HashSet;
use std::f64::consts::PI;

use nodal_core::correlations::{census, count_c4, pair_sum_table, DEFAULT_TABLE_CAP};
use nodal_core::kacrice::{expansion_coefficients, f_exact, f_factored, OmegaMatrix};
use nodal_core::moments::b_k_exact;
use nodal_core::predict::{alpha, variance_prediction};
use nodal_core::simulate::{crofton_volume, eval_wave, eval_wave_complex, kappa, sample_wave};
use nodal_core::spectral::{energy, eval_frame, Traces};
use nodal_core::{enumerate_frequencies, EnumerationMode, FrequencySet, Rational};
use proptest::prelude::*;

fn admissible() -> impl Strategy<Value = (usize, u64)> {
    (2usize..7, 1u64..40).prop_filter_map("no lattice points or even m at d = 4", |(d, m)| {
        let m = if d >= 5 { m.min(12) } else { m };
        enumerate_frequencies(d, m, EnumerationMode::Strict).ok().map(|_| (d, m))
    })
}

fn set((d, m): (usize, u64)) -> FrequencySet {
    enumerate_frequencies(d, m, EnumerationMode::Strict).unwrap()
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frequency_set_structure(dm in admissible()) {
        let s = set(dm);
        let (d, m) = dm;
        let pts: Vec<Vec<i64>> = s.points().map(|p| p.to_vec()).collect();
        prop_assert_eq!(pts.len(), s.n());
        prop_assert!(pts.windows(2).all(|w| w[0] < w[1]));
        let all: HashSet<&Vec<i64>> = pts.iter().collect();
        let mut total = vec![0i64; d];
        for (i, p) in pts.iter().enumerate() {
            prop_assert_eq!(p.iter().map(|c| c * c).sum::<i64>(), m as i64);
            let neg: Vec<i64> = p.iter().map(|c| -c).collect();
            prop_assert!(all.contains(&neg));
            prop_assert_eq!(s.point(s.antipode(i)), &neg[..]);
            total.iter_mut().zip(p).for_each(|(t, c)| *t += c);
        }
        prop_assert!(total.iter().all(|&t| t == 0));
    }

    #[test]
    fn correlation_counts(dm in admissible()) {
        let s = set(dm);
        let n = s.n() as u64;
        let table = pair_sum_table(&s, DEFAULT_TABLE_CAP).unwrap();
        for (v, a) in table.entries() {
            let neg: Vec<i64> = v.iter().map(|c| -c).collect();
            prop_assert_eq!(table.get(&neg), a);
        }
        let c = census(&s, None).unwrap();
        prop_assert_eq!(c.c4, count_c4(&s).unwrap());
        prop_assert_eq!(c.d_sym + c.d_diag + c.x4, c.c4);
        prop_assert!(c.c4 >= 3 * n * n - 3 * n);
        prop_assert!(c.r4 >= Rational::new(1, (n * n) as i128));
    }

    #[test]
    fn moment_exactness(dm in admissible(), k in 1u32..8) {
        let s = set(dm);
        let b = b_k_exact(&s, k).unwrap();
        let den = (s.m() as i128).pow(k) * (s.n() as i128).pow(2);
        prop_assert_eq!(den % b.denom(), 0);
        if k % 2 == 1 {
            prop_assert_eq!(b, Rational::from_integer(0));
        }
    }

    #[test]
    fn frame_identities(m in (0u64..6).prop_map(|k| 2 * k + 1), x in point(4)) {
        let s = set((4, m));
        let f = eval_frame(&s, &x).unwrap();
        prop_assert!(f.r.abs() <= 1.0 + 1e-12);
        let tol = 1e-9 * energy(m);
        prop_assert!((f.hess.trace() + energy(m) * f.r).abs() < tol);
        if let (Some(xm), Some(ym)) = (&f.x_mat, &f.y_mat) {
            let t = Traces::of(xm, ym);
            prop_assert!((t.tr_x * t.tr_x - t.tr_x2).abs() < 1e-10 * (1.0 + t.tr_x2));
            let yxy = (ym * xm * ym).trace();
            prop_assert!((yxy - t.tr_xy2).abs() < 1e-10 * (1.0 + t.tr_xy2.abs()));
            let omega = OmegaMatrix::from_frame(&f).unwrap();
            prop_assert!(omega.min_eigenvalue() >= -1e-9);
        }
        let origin = eval_frame(&s, &[0.0; 4]).unwrap();
        prop_assert!((origin.r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn determinant_paths(seed in 0u64..1000, t in 0.0f64..5.0, u in 0.0f64..5.0) {
        let s = set((4, 5));
        let mut x = vec![0.0; 4];
        x[0] = (seed as f64 * 0.618_033_988_75).fract();
        x[1] = (seed as f64 * 0.414_213_562_37).fract();
        let f = eval_frame(&s, &x).unwrap();
        prop_assume!(f.x_mat.is_some());
        let (xm, ym) = (f.x_mat.unwrap(), f.y_mat.unwrap());
        let scale = 0.1 / (1.0 + xm.amax() + ym.amax());
        let (xs, ys) = (xm * scale, ym * scale);
        let a = f_exact(t, u, &xs, &ys).unwrap();
        let b = f_factored(t, u, &xs, &ys).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn expansion_coefficients_closed_form(d in 2usize..40) {
        let a = expansion_coefficients(d).unwrap();
        let di = d as i128;
        let q = Rational::new;
        prop_assert_eq!(a.a0, Rational::from_integer(1));
        prop_assert_eq!(a.a1, q(1, di));
        prop_assert_eq!(a.a2, q(1, 2 * di * di));
        prop_assert_eq!(a.a3, q(-1, di * di * (di + 2)));
        prop_assert_eq!(a.a4, q(-(di - 1), 2 * di * di * (di + 2)));
        prop_assert_eq!(a.a5, q(1, 4 * di * di * (di + 2) * (di + 2)));
        prop_assert_eq!(a.a6 * 2, a.a5);
        prop_assert_eq!(a.a7, q(-1, 2 * di * di * (di + 2)));
    }

    #[test]
    fn wave_symmetry_and_paths(m in (0u64..5).prop_map(|k| 2 * k + 1), seed in any::<u64>(), x in point(4)) {
        let s = set((4, m));
        let w = sample_wave(&s, seed);
        for i in 0..s.n() {
            let a = w.coefficient(i).unwrap();
            let b = w.coefficient(s.antipode(i)).unwrap();
            prop_assert_eq!(a, b.conj());
        }
        let (re, im) = eval_wave_complex(&w, &s, &x);
        prop_assert!((re - eval_wave(&w, &x)).abs() < 1e-10);
        prop_assert!(im.abs() < 1e-10);
    }

    #[test]
    fn bound_ladder(dm in admissible()) {
        let s = set(dm);
        prop_assume!(s.n() >= 2);
        let p = variance_prediction(&census(&s, None).unwrap()).unwrap();
        prop_assert!(p.rw_bound > p.conjecture_bound);
        prop_assert!(p.conjecture_bound >= p.main_term);
        match (p.thm_exponent, alpha(dm.0)) {
            (Some(e), Some(a)) => prop_assert!((e - 1.0 - a).abs() < 1e-15),
            (e, a) => prop_assert!(e.is_none() && a.is_none()),
        }
    }
}

#[test]
fn crofton_record_invariants() {
    let s = set((4, 5));
    for seed in 0..5 {
        let e = crofton_volume(&sample_wave(&s, seed), 40, seed).unwrap();
        assert!(e.volume >= 0.0);
        let se = (e.per_line_variance / 40.0).sqrt() / kappa(4);
        assert!((e.std_error - se).abs() < 1e-15);
    }
    assert!((kappa(2) - 2.0 / PI).abs() < 1e-14);
}
