//! Property-based invariants for the codebook, solver and partition layers.

use proptest::prelude::*;

use beamalign::beamspace::{FlatAngle, Partition};
use beamalign::codebook::{Codebook, Codeword};
use beamalign::waterfill::{
    self, allocate, lambda_bounds, misalignment_tail, qp_oracle, solve_dual, success_probability,
    PowerParams,
};

const PI2: f64 = std::f64::consts::PI * std::f64::consts::PI;

/// A random sub-codebook of `{0,1}^7` with at least two words.
fn sub_codebook() -> impl Strategy<Value = Codebook> {
    proptest::collection::hash_set(0u32..128, 2..32)
        .prop_map(|words| Codebook::from_words(words.into_iter().collect(), 7).unwrap())
}

fn naive_decode(cb: &Codebook, u: &Codeword) -> usize {
    let mut best = 0usize;
    let mut best_d = u32::MAX;
    for i in 0..cb.size() {
        let d = cb.codeword(i).hamming_distance(u).unwrap();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

proptest! {
    #[test]
    fn decode_matches_naive_scan(cb in sub_codebook(), word in 0u32..128) {
        let u = Codeword::new(word, 7).unwrap();
        prop_assert_eq!(cb.decode_index(&u).unwrap(), naive_decode(&cb, &u));
    }

    #[test]
    fn decode_table_agrees_with_decode(cb in sub_codebook()) {
        let table = cb.decode_table();
        for word in 0u32..128 {
            let u = Codeword::new(word, 7).unwrap();
            prop_assert_eq!(table[word as usize] as usize, cb.decode_index(&u).unwrap());
        }
    }

    #[test]
    fn allocation_is_feasible(cb in sub_codebook(), kappa in 0.01f64..1000.0) {
        let params = PowerParams::from_kappa(kappa, 1.0).unwrap();
        let alloc = allocate(&params, &cb).unwrap();
        let mut total = 0.0f64;
        for &w in alloc.as_slice() {
            prop_assert!(w >= 0.0);
            total += w;
        }
        prop_assert!((total - PI2).abs() < 1e-9);
        let lambda = solve_dual(&params, &cb).unwrap();
        let (lo, hi) = lambda_bounds(&params, &cb);
        prop_assert!(lambda >= lo - 1e-12 && lambda <= hi + 1e-12);
    }

    #[test]
    fn allocation_prefers_lighter_codewords(cb in sub_codebook(), kappa in 0.01f64..1000.0) {
        // omega_d = (pi^2/kappa)[lambda - W(d)]^+ is non-increasing in W(d).
        let params = PowerParams::from_kappa(kappa, 1.0).unwrap();
        let alloc = allocate(&params, &cb).unwrap();
        for i in 0..cb.size() {
            for j in 0..cb.size() {
                if cb.weight_of(i) < cb.weight_of(j) {
                    prop_assert!(alloc.get(i) >= alloc.get(j) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn allocation_depends_only_on_kappa(cb in sub_codebook(), kappa in 0.1f64..100.0, scale in 0.1f64..10.0) {
        // Scaling phi_s and phi_d_bar jointly leaves kappa, hence the
        // solution, unchanged.
        let a = PowerParams::new(1.0, kappa / 2.0, 1, 1.0, 1.0).unwrap();
        let b = PowerParams::new(scale, scale * kappa / 2.0, 1, 1.0, 1.0).unwrap();
        let oa = allocate(&a, &cb).unwrap();
        let ob = allocate(&b, &cb).unwrap();
        for i in 0..cb.size() {
            prop_assert!((oa.get(i) - ob.get(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn qp_oracle_never_beats_waterfill(cb in sub_codebook(), kappa in 0.1f64..100.0) {
        let params = PowerParams::from_kappa(kappa, 1.0).unwrap();
        let wf = allocate(&params, &cb).unwrap();
        let qp = qp_oracle(&params, &cb).unwrap();
        let f_wf = waterfill::upper_objective(&wf, &cb, &params).unwrap();
        let f_qp = waterfill::upper_objective(&qp, &cb, &params).unwrap();
        prop_assert!(f_wf <= f_qp + 1e-8 * f_qp.abs().max(1.0));
    }

    #[test]
    fn partition_round_trip(cb in sub_codebook(), kappa in 0.1f64..100.0, u in 0.0f64..1.0) {
        let params = PowerParams::from_kappa(kappa, 1.0).unwrap();
        let alloc = allocate(&params, &cb).unwrap();
        let p = Partition::build(&alloc, &cb).unwrap();
        let theta = FlatAngle::new((u * PI2).min(PI2 * (1.0 - 1e-15))).unwrap();
        let idx = p.cell_index(theta);
        let (_, start, end) = p.cell(idx);
        prop_assert!(theta.value() >= start && theta.value() < end);
    }

    #[test]
    fn tail_complements_success(p_e in 1e-6f64..0.999_999, l in 1u32..12, eps_off in 0u32..4) {
        let eps = eps_off.min(l);
        let s = success_probability(p_e, l, eps).unwrap();
        let t = misalignment_tail(p_e, l, eps).unwrap();
        prop_assert!((s + t - 1.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((0.0..=1.0).contains(&t));
    }
}
