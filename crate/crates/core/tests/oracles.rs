mod common;

use common::*;
use nalgebra::DMatrix;

use tdals::als::{AlsOptions, Init};
use tdals::cp::{cp_als_from, cp_draw_indices, init_cp, CpSamplerState};
use tdals::leverage::LeverageMap;
use tdals::seed::rng_for;
use tdals::tensor::TensorModel;
use tdals::tr::{
    init_tr, tr_als_from, tr_draw_indices, tr_normalization, tr_sampled_rows, TrSamplerState,
};
use tdals::xbench::exact_sampling_distribution;
use tdals::{DenseTensor, Matrix, TrModel};

#[test]
fn marginals_and_normalization_match_enumeration() {
    let d = oracle_marginals(1);
    assert!(d < 1e-10, "{d}");
}

#[test]
fn sketched_designs_match_materialized_products() {
    let d = oracle_sketched_designs(2);
    assert!(d < 1e-9, "{d}");
}

#[test]
fn trace_marginals_match_bond_tuple_sums() {
    let d = oracle_bond_sums(3);
    assert!(d < 1e-12, "{d}");
}

#[test]
fn exhaustive_sweeps_match_exact_sweeps() {
    let d = oracle_exhaustive_sweeps(4);
    assert!(d < 1e-8, "{d}");
}

#[test]
fn recorded_probabilities_are_normalized_scores() {
    let mut g = rng(5);
    let dims = [3, 2, 4, 2];
    let cp = random_cp(&dims, 3, &mut g);
    let tr = random_tr(&dims, &[2, 3, 1, 2], &mut g);
    for n in 0..dims.len() {
        let phi = random_spd(3, &mut g);
        let st = CpSamplerState::new(&cp, n, &LeverageMap::from_phi(phi.clone()).unwrap()).unwrap();
        let (s, _) = cp_draw_indices(&st, 200, &mut rng_for(5, &[n as u64])).unwrap();
        let c: f64 = {
            let mut d = dims.to_vec();
            d[n] = 1;
            all_indices(&d).iter().map(|i| quad(&phi, &cp_row(&cp, n, i))).sum()
        };
        for (multi, &p) in s.multi.iter().zip(&s.probabilities) {
            let want = quad(&phi, &cp_row(&cp, n, multi)) / c;
            assert!((p - want).abs() < 1e-10);
        }

        let k = tr.left_rank(n) * tr.right_rank(n);
        let phi = random_spd(k, &mut g);
        let st = TrSamplerState::new(&tr, n, &LeverageMap::from_phi(phi.clone()).unwrap()).unwrap();
        let (s, _) = tr_draw_indices(&st, 200, &mut rng_for(6, &[n as u64])).unwrap();
        let c = tr_normalization(&st);
        for (multi, &p) in s.multi.iter().zip(&s.probabilities) {
            let want = quad(&phi, &tr_row(&tr, n, multi)) / c;
            assert!((p - want).abs() < 1e-10);
        }
        let rows = tr_sampled_rows(&tr, n, &s).unwrap();
        for j in 0..s.len() {
            let want: Vec<f64> = tr_row(&tr, n, &s.multi[j]).iter().map(|v| v * s.weights[j]).collect();
            let got = rows.row(j);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            let w = 1.0 / (200.0 * s.probabilities[j]).sqrt();
            assert!((s.weights[j] - w).abs() < 1e-12 * w);
        }
    }
}

#[test]
fn scaling_a_core_scales_the_normalization_quadratically() {
    let mut g = rng(7);
    let tr = random_tr(&[3, 2, 3], &[2, 2, 2], &mut g);
    let map = LeverageMap::from_phi(random_spd(4, &mut g)).unwrap();
    let base = tr_normalization(&TrSamplerState::new(&tr, 0, &map).unwrap());
    let mut cores = tr.cores().to_vec();
    cores[1].data_mut().iter_mut().for_each(|v| *v *= 2.5);
    let scaled = TrModel::new(cores).unwrap();
    let c = tr_normalization(&TrSamplerState::new(&scaled, 0, &map).unwrap());
    assert!((c - 6.25 * base).abs() < 1e-10 * c);
}

#[test]
fn identity_phi_with_orthonormal_factors_gives_rank() {
    let mut g = rng(8);
    let q = |rows: usize, g: &mut _| {
        let m = uniform(rows, 3, g).to_dmatrix();
        Matrix::from_dmatrix(&m.qr().q())
    };
    let cp = tdals::CpModel::new(vec![q(4, &mut g), q(5, &mut g), q(3, &mut g)]).unwrap();
    let map = LeverageMap::from_phi(Matrix::identity(3)).unwrap();
    for n in 0..3 {
        let st = CpSamplerState::new(&cp, n, &map).unwrap();
        assert!((st.normalization() - 3.0).abs() < 1e-12);
    }
}

/// Frobenius error of the best rank-`r` approximation, from the singular values.
fn svd_truncation_error(x: &DenseTensor, r: usize) -> f64 {
    let m = x.classical_unfold(0).unwrap().to_dmatrix();
    let s = m.singular_values();
    let mut sv: Vec<f64> = s.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv[r..].iter().map(|v| v * v).sum::<f64>().sqrt() / x.norm()
}

#[test]
fn two_way_decompositions_match_svd_truncation() {
    let mut g = rng(9);
    let x = DenseTensor::new(vec![7, 6], uniform(7, 6, &mut g).into_data()).unwrap();
    for r in [1, 2, 3] {
        let want = svd_truncation_error(&x, r);
        let opts = AlsOptions::default().with_iters(500).with_tol(0.0);
        let init = init_cp(&x, r, Init::Gaussian, 1).unwrap();
        let (cp, _) = cp_als_from(&x, init, &opts).unwrap();
        assert!((cp.rel_error(&x).unwrap() - want).abs() < 1e-6, "cp rank {r}");
        let init = init_tr(&x, &[r, 1], Init::Gaussian, 2).unwrap();
        let (tr, _) = tr_als_from(&x, init, &opts).unwrap();
        assert!((tr.rel_error(&x).unwrap() - want).abs() < 1e-6, "tr rank {r}");
    }
}

#[test]
fn exact_distribution_matches_householder_qr() {
    let mut g = rng(10);
    let a = uniform(16, 4, &mut g);
    let p = exact_sampling_distribution(&a).unwrap();
    let q = DMatrix::from_column_slice(16, 4, a.data()).qr().q();
    for i in 0..16 {
        let want = q.row(i).norm_squared() / 4.0;
        assert!((p[i] - want).abs() < 1e-14);
    }
}

#[test]
fn guaranteed_sample_count_at_half_accuracy() {
    assert_eq!(guaranteed_j2(4, 0.5, 0.1), 80);
}

#[test]
fn sampled_solve_is_within_relative_error() {
    let inst = RelErrorInstance::new(11);
    let j2 = guaranteed_j2(4, 0.5, 0.1);
    let good = (0..100)
        .filter(|&t| inst.sampled_ratio(1000, j2, 100 + t) <= 1.5)
        .count();
    assert!(good >= 90, "{good}/100");
}

#[test]
fn samplers_match_enumerated_distributions() {
    let (tv, count) = sampler_tv(100_000, 12);
    assert!(count >= 16);
    assert!(tv <= 0.01, "{tv}");
}
