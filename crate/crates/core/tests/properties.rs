mod common;

use common::rel_close;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use xmmd_core::baselines::{mmd_u_statistic_relabeled, permutation_distribution};
use xmmd_core::cross::split_samples;
use xmmd_core::kernels::median_pairwise_distance;
use xmmd_core::{
    eval_kernel, gram_matrix, median_bandwidth, mmd_u_statistic, normal_cdf, normal_quantile,
    predict_perm_power, studentize, KernelFamily, KernelSpec, PermutationPlan, SampleMatrix,
    SplitPlan,
};

fn sample(n: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = SampleMatrix> {
    n.prop_flat_map(move |n| {
        prop::collection::vec(-3.0..3.0f64, n * d)
            .prop_map(move |data| SampleMatrix::from_vec(data, n, d).unwrap())
    })
}

fn pair(
    n: std::ops::RangeInclusive<usize>,
    d: usize,
) -> impl Strategy<Value = (SampleMatrix, SampleMatrix)> {
    (sample(n.clone(), d), sample(n, d))
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.05..3.0f64).prop_map(|s| KernelSpec::gaussian(s).unwrap()),
        (0.05..3.0f64).prop_map(|s| KernelSpec::laplace(s).unwrap()),
        (1u32..4, 0.05..1.0f64).prop_map(|(r, s)| KernelSpec::polynomial(r, s).unwrap()),
    ]
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, d)
}

fn permuted_rows(s: &SampleMatrix, order: &[usize]) -> SampleMatrix {
    s.select(order).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernel_is_exactly_symmetric(spec in kernel(), x in point(3), y in point(3)) {
        prop_assert_eq!(eval_kernel(&spec, &x, &y).unwrap(), eval_kernel(&spec, &y, &x).unwrap());
    }

    #[test]
    fn radial_kernels_lie_in_unit_interval(s in 0.01..5.0f64, x in point(4), y in point(4)) {
        for spec in [KernelSpec::gaussian(s).unwrap(), KernelSpec::laplace(s).unwrap()] {
            let v = eval_kernel(&spec, &x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(eval_kernel(&spec, &x, &x).unwrap(), 1.0);
        }
    }

    #[test]
    fn gaussian_is_translation_invariant(s in 0.01..2.0f64, x in point(3), y in point(3), c in point(3)) {
        let spec = KernelSpec::gaussian(s).unwrap();
        let xs: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a + b).collect();
        let ys: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a + b).collect();
        let diff = eval_kernel(&spec, &xs, &ys).unwrap() - eval_kernel(&spec, &x, &y).unwrap();
        prop_assert!(diff.abs() <= 1e-12);
    }

    #[test]
    fn gaussian_gram_is_psd(s in 0.01..5.0f64, (x, y) in pair(1..=10, 2)) {
        let spec = KernelSpec::gaussian(s).unwrap();
        let gram = gram_matrix(&spec, &x, &y).unwrap();
        let size = gram.size();
        let matrix = DMatrix::from_row_slice(size, size, gram.pooled());
        let eig = SymmetricEigen::new(matrix);
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-8), "{:?}", eig.eigenvalues);
    }

    #[test]
    fn gram_is_bit_symmetric_with_kernel_diagonal(spec in kernel(), (x, y) in pair(1..=8, 3)) {
        let gram = gram_matrix(&spec, &x, &y).unwrap();
        let pooled = x.concat(&y).unwrap();
        for a in 0..gram.size() {
            prop_assert_eq!(gram.get(a, a), eval_kernel(&spec, pooled.row(a), pooled.row(a)).unwrap());
            for b in 0..gram.size() {
                prop_assert_eq!(gram.get(a, b).to_bits(), gram.get(b, a).to_bits());
            }
        }
    }

    #[test]
    fn median_invariant_to_order_and_swap((x, y) in pair(2..=9, 2), seed in any::<u64>()) {
        let w = median_pairwise_distance(&x, &y);
        prop_assume!(w.is_ok());
        let w = w.unwrap();
        prop_assert_eq!(median_pairwise_distance(&y, &x).unwrap(), w);
        let pooled = x.concat(&y).unwrap();
        let plan = PermutationPlan::new(1, seed).unwrap();
        let shuffled = pooled.select(&plan.permutation(0, pooled.n())).unwrap();
        let a = shuffled.select(&(0..x.n()).collect::<Vec<_>>()).unwrap();
        let b = shuffled.select(&(x.n()..pooled.n()).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(median_pairwise_distance(&a, &b).unwrap(), w);
        let s = median_bandwidth(&x, &y, KernelFamily::Gaussian).unwrap();
        prop_assert!(rel_close(s, 1.0 / (2.0 * w * w), 1e-15));
    }

    #[test]
    fn t_is_invariant_to_kernel_scale(spec in kernel(), (x, y) in pair(4..=12, 2)) {
        let plan = SplitPlan::balanced(x.n(), y.n()).unwrap();
        let gram = gram_matrix(&spec, &x, &y).unwrap();
        let base = studentize(&gram, &plan).unwrap();
        prop_assume!(base.sigma > 0.0);
        for c in [1e-3, 1.0, 1e3] {
            let scaled = studentize(&gram.scaled(c), &plan).unwrap();
            prop_assert!(rel_close(scaled.t, base.t, 1e-9), "c={} {} vs {}", c, scaled.t, base.t);
            prop_assert!(rel_close(scaled.xmmd2, c * base.xmmd2, 1e-9));
        }
    }

    #[test]
    fn within_split_permutations_leave_statistic_unchanged(
        spec in kernel(),
        (x, y) in pair(4..=12, 2),
        seed in any::<u64>(),
    ) {
        let plan = SplitPlan::balanced(x.n(), y.n()).unwrap();
        let base = studentize(&gram_matrix(&spec, &x, &y).unwrap(), &plan).unwrap();
        let shuffle = |len: usize, stream: usize| PermutationPlan::new(4, seed).unwrap().permutation(stream, len);
        let (x1, x2, y1, y2) = split_samples(&x, &y, &plan).unwrap();
        let xp = permuted_rows(&x1, &shuffle(x1.n(), 0)).concat(&permuted_rows(&x2, &shuffle(x2.n(), 1))).unwrap();
        let yp = permuted_rows(&y1, &shuffle(y1.n(), 2)).concat(&permuted_rows(&y2, &shuffle(y2.n(), 3))).unwrap();
        let moved = studentize(&gram_matrix(&spec, &xp, &yp).unwrap(), &plan).unwrap();
        prop_assert!((moved.xmmd2 - base.xmmd2).abs() <= 1e-12 * base.xmmd2.abs().max(1.0));
        prop_assert!((moved.sigma - base.sigma).abs() <= 1e-12 * base.sigma.max(1.0));
    }

    #[test]
    fn swapping_samples_preserves_statistic(spec in kernel(), n in 4usize..=12, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_sample(&mut r, n, 2, 0.0);
        let y = common::random_sample(&mut r, n, 2, 0.3);
        let plan = SplitPlan::balanced(n, n).unwrap();
        let forward = studentize(&gram_matrix(&spec, &x, &y).unwrap(), &plan).unwrap();
        let backward = studentize(&gram_matrix(&spec, &y, &x).unwrap(), &plan).unwrap();
        prop_assert!((forward.xmmd2 - backward.xmmd2).abs() <= 1e-12 * forward.xmmd2.abs().max(1.0));
        prop_assert!(rel_close(forward.t, backward.t, 1e-9) || (forward.t - backward.t).abs() < 1e-9);
    }

    #[test]
    fn identical_first_splits_give_exact_zero(spec in kernel(), (x, y) in pair(2..=6, 2)) {
        let shared = x.clone();
        let xs = shared.concat(&x).unwrap();
        let ys = shared.concat(&y).unwrap();
        let plan = SplitPlan::new(shared.n(), x.n(), shared.n(), y.n()).unwrap();
        let res = studentize(&gram_matrix(&spec, &xs, &ys).unwrap(), &plan);
        if let Ok(res) = res {
            prop_assert!(res.xmmd2.abs() <= 1e-14 * res.ux.iter().map(|u| u.abs()).sum::<f64>().max(1.0));
        }
    }

    #[test]
    fn relabelled_statistic_at_identity_is_observed(spec in kernel(), (x, y) in pair(2..=8, 2)) {
        let gram = gram_matrix(&spec, &x, &y).unwrap();
        let identity: Vec<usize> = (0..gram.size()).collect();
        let a = mmd_u_statistic_relabeled(&gram, &identity).unwrap();
        prop_assert!(rel_close(a, mmd_u_statistic(&gram).unwrap(), 1e-12));
    }

    #[test]
    fn normal_cdf_symmetry(x in -40.0..40.0f64) {
        prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quantile_is_monotone_and_inverts(p in 1e-12..1.0f64, q in 1e-12..1.0f64) {
        prop_assume!(p < 1.0 && q < 1.0 && p != q);
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        prop_assert!(normal_quantile(lo).unwrap() <= normal_quantile(hi).unwrap());
        prop_assert!((normal_cdf(normal_quantile(p).unwrap()) - p).abs() <= 1e-9);
    }

    #[test]
    fn predicted_power_is_a_monotone_probability(a in 0.001..0.999f64, b in 0.001..0.999f64, alpha in 0.001..0.5f64) {
        let pa = predict_perm_power(a, alpha).unwrap();
        prop_assert!(pa > 0.0 && pa < 1.0);
        if a + 1e-6 < b {
            prop_assert!(predict_perm_power(b, alpha).unwrap() > pa);
        }
        prop_assert!((predict_perm_power(alpha, alpha).unwrap() - alpha).abs() <= 1e-9);
    }
}

/// Multiset of statistics over every split of the pooled indices into `n` and `m` labels.
fn exhaustive_distribution(gram: &xmmd_core::GramBlocks) -> Vec<f64> {
    let size = gram.size();
    let n = gram.n();
    let mut out = Vec::new();
    for mask in 0u32..(1 << size) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let mut perm: Vec<usize> = (0..size).filter(|a| mask & (1 << a) != 0).collect();
        perm.extend((0..size).filter(|a| mask & (1 << a) == 0));
        out.push(mmd_u_statistic_relabeled(gram, &perm).unwrap());
    }
    out.sort_by(f64::total_cmp);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn full_permutation_distribution_is_relabelling_invariant(
        spec in kernel(),
        (x, y) in pair(2..=5, 2),
        seed in any::<u64>(),
    ) {
        let gram = gram_matrix(&spec, &x, &y).unwrap();
        let pooled = x.concat(&y).unwrap();
        let order = PermutationPlan::new(1, seed).unwrap().permutation(0, pooled.n());
        let relabelled = pooled.select(&order).unwrap();
        let xs = relabelled.select(&(0..x.n()).collect::<Vec<_>>()).unwrap();
        let ys = relabelled.select(&(x.n()..pooled.n()).collect::<Vec<_>>()).unwrap();
        let other = gram_matrix(&spec, &xs, &ys).unwrap();
        let a = exhaustive_distribution(&gram);
        let b = exhaustive_distribution(&other);
        prop_assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }

    #[test]
    fn seeded_stream_composes_with_relabelling(spec in kernel(), (x, y) in pair(2..=8, 2), seed in any::<u64>()) {
        // Relabelling the pooled data by π and drawing positions σ_b is the
        // same as drawing π∘σ_b on the original data.
        let plan = PermutationPlan::new(30, seed).unwrap();
        let gram = gram_matrix(&spec, &x, &y).unwrap();
        let pooled = x.concat(&y).unwrap();
        let pi = PermutationPlan::new(1, seed ^ 0xabcd).unwrap().permutation(0, pooled.n());
        let relabelled = pooled.select(&pi).unwrap();
        let xs = relabelled.select(&(0..x.n()).collect::<Vec<_>>()).unwrap();
        let ys = relabelled.select(&(x.n()..pooled.n()).collect::<Vec<_>>()).unwrap();
        let moved = permutation_distribution(&gram_matrix(&spec, &xs, &ys).unwrap(), &plan).unwrap();
        for (b, value) in moved.iter().enumerate() {
            let sigma = plan.permutation(b, pooled.n());
            let composed: Vec<usize> = sigma.iter().map(|&s| pi[s]).collect();
            let want = mmd_u_statistic_relabeled(&gram, &composed).unwrap();
            prop_assert!((value - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}
