//! Property tests over randomly drawn shapes, directions and matrices.

mod common;

use num_complex::Complex64;
use proptest::prelude::*;

use mffm::forward::{farfield_band, FarFieldBand, FrequencyGrid, SourceProfile, SourceScene};
use mffm::geometry::{in_strip, Direction, Point, SamplingGrid, Shape};
use mffm::imaging::{normalize, picard_indicator, scan_field, test_vector, w_indicator, Combine, PicardKernel};
use mffm::matrix::CMatrix;
use mffm::operator::{assemble_toeplitz, noise_matrix, spectral_norm, NoiseDistribution, NoiseSpec};
use mffm::spectral::{hermitian_eigen, sharpen, spectral_abs};

fn shape() -> impl Strategy<Value = Shape> {
    let center = (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| Point::new2(x, y));
    prop_oneof![
        (center.clone(), 0.1..2.0f64).prop_map(|(c, r)| Shape::disk(c, r)),
        (center.clone(), 0.2..1.5f64).prop_map(|(c, s)| Shape::kite(c, s)),
        (center, 0.2..1.5f64, 0.0..1.0f64).prop_map(|(c, hw, f)| Shape::rounded_square(c, hw, f * hw)),
    ]
}

fn direction() -> impl Strategy<Value = Direction> {
    (0.0..360.0f64).prop_map(Direction::from_angle_deg)
}

fn complex_matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
        .prop_map(move |v| CMatrix::from_row_major(n, n, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()))
}

fn random_unitary(seed: u64, n: usize) -> CMatrix {
    let spec = NoiseSpec { level: 1.0, seed, distribution: NoiseDistribution::Gaussian };
    hermitian_eigen(&noise_matrix(n, &spec, 0).hermitian_part()).unwrap().vectors
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_of_the_opposite_direction_is_negated(s in shape(), d in direction()) {
        let a = s.projection_interval(&d).unwrap();
        let b = s.projection_interval(&d.neg()).unwrap();
        prop_assert!((b.lo + a.hi).abs() <= 1e-12 && (b.hi + a.lo).abs() <= 1e-12);
    }

    #[test]
    fn projection_of_a_translated_shape_is_shifted(s in shape(), d in direction(), dx in -3.0..3.0f64, dy in -3.0..3.0f64) {
        let shift = Point::new2(dx, dy);
        let a = s.projection_interval(&d).unwrap();
        let b = s.translated(&shift).projection_interval(&d).unwrap();
        let e = a.shifted(d.dot(&shift));
        prop_assert!((b.lo - e.lo).abs() <= 1e-12 && (b.hi - e.hi).abs() <= 1e-12);
    }

    #[test]
    fn quadrature_points_lie_inside(s in shape(), pts in 4usize..40) {
        for (p, w) in s.quadrature_points(pts).unwrap() {
            prop_assert!(w > 0.0);
            prop_assert!(s.contains(&p).unwrap());
        }
    }

    #[test]
    fn strip_at_the_pulse_instant_ignores_t0_and_c(
        s in shape(), d in direction(), x in -4.0..4.0f64, y in -4.0..4.0f64, t0 in 0.0..10.0f64, c in 0.2..3.0f64,
    ) {
        let proj = s.projection_interval(&d).unwrap();
        let p = Point::new2(x, y);
        prop_assert_eq!(in_strip(&p, &d, &proj, t0, t0, c), in_strip(&p, &d, &proj, 1.0, 1.0, 1.0));
    }

    #[test]
    fn toeplitz_diagonals_are_constant(n in 2usize..20, vals in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 40)) {
        let grid = FrequencyGrid::new(0.0, 3.0, n).unwrap();
        let z = |k: usize| Complex64::new(vals[k % 40].0, vals[(k * 7 + 3) % 40].1);
        let band = FarFieldBand {
            direction: Direction::from_angle_deg(0.0),
            grid,
            plus: (0..n).map(z).collect(),
            minus: (0..n - 1).map(|k| z(k + n)).collect(),
        };
        let f = assemble_toeplitz(&band).unwrap().entries;
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                prop_assert_eq!(f[(r + 1, c + 1)], f[(r, c)]);
            }
        }
        let dw = grid.delta();
        for k in 0..n {
            prop_assert_eq!(f[(k, 0)], band.plus[k] * dw);
        }
        for k in 1..n {
            prop_assert_eq!(f[(0, k)], band.minus[k - 1] * dw);
        }
    }

    #[test]
    fn unitary_matrices_have_unit_norm(seed in 0u64..1000, n in 2usize..16) {
        let u = random_unitary(seed, n);
        prop_assert!((spectral_norm(&u).unwrap() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn eigen_invariants(a in complex_matrix(12)) {
        let h = a.hermitian_part();
        let eig = hermitian_eigen(&h).unwrap();
        prop_assert!(eig.unitarity_defect() <= 1e-10);
        prop_assert!(eig.max_residual(&h) <= 1e-10 * h.frobenius_norm());
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn abs_squared_is_the_square(a in complex_matrix(10)) {
        let h = a.hermitian_part();
        let abs = spectral_abs(&h).unwrap();
        let scale = h.frobenius_norm().powi(2);
        prop_assert!(abs.matmul(&abs).sub(&h.matmul(&h)).frobenius_norm() <= 1e-9 * scale);
    }

    #[test]
    fn sharp_trace_dominates_its_parts(a in complex_matrix(10)) {
        let s = sharpen(&a, Direction::from_angle_deg(0.0), FrequencyGrid::new(0.0, 3.0, 10).unwrap()).unwrap();
        let t = s.matrix.trace().re;
        prop_assert!(t + 1e-12 >= a.hermitian_part().trace().re.abs());
        prop_assert!(t + 1e-12 >= a.skew_hermitian_part().trace().re.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sharp_spectrum_is_invariant_under_unitary_similarity(a in complex_matrix(16), seed in 0u64..100) {
        let u = random_unitary(seed, 16);
        let b = u.matmul(&a).matmul(&u.adjoint());
        let grid = FrequencyGrid::new(0.0, 3.0, 16).unwrap();
        let dir = Direction::from_angle_deg(0.0);
        let la = sharpen(&a, dir, grid).unwrap().eig.values;
        let lb = sharpen(&b, dir, grid).unwrap().eig.values;
        for (x, y) in la.iter().zip(&lb) {
            prop_assert!((x - y).abs() <= 1e-8 * la[0].max(1.0));
        }
    }

    #[test]
    fn bands_are_conjugate_symmetric(
        x in -1.0..1.0f64, y in -1.0..1.0f64, r in 0.2..1.0f64, t in 0.0..8.0f64, d in direction(),
    ) {
        let scene = SourceScene::stationary(Shape::disk(Point::new2(x, y), r), SourceProfile::Polynomial2d, vec![t], 1.0);
        let band = farfield_band(&scene, 0, &d, &FrequencyGrid::default(), 60).unwrap();
        let scale = band.plus.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (m, p) in band.minus.iter().zip(&band.plus) {
            prop_assert!((m - p.conj()).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn picard_sum_grows_as_the_cutoff_drops(
        deg in 0.0..360.0f64, t0 in 1.0..6.0f64, x in -3.0..3.0f64, y in -3.0..3.0f64, eta in 0.0..8.0f64,
    ) {
        let d = Direction::from_angle_deg(deg);
        let sharp = common::sharp_for(&common::disk_scene(t0), d, 60);
        let phi = test_vector(&Point::new2(x, y), eta, &d, 1.0, &sharp.grid);
        let mut prev = 0.0;
        for cutoff in [0.5, 1e-2, 1e-4, 1e-8, 1e-12, 1e-14, 0.0] {
            let v = picard_indicator(&sharp, &phi, cutoff).unwrap();
            prop_assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn w_is_symmetric_in_the_pair(deg in 0.0..360.0f64, x in -3.0..3.0f64, y in -3.0..3.0f64, eta in 0.0..8.0f64) {
        let d = Direction::from_angle_deg(deg);
        let scene = common::disk_scene(4.0);
        let a = common::sharp_for(&scene, d, 60);
        let b = common::sharp_for(&scene, d.neg(), 60);
        let p = Point::new2(x, y);
        let w1 = w_indicator(&a, &b, &p, eta, 1.0, 1e-14).unwrap();
        let w2 = w_indicator(&b, &a, &p, eta, 1.0, 1e-14).unwrap();
        prop_assert_eq!(w1.to_bits(), w2.to_bits());
    }

    #[test]
    fn normalization_is_idempotent(deg in 0.0..360.0f64, eta in 0.0..8.0f64) {
        let d = Direction::from_angle_deg(deg);
        let kernel = PicardKernel::new(&common::sharp_for(&common::disk_scene(4.0), d, 60), 1e-14).unwrap();
        let grid = SamplingGrid::cube(2, -6.0, 6.0, 15).unwrap();
        let once = normalize(&scan_field(&[kernel], &grid, eta, 1.0, Combine::SingleDirection).unwrap());
        let twice = normalize(&once);
        prop_assert_eq!(&once.values, &twice.values);
        prop_assert!(once.max() == 1.0 || once.max() == 0.0);
    }

    #[test]
    fn noise_is_a_pure_function_of_its_inputs(seed in any::<u64>(), stream in any::<u64>(), n in 1usize..12) {
        let spec = NoiseSpec { level: 0.05, seed, distribution: NoiseDistribution::Uniform };
        let a = noise_matrix(n, &spec, stream);
        let b = noise_matrix(n, &spec, stream);
        let bits = |m: &CMatrix| m.as_slice().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        prop_assert!(a.as_slice().iter().all(|z| z.re.abs() <= 1.0 && z.im.abs() <= 1.0));
    }
}
