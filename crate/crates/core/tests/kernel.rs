use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use ridgeless::kernel::*;
use ridgeless::{quadrature, Error};

fn base() -> KernelSpec {
    KernelSpec::baseline()
}

#[test]
fn diagonal_is_variance() {
    assert_eq!(base().eval(3.0, 3.0), 1.0);
    let k = KernelSpec::matern(2.5, 4.0, 2.0).unwrap();
    assert_eq!(k.eval(7.5, 7.5), 4.0);
}

#[test]
fn exponential_kernel_at_one_lengthscale() {
    assert_abs_diff_eq!(base().eval(0.0, 10.0), (-1.0f64).exp(), epsilon = 1e-15);
}

#[test]
fn matern_three_halves_at_one_lengthscale() {
    // (1 + √3) e^{-√3}, 30-digit oracle
    let k = KernelSpec::matern(1.5, 10.0, 1.0).unwrap();
    assert_abs_diff_eq!(k.eval(0.0, 10.0), 0.483357724596507650595, epsilon = 1e-15);
    let k = KernelSpec::matern(2.5, 10.0, 1.0).unwrap();
    assert_abs_diff_eq!(k.eval(10.0, 0.0), 0.523994108831820310593, epsilon = 1e-15);
}

#[test]
fn rejects_bad_parameters() {
    assert!(KernelSpec::matern(1.0, 10.0, 1.0).is_err());
    assert!(KernelSpec::matern(0.5, 0.0, 1.0).is_err());
    assert!(KernelSpec::matern(0.5, 1.0, -1.0).is_err());
    assert!(KernelSpec::matern(0.5, f64::NAN, 1.0).is_err());
}

#[test]
fn integral_examples() {
    let k = base();
    assert_eq!(k.integral(0.0, 5.0).unwrap(), 0.0);
    assert_abs_diff_eq!(k.integral(10.0, 0.0).unwrap(), 6.321205588285576784, epsilon = 1e-13);
    assert_abs_diff_eq!(k.integral(20.0, 10.0).unwrap(), 12.64241117657115357, epsilon = 1e-13);
    assert!(matches!(k.integral(-1.0, 0.0), Err(Error::Domain(_))));
}

#[test]
fn quadrature_integrals_match_high_precision_oracle() {
    let k = KernelSpec::matern(1.5, 10.0, 1.0).unwrap();
    assert_abs_diff_eq!(k.integral(40.0, 20.0).unwrap(), 21.11909799147183648, epsilon = 1e-11);
    let k = KernelSpec::matern(2.5, 2.0, 1.0).unwrap();
    assert_abs_diff_eq!(k.integral(7.0, 3.0).unwrap(), 4.223530630119927166, epsilon = 1e-11);
}

#[test]
fn gram_examples() {
    let g = gram_matrix(&base(), &TrainingGrid::new(vec![0.0]).unwrap());
    assert_eq!(g.entries()[(0, 0)], 1.0);
    let g = gram_matrix(&base(), &TrainingGrid::new(vec![0.0, 10.0]).unwrap());
    let e = (-1.0f64).exp();
    assert_eq!(g.entries()[(0, 1)], e);
    assert_eq!(g.entries()[(1, 0)], e);
    assert_eq!(g.entries()[(1, 1)], 1.0);
}

#[test]
fn gram_on_integer_grid_is_psd() {
    let g = gram_matrix(&base(), &TrainingGrid::integers(40));
    assert_eq!(g.dim(), 41);
    let eig = g.entries().clone().symmetric_eigen();
    assert!(eig.eigenvalues.iter().all(|&l| l >= 0.0));
    assert!(g.jittered_cholesky(1.0).is_ok());
}

#[test]
fn integrated_row_examples() {
    let grid = TrainingGrid::integers(40);
    let row = integrated_kernel_row(&base(), 0.0, &grid).unwrap();
    assert!(row.iter().all(|&v| v == 0.0));
    let single = TrainingGrid::new(vec![0.0]).unwrap();
    let row = integrated_kernel_row(&base(), 10.0, &single).unwrap();
    assert_abs_diff_eq!(row[0], 6.321205588285577, epsilon = 1e-13);
    let row = integrated_kernel_row(&base(), 40.0, &grid).unwrap();
    assert!(row.iter().all(|&v| v > 0.0 && v <= 2.0 * 10.0));
    assert!(integrated_kernel_row(&base(), -0.1, &grid).is_err());
}

#[test]
fn norm_examples() {
    let g = gram_matrix(&base(), &TrainingGrid::new(vec![0.0]).unwrap());
    assert_eq!(rkhs_norm_sq(&g, &[0.0]).unwrap(), 0.0);
    assert_eq!(rkhs_norm_sq(&g, &[2.0]).unwrap(), 4.0);
    let g = gram_matrix(&base(), &TrainingGrid::new(vec![0.0, 10.0]).unwrap());
    assert_abs_diff_eq!(
        rkhs_norm_sq(&g, &[1.0, 1.0]).unwrap(),
        2.735758882342884643,
        epsilon = 1e-14
    );
    assert!(matches!(rkhs_norm_sq(&g, &[1.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn grid_validation() {
    assert!(TrainingGrid::new(vec![]).is_err());
    assert!(TrainingGrid::new(vec![0.0, 0.0]).is_err());
    assert!(TrainingGrid::new(vec![1.0, 0.5]).is_err());
    assert!(TrainingGrid::new(vec![-1.0, 0.5]).is_err());
    let g = TrainingGrid::equispaced(40.0, 41).unwrap();
    assert_eq!(g.points(), TrainingGrid::integers(40).points());
    assert_eq!(g.horizon(), 40.0);
    let a = TrainingGrid::uniform_iid(40.0, 20, 7).unwrap();
    let b = TrainingGrid::uniform_iid(40.0, 20, 7).unwrap();
    assert_eq!(a, b);
}

fn any_kernel() -> impl Strategy<Value = KernelSpec> {
    (prop_oneof![Just(0.5), Just(1.5), Just(2.5)], 0.5f64..30.0, 0.2f64..3.0)
        .prop_map(|(nu, l, s)| KernelSpec::matern(nu, l, s).unwrap())
}

proptest! {
    #[test]
    fn symmetric_and_bounded(k in any_kernel(), a in 0.0f64..80.0, b in 0.0f64..80.0) {
        let v = k.eval(a, b);
        prop_assert_eq!(v, k.eval(b, a));
        prop_assert!(v > 0.0 || (a - b).abs() / k.lengthscale() > 100.0);
        prop_assert!(v <= k.variance());
        if a != b {
            prop_assert!(v < k.variance());
        }
    }

    #[test]
    fn integrals_are_additive(k in any_kernel(), a in 0.0f64..40.0, w in 0.0f64..40.0, c in 0.0f64..80.0) {
        let b = a + w;
        let f = |t: f64| k.eval(t, c);
        // split at the kink of the kernel
        let piece = if c > a && c < b {
            quadrature::integrate(f, a, c, 1e-13) + quadrature::integrate(f, c, b, 1e-13)
        } else {
            quadrature::integrate(f, a, b, 1e-13)
        };
        let lhs = k.integral(a, c).unwrap() + piece;
        prop_assert!((lhs - k.integral(b, c).unwrap()).abs() < 1e-10 * (1.0 + k.variance() * k.lengthscale()));
    }

    #[test]
    fn closed_form_matches_quadrature(u in 0.0f64..80.0, c in 0.0f64..80.0, l in 0.5f64..30.0) {
        let k = KernelSpec::matern(0.5, l, 1.0).unwrap();
        let q = k.quadrature_integral(u, c, 1e-13);
        prop_assert!((k.integral(u, c).unwrap() - q).abs() < 1e-10);
    }

    #[test]
    fn random_grams_are_psd(k in any_kernel(), mut pts in proptest::collection::vec(0.0f64..80.0, 2..30)) {
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let grid = TrainingGrid::new(pts).unwrap();
        let g = gram_matrix(&k, &grid);
        let trace = g.entries().trace();
        let min = g.entries().clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-10 * trace);
    }
}
