use ridgeless::quadrature::*;

#[test]
fn weights_sum_to_two() {
    let (nodes, weights) = legendre_nodes(10);
    assert!((weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    assert!(nodes.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn exact_for_high_degree_polynomials() {
    // A 10-point rule integrates degree 19 exactly.
    let (nodes, weights) = legendre_nodes(10);
    let v: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x.powi(18)).sum();
    assert!((v - 2.0 / 19.0).abs() < 1e-14);
}

#[test]
fn handles_kinks_with_adaptivity() {
    let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-13);
    let exact = 0.5 * 0.3 * 0.3 + 0.5 * 0.7 * 0.7;
    assert!((v - exact).abs() < 1e-12);
}

#[test]
fn exponential_integral() {
    let v = integrate(|x: f64| (-x).exp(), 0.0, 10.0, 1e-13);
    assert!((v - (1.0 - (-10.0f64).exp())).abs() < 1e-12);
}
