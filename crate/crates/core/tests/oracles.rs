//! Similarity exponents against widely tabulated values of 1/λ.

use guderley::collapse::{find_lambda_std, ShootOptions};
use guderley::phase_plane::Triple;

fn inv_lambda(gamma: f64, m: u32) -> f64 {
    1.0 / find_lambda_std(gamma, m, &ShootOptions::default())
        .unwrap()
        .lambda
}

#[test]
fn spherical_air() {
    assert!((inv_lambda(1.4, 2) - 0.717174).abs() < 2e-6);
}

#[test]
fn cylindrical_air() {
    assert!((inv_lambda(1.4, 1) - 0.835323).abs() < 2e-6);
}

#[test]
fn spherical_monatomic() {
    assert!((inv_lambda(5.0 / 3.0, 2) - 0.688377).abs() < 2e-6);
}

#[test]
fn gamma_three_cylindrical_passes_p8() {
    let r = find_lambda_std(3.0, 1, &ShootOptions::default()).unwrap();
    assert_eq!(r.triple, Triple::P8);
    assert!((r.lambda - 1.28921).abs() < 1e-4);
}
