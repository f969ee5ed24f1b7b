use sde_core::rng::{gaussian_matrix, random_orthogonal};
use sde_core::spectral::{partition, partition_with, spectral_report, svd, NoiseEstimator};
use sde_core::{FeatureMatrix, RngState};

/// Unit Gaussian noise plus `rank` orthogonal directions of singular value `s`.
fn planted(rng: &mut RngState, m: usize, n: usize, rank: usize, s: f64) -> FeatureMatrix {
    let mut f = gaussian_matrix(rng, m, n, 1.0).unwrap();
    let u = random_orthogonal::<f64>(rng, m).unwrap().leading_columns(rank);
    let v = random_orthogonal::<f64>(rng, n).unwrap().leading_columns(rank);
    f.axpy(s, &u.matmul_t(&v).unwrap()).unwrap();
    f
}

#[test]
fn pure_noise_has_no_weak_block() {
    let trials = 40;
    let mut clean = 0;
    for seed in 0..trials {
        let f = gaussian_matrix(&mut RngState::new(seed), 100, 400, 1.0).unwrap();
        let dec = svd(&f).unwrap();
        let [s, w, n] = partition(&dec, 100, 400).unwrap().counts();
        if w == 0 && s <= 1 && n + 1 >= dec.rank() {
            clean += 1;
        }
    }
    assert!(clean * 10 >= trials * 9, "{clean}/{trials}");
}

#[test]
fn planted_directions_leave_the_noise_block() {
    for seed in 0..10 {
        let f = planted(&mut RngState::new(seed), 100, 400, 5, 100.0);
        let dec = svd(&f).unwrap();
        assert_eq!(partition(&dec, 100, 400).unwrap().noise().start, 5, "seed {seed}");
        // the support-centre estimate sits low, so extra noise values may leave N too
        let literal = partition_with(&dec, 100, 400, NoiseEstimator::SupportCenter).unwrap();
        assert!(literal.noise().start >= 5, "seed {seed}");
    }
}

#[test]
fn strong_block_carries_the_energy_of_a_strong_plant() {
    let f = planted(&mut RngState::new(8), 100, 400, 5, 300.0);
    let dec = svd(&f).unwrap();
    let r = spectral_report(dec.sigma(), &partition(&dec, 100, 400).unwrap());
    assert!(r.energy_fractions[0] >= 0.85, "{:?}", r.energy_fractions);
    assert!(r.proportions[0] <= 0.2);
}

#[test]
fn moderate_plant_carries_about_half_the_energy() {
    // 5·100² of signal against ≈ m·n = 40 000 of noise energy
    let f = planted(&mut RngState::new(8), 100, 400, 5, 100.0);
    let dec = svd(&f).unwrap();
    let r = spectral_report(dec.sigma(), &partition(&dec, 100, 400).unwrap());
    let signal = r.energy_fractions[0] + r.energy_fractions[1];
    assert!((signal - 50_000.0 / 90_000.0).abs() < 0.05, "{signal}");
}
