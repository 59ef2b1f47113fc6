use mwion_core::classical::{classical_ionization_probability, MicrocanonicalSampler};
use mwion_core::quantum::DriveProtocol;

// Ten fields across the classical rise of n0 = 37 at 9.92 GHz, fixed seed.
#[test]
fn ionized_fraction_rises_with_field() {
    let sampler = MicrocanonicalSampler::new(37, 2024).unwrap();
    let fields: Vec<f64> = (0..10).map(|k| 260.0 + 25.0 * f64::from(k)).collect();
    let probs: Vec<f64> = fields
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let drive = DriveProtocol::from_lab(e, 9.92).unwrap();
            classical_ionization_probability(&sampler, &drive, 16, 91, k as u64).unwrap()
        })
        .collect();

    let n = fields.len() as f64;
    let (mx, my) = (fields.iter().sum::<f64>() / n, probs.iter().sum::<f64>() / n);
    let sxy: f64 = fields.iter().zip(&probs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = fields.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!(slope > 0.0, "slope {slope:e} over {probs:?}");
    assert!(probs[9] > probs[0], "{probs:?}");
}
