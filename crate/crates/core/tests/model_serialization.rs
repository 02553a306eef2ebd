//! Model documents must round-trip losslessly through save/load.

use qrh_core::kernels::{DecaySet, KernelCoeffs};
use qrh_core::lob::StateGrid;
use qrh_core::qrh1::{Qrh1Model, Qrh1Params};
use qrh_core::qrh2::{Qrh2Model, Qrh2Params};
use qrh_core::rng::Rng;

#[test]
fn qrh1_model_roundtrips_bit_exact() {
    let mut rng = Rng::new(12345);
    let decays = DecaySet::new(vec![60.0, 1500.0, 5500.0]).unwrap();
    let mut params = Qrh1Params::zeros3(decays, 9);
    for l in 0..3 {
        for s in 0..10 {
            params.mu[l][s] = rng.uniform() * 1.7;
        }
    }
    let mut coeffs = KernelCoeffs::zeros(3, 3);
    for i in 0..coeffs.flat().len() {
        // Awkward values exercise the float encoding.
        coeffs.flat_mut()[i] = rng.uniform() / 3.0 + 1e-17;
    }
    params.coeffs = coeffs;
    let model = Qrh1Model {
        kind: "qrh1".into(),
        params,
        aes: Some(6.34),
        asset: Some("SAMPLE".into()),
        window: None,
        missing_mu: vec![(1, 0), (2, 0)],
    };
    let text = serde_json::to_string_pretty(&model).unwrap();
    let back: Qrh1Model = serde_json::from_str(&text).unwrap();
    assert_eq!(model, back);
    // Bit-exact: re-serialization reproduces the same bytes.
    assert_eq!(text, serde_json::to_string_pretty(&back).unwrap());
}

#[test]
fn qrh2_model_roundtrips_bit_exact() {
    let mut rng = Rng::new(54321);
    let decays = DecaySet::new(vec![0.8, 4.0]).unwrap();
    let mut params = Qrh2Params::flat(decays, 8, 25);
    for l in 0..8 {
        params.mu[l] = rng.uniform();
        for s in 0..25 {
            params.f[l][s] = 0.1 + rng.uniform() * 3.0;
        }
    }
    for i in 0..params.coeffs.flat().len() {
        params.coeffs.flat_mut()[i] = rng.uniform() - 0.5;
    }
    let grid = StateGrid::new(
        5,
        vec![80.0, 165.0, 258.0, 386.0],
        vec![79.5, 160.0, 250.0, 380.0],
    )
    .unwrap();
    let model = Qrh2Model {
        kind: "qrh2-ls".into(),
        params,
        grid,
        aes: Some(6.34),
        asset: None,
        post_up_redraw: vec![(1, 2, 0.5), (2, 1, 0.5)],
        post_down_redraw: vec![(2, 2, 1.0)],
    };
    let text = serde_json::to_string_pretty(&model).unwrap();
    let back: Qrh2Model = serde_json::from_str(&text).unwrap();
    assert_eq!(model, back);
    assert_eq!(text, serde_json::to_string_pretty(&back).unwrap());
}
