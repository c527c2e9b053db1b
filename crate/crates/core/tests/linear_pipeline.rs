use nlscat::jost::{classify, scattering_coefficients};
use nlscat::potential::{Classification, PotentialSpec};
use nlscat::propagator::{evolve_linear, Mode};
use nlscat::spectral::{bound_states_csv, norm_dx, SpectralData};
use nlscat::{MomentumGrid, C64};

const PT1: &str = r#"{"family": "poschl_teller", "params": {"s": 1.0}, "grid": {"x_max": 30.0, "n": 1024}}"#;

#[test]
fn json_description_to_coefficients_csv() {
    let v = PotentialSpec::from_json_str(PT1, None).unwrap().build().unwrap();
    let kg = MomentumGrid::from_range(0.1, 4.0, 16).unwrap();
    let sc = scattering_coefficients(&v, &kg).unwrap();
    assert_eq!(sc.classification, Classification::Exceptional);
    let csv = sc.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,ReT,ImT,ReR1,ImR1,ReR2,ImR2,unitarity_defect"));
    for line in lines {
        let defect: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(defect < 1e-8, "{line}");
    }
    assert!(csv.ends_with('\n') && !csv.contains('\r'));
}

#[test]
fn zero_potential_is_exceptional_with_unit_limit() {
    let v = PotentialSpec::from_json_str(r#"{"family": "zero"}"#, None).unwrap().build().unwrap();
    let r = classify(&v).unwrap();
    assert_eq!(r.classification, Classification::Exceptional);
    assert_eq!(r.a, Some(1.0));
}

#[test]
fn bound_state_evolves_by_a_phase_and_the_rest_disperses() {
    let v = PotentialSpec::from_json_str(PT1, None).unwrap().build().unwrap();
    let sd = SpectralData::new(&v).unwrap();
    assert_eq!(sd.bound_states().len(), 1);
    assert!(bound_states_csv(sd.bound_states()).starts_with("beta,norm_residual,eigen_residual\n"));
    let b = &sd.bound_states()[0];
    let t = 3.0;
    let out = evolve_linear(&b.psi, t, &sd, Mode::Full).unwrap();
    let expect: Vec<C64> = b.psi.iter().map(|z| z * C64::from_polar(1.0, b.beta * b.beta * t)).collect();
    let d: Vec<C64> = out.iter().zip(&expect).map(|(a, e)| a - e).collect();
    assert!(norm_dx(&d, sd.grid()) < 1e-8);
    let cont = evolve_linear(&b.psi, t, &sd, Mode::ContinuousOnly).unwrap();
    assert!(norm_dx(&cont, sd.grid()) < 1e-6);
}

#[test]
fn unknown_family_is_a_validation_error() {
    let e = PotentialSpec::from_json_str(r#"{"family": "morse"}"#, None).unwrap_err();
    assert!(matches!(e, nlscat::Error::Validation(_)));
}
