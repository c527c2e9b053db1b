//! Invariant suite over the bundled fixtures.

use std::f64::consts::PI;

use nlscat::io::json_num;
use nlscat::jost::{classify, scattering_coefficients};
use nlscat::nls::{evolve_nls, NlsConfig};
use nlscat::potential::{Classification, Potential, PotentialSpec};
use nlscat::propagator::free_kernel;
use nlscat::scattering::{wave_operator, Sign};
use nlscat::spectral::{norm_dx, SpectralData};
use nlscat::{MomentumGrid, C64};
use serde_json::Value;

use crate::commands::{reference_packet, spectral_data};
use crate::{CliError, Common};

const FIXTURES: [(&str, &str, Classification); 5] = [
    ("zero", include_str!("../../../fixtures/zero.json"), Classification::Exceptional),
    ("poschl_teller_1", include_str!("../../../fixtures/poschl_teller_1.json"), Classification::Exceptional),
    ("square_well_generic", include_str!("../../../fixtures/square_well_generic.json"), Classification::Generic),
    ("square_well_resonant", include_str!("../../../fixtures/square_well_resonant.json"), Classification::Exceptional),
    ("gaussian_barrier", include_str!("../../../fixtures/gaussian_barrier.json"), Classification::Generic),
];

struct Check {
    name: &'static str,
    fixture: String,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.value.abs() <= self.tolerance
    }

    fn to_json(&self) -> Value {
        serde_json::json!({
            "name": self.name,
            "fixture": self.fixture,
            "value": json_num(self.value),
            "tolerance": json_num(self.tolerance),
            "pass": self.pass(),
        })
    }
}

/// Deterministic smooth test fields normalized in `L²`.
fn test_fields(sd: &SpectralData) -> Vec<Vec<C64>> {
    [(-2.0, 1.0, 0.7), (0.5, 1.5, -1.2), (3.0, 1.2, 0.0), (-0.5, 2.0, 1.4)]
        .iter()
        .map(|&(c, w, k)| {
            let u: Vec<C64> = sd
                .grid()
                .points()
                .iter()
                .map(|&x| C64::from_polar((-((x - c) / w).powi(2)).exp(), k * x))
                .collect();
            let n = norm_dx(&u, sd.grid());
            u.iter().map(|z| z / n).collect()
        })
        .collect()
}

fn fixture_checks(name: &str, v: &Potential, want: Classification, c: &Common, out: &mut Vec<Check>) -> Result<(), CliError> {
    let f = || name.to_string();
    let kg = MomentumGrid::from_range(0.05, 8.0, 64)?;
    out.push(Check {
        name: "unitarity",
        fixture: f(),
        value: scattering_coefficients(v, &kg)?.max_unitarity_defect(),
        tolerance: 1e-8,
    });
    let verdict = classify(v)?.classification;
    let refined = classify(&v.resampled(&v.grid().refined()))?.classification;
    out.push(Check {
        name: "classification",
        fixture: f(),
        value: if verdict == want && refined == want { 0.0 } else { 1.0 },
        tolerance: 0.0,
    });
    let sd = spectral_data(v, c)?;
    let mut parseval = 0.0f64;
    for phi in test_fields(&sd) {
        let cont = sd.norm_k(&sd.forward(&phi)?).powi(2);
        let bound: f64 = sd.bound_coefficients(&phi)?.iter().map(|z| z.norm_sqr()).sum();
        parseval = parseval.max((cont + bound - 1.0).abs());
    }
    out.push(Check {
        name: "parseval",
        fixture: f(),
        value: parseval,
        tolerance: 1e-6,
    });
    if sd.bound_states().is_empty() {
        let phi: Vec<C64> = sd
            .grid()
            .points()
            .iter()
            .map(|&x| C64::from_polar((-x * x / 4.0).exp(), 3.0 * x))
            .collect();
        let n0 = sd.norm_k(&nlscat::numerics::fourier_on(&phi, sd.grid(), sd.kgrid()));
        let w = wave_operator(&phi, Sign::Minus, &sd)?;
        out.push(Check {
            name: "wave_operator_isometry",
            fixture: f(),
            value: norm_dx(&w, sd.grid()) / n0 - 1.0,
            tolerance: 1e-6,
        });
    }
    Ok(())
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let mut checks = Vec::new();
    for (name, text, want) in FIXTURES {
        let v = PotentialSpec::from_json_str(text, None)?.build()?;
        fixture_checks(name, &v, want, c, &mut checks)?;
        if name == "poschl_teller_1" {
            let sd = spectral_data(&v, c)?;
            let beta = sd.bound_states().iter().map(|b| b.beta).collect::<Vec<_>>();
            checks.push(Check {
                name: "bound_state_beta",
                fixture: name.into(),
                value: if beta.len() == 1 { beta[0] - 1.0 } else { f64::INFINITY },
                tolerance: 1e-6,
            });
        }
    }
    let mut kern = 0.0f64;
    for t in [0.1, 1.0, 10.0] {
        for (x, y) in [(0.0, 0.0), (2.0, -3.0)] {
            let want = 1.0 / (4.0 * PI * t).sqrt();
            kern = kern.max((free_kernel(t, x, y)?.norm() - want).abs() / want);
        }
    }
    checks.push(Check {
        name: "free_kernel_modulus",
        fixture: "zero".into(),
        value: kern,
        tolerance: 1e-14,
    });
    let rep = PotentialSpec::from_json_str(include_str!("../../../fixtures/pt_repulsive.json"), None)?.build()?;
    let sd = SpectralData::with_kgrid(&rep, MomentumGrid::dual_truncated(rep.grid(), 8.0))?;
    let traj = evolve_nls(&reference_packet(&sd)?, &NlsConfig::new(0.1, 5.0, 1e-3, 1.0)?, &sd)?;
    checks.push(Check {
        name: "nls_mass_drift",
        fixture: "pt_repulsive".into(),
        value: traj.mass_drift(),
        tolerance: 1e-8,
    });
    checks.push(Check {
        name: "nls_energy_drift",
        fixture: "pt_repulsive".into(),
        value: traj.energy_drift(),
        tolerance: 1e-6,
    });
    let all = checks.iter().all(Check::pass);
    let js = serde_json::json!({
        "pass": all,
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&js).expect("serializable") + "\n";
    std::fs::create_dir_all(&c.out).map_err(|e| CliError::Config(format!("{}: {e}", c.out.display())))?;
    let path = c.out.join("verify.json");
    std::fs::write(&path, &text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    println!("{}", path.display());
    for ch in &checks {
        println!(
            "{} {} [{}]: {:.3e} (tol {:.0e})",
            if ch.pass() { "PASS" } else { "FAIL" },
            ch.name,
            ch.fixture,
            ch.value,
            ch.tolerance
        );
    }
    if all {
        Ok(())
    } else {
        Err(CliError::Failed("one or more invariants failed".into()))
    }
}
