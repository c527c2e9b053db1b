use std::fs;
use std::path::Path;

use nlscat::io::{csv, json_num};
use nlscat::jost::{classify, scattering_coefficients_with, JostSolver};
use nlscat::nls::{conserved_quantities, evolve_nls, x_norm, NlsConfig};
use nlscat::potential::{build_potential, Family, Potential, PotentialSpec};
use nlscat::propagator::{decay_scan, evolve_linear, kernel_continuous, observation_window, Mode};
use nlscat::scattering::{recover_lambda, sl_matrix, smatrix_csv};
use nlscat::spectral::{bound_states_csv, default_k_max, SpectralData};
use nlscat::{MomentumGrid, SpatialGrid, C64};
use serde_json::Value;

use crate::{Cli, CliError, Command, Common};

/// X-norm of the reference packet used by the evolution commands.
pub const REFERENCE_X_NORM: f64 = 0.3;

pub fn load_potential(c: &Common) -> Result<Potential, CliError> {
    let spec = match &c.potential {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::Config(format!("{}: no such file", path.display())));
            }
            PotentialSpec::from_json_file(path)?
        }
        None => PotentialSpec {
            family: Family::Zero,
            grid: SpatialGrid::default_box(),
        },
    };
    let grid = if c.grid_n.is_some() || c.grid_xmax.is_some() {
        let x_max = c.grid_xmax.unwrap_or_else(|| spec.grid.x_max());
        let n = c.grid_n.unwrap_or_else(|| spec.grid.len());
        SpatialGrid::symmetric(x_max, n)?
    } else {
        spec.grid.clone()
    };
    Ok(build_potential(spec.family, &grid)?)
}

pub fn spectral_data(v: &Potential, c: &Common) -> Result<SpectralData, CliError> {
    let k_max = c.kmax.unwrap_or_else(|| default_k_max(v));
    if !(k_max > 0.0) {
        return Err(CliError::Config(format!("--kmax {k_max} must be positive")));
    }
    let mut kg = MomentumGrid::dual_truncated(v.grid(), k_max);
    if let Some(k_min) = c.kmin {
        kg = kg.punctured(k_min);
    }
    Ok(SpectralData::with_kgrid(v, kg)?)
}

/// `e^{-x²/2}` scaled to [`REFERENCE_X_NORM`].
pub fn reference_packet(sd: &SpectralData) -> Result<Vec<C64>, CliError> {
    let raw: Vec<C64> = sd.grid().points().iter().map(|&x| C64::new((-x * x / 2.0).exp(), 0.0)).collect();
    let n = x_norm(&raw, sd)?;
    Ok(raw.iter().map(|z| z * (REFERENCE_X_NORM / n)).collect())
}

fn write(out: &Path, name: &str, body: &str) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, body).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(())
}

fn write_json(out: &Path, name: &str, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    write(out, name, &text)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    if let Command::Verify = cli.command {
        return crate::verify::run(c);
    }
    let v = load_potential(c)?;
    match &cli.command {
        Command::Coeffs { nk } => {
            let k_lo = c.kmin.unwrap_or(0.05);
            let k_hi = c.kmax.unwrap_or(8.0);
            let kg = MomentumGrid::from_range(k_lo, k_hi, *nk)?;
            let ks: Vec<f64> = kg.positive().collect();
            let sc = scattering_coefficients_with(&JostSolver::new(&v), &v, &ks)?;
            write(&c.out, "coeffs.csv", &sc.to_csv())
        }
        Command::Classify => {
            let r = classify(&v)?;
            let js = serde_json::json!({
                "classification": r.classification.as_str(),
                "a": r.a.map(json_num).unwrap_or(Value::Null),
            });
            println!("{}", serde_json::to_string(&js).expect("serializable"));
            write_json(&c.out, "classify.json", &js)
        }
        Command::BoundStates => {
            let sd = spectral_data(&v, c)?;
            write(&c.out, "bound_states.csv", &bound_states_csv(sd.bound_states()))
        }
        Command::Kernel { t, dump } => {
            let sd = spectral_data(&v, c)?;
            let xs = observation_window(&sd);
            let slice = kernel_continuous(*t, &sd, &xs, &xs)?;
            if *dump {
                write(&c.out, "kernel.csv", &slice.to_csv())?;
            }
            let js = serde_json::json!({
                "t": json_num(*t),
                "points": xs.len(),
                "sup_abs": json_num(slice.sup_abs),
                "scaled_sup": json_num(t.sqrt() * slice.sup_abs),
            });
            println!("{}", serde_json::to_string(&js).expect("serializable"));
            write_json(&c.out, "kernel.json", &js)
        }
        Command::Decay { times } => {
            let sd = spectral_data(&v, c)?;
            let r = decay_scan(&sd, times)?;
            write(&c.out, "decay.csv", &r.to_csv())
        }
        Command::EvolveLinear { t, samples } => {
            if *samples == 0 || !t.is_finite() {
                return Err(CliError::Config("--samples must be positive and --t finite".into()));
            }
            let sd = spectral_data(&v, c)?;
            let phi = reference_packet(&sd)?;
            let cfg = NlsConfig::new(0.0, 5.0, 1.0, 1.0)?;
            let rows = (0..=*samples)
                .map(|j| {
                    let tj = t * j as f64 / *samples as f64;
                    let u = evolve_linear(&phi, tj, &sd, Mode::Full)?;
                    let (mass, energy) = conserved_quantities(&u, &cfg, &sd)?;
                    let sup = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
                    Ok([tj, mass, energy, sup])
                })
                .collect::<nlscat::Result<Vec<_>>>()?;
            write(&c.out, "evolution.csv", &csv(&["t", "mass", "energy", "sup_abs"], rows))
        }
        Command::EvolveNls { t, lambda, p, dt } => {
            let sd = spectral_data(&v, c)?;
            let phi = reference_packet(&sd)?;
            let cfg = NlsConfig::new(*lambda, *p, *dt, *t)?;
            let traj = evolve_nls(&phi, &cfg, &sd)?;
            if !traj.advisory_holds {
                eprintln!("warning: sup|u| left the small-amplitude regime");
            }
            write(&c.out, "evolution.csv", &traj.to_csv())
        }
        Command::Smatrix { k } => {
            let sd = spectral_data(&v, c)?;
            let samples = k.iter().map(|&k| sl_matrix(k, &sd)).collect::<nlscat::Result<Vec<_>>>()?;
            write(&c.out, "smatrix.csv", &smatrix_csv(&samples))
        }
        Command::RecoverLambda {
            true_lambda,
            eps,
            p,
            horizon,
            dt,
        } => {
            let sd = spectral_data(&v, c)?;
            let phi: Vec<C64> = sd.grid().points().iter().map(|&x| C64::new((-x * x / 2.0).exp(), 0.0)).collect();
            let cfg = NlsConfig::new(*true_lambda, *p, *dt, 1.0)?;
            let r = recover_lambda(&phi, &cfg, &sd, eps, *horizon)?;
            let mut js = r.to_json();
            js["true_lambda"] = json_num(*true_lambda);
            write_json(&c.out, "recover_lambda.json", &js)
        }
        Command::Verify => unreachable!("handled above"),
    }
}
