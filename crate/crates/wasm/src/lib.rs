//! Browser bindings for the demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain function returning
//! `Result<String, String>` with a JSON payload, so the logic is testable
//! natively and the page only needs `JSON.parse`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use gcf_core::grandstats::{grand_partition, particle_distribution, GrandCanonicalEnsemble, ScalarSequence};
use gcf_core::potentials::finite_weights;
use gcf_core::symbolic::table_len;
use gcf_core::thermo::constant_log_lambda;
use gcf_core::transfer::{assemble_grand, power_iterate};
use gcf_core::{CylinderFunction, PotentialFamily, SolverConfig, Word};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const EPS: f64 = 1e-12;
const MAX_ROWS: usize = 1 << 12;
const MAX_POINTS: usize = 400;

/// `A_N = N·E` for a per-symbol energy table, or `A_N ≡ c` when `energy` has one entry.
fn family(r: usize, energy: &[f64]) -> Result<PotentialFamily, String> {
    match energy {
        [c] => Ok(PotentialFamily::constant(*c).with_bounds(0.0, 0.0).with_delta(c.max(0.0))),
        _ if energy.len() == r => {
            if energy.iter().any(|&e| !(e >= 0.0)) {
                return Err("energies must be non-negative".into());
            }
            let table = CylinderFunction::new(r, 1, energy.to_vec()).map_err(|e| e.to_string())?;
            // K' = 0 with δ = 0 certifies the particle-number tail whenever E ≥ 0.
            Ok(PotentialFamily::per_particle(table).with_bounds(0.0, 0.0).with_delta(0.0))
        }
        _ => Err(format!("energy needs 1 or r = {r} entries, got {}", energy.len())),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Spectrum {
    lambda: f64,
    log_lambda: f64,
    n_max: usize,
    words: Vec<String>,
    h: Vec<f64>,
    nu: Vec<f64>,
    iterations: usize,
}

pub fn spectrum(r: usize, depth: usize, beta: f64, mu: f64, energy: &[f64]) -> Result<String, String> {
    if depth == 0 || r < 2 || table_len(r, depth) > MAX_ROWS {
        return Err(format!("need r >= 2, depth >= 1 and r^depth <= {MAX_ROWS}"));
    }
    let f = family(r, energy)?;
    let ws = finite_weights(&f, r, beta, mu, depth, EPS).map_err(|e| e.to_string())?;
    let t = assemble_grand(&ws).map_err(|e| e.to_string())?;
    let sol = power_iterate(&t, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let words = (0..t.rows())
        .map(|i| Word::from_index(i, depth, r).symbols().iter().map(|s| s.to_string()).collect())
        .collect();
    to_json(&Spectrum {
        lambda: sol.lambda,
        log_lambda: sol.log_lambda(),
        n_max: ws.n_max,
        words,
        h: sol.h.values().to_vec(),
        nu: sol.nu.weights().to_vec(),
        iterations: sol.iterations(),
    })
}

#[derive(Serialize)]
struct Curve {
    beta: Vec<f64>,
    log_lambda: Vec<f64>,
    /// Present only for constant families.
    closed_form: Option<Vec<f64>>,
}

/// `log λ(β)` on `points` evenly spaced values of `β` in `[beta_min, beta_max]`.
pub fn pressure_curve(
    r: usize,
    depth: usize,
    mu: f64,
    energy: &[f64],
    beta_min: f64,
    beta_max: f64,
    points: usize,
) -> Result<String, String> {
    if !(0.0 < beta_min && beta_min < beta_max) || !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("need 0 < beta_min < beta_max and 2..={MAX_POINTS} points"));
    }
    if depth == 0 || r < 2 || table_len(r, depth) > MAX_ROWS {
        return Err(format!("need r >= 2, depth >= 1 and r^depth <= {MAX_ROWS}"));
    }
    let f = family(r, energy)?;
    let beta: Vec<f64> = (0..points)
        .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (points - 1) as f64)
        .collect();
    let log_lambda = beta
        .iter()
        .map(|&b| {
            let ws = finite_weights(&f, r, b, mu, depth, EPS)?;
            Ok(power_iterate(&assemble_grand(&ws)?, &SolverConfig::default())?.log_lambda())
        })
        .collect::<gcf_core::Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?;
    let closed_form = match energy {
        [c] => Some(beta.iter().map(|&b| constant_log_lambda(r, *c, b, mu)).collect()),
        _ => None,
    };
    to_json(&Curve {
        beta,
        log_lambda,
        closed_form,
    })
}

#[derive(Serialize)]
struct Distribution {
    z: f64,
    mean_n: f64,
    p: Vec<f64>,
}

/// `P_N` for the scalar ensemble `A_N = N·energy`.
pub fn particles(energy: f64, beta: f64, mu: f64) -> Result<String, String> {
    let e = GrandCanonicalEnsemble::new(ScalarSequence::per_particle(energy), beta, mu, EPS)
        .map_err(|e| e.to_string())?;
    let z = grand_partition(&e).map_err(|e| e.to_string())?.z;
    let d = particle_distribution(&e).map_err(|e| e.to_string())?;
    to_json(&Distribution {
        z,
        mean_n: d.mean_n,
        p: d.p,
    })
}

#[wasm_bindgen(js_name = spectrum)]
pub fn spectrum_js(r: usize, depth: usize, beta: f64, mu: f64, energy: Vec<f64>) -> Result<String, JsError> {
    spectrum(r, depth, beta, mu, &energy).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pressureCurve)]
pub fn pressure_curve_js(
    r: usize,
    depth: usize,
    mu: f64,
    energy: Vec<f64>,
    beta_min: f64,
    beta_max: f64,
    points: usize,
) -> Result<String, JsError> {
    pressure_curve(r, depth, mu, &energy, beta_min, beta_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = particles)]
pub fn particles_js(energy: f64, beta: f64, mu: f64) -> Result<String, JsError> {
    particles(energy, beta, mu).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn zero_family_spectrum() {
        let v = parse(spectrum(2, 3, 1.0, -1.0, &[0.0]));
        let lambda = v["lambda"].as_f64().unwrap();
        assert!((lambda - 2.0 / (1.0 - (-1.0f64).exp())).abs() < 1e-10);
        assert_eq!(v["words"].as_array().unwrap().len(), 8);
        assert_eq!(v["words"][5], "101");
        let mass: f64 = v["nu"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curve_tracks_closed_form() {
        let v = parse(pressure_curve(3, 2, -0.7, &[0.4], 0.2, 3.0, 15));
        let num = v["log_lambda"].as_array().unwrap();
        let closed = v["closed_form"].as_array().unwrap();
        for (a, b) in num.iter().zip(closed) {
            assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-9);
        }
        let v = parse(pressure_curve(2, 2, -1.0, &[0.0, 0.5], 0.5, 2.0, 5));
        assert!(v["closed_form"].is_null());
        let ll: Vec<f64> = v["log_lambda"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!(ll.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn particle_distribution_is_geometric() {
        let v = parse(particles(1.0, 1.0, -1.0));
        let q = (-2f64).exp();
        assert!((v["z"].as_f64().unwrap() - 1.0 / (1.0 - q)).abs() < 1e-10);
        let p = v["p"].as_array().unwrap();
        assert!((p[1].as_f64().unwrap() / p[0].as_f64().unwrap() - q).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(spectrum(2, 0, 1.0, -1.0, &[0.0]).is_err());
        assert!(spectrum(2, 2, 1.0, 0.5, &[0.0]).is_err());
        assert!(spectrum(3, 2, 1.0, -1.0, &[0.0, 1.0]).is_err());
        assert!(pressure_curve(2, 2, -1.0, &[0.0], 2.0, 1.0, 5).is_err());
        assert!(particles(1.0, -1.0, -1.0).is_err());
    }
}
