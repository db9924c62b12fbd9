//! Flat `section.key = value` run configuration.
//!
//! The grammar is deliberately tiny: one assignment per line, `#` comments,
//! unknown keys rejected by name, every numeric field validated against its
//! admissible range.

use crate::assembly::PenaltyParams;
use crate::constitutive::{ConductivityLaw, StressModel, ThetaCoeff};
use crate::error::{Error, Result};
use crate::stepper::RunConfig;
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Config {
    pub scenario: String,
    pub run: RunConfig,
    pub output_dir: String,
    pub write_vtk: bool,
    pub seed: u64,
    pub samples: usize,
}

const KNOWN_KEYS: &[&str] = &[
    "scenario.name",
    "mesh.level",
    "model.kind",
    "model.r",
    "model.consistency",
    "model.alpha",
    "model.beta",
    "model.gamma",
    "model.tau_y",
    "model.eps_reg",
    "conductivity.kind",
    "conductivity.value",
    "conductivity.c1",
    "conductivity.c2",
    "conductivity.cap",
    "time.t_final",
    "time.tau",
    "penalty.k",
    "penalty.r_star",
    "picard.tol",
    "picard.max",
    "picard.damping",
    "temperature.mass_lumping",
    "output.dir",
    "output.vtk",
    "checker.seed",
    "checker.samples",
];

struct KeyValues(HashMap<String, String>);

impl KeyValues {
    fn number(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) if v == "inf" => Ok(f64::INFINITY),
            Some(v) => v
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("{key}: bad number '{v}': {e}"))),
        }
    }

    fn integer(&self, key: &str, default: u64) -> Result<u64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<u64>()
                .map_err(|e| Error::InvalidInput(format!("{key}: bad integer '{v}': {e}"))),
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool> {
        match self.0.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::InvalidInput(format!(
                "{key}: expected true or false, got '{v}'"
            ))),
        }
    }

    fn string(&self, key: &str, default: &str) -> String {
        self.0
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    fn required(&self, key: &str) -> Result<&String> {
        self.0
            .get(key)
            .ok_or_else(|| Error::InvalidInput(format!("missing required key {key}")))
    }
}

pub fn parse_config_text(text: &str) -> Result<Config> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidInput(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidInput(format!("unknown key '{key}'")));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::InvalidInput(format!("duplicate key '{key}'")));
        }
    }
    let kv = KeyValues(map);

    let scenario = kv.required("scenario.name")?.clone();
    let mesh_level = kv.integer("mesh.level", 4)? as u32;
    if mesh_level > 7 {
        return Err(Error::InvalidInput(format!(
            "mesh.level must stay at desk scale (<= 7), got {mesh_level}"
        )));
    }

    let r = kv.number("model.r", 2.0)?;
    let consistency = kv.number("model.consistency", 2.0)?;
    let model = match kv.string("model.kind", "power_law").as_str() {
        "power_law" => StressModel::PowerLaw { r, consistency },
        "carreau_yasuda" => StressModel::CarreauYasuda {
            r,
            alpha: ThetaCoeff::Constant(kv.number("model.alpha", 1.0)?),
            beta: ThetaCoeff::Constant(kv.number("model.beta", 1.0)?),
            gamma: ThetaCoeff::Constant(kv.number("model.gamma", 1.0)?),
        },
        "hb_regularized" => StressModel::HbRegularized {
            r,
            tau_y: kv.number("model.tau_y", 1.0)?,
            consistency,
            eps_reg: kv.number("model.eps_reg", 0.1)?,
        },
        other => {
            return Err(Error::InvalidInput(format!(
                "model.kind: unknown model '{other}'"
            )))
        }
    };

    let conductivity = match kv.string("conductivity.kind", "constant").as_str() {
        "constant" => ConductivityLaw::Constant(kv.number("conductivity.value", 1.0)?),
        "bounded_affine_sqrt" => ConductivityLaw::BoundedAffineSqrt {
            c1: kv.number("conductivity.c1", 1.0)?,
            c2: kv.number("conductivity.c2", 1.0)?,
            cap: kv.number("conductivity.cap", 10.0)?,
        },
        other => {
            return Err(Error::InvalidInput(format!(
                "conductivity.kind: unknown law '{other}'"
            )))
        }
    };

    let t_final = kv
        .required("time.t_final")?
        .parse::<f64>()
        .map_err(|e| Error::InvalidInput(format!("time.t_final: {e}")))?;
    let tau = kv
        .required("time.tau")?
        .parse::<f64>()
        .map_err(|e| Error::InvalidInput(format!("time.tau: {e}")))?;

    let run = RunConfig {
        mesh_level,
        model,
        conductivity,
        t_final,
        tau,
        penalty: PenaltyParams {
            k: kv.number("penalty.k", f64::INFINITY)?,
            r_star: kv.number("penalty.r_star", 6.0)?,
        },
        picard_tol: kv.number("picard.tol", 1e-10)?,
        picard_max: kv.integer("picard.max", 100)? as usize,
        damping: kv.number("picard.damping", 1.0)?,
        mass_lumping: kv.boolean("temperature.mass_lumping", true)?,
    };
    run.validate()?;

    Ok(Config {
        scenario,
        run,
        output_dir: kv.string("output.dir", "out"),
        write_vtk: kv.boolean("output.vtk", false)?,
        seed: kv.integer("checker.seed", 42)?,
        samples: kv.integer("checker.samples", 10_000)? as usize,
    })
}

pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_text(
            "scenario.name = decay\ntime.t_final = 0.2\ntime.tau = 0.01\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, "decay");
        assert!(cfg.run.penalty.k.is_infinite());
        assert_eq!(cfg.run.damping, 1.0);
        assert_eq!(cfg.run.picard_max, 100);
        assert!(cfg.run.mass_lumping);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn r_star_bound_is_enforced() {
        // r = 1.5 gives r' = 3, so r_star must exceed max{6, 5} = 6
        let err = parse_config_text(
            "scenario.name = decay\ntime.t_final = 0.2\ntime.tau = 0.01\n\
             model.kind = power_law\nmodel.r = 1.5\npenalty.k = 100\npenalty.r_star = 4\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("r_star"), "{msg}");
        assert!(msg.contains('6'), "{msg}");
    }

    #[test]
    fn non_integer_step_count_is_rejected() {
        let err = parse_config_text(
            "scenario.name = decay\ntime.t_final = 1.05\ntime.tau = 0.1\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("t_final/tau"));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config_text("scenario.name = decay\nsolver.speed = 11\n").unwrap_err();
        assert!(err.to_string().contains("solver.speed"));
    }

    #[test]
    fn comments_blanks_and_duplicates() {
        let ok = parse_config_text(
            "# heading\nscenario.name = rest # trailing\n\ntime.t_final = 0.1\ntime.tau = 0.05\n",
        );
        assert!(ok.is_ok());
        let err = parse_config_text(
            "scenario.name = rest\nscenario.name = decay\ntime.t_final = 0.1\ntime.tau = 0.05\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn picard_tol_domain() {
        let err = parse_config_text(
            "scenario.name = rest\ntime.t_final = 0.1\ntime.tau = 0.05\npicard.tol = 2.0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("picard_tol"));
    }
}
