//! Scenario files: a JSON object validated field by field.
//!
//! Violations are reported with a JSON pointer (`/rho`, `/beta0/3`).

use cenbar::{default_beta0, CensoringScale, Scenario};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

const FIELDS: [&str; 9] = [
    "model",
    "n",
    "p",
    "rho",
    "censoring_rate",
    "beta0",
    "reps",
    "master_seed",
    "censoring_scale",
];

fn violation(pointer: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("scenario {pointer}: {msg}"))
}

fn integer(obj: &Map<String, Value>, key: &str, min: u64) -> CliResult<Option<u64>> {
    let ptr = format!("/{key}");
    match obj.get(key) {
        None => Ok(None),
        Some(v) => {
            let k = v
                .as_u64()
                .ok_or_else(|| violation(&ptr, "expected a nonnegative integer"))?;
            if k < min {
                return Err(violation(&ptr, format!("must be at least {min}, got {k}")));
            }
            Ok(Some(k))
        }
    }
}

fn fraction(obj: &Map<String, Value>, key: &str) -> CliResult<Option<f64>> {
    let ptr = format!("/{key}");
    match obj.get(key) {
        None => Ok(None),
        Some(v) => {
            let x = v
                .as_f64()
                .ok_or_else(|| violation(&ptr, "expected a number"))?;
            if !(0.0..1.0).contains(&x) {
                return Err(violation(&ptr, format!("must be in [0, 1), got {x}")));
            }
            Ok(Some(x))
        }
    }
}

fn required(value: Option<u64>, key: &str) -> CliResult<u64> {
    value.ok_or_else(|| violation(&format!("/{key}"), "required field is missing"))
}

pub fn parse_scenario(text: &str) -> CliResult<Scenario> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Input(format!("scenario is not valid JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| violation("/", "expected a JSON object"))?;
    if let Some(key) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(violation(&format!("/{key}"), "unknown field"));
    }

    let model = required(integer(obj, "model", 1)?, "model")?;
    if model > 2 {
        return Err(violation("/model", format!("must be 1 or 2, got {model}")));
    }
    let model = model as u8;
    let n = required(integer(obj, "n", 2)?, "n")? as usize;
    let p = required(integer(obj, "p", 1)?, "p")? as usize;

    let beta0 = match obj.get("beta0") {
        None => default_beta0(model, p).map_err(|e| violation("/p", e))?,
        Some(Value::Array(items)) => {
            if items.len() != p {
                return Err(violation(
                    "/beta0",
                    format!("has {} entries, expected p = {p}", items.len()),
                ));
            }
            items
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
                        violation(&format!("/beta0/{j}"), "expected a finite number")
                    })
                })
                .collect::<CliResult<Vec<f64>>>()?
        }
        Some(_) => return Err(violation("/beta0", "expected an array of numbers")),
    };

    let censoring_scale = match obj.get("censoring_scale") {
        None => CensoringScale::default(),
        Some(v) => match v.as_str() {
            Some("variance") => CensoringScale::Variance,
            Some("sd") => CensoringScale::Sd,
            _ => {
                return Err(violation(
                    "/censoring_scale",
                    "expected \"variance\" or \"sd\"",
                ))
            }
        },
    };

    let scenario = Scenario {
        model,
        n,
        p,
        rho: fraction(obj, "rho")?.unwrap_or(0.5),
        censoring_rate: fraction(obj, "censoring_rate")?.unwrap_or(0.2),
        beta0,
        reps: integer(obj, "reps", 1)?.map_or(100, |r| r as usize),
        master_seed: integer(obj, "master_seed", 0)?.unwrap_or(42),
        censoring_scale,
    };
    scenario.validate()?;
    Ok(scenario)
}
