//! TOML run configuration.
//!
//! ```toml
//! [system]
//! omega_m = 1.0                 # mechanical angular frequency (rad/s)
//! kappa_lc_over_omega_m = 0.125 # LC decay rate relative to omega_m
//! Q = 3e6                       # mechanical quality factor; or gamma_m (rad/s)
//! nbar = 40.0                   # bath occupation
//! n0 = 0.1                      # initial mechanical occupation
//! lambda_t = 1.0                # transmission efficiency, [0, 1]
//! cooperativity = 100.0         # or g_max (rad/s)
//! upsilon = 1.0                 # step-one cavity bandwidth in units of Gamma
//!
//! [protocol]
//! tau1 = 0.8                    # entangling duration, units of 1/Gamma, at most 4
//! tau2 = 12.0                   # swap duration, units of 1/Gamma
//!
//! [sweep]                       # optional; required for sweep mode
//! cooperativity = [10.0, 100.0]
//! lambda_t = [1.0, 0.98, 0.95, 0.92]
//! n0 = [0.1, 0.25]
//!
//! [settings]                    # optional fixed settings for single runs, [re, im]
//! alpha1 = [0.0, -0.16]
//! alpha2 = [0.0, 0.52]
//! beta1 = [0.0, 0.16]
//! beta2 = [0.0, -0.52]
//! ```

use std::path::Path;

use num_complex::Complex64;
use toml::{Table, Value};

use crate::bell::MeasurementSettings;
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::protocol::{ProtocolConfig, SweepAxes, MAX_BLUE_AREA};

/// Keys that must be present (alternatives separated by `|`).
pub const REQUIRED_KEYS: [&str; 10] = [
    "system.omega_m",
    "system.kappa_lc_over_omega_m",
    "system.gamma_m|system.Q",
    "system.nbar",
    "system.n0",
    "system.lambda_t",
    "system.cooperativity|system.g_max",
    "system.upsilon",
    "protocol.tau1",
    "protocol.tau2",
];

const SYSTEM_KEYS: [&str; 10] = [
    "omega_m",
    "kappa_lc_over_omega_m",
    "gamma_m",
    "Q",
    "nbar",
    "n0",
    "lambda_t",
    "cooperativity",
    "g_max",
    "upsilon",
];
const PROTOCOL_KEYS: [&str; 2] = ["tau1", "tau2"];
const SWEEP_KEYS: [&str; 3] = ["cooperativity", "lambda_t", "n0"];
const SETTINGS_KEYS: [&str; 4] = ["alpha1", "alpha2", "beta1", "beta2"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub protocol: ProtocolConfig,
    pub settings: Option<MeasurementSettings>,
}

pub fn parse_config(path: &Path) -> Result<RunFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn number(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(
            key,
            format!("expected a number, got {}", v.type_str()),
        )),
    }
}

fn section<'a>(root: &'a Table, name: &str, allowed: &[&str]) -> Result<Option<&'a Table>> {
    let Some(v) = root.get(name) else {
        return Ok(None);
    };
    let t = v
        .as_table()
        .ok_or_else(|| Error::config(name, "expected a table"))?;
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::config(format!("{name}.{k}"), "unknown key"));
        }
    }
    Ok(Some(t))
}

struct Reader<'a> {
    table: Option<&'a Table>,
    prefix: &'static str,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Result<Option<f64>> {
        match self.table.and_then(|t| t.get(key)) {
            None => Ok(None),
            Some(v) => {
                let path = format!("{}.{key}", self.prefix);
                let x = number(v, &path)?;
                if !x.is_finite() {
                    return Err(Error::config(path, "must be finite"));
                }
                Ok(Some(x))
            }
        }
    }
}

fn check(key: &str, v: f64, ok: bool, rule: &str) -> Result<f64> {
    if ok {
        Ok(v)
    } else {
        Err(Error::config(
            key,
            format!("value {v} out of range: {rule}"),
        ))
    }
}

fn list(t: &Table, key: &str, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let path = format!("sweep.{key}");
    let Some(v) = t.get(key) else {
        return Ok(Vec::new());
    };
    let arr = v
        .as_array()
        .ok_or_else(|| Error::config(&path, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            let p = format!("{path}[{i}]");
            let x = number(x, &p)?;
            check(
                &p,
                x,
                x.is_finite() && (lo..=hi).contains(&x),
                &format!("must lie in [{lo}, {hi}]"),
            )
        })
        .collect()
}

fn complex(t: &Table, key: &str) -> Result<Complex64> {
    let path = format!("settings.{key}");
    let v = t.get(key).ok_or_else(|| {
        Error::config(&path, "missing required key (all four settings are needed)")
    })?;
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::config(&path, "expected [re, im]"))?;
    let z = Complex64::new(number(&arr[0], &path)?, number(&arr[1], &path)?);
    if !z.re.is_finite() || !z.im.is_finite() || z.norm() > crate::bell::SETTINGS_BOX {
        return Err(Error::config(
            path,
            format!("modulus must be at most {}", crate::bell::SETTINGS_BOX),
        ));
    }
    Ok(z)
}

pub fn parse_config_str(text: &str) -> Result<RunFile> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
    for k in root.keys() {
        if !["system", "protocol", "sweep", "settings"].contains(&k.as_str()) {
            return Err(Error::config(k, "unknown key"));
        }
    }
    let sys = Reader {
        table: section(&root, "system", &SYSTEM_KEYS)?,
        prefix: "system",
    };
    let proto = Reader {
        table: section(&root, "protocol", &PROTOCOL_KEYS)?,
        prefix: "protocol",
    };

    let mut missing = Vec::new();
    for req in REQUIRED_KEYS {
        let present = req.split('|').any(|alt| {
            let (sec, key) = alt.split_once('.').expect("dotted key");
            root.get(sec)
                .and_then(Value::as_table)
                .is_some_and(|t| t.contains_key(key))
        });
        if !present {
            missing.push(req);
        }
    }
    if !missing.is_empty() {
        return Err(Error::config(missing.join(", "), "missing required key(s)"));
    }

    let req = |r: &Reader, k: &str| -> Result<f64> { Ok(r.get(k)?.expect("presence checked")) };
    let omega_m = req(&sys, "omega_m")?;
    check("system.omega_m", omega_m, omega_m > 0.0, "must be > 0")?;
    let ratio = req(&sys, "kappa_lc_over_omega_m")?;
    check(
        "system.kappa_lc_over_omega_m",
        ratio,
        ratio > 0.0,
        "must be > 0",
    )?;
    let kappa_lc = ratio * omega_m;
    let gamma_m = match (sys.get("gamma_m")?, sys.get("Q")?) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "system.gamma_m",
                "give either gamma_m or Q, not both",
            ))
        }
        (Some(g), None) => check("system.gamma_m", g, g >= 0.0, "must be >= 0")?,
        (None, Some(q)) => omega_m / check("system.Q", q, q > 0.0, "must be > 0")?,
        (None, None) => unreachable!("presence checked"),
    };
    let nbar = req(&sys, "nbar")?;
    check("system.nbar", nbar, nbar >= 0.0, "must be >= 0")?;
    let n0 = req(&sys, "n0")?;
    check("system.n0", n0, n0 >= 0.0, "must be >= 0")?;
    let lambda_t = req(&sys, "lambda_t")?;
    check(
        "system.lambda_t",
        lambda_t,
        (0.0..=1.0).contains(&lambda_t),
        "must lie in [0, 1]",
    )?;
    let upsilon = req(&sys, "upsilon")?;
    check("system.upsilon", upsilon, upsilon > 0.0, "must be > 0")?;
    let params = match (sys.get("cooperativity")?, sys.get("g_max")?) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "system.cooperativity",
                "give either cooperativity or g_max, not both",
            ))
        }
        (Some(c), None) => {
            check("system.cooperativity", c, c >= 0.0, "must be >= 0")?;
            if gamma_m == 0.0 {
                return Err(Error::config(
                    "system.cooperativity",
                    "undefined for gamma_m = 0; give g_max instead",
                ));
            }
            SystemParams::from_cooperativity(
                omega_m, kappa_lc, gamma_m, nbar, n0, lambda_t, c, upsilon,
            )?
        }
        (None, Some(g)) => SystemParams {
            omega_m,
            kappa_lc,
            gamma_m,
            nbar,
            n0,
            lambda_t,
            g_max: check("system.g_max", g, g >= 0.0, "must be >= 0")?,
            upsilon,
        },
        (None, None) => unreachable!("presence checked"),
    };
    if !params.is_weak_coupling() {
        log::warn!(
            "g_max / kappa_lc = {:.3} exceeds the weak-coupling limit; adiabatic elimination is questionable",
            params.g_max / params.kappa_lc
        );
    }

    let tau1 = req(&proto, "tau1")?;
    check(
        "protocol.tau1",
        tau1,
        tau1 > 0.0 && tau1 <= MAX_BLUE_AREA,
        "must lie in (0, 4]",
    )?;
    let tau2 = req(&proto, "tau2")?;
    check("protocol.tau2", tau2, tau2 > 0.0, "must be > 0")?;

    let sweep = match section(&root, "sweep", &SWEEP_KEYS)? {
        None => SweepAxes::default(),
        Some(t) => SweepAxes {
            cooperativity: list(t, "cooperativity", 0.0, f64::MAX)?,
            lambda_t: list(t, "lambda_t", 0.0, 1.0)?,
            n0: list(t, "n0", 0.0, f64::MAX)?,
        },
    };
    let settings = match section(&root, "settings", &SETTINGS_KEYS)? {
        None => None,
        Some(t) => Some(MeasurementSettings {
            alpha1: complex(t, "alpha1")?,
            alpha2: complex(t, "alpha2")?,
            beta1: complex(t, "beta1")?,
            beta2: complex(t, "beta2")?,
        }),
    };
    Ok(RunFile {
        protocol: ProtocolConfig {
            params,
            tau1,
            tau2,
            sweep,
        },
        settings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = r#"
[system]
omega_m = 1.0
kappa_lc_over_omega_m = 0.125
Q = 3e6
nbar = 40
n0 = 0.1
lambda_t = 1.0
cooperativity = 100
upsilon = 1.0

[protocol]
tau1 = 0.8
tau2 = 12

[sweep]
cooperativity = [10, 100]
lambda_t = [1.0, 0.98, 0.95, 0.92]
n0 = [0.1, 0.25]
"#;

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn baseline_accepted() {
        let f = parse_config_str(BASELINE).unwrap();
        let p = f.protocol.params;
        assert_eq!(p.kappa_lc, 0.125);
        assert!((p.gamma_m - 1.0 / 3e6).abs() < 1e-20);
        assert!((p.cooperativity() - 100.0).abs() < 1e-9);
        assert_eq!(f.protocol.sweep.lambda_t, vec![1.0, 0.98, 0.95, 0.92]);
        assert!(f.settings.is_none());
    }

    #[test]
    fn lambda_out_of_range() {
        let text = BASELINE.replace("lambda_t = 1.0\n", "lambda_t = 1.2\n");
        assert_eq!(
            path_of(parse_config_str(&text).unwrap_err()),
            "system.lambda_t"
        );
    }

    #[test]
    fn empty_file_lists_every_required_key() {
        let p = path_of(parse_config_str("").unwrap_err());
        for k in REQUIRED_KEYS {
            assert!(p.contains(k), "{k} missing from {p}");
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = BASELINE.replace("nbar = 40", "nbar = 40\ntemperature = 0.1");
        assert_eq!(
            path_of(parse_config_str(&text).unwrap_err()),
            "system.temperature"
        );
        let text = format!("{BASELINE}\n[extra]\na = 1\n");
        assert_eq!(path_of(parse_config_str(&text).unwrap_err()), "extra");
    }

    #[test]
    fn conflicting_alternatives() {
        let text = BASELINE.replace("Q = 3e6", "Q = 3e6\ngamma_m = 1e-7");
        assert_eq!(
            path_of(parse_config_str(&text).unwrap_err()),
            "system.gamma_m"
        );
    }

    #[test]
    fn settings_section() {
        let text = format!(
            "{BASELINE}\n[settings]\nalpha1 = [0.0, -0.16]\nalpha2 = [0.0, 0.52]\nbeta1 = [0.0, 0.16]\nbeta2 = [0, -0.52]\n"
        );
        let s = parse_config_str(&text).unwrap().settings.unwrap();
        assert_eq!(s.beta2, Complex64::new(0.0, -0.52));
    }

    #[test]
    fn bad_sweep_entry_reports_index() {
        let text = BASELINE.replace("n0 = [0.1, 0.25]", "n0 = [0.1, -1]");
        assert_eq!(path_of(parse_config_str(&text).unwrap_err()), "sweep.n0[1]");
    }
}
