//! JSON scenario files.
//!
//! ```json
//! {
//!   "platoon": { "n": 8, "tau_d": 1.5, "h": 0.6, "r": 10, "L": 4.7,
//!                "k_p": 0.2, "k_d": 1.2, "T": 0.1 },
//!   "braking": { "t_brake": 5, "gamma": 1.2, "eta": 0.1 },
//!   "loss": { "kind": "consecutive", "ell": 7 },
//!   "rule": { "kind": "theorem2", "alpha": 1 },
//!   "t_end": 25
//! }
//! ```
//!
//! Every error names the offending field as a dotted path.

use std::path::Path;

use crate::error::{Error, Result};
use crate::simulator::SimConfig;

/// Parses and validates a scenario document.
pub fn parse(text: &str) -> Result<SimConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: SimConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Scenario {
            path: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    config.validate().map_err(|e| match e {
        Error::InvalidParameter { field, reason } => Error::Scenario {
            path: field,
            message: reason,
        },
        other => other,
    })?;
    Ok(config)
}

pub fn load(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario {
        path: "<file>".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse(&text)
}

pub fn to_json(config: &SimConfig) -> String {
    serde_json::to_string_pretty(config).expect("scenario serializes")
}
