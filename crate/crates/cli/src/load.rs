use std::fs;
use std::path::Path;

use contestlab::model::InstanceSpec;
use contestlab::{AllocationVector, ContestConfig, Instance, MechanismFamily};

use crate::error::{CliError, CliResult};

/// Reads a JSON instance file and builds the validated model.
pub fn load_config(path: &Path) -> CliResult<Instance> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let spec = parse_spec(&text).map_err(|message| CliError::Config { path: path.to_path_buf(), message })?;
    Instance::from_spec(&spec).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })
}

fn parse_spec(text: &str) -> Result<InstanceSpec, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("invalid {path}: {}", e.inner())
        }
    })
}

/// Parses `standard`, `reversed`, `random`, `quota:t`, `quota-relaxed:t`,
/// `blind:t`, `segment:t` or `custom:v1,...,v_{n-1}`.
pub fn parse_mechanism(text: &str, config: &ContestConfig) -> CliResult<AllocationVector> {
    let (head, arg) = match text.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (text.trim(), None),
    };
    let param = |name: &str| -> CliResult<f64> {
        let raw = arg.ok_or_else(|| CliError::Usage(format!("mechanism `{name}` needs a parameter, e.g. `{name}:0.5`")))?;
        let t: f64 = raw.parse().map_err(|_| CliError::Usage(format!("mechanism parameter `{raw}` is not a number")))?;
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage(format!("mechanism parameter {t} outside [0, 1]")));
        }
        Ok(t)
    };
    let no_arg = |v: AllocationVector| -> CliResult<AllocationVector> {
        match arg {
            Some(_) => Err(CliError::Usage(format!("mechanism `{head}` takes no parameter"))),
            None => Ok(v),
        }
    };
    match head {
        "standard" => no_arg(AllocationVector::standard(config)),
        "reversed" => no_arg(AllocationVector::reversed(config)),
        "random" => no_arg(AllocationVector::random(config)),
        "custom" => {
            let raw = arg.ok_or_else(|| CliError::Usage("`custom` needs components, e.g. `custom:0.5,1.5`".into()))?;
            Ok(AllocationVector::parse(config, raw)?)
        }
        name => Ok(family(name, config)?.at(param(name)?)),
    }
}

/// Mechanism family by CLI name.
pub fn family(name: &str, config: &ContestConfig) -> CliResult<MechanismFamily> {
    match name {
        "quota" => Ok(MechanismFamily::quota(config, false)?),
        "quota-relaxed" => Ok(MechanismFamily::quota(config, true)?),
        "blind" => Ok(MechanismFamily::blind_eye(config)),
        "segment" => Ok(MechanismFamily::random_to_standard(config)),
        other => Err(CliError::Usage(format!(
            "unknown mechanism `{other}` (expected standard, reversed, random, quota, quota-relaxed, blind, segment or custom)"
        ))),
    }
}
