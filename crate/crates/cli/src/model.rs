//! Systems named in a config.

use bowen_core::systems::{Cat, DynamicalSystem, PCat, Prod4, Solenoid};
use bowen_core::{LabError, Real, Result};

use crate::config::SystemSpec;

pub type Model<T> = Box<dyn DynamicalSystem<T>>;

pub fn build<T: Real>(spec: &SystemSpec) -> Result<Model<T>> {
    Ok(match spec.name.as_str() {
        "cat" => Box::new(Cat),
        "pcat" => Box::new(PCat::<T>::new(spec.param("eta", 0.03))?),
        "prod4" => Box::new(Prod4::<T>::new(spec.param("eta", 0.0))),
        "solenoid" => Box::new(Solenoid::<T>::new(spec.param("a", 0.5), spec.param("lambda", 0.1))?),
        other => return Err(LabError::Domain(format!("unknown system `{other}`"))),
    })
}

/// Whether the linearization needs more than double precision: the chart
/// maps are genuinely nonlinear and the increments fall to `1e-12` and below.
pub fn needs_extended(spec: &SystemSpec) -> bool {
    match spec.name.as_str() {
        "pcat" | "prod4" => spec.param("eta", if spec.name == "pcat" { 0.03 } else { 0.0 }) != 0.0,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn spec(name: &str, params: &[(&str, f64)]) -> SystemSpec {
        SystemSpec { name: name.into(), params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>() }
    }

    #[test]
    fn builds_every_system() {
        assert_eq!(build::<f64>(&spec("cat", &[])).unwrap().label(), "cat");
        assert_eq!(build::<f64>(&spec("pcat", &[("eta", 0.03)])).unwrap().label(), "pcat(eta=0.03)");
        assert_eq!(build::<f64>(&spec("prod4", &[])).unwrap().unstable_dim(), 2);
        assert_eq!(build::<f64>(&spec("solenoid", &[])).unwrap().ambient_dim(), 3);
        assert!(build::<f64>(&spec("pcat", &[("eta", 5.0)])).is_err());
        assert!(needs_extended(&spec("pcat", &[])));
        assert!(!needs_extended(&spec("prod4", &[])));
        assert!(needs_extended(&spec("prod4", &[("eta", 0.02)])));
    }
}
