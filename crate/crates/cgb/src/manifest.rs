use cgb_core::manifolds::{by_name, ManifoldSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldRef {
    pub name: String,
    /// Shape parameters in catalog order; empty means catalog defaults.
    #[serde(default)]
    pub params: Vec<f64>,
}

impl ManifoldRef {
    pub fn named(name: &str) -> Self {
        Self { name: name.into(), params: Vec::new() }
    }

    pub fn resolve(&self) -> Result<ManifoldSpec, String> {
        by_name(&self.name, &self.params).map_err(|e| format!("manifold {e}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSpec {
    /// Nodes per axis; `None` picks a per-dimension default.
    pub base: Option<Vec<usize>>,
    pub adaptive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Float,
    Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub manifold: ManifoldRef,
    /// Empty selects the first Morse function in the manifold's catalog.
    pub morse: String,
    pub lambdas: Vec<f64>,
    pub resolution: ResolutionSpec,
    pub tolerance: f64,
    pub out: Option<String>,
    pub backend: Backend,
    pub seed: u64,
    /// Second manifold for an A/B sweep (same Morse function name).
    pub compare: Option<ManifoldRef>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            manifold: ManifoldRef::named("sphere"),
            morse: String::new(),
            lambdas: vec![0.0, 1.0, 2.0, 5.0, 10.0],
            resolution: ResolutionSpec { base: None, adaptive: true },
            tolerance: 1e-2,
            out: None,
            backend: Backend::Float,
            seed: 0,
            compare: None,
        }
    }
}

/// 128×256-style grids for surfaces, 24⁴ for four-manifolds, 16 per axis beyond that.
pub fn default_resolution(dim: usize) -> Vec<usize> {
    match dim {
        2 => vec![128, 256],
        4 => vec![24; 4],
        n => vec![16; n],
    }
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("manifest: {e}"))
    }

    /// Canonical form: pretty JSON with every field present and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn spec(&self) -> Result<ManifoldSpec, String> {
        self.manifold.resolve()
    }

    pub fn morse_name(&self, spec: &ManifoldSpec) -> String {
        if self.morse.is_empty() {
            spec.morse_catalog.first().map(|m| m.name.clone()).unwrap_or_default()
        } else {
            self.morse.clone()
        }
    }

    pub fn base_resolution(&self, spec: &ManifoldSpec) -> Vec<usize> {
        match &self.resolution.base {
            Some(b) if b.len() == 1 => vec![b[0]; spec.dim],
            Some(b) => b.clone(),
            None => default_resolution(spec.dim),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let spec = self.spec()?;
        let morse = self.morse_name(&spec);
        spec.morse(&morse).map_err(|e| format!("{}: {e}", spec.name))?;
        if let Some(c) = &self.compare {
            let other = c.resolve()?;
            if other.dim != spec.dim {
                return Err(format!("compare manifold {} has dimension {}, expected {}", other.name, other.dim, spec.dim));
            }
            other.morse(&morse).map_err(|e| format!("{}: {e}", other.name))?;
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(format!("lambda values must be finite and non-negative, got {l}"));
        }
        let res = self.base_resolution(&spec);
        if res.len() != spec.dim {
            return Err(format!("resolution has {} axes, {} needs {}", res.len(), spec.name, spec.dim));
        }
        if res.iter().any(|n| *n < 2) {
            return Err("resolution must be at least 2 per axis".into());
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err("tolerance must be positive".into());
        }
        Ok(())
    }
}
