//! Experiment specifications.

use std::fmt;
use std::path::{Path, PathBuf};

use sdelab_core::coefficients::ModelFile;
use sdelab_core::{CouplingExperimentConfig, Grid, SdeModel};
use serde::{Deserialize, Serialize};

use crate::catalog;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FinalTimeRate,
    GlobalL1Rate,
    RecursionCheck,
    OccupationCheck,
    OracleIdentity,
    BridgeMoments,
    LocalizationCheck,
    DensityGate,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FinalTimeRate => "final-time-rate",
            Self::GlobalL1Rate => "global-l1-rate",
            Self::RecursionCheck => "recursion-check",
            Self::OccupationCheck => "occupation-check",
            Self::OracleIdentity => "oracle-identity",
            Self::BridgeMoments => "bridge-moments",
            Self::LocalizationCheck => "localization-check",
            Self::DensityGate => "density-gate",
        }
    }

    fn default_p(self) -> f64 {
        match self {
            Self::GlobalL1Rate | Self::BridgeMoments | Self::LocalizationCheck => 1.0,
            _ => 2.0,
        }
    }

    fn default_n(self) -> Vec<usize> {
        match self {
            Self::FinalTimeRate | Self::GlobalL1Rate => vec![8, 16, 32, 64, 128, 256, 512],
            Self::RecursionCheck => vec![8, 16, 32, 64],
            Self::OccupationCheck => vec![16, 32],
            Self::OracleIdentity => vec![1, 4],
            Self::BridgeMoments | Self::LocalizationCheck | Self::DensityGate => vec![1],
        }
    }

    fn default_target(self) -> Option<(f64, f64)> {
        match self {
            Self::FinalTimeRate => Some((-0.9, -0.6)),
            Self::GlobalL1Rate => Some((-0.6, -0.4)),
            _ => None,
        }
    }

    fn uses_grid(self) -> bool {
        !matches!(self, Self::BridgeMoments | Self::LocalizationCheck | Self::DensityGate)
    }
}

/// A built-in model name, a path to a model file, or an inline model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Name(String),
    Inline(serde_json::Value),
}

/// The specification as written by the user; omitted fields take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub model: Option<ModelRef>,
    #[serde(default)]
    pub n: Option<Vec<usize>>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default, alias = "R")]
    pub replications: Option<usize>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output: PathBuf,
    /// Jump location for occupation, localization and density experiments.
    #[serde(default)]
    pub xi: Option<f64>,
    /// Inner samples of the oracle.
    #[serde(default)]
    pub inner: Option<usize>,
    #[serde(default)]
    pub t_star: Option<f64>,
    /// Bootstrap resamples.
    #[serde(default)]
    pub resamples: Option<usize>,
    /// Accepted slope band for the rate kinds.
    #[serde(default)]
    pub target: Option<(f64, f64)>,
    /// Outer localization radius.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub c1: Option<f64>,
}

/// A validated specification with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedSpec {
    pub id: String,
    pub kind: ExperimentKind,
    pub model_id: String,
    pub model: SdeModel,
    pub n: Vec<usize>,
    pub m: usize,
    pub replications: usize,
    pub p: f64,
    pub seed: u64,
    pub output: PathBuf,
    pub xi: f64,
    pub inner: usize,
    pub t_star: f64,
    pub resamples: usize,
    pub target: Option<(f64, f64)>,
    pub radius: f64,
    pub c1: f64,
}

/// Field-level problems with a specification.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecError {
    pub problems: Vec<String>,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid experiment specification:")?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SpecError {}

impl SpecError {
    fn one(problem: String) -> Self {
        Self { problems: vec![problem] }
    }
}

/// Parses a specification file and resolves it against the directory it lives in.
pub fn load(path: &Path) -> Result<ResolvedSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::one(format!("cannot read {}: {e}", path.display())))?;
    let spec: ExperimentSpec =
        serde_json::from_str(&text).map_err(|e| SpecError::one(format!("{}: {e}", path.display())))?;
    spec.resolve(path.parent().unwrap_or(Path::new(".")))
}

fn resolve_model(model: &ModelRef, base: &Path) -> Result<(String, SdeModel), String> {
    match model {
        ModelRef::Name(name) => {
            if let Some(m) = catalog::builtin(name) {
                return Ok((name.clone(), m));
            }
            let file = base.join(name);
            let text = std::fs::read_to_string(&file).map_err(|e| {
                format!(
                    "model: `{name}` is neither a built-in model ({}) nor a readable file: {e}",
                    catalog::names().join(", ")
                )
            })?;
            let m = SdeModel::from_json(&text).map_err(|e| format!("model: {}: {e}", file.display()))?;
            let id = Path::new(name).file_stem().map_or(name.clone(), |s| s.to_string_lossy().into_owned());
            Ok((id, m))
        }
        ModelRef::Inline(value) => {
            let file: ModelFile = serde_json::from_value(value.clone()).map_err(|e| format!("model: {e}"))?;
            let m = SdeModel::try_from(file).map_err(|e| format!("model: {e}"))?;
            Ok(("inline".into(), m))
        }
    }
}

impl ExperimentSpec {
    /// Checks every field and fills in defaults; nothing is computed on failure.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedSpec, SpecError> {
        let mut problems = Vec::new();
        let kind = self.kind;
        let default_model = ModelRef::Name(if kind == ExperimentKind::BridgeMoments { "brownian" } else { "indicator-drift" }.into());
        let model = match resolve_model(self.model.as_ref().unwrap_or(&default_model), base) {
            Ok(m) => Some(m),
            Err(e) => {
                problems.push(e);
                None
            }
        };

        let n = self.n.clone().unwrap_or_else(|| kind.default_n());
        if n.is_empty() {
            problems.push("n: at least one grid size is required".into());
        }
        if n.contains(&0) {
            problems.push("n: grid sizes must be positive".into());
        }
        let rate = matches!(kind, ExperimentKind::FinalTimeRate | ExperimentKind::GlobalL1Rate);
        if rate && n.len() < 3 {
            problems.push(format!("n: a rate fit needs at least 3 grid sizes, got {}", n.len()));
        }
        let mut sorted = n.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n.len() {
            problems.push("n: grid sizes must be distinct".into());
        }

        let m = self.m.unwrap_or(64);
        if m == 0 {
            problems.push("m: substeps must be positive".into());
        }
        let replications = self.replications.unwrap_or(10_000);
        if replications < 2 {
            problems.push(format!("replications: at least 2 are needed, got {replications}"));
        }
        let p = self.p.unwrap_or(kind.default_p());
        if !(p >= 1.0 && p.is_finite()) {
            problems.push(format!("p: must be a finite number >= 1, got {p}"));
        }
        match kind {
            ExperimentKind::GlobalL1Rate if p != 1.0 => problems.push(format!("p: the global L1 gap needs p = 1, got {p}")),
            ExperimentKind::RecursionCheck | ExperimentKind::OccupationCheck | ExperimentKind::OracleIdentity if p != 2.0 => {
                problems.push(format!("p: {} needs p = 2, got {p}", kind.as_str()))
            }
            _ => {}
        }
        let xi = self.xi.unwrap_or(0.0);
        if !xi.is_finite() {
            problems.push("xi: must be finite".into());
        }
        let inner = self.inner.unwrap_or(16);
        if inner < 2 {
            problems.push(format!("inner: at least 2 inner samples are needed, got {inner}"));
        }
        let resamples = self.resamples.unwrap_or(1000);
        if resamples < 2 {
            problems.push(format!("resamples: at least 2 are needed, got {resamples}"));
        }
        let target = self.target.or(kind.default_target());
        if let Some((lo, hi)) = target {
            if !(lo < hi) {
                problems.push(format!("target: lower end {lo} must be below upper end {hi}"));
            }
        }
        let radius = self.radius.unwrap_or(1.0);
        if !(radius > 0.0 && radius.is_finite()) {
            problems.push(format!("radius: must be positive, got {radius}"));
        }
        let c1 = self.c1.unwrap_or(1.0);
        if !c1.is_finite() {
            problems.push("c1: must be finite".into());
        }
        if self.output.as_os_str().is_empty() {
            problems.push("output: a directory is required".into());
        }

        let Some((model_id, model)) = model else {
            return Err(SpecError { problems });
        };
        let t_star = self.t_star.unwrap_or(model.horizon);
        if !(t_star > 0.0 && t_star <= model.horizon) {
            problems.push(format!("t_star: must lie in (0, {}], got {t_star}", model.horizon));
        }
        if kind.uses_grid() && problems.is_empty() {
            for &k in &n {
                let check = CouplingExperimentConfig::new(model.clone(), Grid::Uniform(k))
                    .map(|c| c.with_m(m).with_replications(replications).with_p(p))
                    .and_then(|c| c.validate());
                if let Err(e) = check {
                    problems.push(format!("n = {k}: {e}"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(SpecError { problems });
        }
        let output = if self.output.is_absolute() { self.output.clone() } else { base.join(&self.output) };
        Ok(ResolvedSpec {
            id: self.id.clone().unwrap_or_else(|| kind.as_str().to_string()),
            kind,
            model_id,
            model,
            n,
            m,
            replications,
            p,
            seed: self.seed.unwrap_or(0),
            output,
            xi,
            inner,
            t_star,
            resamples,
            target,
            radius,
            c1,
        })
    }
}

impl ResolvedSpec {
    /// A specification built in code, bypassing file resolution.
    pub fn new(kind: ExperimentKind, model_id: &str, model: SdeModel) -> Self {
        Self {
            id: kind.as_str().to_string(),
            kind,
            model_id: model_id.to_string(),
            t_star: model.horizon,
            model,
            n: kind.default_n(),
            m: 64,
            replications: 10_000,
            p: kind.default_p(),
            seed: 0,
            output: PathBuf::new(),
            xi: 0.0,
            inner: 16,
            resamples: 1000,
            target: kind.default_target(),
            radius: 1.0,
            c1: 1.0,
        }
    }

    pub fn builtin(kind: ExperimentKind, name: &str) -> Self {
        Self::new(kind, name, catalog::builtin(name).expect("catalog model"))
    }

    /// One-line JSON echo used for provenance.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("specs serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentSpec {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let spec = parse(r#"{"kind": "final-time-rate", "model": "indicator-drift", "output": "out"}"#);
        let r = spec.resolve(Path::new("/tmp")).unwrap();
        assert_eq!(r.n, vec![8, 16, 32, 64, 128, 256, 512]);
        assert_eq!((r.m, r.replications, r.p), (64, 10_000, 2.0));
        assert_eq!(r.target, Some((-0.9, -0.6)));
        assert_eq!(r.output, PathBuf::from("/tmp/out"));
    }

    #[test]
    fn problems_are_collected_per_field() {
        let spec = parse(r#"{"kind": "global-l1-rate", "model": "ou", "n": [8, 8], "m": 0, "p": 2, "output": "x"}"#);
        let err = spec.resolve(Path::new(".")).unwrap_err();
        let text = err.to_string();
        for field in ["n:", "m:", "p:"] {
            assert!(text.contains(field), "{text}");
        }
    }

    #[test]
    fn unknown_model_is_reported() {
        let spec = parse(r#"{"kind": "density-gate", "model": "no-such-model", "output": "x"}"#);
        let err = spec.resolve(Path::new("/nonexistent")).unwrap_err();
        assert!(err.problems[0].starts_with("model:"));
    }

    #[test]
    fn inline_models_are_accepted() {
        let spec = parse(
            r#"{"kind": "density-gate", "output": "x",
                "model": {"drift": {"pieces": [[0.0]]}, "diffusion": {"pieces": [[1.0]]}, "x0": 0.0, "horizon": 1.0}}"#,
        );
        let r = spec.resolve(Path::new(".")).unwrap();
        assert_eq!(r.model_id, "inline");
        assert_eq!(r.model, catalog::builtin("brownian").unwrap());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"kind": "bridge-moments", "output": "x", "reps": 3}"#).is_err());
    }
}
