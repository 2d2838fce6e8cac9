//! Declarative run configuration.
//!
//! One TOML file describes everything a run needs: the forward model, the
//! nominal density, the target interval, the estimator settings, optional
//! tuning overrides, and an optional sweep section. Parsing is strict
//! (unknown fields are errors) and every parsed file re-serializes to an
//! equivalent file, so sweep outputs can always cite the exact configuration
//! that produced them.

use bimc::estimators::Method;
use bimc::gaussian::{Density, GaussianDensity, GaussianMixture};
use bimc::models::{self, CatalogParams, ForwardModel};
use bimc::TargetInterval;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem: the message names the offending field.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub nominal: NominalSpec,
    pub target: TargetSpec,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<OverrideSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_gradient: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
}

/// A Gaussian (or mixture) nominal density. Exactly one mean form and one
/// covariance form must be set, or `components` alone for a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NominalSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    /// Broadcasts one value over the model dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_fill: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variances: Option<Vec<f64>>,
    /// Isotropic covariance `scale * I`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Dense precision (inverse covariance) matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Vec<Vec<f64>>>,
    /// Grid smoothness precision operator `(gamma L + delta I)^2`; the model
    /// dimension must be a square number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<SmoothnessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentSpec>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothnessSpec {
    pub gamma: f64,
    pub delta: f64,
}

/// One mixture component: a weight plus the same mean/covariance forms as a
/// plain Gaussian nominal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_fill: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variances: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<SmoothnessSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub method: Method,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_n_pseudo")]
    pub n_pseudo: usize,
    /// Replicates per sweep cell; ignored by single estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<usize>,
}

fn default_n_pseudo() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SigmaSq,
    NSamples,
    ProbabilityLevel,
    NPseudo,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SigmaSq => "sigma_sq",
            SweepAxis::NSamples => "n_samples",
            SweepAxis::ProbabilityLevel => "probability_level",
            SweepAxis::NPseudo => "n_pseudo",
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn emit(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration serializes")
    }

    /// Field-level checks that do not need the model built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return err(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        if !(self.target.y_min < self.target.y_max) {
            return err(format!(
                "target: Y = [{}, {}] is empty or unordered (need y_min < y_max)",
                self.target.y_min, self.target.y_max
            ));
        }
        if self.run.n_samples == 0 {
            return err("run.n_samples: must be at least 1");
        }
        if self.run.n_pseudo == 0 {
            return err("run.n_pseudo: must be at least 1");
        }
        if self.run.ensemble == Some(0) {
            return err("run.ensemble: must be at least 1");
        }
        if let Some(o) = &self.overrides {
            if let Some(y) = o.y {
                if !y.is_finite() {
                    return err(format!("overrides.y: must be finite, got {y}"));
                }
                if self.run.n_pseudo > 1 {
                    return err("overrides.y: pinning the pseudo-data point requires n_pseudo = 1");
                }
            }
            if let Some(s) = o.sigma_sq {
                if !(s.is_finite() && s > 0.0) {
                    return err(format!("overrides.sigma_sq: must be positive and finite, got {s}"));
                }
            }
            if self.run.method == Method::Mc && (o.y.is_some() || o.sigma_sq.is_some()) {
                return err("overrides: tuning overrides have no effect on the MC method");
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.grid.is_empty() {
                return err("sweep.grid: must not be empty");
            }
            for (i, &v) in sweep.grid.iter().enumerate() {
                if !v.is_finite() {
                    return err(format!("sweep.grid[{i}]: must be finite, got {v}"));
                }
                match sweep.axis {
                    SweepAxis::SigmaSq => {
                        if !(v > 0.0) {
                            return err(format!("sweep.grid[{i}]: sigma_sq must be positive, got {v}"));
                        }
                    }
                    SweepAxis::NSamples | SweepAxis::NPseudo => {
                        if v < 1.0 || v.fract() != 0.0 {
                            return err(format!(
                                "sweep.grid[{i}]: {} must be a positive integer, got {v}",
                                sweep.axis.name()
                            ));
                        }
                    }
                    SweepAxis::ProbabilityLevel => {
                        if !(v > 0.0 && v < 0.5) {
                            return err(format!(
                                "sweep.grid[{i}]: probability_level must lie in (0, 0.5), got {v}"
                            ));
                        }
                    }
                }
            }
            if sweep.axis == SweepAxis::SigmaSq && self.run.method == Method::Mc {
                return err("sweep.axis: sigma_sq does not apply to the MC method");
            }
            if sweep.axis == SweepAxis::NPseudo && self.run.method == Method::Mc {
                return err("sweep.axis: n_pseudo does not apply to the MC method");
            }
            if sweep.axis == SweepAxis::NPseudo && self.overrides.map_or(false, |o| o.y.is_some()) {
                return err("sweep.axis: an n_pseudo sweep cannot pin overrides.y");
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Box<dyn ForwardModel>, ConfigError> {
        let p = CatalogParams {
            m: self.model.m,
            seed: self.model.seed,
            analytic_gradient: self.model.analytic_gradient,
            t_final: self.model.t_final,
            step_count: self.model.step_count,
            grid_n: self.model.grid_n,
        };
        models::by_name(&self.model.name, &p).map_err(|e| ConfigError(format!("model: {e}")))
    }

    pub fn build_nominal(&self, dim: usize) -> Result<Density, ConfigError> {
        self.nominal.build(dim)
    }

    pub fn build_target(&self) -> Result<TargetInterval, ConfigError> {
        TargetInterval::new(self.target.y_min, self.target.y_max)
            .map_err(|e| ConfigError(format!("target: {e}")))
    }
}

/// Count of covariance forms set; used to enforce "exactly one".
fn covariance_forms(
    variances: &Option<Vec<f64>>,
    scale: &Option<f64>,
    covariance: &Option<Vec<Vec<f64>>>,
    precision: &Option<Vec<Vec<f64>>>,
    smoothness: &Option<SmoothnessSpec>,
) -> usize {
    usize::from(variances.is_some())
        + usize::from(scale.is_some())
        + usize::from(covariance.is_some())
        + usize::from(precision.is_some())
        + usize::from(smoothness.is_some())
}

fn square_matrix(rows: &[Vec<f64>], dim: usize, field: &str) -> Result<Array2<f64>, ConfigError> {
    if rows.len() != dim {
        return err(format!("{field}: expected {dim} rows, got {}", rows.len()));
    }
    let mut a = Array2::zeros((dim, dim));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return err(format!("{field}: row {i} has {} entries, expected {dim}", row.len()));
        }
        for (j, &v) in row.iter().enumerate() {
            a[[i, j]] = v;
        }
    }
    Ok(a)
}

#[allow(clippy::too_many_arguments)]
fn build_gaussian(
    dim: usize,
    field: &str,
    mean: &Option<Vec<f64>>,
    mean_fill: &Option<f64>,
    variances: &Option<Vec<f64>>,
    scale: &Option<f64>,
    covariance: &Option<Vec<Vec<f64>>>,
    precision: &Option<Vec<Vec<f64>>>,
    smoothness: &Option<SmoothnessSpec>,
) -> Result<GaussianDensity, ConfigError> {
    let mean = match (mean, mean_fill) {
        (Some(m), None) => {
            if m.len() != dim {
                return err(format!(
                    "{field}.mean: expected {dim} entries for this model, got {}",
                    m.len()
                ));
            }
            Array1::from_vec(m.clone())
        }
        (None, Some(v)) => Array1::from_elem(dim, *v),
        (None, None) => return err(format!("{field}: set one of `mean` or `mean_fill`")),
        (Some(_), Some(_)) => {
            return err(format!("{field}: `mean` and `mean_fill` are mutually exclusive"))
        }
    };
    if covariance_forms(variances, scale, covariance, precision, smoothness) != 1 {
        return err(format!(
            "{field}: set exactly one of `variances`, `scale`, `covariance`, `precision`, \
             `smoothness`"
        ));
    }
    let built = if let Some(v) = variances {
        if v.len() != dim {
            return err(format!(
                "{field}.variances: expected {dim} entries for this model, got {}",
                v.len()
            ));
        }
        GaussianDensity::diagonal(mean, v)
    } else if let Some(s) = scale {
        GaussianDensity::scaled_identity(mean, *s)
    } else if let Some(c) = covariance {
        let c = square_matrix(c, dim, &format!("{field}.covariance"))?;
        GaussianDensity::new(mean, c)
    } else if let Some(p) = precision {
        let p = square_matrix(p, dim, &format!("{field}.precision"))?;
        GaussianDensity::from_precision(mean, p.view())
    } else {
        let s = smoothness.as_ref().expect("one covariance form is set");
        let n = (dim as f64).sqrt().round() as usize;
        if n * n != dim {
            return err(format!(
                "{field}.smoothness: model dimension {dim} is not a square grid"
            ));
        }
        match models::smoothness_covariance(n, s.gamma, s.delta) {
            Ok(cov) => GaussianDensity::new(mean, cov),
            Err(e) => return err(format!("{field}.smoothness: {e}")),
        }
    };
    built.map_err(|e| ConfigError(format!("{field}: {e}")))
}

impl NominalSpec {
    pub fn build(&self, dim: usize) -> Result<Density, ConfigError> {
        if let Some(components) = &self.components {
            let scalar_fields = self.mean.is_some()
                || self.mean_fill.is_some()
                || covariance_forms(
                    &self.variances,
                    &self.scale,
                    &self.covariance,
                    &self.precision,
                    &self.smoothness,
                ) > 0;
            if scalar_fields {
                return err(
                    "nominal: `components` excludes the single-Gaussian fields at the top level",
                );
            }
            if components.is_empty() {
                return err("nominal.components: must not be empty");
            }
            let mut gaussians = Vec::with_capacity(components.len());
            let mut weights = Vec::with_capacity(components.len());
            for (k, c) in components.iter().enumerate() {
                let field = format!("nominal.components[{k}]");
                gaussians.push(build_gaussian(
                    dim,
                    &field,
                    &c.mean,
                    &c.mean_fill,
                    &c.variances,
                    &c.scale,
                    &c.covariance,
                    &c.precision,
                    &c.smoothness,
                )?);
                weights.push(c.weight);
            }
            let mix = GaussianMixture::new(gaussians, weights)
                .map_err(|e| ConfigError(format!("nominal.components: {e}")))?;
            Ok(Density::Mixture(mix))
        } else {
            build_gaussian(
                dim,
                "nominal",
                &self.mean,
                &self.mean_fill,
                &self.variances,
                &self.scale,
                &self.covariance,
                &self.precision,
                &self.smoothness,
            )
            .map(Density::Gaussian)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"
            schema_version = 1
            [model]
            name = "affine"
            m = 2
            [nominal]
            mean = [1.0, 1.0]
            scale = 0.1
            [target]
            y_min = 1.2803
            y_max = 1.4571
            [run]
            method = "BIMC"
            n_samples = 1000
            seed = 7
        "#
    }

    #[test]
    fn parse_emit_parse_is_identity() {
        let cfg = RunConfig::parse(minimal()).unwrap();
        let again = RunConfig::parse(&cfg.emit()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn n_pseudo_defaults_to_one_and_survives_round_trip() {
        let cfg = RunConfig::parse(minimal()).unwrap();
        assert_eq!(cfg.run.n_pseudo, 1);
        assert!(cfg.emit().contains("n_pseudo = 1"));
    }

    #[test]
    fn unknown_fields_are_named() {
        let text = minimal().replace("[run]", "typo_field = 3\n[run]");
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.0.contains("typo_field"), "{}", e.0);
    }

    #[test]
    fn unordered_target_names_y() {
        let text = minimal().replace("y_max = 1.4571", "y_max = 1.0");
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.0.contains("Y ="), "{}", e.0);
        assert!(e.0.contains("y_min < y_max"), "{}", e.0);
    }

    #[test]
    fn mean_length_mismatch_is_caught_at_build() {
        let text = minimal().replace("mean = [1.0, 1.0]", "mean = [1.0, 1.0, 1.0]");
        let cfg = RunConfig::parse(&text).unwrap();
        let e = cfg.build_nominal(2).unwrap_err();
        assert!(e.0.contains("nominal.mean"), "{}", e.0);
    }

    #[test]
    fn exactly_one_covariance_form_is_required() {
        let text = minimal().replace("scale = 0.1", "scale = 0.1\nvariances = [0.1, 0.1]");
        let cfg = RunConfig::parse(&text).unwrap();
        let e = cfg.build_nominal(2).unwrap_err();
        assert!(e.0.contains("exactly one"), "{}", e.0);
    }

    #[test]
    fn precision_form_matches_the_inverse_covariance() {
        let text = minimal()
            .replace("scale = 0.1", "precision = [[10.0, 0.0], [0.0, 10.0]]");
        let cfg = RunConfig::parse(&text).unwrap();
        let Density::Gaussian(g) = cfg.build_nominal(2).unwrap() else {
            panic!("expected a Gaussian")
        };
        assert!((g.cov()[[0, 0]] - 0.1).abs() < 1e-12);
        assert!((g.cov()[[1, 1]] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mixture_nominal_builds_and_round_trips() {
        let text = r#"
            schema_version = 1
            [model]
            name = "affine"
            m = 2
            [nominal]
            [[nominal.components]]
            weight = 0.75
            mean = [0.0, 0.0]
            scale = 1.0
            [[nominal.components]]
            weight = 0.25
            mean_fill = 3.0
            variances = [0.5, 0.5]
            [target]
            y_min = 0.0
            y_max = 1.0
            [run]
            method = "BIMC"
            n_samples = 500
            seed = 1
        "#;
        let cfg = RunConfig::parse(text).unwrap();
        let Density::Mixture(mix) = cfg.build_nominal(2).unwrap() else {
            panic!("expected a mixture")
        };
        assert_eq!(mix.components().len(), 2);
        assert_eq!(RunConfig::parse(&cfg.emit()).unwrap(), cfg);
    }

    #[test]
    fn smoothness_form_requires_a_square_dimension() {
        let text = minimal().replace(
            "scale = 0.1",
            "[nominal.smoothness]\ngamma = 0.1\ndelta = 0.5",
        );
        // The replacement drops `scale` under [nominal] and appends a
        // sub-table, which is valid TOML in this layout.
        let cfg = RunConfig::parse(&text).unwrap();
        let e = cfg.build_nominal(2).unwrap_err();
        assert!(e.0.contains("square grid"), "{}", e.0);

        let square = text.replace("mean = [1.0, 1.0]", "mean_fill = 0.0");
        let cfg = RunConfig::parse(&square).unwrap();
        assert!(cfg.build_nominal(4).is_ok());
    }

    #[test]
    fn mc_method_rejects_tuning_overrides() {
        let text = minimal()
            .replace("method = \"BIMC\"", "method = \"MC\"")
            .replace("[run]", "[overrides]\nsigma_sq = 1e-3\n[run]");
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.0.contains("overrides"), "{}", e.0);
    }

    #[test]
    fn sweep_grid_validation_names_the_entry() {
        let text = format!(
            "{}\n[sweep]\naxis = \"n_samples\"\ngrid = [100.0, 250.5]\n",
            minimal()
        );
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.0.contains("sweep.grid[1]"), "{}", e.0);
    }

    #[test]
    fn probability_level_grid_must_be_a_probability() {
        let text = format!(
            "{}\n[sweep]\naxis = \"probability_level\"\ngrid = [1e-3, 0.7]\n",
            minimal()
        );
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.0.contains("(0, 0.5)"), "{}", e.0);
    }

    #[test]
    fn pinned_y_requires_single_pseudo_point() {
        let text = minimal()
            .replace("n_samples = 1000", "n_samples = 1000\nn_pseudo = 3")
            .replace("[run]", "[overrides]\ny = 1.37\n[run]");
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.0.contains("n_pseudo = 1"), "{}", e.0);
    }
}
