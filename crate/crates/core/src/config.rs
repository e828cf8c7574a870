//! JSON run configuration.
//!
//! ```json
//! {
//!   "run_id": "arc",
//!   "geometry": { "preset": "flat-arc", "length": 3.141592653589793, "curvature": 1.0 },
//!   "epsilon": 0.025,
//!   "max_mode": 4,
//!   "grid": { "n_s": 257, "n_t": 9 },
//!   "tolerances": { "solver": 1e-9, "flat_top": 1e-6, "grad": 1e-3, "power": 1e-8 },
//!   "seed": 42
//! }
//! ```
//!
//! Presets: `flat-line`, `flat-arc`, `flat-sine`, `sphere-geodesic`,
//! `hyperbolic-geodesic`, `sphere-circle`, and `custom` with tabulated
//! curvatures. Sweeps take `epsilons` (a list) instead of `epsilon`, plus
//! `mode`, `observables` and `min_slope`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::Observable;
use crate::error::{Error, Result};
use crate::geometry::{epsilon_tilde, CurvatureProfile, GaussField, StripGeometry};
use crate::spline::{CubicSpline, SplineTable2d};

fn default_length() -> f64 {
    PI
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    FlatLine {
        #[serde(default = "default_length")]
        length: f64,
    },
    FlatArc {
        #[serde(default = "default_length")]
        length: f64,
        #[serde(default = "default_one")]
        curvature: f64,
    },
    FlatSine {
        #[serde(default = "default_length")]
        length: f64,
        #[serde(default = "default_one")]
        amplitude: f64,
    },
    SphereGeodesic {
        #[serde(default = "default_length")]
        length: f64,
    },
    HyperbolicGeodesic {
        #[serde(default = "default_length")]
        length: f64,
    },
    SphereCircle {
        #[serde(default = "default_length")]
        length: f64,
        #[serde(default = "default_one")]
        curvature: f64,
    },
    Custom {
        length: f64,
        kappa: CurveTable,
        gauss: GaussConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveTable {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GaussConfig {
    Constant {
        constant: f64,
    },
    /// `values[k][l]` sampled at `(s[k], u[l])`
    Table {
        s: Vec<f64>,
        u: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl GeometryConfig {
    pub fn name(&self) -> &'static str {
        match self {
            GeometryConfig::FlatLine { .. } => "flat-line",
            GeometryConfig::FlatArc { .. } => "flat-arc",
            GeometryConfig::FlatSine { .. } => "flat-sine",
            GeometryConfig::SphereGeodesic { .. } => "sphere-geodesic",
            GeometryConfig::HyperbolicGeodesic { .. } => "hyperbolic-geodesic",
            GeometryConfig::SphereCircle { .. } => "sphere-circle",
            GeometryConfig::Custom { .. } => "custom",
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            GeometryConfig::FlatLine { length }
            | GeometryConfig::FlatArc { length, .. }
            | GeometryConfig::FlatSine { length, .. }
            | GeometryConfig::SphereGeodesic { length }
            | GeometryConfig::HyperbolicGeodesic { length }
            | GeometryConfig::SphereCircle { length, .. }
            | GeometryConfig::Custom { length, .. } => *length,
        }
    }

    /// Look up a preset by name with its default parameters.
    pub fn preset(name: &str) -> Option<Self> {
        let length = PI;
        Some(match name {
            "flat-line" => GeometryConfig::FlatLine { length },
            "flat-arc" => GeometryConfig::FlatArc {
                length,
                curvature: 1.0,
            },
            "flat-sine" => GeometryConfig::FlatSine {
                length,
                amplitude: 1.0,
            },
            "sphere-geodesic" => GeometryConfig::SphereGeodesic { length },
            "hyperbolic-geodesic" => GeometryConfig::HyperbolicGeodesic { length },
            "sphere-circle" => GeometryConfig::SphereCircle {
                length,
                curvature: 1.0,
            },
            _ => return None,
        })
    }

    pub fn build(&self, epsilon: f64) -> Result<StripGeometry> {
        let length = self.length();
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::config(
                "geometry.length",
                format!("must be positive, got {length}"),
            ));
        }
        let (kappa, gauss) = match self {
            GeometryConfig::FlatLine { .. } => {
                (CurvatureProfile::Constant(0.0), GaussField::Constant(0.0))
            }
            GeometryConfig::FlatArc { curvature, .. } => (
                CurvatureProfile::Constant(*curvature),
                GaussField::Constant(0.0),
            ),
            GeometryConfig::FlatSine { amplitude, .. } => (
                CurvatureProfile::Sine {
                    amplitude: *amplitude,
                    period: length,
                },
                GaussField::Constant(0.0),
            ),
            GeometryConfig::SphereGeodesic { .. } => {
                (CurvatureProfile::Constant(0.0), GaussField::Constant(1.0))
            }
            GeometryConfig::HyperbolicGeodesic { .. } => {
                (CurvatureProfile::Constant(0.0), GaussField::Constant(-1.0))
            }
            GeometryConfig::SphereCircle { curvature, .. } => (
                CurvatureProfile::Constant(*curvature),
                GaussField::Constant(1.0),
            ),
            GeometryConfig::Custom { kappa, gauss, .. } => {
                let spline = CubicSpline::new(kappa.s.clone(), kappa.values.clone())
                    .map_err(|e| Error::config("geometry.kappa", e.to_string()))?;
                let (lo, hi) = spline.domain();
                if lo > 0.0 || hi < length {
                    return Err(Error::config(
                        "geometry.kappa.s",
                        format!("table covers [{lo}, {hi}] but the curve needs [0, {length}]"),
                    ));
                }
                let field = match gauss {
                    GaussConfig::Constant { constant } => GaussField::Constant(*constant),
                    GaussConfig::Table { s, u, values } => {
                        let table = SplineTable2d::new(s.clone(), u.clone(), values.clone())
                            .map_err(|e| Error::config("geometry.gauss", e.to_string()))?;
                        let (lo, hi) = table.s_domain();
                        if lo > 0.0 || hi < length {
                            return Err(Error::config(
                                "geometry.gauss.s",
                                format!(
                                    "table covers [{lo}, {hi}] but the curve needs [0, {length}]"
                                ),
                            ));
                        }
                        if let Some((ulo, uhi)) = table.u_domain() {
                            if ulo > -epsilon || uhi < epsilon {
                                return Err(Error::config(
                                    "geometry.gauss.u",
                                    format!("table covers u in [{ulo}, {uhi}] but the strip needs [-{epsilon}, {epsilon}]"),
                                ));
                            }
                        }
                        GaussField::Table(table)
                    }
                };
                (CurvatureProfile::Table(spline), field)
            }
        };
        StripGeometry::new(length, kappa, gauss, epsilon)
            .map_err(|e| Error::config("geometry", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "GridConfig::default_n_s")]
    pub n_s: usize,
    #[serde(default = "GridConfig::default_n_t")]
    pub n_t: usize,
    /// upper bound on `s` nodes chosen by the sweep scaling rule
    #[serde(default = "GridConfig::default_max_n_s")]
    pub max_n_s: usize,
    /// sweep refinement factor on the `s` intervals
    #[serde(default = "GridConfig::default_refine")]
    pub refine: usize,
}

impl GridConfig {
    fn default_n_s() -> usize {
        257
    }
    fn default_n_t() -> usize {
        9
    }
    fn default_max_n_s() -> usize {
        8193
    }
    fn default_refine() -> usize {
        1
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_s: Self::default_n_s(),
            n_t: Self::default_n_t(),
            max_n_s: Self::default_max_n_s(),
            refine: Self::default_refine(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub solver: f64,
    pub flat_top: f64,
    pub grad: f64,
    pub power: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solver: 1e-9,
            flat_top: 1e-6,
            grad: 1e-3,
            power: 1e-8,
        }
    }
}

fn default_run_id() -> String {
    "run".into()
}
fn default_max_mode() -> usize {
    4
}
fn default_mode() -> usize {
    2
}
fn default_seed() -> u64 {
    42
}
fn default_min_slope() -> f64 {
    0.9
}
fn default_observables() -> Vec<Observable> {
    vec![
        Observable::EigenvalueError,
        Observable::L2Error,
        Observable::SupError,
        Observable::ResolventGap,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_run_id")]
    pub run_id: String,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    /// largest mode index `N`
    #[serde(default = "default_max_mode")]
    pub max_mode: usize,
    /// mode studied by `sweep`
    #[serde(default = "default_mode")]
    pub mode: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default = "default_min_slope")]
    pub min_slope: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// All requested half-widths, in the order given.
    pub fn epsilon_list(&self) -> Result<Vec<f64>> {
        match (&self.epsilon, &self.epsilons) {
            (Some(_), Some(_)) => Err(Error::config(
                "epsilon",
                "give either `epsilon` or `epsilons`, not both",
            )),
            (Some(e), None) => Ok(vec![*e]),
            (None, Some(list)) if !list.is_empty() => Ok(list.clone()),
            _ => Err(Error::config(
                "epsilon",
                "missing half-width (`epsilon` or `epsilons`)",
            )),
        }
    }

    /// Field-level checks. With `strict`, every half-width must also satisfy
    /// `eps < L/(2(N-1))` and lie below the validity radius.
    pub fn validate(&self, strict: bool) -> Result<()> {
        if self.max_mode < 2 {
            return Err(Error::config(
                "max_mode",
                format!("N must be >= 2, got {}", self.max_mode),
            ));
        }
        if self.max_mode > crate::eigen::MAX_COUNT {
            return Err(Error::config(
                "max_mode",
                format!("at most {} modes are supported", crate::eigen::MAX_COUNT),
            ));
        }
        if self.mode < 2 || self.mode > self.max_mode {
            return Err(Error::config(
                "mode",
                format!("must lie in 2..={}", self.max_mode),
            ));
        }
        if self.grid.n_s < 8 {
            return Err(Error::config(
                "grid.n_s",
                format!("must be >= 8, got {}", self.grid.n_s),
            ));
        }
        if self.grid.n_t < 3 || self.grid.n_t.is_multiple_of(2) {
            return Err(Error::config(
                "grid.n_t",
                format!("must be odd and >= 3, got {}", self.grid.n_t),
            ));
        }
        if self.grid.max_n_s < self.grid.n_s {
            return Err(Error::config("grid.max_n_s", "must be >= grid.n_s"));
        }
        if self.grid.refine == 0 {
            return Err(Error::config("grid.refine", "must be >= 1"));
        }
        let t = &self.tolerances;
        if !(1e-12..=1e-6).contains(&t.solver) {
            return Err(Error::config(
                "tolerances.solver",
                "must lie in [1e-12, 1e-6]",
            ));
        }
        if !(t.flat_top >= 0.0 && t.flat_top < 1.0) {
            return Err(Error::config("tolerances.flat_top", "must lie in [0, 1)"));
        }
        if !(t.grad > 0.0 && t.grad < 1.0) {
            return Err(Error::config("tolerances.grad", "must lie in (0, 1)"));
        }
        if !(t.power > 0.0 && t.power < 1.0) {
            return Err(Error::config("tolerances.power", "must lie in (0, 1)"));
        }
        let length = self.geometry.length();
        if let Some(delta) = self.delta {
            let limit = length / (4.0 * (self.max_mode - 1) as f64);
            if !(delta > 0.0 && delta < limit) {
                return Err(Error::config(
                    "delta",
                    format!("must lie in (0, L/(4(N-1))) = (0, {limit}), got {delta}"),
                ));
            }
        }
        let eps = self.epsilon_list()?;
        let field = if self.epsilons.is_some() {
            "epsilons"
        } else {
            "epsilon"
        };
        for &e in &eps {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::config(
                    field,
                    format!("half-width must be positive, got {e}"),
                ));
            }
        }
        let geom = self.geometry.build(eps[0])?;
        if strict {
            let rearrange = length / (2.0 * (self.max_mode - 1) as f64);
            if let Some(bad) = eps.iter().find(|&&e| !(e < rearrange)) {
                return Err(Error::config(
                    field,
                    format!(
                        "eps = {bad} violates ε < L/(2(N−1)) = {rearrange} with N = {}; the first N flat eigenpairs would not all be longitudinal",
                        self.max_mode
                    ),
                ));
            }
            let tilde = epsilon_tilde(&geom)?;
            if let Some(bad) = eps.iter().find(|&&e| !(e < tilde)) {
                return Err(Error::config(
                    field,
                    format!("eps = {bad} is not below the validity radius eps_tilde = {tilde}"),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = RunConfig::from_json(r#"{"geometry": {"preset": "flat-arc"}, "epsilon": 0.05}"#)
            .unwrap();
        assert_eq!(cfg.max_mode, 4);
        assert_eq!(cfg.grid.n_t, 9);
        assert_eq!(cfg.geometry, GeometryConfig::preset("flat-arc").unwrap());
        cfg.validate(true).unwrap();
    }

    #[test]
    fn parse_error_reports_line() {
        let err = RunConfig::from_json(
            "{\n  \"geometry\": {\"preset\": \"flat-arc\"},\n  \"epsilon\": ,\n}",
        )
        .unwrap_err();
        match err {
            Error::ConfigParse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(RunConfig::from_json(
            r#"{"geometry": {"preset": "flat-arc"}, "epsilon": 0.05, "bogus": 1}"#
        )
        .is_err());
    }

    #[test]
    fn rearrange_condition_is_cited() {
        let cfg = RunConfig::from_json(
            r#"{"geometry": {"preset": "flat-line"}, "epsilons": [0.8, 0.4, 0.2, 0.1], "max_mode": 4}"#,
        )
        .unwrap();
        let err = cfg.validate(true).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ε < L/(2(N−1))"), "{msg}");
        assert!(msg.starts_with("config: epsilons"), "{msg}");
        cfg.validate(false).unwrap();
    }

    #[test]
    fn custom_tables_build() {
        let cfg = RunConfig::from_json(
            r#"{"geometry": {"preset": "custom", "length": 2.0,
                 "kappa": {"s": [0, 0.5, 1, 1.5, 2], "values": [1, 1, 1, 1, 1]},
                 "gauss": {"s": [0, 1, 2], "u": [-0.5, 0, 0.5], "values": [[1,1,1],[1,1,1],[1,1,1]]}},
                "epsilon": 0.1}"#,
        )
        .unwrap();
        cfg.validate(true).unwrap();
        let geom = cfg.geometry.build(0.1).unwrap();
        assert!((geom.kappa().value(0.7).unwrap() - 1.0).abs() < 1e-14);
        assert!((geom.gauss().value(0.7, 0.05).unwrap() - 1.0).abs() < 1e-14);
    }
}
