//! Experiment configuration: a TOML document describing the domain, fields,
//! parameters, grids and the options of each subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::DeltaVariant;
use crate::fields::{field_library, FieldSpec, LibraryField};
use crate::geometry::{mcshane_extend, BoxRegion, Domain, EpiWindow, Formula, LipschitzFn, Side};
use crate::korn::{ConstantName, Method};
use crate::seminorms::FracParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub params: ParamSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extend: Option<ExtendOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub korn: Option<KornOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardy: Option<HardyOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perisolve: Option<PeriOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeOptions>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub s: f64,
    pub p: f64,
}

impl Default for ParamSpec {
    fn default() -> Self {
        ParamSpec { s: 0.5, p: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: Vec<f64>,
    /// Near-field refinement depth; each subcommand has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { h: vec![1.0 / 16.0], depth: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideSpec {
    #[default]
    Upper,
    Lower,
}

impl From<SideSpec> for Side {
    fn from(s: SideSpec) -> Side {
        match s {
            SideSpec::Upper => Side::Upper,
            SideSpec::Lower => Side::Lower,
        }
    }
}

/// Boundary functions of one variable (or affine in several).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Zero,
    Affine {
        slope: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
    PiecewiseLinear { xs: Vec<f64>, ys: Vec<f64> },
    /// `slope · |x − center|`
    Abs { center: f64, slope: f64 },
    Sine { amplitude: f64, frequency: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WindowSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Band { lo: Vec<f64>, hi: Vec<f64>, height: f64 },
}

/// McShane extension of the graph from `[a, b]` with constant `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McShaneSpec {
    pub a: f64,
    pub b: f64,
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    UnitSquare,
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// A box inside `{x_n > 0}`.
    HalfSpace {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Epigraph {
        graph: GraphSpec,
        window: WindowSpec,
        #[serde(default)]
        side: SideSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mcshane: Option<McShaneSpec>,
    },
    /// `{x₁ > 0, x₂ > αx₁}` cut to `x₁ < width`, `x₂ − αx₁ < height`.
    Angular {
        alpha: f64,
        width: f64,
        height: f64,
    },
    /// Flat list `[x₀, y₀, x₁, y₁, …]`, counter-clockwise.
    Polygon {
        vertices: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtendMode {
    /// `(x, E(u)(x))` on a lattice over `D` and its lower window.
    Points,
    #[default]
    Ratio,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendOptions {
    #[serde(default)]
    pub mode: ExtendMode,
    /// Cover reach constant entering `δ`.
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default)]
    pub delta_variant: DeltaVariant,
    /// Overrides the `δ` formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub drop_alpha_term: bool,
    /// Lattice points per axis in points mode.
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        ExtendOptions {
            mode: ExtendMode::Ratio,
            c2: default_c2(),
            delta_variant: DeltaVariant::TwoPlusM,
            delta: None,
            drop_alpha_term: false,
            points: default_points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KornOptions {
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default = "default_constants")]
    pub constants: Vec<ConstantName>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Korn–Poincaré scaling study over these dilation factors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    /// `C₂` on the band above `M|x₁ − ½|` for each `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_sweep: Option<Vec<f64>>,
}

impl Default for KornOptions {
    fn default() -> Self {
        KornOptions {
            degrees: default_degrees(),
            constants: default_constants(),
            method: default_method(),
            samples: default_samples(),
            taus: None,
            m_sweep: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyOptions {
    /// Explicit `λ < μ`; otherwise taken from the extension coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default)]
    pub delta_variant: DeltaVariant,
}

impl Default for HardyOptions {
    fn default() -> Self {
        HardyOptions { lambda: None, mu: None, c2: default_c2(), delta_variant: DeltaVariant::TwoPlusM }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverOptions {
    #[serde(default = "default_min_side")]
    pub min_side: f64,
    #[serde(default = "default_per_cell")]
    pub samples_per_cell: usize,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { min_side: default_min_side(), samples_per_cell: default_per_cell() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Gagliardo,
    #[default]
    Projected,
    Lp,
    Perienergy,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceOptions {
    #[serde(default)]
    pub quantity: Quantity,
}

/// Galerkin solve with the displacement clamped on `{x_axis ≤ clamp_at}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriOptions {
    pub load: FieldSpec,
    #[serde(default)]
    pub clamp_axis: usize,
    pub clamp_at: f64,
    /// Width of the smooth transition of the basis cutoff.
    #[serde(default = "default_transition")]
    pub transition: f64,
    #[serde(default = "default_peri_degree")]
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeOptions {
    /// Widths of the boundary ramp of the cut-off rotation.
    pub eps: Vec<f64>,
}

fn default_c2() -> f64 {
    3.0
}
fn default_points() -> usize {
    21
}
fn default_degrees() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_constants() -> Vec<ConstantName> {
    vec![ConstantName::C2]
}
fn default_method() -> Method {
    Method::Eig
}
fn default_samples() -> usize {
    1000
}
fn default_min_side() -> f64 {
    1.0 / 64.0
}
fn default_per_cell() -> usize {
    100
}
fn default_transition() -> f64 {
    0.3
}
fn default_peri_degree() -> usize {
    3
}

impl GraphSpec {
    pub fn build(&self, n: usize) -> Result<LipschitzFn> {
        let one_d = |what: &str| {
            if n != 2 {
                Err(Error::Config(format!("graph `{what}` needs n = 2")))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            GraphSpec::Zero => LipschitzFn::zero(n),
            GraphSpec::Affine { slope, intercept } => {
                if slope.len() != n - 1 {
                    return Err(Error::Config(format!("graph slope needs {} entries", n - 1)));
                }
                LipschitzFn::affine(slope.clone(), *intercept)
            }
            GraphSpec::PiecewiseLinear { xs, ys } => {
                one_d("piecewise-linear")?;
                LipschitzFn::piecewise_linear(xs.clone(), ys.clone())?
            }
            GraphSpec::Abs { center, slope } => {
                one_d("abs")?;
                LipschitzFn::analytic(Formula::Abs { center: *center, slope: *slope })
            }
            GraphSpec::Sine { amplitude, frequency } => {
                one_d("sine")?;
                LipschitzFn::analytic(Formula::Sine { amplitude: *amplitude, frequency: *frequency })
            }
        })
    }
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::UnitSquare | DomainSpec::Angular { .. } | DomainSpec::Polygon { .. } => 2,
            DomainSpec::Box { lo, .. } | DomainSpec::HalfSpace { lo, .. } => lo.len(),
            DomainSpec::Epigraph { window, .. } => match window {
                WindowSpec::Box { lo, .. } => lo.len(),
                WindowSpec::Band { lo, .. } => lo.len() + 1,
            },
        }
    }

    pub fn build(&self) -> Result<Domain> {
        let boxed = |lo: &Vec<f64>, hi: &Vec<f64>| BoxRegion::new(lo.clone(), hi.clone());
        match self {
            DomainSpec::UnitSquare => Ok(Domain::unit_square()),
            DomainSpec::Box { lo, hi } => Ok(Domain::boxed(boxed(lo, hi)?)),
            DomainSpec::HalfSpace { lo, hi } => Domain::half_space_trunc(boxed(lo, hi)?),
            DomainSpec::Epigraph { graph, window, side, mcshane } => {
                let n = self.dim();
                let mut f = graph.build(n)?;
                if let Some(ms) = mcshane {
                    f = mcshane_extend(&f.on_interval(ms.a, ms.b), ms.m)?;
                }
                let window = match window {
                    WindowSpec::Box { lo, hi } => EpiWindow::Box(boxed(lo, hi)?),
                    WindowSpec::Band { lo, hi, height } => EpiWindow::Band { lo: lo.clone(), hi: hi.clone(), height: *height },
                };
                Domain::epigraph(f, window, (*side).into())
            }
            DomainSpec::Angular { alpha, width, height } => Domain::angular(*alpha, *width, *height, Side::Upper),
            DomainSpec::Polygon { vertices } => {
                if vertices.len() % 2 != 0 {
                    return Err(Error::Config("polygon vertices must be a flat list of (x, y) pairs".into()));
                }
                Domain::convex_polygon(vertices.chunks(2).map(|c| [c[0], c[1]]).collect())
            }
        }
    }
}

/// A validated configuration with its built objects.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub domain: Domain,
    pub params: FracParams,
    pub fields: Vec<LibraryField>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Build the domain, parameters and fields; every failure is a config error.
    pub fn prepare(&self) -> Result<Prepared> {
        let as_config = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        let domain = self.domain.build().map_err(|e| as_config(e).context("domain"))?;
        let n = domain.dim();
        let params = FracParams::new(self.params.s, self.params.p, n).map_err(|e| as_config(e).context("params"))?;
        if self.grid.h.is_empty() || self.grid.h.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::Config("grid.h: need at least one positive grid size".into()));
        }
        if let Some(d) = self.grid.depth {
            if d > 8 {
                return Err(Error::Config(format!("grid.depth: {d} exceeds 8")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads: must be at least 1".into()));
        }
        let fields = self
            .fields
            .iter()
            .enumerate()
            .map(|(i, f)| field_library(f, n).map_err(|e| as_config(e).context(&format!("fields[{i}]"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(k) = &self.korn {
            if k.degrees.is_empty() || k.degrees.iter().any(|&d| d == 0 || d > 8) {
                return Err(Error::Config("korn.degrees: each degree must lie in 1..=8".into()));
            }
            if params.p != 2.0 {
                let eig_only = k.constants.iter().any(|c| *c != ConstantName::C2) || k.method != Method::RandomSearch;
                if eig_only {
                    return Err(Error::Config(
                        "korn: p != 2 supports only constants = [\"c2\"] with method = \"random-search\"".into(),
                    ));
                }
            }
            if k.constants.iter().any(|c| matches!(c, ConstantName::Hardy | ConstantName::ExtNorm)) {
                return Err(Error::Config("korn.constants: use the hardy / extend subcommands for these".into()));
            }
        }
        Ok(Prepared { config: self.clone(), domain, params, fields })
    }
}

impl Error {
    fn context(self, what: &str) -> Error {
        match self {
            Error::Config(m) => Error::Config(format!("{what}: {m}")),
            other => other,
        }
    }
}
