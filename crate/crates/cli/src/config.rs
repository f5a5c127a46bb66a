//! Job configuration read from JSON. Every field except `truncation_radius` has a default,
//! and unknown fields are rejected so typos do not silently fall back to defaults.

use serde::{Deserialize, Serialize};
use torus_spectral::complex::c;
use torus_spectral::kernel::Tolerances;
use torus_spectral::tracer::{ClassifyOptions, Plane, Rect};
use torus_spectral::{dual_lattice, Complex64, Dirac, Dirac64, Error, Lattice64, Potential};

pub type Pair = [f64; 2];

pub fn cx(p: Pair) -> Complex64 {
    c(p[0], p[1])
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    /// Generators of Γ as `[re, im]` pairs.
    #[serde(default = "square_generators")]
    pub lattice: [Pair; 2],
    #[serde(default)]
    pub potential: Vec<Mode>,
    pub truncation_radius: f64,
    #[serde(default)]
    pub tolerances: TolConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub vacuum: VacuumJob,
    #[serde(default)]
    pub indicator: IndicatorJob,
    #[serde(default)]
    pub trace: TraceJob,
    #[serde(default)]
    pub classify: ClassifyJob,
    #[serde(default)]
    pub genus: GenusJob,
    #[serde(default)]
    pub energy: EnergyJob,
    #[serde(default)]
    pub section: SectionJob,
    #[serde(default)]
    pub audit: AuditJob,
}

fn square_generators() -> [Pair; 2] {
    let tp = 2.0 * std::f64::consts::PI;
    [[tp, 0.0], [0.0, tp]]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub c: Pair,
    pub coeff: Pair,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TolConfig {
    pub ker_tol: f64,
    pub proj_tol: f64,
    pub tol_vac: f64,
    pub cond_max: f64,
    pub winding_floor: f64,
    pub nodes: usize,
    pub fit_tol: f64,
    pub zero_sep_rel: f64,
}

impl Default for TolConfig {
    fn default() -> Self {
        let t = Tolerances::<f64>::default();
        Self {
            ker_tol: t.ker_tol,
            proj_tol: t.proj_tol,
            tol_vac: t.tol_vac,
            cond_max: t.cond_max,
            winding_floor: t.winding_floor,
            nodes: t.nodes,
            fit_tol: t.fit_tol,
            zero_sep_rel: t.zero_sep_rel,
        }
    }
}

impl TolConfig {
    pub fn to_core(&self) -> Tolerances<f64> {
        Tolerances {
            ker_tol: self.ker_tol,
            proj_tol: self.proj_tol,
            tol_vac: self.tol_vac,
            cond_max: self.cond_max,
            winding_floor: self.winding_floor,
            nodes: self.nodes,
            fit_tol: self.fit_tol,
            zero_sep_rel: self.zero_sep_rel,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub radius_factors: Vec<f64>,
    pub min_weight: f64,
    pub max_nodes: usize,
    pub real_tol: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let o = ClassifyOptions::<f64>::default();
        Self {
            radius_factors: o.radius_factors,
            min_weight: o.min_weight,
            max_nodes: o.max_nodes,
            real_tol: o.real_tol,
        }
    }
}

impl ClassifierConfig {
    pub fn to_core(&self) -> ClassifyOptions<f64> {
        ClassifyOptions {
            radius_factors: self.radius_factors.clone(),
            min_weight: self.min_weight,
            max_nodes: self.max_nodes,
            real_tol: self.real_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlaneName {
    #[default]
    B,
    A,
}

impl PlaneName {
    pub fn to_core(self) -> Plane {
        match self {
            PlaneName::B => Plane::B,
            PlaneName::A => Plane::A,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub re: Pair,
    pub im: Pair,
}

impl RectConfig {
    pub fn to_core(self) -> Rect<f64> {
        Rect {
            re: (self.re[0], self.re[1]),
            im: (self.im[0], self.im[1]),
        }
    }
}

/// A point `(a, b)` of ℂ².
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub a: Pair,
    pub b: Pair,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VacuumJob {
    pub window_radius: f64,
}

impl Default for VacuumJob {
    fn default() -> Self {
        Self { window_radius: 0.6 }
    }
}

/// Grid `origin + s·u + t·v` over `s ∈ u_range`, `t ∈ v_range`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IndicatorJob {
    pub origin: Point,
    pub u: Point,
    pub v: Point,
    pub u_range: Pair,
    pub v_range: Pair,
    pub n_u: usize,
    pub n_v: usize,
}

impl Default for IndicatorJob {
    fn default() -> Self {
        Self {
            origin: Point { a: [0.0, 0.0], b: [0.0, 0.0] },
            u: Point { a: [1.0, 0.0], b: [0.0, 0.0] },
            v: Point { a: [0.0, 0.0], b: [1.0, 0.0] },
            u_range: [-1.0, 1.0],
            v_range: [-1.0, 1.0],
            n_u: 60,
            n_v: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TraceJob {
    pub plane: PlaneName,
    pub region: RectConfig,
    pub step: f64,
    pub eps: f64,
}

impl Default for TraceJob {
    fn default() -> Self {
        Self {
            plane: PlaneName::B,
            region: RectConfig { re: [2.1, 2.4], im: [0.1, 0.4] },
            step: 0.05,
            eps: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyJob {
    /// Explicit `(c'', c')` pairs; when empty every pair in the window is classified.
    pub pairs: Vec<[Pair; 2]>,
    pub window_radius: f64,
    pub eps: f64,
}

impl Default for ClassifyJob {
    fn default() -> Self {
        Self { pairs: vec![], window_radius: 0.6, eps: 0.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GenusJob {
    pub window_radius: f64,
    pub eps: f64,
}

impl Default for GenusJob {
    fn default() -> Self {
        Self { window_radius: 1.1, eps: 0.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyJob {
    pub inner_radius: Option<f64>,
    pub radii: usize,
    pub rays: usize,
    pub eps: f64,
    pub degree: usize,
}

impl Default for EnergyJob {
    fn default() -> Self {
        Self { inner_radius: None, radii: 6, rays: 3, eps: 0.1, degree: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SectionJob {
    pub plane: PlaneName,
    /// Plane points followed in order; each gives one sample.
    pub path: Vec<Pair>,
    pub eps: f64,
    /// Torus points at which the S-map is evaluated.
    pub torus_points: Vec<Pair>,
}

impl Default for SectionJob {
    fn default() -> Self {
        Self {
            plane: PlaneName::B,
            path: vec![[5.0, 0.0], [10.0, 0.0], [20.0, 0.0]],
            eps: 0.1,
            torus_points: vec![[0.0, 0.0]],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AuditJob {
    pub plane: PlaneName,
    pub region: RectConfig,
    pub step: f64,
    pub eps: f64,
    /// Half-width, in dual cells, of the core excluded from the tube audit.
    pub core_cells: f64,
}

impl Default for AuditJob {
    fn default() -> Self {
        Self {
            plane: PlaneName::B,
            region: RectConfig { re: [2.1, 2.4], im: [0.1, 0.4] },
            step: 0.05,
            eps: 0.05,
            core_cells: 1.0,
        }
    }
}

/// Everything a task needs, built once from a validated config.
pub struct Setup {
    pub lattice: Lattice64,
    pub dirac: Dirac64,
    pub tol: Tolerances<f64>,
    pub classifier: ClassifyOptions<f64>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn check_range(name: &str, r: Pair) -> Result<(), Error> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(invalid(format!("{name} must be a finite range [lo, hi] with lo <= hi")));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<(), Error> {
    if !(x.is_finite() && x > 0.0) {
        return Err(invalid(format!("{name} must be positive")));
    }
    Ok(())
}

impl JobConfig {
    pub fn setup(&self) -> Result<Setup, Error> {
        let lattice = Lattice64::new(cx(self.lattice[0]), cx(self.lattice[1]))?;
        let dual = dual_lattice(&lattice)?;
        let modes: Vec<_> = self.potential.iter().map(|m| (cx(m.c), cx(m.coeff))).collect();
        let potential = Potential::new(&dual, &modes)?;
        check_positive("truncation_radius", self.truncation_radius)?;
        if self.truncation_radius < 2.0 * potential.support_radius() {
            return Err(invalid(format!(
                "truncation_radius {} is below twice the support radius {} of the potential",
                self.truncation_radius,
                potential.support_radius()
            )));
        }
        self.validate_tasks()?;
        let dirac = Dirac::new(&potential, self.truncation_radius)?;
        Ok(Setup {
            lattice,
            dirac,
            tol: self.tolerances.to_core(),
            classifier: self.classifier.to_core(),
        })
    }

    fn validate_tasks(&self) -> Result<(), Error> {
        let t = &self.tolerances;
        for (name, x) in [
            ("ker_tol", t.ker_tol),
            ("proj_tol", t.proj_tol),
            ("tol_vac", t.tol_vac),
            ("cond_max", t.cond_max),
            ("winding_floor", t.winding_floor),
            ("fit_tol", t.fit_tol),
            ("zero_sep_rel", t.zero_sep_rel),
        ] {
            check_positive(&format!("tolerances.{name}"), x)?;
        }
        if t.nodes < 4 {
            return Err(invalid("tolerances.nodes must be at least 4"));
        }
        if self.classifier.radius_factors.is_empty() {
            return Err(invalid("classifier.radius_factors must not be empty"));
        }
        let ind = &self.indicator;
        check_range("indicator.u_range", ind.u_range)?;
        check_range("indicator.v_range", ind.v_range)?;
        if ind.n_u == 0 || ind.n_v == 0 {
            return Err(invalid("indicator grid must have at least one point per axis"));
        }
        for (name, r, step, eps) in [
            ("trace", self.trace.region, self.trace.step, self.trace.eps),
            ("audit", self.audit.region, self.audit.step, self.audit.eps),
        ] {
            check_range(&format!("{name}.region.re"), r.re)?;
            check_range(&format!("{name}.region.im"), r.im)?;
            check_positive(&format!("{name}.step"), step)?;
            check_positive(&format!("{name}.eps"), eps)?;
        }
        check_positive("vacuum.window_radius", self.vacuum.window_radius)?;
        check_positive("classify.window_radius", self.classify.window_radius)?;
        check_positive("classify.eps", self.classify.eps)?;
        check_positive("genus.window_radius", self.genus.window_radius)?;
        check_positive("genus.eps", self.genus.eps)?;
        check_positive("energy.eps", self.energy.eps)?;
        if let Some(r) = self.energy.inner_radius {
            check_positive("energy.inner_radius", r)?;
        }
        check_positive("section.eps", self.section.eps)?;
        Ok(())
    }
}
