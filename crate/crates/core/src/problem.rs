//! JSON problem files, reports and the mode runners behind the `rhc` binary.
//!
//! A problem file names a contour, a jump matrix given by expressions in `z`
//! (see [`crate::expr`]), a normalization and optional tolerance overrides;
//! the `idnls` mode instead takes reflection coefficient, lattice index and
//! pole data. `docs/problem.schema.json` describes the format; loading is
//! strict (unknown fields are rejected) and every field is validated here.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cauchy::CauchyProjectors;
use crate::contour::{Circle, ContourSystem, Orientation};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::factorize::{hermitian_factorize, scalar_factorize};
use crate::idnls::{
    self, AugmentOptions, AugmentedProblem, CircleRole, IdnlsSpec, Pole, ResidueCheck, Sign,
};
use crate::rhp::{self, jump_fn, Branch, JumpData, RHProblem, RHSolution, Tolerances};
use crate::{CMat, C64};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    FactorizeScalar,
    FactorizeHermitian,
    CheckSymmetry,
    Index,
    Idnls,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        [
            Mode::Solve,
            Mode::FactorizeScalar,
            Mode::FactorizeHermitian,
            Mode::CheckSymmetry,
            Mode::Index,
            Mode::Idnls,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::Input(format!("unknown mode '{s}'")))
    }
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::FactorizeScalar => "factorize-scalar",
            Mode::FactorizeHermitian => "factorize-hermitian",
            Mode::CheckSymmetry => "check-symmetry",
            Mode::Index => "index",
            Mode::Idnls => "idnls",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub orientation: Orientation,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    64
}

/// Either one expression (scalar problem) or a square matrix of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JumpSpec {
    Scalar(String),
    Matrix(Vec<Vec<String>>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub delta_inv: Option<f64>,
    pub sigma_min: Option<f64>,
    pub tau_rank: Option<f64>,
    pub reconstruction: Option<f64>,
    pub symmetry: Option<f64>,
    pub margin: Option<f64>,
}

impl ToleranceOverrides {
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "delta_inv" => &mut self.delta_inv,
            "sigma_min" => &mut self.sigma_min,
            "tau_rank" => &mut self.tau_rank,
            "reconstruction" => &mut self.reconstruction,
            "symmetry" => &mut self.symmetry,
            "margin" => &mut self.margin,
            _ => return Err(Error::Input(format!("unknown tolerance '{key}'"))),
        };
        *slot = Some(value);
        Ok(())
    }

    fn apply(&self, mut t: Tolerances) -> Result<Tolerances> {
        for (name, over, slot) in [
            ("delta_inv", self.delta_inv, &mut t.delta_inv),
            ("sigma_min", self.sigma_min, &mut t.sigma_min),
            ("tau_rank", self.tau_rank, &mut t.tau_rank),
            ("reconstruction", self.reconstruction, &mut t.reconstruction),
            ("symmetry", self.symmetry, &mut t.symmetry),
            ("margin", self.margin, &mut t.margin),
        ] {
            if let Some(v) = over {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Input(format!(
                        "tolerance {name} must be positive and finite, got {v}"
                    )));
                }
                *slot = v;
            }
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizeSpec {
    /// Reference point on the `+` side; `null` means infinity.
    pub z_plus: Option<[f64; 2]>,
    pub z_minus: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdnlsBlock {
    #[serde(default = "zero_expr")]
    pub r: String,
    #[serde(default)]
    pub n: i32,
    /// `[re z, im z, re c, im c]` per pole.
    #[serde(default)]
    pub poles: Vec<[f64; 4]>,
    pub sign: Sign,
    #[serde(default)]
    pub conjugate: bool,
    #[serde(default)]
    pub strict_scattering_symmetry: bool,
    pub unit_nodes: Option<usize>,
    pub pole_nodes: Option<usize>,
    pub aux_nodes: Option<usize>,
    pub pole_radii: Option<Vec<f64>>,
    pub outer_radius: Option<f64>,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    /// Must match the mode given on the command line when present.
    pub mode: Option<Mode>,
    #[serde(default)]
    pub contour: Vec<CircleSpec>,
    pub jump: Option<JumpSpec>,
    /// Definition of `r(.)` available inside `jump`.
    pub r: Option<String>,
    /// Normalization at infinity as `[re, im]` entries; identity by default.
    pub h: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub splitting: Branch,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    pub factorize: Option<FactorizeSpec>,
    pub idnls: Option<IdnlsBlock>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: ProblemFile =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("problem file: {e}")))?;
        if p.version != FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                p.version
            )));
        }
        Ok(p)
    }
}

/// Rectangular sampling grid: `nx * ny` points over `[re0, re1] x [im0, im1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleGrid {
    pub nx: usize,
    pub ny: usize,
    pub bbox: [f64; 4],
}

impl SampleGrid {
    pub fn points(&self) -> Vec<C64> {
        let axis = |n: usize, a: f64, b: f64, k: usize| {
            if n == 1 {
                (a + b) / 2.0
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(C64::new(
                    axis(self.nx, self.bbox[0], self.bbox[1], i),
                    axis(self.ny, self.bbox[2], self.bbox[3], j),
                ));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides every circle's node count.
    pub nodes: Option<usize>,
    pub tolerances: ToleranceOverrides,
    pub samples: Option<SampleGrid>,
    pub timing: bool,
}

/// One entry of the sampled solution at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub region: &'static str,
    pub re_z: f64,
    pub im_z: f64,
    pub row: usize,
    pub col: usize,
    pub re_m: f64,
    pub im_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleReport {
    pub center: [f64; 2],
    pub radius: f64,
    pub orientation: Orientation,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    pub role: Option<CircleRole>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarFactorizationReport {
    pub index: i64,
    pub identity_residual: f64,
    pub analyticity_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermitianReport {
    pub c: Vec<Vec<[f64; 2]>>,
    pub c_stddev: f64,
    pub c_max_deviation: f64,
    pub product_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdnlsReport {
    pub conjugated: bool,
    pub pole_radii: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_radius: Option<f64>,
    pub residues: Vec<ResidueCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    HypothesisFailed,
    NearSingular,
    Error,
}

/// Machine-readable result of one run. Absent fields were not computed by
/// the mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub version: u32,
    pub mode: Mode,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_jump: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smallest_singular_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backward_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_ker: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_coker: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation_decades: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_re_eig: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetric_off_circle: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hermitian_defect: Option<f64>,
    pub node_counts: Vec<usize>,
    pub circles: Vec<CircleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar_factorization: Option<ScalarFactorizationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hermitian_factorization: Option<HermitianReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idnls: Option<IdnlsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Report {
    fn new(mode: Mode) -> Self {
        Report {
            version: FORMAT_VERSION,
            mode,
            status: Status::Ok,
            error: None,
            residual_jump: None,
            smallest_singular_value: None,
            backward_error: None,
            dim_ker: None,
            dim_coker: None,
            separation_decades: None,
            min_re_eig: None,
            symmetric_off_circle: None,
            symmetry_defect: None,
            hermitian_defect: None,
            node_counts: Vec::new(),
            circles: Vec::new(),
            scalar_factorization: None,
            hermitian_factorization: None,
            idnls: None,
            timing: None,
        }
    }

    /// Report for a run that failed with `e`.
    pub fn failure(mode: Mode, e: &Error) -> Self {
        let mut r = Report::new(mode);
        r.status = match exit_code(e) {
            2 => Status::HypothesisFailed,
            3 => Status::NearSingular,
            _ => Status::Error,
        };
        r.error = Some(e.to_string());
        r
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => 0,
            Status::HypothesisFailed => 2,
            Status::NearSingular => 3,
            Status::Error => 1,
        }
    }

    fn describe(&mut self, system: &ContourSystem, roles: Option<&[CircleRole]>) {
        self.node_counts = system.node_counts();
        self.circles = system
            .circles()
            .iter()
            .enumerate()
            .map(|(i, c)| CircleReport {
                center: [c.center.re, c.center.im],
                radius: c.radius,
                orientation: c.orientation,
                nodes: c.node_count,
                role: roles.map(|r| r[i]),
            })
            .collect();
    }

    fn take_solution(&mut self, sol: &RHSolution) {
        self.residual_jump = Some(sol.residual_jump);
        self.smallest_singular_value = Some(sol.smallest_singular_value);
        self.backward_error = Some(sol.backward_error);
    }

    fn take_inversion(&mut self, r: &rhp::InversionReport) {
        self.symmetric_off_circle = Some(r.symmetric_off_circle);
        self.symmetry_defect = Some(r.symmetry_defect);
        self.min_re_eig = Some(r.min_re_eig_on_circle);
        self.hermitian_defect = Some(r.hermitian_defect_on_circle);
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Eval(e.to_string()))
    }

    /// Fails if any numeric field is NaN or infinite (JSON cannot carry them).
    pub fn check_finite(&self) -> Result<()> {
        fn walk(v: &serde_json::Value, path: &str) -> Result<()> {
            match v {
                serde_json::Value::Null => {
                    Err(Error::Eval(format!("report field {path} is not finite")))
                }
                serde_json::Value::Array(a) => a
                    .iter()
                    .enumerate()
                    .try_for_each(|(i, x)| walk(x, &format!("{path}[{i}]"))),
                serde_json::Value::Object(o) => o
                    .iter()
                    .try_for_each(|(k, x)| walk(x, &format!("{path}.{k}"))),
                _ => Ok(()),
            }
        }
        // serde_json turns non-finite floats into null; no field is null otherwise
        walk(
            &serde_json::to_value(self).map_err(|e| Error::Eval(e.to_string()))?,
            "report",
        )
    }
}

/// Exit status for a failed run: 1 input, 2 hypothesis, 3 near-singular.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NearSingularOperator { .. } | Error::DegenerateSolitonSystem(_) => 3,
        Error::Hypothesis(_)
        | Error::ReflectionTooLarge(_)
        | Error::NonConstantC(_)
        | Error::NonPositiveC(_)
        | Error::NotInversionInvariantContour(_)
        | Error::WindingAmbiguity(_)
        | Error::RankAmbiguity { .. }
        | Error::SingularJump { .. } => 2,
        _ => 1,
    }
}

pub struct RunOutput {
    pub report: Report,
    pub samples: Vec<Sample>,
}

/// File tolerances, then command-line overrides, on top of the defaults.
fn tolerances(problem: &ProblemFile, opts: &RunOptions) -> Result<Tolerances> {
    let mut tol_over = problem.tolerances;
    for (slot, v) in [
        (&mut tol_over.delta_inv, opts.tolerances.delta_inv),
        (&mut tol_over.sigma_min, opts.tolerances.sigma_min),
        (&mut tol_over.tau_rank, opts.tolerances.tau_rank),
        (&mut tol_over.reconstruction, opts.tolerances.reconstruction),
        (&mut tol_over.symmetry, opts.tolerances.symmetry),
        (&mut tol_over.margin, opts.tolerances.margin),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    tol_over.apply(Tolerances::default())
}

fn check_mode(problem: &ProblemFile, mode: Mode) -> Result<()> {
    match problem.mode {
        Some(m) if m != mode => Err(Error::Input(format!(
            "problem file is for mode '{}', not '{}'",
            m.name(),
            mode.name()
        ))),
        _ => Ok(()),
    }
}

pub fn run(problem: &ProblemFile, mode: Mode, opts: &RunOptions) -> Result<RunOutput> {
    check_mode(problem, mode)?;
    let start = Instant::now();
    let tol = tolerances(problem, opts)?;
    let mut out = match mode {
        Mode::Idnls => run_idnls(problem, opts, tol)?,
        _ => run_contour_mode(problem, mode, opts, tol)?,
    };
    if opts.timing {
        out.report.timing = Some(Timing {
            total_seconds: start.elapsed().as_secs_f64(),
        });
    }
    out.report.check_finite()?;
    Ok(out)
}

fn parse_jump(problem: &ProblemFile) -> Result<(usize, Vec<Expression>)> {
    let r = problem.r.as_deref().map(Expression::parse).transpose()?;
    let bind = |s: &String| -> Result<Expression> {
        let e = Expression::parse(s)?;
        match &r {
            Some(r) => e.with_r(r),
            None => Ok(e),
        }
    };
    match problem.jump.as_ref() {
        None => Err(Error::Input("missing 'jump'".into())),
        Some(JumpSpec::Scalar(s)) => Ok((1, vec![bind(s)?])),
        Some(JumpSpec::Matrix(rows)) => {
            let n = rows.len();
            if n == 0 || rows.iter().any(|row| row.len() != n) {
                return Err(Error::Input(
                    "'jump' must be a non-empty square matrix".into(),
                ));
            }
            Ok((n, rows.iter().flatten().map(bind).collect::<Result<_>>()?))
        }
    }
}

fn build_system(problem: &ProblemFile, nodes: Option<usize>) -> Result<Arc<ContourSystem>> {
    if problem.contour.is_empty() {
        return Err(Error::Input("missing 'contour'".into()));
    }
    let circles = problem
        .contour
        .iter()
        .map(|c| {
            Circle::new(
                C64::new(c.center[0], c.center[1]),
                c.radius,
                c.orientation,
                nodes.unwrap_or(c.nodes),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(ContourSystem::new(circles)?))
}

fn normalization(problem: &ProblemFile, dim: usize) -> Result<CMat> {
    match &problem.h {
        None => Ok(CMat::identity(dim, dim)),
        Some(rows) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Input(format!("'h' must be {dim} x {dim}")));
            }
            Ok(CMat::from_fn(dim, dim, |i, j| {
                C64::new(rows[i][j][0], rows[i][j][1])
            }))
        }
    }
}

/// Evaluates the jump expressions at every node; any singular evaluation is
/// an input error naming the node.
fn sample_jump(
    system: &Arc<ContourSystem>,
    dim: usize,
    exprs: Vec<Expression>,
    tol: &Tolerances,
) -> Result<JumpData> {
    for node in system.nodes() {
        for e in &exprs {
            e.eval(node.point).map_err(|err| {
                let (circle, local) = system.locate(node.index);
                Error::Eval(format!("{err} (node {local} of circle {circle})"))
            })?;
        }
    }
    let provider = jump_fn(dim, move |_, z| {
        CMat::from_iterator(
            dim,
            dim,
            exprs
                .iter()
                .map(|e| e.eval(z).unwrap_or(C64::new(f64::NAN, f64::NAN))),
        )
        .transpose()
    });
    JumpData::sample(system, provider, tol.delta_inv)
}

fn point(p: Option<[f64; 2]>) -> Option<C64> {
    p.map(|[re, im]| C64::new(re, im))
}

fn contour_jump(
    problem: &ProblemFile,
    opts: &RunOptions,
    tol: &Tolerances,
) -> Result<(Arc<ContourSystem>, usize, JumpData)> {
    if problem.idnls.is_some() {
        return Err(Error::Input(
            "'idnls' block is only valid in mode idnls".into(),
        ));
    }
    let system = build_system(problem, opts.nodes)?;
    let (dim, exprs) = parse_jump(problem)?;
    let jump = sample_jump(&system, dim, exprs, tol)?;
    Ok((system, dim, jump))
}

fn run_contour_mode(
    problem: &ProblemFile,
    mode: Mode,
    opts: &RunOptions,
    tol: Tolerances,
) -> Result<RunOutput> {
    let (system, dim, jump) = contour_jump(problem, opts, &tol)?;
    let mut report = Report::new(mode);
    report.describe(&system, None);
    let mut samples = Vec::new();
    let grid = opts.samples.map(|g| g.points()).unwrap_or_default();
    let region = |z: C64| {
        if system.in_plus_region(z) {
            "plus"
        } else {
            "minus"
        }
    };
    let near = |z: C64| {
        system
            .circles()
            .iter()
            .any(|c| c.distance_to(z) <= tol.margin * c.node_spacing())
    };

    match mode {
        Mode::Solve | Mode::Index => {
            let h = normalization(problem, dim)?;
            let p = RHProblem::with_splitting(jump, problem.splitting, h, tol)?;
            let proj = CauchyProjectors::new(&system);
            if mode == Mode::Index {
                let idx = rhp::index_diagnostics(&p, &proj)?;
                report.dim_ker = Some(idx.dim_ker);
                report.dim_coker = Some(idx.dim_coker);
                report.separation_decades = idx.separation_decades;
                if !grid.is_empty() {
                    return Err(Error::Input("mode index produces no samples".into()));
                }
            } else {
                let sol = rhp::solve(&p, &proj)?;
                report.take_solution(&sol);
                for z in grid.into_iter().filter(|&z| !near(z)) {
                    push_samples(&mut samples, region(z), z, &sol.evaluate_m(z)?);
                }
            }
        }
        Mode::CheckSymmetry => {
            let inv = rhp::check_inversion_hypotheses(&jump, &tol)?;
            report.take_inversion(&inv);
            if !inv.passes() {
                report.status = Status::HypothesisFailed;
            }
            if !grid.is_empty() {
                return Err(Error::Input(
                    "mode check-symmetry produces no samples".into(),
                ));
            }
        }
        Mode::FactorizeScalar => {
            if dim != 1 || system.len() != 1 {
                return Err(Error::Input(
                    "factorize-scalar needs a scalar jump on a single circle".into(),
                ));
            }
            let circle = system.circle(0);
            let f = problem.factorize.clone().unwrap_or_default();
            let (inside, outside) = (Some(circle.center), None);
            let plus_inside = circle.plus_side() == crate::Side::Interior;
            let z_plus = if problem.factorize.is_some() {
                point(f.z_plus)
            } else if plus_inside {
                inside
            } else {
                outside
            };
            let z_minus = if problem.factorize.is_some() {
                point(f.z_minus)
            } else if plus_inside {
                outside
            } else {
                inside
            };
            let fact = scalar_factorize(jump.v(), z_plus, z_minus)?;
            report.scalar_factorization = Some(ScalarFactorizationReport {
                index: fact.index,
                identity_residual: fact.identity_residual(jump.v())?,
                analyticity_defect: fact.analyticity_defect(),
            });
            for z in grid.into_iter().filter(|&z| !near(z)) {
                let m = CMat::from_element(1, 1, fact.m_at(z)?);
                push_samples(&mut samples, region(z), z, &m);
            }
        }
        Mode::FactorizeHermitian => {
            let proj = CauchyProjectors::new(&system);
            let inv = rhp::check_inversion_hypotheses(&jump, &tol)?;
            report.take_inversion(&inv);
            let fact = hermitian_factorize(&jump, &proj, &tol)?;
            report.take_solution(&fact.solution);
            report.hermitian_factorization = Some(HermitianReport {
                c: matrix_pairs(&fact.constant_c),
                c_stddev: fact.c_stddev,
                c_max_deviation: fact.c_max_deviation,
                product_residual: fact.product_residual,
            });
            for z in grid
                .into_iter()
                .filter(|&z| !near(z) && system.in_plus_region(z))
            {
                push_samples(&mut samples, "plus", z, &fact.w_plus_at(z)?);
            }
        }
        Mode::Idnls => unreachable!(),
    }
    Ok(RunOutput { report, samples })
}

fn build_idnls<'a>(
    problem: &'a ProblemFile,
    opts: &RunOptions,
) -> Result<(&'a IdnlsBlock, IdnlsSpec, AugmentedProblem)> {
    let block = problem
        .idnls
        .as_ref()
        .ok_or_else(|| Error::Input("mode idnls needs an 'idnls' block".into()))?;
    if !problem.contour.is_empty() || problem.jump.is_some() || problem.h.is_some() {
        return Err(Error::Input(
            "mode idnls builds its own contour, jump and normalization".into(),
        ));
    }
    let r_expr = Expression::parse(&block.r)?;
    if r_expr.uses_r() {
        return Err(Error::Input("the r expression cannot refer to r".into()));
    }
    // r must be finite on the unit circle, where the jump samples it
    let probe = opts.nodes.or(block.unit_nodes).unwrap_or(128).max(256);
    for k in 0..probe {
        r_expr.eval(C64::from_polar(1.0, 2.0 * PI * k as f64 / probe as f64))?;
    }
    let r_fn: idnls::ScalarFn = {
        let e = r_expr.clone();
        Arc::new(move |z| e.eval(z).unwrap_or(C64::new(f64::NAN, f64::NAN)))
    };
    let poles = block
        .poles
        .iter()
        .map(|p| Pole::new(C64::new(p[0], p[1]), C64::new(p[2], p[3])))
        .collect();
    let mut spec = IdnlsSpec::new(r_fn, block.n, poles, block.sign)?;
    spec.strict_scattering_symmetry = block.strict_scattering_symmetry;

    let defaults = AugmentOptions::default();
    let options = AugmentOptions {
        unit_nodes: opts
            .nodes
            .or(block.unit_nodes)
            .unwrap_or(defaults.unit_nodes),
        pole_nodes: opts
            .nodes
            .or(block.pole_nodes)
            .unwrap_or(defaults.pole_nodes),
        radii: block.pole_radii.clone(),
    };
    if spec.sign == Sign::Defocusing {
        // checks sup |r| < 1 on the unit nodes
        idnls::build_defocusing_jump(&spec, options.unit_nodes)?;
    }
    let base = idnls::remove_poles(&spec, &options)?;
    let ap = if block.conjugate {
        idnls::conjugate(
            &base,
            block.outer_radius,
            opts.nodes.or(block.aux_nodes).unwrap_or(64),
        )?
    } else {
        if block.outer_radius.is_some() || block.aux_nodes.is_some() {
            return Err(Error::Input(
                "outer_radius and aux_nodes need conjugate = true".into(),
            ));
        }
        base
    };
    Ok((block, spec, ap))
}

fn run_idnls(problem: &ProblemFile, opts: &RunOptions, tol: Tolerances) -> Result<RunOutput> {
    let (block, spec, ap) = build_idnls(problem, opts)?;
    let mut report = Report::new(Mode::Idnls);
    report.describe(ap.system(), Some(ap.roles()));

    // inversion hypotheses only hold for the conjugated (or pole-free) jump
    if block.conjugate || spec.poles.is_empty() {
        let inv = rhp::check_inversion_hypotheses(ap.jump(), &tol)?;
        report.take_inversion(&inv);
    }
    let p = ap.rh_problem(tol)?;
    let idx = rhp::index_diagnostics(&p, &CauchyProjectors::new(ap.system()))?;
    report.dim_ker = Some(idx.dim_ker);
    report.dim_coker = Some(idx.dim_coker);
    report.separation_decades = idx.separation_decades;
    let sol = ap.solve(tol)?;
    report.take_solution(&sol);
    report.idnls = Some(IdnlsReport {
        conjugated: block.conjugate,
        pole_radii: ap.radii().to_vec(),
        outer_radius: ap.conjugation().map(|c| c.radius),
        residues: idnls::residue_checks(&ap, &sol)?,
    });

    let mut samples = Vec::new();
    if let Some(g) = opts.samples {
        let system = ap.system();
        for z in g.points() {
            let close_circle = system
                .circles()
                .iter()
                .any(|c| c.distance_to(z) <= tol.margin * c.node_spacing());
            let close_pole = spec
                .poles
                .iter()
                .any(|p| (z - p.z).norm() < 1e-12 || (z - p.mirror()).norm() < 1e-12);
            if close_circle || close_pole {
                continue;
            }
            let region = if z.norm() < 1.0 { "inside" } else { "outside" };
            push_samples(&mut samples, region, z, &ap.recover(&sol, z)?);
        }
    }
    Ok(RunOutput { report, samples })
}

/// A solved `solve` or `idnls` problem that can still be evaluated.
pub struct SolvedProblem {
    solution: RHSolution,
    augmented: Option<AugmentedProblem>,
}

impl SolvedProblem {
    pub fn dim(&self) -> usize {
        self.solution.dim()
    }

    pub fn solution(&self) -> &RHSolution {
        &self.solution
    }

    pub fn residual_jump(&self) -> f64 {
        self.solution.residual_jump
    }

    pub fn smallest_singular_value(&self) -> f64 {
        self.solution.smallest_singular_value
    }

    /// `m(z)` off the contour; for `idnls` the recovered `M(z)` of the
    /// original problem with poles.
    pub fn evaluate(&self, z: C64) -> Result<CMat> {
        match &self.augmented {
            Some(ap) => ap.recover(&self.solution, z),
            None => self.solution.evaluate_m(z),
        }
    }
}

/// Solves a `solve` or `idnls` problem and keeps the solution.
pub fn solve(problem: &ProblemFile, mode: Mode, opts: &RunOptions) -> Result<SolvedProblem> {
    check_mode(problem, mode)?;
    let tol = tolerances(problem, opts)?;
    match mode {
        Mode::Solve => {
            let (system, dim, jump) = contour_jump(problem, opts, &tol)?;
            let p = RHProblem::with_splitting(
                jump,
                problem.splitting,
                normalization(problem, dim)?,
                tol,
            )?;
            let solution = rhp::solve(&p, &CauchyProjectors::new(&system))?;
            Ok(SolvedProblem {
                solution,
                augmented: None,
            })
        }
        Mode::Idnls => {
            let (_, _, ap) = build_idnls(problem, opts)?;
            let solution = ap.solve(tol)?;
            Ok(SolvedProblem {
                solution,
                augmented: Some(ap),
            })
        }
        other => Err(Error::Input(format!(
            "mode {} does not produce a solution",
            other.name()
        ))),
    }
}

fn push_samples(out: &mut Vec<Sample>, region: &'static str, z: C64, m: &CMat) {
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            out.push(Sample {
                region,
                re_z: z.re,
                im_z: z.im,
                row,
                col,
                re_m: m[(row, col)].re,
                im_m: m[(row, col)].im,
            });
        }
    }
}

fn matrix_pairs(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}
