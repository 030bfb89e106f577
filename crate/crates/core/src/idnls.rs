//! Riemann-Hilbert problems of discrete NLS (Ablowitz-Ladik) type.
//!
//! The unit circle carries the clockwise orientation, so the plus side is
//! the exterior. Poles `z_j` (`|z_j| > 1`) and their mirror points
//! `p_j = 1/conj(z_j)` carry residue conditions
//!
//! ```text
//! Res(M; z_j) = lim M(z) [[0, 0], [gamma_j, 0]],   gamma_j = z_j^{-2n} c_j
//! Res(M; p_j) = lim M(z) [[0, delta_j], [0, 0]],   delta_j = conj(z_j)^{-2n-2} conj(c_j)
//! ```
//!
//! [`remove_poles`] trades them for jumps on small circles `C[z_j]`
//! (clockwise) and their images `C[z_j]#` (counterclockwise). [`conjugate`]
//! then adds `|z| = R` and `|z| = 1/R` and multiplies the unknown region-wise
//! by `A`, `B_j` or `C` so that the new jump satisfies `v = v#` off the unit
//! circle and is positive definite on it. Both problems are solved by
//! [`crate::rhp::solve`]; [`AugmentedProblem::recover`] maps a solution back
//! to `M`.
//!
//! Reconstructing a lattice potential from `M` is not implemented. Note that
//! for data not produced by a scattering transform the reconstructed quantity
//! need not be a potential at all.

// `!(x > y)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cauchy::CauchyProjectors;
use crate::contour::{invert_circle, invert_point, Circle, ContourSystem, Orientation};
use crate::error::{Error, Result};
use crate::rhp::{self, Branch, JumpData, JumpProvider, RHProblem, RHSolution, Tolerances};
use crate::{CMat, C64};

/// Reflection-coefficient stand-in, evaluated on the unit circle.
pub type ScalarFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Focusing,
    Defocusing,
}

/// A pole `z` outside the unit circle with norming constant `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pole {
    pub z: C64,
    pub c: C64,
}

impl Pole {
    pub fn new(z: C64, c: C64) -> Self {
        Pole { z, c }
    }

    /// Mirror point `1/conj(z)` inside the unit circle.
    pub fn mirror(&self) -> C64 {
        invert_point(self.z)
    }

    /// `z^{-2n} c`.
    pub fn gamma(&self, n: i32) -> C64 {
        self.z.powi(-2 * n) * self.c
    }

    /// `conj(z)^{-2n-2} conj(c)`.
    pub fn delta(&self, n: i32) -> C64 {
        self.z.conj().powi(-2 * n - 2) * self.c.conj()
    }
}

/// Reflection coefficient, lattice index, poles and sign.
#[derive(Clone)]
pub struct IdnlsSpec {
    pub r: ScalarFn,
    pub n: i32,
    pub poles: Vec<Pole>,
    pub sign: Sign,
    /// Require the symmetries of genuine scattering data: poles closed under
    /// `z -> -z` and `r(-z) = -r(z)`. Off by default.
    pub strict_scattering_symmetry: bool,
}

impl fmt::Debug for IdnlsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdnlsSpec")
            .field("n", &self.n)
            .field("poles", &self.poles)
            .field("sign", &self.sign)
            .finish_non_exhaustive()
    }
}

impl IdnlsSpec {
    /// Validates the poles: outside the unit circle and pairwise distinct.
    pub fn new(r: ScalarFn, n: i32, poles: Vec<Pole>, sign: Sign) -> Result<Self> {
        for (j, p) in poles.iter().enumerate() {
            if !(p.z.norm() > 1.0) || !p.z.is_finite() || !p.c.is_finite() {
                return Err(Error::Input(format!(
                    "pole {j} at {} must lie outside the unit circle",
                    p.z
                )));
            }
            if let Some(k) = poles[..j].iter().position(|q| (q.z - p.z).norm() < 1e-12) {
                return Err(Error::Input(format!("poles {k} and {j} coincide")));
            }
        }
        Ok(IdnlsSpec {
            r,
            n,
            poles,
            sign,
            strict_scattering_symmetry: false,
        })
    }

    /// Reflectionless spec (`r = 0`).
    pub fn reflectionless(n: i32, poles: Vec<Pole>) -> Result<Self> {
        Self::new(Arc::new(|_| C64::new(0.0, 0.0)), n, poles, Sign::Focusing)
    }

    /// Jump matrix on the unit circle for this sign.
    pub fn unit_jump(&self, z: C64) -> CMat {
        let r = (self.r)(z);
        match self.sign {
            Sign::Defocusing => defocusing_matrix(r, self.n, z),
            Sign::Focusing => focusing_matrix(r, self.n, z),
        }
    }

    fn check_symmetries(&self, nodes: usize) -> Result<()> {
        if !self.strict_scattering_symmetry {
            return Ok(());
        }
        for p in &self.poles {
            if !self.poles.iter().any(|q| (q.z + p.z).norm() < 1e-12) {
                return Err(Error::Hypothesis(format!(
                    "pole {} has no partner at {}",
                    p.z, -p.z
                )));
            }
        }
        for k in 0..nodes {
            let z = C64::from_polar(1.0, 2.0 * PI * k as f64 / nodes as f64);
            let defect = ((self.r)(-z) + (self.r)(z)).norm();
            if defect > 1e-12 {
                return Err(Error::Hypothesis(format!(
                    "r(-z) != -r(z) at z = {z} (defect {defect:.3e})"
                )));
            }
        }
        Ok(())
    }
}

/// `[[1 - |r|^2, -z^{2n} conj(r)], [z^{-2n} r, 1]]`.
pub fn defocusing_matrix(r: C64, n: i32, z: C64) -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0 - r.norm_sqr(), 0.0),
            -z.powi(2 * n) * r.conj(),
            z.powi(-2 * n) * r,
            C64::new(1.0, 0.0),
        ],
    )
}

/// `[[1 + |r|^2, z^{2n} conj(r)], [z^{-2n} r, 1]]`.
pub fn focusing_matrix(r: C64, n: i32, z: C64) -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0 + r.norm_sqr(), 0.0),
            z.powi(2 * n) * r.conj(),
            z.powi(-2 * n) * r,
            C64::new(1.0, 0.0),
        ],
    )
}

fn unit_system(nodes: usize) -> Result<Arc<ContourSystem>> {
    Ok(Arc::new(ContourSystem::new(vec![Circle::unit(
        Orientation::Clockwise,
        nodes,
    )?])?))
}

fn unit_jump_data(spec: &IdnlsSpec, nodes: usize) -> Result<JumpData> {
    let s = spec.clone();
    let provider = rhp::jump_fn(2, move |_, z| s.unit_jump(z));
    JumpData::sample(
        &unit_system(nodes)?,
        provider,
        Tolerances::default().delta_inv,
    )
}

/// Defocusing jump on the clockwise unit circle. Requires `sup |r| < 1` on
/// the nodes, which makes `Re v = diag(1 - |r|^2, 1)` positive.
pub fn build_defocusing_jump(spec: &IdnlsSpec, nodes: usize) -> Result<JumpData> {
    if spec.sign != Sign::Defocusing {
        return Err(Error::Input("spec is not defocusing".into()));
    }
    spec.check_symmetries(nodes)?;
    let sup = (0..nodes)
        .map(|k| (spec.r)(C64::from_polar(1.0, 2.0 * PI * k as f64 / nodes as f64)).norm())
        .fold(0.0, f64::max);
    if sup >= 1.0 {
        return Err(Error::ReflectionTooLarge(sup));
    }
    unit_jump_data(spec, nodes)
}

/// Focusing jump on the clockwise unit circle (Hermitian, det 1).
pub fn build_focusing_jump(spec: &IdnlsSpec, nodes: usize) -> Result<JumpData> {
    if spec.sign != Sign::Focusing {
        return Err(Error::Input("spec is not focusing".into()));
    }
    spec.check_symmetries(nodes)?;
    unit_jump_data(spec, nodes)
}

/// What a circle of an augmented system stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "role", content = "pole", rename_all = "snake_case")]
pub enum CircleRole {
    Unit,
    Pole(usize),
    InvertedPole(usize),
    Outer,
    Inner,
}

/// Node counts and radii for the augmented contour.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentOptions {
    pub unit_nodes: usize,
    pub pole_nodes: usize,
    /// Radii of `C[z_j]`; `None` uses [`default_radii`].
    pub radii: Option<Vec<f64>>,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions {
            unit_nodes: 128,
            pole_nodes: 64,
            radii: None,
        }
    }
}

/// `rho_j = min(|z_j| - 1, min_k |z_j - z_k| / 2, min_k |z_j - 1/conj z_k|) / 2`.
pub fn default_radii(poles: &[Pole]) -> Vec<f64> {
    poles
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mut d = p.z.norm() - 1.0;
            for (k, q) in poles.iter().enumerate() {
                if k != j {
                    d = d.min((p.z - q.z).norm() / 2.0);
                }
                d = d.min((p.z - q.mirror()).norm());
            }
            d / 2.0
        })
        .collect()
}

/// Region-wise conjugation data (`A`, `B_j`, `C` and the radius `R`).
#[derive(Clone, Debug, PartialEq)]
pub struct Conjugation {
    pub radius: f64,
    /// `prod_k z_k`.
    pub product: C64,
}

/// Pole-free problem (optionally conjugated) with its provenance.
#[derive(Clone)]
pub struct AugmentedProblem {
    spec: IdnlsSpec,
    system: Arc<ContourSystem>,
    roles: Vec<CircleRole>,
    radii: Vec<f64>,
    conjugation: Option<Conjugation>,
    jump: JumpData,
}

impl fmt::Debug for AugmentedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AugmentedProblem")
            .field("spec", &self.spec)
            .field("roles", &self.roles)
            .field("radii", &self.radii)
            .field("conjugation", &self.conjugation)
            .finish_non_exhaustive()
    }
}

/// Closed-form jumps of an augmented problem.
struct AugmentedJump {
    spec: IdnlsSpec,
    roles: Vec<CircleRole>,
    conjugation: Option<Conjugation>,
}

fn mat(a: C64, b: C64, c: C64, d: C64) -> CMat {
    CMat::from_row_slice(2, 2, &[a, b, c, d])
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl AugmentedJump {
    fn product_except(&self, j: usize) -> C64 {
        self.spec
            .poles
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .fold(one(), |acc, (_, p)| acc * p.z)
    }

    fn eval(&self, role: CircleRole, z: C64) -> CMat {
        let n = self.spec.n;
        match (role, &self.conjugation) {
            (CircleRole::Unit, None) => self.spec.unit_jump(z),
            (CircleRole::Unit, Some(c)) => {
                let a = a_matrix(c.product, z);
                a.adjoint() * self.spec.unit_jump(z) * a
            }
            (CircleRole::Pole(j), conj) => {
                let p = self.spec.poles[j];
                let scale = if conj.is_some() {
                    self.product_except(j)
                } else {
                    one()
                };
                mat(one(), zero(), scale * p.gamma(n) / (z - p.z), one())
            }
            (CircleRole::InvertedPole(j), None) => {
                let p = self.spec.poles[j];
                mat(one(), -p.delta(n) / (z - p.mirror()), zero(), one())
            }
            (CircleRole::InvertedPole(j), Some(_)) => {
                let p = self.spec.poles[j];
                let coeff =
                    z * self.product_except(j).conj() * p.z.conj().powi(-2 * n - 1) * p.c.conj();
                mat(one(), -coeff / (z - p.mirror()), zero(), one())
            }
            (CircleRole::Outer, Some(c)) => a_matrix(c.product, z),
            (CircleRole::Inner, Some(c)) => mat(c.product.conj(), zero(), zero(), 1.0 / z),
            (CircleRole::Outer | CircleRole::Inner, None) => CMat::identity(2, 2),
        }
    }
}

impl JumpProvider for AugmentedJump {
    fn dim(&self) -> usize {
        2
    }

    fn jump(&self, circle: usize, z: C64) -> Result<CMat> {
        Ok(self.eval(self.roles[circle], z))
    }
}

/// `A(z) = diag(prod z_k, z)`.
pub fn a_matrix(product: C64, z: C64) -> CMat {
    mat(product, zero(), zero(), z)
}

/// `B_j(z) = [[prod z_k, 0], [-(prod_{k != j} z_k) gamma_j, z]]`.
pub fn b_matrix(spec: &IdnlsSpec, j: usize, z: C64) -> CMat {
    let product = spec.poles.iter().fold(one(), |acc, p| acc * p.z);
    let others = spec
        .poles
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .fold(one(), |acc, (_, p)| acc * p.z);
    mat(product, zero(), -others * spec.poles[j].gamma(spec.n), z)
}

/// `C(z) = diag(prod 1/conj(z_k), z)`.
pub fn c_matrix(product: C64, z: C64) -> CMat {
    mat(1.0 / product.conj(), zero(), zero(), z)
}

/// Replaces the residue conditions by jumps on `C[z_j]` and `C[z_j]#`.
pub fn remove_poles(spec: &IdnlsSpec, options: &AugmentOptions) -> Result<AugmentedProblem> {
    if spec.sign != Sign::Focusing && !spec.poles.is_empty() {
        return Err(Error::Input(
            "residue conditions are only defined for the focusing problem".into(),
        ));
    }
    spec.check_symmetries(options.unit_nodes)?;
    let radii = match &options.radii {
        Some(r) if r.len() != spec.poles.len() => {
            return Err(Error::CirclePacking(format!(
                "{} radii for {} poles",
                r.len(),
                spec.poles.len()
            )))
        }
        Some(r) => r.clone(),
        None => default_radii(&spec.poles),
    };
    let mut circles = vec![Circle::unit(Orientation::Clockwise, options.unit_nodes)?];
    let mut roles = vec![CircleRole::Unit];
    for (j, (p, &rho)) in spec.poles.iter().zip(&radii).enumerate() {
        if !(rho > 0.0) || rho >= p.z.norm() - 1.0 {
            return Err(Error::CirclePacking(format!(
                "radius {rho} around pole {j} at {}",
                p.z
            )));
        }
        let c = Circle::new(p.z, rho, Orientation::Clockwise, options.pole_nodes)?;
        circles.push(invert_circle(&c)?);
        roles.push(CircleRole::InvertedPole(j));
        circles.push(c);
        roles.push(CircleRole::Pole(j));
    }
    // a pole circle must not enclose another pole or its mirror
    for (j, &rho) in radii.iter().enumerate() {
        for (k, q) in spec.poles.iter().enumerate() {
            if k != j && (q.z - spec.poles[j].z).norm() <= rho {
                return Err(Error::CirclePacking(format!(
                    "circle around pole {j} encloses pole {k}"
                )));
            }
        }
    }
    let system = ContourSystem::new(circles).map_err(|e| Error::CirclePacking(e.to_string()))?;
    build(spec.clone(), Arc::new(system), roles, radii, None)
}

fn build(
    spec: IdnlsSpec,
    system: Arc<ContourSystem>,
    roles: Vec<CircleRole>,
    radii: Vec<f64>,
    conjugation: Option<Conjugation>,
) -> Result<AugmentedProblem> {
    let provider = Arc::new(AugmentedJump {
        spec: spec.clone(),
        roles: roles.clone(),
        conjugation: conjugation.clone(),
    });
    let jump = JumpData::sample(&system, provider, Tolerances::default().delta_inv)?;
    Ok(AugmentedProblem {
        spec,
        system,
        roles,
        radii,
        conjugation,
        jump,
    })
}

/// Adds `|z| = R` and `|z| = 1/R` (both counterclockwise) and conjugates the
/// unknown region-wise. `radius = None` uses `R = 2 max |z_j|` (2 without
/// poles).
pub fn conjugate(
    ap: &AugmentedProblem,
    radius: Option<f64>,
    nodes: usize,
) -> Result<AugmentedProblem> {
    if ap.conjugation.is_some() {
        return Err(Error::Input("problem is already conjugated".into()));
    }
    let max_pole = ap.spec.poles.iter().map(|p| p.z.norm()).fold(0.0, f64::max);
    let r = radius.unwrap_or(if ap.spec.poles.is_empty() {
        2.0
    } else {
        2.0 * max_pole
    });
    if !(r > max_pole.max(1.0)) {
        return Err(Error::RadiusConflict(format!(
            "R = {r} must exceed 1 and every |z_j| (max {max_pole})"
        )));
    }
    let mut circles = ap.system.circles().to_vec();
    circles.push(Circle::new(
        C64::new(0.0, 0.0),
        r,
        Orientation::Counterclockwise,
        nodes,
    )?);
    circles.push(Circle::new(
        C64::new(0.0, 0.0),
        1.0 / r,
        Orientation::Counterclockwise,
        nodes,
    )?);
    let mut roles = ap.roles.clone();
    roles.push(CircleRole::Outer);
    roles.push(CircleRole::Inner);
    let system = ContourSystem::new(circles).map_err(|e| Error::RadiusConflict(e.to_string()))?;
    let product = ap.spec.poles.iter().fold(one(), |acc, p| acc * p.z);
    build(
        ap.spec.clone(),
        Arc::new(system),
        roles,
        ap.radii.clone(),
        Some(Conjugation { radius: r, product }),
    )
}

impl AugmentedProblem {
    pub fn spec(&self) -> &IdnlsSpec {
        &self.spec
    }

    pub fn system(&self) -> &Arc<ContourSystem> {
        &self.system
    }

    pub fn roles(&self) -> &[CircleRole] {
        &self.roles
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn conjugation(&self) -> Option<&Conjugation> {
        self.conjugation.as_ref()
    }

    pub fn jump(&self) -> &JumpData {
        &self.jump
    }

    /// Index of the circle with the given role.
    pub fn circle_of(&self, role: CircleRole) -> Option<usize> {
        self.roles.iter().position(|&r| r == role)
    }

    /// `RHProblem` with `h = I` and the plus trivial splitting.
    pub fn rh_problem(&self, tol: Tolerances) -> Result<RHProblem> {
        RHProblem::with_splitting(self.jump.clone(), Branch::Plus, CMat::identity(2, 2), tol)
    }

    /// Solves the pole-free problem.
    pub fn solve(&self, tol: Tolerances) -> Result<RHSolution> {
        rhp::solve(&self.rh_problem(tol)?, &CauchyProjectors::new(&self.system))
    }

    fn inside_pole_circle(&self, z: C64) -> Option<(usize, bool)> {
        self.roles
            .iter()
            .enumerate()
            .find_map(|(i, role)| match *role {
                CircleRole::Pole(j) if self.system.circle(i).encloses(z) => Some((j, false)),
                CircleRole::InvertedPole(j) if self.system.circle(i).encloses(z) => Some((j, true)),
                _ => None,
            })
    }

    /// The factor `X` with `m' = m X` at `z` (identity when not conjugated).
    pub fn region_factor(&self, z: C64) -> CMat {
        let Some(c) = &self.conjugation else {
            return CMat::identity(2, 2);
        };
        let a = z.norm();
        if a > c.radius || a < 1.0 / c.radius {
            CMat::identity(2, 2)
        } else if a < 1.0 {
            c_matrix(c.product, z)
        } else {
            match self.inside_pole_circle(z) {
                Some((j, false)) => b_matrix(&self.spec, j, z),
                _ => a_matrix(c.product, z),
            }
        }
    }

    /// The factor `L` with `m = M L` at `z`: lower triangular inside `C[z_j]`,
    /// upper triangular inside `C[z_j]#`, identity elsewhere.
    pub fn pole_factor(&self, z: C64) -> CMat {
        let n = self.spec.n;
        match self.inside_pole_circle(z) {
            Some((j, false)) => {
                let p = self.spec.poles[j];
                mat(one(), zero(), -p.gamma(n) / (z - p.z), one())
            }
            Some((j, true)) => {
                let p = self.spec.poles[j];
                mat(one(), -p.delta(n) / (z - p.mirror()), zero(), one())
            }
            None => CMat::identity(2, 2),
        }
    }

    /// `M(z)` from a solution of this problem: undoes the conjugation and the
    /// pole removal. `z` must be off the contour and away from the poles.
    pub fn recover(&self, sol: &RHSolution, z: C64) -> Result<CMat> {
        let m_prime = sol.evaluate_m(z)?;
        let x = self.region_factor(z);
        let l = self.pole_factor(z);
        let xi = x
            .try_inverse()
            .ok_or_else(|| Error::Eval(format!("conjugation factor singular at {z}")))?;
        let li = l
            .try_inverse()
            .ok_or_else(|| Error::Eval(format!("pole factor singular at {z}")))?;
        Ok(m_prime * xi * li)
    }

    /// Unconjugated `m = M L` at `z`, holomorphic across the poles.
    pub fn recover_m(&self, sol: &RHSolution, z: C64) -> Result<CMat> {
        let m_prime = sol.evaluate_m(z)?;
        let xi = self
            .region_factor(z)
            .try_inverse()
            .ok_or_else(|| Error::Eval(format!("conjugation factor singular at {z}")))?;
        Ok(m_prime * xi)
    }

    /// Jump on circle `circle` computed as `X_minus^{-1} v X_plus` from the
    /// unconjugated jump and the region factors on either side; used to
    /// cross-check the closed forms.
    pub fn product_jump(&self, circle: usize, z: C64) -> CMat {
        let base = AugmentedJump {
            spec: self.spec.clone(),
            roles: self.roles.clone(),
            conjugation: None,
        };
        let v = base.eval(self.roles[circle], z);
        let Some(c) = &self.conjugation else {
            return v;
        };
        let (plus, minus) = match self.roles[circle] {
            CircleRole::Outer => (a_matrix(c.product, z), CMat::identity(2, 2)),
            CircleRole::Inner => (CMat::identity(2, 2), c_matrix(c.product, z)),
            CircleRole::Unit => (a_matrix(c.product, z), c_matrix(c.product, z)),
            CircleRole::Pole(j) => (a_matrix(c.product, z), b_matrix(&self.spec, j, z)),
            CircleRole::InvertedPole(_) => (c_matrix(c.product, z), c_matrix(c.product, z)),
        };
        minus
            .try_inverse()
            .expect("region factors are invertible off the origin")
            * v
            * plus
    }
}

/// Residue conditions of a recovered `M` at one pole pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidueCheck {
    pub pole: usize,
    /// `|Res(M; z_j) - m(z_j) N_j|` with the residue from a contour integral.
    pub at_pole: f64,
    /// Same at the mirror point.
    pub at_mirror: f64,
}

/// `(1/2 pi i) int f(z) dz` over `|z - center| = rho` by the trapezoidal rule.
fn contour_residue<F: Fn(C64) -> Result<CMat>>(
    f: F,
    center: C64,
    rho: f64,
    points: usize,
) -> Result<CMat> {
    let mut acc = CMat::zeros(2, 2);
    for k in 0..points {
        let e = C64::from_polar(1.0, 2.0 * PI * k as f64 / points as f64);
        acc += f(center + rho * e)? * (e * rho);
    }
    Ok(acc / C64::new(points as f64, 0.0))
}

/// Residues of the recovered `M` at every `z_j` and `1/conj(z_j)`, by
/// contour integrals on circles of half the pole-circle radius, compared
/// with `lim M(z) N_j = m(z_j) N_j`.
pub fn residue_checks(ap: &AugmentedProblem, sol: &RHSolution) -> Result<Vec<ResidueCheck>> {
    let n = ap.spec.n;
    let mut out = Vec::new();
    for (j, p) in ap.spec.poles.iter().enumerate() {
        let pole_circle = ap
            .system
            .circle(ap.circle_of(CircleRole::Pole(j)).expect("pole circle"));
        let mirror_circle = ap.system.circle(
            ap.circle_of(CircleRole::InvertedPole(j))
                .expect("mirror circle"),
        );
        let res = contour_residue(|z| ap.recover(sol, z), p.z, pole_circle.radius / 2.0, 128)?;
        let nj = mat(zero(), zero(), p.gamma(n), zero());
        let target = ap.recover_m(sol, p.z)? * nj;
        let res_mirror = contour_residue(
            |z| ap.recover(sol, z),
            p.mirror(),
            mirror_circle.radius / 2.0,
            128,
        )?;
        let nm = mat(zero(), p.delta(n), zero(), zero());
        // the image circle is not centered at the mirror point but encloses it
        let target_mirror = ap.recover_m(sol, p.mirror())? * nm;
        out.push(ResidueCheck {
            pole: j,
            at_pole: (res - target).camax(),
            at_mirror: (res_mirror - target_mirror).camax(),
        });
    }
    Ok(out)
}

/// Exact reflectionless solution
/// `M(z) = I + sum_j alpha_j/(z - z_j) + beta_j/(z - p_j)`.
///
/// `alpha_j` has only a first column, `beta_j` only a second; the residue
/// conditions give, for each row, a `2J x 2J` linear system for them.
#[derive(Clone, Debug)]
pub struct SolitonOracle {
    poles: Vec<Pole>,
    n: i32,
    alphas: Vec<CMat>,
    betas: Vec<CMat>,
}

impl SolitonOracle {
    pub fn new(spec: &IdnlsSpec) -> Result<Self> {
        for k in 0..64 {
            let z = C64::from_polar(1.0, 2.0 * PI * k as f64 / 64.0);
            if (spec.r)(z) != zero() {
                return Err(Error::Input("the soliton oracle needs r = 0".into()));
            }
        }
        let j = spec.poles.len();
        let n = spec.n;
        let gamma: Vec<C64> = spec.poles.iter().map(|p| p.gamma(n)).collect();
        let delta: Vec<C64> = spec.poles.iter().map(|p| p.delta(n)).collect();
        let mirrors: Vec<C64> = spec.poles.iter().map(|p| p.mirror()).collect();
        // unknowns x = (a_1..a_J, b_1..b_J) for one row of M
        // a_j - gamma_j sum_k b_k/(z_j - p_k) = gamma_j [row == 1]
        // b_j - delta_j sum_k a_k/(p_j - z_k) = delta_j [row == 0]
        let mut sys = DMatrix::<C64>::identity(2 * j, 2 * j);
        for i in 0..j {
            for k in 0..j {
                sys[(i, j + k)] -= gamma[i] / (spec.poles[i].z - mirrors[k]);
                sys[(j + i, k)] -= delta[i] / (mirrors[i] - spec.poles[k].z);
            }
        }
        let mut rhs = DMatrix::<C64>::zeros(2 * j, 2);
        for i in 0..j {
            rhs[(i, 1)] = gamma[i];
            rhs[(j + i, 0)] = delta[i];
        }
        let (alphas, betas) = if j == 0 {
            (Vec::new(), Vec::new())
        } else {
            let sv = crate::linalg::singular_values(&sys);
            let (hi, lo) = (sv[0], sv[sv.len() - 1]);
            if lo <= 1e-12 * hi {
                return Err(Error::DegenerateSolitonSystem(lo / hi));
            }
            let x = sys
                .lu()
                .solve(&rhs)
                .ok_or(Error::DegenerateSolitonSystem(0.0))?;
            // column `row` of x holds the unknowns for that row of M
            let alphas = (0..j)
                .map(|i| mat(x[(i, 0)], zero(), x[(i, 1)], zero()))
                .collect();
            let betas = (0..j)
                .map(|i| mat(zero(), x[(j + i, 0)], zero(), x[(j + i, 1)]))
                .collect();
            (alphas, betas)
        };
        Ok(SolitonOracle {
            poles: spec.poles.clone(),
            n,
            alphas,
            betas,
        })
    }

    pub fn eval(&self, z: C64) -> CMat {
        let mut m = CMat::identity(2, 2);
        for (j, p) in self.poles.iter().enumerate() {
            m += &self.alphas[j] / (z - p.z) + &self.betas[j] / (z - p.mirror());
        }
        m
    }

    /// Residue at `z_j`.
    pub fn alpha(&self, j: usize) -> &CMat {
        &self.alphas[j]
    }

    /// Residue at `1/conj(z_j)`.
    pub fn beta(&self, j: usize) -> &CMat {
        &self.betas[j]
    }

    /// Largest violation of the residue conditions by the oracle itself.
    pub fn self_check(&self) -> f64 {
        let mut worst = 0.0f64;
        for (j, p) in self.poles.iter().enumerate() {
            // regular parts at the poles
            let reg = |z: C64, skip_alpha: bool| {
                let mut m = CMat::identity(2, 2);
                for (k, q) in self.poles.iter().enumerate() {
                    if !(skip_alpha && k == j) {
                        m += &self.alphas[k] / (z - q.z);
                    }
                    if !(!skip_alpha && k == j) {
                        m += &self.betas[k] / (z - q.mirror());
                    }
                }
                m
            };
            let nj = mat(zero(), zero(), p.gamma(self.n), zero());
            let nm = mat(zero(), p.delta(self.n), zero(), zero());
            worst = worst.max((&self.alphas[j] - reg(p.z, true) * nj).camax());
            worst = worst.max((&self.betas[j] - reg(p.mirror(), false) * nm).camax());
        }
        worst
    }
}
