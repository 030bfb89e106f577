//! Riemann-Hilbert problems in singular-integral-equation form.
//!
//! Given a jump matrix `v = (b-)^{-1} b+` on a contour system, with
//! `b+ = I + w+` and `b- = I - w-`, the solver finds `mu` on the nodes with
//!
//! ```text
//! mu - C+(mu w-) - C-(mu w+) = h
//! ```
//!
//! and returns the boundary values `m+- = mu b+-` together with the
//! sectionally holomorphic extension `m = h + C(mu (w+ + w-))`.
//!
//! Right multiplication by `w+-` acts on the columns of `mu` only, so each row
//! of `mu` solves an independent `(N n) x (N n)` system with the same matrix.
//! The full `(N n^2) x (N n^2)` operator is `n` copies of that row operator.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cauchy::{max_abs, CauchyProjectors, CauchyTransform, GridFunction, DEFAULT_MARGIN};
use crate::contour::ContourSystem;
use crate::error::{Error, Result};
use crate::linalg;
use crate::{CMat, C64};

/// Closed-form jump matrix, evaluable at any point of any circle.
///
/// Closed forms (rather than samples) make it possible to re-evaluate the jump
/// at `1/conj(z)` and between collocation nodes.
pub trait JumpProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn jump(&self, circle: usize, z: C64) -> Result<CMat>;
}

/// [`JumpProvider`] backed by a closure.
pub struct FnJump<F> {
    dim: usize,
    f: F,
}

impl<F> FnJump<F>
where
    F: Fn(usize, C64) -> CMat + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnJump { dim, f }
    }
}

impl<F> JumpProvider for FnJump<F>
where
    F: Fn(usize, C64) -> CMat + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn jump(&self, circle: usize, z: C64) -> Result<CMat> {
        Ok((self.f)(circle, z))
    }
}

/// Wraps a closure `f(circle, z)` as a shared jump provider.
pub fn jump_fn<F>(dim: usize, f: F) -> Arc<dyn JumpProvider>
where
    F: Fn(usize, C64) -> CMat + Send + Sync + 'static,
{
    Arc::new(FnJump::new(dim, f))
}

/// Scalar jump from a closure `f(circle, z)`.
pub fn scalar_jump_fn<F>(f: F) -> Arc<dyn JumpProvider>
where
    F: Fn(usize, C64) -> C64 + Send + Sync + 'static,
{
    jump_fn(1, move |i, z| CMat::from_element(1, 1, f(i, z)))
}

/// Numerical thresholds shared by the solver and the diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Minimal `|det|` for a matrix to count as invertible.
    pub delta_inv: f64,
    /// Smallest admissible singular value of `Id - C_w` for a solve.
    pub sigma_min: f64,
    /// Singular values below this count towards kernel/cokernel dimensions.
    pub tau_rank: f64,
    /// Allowed relative error of `(b-)^{-1} b+` against `v`.
    pub reconstruction: f64,
    /// Allowed relative defect of `v = v#` off the unit circle.
    pub symmetry: f64,
    /// Off-contour evaluation margin, in units of the local node spacing.
    pub margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            delta_inv: 1e-10,
            sigma_min: 1e-8,
            tau_rank: 1e-7,
            reconstruction: 1e-12,
            symmetry: 1e-10,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// Jump matrix sampled on the nodes, together with its closed form.
#[derive(Clone)]
pub struct JumpData {
    provider: Arc<dyn JumpProvider>,
    v: GridFunction,
}

impl fmt::Debug for JumpData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpData")
            .field("v", &self.v)
            .finish_non_exhaustive()
    }
}

impl JumpData {
    /// Samples `provider` on every node and checks invertibility.
    pub fn sample(
        system: &Arc<ContourSystem>,
        provider: Arc<dyn JumpProvider>,
        delta_inv: f64,
    ) -> Result<Self> {
        let dim = provider.dim();
        let v = GridFunction::try_from_fn(system, dim, |i, z| provider.jump(i, z))?;
        for (node, m) in v.values().iter().enumerate() {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::Eval(format!("jump is not finite at node {node}")));
            }
            let det = m.determinant().norm();
            if det < delta_inv {
                return Err(Error::SingularJump { node, det });
            }
        }
        Ok(JumpData { provider, v })
    }

    pub fn v(&self) -> &GridFunction {
        &self.v
    }

    pub fn system(&self) -> &Arc<ContourSystem> {
        self.v.system()
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    pub fn provider(&self) -> &Arc<dyn JumpProvider> {
        &self.provider
    }

    /// Closed-form value at an arbitrary point of circle `circle`.
    pub fn eval(&self, circle: usize, z: C64) -> Result<CMat> {
        self.provider.jump(circle, z)
    }
}

/// Plus or minus boundary side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    #[default]
    Plus,
    Minus,
}

/// A pair `w = (w+, w-)` with `b+ = I + w+`, `b- = I - w-` invertible.
#[derive(Clone, Debug)]
pub struct FactorizationData {
    w_plus: GridFunction,
    w_minus: GridFunction,
}

impl FactorizationData {
    pub fn new(w_plus: GridFunction, w_minus: GridFunction, delta_inv: f64) -> Result<Self> {
        if !w_plus.aligned_with(&w_minus) {
            return Err(Error::Alignment);
        }
        let data = FactorizationData { w_plus, w_minus };
        data.b_plus().inverse(delta_inv)?;
        data.b_minus().inverse(delta_inv)?;
        Ok(data)
    }

    pub fn w_plus(&self) -> &GridFunction {
        &self.w_plus
    }

    pub fn w_minus(&self) -> &GridFunction {
        &self.w_minus
    }

    pub fn b_plus(&self) -> GridFunction {
        let d = self.w_plus.dim();
        self.w_plus.map(|w| CMat::identity(d, d) + w)
    }

    pub fn b_minus(&self) -> GridFunction {
        let d = self.w_minus.dim();
        self.w_minus.map(|w| CMat::identity(d, d) - w)
    }

    /// `(b-)^{-1} b+`.
    pub fn jump(&self) -> Result<GridFunction> {
        self.b_minus().inverse(0.0)?.mul(&self.b_plus())
    }
}

/// Splits `v` entirely into one side: `b+ = v, b- = I` or `b+ = I, b- = v^{-1}`.
pub fn trivial_splitting(v: &JumpData, side: Branch, delta_inv: f64) -> Result<FactorizationData> {
    let d = v.dim();
    let id = CMat::identity(d, d);
    let zero = GridFunction::zeros(v.system(), d);
    match side {
        Branch::Plus => {
            let w_plus = v.v().map(|m| m - &id);
            FactorizationData::new(w_plus, zero, delta_inv)
        }
        Branch::Minus => {
            let inv = v.v().inverse(delta_inv)?;
            let w_minus = inv.map(|m| &id - m);
            FactorizationData::new(zero, w_minus, delta_inv)
        }
    }
}

/// Jump data, factorization data and the normalization `h`.
#[derive(Clone, Debug)]
pub struct RHProblem {
    jump: JumpData,
    data: FactorizationData,
    h: CMat,
    tol: Tolerances,
}

impl RHProblem {
    /// Checks that `data` factors `jump` and that `h` is a constant `n x n`
    /// matrix.
    pub fn new(jump: JumpData, data: FactorizationData, h: CMat, tol: Tolerances) -> Result<Self> {
        if !jump.v().aligned_with(data.w_plus()) {
            return Err(Error::Alignment);
        }
        if h.shape() != (jump.dim(), jump.dim()) {
            return Err(Error::Input(format!(
                "normalization must be {0}x{0}, got {1}x{2}",
                jump.dim(),
                h.nrows(),
                h.ncols()
            )));
        }
        let rebuilt = data.jump()?;
        let scale = jump.v().max_abs().max(1.0);
        let err = rebuilt.max_abs_diff(jump.v())?;
        if err > tol.reconstruction * scale {
            return Err(Error::Input(format!(
                "factorization data does not reproduce the jump (error {err:.3e})"
            )));
        }
        Ok(RHProblem { jump, data, h, tol })
    }

    /// Problem with the trivial splitting on `side`.
    pub fn with_splitting(jump: JumpData, side: Branch, h: CMat, tol: Tolerances) -> Result<Self> {
        let data = trivial_splitting(&jump, side, tol.delta_inv)?;
        RHProblem::new(jump, data, h, tol)
    }

    pub fn jump(&self) -> &JumpData {
        &self.jump
    }

    pub fn data(&self) -> &FactorizationData {
        &self.data
    }

    pub fn h(&self) -> &CMat {
        &self.h
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn system(&self) -> &Arc<ContourSystem> {
        self.jump.system()
    }

    pub fn dim(&self) -> usize {
        self.jump.dim()
    }
}

/// Matrix of `phi -> phi - C+(phi w-) - C-(phi w+)` on one row of `phi`.
///
/// Unknown `(node l, column c)` sits at index `l * n + c`.
pub fn assemble_row_operator(p: &RHProblem, proj: &CauchyProjectors) -> Result<DMatrix<C64>> {
    if !(Arc::ptr_eq(proj.system(), p.system()) || **proj.system() == **p.system()) {
        return Err(Error::Alignment);
    }
    let n = p.dim();
    let total = p.system().total_nodes();
    let plus = proj.plus_matrix();
    let minus = proj.minus_matrix();
    let wp = p.data.w_plus.values();
    let wm = p.data.w_minus.values();
    let mut a = DMatrix::<C64>::identity(total * n, total * n);
    for j in 0..total {
        for l in 0..total {
            let (cp, cm) = (plus[(j, l)], minus[(j, l)]);
            for c in 0..n {
                for b in 0..n {
                    a[(j * n + b, l * n + c)] -= cp * wm[l][(c, b)] + cm * wp[l][(c, b)];
                }
            }
        }
    }
    Ok(a)
}

/// Full operator `Id - C_w` on all entries of `phi`.
///
/// Unknown `(node l, row a, column c)` sits at `l n^2 + a n + c`.
pub fn assemble_operator(p: &RHProblem, proj: &CauchyProjectors) -> Result<DMatrix<C64>> {
    let row = assemble_row_operator(p, proj)?;
    let n = p.dim();
    let total = p.system().total_nodes();
    let size = total * n * n;
    let mut full = DMatrix::<C64>::zeros(size, size);
    for j in 0..total {
        for l in 0..total {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        full[(j * n * n + a * n + b, l * n * n + a * n + c)] =
                            row[(j * n + b, l * n + c)];
                    }
                }
            }
        }
    }
    Ok(full)
}

/// Solved problem: density, boundary values and the holomorphic extension.
#[derive(Clone, Debug)]
pub struct RHSolution {
    h: CMat,
    mu: GridFunction,
    m_plus: GridFunction,
    m_minus: GridFunction,
    transform: CauchyTransform,
    margin: f64,
    /// Largest `|m+ - m- v|` at the points halfway between nodes.
    pub residual_jump: f64,
    /// Smallest singular value of the row operator.
    pub smallest_singular_value: f64,
    /// Normwise backward error of the linear solve.
    pub backward_error: f64,
}

/// Solves `(Id - C_w) mu = h`.
///
/// The density is sought among trigonometric polynomials of degree
/// `|k| <= N/2 - 4` on every circle (see [`trial_cutoff`]) and the `N n`
/// collocation equations are solved in the least-squares sense through an
/// SVD, followed by one step of iterative refinement. Pointwise products
/// with a jump that winds around a circle fold the top Fourier modes onto
/// the opposite end of the spectrum; excluding those modes from the trial
/// space removes the spurious null vectors this creates while keeping
/// spectral accuracy.
///
/// Fails with [`Error::NearSingularOperator`] when the smallest singular value
/// of the restricted operator is below `tol.sigma_min`.
pub fn solve(p: &RHProblem, proj: &CauchyProjectors) -> Result<RHSolution> {
    let a = assemble_row_operator(p, proj)?;
    let n = p.dim();
    let total = p.system().total_nodes();
    let e = band_limited_basis(p.system(), n);
    let ae = linalg::matmul(&a, &e);
    let svd = linalg::Svd::new(&ae).ok_or(Error::NearSingularOperator { sigma_min: 0.0 })?;
    let sigma = svd.smallest();
    if sigma < p.tol.sigma_min {
        return Err(Error::NearSingularOperator { sigma_min: sigma });
    }
    // one right-hand side per row of h
    let rhs = DMatrix::from_fn(total * n, n, |i, row| p.h[(row, i % n)]);
    let mut coef = svd.solve(&rhs);
    coef += svd.solve(&(&rhs - &ae * &coef));
    let x = &e * coef;
    let backward_error = linalg::backward_error(&a, &x, &rhs);
    let mu_values = (0..total)
        .map(|l| CMat::from_fn(n, n, |row, c| x[(l * n + c, row)]))
        .collect();
    let mu = GridFunction::new(p.system().clone(), n, mu_values)?;
    let m_plus = mu.mul(&p.data.b_plus())?;
    let m_minus = mu.mul(&p.data.b_minus())?;
    let density = mu.mul(&p.data.w_plus.add(&p.data.w_minus)?)?;
    let transform = CauchyTransform::new(&density);

    let mut sol = RHSolution {
        h: p.h.clone(),
        mu,
        m_plus,
        m_minus,
        transform,
        margin: p.tol.margin,
        residual_jump: 0.0,
        smallest_singular_value: sigma,
        backward_error,
    };
    sol.residual_jump = sol.interleaved_jump_residual(p.jump())?;
    Ok(sol)
}

impl RHSolution {
    pub fn system(&self) -> &Arc<ContourSystem> {
        self.mu.system()
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn h(&self) -> &CMat {
        &self.h
    }

    pub fn mu(&self) -> &GridFunction {
        &self.mu
    }

    pub fn m_plus(&self) -> &GridFunction {
        &self.m_plus
    }

    pub fn m_minus(&self) -> &GridFunction {
        &self.m_minus
    }

    /// `m(z) = h + (1/2 pi i) int mu (w+ + w-) / (w - z) dw` off the contour.
    pub fn evaluate_m(&self, z: C64) -> Result<CMat> {
        Ok(&self.h + self.transform.eval_with_margin(z, self.margin)?)
    }

    /// Like [`evaluate_m`](Self::evaluate_m) without the margin check.
    pub fn evaluate_m_unchecked(&self, z: C64) -> CMat {
        &self.h + self.transform.eval_unchecked(z)
    }

    /// Boundary value of `m` at a point of circle `circle`, from the plus or
    /// minus side.
    pub fn boundary_value(&self, circle: usize, z: C64, plus: bool) -> CMat {
        &self.h + self.transform.boundary_value_pm(circle, z, plus)
    }

    /// `max |m+ - m- v|` over the points halfway between consecutive nodes,
    /// with `v` re-evaluated from its closed form there.
    pub fn interleaved_jump_residual(&self, jump: &JumpData) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, c) in self.system().circles().iter().enumerate() {
            for k in 0..c.node_count {
                let z = c.midpoint(k);
                let v = jump.eval(i, z)?;
                let mp = self.boundary_value(i, z, true);
                let mm = self.boundary_value(i, z, false);
                worst = worst.max(max_abs(&(mp - mm * v)));
            }
        }
        Ok(worst)
    }

    /// `max |m+ - m- v|` on the collocation nodes themselves.
    pub fn node_jump_residual(&self, jump: &JumpData) -> Result<f64> {
        let mv = self.m_minus.mul(jump.v())?;
        self.m_plus.max_abs_diff(&mv)
    }

    /// `max(|C-(m+ - h)|, |C+(m- - h)|)`: how far `m+- - h` are from lying in
    /// the ranges of `C+-`.
    pub fn range_defect(&self, proj: &CauchyProjectors) -> Result<f64> {
        let hh = GridFunction::constant(self.system(), &self.h);
        let a = proj.apply_minus(&self.m_plus.sub(&hh)?)?.max_abs();
        let b = proj.apply_plus(&self.m_minus.sub(&hh)?)?.max_abs();
        Ok(a.max(b))
    }
}

/// Kernel and cokernel dimensions of `Id - C_w`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexReport {
    /// Dimension of the kernel of the full operator (`n` times `row_dim_ker`).
    pub dim_ker: usize,
    pub dim_coker: usize,
    /// Dimensions for a single row of the unknown.
    pub row_dim_ker: usize,
    pub row_dim_coker: usize,
    /// Singular values of the operator on band-limited densities (ascending).
    pub kernel_singular_values: Vec<f64>,
    /// Same for the adjoint.
    pub cokernel_singular_values: Vec<f64>,
    /// `log10` of the ratio between the smallest retained and the largest
    /// discarded singular value (over both lists); `None` when nothing falls
    /// below the threshold.
    pub separation_decades: Option<f64>,
}

impl IndexReport {
    /// Sum of the positive partial indices, `dim_ker / n`.
    pub fn positive_index_sum(&self) -> usize {
        self.row_dim_ker
    }

    pub fn negative_index_sum(&self) -> usize {
        self.row_dim_coker
    }
}

/// Highest Fourier mode of the trial densities on an `nodes`-node circle:
/// `N/2 - 4`, but at least `N/4`.
pub fn trial_cutoff(nodes: usize) -> usize {
    (nodes / 2).saturating_sub(4).max(nodes / 4)
}

/// Embedding of band-limited densities: on every circle the modes
/// `|k| <= trial_cutoff(N)` for each of the `n` columns, orthonormal in the
/// nodal inner product.
fn band_limited_basis(system: &ContourSystem, n: usize) -> DMatrix<C64> {
    let total = system.total_nodes();
    let cols: usize = system
        .circles()
        .iter()
        .map(|c| (2 * trial_cutoff(c.node_count) + 1) * n)
        .sum();
    let mut e = DMatrix::<C64>::zeros(total * n, cols);
    let mut col = 0;
    for (i, c) in system.circles().iter().enumerate() {
        let kmax = trial_cutoff(c.node_count) as i32;
        let scale = 1.0 / (c.node_count as f64).sqrt();
        for k in -kmax..=kmax {
            for comp in 0..n {
                for l in 0..c.node_count {
                    let node = system.offset(i) + l;
                    e[(node * n + comp, col)] = c.unit_node(l).powi(k) * scale;
                }
                col += 1;
            }
        }
    }
    e
}

/// Counts singular values of `Id - C_w` below `tau_rank`.
///
/// A square discretization always has index zero, so the spurious near-null
/// directions it creates to balance a nonzero Fredholm index live at the
/// highest resolvable modes. Restricting the operator and its adjoint to the
/// same band-limited densities the solver uses leaves only the resolved
/// kernel and cokernel. Fails with [`Error::RankAmbiguity`] when a singular
/// value falls within a decade of the threshold.
pub fn index_diagnostics(p: &RHProblem, proj: &CauchyProjectors) -> Result<IndexReport> {
    let a = assemble_row_operator(p, proj)?;
    let n = p.dim();
    let e = band_limited_basis(p.system(), n);
    let tau = p.tol.tau_rank;

    let mut ker: Vec<f64> = linalg::singular_values(&linalg::matmul(&a, &e));
    let mut coker: Vec<f64> = linalg::singular_values(&linalg::matmul(&a.adjoint(), &e));
    ker.reverse();
    coker.reverse();

    for &s in ker.iter().chain(&coker) {
        if s >= tau / 10.0 && s <= tau * 10.0 {
            return Err(Error::RankAmbiguity { tau, closest: s });
        }
    }
    let row_dim_ker = ker.iter().filter(|&&s| s < tau).count();
    let row_dim_coker = coker.iter().filter(|&&s| s < tau).count();
    let separation =
        |sv: &[f64], k: usize| (k > 0).then(|| (sv[k] / sv[k - 1].max(f64::MIN_POSITIVE)).log10());
    let separation_decades = [
        separation(&ker, row_dim_ker),
        separation(&coker, row_dim_coker),
    ]
    .into_iter()
    .flatten()
    .reduce(f64::min);
    Ok(IndexReport {
        dim_ker: n * row_dim_ker,
        dim_coker: n * row_dim_coker,
        row_dim_ker,
        row_dim_coker,
        kernel_singular_values: ker,
        cokernel_singular_values: coker,
        separation_decades,
    })
}

/// Outcome of checking `v = v#` off the unit circle and `Re v > 0` on it.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionReport {
    pub symmetric_off_circle: bool,
    /// Largest relative `|v(z) - v(1/conj z)^*|` over nodes off the unit circle.
    pub symmetry_defect: f64,
    /// Smallest eigenvalue of `(v + v^*)/2` over the unit-circle nodes.
    pub min_re_eig_on_circle: f64,
    /// Largest `|v - v^*|` on the unit circle (zero when `v = v#` there too).
    pub hermitian_defect_on_circle: f64,
}

impl InversionReport {
    pub fn passes(&self) -> bool {
        self.symmetric_off_circle && self.min_re_eig_on_circle > 0.0
    }
}

/// Checks the inversion-symmetry and positivity hypotheses on the nodes.
///
/// `v#(z) = v(1/conj z)^*` is evaluated from the closed form on the image
/// circle, so no interpolation is involved.
pub fn check_inversion_hypotheses(jump: &JumpData, tol: &Tolerances) -> Result<InversionReport> {
    let system = jump.system();
    let unit = system.check_inversion_invariant()?;
    let mut symmetry_defect = 0.0f64;
    let mut min_re_eig = f64::INFINITY;
    let mut hermitian_defect = 0.0f64;
    for node in system.nodes() {
        let v = jump.v().value(system.offset(node.circle) + node.index);
        if node.circle == unit {
            min_re_eig = min_re_eig.min(linalg::min_hermitian_eig(v));
            hermitian_defect = hermitian_defect.max(max_abs(&(v - v.adjoint())));
        } else {
            let partner = system
                .inversion_partner(node.circle)
                .expect("checked above");
            let image = jump.eval(partner, crate::contour::invert_point(node.point))?;
            let defect = max_abs(&(v - image.adjoint())) / max_abs(v).max(1.0);
            symmetry_defect = symmetry_defect.max(defect);
        }
    }
    Ok(InversionReport {
        symmetric_off_circle: symmetry_defect <= tol.symmetry,
        symmetry_defect,
        min_re_eig_on_circle: min_re_eig,
        hermitian_defect_on_circle: hermitian_defect,
    })
}
