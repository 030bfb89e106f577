//! Grid functions and the discrete Cauchy operators.
//!
//! On each circle a grid function is identified with its trigonometric
//! interpolant `sum_k a_k zeta^k`, `zeta = (z - center) / radius`, with the
//! Nyquist mode split evenly between `zeta^(N/2)` and `zeta^(-N/2)`. All
//! Cauchy integrals are the exact Cauchy integrals of these interpolants:
//! over a counterclockwise circle the nonnegative modes continue into the
//! interior, the negative modes into the exterior. This gives one consistent
//! representation for the boundary projections `C+`/`C-`, for cross-circle
//! interaction and for evaluation at arbitrary points off the contour.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::FftPlanner;

use crate::contour::{ContourSystem, Side};
use crate::error::{Error, Result};
use crate::{CMat, C64};

/// Matrix-valued samples on the collocation nodes of a contour system.
#[derive(Clone, Debug)]
pub struct GridFunction {
    system: Arc<ContourSystem>,
    dim: usize,
    values: Vec<CMat>,
}

impl GridFunction {
    pub fn new(system: Arc<ContourSystem>, dim: usize, values: Vec<CMat>) -> Result<Self> {
        if values.len() != system.total_nodes() || values.iter().any(|v| v.shape() != (dim, dim)) {
            return Err(Error::Alignment);
        }
        Ok(GridFunction {
            system,
            dim,
            values,
        })
    }

    /// Samples `f(circle, z)` at every node.
    pub fn try_from_fn<F>(system: &Arc<ContourSystem>, dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, C64) -> Result<CMat>,
    {
        let values = system
            .nodes()
            .into_iter()
            .map(|n| f(n.circle, n.point))
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(system.clone(), dim, values)
    }

    pub fn from_fn<F>(system: &Arc<ContourSystem>, dim: usize, mut f: F) -> Self
    where
        F: FnMut(usize, C64) -> CMat,
    {
        Self::try_from_fn(system, dim, |i, z| Ok(f(i, z)))
            .expect("closure returned matrices of the wrong size")
    }

    /// Scalar grid function from `f(circle, z)`.
    pub fn scalar<F>(system: &Arc<ContourSystem>, mut f: F) -> Self
    where
        F: FnMut(usize, C64) -> C64,
    {
        Self::from_fn(system, 1, |i, z| CMat::from_element(1, 1, f(i, z)))
    }

    pub fn constant(system: &Arc<ContourSystem>, m: &CMat) -> Self {
        assert!(m.is_square());
        Self::from_fn(system, m.nrows(), |_, _| m.clone())
    }

    pub fn identity(system: &Arc<ContourSystem>, dim: usize) -> Self {
        Self::constant(system, &CMat::identity(dim, dim))
    }

    pub fn zeros(system: &Arc<ContourSystem>, dim: usize) -> Self {
        Self::constant(system, &CMat::zeros(dim, dim))
    }

    pub fn system(&self) -> &Arc<ContourSystem> {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn value(&self, node: usize) -> &CMat {
        &self.values[node]
    }

    pub fn circle_values(&self, circle: usize) -> &[CMat] {
        &self.values[self.system.node_range(circle)]
    }

    /// Samples of entry `(row, col)` across all nodes.
    pub fn entry(&self, row: usize, col: usize) -> Vec<C64> {
        self.values.iter().map(|m| m[(row, col)]).collect()
    }

    pub fn map<F: FnMut(&CMat) -> CMat>(&self, f: F) -> Self {
        let values: Vec<CMat> = self.values.iter().map(f).collect();
        let dim = values.first().map_or(self.dim, |m| m.nrows());
        GridFunction {
            system: self.system.clone(),
            dim,
            values,
        }
    }

    pub fn aligned_with(&self, other: &GridFunction) -> bool {
        self.dim == other.dim
            && (Arc::ptr_eq(&self.system, &other.system) || *self.system == *other.system)
    }

    fn zip_with<F: FnMut(&CMat, &CMat) -> CMat>(
        &self,
        other: &GridFunction,
        mut f: F,
    ) -> Result<Self> {
        if !self.aligned_with(other) {
            return Err(Error::Alignment);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(a, b))
            .collect();
        Ok(GridFunction {
            system: self.system.clone(),
            dim: self.dim,
            values,
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise matrix product `self(z) * other(z)`.
    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Pointwise Hermitian conjugate.
    pub fn adjoint(&self) -> Self {
        self.map(|m| m.adjoint())
    }

    /// Pointwise inverse; fails where `|det| < delta`.
    pub fn inverse(&self, delta: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(node, m)| {
                let det = m.determinant().norm();
                if det < delta {
                    return Err(Error::SingularJump { node, det });
                }
                m.clone()
                    .try_inverse()
                    .ok_or(Error::SingularJump { node, det })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridFunction {
            system: self.system.clone(),
            dim: self.dim,
            values,
        })
    }

    /// `max_k |self(z_k) - other(z_k)|` in the entrywise max norm.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        if !self.aligned_with(other) {
            return Err(Error::Alignment);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| max_abs(&(a - b)))
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(max_abs).fold(0.0, f64::max)
    }
}

/// Entrywise max norm of a matrix.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Weight of mode `k` (`0 <= k <= N/2`): the Nyquist mode is shared.
fn mode_weight(k: usize, n: usize) -> f64 {
    if 2 * k == n {
        0.5
    } else {
        1.0
    }
}

/// Coefficients of the trigonometric interpolant of samples on one circle.
#[derive(Clone, Debug)]
pub struct CircleSpectrum {
    /// `a_0, ..., a_{N/2}` (Nyquist halved).
    nonnegative: Vec<C64>,
    /// `a_{-1}, ..., a_{-N/2}` (Nyquist halved).
    negative: Vec<C64>,
}

impl CircleSpectrum {
    pub fn from_samples(samples: &[C64]) -> Self {
        let n = samples.len();
        let mut buf = samples.to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let half = n / 2;
        let nonnegative = (0..=half)
            .map(|k| buf[k] * scale * mode_weight(k, n))
            .collect();
        let negative = (1..=half)
            .map(|k| buf[n - k] * scale * mode_weight(k, n))
            .collect();
        CircleSpectrum {
            nonnegative,
            negative,
        }
    }

    /// Coefficient of `zeta^k`, `-N/2 <= k <= N/2`.
    pub fn coefficient(&self, k: i64) -> C64 {
        if k >= 0 {
            self.nonnegative
                .get(k as usize)
                .copied()
                .unwrap_or_default()
        } else {
            self.negative
                .get((-k - 1) as usize)
                .copied()
                .unwrap_or_default()
        }
    }

    /// `sum_{k >= 0} a_k zeta^k`.
    pub fn interior_part(&self, zeta: C64) -> C64 {
        self.nonnegative
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &a| acc * zeta + a)
    }

    /// `sum_{k < 0} a_k zeta^k`.
    pub fn exterior_part(&self, zeta: C64) -> C64 {
        let q = 1.0 / zeta;
        self.negative
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &a| (acc + a) * q)
    }

    /// The interpolant itself at `zeta` on the unit circle.
    pub fn interpolate(&self, zeta: C64) -> C64 {
        self.interior_part(zeta) + self.exterior_part(zeta)
    }

    /// Largest coefficient magnitude among modes that do not continue
    /// analytically into `side` (the wrong-side content).
    pub fn off_side_magnitude(&self, side: Side) -> f64 {
        let coeffs = match side {
            Side::Interior => &self.negative,
            Side::Exterior => &self.nonnegative[1..],
        };
        coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }
}

/// Row of the linear functional `g -> sum_{k>=0} a_k(g) zeta^k` on the
/// samples of an `n`-node circle.
fn interior_row(zeta: C64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|l| {
            let node = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * l as f64 / n as f64);
            let q = zeta * node.conj();
            let mut acc = C64::new(0.0, 0.0);
            let mut p = C64::new(1.0, 0.0);
            for k in 0..=n / 2 {
                acc += p * mode_weight(k, n);
                p *= q;
            }
            acc / n as f64
        })
        .collect()
}

/// Row of `g -> sum_{k<0} a_k(g) zeta^k`.
fn exterior_row(zeta: C64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|l| {
            let node = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * l as f64 / n as f64);
            let q = node / zeta;
            let mut acc = C64::new(0.0, 0.0);
            let mut p = q;
            for k in 1..=n / 2 {
                acc += p * mode_weight(k, n);
                p *= q;
            }
            acc / n as f64
        })
        .collect()
}

/// Row of the Cauchy integral over circle `j` of the interpolant, evaluated
/// at `z`. `side` selects a boundary value when `z` lies on circle `j`.
fn cauchy_row(system: &ContourSystem, j: usize, z: C64, side: Option<Side>) -> Vec<C64> {
    let circle = system.circle(j);
    let zeta = circle.local(z);
    let side = side.unwrap_or(if zeta.norm() < 1.0 {
        Side::Interior
    } else {
        Side::Exterior
    });
    let s = circle.orientation.sign();
    match side {
        Side::Interior => interior_row(zeta, circle.node_count)
            .into_iter()
            .map(|x| x * s)
            .collect(),
        Side::Exterior => exterior_row(zeta, circle.node_count)
            .into_iter()
            .map(|x| -x * s)
            .collect(),
    }
}

/// Dense realization of `C+` and `C-` on a contour system.
///
/// Both projectors act identically on every matrix entry of a grid function,
/// so they are stored as scalar `N x N` matrices (`N` the total node count);
/// the `(N n) x (N n)` block operators are their Kronecker products with the
/// identity.
#[derive(Clone, Debug)]
pub struct CauchyProjectors {
    system: Arc<ContourSystem>,
    plus: DMatrix<C64>,
    minus: DMatrix<C64>,
}

impl CauchyProjectors {
    pub fn new(system: &Arc<ContourSystem>) -> Self {
        let n = system.total_nodes();
        let mut plus = DMatrix::<C64>::zeros(n, n);
        for target in system.nodes() {
            for j in 0..system.len() {
                let side = (j == target.circle).then(|| system.circle(j).plus_side());
                let row = cauchy_row(system, j, target.point, side);
                let off = system.offset(j);
                for (l, v) in row.into_iter().enumerate() {
                    plus[(system.offset(target.circle) + target.index, off + l)] = v;
                }
            }
        }
        let minus = &plus - DMatrix::<C64>::identity(n, n);
        CauchyProjectors {
            system: system.clone(),
            plus,
            minus,
        }
    }

    pub fn system(&self) -> &Arc<ContourSystem> {
        &self.system
    }

    pub fn plus_matrix(&self) -> &DMatrix<C64> {
        &self.plus
    }

    pub fn minus_matrix(&self) -> &DMatrix<C64> {
        &self.minus
    }

    fn apply(&self, op: &DMatrix<C64>, f: &GridFunction) -> Result<GridFunction> {
        if !(Arc::ptr_eq(&self.system, &f.system) || *self.system == *f.system) {
            return Err(Error::Alignment);
        }
        let d = f.dim;
        let stacked = DMatrix::from_fn(f.len(), d * d, |k, e| f.values[k][(e / d, e % d)]);
        let out = op * stacked;
        let values = (0..f.len())
            .map(|k| CMat::from_fn(d, d, |a, b| out[(k, a * d + b)]))
            .collect();
        GridFunction::new(f.system.clone(), d, values)
    }

    pub fn apply_plus(&self, f: &GridFunction) -> Result<GridFunction> {
        self.apply(&self.plus, f)
    }

    pub fn apply_minus(&self, f: &GridFunction) -> Result<GridFunction> {
        self.apply(&self.minus, f)
    }
}

/// Precomputed Cauchy integral `(1/2 pi i) int f(w) / (w - z) dw` of a grid
/// function, evaluable anywhere off the contour and as one-sided boundary
/// values on it.
#[derive(Clone, Debug)]
pub struct CauchyTransform {
    system: Arc<ContourSystem>,
    dim: usize,
    /// `spectra[circle][row * dim + col]`
    spectra: Vec<Vec<CircleSpectrum>>,
}

/// Default safety margin, as a fraction of the nearest circle's node spacing.
pub const DEFAULT_MARGIN: f64 = 0.5;

impl CauchyTransform {
    pub fn new(f: &GridFunction) -> Self {
        let d = f.dim;
        let spectra = (0..f.system.len())
            .map(|i| {
                let vals = f.circle_values(i);
                (0..d * d)
                    .map(|e| {
                        let samples: Vec<C64> = vals.iter().map(|m| m[(e / d, e % d)]).collect();
                        CircleSpectrum::from_samples(&samples)
                    })
                    .collect()
            })
            .collect();
        CauchyTransform {
            system: f.system.clone(),
            dim: d,
            spectra,
        }
    }

    pub fn system(&self) -> &Arc<ContourSystem> {
        &self.system
    }

    pub fn spectrum(&self, circle: usize, row: usize, col: usize) -> &CircleSpectrum {
        &self.spectra[circle][row * self.dim + col]
    }

    fn contribution(&self, j: usize, z: C64, side: Side, out: &mut CMat) {
        let circle = self.system.circle(j);
        let zeta = circle.local(z);
        let s = circle.orientation.sign();
        for (e, spec) in self.spectra[j].iter().enumerate() {
            let v = match side {
                Side::Interior => spec.interior_part(zeta) * s,
                Side::Exterior => -spec.exterior_part(zeta) * s,
            };
            out[(e / self.dim, e % self.dim)] += v;
        }
    }

    /// Checks the distance from `z` to the contour against
    /// `margin * node spacing` of the nearest circle.
    pub fn check_margin(system: &ContourSystem, z: C64, margin: f64) -> Result<()> {
        for (i, c) in system.circles().iter().enumerate() {
            let d = c.distance_to(z);
            let m = margin * c.node_spacing();
            if d <= m {
                return Err(Error::TooCloseToContour {
                    point: format!("{z}"),
                    circle: i,
                    distance: d,
                    margin: m,
                });
            }
        }
        Ok(())
    }

    /// Cauchy integral at `z`, refusing points within the default margin.
    pub fn eval(&self, z: C64) -> Result<CMat> {
        self.eval_with_margin(z, DEFAULT_MARGIN)
    }

    pub fn eval_with_margin(&self, z: C64, margin: f64) -> Result<CMat> {
        Self::check_margin(&self.system, z, margin)?;
        Ok(self.eval_unchecked(z))
    }

    pub fn eval_unchecked(&self, z: C64) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for (j, c) in self.system.circles().iter().enumerate() {
            let side = if c.encloses(z) {
                Side::Interior
            } else {
                Side::Exterior
            };
            self.contribution(j, z, side, &mut out);
        }
        out
    }

    /// Boundary value on circle `circle` at the point `z` of that circle,
    /// taken from `side`. `z` is projected radially onto the circle.
    pub fn boundary_value(&self, circle: usize, z: C64, side: Side) -> CMat {
        let c = self.system.circle(circle);
        let zeta = c.local(z);
        let on = c.point(zeta / zeta.norm());
        let mut out = CMat::zeros(self.dim, self.dim);
        for (j, other) in self.system.circles().iter().enumerate() {
            let s = if j == circle {
                side
            } else if other.encloses(on) {
                Side::Interior
            } else {
                Side::Exterior
            };
            self.contribution(j, on, s, &mut out);
        }
        out
    }

    /// Boundary value from the plus (`true`) or minus side.
    pub fn boundary_value_pm(&self, circle: usize, z: C64, plus: bool) -> CMat {
        let side = self.system.circle(circle).plus_side();
        self.boundary_value(circle, z, if plus { side } else { side.opposite() })
    }
}

/// One-shot Cauchy integral of `f` at an off-contour point.
pub fn cauchy_offcontour(f: &GridFunction, z: C64) -> Result<CMat> {
    CauchyTransform::check_margin(f.system(), z, DEFAULT_MARGIN)?;
    Ok(CauchyTransform::new(f).eval_unchecked(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{Circle, Orientation};

    fn unit_system(o: Orientation, n: usize) -> Arc<ContourSystem> {
        Arc::new(ContourSystem::new(vec![Circle::unit(o, n).unwrap()]).unwrap())
    }

    fn scalar_at(f: &GridFunction, k: usize) -> C64 {
        f.value(k)[(0, 0)]
    }

    #[test]
    fn constant_inside_and_outside() {
        let cs = unit_system(Orientation::Counterclockwise, 64);
        let one = GridFunction::identity(&cs, 2);
        let inside = cauchy_offcontour(&one, C64::new(0.0, 0.0)).unwrap();
        let outside = cauchy_offcontour(&one, C64::new(2.0, 0.0)).unwrap();
        assert!((inside - CMat::identity(2, 2)).camax() < 1e-12);
        assert!(outside.camax() < 1e-12);
    }

    #[test]
    fn partial_fraction_value() {
        let cs = unit_system(Orientation::Counterclockwise, 64);
        let f = GridFunction::scalar(&cs, |_, w| 1.0 / (w - 3.0));
        let v = cauchy_offcontour(&f, C64::new(0.5, 0.0)).unwrap()[(0, 0)];
        assert!((v - C64::new(-0.4, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn too_close_is_rejected() {
        let cs = unit_system(Orientation::Counterclockwise, 64);
        let f = GridFunction::identity(&cs, 1);
        let err = cauchy_offcontour(&f, C64::new(1.01, 0.0)).unwrap_err();
        assert!(matches!(err, Error::TooCloseToContour { circle: 0, .. }));
    }

    #[test]
    fn monomials_split_by_side() {
        let cs = unit_system(Orientation::Counterclockwise, 64);
        let p = CauchyProjectors::new(&cs);
        let z3 = GridFunction::scalar(&cs, |_, z| z.powi(3));
        let zm2 = GridFunction::scalar(&cs, |_, z| z.powi(-2));
        let plus = p.apply_plus(&z3).unwrap();
        let minus = p.apply_minus(&z3).unwrap();
        assert!(plus.max_abs_diff(&z3).unwrap() < 1e-12);
        assert!(minus.max_abs() < 1e-12);
        let plus = p.apply_plus(&zm2).unwrap();
        let minus = p.apply_minus(&zm2).unwrap();
        assert!(plus.max_abs() < 1e-12);
        assert!(minus.map(|m| -m).max_abs_diff(&zm2).unwrap() < 1e-12);
    }

    #[test]
    fn clockwise_circle_keeps_exterior_modes() {
        let cs = unit_system(Orientation::Clockwise, 32);
        let p = CauchyProjectors::new(&cs);
        let f = GridFunction::scalar(&cs, |_, z| z.powi(2) + z.powi(-3));
        let plus = p.apply_plus(&f).unwrap();
        let minus = p.apply_minus(&f).unwrap();
        for k in 0..32 {
            let z = cs.circle(0).node(k);
            assert!((scalar_at(&plus, k) - z.powi(-3)).norm() < 1e-12);
            assert!((scalar_at(&minus, k) + z.powi(2)).norm() < 1e-12);
        }
    }

    #[test]
    fn projections_on_shifted_circle() {
        let c = Circle::new(C64::new(0.5, -1.0), 0.7, Orientation::Counterclockwise, 64).unwrap();
        let cs = Arc::new(ContourSystem::new(vec![c]).unwrap());
        let p = CauchyProjectors::new(&cs);
        let pole = C64::new(3.0, 1.0);
        // analytic inside plus a function analytic outside and vanishing at infinity
        let f = GridFunction::scalar(&cs, |_, z| {
            (0.3 * z).exp() + 1.0 / (z - C64::new(0.6, -1.1))
        });
        let inside = GridFunction::scalar(&cs, |_, z| (0.3 * z).exp());
        let plus = p.apply_plus(&f).unwrap();
        assert!(plus.max_abs_diff(&inside).unwrap() < 1e-12);
        let g = GridFunction::scalar(&cs, |_, z| 1.0 / (z - pole));
        assert!(p.apply_minus(&g).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn spectrum_interpolates_samples() {
        let samples: Vec<C64> = (0..16)
            .map(|k| {
                let z = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 16.0);
                z.powi(3) - 2.0 * z.powi(-5) + 0.5
            })
            .collect();
        let s = CircleSpectrum::from_samples(&samples);
        assert!((s.coefficient(3) - 1.0).norm() < 1e-14);
        assert!((s.coefficient(-5) + 2.0).norm() < 1e-14);
        assert!((s.coefficient(0) - 0.5).norm() < 1e-14);
        let zeta = C64::from_polar(1.0, 0.123);
        let exact = zeta.powi(3) - 2.0 * zeta.powi(-5) + 0.5;
        assert!((s.interpolate(zeta) - exact).norm() < 1e-13);
    }

    #[test]
    fn multi_circle_cauchy_of_meromorphic_function() {
        // f = 1/(z - p) with p inside the second circle; the Cauchy integral
        // over the whole system equals f in the plus region that does not
        // contain p and is assembled from both circles.
        let a = Circle::unit(Orientation::Clockwise, 64).unwrap();
        let b = Circle::new(C64::new(3.0, 0.0), 0.5, Orientation::Clockwise, 64).unwrap();
        let cs = Arc::new(ContourSystem::new(vec![a, b]).unwrap());
        let p = C64::new(3.1, 0.05);
        let f = GridFunction::scalar(&cs, |_, z| 1.0 / (z - p));
        let t = CauchyTransform::new(&f);
        // a clockwise circle enclosing p reproduces f outside it; the unit
        // circle sees a function analytic in its disk and contributes nothing.
        for z in [C64::new(1.5, 0.5), C64::new(-2.0, 1.0), C64::new(3.0, 2.0)] {
            let v = t.eval(z).unwrap()[(0, 0)];
            assert!((v - 1.0 / (z - p)).norm() < 1e-12, "{z}: {v}");
        }
    }
}
