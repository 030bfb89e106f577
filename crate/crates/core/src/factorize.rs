//! Wiener-Hopf factorization.
//!
//! * Scalar symbols on a single circle: `v = m-^{-1} theta m+` with
//!   `theta = ((z - z+)/(z - z-))^kappa`, `kappa` the winding number, and
//!   `m+-` obtained by splitting `log(v / theta)` with the Cauchy projections.
//! * Matrix symbols that are inversion symmetric and positive on the unit
//!   circle: `v = (w+)# w+`, built by solving the Riemann-Hilbert problem for
//!   `v` and normalizing the constant that relates the two factors.

use std::f64::consts::PI;

use crate::cauchy::{max_abs, CauchyProjectors, CauchyTransform, CircleSpectrum, GridFunction};
use crate::contour::{invert_point, ContourSystem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rhp::{self, Branch, JumpData, RHProblem, RHSolution, Tolerances};
use crate::{CMat, C64};

/// Largest admissible argument increment between neighbouring nodes.
const MAX_PHASE_STEP: f64 = 0.75 * PI;

fn scalar_values(v: &GridFunction, circle: usize) -> Result<Vec<C64>> {
    if v.dim() != 1 {
        return Err(Error::Input(format!(
            "expected a scalar grid function, got dimension {}",
            v.dim()
        )));
    }
    Ok(v.circle_values(circle).iter().map(|m| m[(0, 0)]).collect())
}

/// Winding number of a scalar grid function around 0, counted along the
/// orientation of circle `circle`.
///
/// The argument is tracked from node to node; a step larger than `3 pi / 4`
/// means the symbol is under-resolved and the count is not trusted.
pub fn winding_number(v: &GridFunction, circle: usize) -> Result<i64> {
    let vals = scalar_values(v, circle)?;
    if let Some(k) = vals.iter().position(|x| x.norm() == 0.0 || !x.is_finite()) {
        return Err(Error::SingularJump {
            node: k,
            det: vals[k].norm(),
        });
    }
    let n = vals.len();
    let mut total = 0.0;
    for k in 0..n {
        let step = (vals[(k + 1) % n] / vals[k]).arg();
        if step.abs() > MAX_PHASE_STEP {
            return Err(Error::WindingAmbiguity(format!(
                "argument jumps by {step:.3} between nodes {k} and {}",
                (k + 1) % n
            )));
        }
        total += step;
    }
    let raw = total / (2.0 * PI);
    let rounded = raw.round();
    if (raw - rounded).abs() > 0.1 {
        return Err(Error::WindingAmbiguity(format!(
            "winding sum {raw:.3} is not near an integer"
        )));
    }
    // nodes are laid out counterclockwise
    let sign = v.system().circle(circle).orientation.sign();
    Ok((rounded * sign) as i64)
}

/// `((z - z+)/(z - z-))^kappa`; `None` stands for the point at infinity and
/// drops the corresponding factor.
pub fn theta_scalar(z: C64, z_plus: Option<C64>, z_minus: Option<C64>, kappa: i64) -> C64 {
    let mut base = C64::new(1.0, 0.0);
    if let Some(p) = z_plus {
        base *= z - p;
    }
    if let Some(m) = z_minus {
        base /= z - m;
    }
    base.powi(kappa as i32)
}

/// `diag[((z - z+)/(z - z-))^k_1, ...]`.
pub fn theta(z: C64, z_plus: Option<C64>, z_minus: Option<C64>, indices: &[i64]) -> CMat {
    let d: Vec<C64> = indices
        .iter()
        .map(|&k| theta_scalar(z, z_plus, z_minus, k))
        .collect();
    CMat::from_diagonal(&nalgebra::DVector::from_vec(d))
}

/// Closed form of `theta#(z) = theta(1/conj z)^*` for finite, nonzero `z+-`:
/// `diag[(conj(z+)/conj(z-) * (z - 1/conj(z+))/(z - 1/conj(z-)))^k_j]`.
pub fn theta_sharp(z: C64, z_plus: C64, z_minus: C64, indices: &[i64]) -> CMat {
    let factor =
        z_plus.conj() / z_minus.conj() * (z - invert_point(z_plus)) / (z - invert_point(z_minus));
    let d: Vec<C64> = indices.iter().map(|&k| factor.powi(k as i32)).collect();
    CMat::from_diagonal(&nalgebra::DVector::from_vec(d))
}

/// `v = m-^{-1} theta m+` for a scalar symbol on one circle.
#[derive(Clone, Debug)]
pub struct ScalarFactorization {
    pub index: i64,
    pub m_plus: GridFunction,
    pub m_minus: GridFunction,
    pub theta: GridFunction,
    pub z_plus: Option<C64>,
    pub z_minus: Option<C64>,
    /// Cauchy integral of `log(v / theta)`; `m = exp` of it on either side.
    log_transform: CauchyTransform,
}

impl ScalarFactorization {
    /// `m(z) = exp(C[log(v/theta)](z))`: equals the extension of `m+` in the
    /// plus region and of `m-` in the minus region.
    pub fn m_at(&self, z: C64) -> Result<C64> {
        Ok(self.log_transform.eval(z)?[(0, 0)].exp())
    }

    pub fn theta_at(&self, z: C64) -> C64 {
        theta_scalar(z, self.z_plus, self.z_minus, self.index)
    }

    /// `max |v - m-^{-1} theta m+| / |v|` over the nodes.
    pub fn identity_residual(&self, v: &GridFunction) -> Result<f64> {
        if !v.aligned_with(&self.m_plus) {
            return Err(Error::Alignment);
        }
        let mut worst = 0.0f64;
        for k in 0..v.len() {
            let vk = v.value(k)[(0, 0)];
            let rebuilt = self.theta.value(k)[(0, 0)] * self.m_plus.value(k)[(0, 0)]
                / self.m_minus.value(k)[(0, 0)];
            worst = worst.max((vk - rebuilt).norm() / vk.norm());
        }
        Ok(worst)
    }

    /// Largest Fourier coefficient of `m+` (resp. `m-`) on modes that do not
    /// continue into the plus (resp. minus) region.
    pub fn analyticity_defect(&self) -> f64 {
        let side = self.m_plus.system().circle(0).plus_side();
        let spec = |f: &GridFunction| CircleSpectrum::from_samples(&f.entry(0, 0));
        spec(&self.m_plus)
            .off_side_magnitude(side)
            .max(spec(&self.m_minus).off_side_magnitude(side.opposite()))
    }
}

fn check_side(system: &ContourSystem, point: Option<C64>, plus: bool) -> Result<()> {
    let label = if plus { "z+" } else { "z-" };
    match point {
        Some(p) => {
            let c = system.circle(0);
            if c.distance_to(p) == 0.0 || system.in_plus_region(p) != plus {
                return Err(Error::Input(format!(
                    "{label} = {p} is not in the {} region",
                    if plus { "plus" } else { "minus" }
                )));
            }
        }
        None => {
            if system.unbounded_is_plus() != plus {
                return Err(Error::Input(format!(
                    "{label} may only be omitted (infinity) for the unbounded region"
                )));
            }
        }
    }
    Ok(())
}

/// Scalar Wiener-Hopf factorization on a single circle.
///
/// The constant Fourier mode of `log(v/theta)` goes to the bounded side, so
/// the factor living on the unbounded side tends to 1 at infinity.
pub fn scalar_factorize(
    v: &GridFunction,
    z_plus: Option<C64>,
    z_minus: Option<C64>,
) -> Result<ScalarFactorization> {
    let system = v.system().clone();
    if system.len() != 1 {
        return Err(Error::Input(
            "scalar factorization needs a single circle".into(),
        ));
    }
    let kappa = winding_number(v, 0)?;
    let n = system.circle(0).node_count;
    let needed = 8 * kappa.unsigned_abs() as usize + 32;
    if n < needed {
        return Err(Error::WindingAmbiguity(format!(
            "{n} nodes cannot resolve index {kappa}; need {needed}"
        )));
    }
    if kappa != 0 {
        check_side(&system, z_plus, true)?;
        check_side(&system, z_minus, false)?;
    }
    let theta = GridFunction::scalar(&system, |_, z| theta_scalar(z, z_plus, z_minus, kappa));

    // continuous logarithm of v / theta
    let q: Vec<C64> = scalar_values(v, 0)?
        .iter()
        .zip(theta.values())
        .map(|(vk, t)| vk / t[(0, 0)])
        .collect();
    let mut arg = q[0].arg();
    let mut logs = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            arg += (q[k] / q[k - 1]).arg();
        }
        logs.push(C64::new(q[k].norm().ln(), arg));
    }
    let closing = arg + (q[0] / q[n - 1]).arg() - q[0].arg();
    if closing.abs() > PI {
        return Err(Error::WindingAmbiguity(
            "log(v/theta) does not close up".into(),
        ));
    }
    let g = GridFunction::new(
        system.clone(),
        1,
        logs.into_iter()
            .map(|x| CMat::from_element(1, 1, x))
            .collect(),
    )?;
    let log_transform = CauchyTransform::new(&g);
    let c = system.circle(0);
    let boundary = |plus: bool| {
        let vals = (0..n)
            .map(|k| {
                log_transform
                    .boundary_value_pm(0, c.node(k), plus)
                    .map(|x| x.exp())
            })
            .collect();
        GridFunction::new(system.clone(), 1, vals)
    };
    // g+ = C+ g, g- = -C- g, m+ = exp(g+), m- = exp(-g-) = exp(C- g)
    Ok(ScalarFactorization {
        index: kappa,
        m_plus: boundary(true)?,
        m_minus: boundary(false)?,
        theta,
        z_plus,
        z_minus,
        log_transform,
    })
}

/// `v = (w+)# w+` on an inversion-invariant contour.
#[derive(Clone, Debug)]
pub struct HermitianFactorization {
    pub w_plus: GridFunction,
    /// Hermitian part of the node average of `C(z) = (n+#)^{-1} n-`.
    pub constant_c: CMat,
    pub sqrt_r: CMat,
    /// Root-mean-square Frobenius deviation of `C(z)` from its average.
    pub c_stddev: f64,
    /// Largest entrywise deviation of `C(z)` from its average.
    pub c_max_deviation: f64,
    /// `max |v - (w+)# w+|` over all nodes.
    pub product_residual: f64,
    pub solution: RHSolution,
}

impl HermitianFactorization {
    /// Holomorphic extension `R m(z)` of `w+` at a point of the plus region.
    pub fn w_plus_at(&self, z: C64) -> Result<CMat> {
        if !self.solution.system().in_plus_region(z) {
            return Err(Error::Input(format!("{z} is not in the plus region")));
        }
        Ok(&self.sqrt_r * self.solution.evaluate_m(z)?)
    }
}

/// `n+` at `1/conj(z)` for a node `z` of circle `circle`: boundary value from
/// the plus side on the image circle (the node value itself on the unit
/// circle).
fn n_plus_at_image(sol: &RHSolution, circle: usize, node: usize, z: C64) -> CMat {
    let system = sol.system();
    let partner = system
        .inversion_partner(circle)
        .expect("inversion-invariant system");
    if partner == circle && system.circle(circle).is_unit() {
        sol.m_plus().value(system.offset(circle) + node).clone()
    } else {
        sol.boundary_value(partner, invert_point(z), true)
    }
}

/// Positive Hermitian factorization `v = (w+)# w+`.
///
/// Requires `v = v#` on the whole contour (including the unit circle, where it
/// means `v = v^*`) and `v > 0` on the unit circle.
pub fn hermitian_factorize(
    jump: &JumpData,
    proj: &CauchyProjectors,
    tol: &Tolerances,
) -> Result<HermitianFactorization> {
    let report = rhp::check_inversion_hypotheses(jump, tol)?;
    if !report.symmetric_off_circle {
        return Err(Error::Hypothesis(format!(
            "v differs from v# by {:.3e} off the unit circle",
            report.symmetry_defect
        )));
    }
    if report.hermitian_defect_on_circle > tol.symmetry {
        return Err(Error::Hypothesis(format!(
            "v is not Hermitian on the unit circle (defect {:.3e})",
            report.hermitian_defect_on_circle
        )));
    }
    if report.min_re_eig_on_circle <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "v is not positive on the unit circle (smallest eigenvalue {:.3e})",
            report.min_re_eig_on_circle
        )));
    }
    let n = jump.dim();
    let p = RHProblem::with_splitting(jump.clone(), Branch::Plus, CMat::identity(n, n), *tol)?;
    let sol = rhp::solve(&p, proj)?;
    let system = sol.system().clone();

    // C(z) = (n+#(z))^{-1} n-(z), n+ = m+, n- = m-^{-1}
    let mut cs = Vec::with_capacity(system.total_nodes());
    for node in system.nodes() {
        let g = system.offset(node.circle) + node.index;
        let n_minus = sol
            .m_minus()
            .value(g)
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Hypothesis(format!("m- is singular at node {g}")))?;
        let n_plus_sharp = n_plus_at_image(&sol, node.circle, node.index, node.point).adjoint();
        let inv = n_plus_sharp
            .try_inverse()
            .ok_or_else(|| Error::Hypothesis(format!("n+# is singular at node {g}")))?;
        cs.push(inv * n_minus);
    }
    let count = cs.len() as f64;
    let mean = cs.iter().fold(CMat::zeros(n, n), |acc, c| acc + c) / C64::new(count, 0.0);
    let c_max_deviation = cs.iter().map(|c| max_abs(&(c - &mean))).fold(0.0, f64::max);
    let c_stddev = (cs.iter().map(|c| (c - &mean).norm_squared()).sum::<f64>() / count).sqrt();
    if c_max_deviation > 1e-6 {
        return Err(Error::NonConstantC(c_max_deviation));
    }
    let constant_c = (&mean + mean.adjoint()) * C64::new(0.5, 0.0);
    let lowest = linalg::min_hermitian_eig(&constant_c);
    let sqrt_r = linalg::hermitian_sqrt(&constant_c).ok_or(Error::NonPositiveC(lowest))?;

    let w_plus = GridFunction::new(
        system.clone(),
        n,
        sol.m_plus().values().iter().map(|m| &sqrt_r * m).collect(),
    )?;
    let mut product_residual = 0.0f64;
    for node in system.nodes() {
        let g = system.offset(node.circle) + node.index;
        let image = &sqrt_r * n_plus_at_image(&sol, node.circle, node.index, node.point);
        let rebuilt = image.adjoint() * w_plus.value(g);
        product_residual = product_residual.max(max_abs(&(jump.v().value(g) - rebuilt)));
    }
    Ok(HermitianFactorization {
        w_plus,
        constant_c,
        sqrt_r,
        c_stddev,
        c_max_deviation,
        product_residual,
        solution: sol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{sharp, Circle, Orientation};
    use crate::rhp::{jump_fn, scalar_jump_fn};
    use std::sync::Arc;

    fn unit(o: Orientation, n: usize) -> Arc<ContourSystem> {
        Arc::new(ContourSystem::new(vec![Circle::unit(o, n).unwrap()]).unwrap())
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn winding_of_simple_symbols() {
        let cs = unit(Orientation::Counterclockwise, 64);
        assert_eq!(
            winding_number(&GridFunction::scalar(&cs, |_, z| z), 0).unwrap(),
            1
        );
        let v = GridFunction::scalar(&cs, |_, z| z.powi(-2) * (0.3 * z).exp());
        assert_eq!(winding_number(&v, 0).unwrap(), -2);
        assert_eq!(
            winding_number(&GridFunction::scalar(&cs, |_, _| c(5.0, 0.0)), 0).unwrap(),
            0
        );
        let cw = unit(Orientation::Clockwise, 64);
        assert_eq!(
            winding_number(&GridFunction::scalar(&cw, |_, z| z), 0).unwrap(),
            -1
        );
    }

    #[test]
    fn under_resolved_winding_is_ambiguous() {
        let cs = unit(Orientation::Counterclockwise, 8);
        let v = GridFunction::scalar(&cs, |_, z| z.powi(3));
        assert!(matches!(
            winding_number(&v, 0),
            Err(Error::WindingAmbiguity(_))
        ));
    }

    #[test]
    fn trivial_symbol_factors_trivially() {
        let cs = unit(Orientation::Counterclockwise, 64);
        let f = scalar_factorize(
            &GridFunction::scalar(&cs, |_, _| c(1.0, 0.0)),
            Some(c(0.0, 0.0)),
            None,
        )
        .unwrap();
        assert_eq!(f.index, 0);
        assert!(
            f.m_plus
                .max_abs_diff(&GridFunction::identity(&cs, 1))
                .unwrap()
                < 1e-15
        );
        assert!(
            f.m_minus
                .max_abs_diff(&GridFunction::identity(&cs, 1))
                .unwrap()
                < 1e-15
        );
    }

    #[test]
    fn exponential_symbol_splits_by_hand() {
        // 3 exp(0.2 (z + 1/z)): m+ = 3 exp(0.2 z), m- = exp(-0.2 / z)
        let cs = unit(Orientation::Counterclockwise, 128);
        let v = GridFunction::scalar(&cs, |_, z| 3.0 * (0.2 * (z + 1.0 / z)).exp());
        let f = scalar_factorize(&v, Some(c(0.0, 0.0)), None).unwrap();
        assert_eq!(f.index, 0);
        let mp = GridFunction::scalar(&cs, |_, z| 3.0 * (0.2 * z).exp());
        let mm = GridFunction::scalar(&cs, |_, z| (-0.2 / z).exp());
        assert!(f.m_plus.max_abs_diff(&mp).unwrap() < 1e-13);
        assert!(f.m_minus.max_abs_diff(&mm).unwrap() < 1e-13);
        assert!(f.identity_residual(&v).unwrap() < 1e-13);
        assert!(f.analyticity_defect() < 1e-13);
        assert!((f.m_at(c(0.2, 0.3)).unwrap() - 3.0 * (0.2 * c(0.2, 0.3)).exp()).norm() < 1e-13);
    }

    #[test]
    fn rational_symbol_with_unit_index() {
        // (z - a)/(z - b), |a| < 1 < |b|, winds once: theta = z, m+ = 1/(1 - z/b)... up to constants
        let (a, b) = (c(0.4, 0.0), c(2.5, 0.0));
        let cs = unit(Orientation::Counterclockwise, 128);
        let v = GridFunction::scalar(&cs, move |_, z| (z - a) / (z - b));
        let f = scalar_factorize(&v, Some(c(0.0, 0.0)), None).unwrap();
        assert_eq!(f.index, 1);
        assert!(f.identity_residual(&v).unwrap() < 1e-12);
        assert!(f.analyticity_defect() < 1e-12);
        // m- = 1/(1 - a/z) outside, m+ = -b / (z - b) ... times the mean split
        let z = c(0.1, -0.2);
        let ratio = f.m_at(z).unwrap() * (z - b);
        let w = c(0.3, 0.4);
        assert!((ratio - f.m_at(w).unwrap() * (w - b)).norm() < 1e-12);
        let far = c(3.0, 1.0);
        assert!((f.m_at(far).unwrap() - far / (far - a)).norm() < 1e-12);
    }

    #[test]
    fn index_is_additive() {
        let cs = unit(Orientation::Counterclockwise, 128);
        let v1 = GridFunction::scalar(&cs, |_, z| (z - 0.3) * (z - c(0.0, 0.5)));
        let v2 = GridFunction::scalar(&cs, |_, z| 1.0 / ((z - 0.1) * (z - 3.0)));
        let k1 = winding_number(&v1, 0).unwrap();
        let k2 = winding_number(&v2, 0).unwrap();
        assert_eq!((k1, k2), (2, -1));
        assert_eq!(winding_number(&v1.mul(&v2).unwrap(), 0).unwrap(), k1 + k2);
    }

    #[test]
    fn theta_sharp_matches_sampled_inversion() {
        let (zp, zm) = (c(0.3, 0.1), c(2.0, -0.5));
        let k = [2, -1];
        for t in 0..50 {
            let z = C64::from_polar(1.0, 0.37 * t as f64);
            let sampled = sharp(|w| theta(w, Some(zp), Some(zm), &k), z);
            assert!((sampled - theta_sharp(z, zp, zm, &k)).camax() < 1e-12);
        }
    }

    #[test]
    fn hermitian_factor_of_trigonometric_symbol() {
        let cs = unit(Orientation::Counterclockwise, 128);
        let jump = JumpData::sample(&cs, scalar_jump_fn(|_, z| 2.5 + z + 1.0 / z), 1e-10).unwrap();
        let f = hermitian_factorize(&jump, &CauchyProjectors::new(&cs), &Tolerances::default())
            .unwrap();
        assert!((f.constant_c[(0, 0)] - 0.5).norm() < 1e-12);
        assert!(
            f.product_residual < 1e-12,
            "{} {:?} {}",
            f.product_residual,
            f.constant_c,
            f.c_max_deviation
        );
        let expected = GridFunction::scalar(&cs, |_, z| 2f64.sqrt() * (1.0 + 0.5 * z));
        let d = f.w_plus.max_abs_diff(&expected).unwrap();
        assert!(d < 1e-12, "{d} {:?}", f.w_plus.value(3));
    }

    #[test]
    fn hermitian_identity_is_trivial() {
        let cs = unit(Orientation::Clockwise, 16);
        let jump = JumpData::sample(&cs, jump_fn(2, |_, _| CMat::identity(2, 2)), 1e-10).unwrap();
        let f = hermitian_factorize(&jump, &CauchyProjectors::new(&cs), &Tolerances::default())
            .unwrap();
        assert!((f.sqrt_r.clone() - CMat::identity(2, 2)).camax() < 1e-14);
        assert!(
            f.w_plus
                .max_abs_diff(&GridFunction::identity(&cs, 2))
                .unwrap()
                < 1e-14
        );
    }

    #[test]
    fn non_hermitian_symbol_is_refused() {
        let cs = unit(Orientation::Counterclockwise, 16);
        let jump = JumpData::sample(&cs, scalar_jump_fn(|_, z| 2.0 + z), 1e-10).unwrap();
        let err = hermitian_factorize(&jump, &CauchyProjectors::new(&cs), &Tolerances::default())
            .unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }
}
