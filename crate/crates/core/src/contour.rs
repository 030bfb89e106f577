//! Oriented circles, contour systems and inversion in the unit circle.
//!
//! A [`ContourSystem`] is a finite disjoint union of circles. Every circle
//! carries an orientation; the region on its left is locally part of the
//! plus region `Omega+`, the region on its right part of `Omega-`. The system
//! is rejected when these local labels do not glue into a global partition of
//! the complement.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMat, C64};

/// Default number of collocation nodes per circle.
pub const DEFAULT_NODES: usize = 64;

const GEOMETRY_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "ccw")]
    Counterclockwise,
    #[serde(rename = "cw")]
    Clockwise,
}

impl Orientation {
    /// `+1` for counterclockwise, `-1` for clockwise.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Counterclockwise => 1.0,
            Orientation::Clockwise => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Orientation::Counterclockwise => Orientation::Clockwise,
            Orientation::Clockwise => Orientation::Counterclockwise,
        }
    }
}

/// One of the two sides of a circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Interior,
    Exterior,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Interior => Side::Exterior,
            Side::Exterior => Side::Interior,
        }
    }
}

/// A circle `center + radius * exp(i t)` with equispaced collocation nodes.
///
/// Nodes sit at `center + radius * exp(2 pi i k / node_count)` regardless of
/// orientation; the orientation only enters through the sign of the
/// quadrature weights and the side bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Circle {
    pub center: C64,
    pub radius: f64,
    pub orientation: Orientation,
    pub node_count: usize,
}

impl Circle {
    pub fn new(
        center: C64,
        radius: f64,
        orientation: Orientation,
        node_count: usize,
    ) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidCircle(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if !(center.re.is_finite() && center.im.is_finite()) {
            return Err(Error::InvalidCircle("center must be finite".into()));
        }
        if node_count < 4 || !node_count.is_multiple_of(2) {
            return Err(Error::InvalidCircle(format!(
                "node count must be even and at least 4, got {node_count}"
            )));
        }
        Ok(Circle {
            center,
            radius,
            orientation,
            node_count,
        })
    }

    /// The unit circle with the given orientation.
    pub fn unit(orientation: Orientation, node_count: usize) -> Result<Self> {
        Circle::new(C64::new(0.0, 0.0), 1.0, orientation, node_count)
    }

    /// Point of the circle at local coordinate `zeta` on the unit circle.
    pub fn point(&self, zeta: C64) -> C64 {
        self.center + zeta * self.radius
    }

    /// Local coordinate `(z - center) / radius`.
    pub fn local(&self, z: C64) -> C64 {
        (z - self.center) / self.radius
    }

    /// `exp(2 pi i k / N)`.
    pub fn unit_node(&self, k: usize) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * k as f64 / self.node_count as f64)
    }

    pub fn node(&self, k: usize) -> C64 {
        self.point(self.unit_node(k))
    }

    /// Point halfway (in angle) between node `k` and node `k + 1`.
    pub fn midpoint(&self, k: usize) -> C64 {
        let t = 2.0 * PI * (k as f64 + 0.5) / self.node_count as f64;
        self.point(C64::from_polar(1.0, t))
    }

    /// Trapezoidal arc element `dz_k` at node `k`, signed by orientation.
    pub fn weight(&self, k: usize) -> C64 {
        let scale = 2.0 * PI * self.radius / self.node_count as f64 * self.orientation.sign();
        C64::new(0.0, scale) * self.unit_node(k)
    }

    pub fn node_spacing(&self) -> f64 {
        2.0 * PI * self.radius / self.node_count as f64
    }

    /// Distance from `z` to the circle as a point set.
    pub fn distance_to(&self, z: C64) -> f64 {
        ((z - self.center).norm() - self.radius).abs()
    }

    /// Strictly inside the disk bounded by the circle.
    pub fn encloses(&self, z: C64) -> bool {
        (z - self.center).norm() < self.radius
    }

    /// The side on the left of the orientation, which belongs to `Omega+`.
    pub fn plus_side(&self) -> Side {
        match self.orientation {
            Orientation::Counterclockwise => Side::Interior,
            Orientation::Clockwise => Side::Exterior,
        }
    }

    /// Same center and radius up to a relative tolerance.
    pub fn same_geometry(&self, other: &Circle, tol: f64) -> bool {
        let scale =
            1.0 + self.radius.max(other.radius) + self.center.norm().max(other.center.norm());
        (self.center - other.center).norm() <= tol * scale
            && (self.radius - other.radius).abs() <= tol * scale
    }

    pub fn is_unit(&self) -> bool {
        self.same_geometry(
            &Circle::unit(Orientation::Counterclockwise, 4).unwrap(),
            1e-12,
        )
    }

    /// True when `inner` lies strictly inside the disk of `self`.
    fn contains_circle(&self, inner: &Circle) -> bool {
        let d = (self.center - inner.center).norm();
        d + inner.radius < self.radius - GEOMETRY_EPS * (1.0 + self.radius)
    }
}

/// `z -> 1 / conj(z)`, the inversion in the unit circle.
pub fn invert_point(z: C64) -> C64 {
    1.0 / z.conj()
}

/// `f#(z) = f(1/conj z)^*` for a matrix function `f`.
pub fn sharp<F: Fn(C64) -> CMat>(f: F, z: C64) -> CMat {
    f(invert_point(z)).adjoint()
}

/// Image of a circle under `z -> 1 / conj(z)`.
///
/// The image of `|z - c| = rho` is the circle with center `c / (|c|^2 - rho^2)`
/// and radius `rho / ||c|^2 - rho^2|`. The traversal direction of the image is
/// kept when the circle encloses the origin and reversed otherwise, so the
/// plus and minus sides are exchanged by the map.
pub fn invert_circle(c: &Circle) -> Result<Circle> {
    let power = c.center.norm_sqr() - c.radius * c.radius;
    if power.abs() <= GEOMETRY_EPS * (1.0 + c.radius * c.radius) {
        return Err(Error::SingularInversion);
    }
    let orientation = if power < 0.0 {
        c.orientation
    } else {
        c.orientation.reversed()
    };
    Circle::new(
        c.center / power,
        c.radius / power.abs(),
        orientation,
        c.node_count,
    )
}

/// A collocation node of a contour system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub circle: usize,
    pub index: usize,
    pub point: C64,
    pub weight: C64,
}

/// An oriented, side-labelled union of disjoint circles.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourSystem {
    circles: Vec<Circle>,
    parent: Vec<Option<usize>>,
    offsets: Vec<usize>,
    unbounded_is_plus: bool,
}

impl ContourSystem {
    /// Builds a system, deriving global side labels from the orientations.
    ///
    /// Fails with [`Error::Overlap`] when two circles meet and with
    /// [`Error::Orientation`] when the regions cannot be labelled
    /// consistently (a circle must be oriented opposite to the smallest
    /// circle enclosing it, and all outermost circles must agree).
    pub fn new(circles: Vec<Circle>) -> Result<Self> {
        if circles.is_empty() {
            return Err(Error::Input("a contour needs at least one circle".into()));
        }
        for i in 0..circles.len() {
            for j in (i + 1)..circles.len() {
                let (a, b) = (&circles[i], &circles[j]);
                let d = (a.center - b.center).norm();
                let eps = GEOMETRY_EPS * (1.0 + a.radius + b.radius);
                let apart = d > a.radius + b.radius + eps;
                let nested = d < (a.radius - b.radius).abs() - eps;
                if !(apart || nested) {
                    return Err(Error::Overlap(i, j));
                }
            }
        }

        let parent: Vec<Option<usize>> = (0..circles.len())
            .map(|i| {
                (0..circles.len())
                    .filter(|&j| j != i && circles[j].contains_circle(&circles[i]))
                    .min_by(|&a, &b| circles[a].radius.total_cmp(&circles[b].radius))
            })
            .collect();

        let mut unbounded_is_plus = None;
        for (i, c) in circles.iter().enumerate() {
            match parent[i] {
                Some(p) => {
                    if circles[p].orientation == c.orientation {
                        return Err(Error::Orientation(format!(
                            "circle {i} is nested directly inside circle {p} with the same orientation"
                        )));
                    }
                }
                None => {
                    let plus = c.plus_side() == Side::Exterior;
                    match unbounded_is_plus {
                        None => unbounded_is_plus = Some(plus),
                        Some(prev) if prev != plus => {
                            return Err(Error::Orientation(format!(
                                "outermost circle {i} disagrees with the other outermost circles"
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }

        let mut offsets = Vec::with_capacity(circles.len() + 1);
        let mut acc = 0;
        for c in &circles {
            offsets.push(acc);
            acc += c.node_count;
        }
        offsets.push(acc);

        Ok(ContourSystem {
            circles,
            parent,
            offsets,
            unbounded_is_plus: unbounded_is_plus.expect("at least one outermost circle"),
        })
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn circle(&self, i: usize) -> &Circle {
        &self.circles[i]
    }

    pub fn len(&self) -> usize {
        self.circles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circles.is_empty()
    }

    pub fn total_nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Index of the first node of circle `i` in the concatenated node list.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn node_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Smallest circle strictly enclosing circle `i`.
    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    /// Maps a global node index to `(circle, local index)`.
    pub fn locate(&self, global: usize) -> (usize, usize) {
        let i = self.offsets.partition_point(|&o| o <= global) - 1;
        (i, global - self.offsets[i])
    }

    /// All collocation nodes with their quadrature weights, circle by circle.
    pub fn nodes(&self) -> Vec<Node> {
        self.circles
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                (0..c.node_count).map(move |k| Node {
                    circle: i,
                    index: k,
                    point: c.node(k),
                    weight: c.weight(k),
                })
            })
            .collect()
    }

    /// The circle nearest to `z` and the distance to it.
    pub fn nearest_circle(&self, z: C64) -> (usize, f64) {
        self.circles
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.distance_to(z)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }

    /// Smallest circle whose disk contains `z`, if any.
    pub fn innermost_enclosing(&self, z: C64) -> Option<usize> {
        self.circles
            .iter()
            .enumerate()
            .filter(|(_, c)| c.encloses(z))
            .min_by(|a, b| a.1.radius.total_cmp(&b.1.radius))
            .map(|(i, _)| i)
    }

    /// Whether an off-contour point belongs to `Omega+`.
    pub fn in_plus_region(&self, z: C64) -> bool {
        match self.innermost_enclosing(z) {
            Some(i) => self.circles[i].plus_side() == Side::Interior,
            None => self.unbounded_is_plus,
        }
    }

    /// Whether the unbounded component of the complement belongs to `Omega+`.
    pub fn unbounded_is_plus(&self) -> bool {
        self.unbounded_is_plus
    }

    pub fn unit_circle_index(&self) -> Option<usize> {
        self.circles.iter().position(Circle::is_unit)
    }

    /// Index of a circle with the same geometry as `c`.
    pub fn find_circle(&self, c: &Circle) -> Option<usize> {
        self.circles.iter().position(|d| d.same_geometry(c, 1e-10))
    }

    /// Index of the image of circle `i` under inversion, when present in the
    /// system with the orientation the inversion produces.
    pub fn inversion_partner(&self, i: usize) -> Option<usize> {
        let image = invert_circle(&self.circles[i]).ok()?;
        let j = self.find_circle(&image)?;
        (self.circles[j].orientation == image.orientation).then_some(j)
    }

    /// Checks that the system contains the unit circle and is closed under
    /// inversion (including orientations).
    pub fn check_inversion_invariant(&self) -> Result<usize> {
        let unit = self.unit_circle_index().ok_or_else(|| {
            Error::NotInversionInvariantContour("the unit circle is missing".into())
        })?;
        for i in 0..self.len() {
            if self.inversion_partner(i).is_none() {
                return Err(Error::NotInversionInvariantContour(format!(
                    "the image of circle {i} is not part of the system"
                )));
            }
        }
        Ok(unit)
    }

    /// A system with the same circles but different node counts.
    pub fn with_node_counts(&self, counts: &[usize]) -> Result<Self> {
        if counts.len() != self.len() {
            return Err(Error::Input("one node count per circle is required".into()));
        }
        let circles = self
            .circles
            .iter()
            .zip(counts)
            .map(|(c, &n)| Circle::new(c.center, c.radius, c.orientation, n))
            .collect::<Result<Vec<_>>>()?;
        ContourSystem::new(circles)
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.circles.iter().map(|c| c.node_count).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn clockwise_unit_circle_has_plus_exterior() {
        let cs =
            ContourSystem::new(vec![Circle::unit(Orientation::Clockwise, 64).unwrap()]).unwrap();
        assert!(cs.in_plus_region(c(2.0, 0.0)));
        assert!(!cs.in_plus_region(c(0.0, 0.0)));
        assert_eq!(cs.total_nodes(), 64);
    }

    #[test]
    fn counterclockwise_unit_circle_has_plus_interior() {
        let cs = ContourSystem::new(vec![Circle::unit(Orientation::Counterclockwise, 8).unwrap()])
            .unwrap();
        assert!(cs.in_plus_region(c(0.1, 0.2)));
        assert!(!cs.in_plus_region(c(3.0, 0.0)));
        assert!(!cs.unbounded_is_plus());
    }

    #[test]
    fn concentric_same_orientation_is_rejected() {
        // the annulus would be minus from the inner circle and plus from the outer one
        let inner = Circle::unit(Orientation::Counterclockwise, 16).unwrap();
        let outer = Circle::new(c(0.0, 0.0), 2.0, Orientation::Counterclockwise, 16).unwrap();
        assert!(matches!(
            ContourSystem::new(vec![inner, outer]),
            Err(Error::Orientation(_))
        ));
    }

    #[test]
    fn concentric_opposite_orientation_is_an_annulus() {
        let inner = Circle::unit(Orientation::Clockwise, 16).unwrap();
        let outer = Circle::new(c(0.0, 0.0), 2.0, Orientation::Counterclockwise, 16).unwrap();
        let cs = ContourSystem::new(vec![inner, outer]).unwrap();
        assert!(cs.in_plus_region(c(1.5, 0.0)));
        assert!(!cs.in_plus_region(c(0.0, 0.0)));
        assert!(!cs.in_plus_region(c(3.0, 0.0)));
        assert_eq!(cs.parent(0), Some(1));
    }

    #[test]
    fn outermost_circles_must_agree() {
        let a = Circle::new(c(-3.0, 0.0), 1.0, Orientation::Counterclockwise, 8).unwrap();
        let b = Circle::new(c(3.0, 0.0), 1.0, Orientation::Clockwise, 8).unwrap();
        assert!(matches!(
            ContourSystem::new(vec![a, b]),
            Err(Error::Orientation(_))
        ));
    }

    #[test]
    fn touching_and_crossing_circles_overlap() {
        let a = Circle::unit(Orientation::Clockwise, 8).unwrap();
        let touching = Circle::new(c(2.0, 0.0), 1.0, Orientation::Clockwise, 8).unwrap();
        let crossing = Circle::new(c(1.0, 0.0), 0.5, Orientation::Clockwise, 8).unwrap();
        assert_eq!(
            ContourSystem::new(vec![a.clone(), touching]),
            Err(Error::Overlap(0, 1))
        );
        assert_eq!(
            ContourSystem::new(vec![a, crossing]),
            Err(Error::Overlap(0, 1))
        );
    }

    #[test]
    fn invalid_circles() {
        assert!(Circle::new(c(0.0, 0.0), 0.0, Orientation::Clockwise, 8).is_err());
        assert!(Circle::new(c(0.0, 0.0), 1.0, Orientation::Clockwise, 7).is_err());
        assert!(Circle::new(c(0.0, 0.0), 1.0, Orientation::Clockwise, 2).is_err());
    }

    #[test]
    fn invert_circle_matches_three_point_fit() {
        let circle = Circle::new(c(3.0, 0.0), 0.5, Orientation::Clockwise, 16).unwrap();
        let image = invert_circle(&circle).unwrap();
        // images of 2.5, 3.5 and 3 + 0.5i determine the image circle
        let p = [c(2.5, 0.0), c(3.5, 0.0), c(3.0, 0.5)].map(invert_point);
        let center = {
            // circumcenter of three points
            let (a, b, cc) = (p[0], p[1], p[2]);
            let d = 2.0 * (a.re * (b.im - cc.im) + b.re * (cc.im - a.im) + cc.re * (a.im - b.im));
            let ux = (a.norm_sqr() * (b.im - cc.im)
                + b.norm_sqr() * (cc.im - a.im)
                + cc.norm_sqr() * (a.im - b.im))
                / d;
            let uy = (a.norm_sqr() * (cc.re - b.re)
                + b.norm_sqr() * (a.re - cc.re)
                + cc.norm_sqr() * (b.re - a.re))
                / d;
            c(ux, uy)
        };
        let radius = (p[0] - center).norm();
        assert!((image.center - center).norm() < 1e-13);
        assert!((image.radius - radius).abs() < 1e-13);
        assert!((image.center.re - 3.0 / 8.75).abs() < 1e-14);
        assert!((image.radius - 0.5 / 8.75).abs() < 1e-14);
        assert_eq!(image.orientation, Orientation::Counterclockwise);
    }

    #[test]
    fn unit_circle_is_fixed_by_inversion() {
        let u = Circle::unit(Orientation::Clockwise, 32).unwrap();
        assert_eq!(invert_circle(&u).unwrap(), u);
    }

    #[test]
    fn circle_through_origin_cannot_be_inverted() {
        let c0 = Circle::new(c(1.0, 0.0), 1.0, Orientation::Clockwise, 8).unwrap();
        assert_eq!(invert_circle(&c0), Err(Error::SingularInversion));
    }

    #[test]
    fn enclosing_circles_keep_traversal_under_inversion() {
        let big = Circle::new(c(0.0, 0.0), 4.0, Orientation::Counterclockwise, 8).unwrap();
        let small = invert_circle(&big).unwrap();
        assert_eq!(small.orientation, Orientation::Counterclockwise);
        assert!((small.radius - 0.25).abs() < 1e-15);
    }

    #[test]
    fn four_node_weights() {
        let cs = ContourSystem::new(vec![Circle::unit(Orientation::Counterclockwise, 4).unwrap()])
            .unwrap();
        let nodes = cs.nodes();
        let expected = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (n, z) in nodes.iter().zip(expected) {
            assert!((n.point - z).norm() < 1e-15);
            let w = C64::new(0.0, PI / 2.0) * z;
            assert!((n.weight - w).norm() < 1e-15);
        }
    }

    #[test]
    fn residue_of_simple_pole() {
        let circle = Circle::new(c(0.3, -0.2), 1.3, Orientation::Counterclockwise, 64).unwrap();
        let pole = c(0.5, 0.1);
        let sum: C64 = (0..64)
            .map(|k| circle.weight(k) / (circle.node(k) - pole))
            .sum();
        assert!((sum - C64::new(0.0, 2.0 * PI)).norm() < 1e-12);
        let total: C64 = (0..64).map(|k| circle.weight(k)).sum();
        assert!(total.norm() < 1e-13);
    }

    #[test]
    fn locate_round_trips() {
        let a = Circle::unit(Orientation::Clockwise, 8).unwrap();
        let b = Circle::new(c(3.0, 0.0), 0.5, Orientation::Clockwise, 6).unwrap();
        let cs = ContourSystem::new(vec![a, b]).unwrap();
        assert_eq!(cs.locate(0), (0, 0));
        assert_eq!(cs.locate(7), (0, 7));
        assert_eq!(cs.locate(8), (1, 0));
        assert_eq!(cs.locate(13), (1, 5));
    }

    #[test]
    fn inversion_invariance_detection() {
        let pole = Circle::new(c(2.0, 0.0), 0.5, Orientation::Clockwise, 16).unwrap();
        let image = invert_circle(&pole).unwrap();
        let unit = Circle::unit(Orientation::Clockwise, 16).unwrap();
        let cs = ContourSystem::new(vec![unit.clone(), pole.clone(), image]).unwrap();
        assert_eq!(cs.check_inversion_invariant().unwrap(), 0);
        assert_eq!(cs.inversion_partner(1), Some(2));
        let partial = ContourSystem::new(vec![unit, pole]).unwrap();
        assert!(partial.check_inversion_invariant().is_err());
    }
}
