use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Componentwise bounds `lower ≤ θ ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> ParamBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::input("parameter box needs dimension >= 1"));
        }
        if lower.len() != upper.len() {
            return Err(Error::input(format!("box bounds have lengths {} and {}", lower.len(), upper.len())));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || !(l < u) {
                return Err(Error::input(format!("box coordinate {i}: need finite lower < upper, got [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn center(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.lower.iter().zip(&self.upper).map(|(l, u)| half * (*l + *u)).collect()
    }

    pub fn width(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> T {
        (0..self.dim()).fold(T::one(), |acc, i| acc * self.width(i))
    }

    pub fn clamp(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(self.lower.iter().zip(&self.upper)).map(|(v, (l, u))| v.max(*l).min(*u)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaKind {
    /// `[0, ∞)^dim`
    NonnegOrthant,
    /// A finite box.
    Box,
    /// `{0 ≤ λ₁ ≤ λ₂}` in two dimensions.
    OrderedCone,
    /// All of `ℝ^dim`.
    Unconstrained,
}

impl LambdaKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nonneg-orthant" => Ok(Self::NonnegOrthant),
            "box" => Ok(Self::Box),
            "ordered-cone" => Ok(Self::OrderedCone),
            "unconstrained" => Ok(Self::Unconstrained),
            other => Err(Error::input(format!("unknown lambda region kind '{other}'"))),
        }
    }
}

/// The closed constraint set Λ for the nuisance parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRegion<T> {
    kind: LambdaKind,
    dim: usize,
    bounds: Option<ParamBox<T>>,
}

impl<T: Scalar> LambdaRegion<T> {
    pub fn nonneg_orthant(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Self { kind: LambdaKind::NonnegOrthant, dim, bounds: None })
    }

    pub fn boxed(bounds: ParamBox<T>) -> Self {
        Self { kind: LambdaKind::Box, dim: bounds.dim(), bounds: Some(bounds) }
    }

    pub fn ordered_cone() -> Self {
        Self { kind: LambdaKind::OrderedCone, dim: 2, bounds: None }
    }

    pub fn unconstrained(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Self { kind: LambdaKind::Unconstrained, dim, bounds: None })
    }

    fn check_dim(dim: usize) -> Result<()> {
        if dim == 0 {
            Err(Error::input("lambda region dimension must be positive"))
        } else {
            Ok(())
        }
    }

    pub fn kind(&self) -> LambdaKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> Option<&ParamBox<T>> {
        self.bounds.as_ref()
    }

    /// Closed-set membership; total on vectors of the right length.
    pub fn contains(&self, lambda: &[T]) -> bool {
        if lambda.len() != self.dim || lambda.iter().any(|v| v.is_nan()) {
            return false;
        }
        match self.kind {
            LambdaKind::NonnegOrthant => lambda.iter().all(|v| *v >= T::zero()),
            LambdaKind::Box => self.bounds.as_ref().is_some_and(|b| b.contains(lambda)),
            LambdaKind::OrderedCone => lambda[0] >= T::zero() && lambda[0] <= lambda[1],
            LambdaKind::Unconstrained => true,
        }
    }

    /// Euclidean projection onto Λ.
    pub fn project(&self, lambda: &[T]) -> Vec<T> {
        match self.kind {
            LambdaKind::NonnegOrthant => lambda.iter().map(|v| v.max(T::zero())).collect(),
            LambdaKind::Box => self.bounds.as_ref().expect("box bounds").clamp(lambda),
            LambdaKind::Unconstrained => lambda.to_vec(),
            LambdaKind::OrderedCone => {
                if self.contains(lambda) {
                    return lambda.to_vec();
                }
                let (x, y) = (lambda[0], lambda[1]);
                // Boundary rays of the cone: (0, s) and (s, s) for s ≥ 0.
                let a = [T::zero(), y.max(T::zero())];
                let t = (T::lit(0.5) * (x + y)).max(T::zero());
                let b = [t, t];
                let da = (x - a[0]).hypot(y - a[1]);
                let db = (x - b[0]).hypot(y - b[1]);
                if da <= db {
                    a.to_vec()
                } else {
                    b.to_vec()
                }
            }
        }
    }

    /// `d(λ, Λ)`: zero inside Λ.
    pub fn distance_to_set(&self, lambda: &[T]) -> T {
        if self.contains(lambda) {
            return T::zero();
        }
        let p = self.project(lambda);
        euclidean(lambda, &p)
    }

    /// `d(λ, Λᶜ)`: zero outside Λ, infinite when Λᶜ is empty.
    pub fn distance_to_complement(&self, lambda: &[T]) -> T {
        if !self.contains(lambda) {
            return T::zero();
        }
        match self.kind {
            LambdaKind::Unconstrained => T::infinity(),
            LambdaKind::NonnegOrthant => lambda.iter().fold(T::infinity(), |m, v| m.min(*v)),
            LambdaKind::Box => {
                let b = self.bounds.as_ref().expect("box bounds");
                lambda
                    .iter()
                    .zip(b.lower().iter().zip(b.upper()))
                    .fold(T::infinity(), |m, (v, (l, u))| m.min(*v - *l).min(*u - *v))
            }
            LambdaKind::OrderedCone => {
                let (x, y) = (lambda[0], lambda[1]);
                x.min((y - x) / T::lit(std::f64::consts::SQRT_2))
            }
        }
    }

    /// `max{d(λ, Λ), d(λ, Λᶜ)}`; `λ ∈ ∂_δΛ` iff this is at most δ.
    pub fn boundary_distance(&self, lambda: &[T]) -> T {
        self.distance_to_set(lambda).max(self.distance_to_complement(lambda))
    }

    /// Lebesgue measure of `Λ ∩ bounds`.
    pub fn volume_within(&self, bounds: &ParamBox<T>) -> T {
        let overlap = |lo: T, hi: T| (hi - lo).max(T::zero());
        match self.kind {
            LambdaKind::Unconstrained => bounds.volume(),
            LambdaKind::NonnegOrthant => (0..self.dim)
                .map(|i| overlap(bounds.lower()[i].max(T::zero()), bounds.upper()[i]))
                .fold(T::one(), |a, b| a * b),
            LambdaKind::Box => {
                let own = self.bounds.as_ref().expect("box bounds");
                (0..self.dim)
                    .map(|i| overlap(own.lower()[i].max(bounds.lower()[i]), own.upper()[i].min(bounds.upper()[i])))
                    .fold(T::one(), |a, b| a * b)
            }
            LambdaKind::OrderedCone => {
                // ∫_{x=max(a1,0)}^{b1} (b2 - max(a2, x))⁺ dx, piecewise linear in x.
                let (a1, b1) = (bounds.lower()[0].max(T::zero()), bounds.upper()[0]);
                let (a2, b2) = (bounds.lower()[1], bounds.upper()[1]);
                if !(b1 > a1) || !(b2 > a2) {
                    return T::zero();
                }
                let half = T::lit(0.5);
                // x below a2: constant height b2 - a2.
                let flat_hi = b1.min(a2);
                let flat = if flat_hi > a1 { (flat_hi - a1) * (b2 - a2) } else { T::zero() };
                // x in [max(a1, a2), min(b1, b2)]: height b2 - x.
                let lo = a1.max(a2);
                let hi = b1.min(b2);
                let slope = if hi > lo { (hi - lo) * (b2 - half * (hi + lo)) } else { T::zero() };
                flat + slope
            }
        }
    }

    /// Componentwise integration limits of `Λ ∩ rect` for nested quadrature:
    /// coordinate `k` given the already fixed coordinates `outer`.
    pub fn nested_limits(&self, rect_lo: &[T], rect_hi: &[T], k: usize, outer: &[T]) -> (T, T) {
        let (mut lo, mut hi) = (rect_lo[k], rect_hi[k]);
        match self.kind {
            LambdaKind::Unconstrained => {}
            LambdaKind::NonnegOrthant => lo = lo.max(T::zero()),
            LambdaKind::Box => {
                let b = self.bounds.as_ref().expect("box bounds");
                lo = lo.max(b.lower()[k]);
                hi = hi.min(b.upper()[k]);
            }
            LambdaKind::OrderedCone => {
                if k == 0 {
                    lo = lo.max(T::zero());
                } else {
                    lo = lo.max(outer[0]);
                }
            }
        }
        (lo, hi)
    }
}

pub(crate) fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_rejects_degenerate_bounds() {
        assert!(ParamBox::new(vec![0.0], vec![0.0]).is_err());
        assert!(ParamBox::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(ParamBox::<f64>::new(vec![], vec![]).is_err());
        assert!(ParamBox::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn ordered_cone_membership_and_boundary() {
        let cone = LambdaRegion::<f64>::ordered_cone();
        assert!(cone.contains(&[0.2, 0.5]));
        assert!(!cone.contains(&[0.5, 0.2]));
        assert!(cone.contains(&[0.0, 0.0]));
        assert!((cone.distance_to_complement(&[0.2, 0.5]) - 0.2).abs() < 1e-15);
        assert!((cone.distance_to_complement(&[0.4, 0.5]) - 0.1 / 2f64.sqrt()).abs() < 1e-15);
        // Below the diagonal: nearest cone point is on the diagonal.
        assert!((cone.distance_to_set(&[0.5, 0.2]) - 0.3 / 2f64.sqrt()).abs() < 1e-15);
        // Third quadrant: nearest point is the apex.
        assert!((cone.distance_to_set(&[-3.0, -4.0]) - 5.0).abs() < 1e-14);
        // Left of the y axis, above: nearest is (0, y).
        assert!((cone.distance_to_set(&[-0.5, 2.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orthant_is_closed() {
        let o = LambdaRegion::<f64>::nonneg_orthant(2).unwrap();
        assert!(o.contains(&[0.0, 0.0]));
        assert!(!o.contains(&[0.0, -1e-300]));
        assert_eq!(o.distance_to_complement(&[0.0, 3.0]), 0.0);
        assert!((o.distance_to_set(&[-3.0, -4.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn unconstrained_has_no_boundary() {
        let u = LambdaRegion::<f64>::unconstrained(1).unwrap();
        assert!(u.distance_to_complement(&[1e9]).is_infinite());
        assert_eq!(u.distance_to_set(&[1e9]), 0.0);
    }

    #[test]
    fn cone_volume_inside_box() {
        let cone = LambdaRegion::<f64>::ordered_cone();
        let b = ParamBox::cube(2, 0.0, 2.0).unwrap();
        assert!((cone.volume_within(&b) - 2.0).abs() < 1e-15);
        // Box straddling the apex: only the x >= 0 part of the cone counts.
        let b = ParamBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!((cone.volume_within(&b) - 0.5).abs() < 1e-15);
        // Box entirely above the diagonal.
        let b = ParamBox::new(vec![0.0, 2.0], vec![1.0, 3.0]).unwrap();
        assert!((cone.volume_within(&b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cone_volume_matches_brute_force() {
        let cone = LambdaRegion::<f64>::ordered_cone();
        let b = ParamBox::new(vec![-0.3, 0.2], vec![1.7, 1.1]).unwrap();
        let m = 2000;
        let mut hits = 0usize;
        for i in 0..m {
            for j in 0..m {
                let x = -0.3 + 2.0 * (i as f64 + 0.5) / m as f64;
                let y = 0.2 + 0.9 * (j as f64 + 0.5) / m as f64;
                if cone.contains(&[x, y]) {
                    hits += 1;
                }
            }
        }
        let brute = hits as f64 / (m * m) as f64 * b.volume();
        assert!((cone.volume_within(&b) - brute).abs() < 2e-3);
    }
}
