//! Curvature profiles expressed as linear combinations of basis functions.
//!
//! A [`BasisSpec`] pairs a scalar function family `h_j(s)` with a set of
//! active strain axes. Coefficients are laid out function-major: index
//! `j * axes + a` multiplies `h_j(s)` on the `a`-th active axis.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::StrainTwist;

/// Length of the BR² arm used throughout the experiments, in millimeters.
pub const BR2_LENGTH_MM: f64 = 287.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrainAxis {
    TwistX,
    BendY,
    BendZ,
}

impl StrainAxis {
    pub const ALL: [StrainAxis; 3] = [StrainAxis::TwistX, StrainAxis::BendY, StrainAxis::BendZ];

    pub fn index(self) -> usize {
        match self {
            StrainAxis::TwistX => 0,
            StrainAxis::BendY => 1,
            StrainAxis::BendZ => 2,
        }
    }
}

/// Subset of the three curvature components, always iterated in x, y, z order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxisSet([bool; 3]);

impl AxisSet {
    pub fn new(axes: &[StrainAxis]) -> Self {
        let mut set = [false; 3];
        for a in axes {
            set[a.index()] = true;
        }
        AxisSet(set)
    }

    pub fn all() -> Self {
        AxisSet([true; 3])
    }

    /// Twist and one bending direction, the strain set of the BR² arm.
    pub fn br2() -> Self {
        AxisSet::new(&[StrainAxis::TwistX, StrainAxis::BendY])
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, axis: StrainAxis) -> bool {
        self.0[axis.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = StrainAxis> + '_ {
        StrainAxis::ALL.into_iter().filter(|a| self.contains(*a))
    }
}

impl Serialize for AxisSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for AxisSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let axes = Vec::<StrainAxis>::deserialize(d)?;
        Ok(AxisSet::new(&axes))
    }
}

/// Scalar functions tabulated on a grid and linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledBasis {
    pub grid: Vec<f64>,
    pub functions: Vec<Vec<f64>>,
}

impl SampledBasis {
    fn validate(&self, length: f64) -> Result<()> {
        if self.grid.len() < 2 {
            return Err(Error::InvalidBasis(
                "sampled grid needs at least two nodes".into(),
            ));
        }
        if !self.grid.windows(2).all(|w| w[0] < w[1]) || !self.grid.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidBasis(
                "sampled grid must be strictly increasing".into(),
            ));
        }
        if self.grid[0] > 0.0 || *self.grid.last().unwrap() < length {
            return Err(Error::InvalidBasis(format!(
                "sampled grid must cover [0, {length}]"
            )));
        }
        if self.functions.is_empty() {
            return Err(Error::InvalidBasis("sampled basis has no functions".into()));
        }
        for f in &self.functions {
            if f.len() != self.grid.len() || !f.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidBasis(
                    "sampled function length differs from grid or is non-finite".into(),
                ));
            }
        }
        Ok(())
    }

    fn eval(&self, s: f64, out: &mut Vec<f64>) {
        let i = match self.grid.partition_point(|&g| g <= s) {
            0 => 0,
            n if n >= self.grid.len() => self.grid.len() - 2,
            n => n - 1,
        };
        let t = (s - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        out.extend(self.functions.iter().map(|f| f[i] + t * (f[i + 1] - f[i])));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisFamily {
    Constant,
    /// Indicator functions of `segments` equal-length half-open intervals.
    PiecewiseConstant {
        segments: usize,
    },
    /// Monomials `(s / L)^k` for `k = 0..=order`.
    Polynomial {
        order: usize,
    },
    Sampled(SampledBasis),
}

impl BasisFamily {
    /// Number of scalar functions `h_j`.
    pub fn dimension(&self) -> usize {
        match self {
            BasisFamily::Constant => 1,
            BasisFamily::PiecewiseConstant { segments } => *segments,
            BasisFamily::Polynomial { order } => order + 1,
            BasisFamily::Sampled(b) => b.functions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub axes: AxisSet,
    /// Arm length in millimeters.
    pub length: f64,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, axes: AxisSet, length: f64) -> Result<Self> {
        let spec = BasisSpec {
            family,
            axes,
            length,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// BR² strain set: twist about the tangent and bending about body y; the
    /// third curvature component is identically zero.
    pub fn br2(family: BasisFamily, length: f64) -> Result<Self> {
        BasisSpec::new(family, AxisSet::br2(), length)
    }

    /// The five bases compared in the basis study, in table order.
    pub fn table_rows(length: f64) -> Vec<BasisSpec> {
        [
            BasisFamily::Constant,
            BasisFamily::PiecewiseConstant { segments: 2 },
            BasisFamily::Polynomial { order: 1 },
            BasisFamily::Polynomial { order: 2 },
            BasisFamily::Polynomial { order: 3 },
        ]
        .into_iter()
        .map(|f| BasisSpec {
            family: f,
            axes: AxisSet::br2(),
            length,
        })
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidBasis(format!(
                "arm length {} must be positive",
                self.length
            )));
        }
        if self.axes.is_empty() {
            return Err(Error::InvalidBasis("no active strain axes".into()));
        }
        match &self.family {
            BasisFamily::PiecewiseConstant { segments } if *segments == 0 => Err(
                Error::InvalidBasis("piecewise basis needs at least one segment".into()),
            ),
            BasisFamily::PiecewiseConstant { segments } if *segments > 10_000 => {
                Err(Error::InvalidBasis("too many segments".into()))
            }
            BasisFamily::Polynomial { order } if *order > 32 => {
                Err(Error::InvalidBasis("polynomial order above 32".into()))
            }
            BasisFamily::Sampled(b) => b.validate(self.length),
            _ => Ok(()),
        }
    }

    pub fn param_count(&self) -> usize {
        self.axes.len() * self.family.dimension()
    }

    /// Interior segment boundaries `s_2 .. s_N` of a piecewise basis.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.family {
            BasisFamily::PiecewiseConstant { segments } => (1..segments)
                .map(|j| self.length * j as f64 / segments as f64)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Polynomial order and segment count as listed in the comparison table.
    pub fn order_and_segments(&self) -> (usize, usize) {
        match &self.family {
            BasisFamily::Constant => (0, 1),
            BasisFamily::PiecewiseConstant { segments } => (0, *segments),
            BasisFamily::Polynomial { order } => (*order, 1),
            BasisFamily::Sampled(_) => (0, 1),
        }
    }

    pub fn check_arclength(&self, s: f64) -> Result<()> {
        if !(0.0..=self.length).contains(&s) {
            return Err(Error::ArclengthOutOfRange {
                s,
                length: self.length,
            });
        }
        Ok(())
    }

    /// Values of the scalar functions `h_j(s)`; `s` must already be in range.
    pub(crate) fn scalar_values_into(&self, s: f64, out: &mut Vec<f64>) {
        out.clear();
        match &self.family {
            BasisFamily::Constant => out.push(1.0),
            BasisFamily::PiecewiseConstant { segments } => {
                let idx = self.breakpoints().iter().filter(|&&b| s >= b).count();
                out.extend((0..*segments).map(|j| if j == idx { 1.0 } else { 0.0 }));
            }
            BasisFamily::Polynomial { order } => {
                let x = s / self.length;
                let mut v = 1.0;
                for _ in 0..=*order {
                    out.push(v);
                    v *= x;
                }
            }
            BasisFamily::Sampled(b) => b.eval(s, out),
        }
    }

    pub fn scalar_values(&self, s: f64) -> Result<Vec<f64>> {
        self.check_arclength(s)?;
        let mut out = Vec::with_capacity(self.family.dimension());
        self.scalar_values_into(s, &mut out);
        Ok(out)
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            BasisFamily::Constant => write!(f, "constant"),
            BasisFamily::PiecewiseConstant { segments } => write!(f, "piecewise-{segments}"),
            BasisFamily::Polynomial { order } => write!(f, "poly-{order}"),
            BasisFamily::Sampled(b) => write!(f, "sampled-{}", b.functions.len()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FamilyTag {
    Constant,
    Piecewise,
    Poly,
    Sampled,
}

#[derive(Serialize, Deserialize)]
struct BasisSpecRepr {
    family: FamilyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sampled: Option<SampledBasis>,
    #[serde(default = "AxisSet::br2")]
    axes: AxisSet,
    length_mm: f64,
}

impl Serialize for BasisSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (family, segments, order, sampled) = match &self.family {
            BasisFamily::Constant => (FamilyTag::Constant, None, None, None),
            BasisFamily::PiecewiseConstant { segments } => {
                (FamilyTag::Piecewise, Some(*segments), None, None)
            }
            BasisFamily::Polynomial { order } => (FamilyTag::Poly, None, Some(*order), None),
            BasisFamily::Sampled(b) => (FamilyTag::Sampled, None, None, Some(b.clone())),
        };
        BasisSpecRepr {
            family,
            segments,
            order,
            sampled,
            axes: self.axes,
            length_mm: self.length,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasisSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = BasisSpecRepr::deserialize(d)?;
        let family = match r.family {
            FamilyTag::Constant => BasisFamily::Constant,
            FamilyTag::Piecewise => BasisFamily::PiecewiseConstant {
                segments: r
                    .segments
                    .ok_or_else(|| D::Error::missing_field("segments"))?,
            },
            FamilyTag::Poly => BasisFamily::Polynomial {
                order: r.order.ok_or_else(|| D::Error::missing_field("order"))?,
            },
            FamilyTag::Sampled => BasisFamily::Sampled(
                r.sampled
                    .ok_or_else(|| D::Error::missing_field("sampled"))?,
            ),
        };
        BasisSpec::new(family, r.axes, r.length_mm).map_err(D::Error::custom)
    }
}

/// Basis coefficients. Units follow the basis: rad/mm for constant and
/// piecewise families; rad/mm per unit of `(s / L)^k` for polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector(pub Vec<f64>);

impl CoefficientVector {
    pub fn zeros(n: usize) -> Self {
        CoefficientVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for CoefficientVector {
    fn from(v: Vec<f64>) -> Self {
        CoefficientVector(v)
    }
}

/// Body strain field `Omega(s)` generated by a basis and its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    basis: BasisSpec,
    coeffs: CoefficientVector,
    q: Vector3<f64>,
}

impl StrainField {
    pub fn new(basis: BasisSpec, coeffs: CoefficientVector) -> Result<Self> {
        let expected = basis.param_count();
        if coeffs.len() != expected {
            return Err(Error::CoefficientLength {
                expected,
                got: coeffs.len(),
            });
        }
        if !coeffs.0.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidBasis("non-finite coefficient".into()));
        }
        Ok(StrainField {
            basis,
            coeffs,
            q: Vector3::x(),
        })
    }

    pub fn zero(basis: BasisSpec) -> Self {
        let n = basis.param_count();
        StrainField {
            basis,
            coeffs: CoefficientVector::zeros(n),
            q: Vector3::x(),
        }
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn coeffs(&self) -> &CoefficientVector {
        &self.coeffs
    }

    pub fn length(&self) -> f64 {
        self.basis.length
    }

    pub fn eval_kappa(&self, s: f64) -> Result<Vector3<f64>> {
        self.basis.check_arclength(s)?;
        let mut scratch = Vec::new();
        Ok(self.kappa_in_range(s, &mut scratch))
    }

    pub(crate) fn kappa_in_range(&self, s: f64, scratch: &mut Vec<f64>) -> Vector3<f64> {
        self.basis.scalar_values_into(s, scratch);
        let n_axes = self.basis.axes.len();
        let mut kappa = Vector3::zeros();
        for (j, h) in scratch.iter().enumerate() {
            for (a, axis) in self.basis.axes.iter().enumerate() {
                kappa[axis.index()] += self.coeffs.0[j * n_axes + a] * h;
            }
        }
        kappa
    }

    pub fn eval_omega(&self, s: f64) -> Result<StrainTwist> {
        Ok(StrainTwist::new(self.eval_kappa(s)?, self.q))
    }

    /// Polynomial coefficients rescaled to raw arclength units
    /// (rad/mm^(k+1)); other families are returned unchanged.
    pub fn raw_unit_coeffs(&self) -> Vec<f64> {
        match self.basis.family {
            BasisFamily::Polynomial { .. } => {
                let n_axes = self.basis.axes.len();
                self.coeffs
                    .0
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a / self.basis.length.powi((i / n_axes) as i32))
                    .collect()
            }
            _ => self.coeffs.0.clone(),
        }
    }
}
