//! Finite atomic `L^p` lattices, spaces related to them through a linear map,
//! and vector-valued functions living in such spaces.

use std::borrow::Cow;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// An integrability exponent `p` in `(0, inf]`.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);

    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && !p.is_nan() {
            Ok(Exponent(p))
        } else {
            Err(Error::InvalidExponent(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn reciprocal(self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }

    /// Builds the exponent with the given reciprocal; `0` maps to infinity.
    pub fn from_reciprocal(inv: f64) -> Result<Self> {
        if inv == 0.0 {
            Ok(Exponent::INFINITY)
        } else if inv > 0.0 && inv.is_finite() {
            Ok(Exponent(1.0 / inv))
        } else {
            Err(Error::InvalidExponent(1.0 / inv))
        }
    }

    /// Hölder conjugate `p'`. Only defined for `p >= 1`.
    pub fn conjugate(self) -> Option<Exponent> {
        if self.0 < 1.0 {
            None
        } else if self.0 == 1.0 {
            Some(Exponent::INFINITY)
        } else if self.is_infinite() {
            Some(Exponent::ONE)
        } else {
            Some(Exponent(self.0 / (self.0 - 1.0)))
        }
    }

    /// The quasi-triangle constant `max(1, 2^{1/p - 1})` of `L^p`.
    pub fn quasi_triangle_constant(self) -> f64 {
        if self.0 >= 1.0 {
            1.0
        } else {
            2f64.powf(1.0 / self.0 - 1.0)
        }
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

// JSON has no infinity, so `inf` travels as a string.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Number(f64),
    Text(String),
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let p = match ExponentRepr::deserialize(deserializer)? {
            ExponentRepr::Number(p) => p,
            ExponentRepr::Text(s) => match s.as_str() {
                "inf" | "infinity" | "Infinity" => f64::INFINITY,
                other => return Err(D::Error::custom(format!("unknown exponent `{other}`"))),
            },
        };
        Exponent::new(p).map_err(D::Error::custom)
    }
}

/// Finite measure space: `S >= 1` atoms with strictly positive finite weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteMeasureSpace {
    weights: Vec<f64>,
}

impl DiscreteMeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidMeasure(format!("atom weight {w} is not positive and finite")));
        }
        Ok(Self { weights })
    }

    /// `count` atoms of weight one.
    pub fn counting(count: usize) -> Result<Self> {
        Self::new(vec![1.0; count])
    }

    pub fn uniform(count: usize, weight: f64) -> Result<Self> {
        Self::new(vec![weight; count])
    }

    pub fn atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for DiscreteMeasureSpace {
    type Error = Error;
    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<DiscreteMeasureSpace> for Vec<f64> {
    fn from(space: DiscreteMeasureSpace) -> Self {
        space.weights
    }
}

/// `(sum_s w_s |v_s|^p)^{1/p}`, or `max_s |v_s|` for `p = inf`.
///
/// Values are rescaled by their maximum before exponentiation so the result
/// neither overflows nor loses homogeneity for extreme magnitudes.
pub fn lattice_norm(p: Exponent, weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), values.len());
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || peak == 0.0 || !peak.is_finite() {
        return peak;
    }
    let p = p.value();
    if p == 1.0 {
        return weights.iter().zip(values).map(|(w, v)| w * v.abs()).sum();
    }
    if p == 2.0 {
        let sum: f64 = weights.iter().zip(values).map(|(w, v)| w * (v / peak).powi(2)).sum();
        return peak * sum.sqrt();
    }
    let sum: f64 = weights
        .iter()
        .zip(values)
        .filter(|(_, v)| **v != 0.0)
        .map(|(w, v)| w * (v.abs() / peak).powf(p))
        .sum();
    peak * sum.powf(1.0 / p)
}

/// An `L^p` lattice over a [`DiscreteMeasureSpace`], optionally precomposed
/// with a linear map `J` so that `||f|| = ||J f||_{L^p}`.
///
/// Without `J` the abstract dimension equals the atom count; with `J` it is
/// the column count of `J` (whose rows are indexed by atoms).
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceDescriptor {
    exponent: Exponent,
    base: DiscreteMeasureSpace,
    related_map: Option<DMatrix<f64>>,
}

impl SpaceDescriptor {
    pub fn lattice(exponent: Exponent, base: DiscreteMeasureSpace) -> Self {
        Self {
            exponent,
            base,
            related_map: None,
        }
    }

    pub fn related(exponent: Exponent, base: DiscreteMeasureSpace, map: DMatrix<f64>) -> Result<Self> {
        if map.nrows() != base.atoms() {
            return Err(Error::DimensionMismatch {
                expected: base.atoms(),
                actual: map.nrows(),
            });
        }
        if map.ncols() == 0 {
            return Err(Error::InvalidInput("related map has no columns".into()));
        }
        if map.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("related map has non-finite entries".into()));
        }
        Ok(Self {
            exponent,
            base,
            related_map: Some(map),
        })
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    pub fn base(&self) -> &DiscreteMeasureSpace {
        &self.base
    }

    pub fn related_map(&self) -> Option<&DMatrix<f64>> {
        self.related_map.as_ref()
    }

    /// Length of the coordinate vectors of elements of this space.
    pub fn dim(&self) -> usize {
        self.related_map.as_ref().map_or(self.base.atoms(), |j| j.ncols())
    }

    pub fn atoms(&self) -> usize {
        self.base.atoms()
    }

    pub fn weights(&self) -> &[f64] {
        self.base.weights()
    }

    pub fn quasi_triangle_constant(&self) -> f64 {
        self.exponent.quasi_triangle_constant()
    }

    /// Image of `f` in the underlying lattice.
    pub fn to_lattice<'a>(&self, f: &'a [f64]) -> Result<Cow<'a, [f64]>> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: f.len(),
            });
        }
        Ok(match &self.related_map {
            None => Cow::Borrowed(f),
            Some(j) => Cow::Owned((j * DVector::from_column_slice(f)).as_slice().to_vec()),
        })
    }

    pub fn norm(&self, f: &[f64]) -> Result<f64> {
        let image = self.to_lattice(f)?;
        Ok(lattice_norm(self.exponent, self.base.weights(), &image))
    }

    /// Norm of a function already given by its lattice values.
    pub fn lattice_norm(&self, values: &[f64]) -> f64 {
        lattice_norm(self.exponent, self.base.weights(), values)
    }

    /// Same space with a different exponent.
    pub fn with_exponent(&self, exponent: Exponent) -> Self {
        Self { exponent, ..self.clone() }
    }
}

/// Quasi-norm of `f` in `space`, applying the related map first when present.
pub fn quasi_norm(space: &SpaceDescriptor, f: &[f64]) -> Result<f64> {
    space.norm(f)
}

/// `max(1, 2^{1/p - 1})`.
pub fn quasi_triangle_constant(space: &SpaceDescriptor) -> f64 {
    space.quasi_triangle_constant()
}

/// An element `x = (x_1, ..., x_n)` of `X ⊗ R^n`, stored as an `n x dim`
/// matrix whose row `i` holds the coordinates of `x_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorFunctionDoc", into = "VectorFunctionDoc")]
pub struct VectorFunction {
    space: SpaceDescriptor,
    components: DMatrix<f64>,
}

impl VectorFunction {
    pub fn new(space: SpaceDescriptor, components: DMatrix<f64>) -> Result<Self> {
        if components.nrows() == 0 {
            return Err(Error::InvalidInput("a vector function needs at least one component".into()));
        }
        if components.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                actual: components.ncols(),
            });
        }
        if components.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite component value".into()));
        }
        Ok(Self { space, components })
    }

    /// Builds from a list of component rows.
    pub fn from_rows(space: SpaceDescriptor, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let dim = space.dim();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        let components = DMatrix::from_fn(n, dim, |i, s| rows[i][s]);
        Self::new(space, components)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// Vector dimension `n`.
    pub fn len(&self) -> usize {
        self.components.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.components.nrows() == 0
    }

    /// Components mapped into the underlying lattice (`n x atoms`).
    pub fn lattice_components(&self) -> Cow<'_, DMatrix<f64>> {
        match self.space.related_map() {
            None => Cow::Borrowed(&self.components),
            Some(j) => Cow::Owned(&self.components * j.transpose()),
        }
    }

    /// The pairing `x . e = sum_i e_i x_i`, as coordinates in the abstract space.
    pub fn dot(&self, e: &[f64]) -> Result<DVector<f64>> {
        if e.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: e.len(),
            });
        }
        Ok(self.components.tr_mul(&DVector::from_column_slice(e)))
    }

    /// `||x . e||_X`, the semi-quasi-norm on `R^n` induced by `x`.
    pub fn directional_norm(&self, e: &[f64]) -> Result<f64> {
        let v = self.dot(e)?;
        self.space.norm(v.as_slice())
    }

    /// `x` with components replaced by `M x`, i.e. `(M x)_i = sum_j M_ij x_j`.
    pub fn transform(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: m.ncols(),
            });
        }
        Self::new(self.space.clone(), m * &self.components)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            space: self.space.clone(),
            components: &self.components * factor,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// On-disk form of a [`VectorFunction`]:
/// `{"exponent": p, "weights": [...], "related_map": [[...]]?, "components": [[...]]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorFunctionDoc {
    exponent: Exponent,
    weights: DiscreteMeasureSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    related_map: Option<Vec<Vec<f64>>>,
    components: Vec<Vec<f64>>,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            expected: ncols,
            actual: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TryFrom<VectorFunctionDoc> for VectorFunction {
    type Error = Error;
    fn try_from(doc: VectorFunctionDoc) -> Result<Self> {
        let space = match doc.related_map {
            None => SpaceDescriptor::lattice(doc.exponent, doc.weights),
            Some(rows) => SpaceDescriptor::related(doc.exponent, doc.weights, matrix_from_rows(&rows)?)?,
        };
        VectorFunction::from_rows(space, &doc.components)
    }
}

impl From<VectorFunction> for VectorFunctionDoc {
    fn from(f: VectorFunction) -> Self {
        VectorFunctionDoc {
            exponent: f.space.exponent,
            related_map: f.space.related_map.as_ref().map(matrix_to_rows),
            weights: f.space.base,
            components: matrix_to_rows(&f.components),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(p: f64, weights: Vec<f64>) -> SpaceDescriptor {
        SpaceDescriptor::lattice(Exponent::new(p).unwrap(), DiscreteMeasureSpace::new(weights).unwrap())
    }

    #[test]
    fn constant_function_in_l2() {
        let space = lp(2.0, vec![1.0; 4]);
        assert_eq!(quasi_norm(&space, &[1.0; 4]).unwrap(), 2.0);
    }

    #[test]
    fn sup_norm_is_max_abs() {
        let space = lp(f64::INFINITY, vec![0.3, 2.0, 5.0]);
        assert_eq!(quasi_norm(&space, &[1.0, -7.0, 2.0]).unwrap(), 7.0);
    }

    #[test]
    fn half_norm_of_ones() {
        let space = lp(0.5, vec![1.0, 1.0]);
        assert!((quasi_norm(&space, &[1.0, 1.0]).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn zero_values_contribute_nothing() {
        let space = lp(0.25, vec![1.0, 1.0, 1.0]);
        assert_eq!(quasi_norm(&space, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((quasi_norm(&space, &[0.0, 1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let space = lp(2.0, vec![1.0; 3]);
        assert!(matches!(quasi_norm(&space, &[1.0; 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_bad_weights_and_exponents() {
        assert!(DiscreteMeasureSpace::new(vec![]).is_err());
        assert!(DiscreteMeasureSpace::new(vec![1.0, 0.0]).is_err());
        assert!(DiscreteMeasureSpace::new(vec![1.0, f64::NAN]).is_err());
        assert!(Exponent::new(0.0).is_err());
        assert!(Exponent::new(-1.0).is_err());
        assert!(Exponent::new(f64::INFINITY).is_ok());
    }

    #[test]
    fn triangle_constants() {
        assert_eq!(Exponent::TWO.quasi_triangle_constant(), 1.0);
        assert_eq!(Exponent::INFINITY.quasi_triangle_constant(), 1.0);
        assert_eq!(Exponent::new(0.5).unwrap().quasi_triangle_constant(), 2.0);
    }

    /// Brute-force search for `sup ||f+g|| / (||f|| + ||g||)` on two atoms.
    #[test]
    fn quasi_triangle_constant_is_attained_numerically() {
        let space = lp(0.5, vec![1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut best: f64 = 0.0;
        // log-uniform magnitudes so nearly disjoint supports get sampled
        let mut draw = || 10f64.powf(-rng.random_range(0.0..6.0));
        for _ in 0..20_000 {
            let f = [draw(), draw()];
            let g = [draw(), draw()];
            let sum = [f[0] + g[0], f[1] + g[1]];
            let ratio = space.norm(&sum).unwrap() / (space.norm(&f).unwrap() + space.norm(&g).unwrap());
            best = best.max(ratio);
        }
        // disjointly supported equal bumps attain 2^{1/p - 1} = 2
        assert!(best <= 2.0 + 1e-12);
        assert!(best > 1.95, "best ratio {best}");
    }

    #[test]
    fn related_space_applies_map() {
        let base = DiscreteMeasureSpace::counting(2).unwrap();
        let j = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let space = SpaceDescriptor::related(Exponent::ONE, base, j).unwrap();
        assert_eq!(space.dim(), 3);
        // J (1, -1, 2) = (0, 1)
        assert_eq!(space.norm(&[1.0, -1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn directional_norm_basics() {
        let space = lp(3.0, vec![0.5, 1.5, 1.0]);
        let f = [1.0, -2.0, 0.5];
        let x = VectorFunction::from_rows(space.clone(), &[f.to_vec()]).unwrap();
        let lam: f64 = -2.5;
        let expect = lam.abs() * space.norm(&f).unwrap();
        assert!((x.directional_norm(&[lam]).unwrap() - expect).abs() < 1e-13);

        let twin = VectorFunction::from_rows(space, &[f.to_vec(), f.to_vec()]).unwrap();
        assert_eq!(twin.directional_norm(&[1.0, -1.0]).unwrap(), 0.0);
        assert!(twin.directional_norm(&[1.0]).is_err());
    }

    #[test]
    fn indicator_basis_has_unit_directional_norms() {
        let n = 4;
        let space = lp(2.0, vec![1.0; n]);
        let x = VectorFunction::new(space, DMatrix::identity(n, n)).unwrap();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            assert_eq!(x.directional_norm(&e).unwrap(), 1.0);
        }
    }

    #[test]
    fn json_document_shape() {
        let x = VectorFunction::from_rows(lp(f64::INFINITY, vec![1.0, 2.0]), &[vec![1.0, 2.0]]).unwrap();
        let text = x.to_json().unwrap();
        assert_eq!(text, r#"{"exponent":"inf","weights":[1.0,2.0],"components":[[1.0,2.0]]}"#);
        assert_eq!(VectorFunction::from_json(&text).unwrap(), x);
        assert!(VectorFunction::from_json(r#"{"exponent":2,"weights":[1.0,-1.0],"components":[[1,2]]}"#).is_err());
        assert!(VectorFunction::from_json(r#"{"exponent":2,"weights":[1.0],"components":[[1,2]]}"#).is_err());
    }

    fn exponent_strategy() -> impl Strategy<Value = Exponent> {
        prop_oneof![
            Just(Exponent::new(1.0 / 3.0).unwrap()),
            Just(Exponent::new(0.5).unwrap()),
            Just(Exponent::ONE),
            Just(Exponent::TWO),
            Just(Exponent::INFINITY),
            (0.2f64..6.0).prop_map(|p| Exponent::new(p).unwrap()),
        ]
    }

    fn space_and_values(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(0.01f64..10.0, len),
            prop::collection::vec(-100.0f64..100.0, len),
            prop::collection::vec(-100.0f64..100.0, len),
        )
    }

    proptest! {
        #[test]
        fn homogeneity(p in exponent_strategy(), (w, f, _) in space_and_values(7), lam in -1e3f64..1e3) {
            let space = SpaceDescriptor::lattice(p, DiscreteMeasureSpace::new(w).unwrap());
            let scaled: Vec<f64> = f.iter().map(|v| lam * v).collect();
            let lhs = space.norm(&scaled).unwrap();
            let rhs = lam.abs() * space.norm(&f).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn lattice_monotone(p in exponent_strategy(), (w, f, t) in space_and_values(6)) {
            let space = SpaceDescriptor::lattice(p, DiscreteMeasureSpace::new(w).unwrap());
            // |h| <= |f| pointwise
            let h: Vec<f64> = f.iter().zip(&t).map(|(v, s)| v * (s / 100.0)).collect();
            prop_assert!(space.norm(&h).unwrap() <= space.norm(&f).unwrap());
        }

        #[test]
        fn quasi_triangle(p in exponent_strategy(), (w, f, g) in space_and_values(5)) {
            let space = SpaceDescriptor::lattice(p, DiscreteMeasureSpace::new(w).unwrap());
            let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
            let k = space.quasi_triangle_constant();
            let bound = k * (space.norm(&f).unwrap() + space.norm(&g).unwrap());
            prop_assert!(space.norm(&sum).unwrap() <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn holder(pinv in 0.0f64..3.0, qinv in 0.0f64..3.0, (w, f, g) in space_and_values(6)) {
            prop_assume!(pinv + qinv > 0.0);
            let base = DiscreteMeasureSpace::new(w).unwrap();
            let p = Exponent::from_reciprocal(pinv).unwrap();
            let q = Exponent::from_reciprocal(qinv).unwrap();
            let r = Exponent::from_reciprocal(pinv + qinv).unwrap();
            let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a * b).collect();
            let lhs = lattice_norm(r, base.weights(), &fg);
            let rhs = lattice_norm(p, base.weights(), &f) * lattice_norm(q, base.weights(), &g);
            prop_assert!(lhs <= rhs * (1.0 + 1e-10));
        }

        #[test]
        fn json_round_trip_is_exact(p in exponent_strategy(), (w, f, g) in space_and_values(4)) {
            let space = SpaceDescriptor::lattice(p, DiscreteMeasureSpace::new(w).unwrap());
            let x = VectorFunction::from_rows(space, &[f, g]).unwrap();
            let text = x.to_json().unwrap();
            let back = VectorFunction::from_json(&text).unwrap();
            prop_assert_eq!(&back, &x);
            prop_assert_eq!(back.to_json().unwrap(), text);
        }
    }
}
