//! Multi-indices, rectangular boxes `{i : 1 ≺ i ≺ n}`, prefix sums and
//! maximal partial normed sums.
//!
//! Every floating-point reduction runs in row-major box order (last
//! coordinate fastest) so results are bit-for-bit reproducible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{self, HVector};

/// Largest box accepted by [`prefix_sums_bruteforce`].
pub const BRUTEFORCE_MAX_CELLS: u64 = 100_000;

/// A point of the positive integer lattice `Z^d_+`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct MultiIndex {
    coords: Vec<u64>,
}

impl MultiIndex {
    pub fn new(coords: Vec<u64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("multi-index needs at least one coordinate"));
        }
        if let Some(pos) = coords.iter().position(|&c| c == 0) {
            return Err(invalid(format!("coordinate {pos} is 0; lattice coordinates start at 1")));
        }
        coords
            .iter()
            .try_fold(1u64, |acc, &c| acc.checked_mul(c))
            .ok_or_else(|| invalid("box size overflows u64"))?;
        Ok(Self { coords })
    }

    /// The vector `1 = (1, ..., 1)`.
    pub fn unit(d: usize) -> Self {
        Self { coords: vec![1; d] }
    }

    /// `(m, m, ..., m)` in dimension `d`.
    pub fn cube(d: usize, m: u64) -> Result<Self> {
        Self::new(vec![m; d])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    /// `|n| = n_1 n_2 ... n_d`.
    pub fn size(&self) -> u64 {
        self.coords.iter().product()
    }

    /// The partial order `self ≺ other`.
    pub fn leq(&self, other: &MultiIndex) -> Result<bool> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.coords.iter().zip(&other.coords).all(|(a, b)| a <= b))
    }

    /// Componentwise maximum.
    pub fn join(&self, other: &MultiIndex) -> Result<MultiIndex> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(MultiIndex {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| *a.max(b)).collect(),
        })
    }

    /// Row-major offset of `cell` inside the box with upper corner `self`.
    pub fn offset_of(&self, cell: &MultiIndex) -> Result<usize> {
        if !cell.leq(self)? {
            return Err(invalid(format!("cell {cell} lies outside box {self}")));
        }
        Ok(self
            .coords
            .iter()
            .zip(&cell.coords)
            .fold(0u64, |acc, (n, i)| acc * n + (i - 1)) as usize)
    }

    /// Inverse of [`MultiIndex::offset_of`].
    pub fn cell_at(&self, mut offset: usize) -> MultiIndex {
        let mut coords = vec![0; self.dim()];
        for (k, n) in self.coords.iter().enumerate().rev() {
            coords[k] = (offset as u64 % n) + 1;
            offset = (offset as u64 / n) as usize;
        }
        MultiIndex { coords }
    }

    /// Size as an in-memory cell count, rejecting boxes that cannot be stored densely.
    pub fn dense_len(&self) -> Result<usize> {
        usize::try_from(self.size())
            .ok()
            .filter(|&n| n <= isize::MAX as usize / 64)
            .ok_or_else(|| invalid(format!("box {self} is too large for dense storage")))
    }
}

impl TryFrom<Vec<u64>> for MultiIndex {
    type Error = Error;

    fn try_from(coords: Vec<u64>) -> Result<Self> {
        MultiIndex::new(coords)
    }
}

impl From<MultiIndex> for Vec<u64> {
    fn from(m: MultiIndex) -> Self {
        m.coords
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.coords.iter().enumerate() {
            if k > 0 {
                f.write_str("x")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Enumerates `{i : 1 ≺ i ≺ n}` in row-major order (last coordinate fastest).
pub fn box_iter(n: &MultiIndex) -> BoxIter {
    BoxIter {
        upper: n.coords.clone(),
        next: Some(vec![1; n.dim()]),
    }
}

#[derive(Debug, Clone)]
pub struct BoxIter {
    upper: Vec<u64>,
    next: Option<Vec<u64>>,
}

impl Iterator for BoxIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut k = succ.len();
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            if succ[k] < self.upper[k] {
                succ[k] += 1;
                self.next = Some(succ);
                break;
            }
            succ[k] = 1;
        }
        Some(MultiIndex { coords: current })
    }
}

/// Offsets (inside `outer`) of the cells of the sub-box `inner`, in the
/// row-major order of `inner`.
pub fn sub_box_offsets(outer: &MultiIndex, inner: &MultiIndex) -> Result<Vec<usize>> {
    if !inner.leq(outer)? {
        return Err(invalid(format!("box {inner} is not contained in {outer}")));
    }
    let d = outer.dim();
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * outer.coords[k + 1] as usize;
    }
    let mut out = Vec::with_capacity(inner.dense_len()?);
    let mut idx = vec![0u64; d];
    'outer: loop {
        out.push(idx.iter().zip(&strides).map(|(i, s)| *i as usize * s).sum());
        let mut k = d;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            if idx[k] < inner.coords[k] {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    Ok(out)
}

/// One realized array `{X_i : 1 ≺ i ≺ n}` of vectors in `R^D`, stored densely
/// in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleRepr", into = "SampleRepr")]
pub struct LatticeSample {
    bounds: MultiIndex,
    dim: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SampleRepr {
    #[serde(rename = "box")]
    bounds: MultiIndex,
    dim: usize,
    values: Vec<Vec<f64>>,
}

impl TryFrom<SampleRepr> for LatticeSample {
    type Error = Error;

    fn try_from(r: SampleRepr) -> Result<Self> {
        let cells = r.values.into_iter().map(HVector::new).collect();
        let s = LatticeSample::from_cells(r.bounds, cells)?;
        if s.dim != r.dim {
            return Err(Error::DimensionMismatch { expected: r.dim, found: s.dim });
        }
        Ok(s)
    }
}

impl From<LatticeSample> for SampleRepr {
    fn from(s: LatticeSample) -> Self {
        let values = s.data.chunks(s.dim.max(1)).map(<[f64]>::to_vec).collect();
        SampleRepr { bounds: s.bounds, dim: s.dim, values }
    }
}

impl LatticeSample {
    pub fn new(bounds: MultiIndex, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("truncation dimension must be positive"));
        }
        let cells = bounds.dense_len()?;
        if data.len() != cells * dim {
            return Err(invalid(format!(
                "expected {} coefficients for box {bounds} at D = {dim}, got {}",
                cells * dim,
                data.len()
            )));
        }
        Ok(Self { bounds, dim, data })
    }

    pub fn zeros(bounds: MultiIndex, dim: usize) -> Result<Self> {
        let len = bounds.dense_len()? * dim;
        Self::new(bounds, dim, vec![0.0; len])
    }

    pub fn from_cells(bounds: MultiIndex, cells: Vec<HVector>) -> Result<Self> {
        let dim = cells.first().map(HVector::dim).unwrap_or(0);
        if let Some(bad) = cells.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        let data = cells.into_iter().flat_map(HVector::into_coeffs).collect();
        Self::new(bounds, dim, data)
    }

    /// Scalar (`D = 1`) sample from values listed in box order.
    pub fn from_scalars(bounds: MultiIndex, values: &[f64]) -> Result<Self> {
        Self::new(bounds, 1, values.to_vec())
    }

    pub fn bounds(&self) -> &MultiIndex {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cell(&self, offset: usize) -> &[f64] {
        &self.data[offset * self.dim..(offset + 1) * self.dim]
    }

    pub fn cell_mut(&mut self, offset: usize) -> &mut [f64] {
        &mut self.data[offset * self.dim..(offset + 1) * self.dim]
    }

    pub fn get(&self, index: &MultiIndex) -> Result<HVector> {
        let off = self.bounds.offset_of(index)?;
        Ok(HVector::new(self.cell(off).to_vec()))
    }

    pub fn cells(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Norm of every cell, in box order.
    pub fn norms(&self) -> Vec<f64> {
        self.cells().map(hilbert::norm).collect()
    }

    pub fn map_cells(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for c in self.cells() {
            let out = f(c);
            if out.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: out.len() });
            }
            data.extend(out);
        }
        Self::new(self.bounds.clone(), self.dim, data)
    }

    pub fn add(&self, other: &LatticeSample) -> Result<Self> {
        if self.bounds != other.bounds {
            return Err(invalid(format!("box {} differs from {}", self.bounds, other.bounds)));
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self::new(self.bounds.clone(), self.dim, data)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            bounds: self.bounds.clone(),
            dim: self.dim,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }
}

/// `S_k = Σ_{i ≺ k} X_i` for every `k ≺ n`, by one cumulative sweep per axis.
pub fn prefix_sums(sample: &LatticeSample) -> LatticeSample {
    let mut out = sample.clone();
    prefix_sums_in_place(&mut out);
    out
}

pub(crate) fn prefix_sums_in_place(sample: &mut LatticeSample) {
    let dim = sample.dim;
    let coords = sample.bounds.coords.clone();
    let cells = sample.len();
    // stride in cells of each axis
    let mut stride = 1usize;
    for axis in (0..coords.len()).rev() {
        let extent = coords[axis] as usize;
        let block = stride * extent;
        for off in 0..cells {
            if (off % block) >= stride {
                let (src, dst) = ((off - stride) * dim, off * dim);
                for c in 0..dim {
                    sample.data[dst + c] += sample.data[src + c];
                }
            }
        }
        stride = block;
    }
}

/// Direct summation oracle for [`prefix_sums`]: every `S_k` is summed
/// independently over `{i : i ≺ k}` in box order. Quadratic in `|n|`.
pub fn prefix_sums_bruteforce(sample: &LatticeSample) -> Result<LatticeSample> {
    let bounds = &sample.bounds;
    if bounds.size() > BRUTEFORCE_MAX_CELLS {
        return Err(invalid(format!(
            "box {bounds} has {} cells; brute force is limited to {BRUTEFORCE_MAX_CELLS}",
            bounds.size()
        )));
    }
    let dim = sample.dim;
    let mut data = Vec::with_capacity(sample.data.len());
    for k in box_iter(bounds) {
        let mut acc = vec![0.0; dim];
        for i in box_iter(&k) {
            let cell = sample.cell(bounds.offset_of(&i)?);
            for (a, x) in acc.iter_mut().zip(cell) {
                *a += x;
            }
        }
        data.extend(acc);
    }
    LatticeSample::new(bounds.clone(), dim, data)
}

/// `M_n = max_{1 ≺ k ≺ n} ||Σ_{i ≺ k} X_i||`.
pub fn max_partial_norm(sample: &LatticeSample) -> f64 {
    let s = prefix_sums(sample);
    s.cells().map(hilbert::norm).fold(0.0, f64::max)
}

/// Maximal prefix norm over the sub-box `inner` of an already summed array.
///
/// Prefix sums restricted to a sub-box equal the prefix sums of the
/// restricted array, so one sweep over the horizon serves every nested box.
pub fn max_prefix_norm_within(prefix: &LatticeSample, offsets: &[usize]) -> f64 {
    offsets
        .iter()
        .map(|&o| hilbert::norm(prefix.cell(o)))
        .fold(0.0, f64::max)
}

/// Cesàro average `(1/|n|) Σ_{i ≺ n} v_i` with `values` listed in box order.
pub fn cesaro_average(values: &[f64], n: &MultiIndex) -> Result<f64> {
    if values.len() as u64 != n.size() {
        return Err(invalid(format!(
            "box {n} has {} cells but {} values were given",
            n.size(),
            values.len()
        )));
    }
    let sum: f64 = values.iter().sum();
    Ok(sum / n.size() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(c: &[u64]) -> MultiIndex {
        MultiIndex::new(c.to_vec()).unwrap()
    }

    #[test]
    fn multi_index_validation() {
        assert!(MultiIndex::new(vec![]).is_err());
        assert!(MultiIndex::new(vec![1, 0]).is_err());
        assert!(MultiIndex::new(vec![u64::MAX, 2]).is_err());
        assert_eq!(mi(&[2, 3, 4]).size(), 24);
        assert_eq!(mi(&[4, 4]).to_string(), "4x4");
    }

    #[test]
    fn leq_examples() {
        assert!(mi(&[1, 2]).leq(&mi(&[2, 2])).unwrap());
        assert!(!mi(&[2, 1]).leq(&mi(&[1, 2])).unwrap());
        assert!(!mi(&[1, 2]).leq(&mi(&[2, 1])).unwrap());
        let n = mi(&[3, 5]);
        assert!(n.leq(&n).unwrap());
        assert!(matches!(mi(&[1]).leq(&n), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn box_iter_examples() {
        let got: Vec<_> = box_iter(&mi(&[2, 2])).collect();
        assert_eq!(got, vec![mi(&[1, 1]), mi(&[1, 2]), mi(&[2, 1]), mi(&[2, 2])]);
        let got: Vec<_> = box_iter(&mi(&[3])).collect();
        assert_eq!(got, vec![mi(&[1]), mi(&[2]), mi(&[3])]);
        let got: Vec<_> = box_iter(&mi(&[1, 1, 1])).collect();
        assert_eq!(got, vec![mi(&[1, 1, 1])]);
    }

    #[test]
    fn offsets_round_trip() {
        let n = mi(&[3, 2, 4]);
        for (k, i) in box_iter(&n).enumerate() {
            assert_eq!(n.offset_of(&i).unwrap(), k);
            assert_eq!(n.cell_at(k), i);
        }
        assert!(n.offset_of(&mi(&[4, 1, 1])).is_err());
    }

    #[test]
    fn sub_box_offsets_match_enumeration() {
        let outer = mi(&[4, 3, 5]);
        let inner = mi(&[2, 3, 2]);
        let want: Vec<usize> = box_iter(&inner).map(|i| outer.offset_of(&i).unwrap()).collect();
        assert_eq!(sub_box_offsets(&outer, &inner).unwrap(), want);
        assert!(sub_box_offsets(&inner, &outer).is_err());
    }

    #[test]
    fn prefix_sum_examples() {
        let x = LatticeSample::from_scalars(mi(&[2, 2]), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(prefix_sums(&x).data(), &[1.0, 3.0, 4.0, 10.0]);
        assert_eq!(prefix_sums_bruteforce(&x).unwrap().data(), &[1.0, 3.0, 4.0, 10.0]);

        let z = LatticeSample::zeros(mi(&[3, 2]), 4).unwrap();
        assert_eq!(prefix_sums(&z), z);
        assert_eq!(prefix_sums_bruteforce(&z).unwrap(), z);

        let ones = LatticeSample::from_scalars(mi(&[3]), &[1.0; 3]).unwrap();
        assert_eq!(prefix_sums(&ones).data(), &[1.0, 2.0, 3.0]);
        assert_eq!(prefix_sums_bruteforce(&ones).unwrap().data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn bruteforce_examples() {
        let single = LatticeSample::from_cells(mi(&[1, 1]), vec![HVector::new(vec![2.0, -1.0])]).unwrap();
        assert_eq!(prefix_sums_bruteforce(&single).unwrap(), single);

        let cube = LatticeSample::from_scalars(mi(&[2, 2, 2]), &[1.0; 8]).unwrap();
        let s = prefix_sums_bruteforce(&cube).unwrap();
        assert_eq!(s.get(&mi(&[2, 2, 2])).unwrap().coeffs(), &[8.0]);

        let big = LatticeSample::zeros(mi(&[400, 251]), 1).unwrap();
        assert!(matches!(prefix_sums_bruteforce(&big), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn max_partial_norm_examples() {
        let z = LatticeSample::zeros(mi(&[4, 4]), 3).unwrap();
        assert_eq!(max_partial_norm(&z), 0.0);
        let x = LatticeSample::from_scalars(mi(&[2, 2]), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(max_partial_norm(&x), 10.0);
        let y = LatticeSample::from_scalars(mi(&[2]), &[1.0, -2.0]).unwrap();
        assert_eq!(max_partial_norm(&y), 1.0);
    }

    #[test]
    fn nested_box_maximum_matches_direct() {
        let vals: Vec<f64> = (0..60).map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let big = LatticeSample::from_scalars(mi(&[5, 12]), &vals).unwrap();
        let inner = mi(&[3, 7]);
        let offs = sub_box_offsets(big.bounds(), &inner).unwrap();
        let restricted: Vec<f64> = offs.iter().map(|&o| big.cell(o)[0]).collect();
        let small = LatticeSample::from_scalars(inner, &restricted).unwrap();
        let via_big = max_prefix_norm_within(&prefix_sums(&big), &offs);
        assert_eq!(via_big.to_bits(), max_partial_norm(&small).to_bits());
    }

    #[test]
    fn cesaro_average_examples() {
        assert_eq!(cesaro_average(&[1.0; 6], &mi(&[2, 3])).unwrap(), 1.0);
        assert_eq!(cesaro_average(&[1.0, 2.0, 3.0], &mi(&[3])).unwrap(), 2.0);
        assert_eq!(cesaro_average(&[0.0, 0.0, 0.0, 4.0], &mi(&[2, 2])).unwrap(), 1.0);
        assert!(cesaro_average(&[1.0], &mi(&[2])).is_err());
    }

    #[test]
    fn sample_json_shape() {
        let x = LatticeSample::from_scalars(mi(&[2]), &[1.5, -2.0]).unwrap();
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(json, r#"{"box":[2],"dim":1,"values":[[1.5],[-2.0]]}"#);
        let back: LatticeSample = serde_json::from_str(&json).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<LatticeSample>(r#"{"box":[3],"dim":1,"values":[[1.0]]}"#).is_err());
    }

    fn sample_strategy() -> impl Strategy<Value = LatticeSample> {
        (1usize..=3, prop::sample::select(vec![1usize, 4]))
            .prop_flat_map(|(d, dim)| (prop::collection::vec(1u64..=4, d), Just(dim)))
            .prop_flat_map(|(coords, dim)| {
                let cells: u64 = coords.iter().product();
                (
                    Just(coords),
                    Just(dim),
                    prop::collection::vec(-100.0f64..100.0, cells as usize * dim),
                )
            })
            .prop_map(|(coords, dim, data)| {
                LatticeSample::new(MultiIndex::new(coords).unwrap(), dim, data).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn sweeps_match_bruteforce(x in sample_strategy()) {
            let fast = prefix_sums(&x);
            let slow = prefix_sums_bruteforce(&x).unwrap();
            for (a, b) in fast.data().iter().zip(slow.data()) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-9));
            }
        }

        #[test]
        fn max_norm_scale_equivariant(x in sample_strategy(), c in -20.0f64..20.0) {
            let lhs = max_partial_norm(&x.scale(c));
            let rhs = c.abs() * max_partial_norm(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs).max(1e-300));
        }

        #[test]
        fn max_norm_subadditive(x in sample_strategy(), seed in any::<u64>()) {
            let y = x.map_cells(|c| c.iter().enumerate().map(|(k, v)| ((seed >> (k % 64)) & 7) as f64 - v * 0.5).collect()).unwrap();
            let (mx, my) = (max_partial_norm(&x), max_partial_norm(&y));
            prop_assert!(max_partial_norm(&x.add(&y).unwrap()) <= mx + my + 1e-12 * (mx + my));
        }

        #[test]
        fn deterministic_bits(x in sample_strategy()) {
            prop_assert_eq!(max_partial_norm(&x).to_bits(), max_partial_norm(&x.clone()).to_bits());
            let (a, b) = (prefix_sums(&x), prefix_sums(&x));
            prop_assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}
