//! Generative families of lattice arrays.
//!
//! Each family either satisfies or deliberately violates Cesàro uniform
//! integrability, and exposes the per-cell law of `||X_i||` where it has a
//! closed form. Randomness is addressed by `(seed, cell)`, so growing a box
//! never changes the cells that were already there.

use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{HVector, DEFAULT_DIM};
use crate::lattice::{box_iter, LatticeSample, MultiIndex};
use crate::rng;

/// Largest `m` accepted by the pairwise-independent sign construction.
pub const RADEMACHER_MAX_M: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Independent cells with i.i.d. `N(0, sigma^2)` coefficients.
    IidGaussian { sigma: f64 },
    /// `X_i = R_i e_1` with `R_i ~ Pareto(scale, alpha)` independent.
    ParetoRadial { alpha: f64, scale: f64 },
    /// Deterministic: `sqrt(|i|) e_1` on cells whose coordinates are all
    /// powers of `gap`, `bulk e_1` elsewhere.
    SpikedCui { gap: u64, bulk: f64 },
    /// Deterministic: `|i|^exponent e_1`.
    GrowingNonCui { exponent: f64 },
    /// Signs `±e_1` from the subset-product construction on `m` fair bits,
    /// in blocks of `2^m - 1` cells along the last axis.
    PairwiseRademacher { m: u32 },
    /// Deterministic `value e_1`; `value = 0` is the zero family.
    Constant { value: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::IidGaussian { .. } => "iid_gaussian",
            Family::ParetoRadial { .. } => "pareto_radial",
            Family::SpikedCui { .. } => "spiked_cui",
            Family::GrowingNonCui { .. } => "growing_non_cui",
            Family::PairwiseRademacher { .. } => "pairwise_rademacher",
            Family::Constant { .. } => "constant",
        }
    }

    fn params(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        match *self {
            Family::IidGaussian { sigma } => put("sigma", sigma.into()),
            Family::ParetoRadial { alpha, scale } => {
                put("alpha", alpha.into());
                put("scale", scale.into());
            }
            Family::SpikedCui { gap, bulk } => {
                put("gap", gap.into());
                put("bulk", bulk.into());
            }
            Family::GrowingNonCui { exponent } => put("exponent", exponent.into()),
            Family::PairwiseRademacher { m } => put("m", m.into()),
            Family::Constant { value } => put("value", value.into()),
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMode {
    Analytic,
    Empirical,
}

/// A family plus truncation dimension and the preferred moment route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct DistributionSpec {
    pub family: Family,
    pub dim: usize,
    pub moment_mode: MomentMode,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    family: String,
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(rename = "dim_D", default = "default_dim")]
    dim: usize,
    #[serde(default = "default_mode")]
    moment_mode: MomentMode,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_mode() -> MomentMode {
    MomentMode::Analytic
}

struct Params {
    map: Map<String, Value>,
}

impl Params {
    fn real(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.map.remove(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| invalid(format!("parameter {key:?} must be a finite number"))),
        }
    }

    fn int(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.map.remove(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| invalid(format!("parameter {key:?} must be a nonnegative integer"))),
        }
    }

    fn finish(self, family: &str) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(invalid(format!("unknown parameter {k:?} for family {family}"))),
            None => Ok(()),
        }
    }
}

impl TryFrom<SpecRepr> for DistributionSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let mut p = Params { map: r.params };
        let family = match r.family.as_str() {
            "iid_gaussian" => Family::IidGaussian { sigma: p.real("sigma", 1.0)? },
            "pareto_radial" => Family::ParetoRadial {
                alpha: p.real("alpha", 3.0)?,
                scale: p.real("scale", 1.0)?,
            },
            "spiked_cui" => Family::SpikedCui {
                gap: p.int("gap", 2)?,
                bulk: p.real("bulk", 0.0)?,
            },
            "growing_non_cui" => Family::GrowingNonCui { exponent: p.real("exponent", 0.5)? },
            "pairwise_rademacher" => Family::PairwiseRademacher {
                m: u32::try_from(p.int("m", 4)?).map_err(|_| invalid("m out of range"))?,
            },
            "constant" => Family::Constant { value: p.real("value", 1.0)? },
            other => return Err(invalid(format!("unknown family {other:?}"))),
        };
        p.finish(&r.family)?;
        DistributionSpec::new(family, r.dim, r.moment_mode)
    }
}

impl From<DistributionSpec> for SpecRepr {
    fn from(s: DistributionSpec) -> Self {
        SpecRepr {
            family: s.family.name().to_string(),
            params: s.family.params(),
            dim: s.dim,
            moment_mode: s.moment_mode,
        }
    }
}

impl DistributionSpec {
    pub fn new(family: Family, dim: usize, moment_mode: MomentMode) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim_D must be positive"));
        }
        match family {
            Family::IidGaussian { sigma } if !(sigma > 0.0) => {
                return Err(invalid("sigma must be positive"))
            }
            Family::ParetoRadial { alpha, scale } if !(alpha > 0.0 && scale > 0.0) => {
                return Err(invalid("pareto alpha and scale must be positive"))
            }
            Family::SpikedCui { gap, bulk } if gap < 2 || !bulk.is_finite() => {
                return Err(invalid("spike gap must be at least 2"))
            }
            Family::PairwiseRademacher { m } if !(1..=RADEMACHER_MAX_M).contains(&m) => {
                return Err(invalid(format!("m must lie in 1..={RADEMACHER_MAX_M}")))
            }
            _ => {}
        }
        Ok(Self { family, dim, moment_mode })
    }

    fn with(family: Family) -> Self {
        Self::new(family, DEFAULT_DIM, MomentMode::Analytic).expect("valid preset")
    }

    pub fn constant(value: f64) -> Self {
        Self::with(Family::Constant { value })
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn pareto(alpha: f64) -> Self {
        Self::with(Family::ParetoRadial { alpha, scale: 1.0 })
    }

    pub fn spiked() -> Self {
        Self::with(Family::SpikedCui { gap: 2, bulk: 0.0 })
    }

    pub fn growing(exponent: f64) -> Self {
        Self::with(Family::GrowingNonCui { exponent })
    }

    pub fn rademacher(m: u32) -> Self {
        Self::with(Family::PairwiseRademacher { m })
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self::with(Family::IidGaussian { sigma })
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim.max(1);
        self
    }

    pub fn with_mode(mut self, mode: MomentMode) -> Self {
        self.moment_mode = mode;
        self
    }

    /// Whether `{||X_i||^p}` is uniformly integrable in the Cesàro sense.
    ///
    /// Pareto: the truncated moment `α s^α a^{p-α}/(α-p)` is finite and
    /// vanishes as `a → ∞` iff `α > p`. Spiked: the spike contribution to a
    /// box average is `O(|n|^{p/2 - 1})`. Growing: the box average at any
    /// level grows like `|n|^{exponent·p}`.
    pub fn is_cui(&self, p: f64) -> bool {
        match self.family {
            Family::ParetoRadial { alpha, .. } => alpha > p,
            Family::SpikedCui { .. } => p < 2.0,
            Family::GrowingNonCui { exponent } => exponent <= 0.0,
            Family::IidGaussian { .. } | Family::PairwiseRademacher { .. } | Family::Constant { .. } => true,
        }
    }

    /// Every family here is pairwise independent across cells (deterministic
    /// families trivially so).
    pub fn pairwise_independent(&self) -> bool {
        true
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(
            self.family,
            Family::SpikedCui { .. } | Family::GrowingNonCui { .. } | Family::Constant { .. }
        )
    }

    pub fn is_zero_mean(&self) -> bool {
        match self.family {
            Family::IidGaussian { .. } | Family::PairwiseRademacher { .. } => true,
            Family::Constant { value } => value == 0.0,
            _ => false,
        }
    }

    /// Upper bound on `||X_i||` over the whole lattice, `None` if unbounded.
    pub fn global_norm_bound(&self) -> Option<f64> {
        match self.family {
            Family::Constant { value } => Some(value.abs()),
            Family::PairwiseRademacher { .. } => Some(1.0),
            Family::GrowingNonCui { exponent } if exponent <= 0.0 => Some(1.0),
            _ => None,
        }
    }

    /// Law of `||X_i||` for one cell.
    pub fn norm_law(&self, cell: &MultiIndex) -> Result<NormLaw> {
        Ok(match self.family {
            Family::IidGaussian { .. } => {
                return Err(Error::Unsupported(
                    "iid_gaussian has no closed-form tail moments here; use empirical mode".into(),
                ))
            }
            Family::ParetoRadial { alpha, scale } => NormLaw::Pareto { scale, shape: alpha },
            Family::SpikedCui { gap, bulk } => {
                if is_spike(cell, gap) {
                    NormLaw::Point((cell.size() as f64).sqrt())
                } else {
                    NormLaw::Point(bulk.abs())
                }
            }
            Family::GrowingNonCui { exponent } => NormLaw::Point((cell.size() as f64).powf(exponent)),
            Family::PairwiseRademacher { .. } => NormLaw::Point(1.0),
            Family::Constant { value } => NormLaw::Point(value.abs()),
        })
    }

    /// `E X_i` when available in closed form.
    pub fn analytic_mean(&self, cell: &MultiIndex) -> Option<HVector> {
        let along_e1 = |s: f64| Some(HVector::basis(self.dim, 0, s));
        match self.family {
            Family::IidGaussian { .. } | Family::PairwiseRademacher { .. } => Some(HVector::zero(self.dim)),
            Family::ParetoRadial { alpha, scale } if alpha > 1.0 => along_e1(alpha * scale / (alpha - 1.0)),
            Family::ParetoRadial { .. } => None,
            Family::SpikedCui { gap, bulk } => {
                along_e1(if is_spike(cell, gap) { (cell.size() as f64).sqrt() } else { bulk })
            }
            Family::GrowingNonCui { exponent } => along_e1((cell.size() as f64).powf(exponent)),
            Family::Constant { value } => along_e1(value),
        }
    }

    /// `E ||X_i||^2`, when available in closed form.
    pub fn second_moment(&self, cell: &MultiIndex) -> Option<f64> {
        match self.family {
            Family::IidGaussian { sigma } => Some(self.dim as f64 * sigma * sigma),
            _ => self.norm_law(cell).ok().map(|l| l.tail_moment(2.0, 0.0, Indicator::AtLeast)),
        }
    }

    /// Writes `X_cell` into `out` (length `dim`).
    pub fn sample_cell_into(&self, seed: u64, cell: &MultiIndex, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        match self.family {
            Family::IidGaussian { sigma } => {
                let mut r = rng::stream(seed, cell.coords());
                for x in out.iter_mut() {
                    let z: f64 = r.sample(StandardNormal);
                    *x = sigma * z;
                }
            }
            Family::ParetoRadial { alpha, scale } => {
                let mut r = rng::stream(seed, cell.coords());
                out[0] = Pareto::new(scale, alpha).expect("validated parameters").sample(&mut r);
            }
            Family::PairwiseRademacher { m } => out[0] = rademacher_cell(m, seed, cell),
            Family::SpikedCui { .. } | Family::GrowingNonCui { .. } | Family::Constant { .. } => {
                out[0] = self
                    .analytic_mean(cell)
                    .map(|v| v.coeffs()[0])
                    .expect("deterministic families have a mean");
            }
        }
    }

    pub fn sample_cell(&self, seed: u64, cell: &MultiIndex) -> HVector {
        let mut out = vec![0.0; self.dim];
        self.sample_cell_into(seed, cell, &mut out);
        HVector::new(out)
    }
}

/// Realizes `{X_i : 1 ≺ i ≺ n}`.
pub fn sample_array(spec: &DistributionSpec, n: &MultiIndex, seed: u64) -> Result<LatticeSample> {
    let mut sample = LatticeSample::zeros(n.clone(), spec.dim)?;
    for (off, cell) in box_iter(n).enumerate() {
        spec.sample_cell_into(seed, &cell, sample.cell_mut(off));
    }
    Ok(sample)
}

fn is_power_of(mut x: u64, base: u64) -> bool {
    while x.is_multiple_of(base) {
        x /= base;
    }
    x == 1
}

fn is_spike(cell: &MultiIndex, gap: u64) -> bool {
    cell.coords().iter().all(|&c| is_power_of(c, gap))
}

/// Cells of `horizon` that carry a spike, in box order.
pub(crate) fn spike_cells(horizon: &MultiIndex, gap: u64) -> Vec<MultiIndex> {
    let axes: Vec<Vec<u64>> = horizon
        .coords()
        .iter()
        .map(|&n| {
            std::iter::successors(Some(1u64), |&x| x.checked_mul(gap))
                .take_while(|&x| x <= n)
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u64>| {
                axis.iter().map(move |&c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|c| MultiIndex::new(c).expect("spike coordinates are positive"))
        .collect()
}

fn subset_products(bits: &[i8]) -> Vec<i8> {
    let m = bits.len();
    (1u32..(1 << m))
        .map(|q| {
            (0..m)
                .filter(|b| q >> b & 1 == 1)
                .map(|b| bits[b])
                .product()
        })
        .collect()
}

fn fair_bits(r: &mut impl Rng, m: u32) -> Vec<i8> {
    (0..m).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect()
}

/// The `2^m - 1` products `Π_{k ∈ S} b_k` over nonempty subsets `S`, from
/// `m` independent fair signs. Pairwise independent, not mutually
/// independent. Variable `q` (1-based) uses the subset given by the bits of
/// `q`, so for `m = 2` the order is `b1, b2, b1 b2`.
pub fn pairwise_rademacher_array(m: u32, seed: u64) -> Result<Vec<i8>> {
    if !(2..=RADEMACHER_MAX_M).contains(&m) {
        return Err(invalid(format!("m = {m} outside 2..={RADEMACHER_MAX_M}")));
    }
    let mut r = rng::stream(seed, &[]);
    Ok(subset_products(&fair_bits(&mut r, m)))
}

fn rademacher_cell(m: u32, seed: u64, cell: &MultiIndex) -> f64 {
    let block_len = (1u64 << m) - 1;
    let coords = cell.coords();
    let (last, rest) = coords.split_last().expect("nonempty multi-index");
    let mut address: Vec<u64> = rest.to_vec();
    address.push((last - 1) / block_len);
    let q = (last - 1) % block_len + 1;
    let mut r = rng::stream(seed, &address);
    let bits = fair_bits(&mut r, m);
    (0..m as usize)
        .filter(|b| q >> b & 1 == 1)
        .map(|b| bits[b] as f64)
        .product()
}

/// Which indicator a truncated moment uses: `1(x > a)` or `1(x ≥ a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Strict,
    AtLeast,
}

impl Indicator {
    #[inline]
    pub fn holds(self, x: f64, a: f64) -> bool {
        match self {
            Indicator::Strict => x > a,
            Indicator::AtLeast => x >= a,
        }
    }
}

/// Marginal law of `||X_i||` for families with closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormLaw {
    /// Deterministic norm.
    Point(f64),
    /// Pareto with `P(R > t) = (scale/t)^shape` for `t ≥ scale`.
    Pareto { scale: f64, shape: f64 },
}

impl NormLaw {
    /// `E[R^p 1(R ⋄ a)]`; `+∞` when the moment diverges.
    pub fn tail_moment(&self, p: f64, a: f64, ind: Indicator) -> f64 {
        match *self {
            NormLaw::Point(v) => {
                if ind.holds(v, a) {
                    v.powf(p)
                } else {
                    0.0
                }
            }
            NormLaw::Pareto { scale, shape } => {
                if shape <= p {
                    return f64::INFINITY;
                }
                let lo = a.max(scale);
                shape * scale.powf(shape) * lo.powf(p - shape) / (shape - p)
            }
        }
    }

    /// `P(R ⋄ a)`.
    pub fn tail_prob(&self, a: f64, ind: Indicator) -> f64 {
        match *self {
            NormLaw::Point(v) => f64::from(u8::from(ind.holds(v, a))),
            NormLaw::Pareto { scale, shape } => {
                if a <= scale {
                    1.0
                } else {
                    (scale / a).powf(shape)
                }
            }
        }
    }

    pub fn ess_sup(&self) -> f64 {
        match *self {
            NormLaw::Point(v) => v,
            NormLaw::Pareto { .. } => f64::INFINITY,
        }
    }

    /// Law of `R^p`.
    pub fn power(&self, p: f64) -> NormLaw {
        match *self {
            NormLaw::Point(v) => NormLaw::Point(v.powf(p)),
            NormLaw::Pareto { scale, shape } => NormLaw::Pareto {
                scale: scale.powf(p),
                shape: shape / p,
            },
        }
    }

    /// `∫_lo^hi P(R > t) dt` for `0 ≤ lo ≤ hi ≤ ∞`.
    pub fn survival_integral(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match *self {
            NormLaw::Point(v) => (hi.min(v) - lo).max(0.0),
            NormLaw::Pareto { scale, shape } => {
                let flat = (hi.min(scale) - lo).max(0.0);
                let (a, b) = (lo.max(scale), hi.max(scale));
                let tail = if b <= a {
                    0.0
                } else if (shape - 1.0).abs() < 1e-12 {
                    scale * (b / a).ln()
                } else if b.is_infinite() {
                    if shape > 1.0 {
                        scale.powf(shape) * a.powf(1.0 - shape) / (shape - 1.0)
                    } else {
                        f64::INFINITY
                    }
                } else {
                    scale.powf(shape) * (a.powf(1.0 - shape) - b.powf(1.0 - shape)) / (shape - 1.0)
                };
                flat + tail
            }
        }
    }
}

/// `E(||X_i||^p 1(||X_i|| > a))` in closed form.
pub fn analytic_tail_mean(spec: &DistributionSpec, p: f64, a: f64, cell: &MultiIndex) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("p = {p} outside (0, 1]")));
    }
    if !(a >= 0.0) {
        return Err(invalid("truncation level must be nonnegative"));
    }
    Ok(spec.norm_law(cell)?.tail_moment(p, a, Indicator::Strict))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(c: &[u64]) -> MultiIndex {
        MultiIndex::new(c.to_vec()).unwrap()
    }

    #[test]
    fn constant_family_has_unit_norm() {
        let s = sample_array(&DistributionSpec::constant(1.0), &mi(&[3, 4]), 9).unwrap();
        assert!(s.norms().iter().all(|&r| r == 1.0));
    }

    #[test]
    fn sampling_is_deterministic_and_cell_stable() {
        for spec in [
            DistributionSpec::gaussian(1.0),
            DistributionSpec::pareto(3.0),
            DistributionSpec::rademacher(4),
        ] {
            let a = sample_array(&spec, &mi(&[5, 6]), 42).unwrap();
            let b = sample_array(&spec, &mi(&[5, 6]), 42).unwrap();
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
            let big = sample_array(&spec, &mi(&[9, 40]), 42).unwrap();
            for cell in box_iter(&mi(&[5, 6])) {
                assert_eq!(a.get(&cell).unwrap(), big.get(&cell).unwrap());
            }
            let other = sample_array(&spec, &mi(&[5, 6]), 43).unwrap();
            assert_ne!(a, other);
        }
    }

    #[test]
    fn spike_positions_in_one_dimension() {
        let s = sample_array(&DistributionSpec::spiked(), &mi(&[8]), 0).unwrap();
        let nonzero: Vec<usize> = s
            .norms()
            .iter()
            .enumerate()
            .filter(|(_, &r)| r != 0.0)
            .map(|(k, _)| k + 1)
            .collect();
        assert_eq!(nonzero, vec![1, 2, 4, 8]);
        assert_eq!(s.norms()[7], 8f64.sqrt());
        let cells: Vec<u64> = spike_cells(&mi(&[8]), 2).iter().map(|c| c.coords()[0]).collect();
        assert_eq!(cells, vec![1, 2, 4, 8]);
        assert_eq!(spike_cells(&mi(&[4, 3]), 2).len(), 6);
    }

    #[test]
    fn bulk_level_is_configurable() {
        let spec = DistributionSpec::new(Family::SpikedCui { gap: 2, bulk: 1.0 }, 2, MomentMode::Analytic).unwrap();
        let s = sample_array(&spec, &mi(&[6]), 0).unwrap();
        assert_eq!(s.norms(), vec![1.0, 2f64.sqrt(), 1.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn rademacher_m2_exhaustive() {
        // All 4 outcomes of (b1, b2) give the variables (b1, b2, b1 b2).
        let outcomes: Vec<Vec<i8>> = [[1i8, 1], [1, -1], [-1, 1], [-1, -1]]
            .iter()
            .map(|b| subset_products(b))
            .collect();
        assert_eq!(outcomes[1], vec![1, -1, -1]);
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            let cov: i32 = outcomes.iter().map(|o| (o[j] * o[k]) as i32).sum();
            let mean_j: i32 = outcomes.iter().map(|o| o[j] as i32).sum();
            assert_eq!(cov, 0);
            assert_eq!(mean_j, 0);
        }
        for o in &outcomes {
            assert_eq!(o.iter().map(|&x| x as i32).product::<i32>(), 1);
        }
    }

    #[test]
    fn rademacher_array_range() {
        let v = pairwise_rademacher_array(5, 3).unwrap();
        assert_eq!(v.len(), 31);
        assert!(v.iter().all(|&x| x == 1 || x == -1));
        assert!(pairwise_rademacher_array(1, 0).is_err());
        assert!(pairwise_rademacher_array(21, 0).is_err());
        let m2 = pairwise_rademacher_array(2, 11).unwrap();
        assert_eq!(m2[0] * m2[1], m2[2]);
    }

    #[test]
    fn rademacher_cells_follow_blocks() {
        // Cells 1..3 of a block are b1, b2, b1 b2.
        let spec = DistributionSpec::rademacher(2);
        let s = sample_array(&spec, &mi(&[6]), 5).unwrap();
        let x: Vec<f64> = s.cells().map(|c| c[0]).collect();
        assert_eq!(x[0] * x[1], x[2]);
        assert_eq!(x[3] * x[4], x[5]);
    }

    #[test]
    fn rademacher_pair_correlations_vanish() {
        let reps = 100_000u64;
        let spec = DistributionSpec::rademacher(4);
        let n = mi(&[15]);
        let mut sums = vec![0i64; 15 * 15];
        for r in 0..reps {
            let x: Vec<i64> = sample_array(&spec, &n, rng::replication_seed(77, r))
                .unwrap()
                .cells()
                .map(|c| c[0] as i64)
                .collect();
            for j in 0..15 {
                for k in (j + 1)..15 {
                    sums[j * 15 + k] += x[j] * x[k];
                }
            }
        }
        let bound = 3.0 / (reps as f64).sqrt();
        for j in 0..15 {
            for k in (j + 1)..15 {
                let corr = sums[j * 15 + k] as f64 / reps as f64;
                assert!(corr.abs() < bound, "pair ({j},{k}) correlation {corr}");
            }
        }
    }

    #[test]
    fn analytic_tail_examples() {
        let c = DistributionSpec::constant(1.0);
        assert_eq!(analytic_tail_mean(&c, 1.0, 2.0, &mi(&[3])).unwrap(), 0.0);
        assert_eq!(analytic_tail_mean(&c, 1.0, 0.5, &mi(&[3])).unwrap(), 1.0);
        let g = DistributionSpec::growing(0.5);
        for i in 1..20u64 {
            let want = (i as f64).sqrt();
            assert_eq!(analytic_tail_mean(&g, 1.0, 0.0, &mi(&[i])).unwrap(), want);
        }
        assert!(matches!(
            analytic_tail_mean(&DistributionSpec::gaussian(1.0), 1.0, 0.0, &mi(&[1])),
            Err(Error::Unsupported(_))
        ));
    }

    /// Midpoint-rule quadrature of `∫_a^∞ r^p f(r) dr` after `r = a / u^{1/k}`
    /// substitution, independent of the closed form.
    fn pareto_tail_quadrature(alpha: f64, p: f64, a: f64) -> f64 {
        let lo = a.max(1.0);
        // r = lo * u^{-1/alpha}, u in (0, 1]; density alpha r^{-alpha-1}
        let steps = 200_000;
        let h = 1.0 / steps as f64;
        (0..steps)
            .map(|k| {
                let u = (k as f64 + 0.5) * h;
                let r = lo * u.powf(-1.0 / alpha);
                // dr = (lo/alpha) u^{-1/alpha - 1} du
                let jac = lo / alpha * u.powf(-1.0 / alpha - 1.0);
                r.powf(p) * alpha * r.powf(-alpha - 1.0) * jac * h
            })
            .sum()
    }

    #[test]
    fn pareto_tail_matches_quadrature() {
        let law = NormLaw::Pareto { scale: 1.0, shape: 3.0 };
        for (p, a) in [(1.0, 0.0), (1.0, 2.5), (0.5, 4.0), (0.5, 0.3)] {
            let closed = law.tail_moment(p, a, Indicator::Strict);
            let quad = pareto_tail_quadrature(3.0, p, a);
            assert!((closed - quad).abs() < 1e-4 * closed, "p={p} a={a}: {closed} vs {quad}");
        }
        assert!(NormLaw::Pareto { scale: 1.0, shape: 0.5 }.tail_moment(1.0, 3.0, Indicator::Strict).is_infinite());
    }

    #[test]
    fn pareto_sample_mean_matches_law() {
        let spec = DistributionSpec::pareto(3.0);
        let s = sample_array(&spec, &mi(&[200_000]), 1).unwrap();
        let mean: f64 = s.norms().iter().sum::<f64>() / 200_000.0;
        assert!((mean - 1.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn survival_integral_matches_moment() {
        let law = NormLaw::Pareto { scale: 1.0, shape: 3.0 };
        assert!((law.survival_integral(0.0, f64::INFINITY) - 1.5).abs() < 1e-12);
        let split = law.survival_integral(0.0, 2.0) + law.survival_integral(2.0, f64::INFINITY);
        assert!((split - 1.5).abs() < 1e-12);
        assert_eq!(NormLaw::Point(2.5).survival_integral(0.0, 10.0), 2.5);
        let pw = law.power(0.5);
        assert!((pw.tail_moment(1.0, 0.0, Indicator::AtLeast) - law.tail_moment(0.5, 0.0, Indicator::AtLeast)).abs() < 1e-12);
    }

    #[test]
    fn spec_json_round_trip_and_errors() {
        let json = r#"{"family":"pareto_radial","params":{"alpha":3.0},"dim_D":4,"moment_mode":"analytic"}"#;
        let spec: DistributionSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.family, Family::ParetoRadial { alpha: 3.0, scale: 1.0 });
        assert_eq!(spec.dim, 4);
        let back: DistributionSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"cauchy","params":{}}"#).is_err());
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"constant","params":{"vaule":1}}"#).is_err());
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"spiked_cui","params":{"gap":1}}"#).is_err());
    }

    #[test]
    fn cui_flags() {
        assert!(DistributionSpec::pareto(3.0).is_cui(1.0));
        assert!(!DistributionSpec::pareto(0.8).is_cui(1.0));
        assert!(DistributionSpec::pareto(0.8).is_cui(0.5));
        assert!(DistributionSpec::spiked().is_cui(1.0));
        assert!(!DistributionSpec::growing(0.5).is_cui(0.5));
        assert!(DistributionSpec::constant(2.0).is_cui(1.0));
    }
}
