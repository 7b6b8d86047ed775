//! Expectations of per-cell functionals of `||X_i||`, averaged over boxes.
//!
//! A [`MomentSource`] fixes a family, a horizon box and a finite schedule of
//! boxes below it. The supremum over all `n ≻ 1` in the definitions is
//! replaced by the maximum over that schedule; reports always carry the
//! horizon. Expectations are exact when the family has closed-form norm laws
//! and analytic mode is requested, and Monte Carlo means with standard errors
//! otherwise.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::distributions::{sample_array, spike_cells, DistributionSpec, Family, MomentMode, NormLaw};
use crate::error::{invalid, Error, Result};
use crate::lattice::{box_iter, sub_box_offsets, MultiIndex};
use crate::par::map_indexed;
use crate::rng::replication_seed;

/// Below this many replications empirical reports carry a warning flag.
pub const MIN_RELIABLE_REPS: usize = 30;

/// A point estimate of a schedule supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Zero in analytic mode.
    pub stderr: f64,
    /// Index into the schedule of the maximizing box.
    pub argmax: usize,
}

impl Estimate {
    /// `value + 2 stderr < bound`: the quantity is below `bound` with margin.
    pub fn confidently_below(&self, bound: f64) -> bool {
        self.value + 2.0 * self.stderr < bound
    }

    /// `value - 2 stderr < bound`: no significant evidence of exceeding `bound`.
    pub fn plausibly_below(&self, bound: f64) -> bool {
        self.value - 2.0 * self.stderr < bound
    }

    pub fn plausibly_at_most(&self, bound: f64) -> bool {
        self.value - 2.0 * self.stderr <= bound
    }
}

/// Every box `n ≺ horizon` whose coordinates are powers of two, plus the
/// horizon coordinate itself on each axis.
pub fn pow2_schedule(horizon: &MultiIndex) -> Vec<MultiIndex> {
    let axes: Vec<Vec<u64>> = horizon
        .coords()
        .iter()
        .map(|&h| {
            let mut v: Vec<u64> = std::iter::successors(Some(1u64), |&x| x.checked_mul(2))
                .take_while(|&x| x <= h)
                .collect();
            if *v.last().expect("h >= 1") != h {
                v.push(h);
            }
            v
        })
        .collect();
    let counts = MultiIndex::new(axes.iter().map(|a| a.len() as u64).collect()).expect("nonempty axes");
    box_iter(&counts)
        .map(|k| {
            let coords = k.coords().iter().zip(&axes).map(|(&j, a)| a[j as usize - 1]).collect();
            MultiIndex::new(coords).expect("positive coordinates")
        })
        .collect()
}

/// Boxes of size `2^lo, 2^{lo+1}, ..., 2^hi` in dimension `d`, each obtained
/// from the previous by doubling its shortest axis (lowest index first).
pub fn doubling_schedule(d: usize, lo: u32, hi: u32) -> Result<Vec<MultiIndex>> {
    if d == 0 || lo > hi || hi >= 63 {
        return Err(invalid(format!("bad doubling schedule d={d} lo={lo} hi={hi}")));
    }
    let mut exps = vec![0u32; d];
    for k in 0..lo as usize {
        exps[k % d] += 1;
    }
    let mut out = Vec::new();
    loop {
        out.push(MultiIndex::new(exps.iter().map(|&e| 1u64 << e).collect())?);
        if exps.iter().sum::<u32>() == hi {
            break;
        }
        let k = (0..d).min_by_key(|&k| (exps[k], k)).expect("d > 0");
        exps[k] += 1;
    }
    Ok(out)
}

/// Componentwise maximum of a schedule.
pub fn horizon_of(schedule: &[MultiIndex]) -> Result<MultiIndex> {
    let (first, rest) = schedule.split_first().ok_or_else(|| invalid("empty schedule"))?;
    rest.iter().try_fold(first.clone(), |acc, n| acc.join(n))
}

struct AnalyticField {
    default: Option<NormLaw>,
    /// `(offset in horizon, cell, law)`, sorted by offset.
    exceptions: Vec<(usize, MultiIndex, NormLaw)>,
    dense: OnceLock<Result<Vec<NormLaw>>>,
}

struct EmpiricalField {
    reps: usize,
    /// `norms[r][offset]`.
    norms: Vec<Vec<f64>>,
}

enum Field {
    Analytic(AnalyticField),
    Empirical(EmpiricalField),
}

/// Source of box-averaged expectations for one family on one horizon.
pub struct MomentSource {
    spec: DistributionSpec,
    horizon: MultiIndex,
    schedule: Vec<MultiIndex>,
    field: Field,
    offsets: OnceLock<Result<Vec<Vec<usize>>>>,
}

impl MomentSource {
    /// Chooses closed forms when `spec.moment_mode` is analytic and the
    /// family supports them, Monte Carlo over `reps` replications otherwise.
    pub fn new(
        spec: &DistributionSpec,
        horizon: &MultiIndex,
        schedule: &[MultiIndex],
        reps: usize,
        seed: u64,
    ) -> Result<Self> {
        if schedule.is_empty() {
            return Err(invalid("schedule must contain at least one box"));
        }
        for n in schedule {
            if !n.leq(horizon)? {
                return Err(invalid(format!("schedule box {n} exceeds horizon {horizon}")));
            }
        }
        let field = match spec.moment_mode {
            MomentMode::Analytic => match analytic_field(spec, horizon) {
                Ok(f) => Field::Analytic(f),
                Err(Error::Unsupported(_)) => Field::Empirical(empirical_field(spec, horizon, reps, seed)?),
                Err(e) => return Err(e),
            },
            MomentMode::Empirical => Field::Empirical(empirical_field(spec, horizon, reps, seed)?),
        };
        Ok(Self {
            spec: spec.clone(),
            horizon: horizon.clone(),
            schedule: schedule.to_vec(),
            field,
            offsets: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn horizon(&self) -> &MultiIndex {
        &self.horizon
    }

    pub fn schedule(&self) -> &[MultiIndex] {
        &self.schedule
    }

    pub fn mode(&self) -> MomentMode {
        match self.field {
            Field::Analytic(_) => MomentMode::Analytic,
            Field::Empirical(_) => MomentMode::Empirical,
        }
    }

    pub fn reps(&self) -> usize {
        match &self.field {
            Field::Analytic(_) => 0,
            Field::Empirical(e) => e.reps,
        }
    }

    /// True for empirical sources with fewer than [`MIN_RELIABLE_REPS`] replications.
    pub fn low_reps_warning(&self) -> bool {
        matches!(&self.field, Field::Empirical(e) if e.reps < MIN_RELIABLE_REPS)
    }

    /// Largest norm the horizon can exhibit: the essential supremum over its
    /// cells (analytic) or the largest observed norm (empirical).
    pub fn norm_witness(&self) -> f64 {
        match &self.field {
            Field::Analytic(a) => {
                let covered = a.exceptions.len() as u64 == self.horizon.size();
                let base = match (a.default, covered) {
                    (Some(l), false) => l.ess_sup(),
                    _ => 0.0,
                };
                a.exceptions.iter().map(|(_, _, l)| l.ess_sup()).fold(base, f64::max)
            }
            Field::Empirical(e) => e.norms.iter().flatten().copied().fold(0.0, f64::max),
        }
    }

    /// Whether a truncation level on `||X||` is informative at this horizon.
    ///
    /// A level at or above every norm the horizon can show makes all tails
    /// vanish trivially; unless the family is bounded by that witness, larger
    /// boxes could still have non-vanishing tails, so such a level cannot be
    /// certified here.
    pub fn resolvable(&self, norm_level: f64) -> bool {
        let witness = self.norm_witness();
        norm_level < witness || self.spec.global_norm_bound().is_some_and(|g| g <= witness)
    }

    fn offsets(&self) -> Result<&Vec<Vec<usize>>> {
        self.offsets
            .get_or_init(|| {
                self.schedule
                    .iter()
                    .map(|n| sub_box_offsets(&self.horizon, n))
                    .collect()
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Per-box estimates of `(1/|n|) Σ_{i ≺ n} E f(||X_i||)` for a functional
    /// that does not depend on the cell.
    pub fn box_means(
        &self,
        analytic: impl Fn(&NormLaw) -> Result<f64>,
        sample: impl Fn(f64) -> Result<f64> + Sync,
    ) -> Result<Vec<(f64, f64)>> {
        match &self.field {
            Field::Analytic(a) => {
                let default_value = a.default.as_ref().map(&analytic).transpose()?;
                let exc: Vec<f64> = a.exceptions.iter().map(|(_, _, l)| analytic(l)).collect::<Result<_>>()?;
                self.schedule
                    .iter()
                    .map(|n| {
                        let mut sum = 0.0;
                        let mut hits = 0u64;
                        for ((_, cell, _), v) in a.exceptions.iter().zip(&exc) {
                            if cell.leq(n)? {
                                sum += v;
                                hits += 1;
                            }
                        }
                        let rest = n.size() - hits;
                        if rest > 0 {
                            let d = default_value.ok_or_else(|| invalid("analytic field has uncovered cells"))?;
                            sum += rest as f64 * d;
                        }
                        Ok((sum / n.size() as f64, 0.0))
                    })
                    .collect()
            }
            Field::Empirical(e) => {
                let values: Vec<Vec<f64>> = e
                    .norms
                    .iter()
                    .map(|row| row.iter().map(|&r| sample(r)).collect::<Result<_>>())
                    .collect::<Result<_>>()?;
                self.empirical_box_means(&values)
            }
        }
    }

    /// As [`MomentSource::box_means`] for functionals that depend on the cell
    /// (given as its offset in the horizon). Requires a dense horizon.
    pub fn box_means_cellwise(
        &self,
        analytic: impl Fn(usize, &NormLaw) -> Result<f64>,
        sample: impl Fn(usize, f64) -> Result<f64> + Sync,
    ) -> Result<Vec<(f64, f64)>> {
        match &self.field {
            Field::Analytic(a) => {
                let laws = a.dense_laws(&self.horizon)?;
                let values: Vec<f64> = laws.iter().enumerate().map(|(o, l)| analytic(o, l)).collect::<Result<_>>()?;
                self.offsets()?
                    .iter()
                    .map(|offs| Ok((offs.iter().map(|&o| values[o]).sum::<f64>() / offs.len() as f64, 0.0)))
                    .collect()
            }
            Field::Empirical(e) => {
                let values: Vec<Vec<f64>> = e
                    .norms
                    .iter()
                    .map(|row| row.iter().enumerate().map(|(o, &r)| sample(o, r)).collect::<Result<_>>())
                    .collect::<Result<_>>()?;
                self.empirical_box_means(&values)
            }
        }
    }

    fn empirical_box_means(&self, values: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        let offsets = self.offsets()?;
        let reps = values.len();
        let per_rep: Vec<Vec<f64>> = values
            .iter()
            .map(|row| {
                offsets
                    .iter()
                    .map(|offs| offs.iter().map(|&o| row[o]).sum::<f64>() / offs.len() as f64)
                    .collect()
            })
            .collect();
        Ok((0..offsets.len())
            .map(|b| mean_and_stderr(per_rep.iter().map(|r| r[b]), reps))
            .collect())
    }

    /// Schedule supremum of a cell-independent functional.
    pub fn sup(
        &self,
        analytic: impl Fn(&NormLaw) -> Result<f64>,
        sample: impl Fn(f64) -> Result<f64> + Sync,
    ) -> Result<Estimate> {
        Ok(sup_of(&self.box_means(analytic, sample)?))
    }

    /// Schedule supremum of a cell-dependent functional.
    pub fn sup_cellwise(
        &self,
        analytic: impl Fn(usize, &NormLaw) -> Result<f64>,
        sample: impl Fn(usize, f64) -> Result<f64> + Sync,
    ) -> Result<Estimate> {
        Ok(sup_of(&self.box_means_cellwise(analytic, sample)?))
    }

    /// Per-cell `E f(||X_i||)` over the dense horizon, in box order.
    pub fn cell_means(
        &self,
        analytic: impl Fn(&NormLaw) -> Result<f64>,
        sample: impl Fn(f64) -> Result<f64>,
    ) -> Result<Vec<f64>> {
        match &self.field {
            Field::Analytic(a) => a.dense_laws(&self.horizon)?.iter().map(analytic).collect(),
            Field::Empirical(e) => {
                let cells = e.norms.first().map_or(0, Vec::len);
                let mut acc = vec![0.0; cells];
                for row in &e.norms {
                    for (a, &r) in acc.iter_mut().zip(row) {
                        *a += sample(r)?;
                    }
                }
                Ok(acc.into_iter().map(|s| s / e.reps as f64).collect())
            }
        }
    }
}

fn sup_of(boxes: &[(f64, f64)]) -> Estimate {
    let mut best = Estimate { value: f64::NEG_INFINITY, stderr: 0.0, argmax: 0 };
    for (k, &(value, stderr)) in boxes.iter().enumerate() {
        if value > best.value || (value.is_nan() && !best.value.is_nan()) {
            best = Estimate { value, stderr, argmax: k };
        }
    }
    best
}

pub(crate) fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl AnalyticField {
    fn dense_laws(&self, horizon: &MultiIndex) -> Result<&Vec<NormLaw>> {
        self.dense
            .get_or_init(|| {
                let len = horizon.dense_len()?;
                let mut laws = match self.default {
                    Some(l) => vec![l; len],
                    None if self.exceptions.len() == len => vec![NormLaw::Point(0.0); len],
                    None => return Err(invalid("analytic field has uncovered cells")),
                };
                for (o, _, l) in &self.exceptions {
                    laws[*o] = *l;
                }
                Ok(laws)
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn analytic_field(spec: &DistributionSpec, horizon: &MultiIndex) -> Result<AnalyticField> {
    let unit = MultiIndex::unit(horizon.dim());
    let (default, cells): (Option<NormLaw>, Vec<MultiIndex>) = match spec.family {
        Family::IidGaussian { .. } => {
            return Err(Error::Unsupported("iid_gaussian has no closed-form norm law".into()))
        }
        Family::ParetoRadial { .. } | Family::PairwiseRademacher { .. } | Family::Constant { .. } => {
            (Some(spec.norm_law(&unit)?), Vec::new())
        }
        Family::SpikedCui { gap, bulk } => (Some(NormLaw::Point(bulk.abs())), spike_cells(horizon, gap)),
        Family::GrowingNonCui { .. } => {
            horizon.dense_len()?;
            (None, box_iter(horizon).collect())
        }
    };
    let exceptions = cells
        .into_iter()
        .map(|c| Ok((horizon.offset_of(&c)?, spec.norm_law(&c)?, c)))
        .map(|r: Result<_>| r.map(|(o, l, c)| (o, c, l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalyticField { default, exceptions, dense: OnceLock::new() })
}

fn empirical_field(spec: &DistributionSpec, horizon: &MultiIndex, reps: usize, seed: u64) -> Result<EmpiricalField> {
    if reps == 0 {
        return Err(invalid("empirical estimation needs at least one replication"));
    }
    horizon.dense_len()?;
    let norms = map_indexed(reps, |r| {
        sample_array(spec, horizon, replication_seed(seed, r as u64)).map(|s| s.norms())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalField { reps, norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Indicator;

    fn mi(c: &[u64]) -> MultiIndex {
        MultiIndex::new(c.to_vec()).unwrap()
    }

    #[test]
    fn pow2_schedule_covers_horizon() {
        let s = pow2_schedule(&mi(&[10]));
        let sizes: Vec<u64> = s.iter().map(MultiIndex::size).collect();
        assert_eq!(sizes, vec![1, 2, 4, 8, 10]);
        assert_eq!(pow2_schedule(&mi(&[4, 3])).len(), 9);
    }

    #[test]
    fn doubling_schedule_sizes() {
        for d in 1..=3 {
            let s = doubling_schedule(d, 4, 12).unwrap();
            let sizes: Vec<u64> = s.iter().map(MultiIndex::size).collect();
            assert_eq!(sizes, (4..=12).map(|e| 1u64 << e).collect::<Vec<_>>());
            assert!(s.iter().all(|n| n.dim() == d));
        }
        assert_eq!(doubling_schedule(2, 4, 12).unwrap().last().unwrap(), &mi(&[64, 64]));
        assert!(doubling_schedule(1, 5, 4).is_err());
    }

    #[test]
    fn sparse_and_dense_analytic_paths_agree() {
        let spec = DistributionSpec::spiked();
        let h = mi(&[32, 16]);
        let src = MomentSource::new(&spec, &h, &pow2_schedule(&h), 1, 0).unwrap();
        let f = |l: &NormLaw| Ok(l.tail_moment(1.0, 1.5, Indicator::Strict));
        let sparse = src.box_means(f, |_| unreachable!()).unwrap();
        let dense = src.box_means_cellwise(|_, l| f(l), |_, _| unreachable!()).unwrap();
        for (a, b) in sparse.iter().zip(&dense) {
            assert!((a.0 - b.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_matches_analytic_for_pareto() {
        let h = mi(&[64]);
        let sched = pow2_schedule(&h);
        let analytic = MomentSource::new(&DistributionSpec::pareto(3.0), &h, &sched, 1, 0).unwrap();
        let spec_e = DistributionSpec::pareto(3.0).with_mode(MomentMode::Empirical);
        let empirical = MomentSource::new(&spec_e, &h, &sched, 2000, 5).unwrap();
        let a = analytic.box_means(|l| Ok(l.tail_moment(1.0, 2.0, Indicator::Strict)), |_| unreachable!()).unwrap();
        let e = empirical
            .box_means(|_| unreachable!(), |r| Ok(if r > 2.0 { r } else { 0.0 }))
            .unwrap();
        for ((va, _), (ve, se)) in a.iter().zip(&e) {
            assert!((va - ve).abs() < 4.0 * se, "{va} vs {ve} ± {se}");
        }
    }

    #[test]
    fn witness_and_resolvability() {
        let h = mi(&[100]);
        let g = MomentSource::new(&DistributionSpec::growing(0.5), &h, &pow2_schedule(&h), 1, 0).unwrap();
        assert_eq!(g.norm_witness(), 10.0);
        assert!(g.resolvable(9.5));
        assert!(!g.resolvable(10.0));
        let c = MomentSource::new(&DistributionSpec::constant(1.0), &h, &pow2_schedule(&h), 1, 0).unwrap();
        assert!(c.resolvable(5.0));
        let p = MomentSource::new(&DistributionSpec::pareto(3.0), &h, &pow2_schedule(&h), 1, 0).unwrap();
        assert!(p.resolvable(1e9));
    }

    #[test]
    fn schedule_must_fit_horizon() {
        let h = mi(&[4]);
        assert!(MomentSource::new(&DistributionSpec::zero(), &h, &[mi(&[8])], 1, 0).is_err());
        assert!(MomentSource::new(&DistributionSpec::zero(), &h, &[], 1, 0).is_err());
    }
}
