//! Monte Carlo experiments for the maximal partial sums `M_n`.
//!
//! Each replication samples the array once on the horizon of the schedule,
//! sums it once, and reads every nested box off the same prefix sums.
//! Replications may run in parallel; reductions are always taken in
//! replication order, so results do not depend on scheduling.

use serde::{Deserialize, Serialize};

use crate::distributions::{sample_array, DistributionSpec};
use crate::error::{invalid, Result};
use crate::lattice::{box_iter, max_prefix_norm_within, prefix_sums_in_place, sub_box_offsets, LatticeSample, MultiIndex};
use crate::moments::{horizon_of, mean_and_stderr, MIN_RELIABLE_REPS};
use crate::par::map_indexed;
use crate::rng::replication_seed;

/// Largest horizon (in cells) an experiment may span.
pub const MAX_HORIZON_CELLS: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub eps: f64,
    pub a: f64,
    /// Maximal inequality constant, used in centered mode.
    #[serde(default, rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: DistributionSpec,
    pub p: f64,
    pub n_schedule: Vec<MultiIndex>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub center: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_params: Option<BoundParams>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<MultiIndex> {
        if self.center {
            if self.p != 1.0 {
                return Err(invalid("centered experiments use p = 1"));
            }
        } else if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid(format!("p = {} outside (0, 1)", self.p)));
        }
        if self.reps == 0 {
            return Err(invalid("reps must be positive"));
        }
        let d = self.n_schedule.first().ok_or_else(|| invalid("empty schedule"))?.dim();
        if self.n_schedule.iter().any(|n| n.dim() != d) {
            return Err(invalid("schedule boxes differ in dimension"));
        }
        if self.n_schedule.windows(2).any(|w| w[0].size() >= w[1].size()) {
            return Err(invalid("schedule must be strictly increasing in |n|"));
        }
        let horizon = horizon_of(&self.n_schedule)?;
        if horizon.size() > MAX_HORIZON_CELLS {
            return Err(invalid(format!(
                "schedule spans horizon {horizon} with more than {MAX_HORIZON_CELLS} cells"
            )));
        }
        if let Some(b) = &self.bound_params {
            if !(b.eps >= 0.0 && b.a > 0.0) || b.c.is_some_and(|c| !(c > 0.0)) {
                return Err(invalid("bound parameters need eps ≥ 0, a > 0, C > 0"));
            }
        }
        Ok(horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    Lp,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    Analytic,
    PlugIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: MultiIndex,
    pub size: u64,
    pub moment: f64,
    pub stderr: f64,
    pub bound: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub mode: SeriesMode,
    pub family: String,
    pub p: f64,
    pub reps: usize,
    pub seed: u64,
    pub centering: Option<Centering>,
    /// The family is not pairwise independent, so the centered L_1 result
    /// does not apply.
    pub hypothesis_warning: bool,
    pub low_reps_warning: bool,
    pub points: Vec<SeriesPoint>,
}

impl ConvergenceSeries {
    /// CSV with columns `d,n_coords,size,moment,stderr,bound,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,n_coords,size,moment,stderr,bound,pass\n");
        for pt in &self.points {
            let bound = pt.bound.map(|b| b.to_string()).unwrap_or_default();
            let pass = pt.pass.map(|b| b.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{bound},{pass}\n",
                pt.n.dim(),
                pt.n,
                pt.size,
                pt.moment,
                pt.stderr
            ));
        }
        out
    }
}

/// `ε + a^p / |n|^{1-p}`.
pub fn lp_bound(eps: f64, a: f64, p: f64, n: &MultiIndex) -> Result<f64> {
    if !(eps >= 0.0 && a > 0.0 && p > 0.0 && p < 1.0) {
        return Err(invalid("need eps ≥ 0, a > 0 and 0 < p < 1"));
    }
    Ok(eps + a.powf(p) / (n.size() as f64).powf(1.0 - p))
}

/// `2 a C Π ln(2 n_i) / |n|^{1/2}`.
pub fn l1_bound(a: f64, c: f64, n: &MultiIndex) -> Result<f64> {
    if !(a > 0.0 && c > 0.0) {
        return Err(invalid("need a > 0 and C > 0"));
    }
    let logs: f64 = n.coords().iter().map(|&k| (2.0 * k as f64).ln()).product();
    Ok(2.0 * a * c * logs / (n.size() as f64).sqrt())
}

/// `Π ln²(2 n_i)`.
fn log_square_product(n: &MultiIndex) -> f64 {
    n.coords().iter().map(|&k| (2.0 * k as f64).ln().powi(2)).product()
}

struct Layout {
    horizon: MultiIndex,
    offsets: Vec<Vec<usize>>,
}

fn layout(schedule: &[MultiIndex], horizon: MultiIndex) -> Result<Layout> {
    let offsets = schedule.iter().map(|n| sub_box_offsets(&horizon, n)).collect::<Result<_>>()?;
    Ok(Layout { horizon, offsets })
}

/// Per replication, `M_n` for every schedule box, after `prep` adjusts the
/// sample in place.
fn maxima(
    spec: &DistributionSpec,
    lay: &Layout,
    reps: usize,
    seed: u64,
    prep: impl Fn(&mut LatticeSample) + Sync + Send,
) -> Result<Vec<Vec<f64>>> {
    map_indexed(reps, |r| {
        let mut s = sample_array(spec, &lay.horizon, replication_seed(seed, r as u64))?;
        prep(&mut s);
        prefix_sums_in_place(&mut s);
        Ok(lay.offsets.iter().map(|offs| max_prefix_norm_within(&s, offs)).collect())
    })
    .into_iter()
    .collect()
}

fn reduce(per_rep: &[Vec<f64>], schedule: &[MultiIndex], f: impl Fn(f64, &MultiIndex) -> f64) -> Vec<(f64, f64)> {
    schedule
        .iter()
        .enumerate()
        .map(|(b, n)| {
            let vals: Vec<f64> = per_rep.iter().map(|row| f(row[b], n)).collect();
            mean_and_stderr(vals.iter().copied(), vals.len())
        })
        .collect()
}

/// `E (M_n / |n|^{1/p})^p` along the schedule.
pub fn run_lp_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceSeries> {
    if cfg.center {
        return Err(invalid("run_lp_experiment needs an uncentered config"));
    }
    let horizon = cfg.validate()?;
    let lay = layout(&cfg.n_schedule, horizon)?;
    let per_rep = maxima(&cfg.spec, &lay, cfg.reps, cfg.seed, |_| {})?;
    let p = cfg.p;
    let stats = reduce(&per_rep, &cfg.n_schedule, |m, n| m.powf(p) / n.size() as f64);
    let bound = |n: &MultiIndex| cfg.bound_params.map(|b| lp_bound(b.eps, b.a, p, n)).transpose();
    series(cfg, SeriesMode::Lp, None, stats, bound)
}

/// `E max_k ||Σ_{i ≺ k} (X_i - E X_i)|| / |n|` along the schedule.
pub fn run_l1_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceSeries> {
    if !cfg.center {
        return Err(invalid("run_l1_experiment needs a centered config"));
    }
    let horizon = cfg.validate()?;
    let (mean, centering) = cell_means(&cfg.spec, &horizon, cfg.reps, cfg.seed)?;
    let lay = layout(&cfg.n_schedule, horizon)?;
    let per_rep = maxima(&cfg.spec, &lay, cfg.reps, cfg.seed, |s| {
        let centered = s.add(&mean).expect("same box and dimension");
        *s = centered;
    })?;
    let stats = reduce(&per_rep, &cfg.n_schedule, |m, n| m / n.size() as f64);
    let bound = |n: &MultiIndex| {
        cfg.bound_params
            .map(|b| {
                let c = b.c.ok_or_else(|| invalid("centered bounds need C"))?;
                Ok(b.eps + l1_bound(b.a, c, n)?)
            })
            .transpose()
    };
    series(cfg, SeriesMode::L1, Some(centering), stats, bound)
}

/// Negated cell means: analytic where every cell has one, otherwise the
/// grand mean over the replications.
fn cell_means(spec: &DistributionSpec, horizon: &MultiIndex, reps: usize, seed: u64) -> Result<(LatticeSample, Centering)> {
    let analytic: Option<Vec<_>> = box_iter(horizon).map(|c| spec.analytic_mean(&c)).collect();
    if let Some(cells) = analytic {
        let mean = LatticeSample::from_cells(horizon.clone(), cells)?;
        return Ok((mean.scale(-1.0), Centering::Analytic));
    }
    let mut acc = LatticeSample::zeros(horizon.clone(), spec.dim)?;
    for r in 0..reps {
        acc = acc.add(&sample_array(spec, horizon, replication_seed(seed, r as u64))?)?;
    }
    Ok((acc.scale(-1.0 / reps as f64), Centering::PlugIn))
}

fn series(
    cfg: &ExperimentConfig,
    mode: SeriesMode,
    centering: Option<Centering>,
    stats: Vec<(f64, f64)>,
    bound: impl Fn(&MultiIndex) -> Result<Option<f64>>,
) -> Result<ConvergenceSeries> {
    let points = cfg
        .n_schedule
        .iter()
        .zip(stats)
        .map(|(n, (moment, stderr))| {
            let bound = bound(n)?;
            Ok(SeriesPoint {
                n: n.clone(),
                size: n.size(),
                moment,
                stderr,
                bound,
                pass: bound.map(|b| moment <= b + 3.0 * stderr),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceSeries {
        mode,
        family: cfg.spec.family.name().to_string(),
        p: cfg.p,
        reps: cfg.reps,
        seed: cfg.seed,
        centering,
        hypothesis_warning: mode == SeriesMode::L1 && !cfg.spec.pairwise_independent(),
        low_reps_warning: cfg.reps < MIN_RELIABLE_REPS,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoriczPoint {
    pub n: MultiIndex,
    pub size: u64,
    /// `E max_k ||S_k||^2`.
    pub numerator: f64,
    pub numerator_stderr: f64,
    /// `Π ln²(2 n_i) Σ_{i ≺ n} E ||X_i||^2`.
    pub denominator: f64,
    pub ratio: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoriczReport {
    pub family: String,
    pub reps: usize,
    pub points: Vec<MoriczPoint>,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// Ratio of `E max_k ||S_k||^2` to the maximal inequality's right-hand side
/// without its constant, for zero-mean families.
pub fn moricz_ratio(spec: &DistributionSpec, schedule: &[MultiIndex], reps: usize, seed: u64) -> Result<MoriczReport> {
    if !spec.is_zero_mean() {
        return Err(invalid(format!("{} is not zero mean", spec.family.name())));
    }
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    let horizon = horizon_of(schedule)?;
    if horizon.size() > MAX_HORIZON_CELLS {
        return Err(invalid("schedule horizon too large"));
    }
    let lay = layout(schedule, horizon)?;
    let per_rep = maxima(spec, &lay, reps, seed, |_| {})?;
    let stats = reduce(&per_rep, schedule, |m, _| m * m);
    let mut points = Vec::with_capacity(schedule.len());
    for (n, (num, se)) in schedule.iter().zip(stats) {
        let mut second = 0.0;
        for cell in box_iter(n) {
            second += spec
                .second_moment(&cell)
                .ok_or_else(|| invalid("second moment unavailable"))?;
        }
        let denominator = log_square_product(n) * second;
        if !(denominator > 0.0) {
            return Err(invalid(format!("zero denominator at {n}")));
        }
        points.push(MoriczPoint {
            n: n.clone(),
            size: n.size(),
            numerator: num,
            numerator_stderr: se,
            denominator,
            ratio: num / denominator,
            stderr: se / denominator,
        });
    }
    let max_ratio = points.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    Ok(MoriczReport { family: spec.family.name().to_string(), reps, points, max_ratio, min_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub first: f64,
    pub first_stderr: f64,
    pub last: f64,
    pub last_stderr: f64,
    /// Least-squares slope of `ln(moment)` against `ln |n|`.
    pub slope: f64,
    pub drop_ok: bool,
    pub slope_ok: bool,
    pub pass: bool,
}

/// Passes when the last moment is below half the first, beyond two standard
/// errors on each side, and the log-log slope is negative.
pub fn trend_test(series: &ConvergenceSeries) -> Result<TrendVerdict> {
    let pts = &series.points;
    if pts.len() < 4 {
        return Err(invalid("trend test needs at least 4 points"));
    }
    let (f, l) = (&pts[0], &pts[pts.len() - 1]);
    let drop_ok = l.moment + 2.0 * l.stderr < (f.moment - 2.0 * f.stderr) / 2.0;
    let xs: Vec<f64> = pts.iter().map(|p| (p.size as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.moment.ln()).collect();
    let slope = ols_slope(&xs, &ys);
    let slope_ok = slope < 0.0;
    Ok(TrendVerdict {
        first: f.moment,
        first_stderr: f.stderr,
        last: l.moment,
        last_stderr: l.stderr,
        slope,
        drop_ok,
        slope_ok,
        pass: drop_ok && slope_ok,
    })
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationPoint {
    pub n: MultiIndex,
    pub moment: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub points: Vec<DominationPoint>,
    pub pass: bool,
}

/// Moment `≤ bound + 3 stderr` at every point, with the bound recomputed
/// from `cfg.bound_params`.
pub fn bound_domination_check(cfg: &ExperimentConfig, series: &ConvergenceSeries) -> Result<DominationReport> {
    let b = cfg.bound_params.ok_or_else(|| invalid("config has no bound parameters"))?;
    let points: Vec<DominationPoint> = series
        .points
        .iter()
        .map(|pt| {
            let bound = match series.mode {
                SeriesMode::Lp => lp_bound(b.eps, b.a, series.p, &pt.n)?,
                SeriesMode::L1 => b.eps + l1_bound(b.a, b.c.ok_or_else(|| invalid("centered bounds need C"))?, &pt.n)?,
            };
            Ok(DominationPoint {
                n: pt.n.clone(),
                moment: pt.moment,
                stderr: pt.stderr,
                bound,
                pass: pt.moment <= bound + 3.0 * pt.stderr,
            })
        })
        .collect::<Result<_>>()?;
    let pass = points.iter().all(|p| p.pass);
    Ok(DominationReport { points, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cui::{cui_certificate, default_level_grid};
    use crate::moments::{doubling_schedule, pow2_schedule, MomentSource};

    fn mi(c: &[u64]) -> MultiIndex {
        MultiIndex::new(c.to_vec()).unwrap()
    }

    fn cfg(spec: DistributionSpec, p: f64, schedule: Vec<MultiIndex>, reps: usize, center: bool) -> ExperimentConfig {
        ExperimentConfig { spec, p, n_schedule: schedule, reps, seed: 7, center, bound_params: None }
    }

    fn line(sizes: &[u64]) -> Vec<MultiIndex> {
        sizes.iter().map(|&n| mi(&[n])).collect()
    }

    /// `E max_k |S_k|^q` over all `2^n` sign patterns.
    fn exhaustive_sign_max(n: u32, q: i32) -> f64 {
        let mut total = 0.0;
        for bits in 0u32..(1 << n) {
            let mut s = 0i64;
            let mut m = 0i64;
            for k in 0..n {
                s += if bits >> k & 1 == 1 { 1 } else { -1 };
                m = m.max(s.abs());
            }
            total += (m as f64).powi(q);
        }
        total / f64::from(1u32 << n)
    }

    #[test]
    fn zero_and_constant_lp() {
        let z = run_lp_experiment(&cfg(DistributionSpec::zero(), 0.5, line(&[1, 2, 4]), 3, false)).unwrap();
        assert!(z.points.iter().all(|p| p.moment == 0.0 && p.stderr == 0.0));
        let c = run_lp_experiment(&cfg(DistributionSpec::constant(1.0), 0.5, line(&[1, 2, 4, 8, 16]), 3, false)).unwrap();
        for pt in &c.points {
            assert!((pt.moment - (pt.size as f64).powf(-0.5)).abs() < 1e-12);
        }
        assert!((c.points[4].moment - 0.25).abs() < 1e-12);
    }

    #[test]
    fn deterministic_families_center_to_zero() {
        for spec in [DistributionSpec::constant(3.0), DistributionSpec::spiked(), DistributionSpec::growing(0.5)] {
            let s = run_l1_experiment(&cfg(spec, 1.0, line(&[2, 4, 8, 16]), 5, true)).unwrap();
            assert_eq!(s.centering, Some(Centering::Analytic));
            assert!(s.points.iter().all(|p| p.moment == 0.0));
        }
    }

    #[test]
    fn two_signs_l1_matches_enumeration() {
        let exact = exhaustive_sign_max(2, 1) / 2.0;
        assert_eq!(exact, 0.75);
        let s = run_l1_experiment(&cfg(DistributionSpec::rademacher(1), 1.0, line(&[1, 2]), 4000, true)).unwrap();
        let pt = &s.points[1];
        assert!((pt.moment - exact).abs() < 3.0 * pt.stderr, "{pt:?}");
    }

    #[test]
    fn plug_in_centering_for_heavy_pareto() {
        let spec = DistributionSpec::pareto(0.9);
        let s = run_l1_experiment(&cfg(spec, 1.0, line(&[2, 4, 8, 16]), 50, true)).unwrap();
        assert_eq!(s.centering, Some(Centering::PlugIn));
        assert!(s.points.iter().all(|p| p.moment.is_finite() && p.moment >= 0.0));
    }

    #[test]
    fn bound_examples() {
        assert!((lp_bound(0.1, 2.0, 0.5, &mi(&[100])).unwrap() - (0.1 + 2f64.sqrt() / 10.0)).abs() < 1e-12);
        assert!((lp_bound(0.1, 2.0, 0.5, &mi(&[100])).unwrap() - 0.24142).abs() < 1e-5);
        let vals: Vec<f64> = [10u64, 100, 1000, 10_000].iter().map(|&n| lp_bound(0.1, 2.0, 0.5, &mi(&[n])).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]) && vals[3] > 0.1);
        assert!(lp_bound(0.1, 0.0, 0.5, &mi(&[4])).is_err());
        assert!(lp_bound(0.1, 1.0, 1.0, &mi(&[4])).is_err());

        let b = l1_bound(1.0, 1.0, &mi(&[10, 10])).unwrap();
        assert!((b - 2.0 * 20f64.ln().powi(2) / 10.0).abs() < 1e-12);
        assert!((b - 1.7949).abs() < 1e-4);
        let along: Vec<f64> = [10u64, 100, 1000].iter().map(|&m| l1_bound(1.0, 1.0, &mi(&[m, m])).unwrap()).collect();
        assert!(along.windows(2).all(|w| w[1] < w[0]));
        assert!((l1_bound(1.5, 2.0, &mi(&[1])).unwrap() - 6.0 * 2f64.ln()).abs() < 1e-12);
        assert!(l1_bound(1.0, 0.0, &mi(&[1])).is_err());
    }

    #[test]
    fn moricz_anchors_match_enumeration() {
        let r1 = 1.0 / 2f64.ln().powi(2);
        let r2 = exhaustive_sign_max(2, 2) / (2.0 * 4f64.ln().powi(2));
        assert!((r1 - 2.0814).abs() < 1e-4);
        assert!((r2 - 0.6505).abs() < 1e-4);
        let rep = moricz_ratio(&DistributionSpec::rademacher(1), &line(&[1, 2, 4, 8]), 2000, 3).unwrap();
        assert!((rep.points[0].ratio - r1).abs() < 1e-12);
        assert_eq!(rep.points[0].stderr, 0.0);
        assert!((rep.points[1].ratio - r2).abs() < 3.0 * rep.points[1].stderr);
        let r8 = exhaustive_sign_max(8, 2) / (8.0 * 16f64.ln().powi(2));
        assert!((rep.points[3].ratio - r8).abs() < 3.0 * rep.points[3].stderr);
        assert_eq!(rep.max_ratio, rep.points[0].ratio);
    }

    #[test]
    fn moricz_rejects_bad_families() {
        assert!(moricz_ratio(&DistributionSpec::zero(), &line(&[1, 2]), 10, 0).is_err());
        assert!(moricz_ratio(&DistributionSpec::constant(1.0), &line(&[1, 2]), 10, 0).is_err());
    }

    #[test]
    fn moricz_bounded_for_signs() {
        for d in [1, 2] {
            let sched = doubling_schedule(d, 0, 10).unwrap();
            let rep = moricz_ratio(&DistributionSpec::rademacher(1), &sched, 200, 9).unwrap();
            assert!(rep.max_ratio <= 10.0, "{rep:?}");
            assert!(rep.min_ratio > 0.0);
        }
    }

    #[test]
    fn trend_examples() {
        let mk = |vals: &[f64]| ConvergenceSeries {
            mode: SeriesMode::Lp,
            family: "x".into(),
            p: 0.5,
            reps: 1,
            seed: 0,
            centering: None,
            hypothesis_warning: false,
            low_reps_warning: true,
            points: vals
                .iter()
                .enumerate()
                .map(|(k, &m)| SeriesPoint { n: mi(&[1 << k]), size: 1 << k, moment: m, stderr: 0.0, bound: None, pass: None })
                .collect(),
        };
        assert!(trend_test(&mk(&[1.0, 0.5, 0.25, 0.125])).unwrap().pass);
        assert!(!trend_test(&mk(&[1.0, 1.0, 1.0, 1.0])).unwrap().pass);
        assert!(!trend_test(&mk(&[1.0, 2.0, 3.0, 4.0])).unwrap().pass);
        assert!(!trend_test(&mk(&[0.0, 0.0, 0.0, 0.0])).unwrap().pass);
        assert!(trend_test(&mk(&[1.0, 0.5, 0.25])).is_err());
    }

    #[test]
    fn gaussian_lp_series_decreases() {
        let sched = doubling_schedule(1, 4, 12).unwrap();
        let s = run_lp_experiment(&cfg(DistributionSpec::gaussian(1.0), 0.5, sched, 200, false)).unwrap();
        assert!(trend_test(&s).unwrap().pass);
    }

    #[test]
    fn linear_growth_is_negative_control() {
        let sched = doubling_schedule(1, 2, 12).unwrap();
        let s = run_lp_experiment(&cfg(DistributionSpec::growing(1.0), 0.5, sched, 2, false)).unwrap();
        for pt in &s.points {
            let n = pt.size as f64;
            // M_n = n(n+1)/2
            let closed = (n * (n + 1.0) / 2.0).sqrt() / n;
            assert!((pt.moment - closed).abs() < 1e-12 * closed);
        }
        assert!(!trend_test(&s).unwrap().pass);
    }

    #[test]
    fn constant_domination() {
        let mut c = cfg(DistributionSpec::constant(1.0), 0.5, line(&[1, 4, 16, 64, 256]), 2, false);
        c.bound_params = Some(BoundParams { eps: 1e-9, a: 1.0, c: None });
        let s = run_lp_experiment(&c).unwrap();
        let r = bound_domination_check(&c, &s).unwrap();
        assert!(r.pass);
        assert!(s.points.iter().all(|p| p.pass == Some(true)));
        let mut z = cfg(DistributionSpec::zero(), 0.5, line(&[1, 4, 16]), 2, false);
        z.bound_params = Some(BoundParams { eps: 0.1, a: 1.0, c: None });
        assert!(bound_domination_check(&z, &run_lp_experiment(&z).unwrap()).unwrap().pass);
    }

    #[test]
    fn pareto_certified_domination() {
        let sched = doubling_schedule(2, 4, 10).unwrap();
        let h = horizon_of(&sched).unwrap();
        let src = MomentSource::new(&DistributionSpec::pareto(3.0), &h, &pow2_schedule(&h), 1, 0).unwrap();
        let eps = 0.1;
        let a = cui_certificate(&src, 0.5, eps, &default_level_grid()).unwrap().unwrap();
        let mut c = cfg(DistributionSpec::pareto(3.0), 0.5, sched, 100, false);
        c.bound_params = Some(BoundParams { eps, a, c: None });
        let s = run_lp_experiment(&c).unwrap();
        assert!(bound_domination_check(&c, &s).unwrap().pass);
    }

    #[test]
    fn runs_are_bit_identical() {
        let c = cfg(DistributionSpec::pareto(3.0), 0.5, doubling_schedule(2, 2, 8).unwrap(), 20, false);
        let a = run_lp_experiment(&c).unwrap();
        let b = run_lp_experiment(&c).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn config_validation_and_json() {
        let good = cfg(DistributionSpec::pareto(3.0), 0.5, line(&[2, 4, 8]), 10, false);
        assert!(good.validate().is_ok());
        let json = serde_json::to_string(&good).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), good);
        assert!(cfg(DistributionSpec::zero(), 1.0, line(&[2, 4]), 1, false).validate().is_err());
        assert!(cfg(DistributionSpec::zero(), 0.5, line(&[2, 4]), 1, true).validate().is_err());
        assert!(cfg(DistributionSpec::zero(), 0.5, line(&[4, 2]), 1, false).validate().is_err());
        assert!(cfg(DistributionSpec::zero(), 0.5, vec![mi(&[2]), mi(&[2, 2])], 1, false).validate().is_err());
        assert!(cfg(DistributionSpec::zero(), 0.5, line(&[2]), 0, false).validate().is_err());
        let with_c = r#"{"spec":{"family":"constant","params":{"value":1.0},"dim_D":1,"moment_mode":"analytic"},
            "p":1.0,"n_schedule":[[2],[4]],"reps":3,"seed":1,"center":true,"bound_params":{"eps":0.0,"a":1.0,"C":0.5}}"#;
        let parsed: ExperimentConfig = serde_json::from_str(with_c).unwrap();
        assert_eq!(parsed.bound_params.unwrap().c, Some(0.5));
    }

    #[test]
    fn csv_layout() {
        let mut c = cfg(DistributionSpec::constant(1.0), 0.5, vec![mi(&[2, 2]), mi(&[4, 2])], 2, false);
        c.bound_params = Some(BoundParams { eps: 0.1, a: 1.0, c: None });
        let csv = run_lp_experiment(&c).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "d,n_coords,size,moment,stderr,bound,pass");
        assert!(lines[1].starts_with("2,2x2,4,0.5,0,"));
        assert!(lines[1].ends_with(",true"));
    }
}
