//! Cesàro uniform integrability: tail suprema, certificates, the moment and
//! event criterion, and the two directions of their equivalence.
//!
//! Two kinds of levels appear here. The truncation level of
//! [`cesaro_tail_sup`] and [`cui_certificate`] is compared against `||X_i||`
//! while the moment is `||X_i||^p`. The criterion functions work on the real
//! array `ξ_i = ||X_i||^p` and compare levels against `ξ_i` itself; for
//! `p = 1` the two coincide.

use serde::{Deserialize, Serialize};

use crate::distributions::{Indicator, MomentMode, NormLaw};
use crate::error::{invalid, Result};
use crate::lattice::{LatticeSample, MultiIndex};
use crate::moments::{Estimate, MomentSource};

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("p = {p} outside (0, 1]")))
    }
}

/// `(Y, Z)` with `Y_i = X_i 1(||X_i|| > a)` and `Z_i = X_i 1(||X_i|| ≤ a)`.
pub fn truncation_split(sample: &LatticeSample, a: f64) -> Result<(LatticeSample, LatticeSample)> {
    if !(a > 0.0) {
        return Err(invalid("truncation level must be positive"));
    }
    let mut big = sample.clone();
    let mut small = sample.clone();
    let norms = sample.norms();
    for (off, r) in norms.into_iter().enumerate() {
        let zeroed = if r > a { small.cell_mut(off) } else { big.cell_mut(off) };
        zeroed.iter_mut().for_each(|x| *x = 0.0);
    }
    Ok((big, small))
}

/// `sup_n (1/|n|) Σ_{i ≺ n} E(||X_i||^p 1(||X_i|| ⋄ a))` over the schedule.
pub fn cesaro_tail_sup(src: &MomentSource, p: f64, a: f64, ind: Indicator) -> Result<Estimate> {
    check_p(p)?;
    if !(a >= 0.0) {
        return Err(invalid("truncation level must be nonnegative"));
    }
    src.sup(
        |law| Ok(law.tail_moment(p, a, ind)),
        |r| Ok(if ind.holds(r, a) { r.powf(p) } else { 0.0 }),
    )
}

/// Tail diagnostics over a grid of truncation levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuiReport {
    pub family: String,
    pub p: f64,
    pub a_grid: Vec<f64>,
    pub tail_sup: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Whether each level lies below what the horizon can witness.
    pub resolvable: Vec<bool>,
    /// `sup_n (1/|n|) Σ E ||X_i||^p`, the criterion (i) value `K`.
    pub mean_sup: f64,
    pub mean_stderr: f64,
    pub horizon: MultiIndex,
    pub schedule_len: usize,
    pub mode: MomentMode,
    pub reps: usize,
    pub low_reps_warning: bool,
}

impl CuiReport {
    /// CSV with columns `a,tail_sup,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,tail_sup,stderr\n");
        for ((a, t), s) in self.a_grid.iter().zip(&self.tail_sup).zip(&self.stderr) {
            out.push_str(&format!("{a},{t},{s}\n"));
        }
        out
    }
}

pub fn cui_report(src: &MomentSource, p: f64, a_grid: &[f64]) -> Result<CuiReport> {
    check_p(p)?;
    let mut tail_sup = Vec::with_capacity(a_grid.len());
    let mut stderr = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let e = cesaro_tail_sup(src, p, a, Indicator::Strict)?;
        tail_sup.push(e.value);
        stderr.push(e.stderr);
    }
    let mean = moment_sup(src, p)?;
    Ok(CuiReport {
        family: src.spec().family.name().to_string(),
        p,
        a_grid: a_grid.to_vec(),
        tail_sup,
        stderr,
        resolvable: a_grid.iter().map(|&a| src.resolvable(a)).collect(),
        mean_sup: mean.value,
        mean_stderr: mean.stderr,
        horizon: src.horizon().clone(),
        schedule_len: src.schedule().len(),
        mode: src.mode(),
        reps: src.reps(),
        low_reps_warning: src.low_reps_warning(),
    })
}

/// Smallest grid level `a` with `sup_n (1/|n|) Σ E(||X_i||^p 1(||X_i|| > a)) < ε`
/// (empirically: estimate `+ 2 stderr < ε`). Levels the horizon cannot
/// witness are skipped.
pub fn cui_certificate(src: &MomentSource, p: f64, eps: f64, a_grid: &[f64]) -> Result<Option<f64>> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    check_grid(a_grid)?;
    for &a in a_grid {
        if !src.resolvable(a) {
            continue;
        }
        if cesaro_tail_sup(src, p, a, Indicator::Strict)?.confidently_below(eps) {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|a| !(*a >= 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("level grid must be nonempty, nonnegative and strictly increasing"));
    }
    Ok(())
}

/// Levels `2^{k/2}` for `k = -8, ..., 40`.
pub fn default_level_grid() -> Vec<f64> {
    (-8..=40).map(|k| 2f64.powf(k as f64 / 2.0)).collect()
}

// --- the real array ξ_i = ||X_i||^p -------------------------------------

fn norm_level(level: f64, p: f64) -> f64 {
    level.powf(1.0 / p)
}

/// `sup_n (1/|n|) Σ E ξ_i`, criterion (i).
pub fn moment_sup(src: &MomentSource, p: f64) -> Result<Estimate> {
    check_p(p)?;
    src.sup(
        |law| Ok(law.tail_moment(p, 0.0, Indicator::AtLeast)),
        |r| Ok(r.powf(p)),
    )
}

/// Criterion (i) value `K = sup_n (1/|n|) Σ_{i ≺ n} E ||X_i||^p`.
pub fn check_criterion_i(src: &MomentSource, p: f64) -> Result<Estimate> {
    moment_sup(src, p)
}

/// `sup_n (1/|n|) Σ E(ξ_i 1(ξ_i ⋄ b))` for a level `b` on `ξ`.
pub fn xi_tail_sup(src: &MomentSource, p: f64, b: f64, ind: Indicator) -> Result<Estimate> {
    cesaro_tail_sup(src, p, norm_level(b, p), ind)
}

fn xi_certificate(src: &MomentSource, p: f64, target: f64, grid: &[f64]) -> Result<Option<f64>> {
    for &b in grid {
        if b <= 0.0 || !src.resolvable(norm_level(b, p)) {
            continue;
        }
        let e = xi_tail_sup(src, p, b, Indicator::Strict)?;
        if e.value + 2.0 * e.stderr <= target {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

/// `δ = ε / (2 a0)`.
pub fn derive_delta(eps: f64, a0: f64) -> Result<f64> {
    if !(eps > 0.0 && a0 > 0.0) {
        return Err(invalid("epsilon and a0 must be positive"));
    }
    Ok(eps / (2.0 * a0))
}

/// Per-cell event `A_i`, expressed through `ξ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventRule {
    Never,
    Always,
    /// `{ξ_i ≥ level}`.
    AtLeast(f64),
}

impl EventRule {
    fn occurs(self, xi: f64) -> bool {
        match self {
            EventRule::Never => false,
            EventRule::Always => true,
            EventRule::AtLeast(level) => xi >= level,
        }
    }

    fn prob(self, law: &NormLaw, p: f64) -> f64 {
        match self {
            EventRule::Never => 0.0,
            EventRule::Always => 1.0,
            EventRule::AtLeast(level) => law.tail_prob(norm_level(level, p), Indicator::AtLeast),
        }
    }

    fn moment(self, law: &NormLaw, p: f64) -> f64 {
        match self {
            EventRule::Never => 0.0,
            EventRule::Always => law.tail_moment(p, 0.0, Indicator::AtLeast),
            EventRule::AtLeast(level) => law.tail_moment(p, norm_level(level, p), Indicator::AtLeast),
        }
    }
}

/// An array of events `{A_i : 1 ≺ i ≺ n}` over a box, one rule per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventArray {
    pub bounds: MultiIndex,
    pub rules: Vec<EventRule>,
}

impl EventArray {
    pub fn uniform(bounds: &MultiIndex, rule: EventRule) -> Result<Self> {
        Ok(Self { bounds: bounds.clone(), rules: vec![rule; bounds.dense_len()?] })
    }

    /// Realized indicators for one sample of the array.
    pub fn realize(&self, sample: &LatticeSample, p: f64) -> Result<Vec<bool>> {
        if sample.bounds() != &self.bounds {
            return Err(invalid("sample box differs from event box"));
        }
        Ok(sample
            .norms()
            .into_iter()
            .zip(&self.rules)
            .map(|(r, rule)| rule.occurs(r.powf(p)))
            .collect())
    }

    /// Per-cell `P(A_i)`, exact or estimated by the source.
    pub fn probabilities(&self, src: &MomentSource, p: f64) -> Result<Vec<f64>> {
        self.check_box(src)?;
        cell_probabilities(src, &self.rules, p)
    }

    fn check_box(&self, src: &MomentSource) -> Result<()> {
        if &self.bounds != src.horizon() {
            return Err(invalid(format!(
                "event box {} differs from horizon {}",
                self.bounds,
                src.horizon()
            )));
        }
        Ok(())
    }
}

fn cell_probabilities(src: &MomentSource, rules: &[EventRule], p: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rules.len()];
    let mut distinct: Vec<EventRule> = Vec::new();
    for r in rules {
        if !distinct.contains(r) {
            distinct.push(*r);
        }
    }
    for rule in distinct {
        let means = src.cell_means(
            |law| Ok(rule.prob(law, p)),
            |r| Ok(f64::from(u8::from(rule.occurs(r.powf(p))))),
        )?;
        for (o, r) in rules.iter().enumerate() {
            if *r == rule {
                out[o] = means[o];
            }
        }
    }
    Ok(out)
}

/// `A_i = {ξ_i ≥ K/δ}` on every cell.
///
/// By Markov's inequality the Cesàro averages of `P(A_i)` are at most `δ`
/// whenever `K` bounds the Cesàro averages of `E ξ_i`. When `K = 0` every
/// `ξ_i` vanishes almost surely and the smallest positive threshold is used.
pub fn markov_event_array(bounds: &MultiIndex, k: f64, delta: f64) -> Result<EventArray> {
    if !(k >= 0.0 && delta > 0.0) {
        return Err(invalid("K must be nonnegative and delta positive"));
    }
    let threshold = if k > 0.0 { k / delta } else { f64::MIN_POSITIVE };
    EventArray::uniform(bounds, EventRule::AtLeast(threshold))
}

/// Full events on the cells of largest `E ξ_i`, added greedily while every
/// schedule box keeps its average event probability below `δ`.
pub fn greedy_event_array(src: &MomentSource, p: f64, delta: f64) -> Result<EventArray> {
    check_p(p)?;
    let horizon = src.horizon();
    let scores = src.cell_means(
        |law| Ok(law.tail_moment(p, 0.0, Indicator::AtLeast)),
        |r| Ok(r.powf(p)),
    )?;
    let mut order: Vec<usize> = (0..scores.len()).filter(|&o| scores[o] > 0.0).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let boxes = src.schedule();
    let mut counts = vec![0u64; boxes.len()];
    let mut rules = vec![EventRule::Never; scores.len()];
    for o in order {
        let cell = horizon.cell_at(o);
        let containing: Vec<usize> = boxes
            .iter()
            .enumerate()
            .filter(|(_, n)| cell.leq(n).unwrap_or(false))
            .map(|(b, _)| b)
            .collect();
        let fits = containing
            .iter()
            .all(|&b| ((counts[b] + 1) as f64) / (boxes[b].size() as f64) < delta);
        if fits {
            for &b in &containing {
                counts[b] += 1;
            }
            rules[o] = EventRule::Always;
        }
    }
    Ok(EventArray { bounds: horizon.clone(), rules })
}

/// `A_i = {ξ_i ≥ L}` with `L` the (bisected) smallest common level whose
/// event-probability supremum stays below `δ`: events concentrated on the
/// largest values.
pub fn tail_event_array(src: &MomentSource, p: f64, delta: f64) -> Result<EventArray> {
    check_p(p)?;
    if !(delta > 0.0) {
        return Err(invalid("delta must be positive"));
    }
    let prob_sup = |level: f64| -> Result<f64> {
        let b = norm_level(level, p);
        Ok(src
            .sup(
                |law| Ok(law.tail_prob(b, Indicator::AtLeast)),
                |r| Ok(f64::from(u8::from(r >= b))),
            )?
            .value)
    };
    let mut hi = src.norm_witness().powf(p).max(1.0);
    if !hi.is_finite() {
        hi = 1.0;
    }
    let mut guard = 0;
    while prob_sup(hi)? >= delta {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(invalid("no level brings event probabilities below delta"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if prob_sup(mid)? < delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    EventArray::uniform(src.horizon(), EventRule::AtLeast(hi))
}

/// Outcome of testing "event averages `< δ` ⇒ truncated moment averages `< ε`".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCheck {
    pub delta: f64,
    pub eps: f64,
    pub prob_sup: Estimate,
    pub moment_sup: Estimate,
    pub premise: bool,
    pub conclusion: bool,
    pub verdict: bool,
}

pub fn check_event_criterion(
    src: &MomentSource,
    p: f64,
    events: &EventArray,
    delta: f64,
    eps: f64,
) -> Result<EventCheck> {
    check_p(p)?;
    events.check_box(src)?;
    let rules = &events.rules;
    let prob_sup = src.sup_cellwise(
        |o, law| Ok(rules[o].prob(law, p)),
        |o, r| Ok(f64::from(u8::from(rules[o].occurs(r.powf(p))))),
    )?;
    let moment_sup = src.sup_cellwise(
        |o, law| Ok(rules[o].moment(law, p)),
        |o, r| {
            let xi = r.powf(p);
            Ok(if rules[o].occurs(xi) { xi } else { 0.0 })
        },
    )?;
    let premise = prob_sup.value < delta;
    let conclusion = moment_sup.plausibly_below(eps);
    Ok(EventCheck {
        delta,
        eps,
        prob_sup,
        moment_sup,
        premise,
        conclusion,
        verdict: !premise || conclusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEventCheck {
    pub events: String,
    pub check: EventCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonChecks {
    pub eps: f64,
    /// Level with tail supremum `≤ ε/2`.
    pub a0: Option<f64>,
    pub delta: Option<f64>,
    /// Forward direction: the event criterion on several arrays.
    pub forward: Vec<NamedEventCheck>,
    /// Reverse direction: Markov threshold `K/δ`.
    pub markov_threshold: Option<f64>,
    pub markov_prob_sup: Option<Estimate>,
    pub markov_prob_ok: bool,
    /// Truncated moment on the Markov events, which must stay below `ε`.
    pub markov_moment_sup: Option<Estimate>,
    pub markov_moment_ok: bool,
    /// Tail supremum at level `K/δ`, which must be below `ε`.
    pub reverse_tail: Option<Estimate>,
    pub reverse_tail_ok: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub family: String,
    pub p: f64,
    pub horizon: MultiIndex,
    pub mode: MomentMode,
    /// Criterion (i) value.
    pub k: Estimate,
    /// Level with tail supremum `≤ 1`.
    pub a0_unit: Option<f64>,
    pub criterion_i_ok: bool,
    pub per_eps: Vec<EpsilonChecks>,
    /// A finite level certificate was found at the horizon.
    pub certified: bool,
    pub pass: bool,
}

/// Runs both directions of the equivalence between Cesàro uniform
/// integrability and criteria (i) + (ii) on the array `ξ_i = ||X_i||^p`.
pub fn verify_criterion_equivalence(
    src: &MomentSource,
    p: f64,
    eps_list: &[f64],
    level_grid: &[f64],
) -> Result<EquivalenceReport> {
    check_p(p)?;
    check_grid(level_grid)?;
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("epsilon list must be nonempty and positive"));
    }
    let k = check_criterion_i(src, p)?;
    let a0_unit = xi_certificate(src, p, 1.0, level_grid)?;
    let criterion_i_ok = a0_unit.is_some_and(|a| k.plausibly_at_most(a + 1.0));

    let mut per_eps = Vec::new();
    for &eps in eps_list {
        let a0 = xi_certificate(src, p, eps / 2.0, level_grid)?;
        let mut row = EpsilonChecks {
            eps,
            a0,
            delta: None,
            forward: Vec::new(),
            markov_threshold: None,
            markov_prob_sup: None,
            markov_prob_ok: false,
            markov_moment_sup: None,
            markov_moment_ok: false,
            reverse_tail: None,
            reverse_tail_ok: false,
            pass: false,
        };
        if let Some(a0) = a0 {
            let delta = derive_delta(eps, a0)?;
            row.delta = Some(delta);
            let markov = markov_event_array(src.horizon(), k.value, delta)?;
            let arrays = [
                ("greedy_full", greedy_event_array(src, p, delta)?),
                ("tail_level", tail_event_array(src, p, delta)?),
                ("markov", markov.clone()),
            ];
            for (name, events) in arrays {
                row.forward.push(NamedEventCheck {
                    events: name.to_string(),
                    check: check_event_criterion(src, p, &events, delta, eps)?,
                });
            }
            let threshold = match markov.rules[0] {
                EventRule::AtLeast(t) => t,
                _ => unreachable!("markov events are threshold events"),
            };
            let markov_check = &row.forward.last().expect("three arrays").check;
            row.markov_threshold = Some(threshold);
            row.markov_prob_sup = Some(markov_check.prob_sup);
            row.markov_prob_ok = markov_check.prob_sup.plausibly_at_most(delta);
            row.markov_moment_sup = Some(markov_check.moment_sup);
            row.markov_moment_ok = markov_check.moment_sup.plausibly_below(eps);
            let tail = xi_tail_sup(src, p, threshold, Indicator::Strict)?;
            row.reverse_tail_ok = tail.plausibly_below(eps);
            row.reverse_tail = Some(tail);
            row.pass = row.forward.iter().all(|c| c.check.verdict)
                && row.markov_prob_ok
                && row.markov_moment_ok
                && row.reverse_tail_ok;
        }
        per_eps.push(row);
    }
    let certified = a0_unit.is_some() && per_eps.iter().all(|r| r.a0.is_some());
    let pass = certified && criterion_i_ok && per_eps.iter().all(|r| r.pass);
    Ok(EquivalenceReport {
        family: src.spec().family.name().to_string(),
        p,
        horizon: src.horizon().clone(),
        mode: src.mode(),
        k,
        a0_unit,
        criterion_i_ok,
        per_eps,
        certified,
        pass,
    })
}
