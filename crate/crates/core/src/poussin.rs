//! Constructive de La Vallée Poussin functions.
//!
//! From thresholds `N_1 < N_2 < ...` with Cesàro tails `≤ 2^{-j}` one builds
//! slopes `u_n = #{j : N_j < n}` and the convex piecewise linear
//! `φ(t) = ∫_0^t g` with `g = u_n` on `[n-1, n)`, which equals
//! `Σ_j (t - N_j)^+`. As elsewhere in this crate, `φ` is applied to
//! `ξ_i = ||X_i||^p`.

use serde::{Deserialize, Serialize};

use crate::cui::{moment_sup, xi_tail_sup};
use crate::distributions::{Indicator, NormLaw};
use crate::error::{invalid, Error, Result};
use crate::moments::{Estimate, MomentSource};

/// Default number of thresholds.
pub const DEFAULT_J_MAX: usize = 16;

/// Largest threshold searched before giving up.
pub const DEFAULT_LEVEL_CAP: u64 = 1 << 40;

/// Default lower bound on `φ(t)/t` at the end of the domain.
pub const DEFAULT_GROWTH_FLOOR: f64 = 1.0;

#[derive(Serialize, Deserialize)]
struct PhiRepr {
    u: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_slope: Option<u64>,
}

/// Piecewise linear `φ` with integer slopes `u_1, ..., u_{n_max}`.
///
/// Beyond `n_max` the function is undefined unless a linear continuation
/// slope is attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhiRepr", into = "PhiRepr")]
pub struct PhiFunction {
    u: Vec<u64>,
    /// `prefix[k] = Σ_{i ≤ k} u_i` with `u_0 = 0`.
    prefix: Vec<u64>,
    tail_slope: Option<u64>,
}

impl TryFrom<PhiRepr> for PhiFunction {
    type Error = Error;

    fn try_from(r: PhiRepr) -> Result<Self> {
        let phi = PhiFunction::new(r.u)?;
        match r.tail_slope {
            Some(s) => phi.with_tail_slope(s),
            None => Ok(phi),
        }
    }
}

impl From<PhiFunction> for PhiRepr {
    fn from(p: PhiFunction) -> Self {
        PhiRepr { u: p.u, tail_slope: p.tail_slope }
    }
}

impl PhiFunction {
    pub fn new(u: Vec<u64>) -> Result<Self> {
        if u.is_empty() {
            return Err(invalid("phi needs at least one slope"));
        }
        let mut prefix = Vec::with_capacity(u.len() + 1);
        prefix.push(0u64);
        for &x in &u {
            let next = prefix.last().unwrap().checked_add(x).ok_or_else(|| invalid("phi slopes overflow"))?;
            prefix.push(next);
        }
        Ok(Self { u, prefix, tail_slope: None })
    }

    /// Continues `φ` linearly with slope `s ≥ u_{n_max}` past `n_max`.
    pub fn with_tail_slope(mut self, s: u64) -> Result<Self> {
        if s < *self.u.last().unwrap() {
            return Err(invalid("tail slope below the last slope breaks convexity"));
        }
        self.tail_slope = Some(s);
        Ok(self)
    }

    pub fn u(&self) -> &[u64] {
        &self.u
    }

    pub fn n_max(&self) -> usize {
        self.u.len()
    }

    pub fn tail_slope(&self) -> Option<u64> {
        self.tail_slope
    }

    /// Largest argument `φ` accepts.
    pub fn domain_end(&self) -> f64 {
        if self.tail_slope.is_some() {
            f64::INFINITY
        } else {
            self.n_max() as f64
        }
    }

    /// `φ(n) = Σ_{i ≤ n} u_i` at an integer knot.
    pub fn at_knot(&self, n: usize) -> Option<u64> {
        self.prefix.get(n).copied()
    }
}

/// `u_n = #{j : N_j < n}` for `n = 1, ..., n_max`.
pub fn u_from_thresholds(thresholds: &[u64], n_max: usize) -> Result<Vec<u64>> {
    if thresholds.is_empty() || thresholds.contains(&0) || n_max == 0 {
        return Err(invalid("thresholds must be nonempty and positive, n_max ≥ 1"));
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_unstable();
    let mut u = Vec::with_capacity(n_max);
    let mut below = 0usize;
    for n in 1..=n_max as u64 {
        while below < sorted.len() && sorted[below] < n {
            below += 1;
        }
        u.push(below as u64);
    }
    Ok(u)
}

/// `φ(t) = Σ_{i=0}^{n-1} u_i + (t - n + 1) u_n` for `t ∈ [n-1, n)`.
pub fn phi_eval(phi: &PhiFunction, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("phi argument {t} is negative")));
    }
    let n_max = phi.n_max();
    if t > n_max as f64 {
        return match phi.tail_slope {
            Some(s) => Ok(phi.prefix[n_max] as f64 + (t - n_max as f64) * s as f64),
            None => Err(invalid(format!("phi argument {t} beyond domain [0, {n_max}]"))),
        };
    }
    let k = (t.floor() as usize).min(n_max - 1);
    Ok(phi.prefix[k] as f64 + (t - k as f64) * phi.u[k] as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    pub phi_at_zero: f64,
    pub slopes_nondecreasing: bool,
    pub ratio_nondecreasing: bool,
    /// `φ(t)/t` at the last grid point.
    pub end_ratio: f64,
    pub growth_floor: f64,
    pub growth_ok: bool,
    pub pass: bool,
}

/// Checks `φ(0) = 0`, convexity through the slopes, monotonicity of
/// `φ(t)/t` along `grid` and the end-of-grid growth floor.
pub fn verify_phi_properties(phi: &PhiFunction, grid: &[f64], growth_floor: f64) -> Result<PhiReport> {
    if grid.is_empty() || grid.iter().any(|&t| !(t > 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("grid must be nonempty, positive and strictly increasing"));
    }
    let phi_at_zero = phi_eval(phi, 0.0)?;
    let slopes_nondecreasing = phi.u.windows(2).all(|w| w[0] <= w[1])
        && phi.tail_slope.is_none_or(|s| s >= *phi.u.last().unwrap());
    let ratios: Vec<f64> = grid.iter().map(|&t| phi_eval(phi, t).map(|v| v / t)).collect::<Result<_>>()?;
    let ratio_nondecreasing = ratios.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs());
    let end_ratio = *ratios.last().unwrap();
    let growth_ok = end_ratio > growth_floor;
    Ok(PhiReport {
        phi_at_zero,
        slopes_nondecreasing,
        ratio_nondecreasing,
        end_ratio,
        growth_floor,
        growth_ok,
        pass: phi_at_zero == 0.0 && slopes_nondecreasing && ratio_nondecreasing && growth_ok,
    })
}

/// Up to `points` evenly spaced positive points covering `(0, n_max]`.
pub fn phi_grid(phi: &PhiFunction, points: usize) -> Vec<f64> {
    let n_max = phi.n_max() as f64;
    let m = points.max(1).min(phi.n_max().max(1) * 4);
    (1..=m).map(|k| n_max * k as f64 / m as f64).collect()
}

/// CSV with columns `t,phi,ratio`.
pub fn phi_csv(phi: &PhiFunction, grid: &[f64]) -> Result<String> {
    let mut out = String::from("t,phi,ratio\n");
    for &t in grid {
        let v = phi_eval(phi, t)?;
        out.push_str(&format!("{t},{v},{}\n", v / t));
    }
    Ok(out)
}

/// Minimal strictly increasing integer levels `N_1 < ... < N_{j_max}` with
/// `sup_n (1/|n|) Σ E(ξ_i 1(ξ_i ≥ N_j)) ≤ 2^{-j}`.
///
/// Levels the horizon cannot witness, or none below `cap`, raise
/// [`Error::HorizonTooSmall`].
pub fn thresholds_from_cui(src: &MomentSource, p: f64, j_max: usize, cap: u64) -> Result<Vec<u64>> {
    if j_max == 0 {
        return Err(invalid("j_max must be at least 1"));
    }
    let mut out = Vec::with_capacity(j_max);
    let mut prev = 0u64;
    for j in 1..=j_max {
        let target = 0.5f64.powi(j as i32);
        let ok = |n: u64| -> Result<bool> { Ok(xi_tail_sup(src, p, n as f64, Indicator::AtLeast)?.value <= target) };
        let mut bad = prev;
        let mut hi = prev + 1;
        let mut step = 1u64;
        while !ok(hi)? {
            if hi >= cap {
                return Err(Error::HorizonTooSmall(format!("no level up to {cap} has Cesàro tail ≤ 2^-{j}")));
            }
            bad = hi;
            hi = hi.saturating_add(step).min(cap);
            step = step.saturating_mul(2);
        }
        while bad + 1 < hi {
            let mid = bad + (hi - bad) / 2;
            if ok(mid)? {
                hi = mid;
            } else {
                bad = mid;
            }
        }
        if !src.resolvable((hi as f64).powf(1.0 / p)) {
            return Err(Error::HorizonTooSmall(format!(
                "threshold N_{j} = {hi} is not witnessed by horizon {}",
                src.horizon()
            )));
        }
        out.push(hi);
        prev = hi;
    }
    Ok(out)
}

/// Builds `φ` for the source from thresholds: domain `max(N_max + 1, 4 N_max,
/// ⌈4 w⌉)` with `w` the largest witnessed `ξ`, and a linear continuation when
/// the family has unbounded support.
pub fn phi_for_source(src: &MomentSource, p: f64, thresholds: &[u64]) -> Result<PhiFunction> {
    let top = *thresholds.iter().max().ok_or_else(|| invalid("no thresholds"))?;
    let witness = src.norm_witness().powf(p);
    let mut n_max = (top + 1).max(4 * top);
    if witness.is_finite() {
        n_max = n_max.max((4.0 * witness).ceil() as u64);
    }
    let u = u_from_thresholds(thresholds, n_max as usize)?;
    let last = *u.last().unwrap();
    let phi = PhiFunction::new(u)?;
    if witness.is_finite() {
        Ok(phi)
    } else {
        phi.with_tail_slope(last)
    }
}

fn expected_phi(phi: &PhiFunction, law: &NormLaw) -> Result<f64> {
    match *law {
        NormLaw::Point(v) => phi_eval(phi, v).map_err(|_| domain_err(v, phi)),
        NormLaw::Pareto { .. } => {
            let n_max = phi.n_max();
            if phi.tail_slope.is_none() && law.tail_prob(n_max as f64, Indicator::Strict) > 0.0 {
                return Err(domain_err(f64::INFINITY, phi));
            }
            // E φ(R) = ∫ g(t) P(R > t) dt, grouped over runs of equal slope
            let mut total = 0.0;
            let mut start = 0usize;
            while start < n_max {
                let s = phi.u[start];
                let mut end = start + 1;
                while end < n_max && phi.u[end] == s {
                    end += 1;
                }
                if s > 0 {
                    total += s as f64 * law.survival_integral(start as f64, end as f64);
                }
                start = end;
            }
            if let Some(s) = phi.tail_slope {
                if s > 0 {
                    total += s as f64 * law.survival_integral(n_max as f64, f64::INFINITY);
                }
            }
            Ok(total)
        }
    }
}

fn domain_err(v: f64, phi: &PhiFunction) -> Error {
    Error::Domain(format!("value {v} exceeds phi domain [0, {}]; enlarge n_max", phi.n_max()))
}

/// `sup_n (1/|n|) Σ_{i ≺ n} E φ(ξ_i)` over the schedule.
pub fn poussin_moment_check(src: &MomentSource, p: f64, phi: &PhiFunction) -> Result<Estimate> {
    src.sup(
        |law| expected_phi(phi, &law.power(p)),
        |r| {
            let xi = r.powf(p);
            phi_eval(phi, xi).map_err(|_| domain_err(xi, phi))
        },
    )
}

/// Smallest `t` with `φ(t) ≥ r t`.
pub fn ratio_level(phi: &PhiFunction, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid("ratio must be positive"));
    }
    for (k, &s) in phi.u.iter().enumerate() {
        let t0 = k as f64;
        let t1 = t0 + 1.0;
        let (v0, v1) = (phi.prefix[k] as f64, phi.prefix[k + 1] as f64);
        if v1 >= r * t1 {
            // solve v0 + (t - t0) s = r t on [t0, t1]
            let t = if v0 >= r * t0 { t0 } else { (v0 - s as f64 * t0) / (r - s as f64) };
            return Ok(t.clamp(t0, t1).max(f64::MIN_POSITIVE));
        }
    }
    let n = phi.n_max() as f64;
    let v = phi.prefix[phi.n_max()] as f64;
    match phi.tail_slope {
        Some(s) if s as f64 > r => Ok((v - s as f64 * n) / (r - s as f64)),
        _ => Err(Error::Domain(format!("phi(t)/t never reaches {r} inside its domain"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardRecord {
    pub eps: f64,
    /// Upper estimate of `sup_n (1/|n|) Σ E φ(ξ_i)`.
    pub k: f64,
    pub required_ratio: f64,
    pub a: f64,
    pub tail: Estimate,
    pub pass: bool,
}

/// For each `ε`, the level `a` past which `φ(t) ≥ t (K+1)/ε` and the
/// Cesàro tail of `ξ` at `a`, which must be below `ε`.
pub fn poussin_forward_check(
    src: &MomentSource,
    p: f64,
    phi: &PhiFunction,
    eps_list: &[f64],
) -> Result<Vec<ForwardRecord>> {
    let m = poussin_moment_check(src, p, phi)?;
    let k = m.value + 2.0 * m.stderr;
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(invalid("epsilon must be positive"));
            }
            let required_ratio = (k + 1.0) / eps;
            let a = ratio_level(phi, required_ratio)?;
            let tail = xi_tail_sup(src, p, a, Indicator::Strict)?;
            Ok(ForwardRecord { eps, k, required_ratio, a, pass: tail.plausibly_below(eps), tail })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub family: String,
    pub p: f64,
    pub thresholds: Vec<u64>,
    pub phi: PhiFunction,
    pub properties: PhiReport,
    /// Cesàro moment of `ξ` itself, for context.
    pub mean_sup: Estimate,
    pub moment: Estimate,
    pub moment_ok: bool,
    pub forward: Vec<ForwardRecord>,
    /// Set when `φ(t)/t` cannot reach a required level inside the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_error: Option<String>,
    pub pass: bool,
}

/// Thresholds, then `φ`, then both directions. A forward check that runs out
/// of domain is recorded as a failure rather than returned as an error.
pub fn poussin_round_trip(
    src: &MomentSource,
    p: f64,
    j_max: usize,
    eps_list: &[f64],
    cap: u64,
) -> Result<RoundTrip> {
    let thresholds = thresholds_from_cui(src, p, j_max, cap)?;
    let phi = phi_for_source(src, p, &thresholds)?;
    let properties = verify_phi_properties(&phi, &phi_grid(&phi, 512), DEFAULT_GROWTH_FLOOR)?;
    let moment = poussin_moment_check(src, p, &phi)?;
    let moment_ok = moment.value + 2.0 * moment.stderr <= 1.0;
    let (forward, forward_error) = match poussin_forward_check(src, p, &phi, eps_list) {
        Ok(f) => (f, None),
        Err(Error::Domain(m)) => (Vec::new(), Some(m)),
        Err(e) => return Err(e),
    };
    let pass = properties.pass && moment_ok && forward_error.is_none() && forward.iter().all(|f| f.pass);
    Ok(RoundTrip {
        family: src.spec().family.name().to_string(),
        p,
        thresholds,
        phi,
        properties,
        mean_sup: moment_sup(src, p)?,
        moment,
        moment_ok,
        forward,
        forward_error,
        pass,
    })
}
