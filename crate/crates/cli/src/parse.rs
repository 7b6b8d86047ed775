//! Value parsers for command-line lists, boxes and schedules.

use cesaro_core::convergence::BoundParams;
use cesaro_core::moments::doubling_schedule;
use cesaro_core::MultiIndex;

pub fn f64_list(s: &str) -> Result<Vec<f64>, String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if vals.is_empty() {
        return Err("empty list".into());
    }
    Ok(vals)
}

pub fn multi_index(s: &str) -> Result<MultiIndex, String> {
    let coords: Vec<u64> = s
        .split([',', 'x'])
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("bad coordinate {t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    MultiIndex::new(coords).map_err(|e| e.to_string())
}

/// `doubling-d1`, `doubling-d2`, `doubling-d3` (sizes `2^4` to `2^12`), or
/// explicit boxes such as `4,4;8,8;16,16`.
pub fn schedule(s: &str) -> Result<Vec<MultiIndex>, String> {
    if let Some(d) = s.strip_prefix("doubling-d") {
        let d: usize = d.parse().map_err(|_| format!("unknown schedule preset {s:?}"))?;
        if !(1..=3).contains(&d) {
            return Err(format!("unknown schedule preset {s:?}"));
        }
        return doubling_schedule(d, 4, 12).map_err(|e| e.to_string());
    }
    s.split(';').map(multi_index).collect()
}

/// `eps,a` or `eps,a,C`.
pub fn bound(s: &str) -> Result<BoundParams, String> {
    match f64_list(s)?.as_slice() {
        [eps, a] => Ok(BoundParams { eps: *eps, a: *a, c: None }),
        [eps, a, c] => Ok(BoundParams { eps: *eps, a: *a, c: Some(*c) }),
        _ => Err("expected eps,a or eps,a,C".into()),
    }
}
