//! Frame gating, boxplot statistics and JND verdicts.

use serde::{Deserialize, Serialize};

use crate::dsp::LevelTrack;
use crate::error::{Error, Result};

/// Default level-difference threshold in dB.
pub const DEFAULT_JND_DB: f64 = 1.0;
/// Default gate range below the loudest frame, in dB.
pub const DEFAULT_GATE_DB: f64 = 40.0;

/// Frames whose level lies within `range_db` of the loudest frame and above
/// the track's floor.
pub fn gate_frames(lv: &LevelTrack, range_db: f64) -> Vec<bool> {
    let max = lv.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    lv.values
        .iter()
        .map(|v| *v >= max - range_db && *v > lv.floor_db)
        .collect()
}

/// Values of `track` where `mask` is set.
pub fn select(track: &LevelTrack, mask: &[bool]) -> Vec<f64> {
    track
        .values
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| *v)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub n: usize,
}

impl BoxStats {
    pub fn max_abs_outlier(&self) -> Option<f64> {
        self.outliers.iter().map(|v| v.abs()).fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }
}

/// Quantile `p` of sorted data by linear interpolation at position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn boxplot_stats(samples: &[f64]) -> Result<BoxStats> {
    if samples.is_empty() {
        return Err(Error::Empty("boxplot samples"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in boxplot samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let inside = sorted.iter().filter(|v| **v >= lo_fence && **v <= hi_fence);
    // The quartiles themselves always lie inside the fences, so `inside` is
    // never empty.
    let whisker_low = inside.clone().cloned().fold(f64::INFINITY, f64::min);
    let whisker_high = inside.cloned().fold(f64::NEG_INFINITY, f64::max);
    let outliers = sorted
        .iter()
        .filter(|v| **v < whisker_low || **v > whisker_high)
        .cloned()
        .collect();
    Ok(BoxStats {
        median,
        q1,
        q3,
        iqr,
        whisker_low,
        whisker_high,
        outliers,
        n: sorted.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Transparent,
    Marginal,
    Audible,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Transparent => "transparent",
            Classification::Marginal => "marginal",
            Classification::Audible => "audible",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JndVerdict {
    pub jnd: f64,
    pub median_below: bool,
    pub q3_below: bool,
    pub classification: Classification,
}

pub fn jnd_verdict(stats: &BoxStats, jnd: f64) -> JndVerdict {
    let median_below = stats.median.abs() < jnd;
    let q3_below = stats.q3.abs() < jnd;
    let classification = match (median_below, q3_below) {
        (false, _) => Classification::Audible,
        (true, true) => Classification::Transparent,
        (true, false) => Classification::Marginal,
    };
    JndVerdict {
        jnd,
        median_below,
        q3_below,
        classification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(values: Vec<f64>) -> LevelTrack {
        LevelTrack {
            values,
            hop: 0.002,
            window: 0.002,
            floor_db: -120.0,
        }
    }

    fn stats(median: f64, q3: f64) -> BoxStats {
        BoxStats {
            median,
            q1: median.min(q3),
            q3,
            iqr: 0.0,
            whisker_low: median,
            whisker_high: q3,
            outliers: vec![],
            n: 1,
        }
    }

    #[test]
    fn gating() {
        assert_eq!(gate_frames(&track(vec![-10.0; 4]), 40.0), vec![true; 4]);
        assert_eq!(gate_frames(&track(vec![-120.0; 3]), 40.0), vec![false; 3]);
        assert_eq!(gate_frames(&track(vec![0.0, -30.0, -50.0]), 40.0), vec![true, true, false]);
    }

    #[test]
    fn five_points() {
        let s = boxplot_stats(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.median, s.q1, s.q3, s.iqr), (3.0, 2.0, 4.0, 2.0));
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 5.0));
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn degenerate_iqr() {
        let s = boxplot_stats(&[0.0, 0.0, 0.0, 0.0, 10.0]).unwrap();
        assert_eq!((s.median, s.iqr), (0.0, 0.0));
        assert_eq!(s.outliers, vec![10.0]);
        assert_eq!(s.max_abs_outlier(), Some(10.0));
    }

    #[test]
    fn interpolated_quartiles() {
        let s = boxplot_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(boxplot_stats(&[]).is_err());
    }

    #[test]
    fn verdicts() {
        let v = |m, q| jnd_verdict(&stats(m, q), 1.0).classification;
        assert_eq!(v(0.01, 0.5), Classification::Transparent);
        assert_eq!(v(1.8, 2.4), Classification::Audible);
        assert_eq!(v(0.3, 0.45), Classification::Transparent);
        assert_eq!(v(0.8, 1.3), Classification::Marginal);
        assert_eq!(v(-1.5, 0.2), Classification::Audible);
    }

    #[test]
    fn larger_jnd_is_never_stricter() {
        let s = stats(0.9, 1.1);
        assert_eq!(jnd_verdict(&s, 0.5).classification, Classification::Audible);
        assert_eq!(jnd_verdict(&s, 1.0).classification, Classification::Marginal);
        assert_eq!(jnd_verdict(&s, 2.0).classification, Classification::Transparent);
    }
}
