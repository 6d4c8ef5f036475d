//! Instance sampling, class balancing, and the train/test split.
//!
//! A candle series is tiled into nonoverlapping 14-hour blocks starting
//! at its first timestamp. The first 12 hours of each complete block form
//! the input matrix; the label says whether the closing price at the end
//! of the block is above the closing price at the end of the observed
//! span. Blocks with a missing minute are skipped, ties are dropped.

use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::market_data::{feature_matrix, CandleSeries, FEATURE_COUNT, INTERVAL_S};
use crate::rng::substream;

/// Close column index inside the fixed feature order.
const CLOSE_COL: usize = 3;

/// Magic bytes of the instance cache format.
pub const INSTANCE_MAGIC: &[u8; 5] = b"LLTW1";

/// Window geometry and split settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplingConfig {
    /// Full window length in minutes.
    pub window_minutes: usize,
    /// Observed span in minutes (the input matrix rows).
    pub observe_minutes: usize,
    /// Label horizon in minutes.
    pub horizon_minutes: usize,
    /// Fraction of instances assigned to the test set.
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            window_minutes: 840,
            observe_minutes: 720,
            horizon_minutes: 120,
            test_ratio: 0.25,
            seed: 12345,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.observe_minutes == 0 || self.horizon_minutes == 0 {
            return Err(Error::Domain("window spans must be positive".into()));
        }
        if self.observe_minutes + self.horizon_minutes != self.window_minutes {
            return Err(Error::Domain(format!(
                "observe ({}) + horizon ({}) must equal window ({})",
                self.observe_minutes, self.horizon_minutes, self.window_minutes
            )));
        }
        if !(self.test_ratio > 0.0 && self.test_ratio < 1.0) {
            return Err(Error::Domain(format!(
                "test_ratio {} outside (0, 1)",
                self.test_ratio
            )));
        }
        Ok(())
    }
}

/// One classification instance: the observed feature matrix plus label.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceWindow {
    pub instance_id: u64,
    /// `observe_minutes x 6` feature matrix in time order.
    pub x: Matrix,
    /// 1 if the close rose over the horizon, 0 if it fell.
    pub label: u8,
    /// Unix seconds of the window start.
    pub anchor_ts: i64,
}

/// Instance ids assigned to each side of the split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndex {
    pub train_ids: Vec<u64>,
    pub test_ids: Vec<u64>,
}

/// Tile the series into labeled instances.
///
/// Windows with any missing minute are skipped without shifting the
/// tiling grid; windows whose final and observed closes are exactly
/// equal are dropped. A series shorter than one window yields an empty
/// list.
pub fn make_instances(series: &CandleSeries, cfg: &SamplingConfig) -> Result<Vec<InstanceWindow>> {
    cfg.validate()?;
    let mut out = Vec::new();
    let Some(first) = series.candles.first() else {
        return Ok(out);
    };
    let last_ts = series.candles.last().unwrap().timestamp;
    let window_s = (cfg.window_minutes as i64) * INTERVAL_S;
    let mut next_id = 0u64;
    let mut anchor = first.timestamp;
    while anchor + window_s - INTERVAL_S <= last_ts {
        match feature_matrix(series, anchor, cfg.window_minutes) {
            Ok(full) => {
                let observed_close = full.get(cfg.observe_minutes - 1, CLOSE_COL);
                let final_close = full.get(cfg.window_minutes - 1, CLOSE_COL);
                if final_close != observed_close {
                    let mut x = Matrix::zeros(cfg.observe_minutes, FEATURE_COUNT);
                    for r in 0..cfg.observe_minutes {
                        for c in 0..FEATURE_COUNT {
                            x.set(r, c, full.get(r, c));
                        }
                    }
                    out.push(InstanceWindow {
                        instance_id: next_id,
                        x,
                        label: u8::from(final_close > observed_close),
                        anchor_ts: anchor,
                    });
                    next_id += 1;
                }
            }
            Err(Error::WindowIncomplete(_)) => {}
            Err(e) => return Err(e),
        }
        anchor += window_s;
    }
    Ok(out)
}

/// Down-sample the majority class to the minority count, preserving the
/// relative order of survivors. Deterministic for a given seed.
pub fn balance_classes(instances: Vec<InstanceWindow>, seed: u64) -> Result<Vec<InstanceWindow>> {
    let count0 = instances.iter().filter(|i| i.label == 0).count();
    let count1 = instances.len() - count0;
    if count0 == 0 || count1 == 0 {
        return Err(Error::Balance(format!(
            "one class is empty ({count0} vs {count1} instances)"
        )));
    }
    if count0 == count1 {
        return Ok(instances);
    }
    let (majority_label, majority_count, minority_count) = if count0 > count1 {
        (0u8, count0, count1)
    } else {
        (1u8, count1, count0)
    };
    let mut rng = substream(seed, "balance");
    let mut keep: Vec<usize> = sample(&mut rng, majority_count, minority_count).into_vec();
    keep.sort_unstable();

    let mut kept_majority = 0usize;
    let mut majority_seen = 0usize;
    let mut out = Vec::with_capacity(2 * minority_count);
    for inst in instances {
        if inst.label == majority_label {
            if kept_majority < keep.len() && keep[kept_majority] == majority_seen {
                out.push(inst);
                kept_majority += 1;
            }
            majority_seen += 1;
        } else {
            out.push(inst);
        }
    }
    Ok(out)
}

/// Stratified, seeded train/test split over balanced instances.
///
/// `|test| = round(test_ratio * n)`; when that count is odd, class 0
/// receives the extra instance. Returned id lists are sorted ascending.
pub fn split_train_test(instances: &[InstanceWindow], cfg: &SamplingConfig) -> Result<SplitIndex> {
    cfg.validate()?;
    let mut class_ids: [Vec<u64>; 2] = [Vec::new(), Vec::new()];
    for inst in instances {
        class_ids[inst.label as usize].push(inst.instance_id);
    }
    if class_ids[0].len() < 2 || class_ids[1].len() < 2 {
        return Err(Error::Split(format!(
            "need at least 2 instances per class, got {} and {}",
            class_ids[0].len(),
            class_ids[1].len()
        )));
    }
    let n = instances.len();
    let n_test = (cfg.test_ratio * n as f64).round() as usize;
    let n_test = n_test.clamp(2, n.saturating_sub(2));
    let per_class = [n_test / 2 + n_test % 2, n_test / 2];

    let mut rng = substream(cfg.seed, "split");
    let mut train_ids = Vec::new();
    let mut test_ids = Vec::new();
    for c in 0..2 {
        let mut ids = class_ids[c].clone();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let take = per_class[c].min(ids.len());
        test_ids.extend_from_slice(&ids[..take]);
        train_ids.extend_from_slice(&ids[take..]);
    }
    train_ids.sort_unstable();
    test_ids.sort_unstable();
    Ok(SplitIndex {
        train_ids,
        test_ids,
    })
}

/// Select instances by id, in id order.
pub fn select_instances<'a>(
    instances: &'a [InstanceWindow],
    ids: &[u64],
) -> Vec<&'a InstanceWindow> {
    let mut picked: Vec<&InstanceWindow> = instances
        .iter()
        .filter(|i| ids.binary_search(&i.instance_id).is_ok())
        .collect();
    picked.sort_by_key(|i| i.instance_id);
    picked
}

/// Write instances in the `LLTW1` cache layout.
///
/// Header: magic `LLTW1`, then `k`, `m`, `n` as little-endian `u32`.
/// Per instance: `instance_id: u64`, `anchor_ts: i64`, the `k*m`
/// feature values as little-endian `f64` in row-major order, then one
/// label byte.
pub fn write_instances<W: Write>(mut w: W, instances: &[InstanceWindow]) -> Result<()> {
    let (k, m) = match instances.first() {
        Some(inst) => (inst.x.rows(), inst.x.cols()),
        None => (0, 0),
    };
    w.write_all(INSTANCE_MAGIC)?;
    w.write_all(&(k as u32).to_le_bytes())?;
    w.write_all(&(m as u32).to_le_bytes())?;
    w.write_all(&(instances.len() as u32).to_le_bytes())?;
    for inst in instances {
        if inst.x.rows() != k || inst.x.cols() != m {
            return Err(Error::Format(format!(
                "instance {} has shape {}x{}, expected {k}x{m}",
                inst.instance_id,
                inst.x.rows(),
                inst.x.cols()
            )));
        }
        w.write_all(&inst.instance_id.to_le_bytes())?;
        w.write_all(&inst.anchor_ts.to_le_bytes())?;
        for value in inst.x.data() {
            w.write_all(&value.to_le_bytes())?;
        }
        w.write_all(&[inst.label])?;
    }
    Ok(())
}

/// Read instances from the `LLTW1` cache layout.
pub fn read_instances<R: Read>(mut r: R) -> Result<Vec<InstanceWindow>> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != INSTANCE_MAGIC {
        return Err(Error::Format("bad instance cache magic".into()));
    }
    let k = read_u32(&mut r)? as usize;
    let m = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut id = [0u8; 8];
        r.read_exact(&mut id)?;
        let mut ts = [0u8; 8];
        r.read_exact(&mut ts)?;
        let mut data = vec![0.0f64; k * m];
        let mut buf = [0u8; 8];
        for value in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *value = f64::from_le_bytes(buf);
        }
        let mut label = [0u8; 1];
        r.read_exact(&mut label)?;
        if label[0] > 1 {
            return Err(Error::Format(format!("label byte {} not 0/1", label[0])));
        }
        out.push(InstanceWindow {
            instance_id: u64::from_le_bytes(id),
            x: Matrix::from_vec(k, m, data),
            label: label[0],
            anchor_ts: i64::from_le_bytes(ts),
        });
    }
    Ok(out)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Candle;
    use proptest::prelude::*;

    /// Gapless series whose close at minute `i` is `closes[i]`; other
    /// fields are flat around the close.
    fn series_from_closes(closes: &[f64]) -> CandleSeries {
        let candles = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| Candle {
                timestamp: i as i64 * 60,
                open: c,
                high: c,
                low: c,
                close: c,
                base_volume: 1.0,
                quote_volume: 1.0,
            })
            .collect();
        CandleSeries {
            symbol: "SYN".into(),
            interval_s: 60,
            candles,
        }
    }

    fn cfg() -> SamplingConfig {
        SamplingConfig::default()
    }

    fn make_instance(id: u64, label: u8) -> InstanceWindow {
        InstanceWindow {
            instance_id: id,
            x: Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]),
            label,
            anchor_ts: id as i64 * 840 * 60,
        }
    }

    #[test]
    fn single_window_rising_close() {
        let mut closes = vec![100.0; 840];
        closes[719] = 100.0;
        closes[839] = 101.0;
        let s = series_from_closes(&closes);
        let got = make_instances(&s, &cfg()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].label, 1);
        assert_eq!(got[0].anchor_ts, 0);
        assert_eq!((got[0].x.rows(), got[0].x.cols()), (720, 6));
    }

    #[test]
    fn tie_window_is_dropped() {
        let closes = vec![100.0; 840];
        let s = series_from_closes(&closes);
        assert!(make_instances(&s, &cfg()).unwrap().is_empty());
    }

    #[test]
    fn incomplete_second_window_is_not_emitted() {
        // 1679 minutes: one full window plus 839 minutes
        let mut closes = vec![100.0; 1679];
        closes[839] = 101.0;
        let s = series_from_closes(&closes);
        let got = make_instances(&s, &cfg()).unwrap();
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn falling_close_labels_zero() {
        let mut closes = vec![100.0; 840];
        closes[839] = 99.0;
        let s = series_from_closes(&closes);
        let got = make_instances(&s, &cfg()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].label, 0);
    }

    #[test]
    fn gap_skips_window_but_not_grid() {
        // two windows; remove one minute from the first
        let mut closes = vec![100.0; 1680];
        closes[839] = 101.0;
        closes[1679] = 101.0;
        let mut s = series_from_closes(&closes);
        s.candles.remove(100);
        let got = make_instances(&s, &cfg()).unwrap();
        assert_eq!(got.len(), 1);
        // the surviving instance sits on the second grid slot
        assert_eq!(got[0].anchor_ts, 840 * 60);
    }

    #[test]
    fn short_series_gives_empty_list() {
        let closes = vec![100.0; 100];
        let s = series_from_closes(&closes);
        assert!(make_instances(&s, &cfg()).unwrap().is_empty());
    }

    #[test]
    fn windows_never_overlap() {
        let mut closes = vec![100.0; 840 * 5];
        for w in 0..5 {
            closes[w * 840 + 839] = 101.0 + w as f64;
        }
        let s = series_from_closes(&closes);
        let got = make_instances(&s, &cfg()).unwrap();
        for a in &got {
            for b in &got {
                if a.instance_id != b.instance_id {
                    assert!((a.anchor_ts - b.anchor_ts).abs() >= 840 * 60);
                }
            }
        }
    }

    #[test]
    fn balance_downsamples_majority() {
        let mut instances: Vec<InstanceWindow> = (0..10).map(|i| make_instance(i, 0)).collect();
        instances.extend((10..17).map(|i| make_instance(i, 1)));
        let balanced = balance_classes(instances, 42).unwrap();
        assert_eq!(balanced.len(), 14);
        assert_eq!(balanced.iter().filter(|i| i.label == 0).count(), 7);
        // relative order preserved
        let ids: Vec<u64> = balanced.iter().map(|i| i.instance_id).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn balance_identity_when_already_balanced() {
        let instances: Vec<InstanceWindow> =
            (0..6).map(|i| make_instance(i, (i % 2) as u8)).collect();
        let balanced = balance_classes(instances.clone(), 42).unwrap();
        assert_eq!(balanced, instances);
    }

    #[test]
    fn balance_is_deterministic() {
        let build = || {
            let mut v: Vec<InstanceWindow> = (0..20).map(|i| make_instance(i, 0)).collect();
            v.extend((20..25).map(|i| make_instance(i, 1)));
            v
        };
        let a = balance_classes(build(), 7).unwrap();
        let b = balance_classes(build(), 7).unwrap();
        assert_eq!(a, b);
        let c = balance_classes(build(), 8).unwrap();
        assert_ne!(
            a.iter().map(|i| i.instance_id).collect::<Vec<_>>(),
            c.iter().map(|i| i.instance_id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn balance_errors_on_empty_class() {
        let instances: Vec<InstanceWindow> = (0..5).map(|i| make_instance(i, 0)).collect();
        assert!(matches!(
            balance_classes(instances, 1),
            Err(Error::Balance(_))
        ));
    }

    #[test]
    fn split_paper_counts() {
        // 1712 balanced instances -> 428 test (214 per class), 1284 train
        let instances: Vec<InstanceWindow> =
            (0..1712).map(|i| make_instance(i, (i % 2) as u8)).collect();
        let split = split_train_test(&instances, &cfg()).unwrap();
        assert_eq!(split.test_ids.len(), 428);
        assert_eq!(split.train_ids.len(), 1284);
        let test_class0 = split.test_ids.iter().filter(|id| *id % 2 == 0).count();
        assert_eq!(test_class0, 214);
    }

    #[test]
    fn split_small_case() {
        let instances: Vec<InstanceWindow> =
            (0..8).map(|i| make_instance(i, (i % 2) as u8)).collect();
        let split = split_train_test(&instances, &cfg()).unwrap();
        assert_eq!(split.test_ids.len(), 2);
        assert_eq!(split.train_ids.len(), 6);
        let test_class0 = split.test_ids.iter().filter(|id| *id % 2 == 0).count();
        assert_eq!(test_class0, 1);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let instances: Vec<InstanceWindow> =
            (0..40).map(|i| make_instance(i, (i % 2) as u8)).collect();
        let a = split_train_test(&instances, &cfg()).unwrap();
        let b = split_train_test(&instances, &cfg()).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<u64> = a
            .train_ids
            .iter()
            .chain(a.test_ids.iter())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<u64>>());
    }

    #[test]
    fn split_errors_on_tiny_class() {
        let mut instances: Vec<InstanceWindow> = (0..5).map(|i| make_instance(i, 0)).collect();
        instances.push(make_instance(5, 1));
        assert!(matches!(
            split_train_test(&instances, &cfg()),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn cache_round_trip() {
        let instances: Vec<InstanceWindow> =
            (0..5).map(|i| make_instance(i, (i % 2) as u8)).collect();
        let mut buf = Vec::new();
        write_instances(&mut buf, &instances).unwrap();
        let back = read_instances(buf.as_slice()).unwrap();
        assert_eq!(back, instances);
    }

    #[test]
    fn cache_golden_bytes() {
        // one 1x2 instance, built field by field
        let inst = InstanceWindow {
            instance_id: 3,
            x: Matrix::from_rows(&[vec![1.5, -2.0]]),
            label: 1,
            anchor_ts: 60,
        };
        let mut buf = Vec::new();
        write_instances(&mut buf, &[inst]).unwrap();

        let mut expected = Vec::new();
        expected.extend_from_slice(b"LLTW1");
        expected.extend_from_slice(&1u32.to_le_bytes()); // k
        expected.extend_from_slice(&2u32.to_le_bytes()); // m
        expected.extend_from_slice(&1u32.to_le_bytes()); // n
        expected.extend_from_slice(&3u64.to_le_bytes());
        expected.extend_from_slice(&60i64.to_le_bytes());
        expected.extend_from_slice(&1.5f64.to_le_bytes());
        expected.extend_from_slice(&(-2.0f64).to_le_bytes());
        expected.push(1);
        assert_eq!(buf, expected);
    }

    #[test]
    fn cache_rejects_bad_magic() {
        let buf = b"NOPE!xxxxxxxxxxx".to_vec();
        assert!(matches!(
            read_instances(buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn labels_match_brute_force_recomputation(
            seed in 0u64..10_000,
            windows in 1usize..6,
        ) {
            let mut rng = substream(seed, "windowing-prop");
            use rand::Rng;
            let n = windows * 840;
            let closes: Vec<f64> = (0..n).map(|_| rng.gen_range(50.0f64..150.0)).collect();
            let s = series_from_closes(&closes);
            let got = make_instances(&s, &cfg()).unwrap();
            for inst in &got {
                let w = (inst.anchor_ts / 60) as usize;
                let observed = closes[w + 719];
                let fin = closes[w + 839];
                prop_assert!(fin != observed);
                prop_assert_eq!(inst.label, u8::from(fin > observed));
                // stored matrix equals the raw closes
                prop_assert_eq!(inst.x.get(0, CLOSE_COL), closes[w]);
                prop_assert_eq!(inst.x.get(719, CLOSE_COL), observed);
            }
        }
    }
}
