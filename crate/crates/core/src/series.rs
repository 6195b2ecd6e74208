//! Time-series container and the windowing transforms used by the workflow.
//!
//! A [`TimeSeries`] pairs each observation with a real covariate (typically
//! years since the start of the record). From it we derive:
//!
//! - the moving minimum `Y_j = min(X_j, ..., X_{j+k-1})`, whose exceedance of a
//!   level certifies `k` successive exceedances of the raw series;
//! - block maxima over fixed-length blocks, the input to GEV fitting;
//! - a centred moving quantile, used as a nonstationary threshold.

use crate::error::{Error, Result};

/// Covariate-indexed observations `(t_i, x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    covariates: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, checking equal nonzero lengths, finite values and
    /// nondecreasing covariates.
    pub fn new(covariates: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if covariates.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} covariates but {} values",
                covariates.len(),
                values.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite value at index {i}")));
        }
        if let Some(i) = covariates.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite covariate at index {i}"
            )));
        }
        if let Some(i) = covariates.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidSeries(format!(
                "covariates decrease at index {}",
                i + 1
            )));
        }
        Ok(Self { covariates, values })
    }

    /// Series with covariates `0, 1, 2, ...`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let covariates = (0..values.len()).map(|i| i as f64).collect();
        Self::new(covariates, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copy with every covariate shifted by `-origin`.
    pub fn shifted(&self, origin: f64) -> Self {
        Self {
            covariates: self.covariates.iter().map(|t| t - origin).collect(),
            values: self.values.clone(),
        }
    }

    /// First `n` observations.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::new(self.covariates[..n].to_vec(), self.values[..n].to_vec())
    }
}

/// Maxima of consecutive non-overlapping blocks of fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMaxSeries {
    block_covariates: Vec<f64>,
    maxima: Vec<f64>,
    block_length: usize,
}

impl BlockMaxSeries {
    /// Assembles a block-maximum series directly (e.g. maxima read from disk).
    pub fn from_parts(
        block_covariates: Vec<f64>,
        maxima: Vec<f64>,
        block_length: usize,
    ) -> Result<Self> {
        if block_length == 0 {
            return Err(Error::InvalidWindow);
        }
        // reuse the series invariants
        let checked = TimeSeries::new(block_covariates, maxima)?;
        Ok(Self {
            block_covariates: checked.covariates,
            maxima: checked.values,
            block_length,
        })
    }

    pub fn len(&self) -> usize {
        self.maxima.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maxima.is_empty()
    }

    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    pub fn block_covariates(&self) -> &[f64] {
        &self.block_covariates
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// Copy with every block covariate shifted by `-origin`.
    pub fn shifted(&self, origin: f64) -> Self {
        Self {
            block_covariates: self.block_covariates.iter().map(|t| t - origin).collect(),
            maxima: self.maxima.clone(),
            block_length: self.block_length,
        }
    }

    /// Checks every maximum against its source block in `source`.
    pub fn matches_source(&self, source: &TimeSeries) -> bool {
        let m = self.block_length;
        if self.len() != source.len() / m {
            return false;
        }
        self.maxima.iter().enumerate().all(|(b, &mx)| {
            let block = &source.values()[b * m..(b + 1) * m];
            block.iter().copied().fold(f64::NEG_INFINITY, f64::max) == mx
        })
    }
}

/// Moving minimum over windows of `k` observations, labelled by window start.
pub fn moving_minimum(series: &TimeSeries, k: usize) -> Result<TimeSeries> {
    let n = series.len();
    if k == 0 {
        return Err(Error::InvalidWindow);
    }
    if k > n {
        return Err(Error::WindowTooLarge { k, n });
    }
    let values = series.values();
    let out_len = n - k + 1;
    let mut out = Vec::with_capacity(out_len);
    // monotone deque of indices with increasing values
    let mut deque = std::collections::VecDeque::with_capacity(k);
    for i in 0..n {
        while deque.back().is_some_and(|&j| values[j] >= values[i]) {
            deque.pop_back();
        }
        deque.push_back(i);
        if deque.front().is_some_and(|&j| j + k <= i) {
            deque.pop_front();
        }
        if i + 1 >= k {
            out.push(values[*deque.front().expect("window is nonempty")]);
        }
    }
    Ok(TimeSeries {
        covariates: series.covariates()[..out_len].to_vec(),
        values: out,
    })
}

/// Maxima of `floor(n / m)` consecutive blocks of length `m`; a trailing
/// partial block is discarded. Each block is labelled by the covariate at its
/// middle (the mean of the two central covariates when `m` is even).
pub fn block_maxima(series: &TimeSeries, m: usize) -> Result<BlockMaxSeries> {
    let n = series.len();
    if m == 0 {
        return Err(Error::InvalidWindow);
    }
    if m > n {
        return Err(Error::BlockTooLarge { m, n });
    }
    let t = series.covariates();
    let (block_covariates, maxima) = series
        .values()
        .chunks_exact(m)
        .enumerate()
        .map(|(b, block)| {
            let start = b * m;
            let mid = 0.5 * (t[start + (m - 1) / 2] + t[start + m / 2]);
            let mx = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (mid, mx)
        })
        .unzip();
    Ok(BlockMaxSeries {
        block_covariates,
        maxima,
        block_length: m,
    })
}

/// Type-7 empirical quantile of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fenwick tree over value ranks, used as an order-statistic multiset.
struct RankTree {
    tree: Vec<u32>,
    top_bit: usize,
}

impl RankTree {
    fn new(n: usize) -> Self {
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self {
            tree: vec![0; n + 1],
            top_bit,
        }
    }

    fn add(&mut self, rank: usize, delta: i32) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i64 + delta as i64) as u32;
            i += i & i.wrapping_neg();
        }
    }

    /// Rank of the `j`-th smallest present element (0-based).
    fn select(&self, j: usize) -> usize {
        let mut pos = 0;
        let mut remaining = j as u32 + 1;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] < remaining {
                pos = next;
                remaining -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Centred moving quantile over the closed covariate window
/// `[t_i - span/2, t_i + span/2]`, type-7 interpolation.
pub fn moving_quantile(series: &TimeSeries, window_span: f64, q: f64) -> Result<TimeSeries> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidQuantile(q));
    }
    if !(window_span > 0.0 && window_span.is_finite()) {
        return Err(Error::InvalidSeries(format!(
            "window span must be positive, got {window_span}"
        )));
    }
    let n = series.len();
    let t = series.covariates();
    let x = series.values();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let half = 0.5 * window_span;
    let mut tree = RankTree::new(n);
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        while hi < n && t[hi] <= t[i] + half {
            tree.add(rank[hi], 1);
            hi += 1;
        }
        while t[lo] < t[i] - half {
            tree.add(rank[lo], -1);
            lo += 1;
        }
        let count = hi - lo;
        let h = (count - 1) as f64 * q;
        let j = h.floor() as usize;
        let below = x[order[tree.select(j)]];
        let above = if j + 1 < count {
            x[order[tree.select(j + 1)]]
        } else {
            below
        };
        out.push(below + (h - j as f64) * (above - below));
    }
    Ok(TimeSeries {
        covariates: t.to_vec(),
        values: out,
    })
}

/// Sample autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::InvalidLag { max_lag, n });
    }
    let x = series.values();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = centred.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::InvalidSeries(
            "constant series has undefined autocorrelation".into(),
        ));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                1.0
            } else {
                centred[..n - lag]
                    .iter()
                    .zip(&centred[lag..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / denom
            }
        })
        .collect())
}

/// Removes observations whose value is exactly zero.
pub fn drop_zeros(series: &TimeSeries) -> Result<TimeSeries> {
    let (covariates, values): (Vec<f64>, Vec<f64>) = series
        .covariates()
        .iter()
        .zip(series.values())
        .filter(|(_, &v)| v != 0.0)
        .map(|(&t, &v)| (t, v))
        .unzip();
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(TimeSeries { covariates, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_series() {
        assert!(matches!(
            TimeSeries::new(vec![], vec![]),
            Err(Error::EmptySeries)
        ));
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        // ties in covariates are fine
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn moving_minimum_examples() {
        let s = series(&[5.0, 2.0, 7.0, 3.0]);
        assert_eq!(moving_minimum(&s, 1).unwrap(), s);
        let y = moving_minimum(&s, 2).unwrap();
        assert_eq!(y.values(), &[2.0, 2.0, 3.0]);
        assert_eq!(y.covariates(), &[0.0, 1.0, 2.0]);
        let full = moving_minimum(&series(&[1.0, 2.0, 3.0, 4.0, 5.0]), 5).unwrap();
        assert_eq!(full.values(), &[1.0]);
    }

    #[test]
    fn moving_minimum_errors() {
        let s = series(&[1.0, 2.0]);
        assert!(matches!(moving_minimum(&s, 0), Err(Error::InvalidWindow)));
        assert!(matches!(
            moving_minimum(&s, 3),
            Err(Error::WindowTooLarge { k: 3, n: 2 })
        ));
    }

    #[test]
    fn block_maxima_examples() {
        let b = block_maxima(&series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), 3).unwrap();
        assert_eq!(b.maxima(), &[3.0, 6.0]);
        assert_eq!(b.block_covariates(), &[1.0, 4.0]);
        let s = series(&[4.0, 9.0, 2.0, 7.0, 5.0]);
        let b = block_maxima(&s, 2).unwrap();
        assert_eq!(b.maxima(), &[9.0, 7.0]);
        assert_eq!(b.block_covariates(), &[0.5, 2.5]);
        assert!(b.matches_source(&s));
        let b1 = block_maxima(&s, 1).unwrap();
        assert_eq!(b1.maxima(), s.values());
        assert!(matches!(
            block_maxima(&s, 6),
            Err(Error::BlockTooLarge { m: 6, n: 5 })
        ));
    }

    #[test]
    fn moving_quantile_examples() {
        let c = TimeSeries::new((0..50).map(|i| i as f64 * 0.1).collect(), vec![3.5; 50]).unwrap();
        for q in [0.05, 0.5, 0.95] {
            let u = moving_quantile(&c, 1.0, q).unwrap();
            assert!(u.values().iter().all(|&v| v == 3.5));
        }

        // 1..=100 over one covariate unit; a span of 2 puts every point in every window
        let s = TimeSeries::new(
            (0..100).map(|i| i as f64 / 100.0).collect(),
            (1..=100).map(f64::from).collect(),
        )
        .unwrap();
        let u = moving_quantile(&s, 2.0, 0.95).unwrap();
        for v in u.values() {
            assert_abs_diff_eq!(*v, 95.05, epsilon = 1e-9);
        }

        let u = moving_quantile(&series(&[1.0, 2.0, 3.0]), 10.0, 0.5).unwrap();
        assert_eq!(u.values(), &[2.0, 2.0, 2.0]);

        assert!(matches!(
            moving_quantile(&c, 1.0, 1.0),
            Err(Error::InvalidQuantile(_))
        ));
        assert!(moving_quantile(&c, 0.0, 0.5).is_err());
    }

    #[test]
    fn moving_quantile_is_local() {
        // values jump halfway; a narrow window only sees its own regime
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let x: Vec<f64> = (0..200).map(|i| if i < 100 { 1.0 } else { 10.0 }).collect();
        let u = moving_quantile(&TimeSeries::new(t, x).unwrap(), 1.0, 0.9).unwrap();
        assert_eq!(u.values()[10], 1.0);
        assert_eq!(u.values()[190], 10.0);
    }

    #[test]
    fn autocorrelation_examples() {
        let s = series(&[1.0, 3.0, 2.0, 5.0, 4.0]);
        let acf = autocorrelation(&s, 2).unwrap();
        assert_eq!(acf[0], 1.0);
        assert_eq!(acf.len(), 3);

        let periodic: Vec<f64> = (0..1000).map(|i| [0.0, 1.0, 4.0, 2.0][i % 4]).collect();
        let acf = autocorrelation(&series(&periodic), 4).unwrap();
        assert_abs_diff_eq!(acf[4], 1.0, epsilon = 0.01);

        assert!(matches!(
            autocorrelation(&s, 5),
            Err(Error::InvalidLag { max_lag: 5, n: 5 })
        ));
    }

    #[test]
    fn drop_zeros_examples() {
        let s = series(&[0.0, 3.0, 0.0, 5.0]);
        let d = drop_zeros(&s).unwrap();
        assert_eq!(d.values(), &[3.0, 5.0]);
        assert_eq!(d.covariates(), &[1.0, 3.0]);
        let nz = series(&[1.0, 2.0]);
        assert_eq!(drop_zeros(&nz).unwrap(), nz);
        assert!(matches!(
            drop_zeros(&series(&[0.0, 0.0])),
            Err(Error::EmptySeries)
        ));
    }

    fn naive_moving_quantile(s: &TimeSeries, span: f64, q: f64) -> Vec<f64> {
        let t = s.covariates();
        (0..s.len())
            .map(|i| {
                let mut w: Vec<f64> = (0..s.len())
                    .filter(|&j| t[j] >= t[i] - span / 2.0 && t[j] <= t[i] + span / 2.0)
                    .map(|j| s.values()[j])
                    .collect();
                w.sort_by(f64::total_cmp);
                quantile_sorted(&w, q)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn moving_minimum_certifies_runs(
            values in prop::collection::vec(-5i32..5, 1..30),
            k in 1usize..6,
            z in -5i32..5,
        ) {
            let x: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            prop_assume!(k <= x.len());
            let y = moving_minimum(&series(&x), k).unwrap();
            for (j, &yj) in y.values().iter().enumerate() {
                let all_above = x[j..j + k].iter().all(|&xi| xi >= z as f64);
                prop_assert_eq!(yj >= z as f64, all_above);
            }
        }

        #[test]
        fn moving_minimum_monotone_in_k(
            x in prop::collection::vec(-100.0f64..100.0, 2..40),
            k in 1usize..10,
        ) {
            prop_assume!(k < x.len());
            let s = series(&x);
            let a = moving_minimum(&s, k).unwrap();
            let b = moving_minimum(&s, k + 1).unwrap();
            for (bj, aj) in b.values().iter().zip(a.values()) {
                prop_assert!(bj <= aj);
            }
        }

        #[test]
        fn block_maxima_of_unit_window_is_identity(
            x in prop::collection::vec(-100.0f64..100.0, 1..60),
            m in 1usize..8,
        ) {
            prop_assume!(m <= x.len());
            let s = series(&x);
            let direct = block_maxima(&s, m).unwrap();
            prop_assert_eq!(block_maxima(&moving_minimum(&s, 1).unwrap(), m).unwrap(), direct.clone());
            prop_assert_eq!(direct.len(), x.len() / m);
            prop_assert!(direct.matches_source(&s));
        }

        #[test]
        fn moving_quantile_matches_naive_and_is_monotone_in_q(
            x in prop::collection::vec(-50.0f64..50.0, 1..60),
            gaps in prop::collection::vec(0u8..3, 60),
            span in 0.5f64..6.0,
            q1 in 0.01f64..0.98,
            dq in 0.001f64..0.5,
        ) {
            let mut t = Vec::with_capacity(x.len());
            let mut acc = 0.0;
            for g in gaps.iter().take(x.len()) {
                acc += *g as f64 * 0.5;
                t.push(acc);
            }
            let s = TimeSeries::new(t, x).unwrap();
            let q2 = (q1 + dq).min(0.99);
            let a = moving_quantile(&s, span, q1).unwrap();
            let b = moving_quantile(&s, span, q2).unwrap();
            let naive = naive_moving_quantile(&s, span, q1);
            for ((va, vb), vn) in a.values().iter().zip(b.values()).zip(&naive) {
                prop_assert!((va - vn).abs() < 1e-9);
                prop_assert!(vb >= va);
            }
        }
    }
}
