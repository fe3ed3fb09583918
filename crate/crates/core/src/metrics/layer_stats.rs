//! Layer-count histograms and range shares.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serialization::IndexEntry;

/// Inclusive layer-count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBin {
    pub lo: usize,
    pub hi: usize,
}

impl CountBin {
    pub const fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, n: usize) -> bool {
        (self.lo..=self.hi).contains(&n)
    }
}

impl fmt::Display for CountBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for CountBin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bin {s:?} is not of the form LO-HI"));
        let (lo, hi) = s.trim().split_once('-').ok_or_else(bad)?;
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(Error::Config(format!("bin {s:?} has lower bound above upper bound")));
        }
        Ok(Self { lo, hi })
    }
}

/// Ascending, non-overlapping bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinSet(Vec<CountBin>);

/// Bins used for dataset layer-count distributions.
pub const DISTRIBUTION_BINS: [CountBin; 6] = [
    CountBin::new(1, 5),
    CountBin::new(6, 10),
    CountBin::new(11, 15),
    CountBin::new(16, 20),
    CountBin::new(21, 25),
    CountBin::new(26, 52),
];

/// Coarser bins used to break down reconstruction quality.
pub const EVALUATION_BINS: [CountBin; 4] = [
    CountBin::new(1, 7),
    CountBin::new(8, 9),
    CountBin::new(10, 12),
    CountBin::new(13, 35),
];

/// Ranges whose shares are reported alongside the histogram by default.
pub const DEFAULT_SHARES: [CountBin; 2] = [CountBin::new(6, 15), CountBin::new(1, 20)];

impl BinSet {
    pub fn new(bins: Vec<CountBin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Config("at least one bin is required".into()));
        }
        for w in bins.windows(2) {
            if w[1].lo <= w[0].hi {
                return Err(Error::Config(format!("bins {} and {} overlap or are out of order", w[0], w[1])));
            }
        }
        Ok(Self(bins))
    }

    pub fn distribution() -> Self {
        Self(DISTRIBUTION_BINS.to_vec())
    }

    pub fn evaluation() -> Self {
        Self(EVALUATION_BINS.to_vec())
    }

    pub fn bins(&self) -> &[CountBin] {
        &self.0
    }

    pub fn find(&self, n: usize) -> Option<usize> {
        self.0.iter().position(|b| b.contains(n))
    }
}

impl FromStr for BinSet {
    type Err = Error;

    /// Parses `"1-3,4-52"`.
    fn from_str(s: &str) -> Result<Self> {
        BinSet::new(s.split(',').map(str::parse).collect::<Result<_>>()?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinCount {
    pub bin: String,
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeShare {
    pub range: String,
    pub lo: usize,
    pub hi: usize,
    /// Fraction of counted samples, in `[0, 1]`.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCountStats {
    /// Samples with a layer count.
    pub total: usize,
    /// Index entries without one (failed samples).
    pub failed: usize,
    /// Counted samples falling outside every bin.
    pub unbinned: usize,
    pub histogram: Vec<BinCount>,
    pub shares: Vec<RangeShare>,
}

pub fn layer_count_stats(counts: &[usize], bins: &BinSet, shares: &[CountBin]) -> LayerCountStats {
    let mut hist = vec![0usize; bins.bins().len()];
    let mut unbinned = 0;
    for &n in counts {
        match bins.find(n) {
            Some(i) => hist[i] += 1,
            None => unbinned += 1,
        }
    }
    let total = counts.len();
    let shares = shares
        .iter()
        .map(|r| {
            let k = counts.iter().filter(|&&n| r.contains(n)).count();
            RangeShare {
                range: r.to_string(),
                lo: r.lo,
                hi: r.hi,
                share: if total == 0 { 0.0 } else { k as f64 / total as f64 },
            }
        })
        .collect();
    LayerCountStats {
        total,
        failed: 0,
        unbinned,
        histogram: bins
            .bins()
            .iter()
            .zip(hist)
            .map(|(b, count)| BinCount {
                bin: b.to_string(),
                lo: b.lo,
                hi: b.hi,
                count,
            })
            .collect(),
        shares,
    }
}

/// Statistics over the successful entries of an index.
pub fn layer_count_stats_from_index(entries: &[IndexEntry], bins: &BinSet, shares: &[CountBin]) -> LayerCountStats {
    let counts: Vec<usize> = entries.iter().filter(|e| e.is_ok()).filter_map(|e| e.layer_count).collect();
    let mut stats = layer_count_stats(&counts, bins, shares);
    stats.failed = entries.len() - counts.len();
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_bins() {
        let b: BinSet = "1-3, 4-52".parse().unwrap();
        assert_eq!(b.bins(), &[CountBin::new(1, 3), CountBin::new(4, 52)]);
        assert!("3-1".parse::<BinSet>().is_err());
        assert!("1-5,5-9".parse::<BinSet>().is_err());
        assert!("1-5,x".parse::<BinSet>().is_err());
        assert!("".parse::<BinSet>().is_err());
    }

    #[test]
    fn seven_layers_land_in_second_bin() {
        let s = layer_count_stats(&[7], &BinSet::distribution(), &DEFAULT_SHARES);
        assert_eq!(s.histogram[1].count, 1);
        assert_eq!(s.histogram[1].bin, "6-10");
        assert_eq!(s.shares[0].share, 1.0);
    }

    #[test]
    fn empty_input_is_all_zero() {
        let s = layer_count_stats(&[], &BinSet::distribution(), &DEFAULT_SHARES);
        assert!(s.histogram.iter().all(|b| b.count == 0));
        assert!(s.shares.iter().all(|r| r.share == 0.0));
    }

    #[test]
    fn partition_and_unbinned() {
        let counts: Vec<usize> = (0..=60).collect();
        let s = layer_count_stats(&counts, &BinSet::distribution(), &[]);
        let binned: usize = s.histogram.iter().map(|b| b.count).sum();
        assert_eq!(binned, 52);
        assert_eq!(s.unbinned, 9);
        assert_eq!(binned + s.unbinned, s.total);
    }
}
