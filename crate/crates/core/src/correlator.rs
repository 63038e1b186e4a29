//! Coincidence (HBT) and TCSPC histograms from picosecond timestamp channels.
//!
//! Lags are `τ = t₂ − t₁` (start on channel 1, stop on channel 2). Bins are
//! left-closed, right-open, and the coincidence axis is symmetric about zero.
//! Bin widths are handled internally in femtoseconds so that non-integer
//! picosecond widths (73.3 ps) bin integer timestamps exactly.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default coincidence bin width, seconds.
pub const DEFAULT_BIN_WIDTH_S: f64 = 73.3e-12;

const FS_PER_PS: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HistogramKind {
    Coincidence,
    Tcspc,
    Irf,
    Spectrum,
}

impl HistogramKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HistogramKind::Coincidence => "coincidence",
            HistogramKind::Tcspc => "tcspc",
            HistogramKind::Irf => "irf",
            HistogramKind::Spectrum => "spectrum",
        }
    }
}

impl fmt::Display for HistogramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HistogramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coincidence" => Ok(HistogramKind::Coincidence),
            "tcspc" => Ok(HistogramKind::Tcspc),
            "irf" => Ok(HistogramKind::Irf),
            "spectrum" => Ok(HistogramKind::Spectrum),
            other => Err(Error::Format(format!("unknown histogram kind {other:?}"))),
        }
    }
}

/// Raw integer counts, or real values after normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum Counts {
    Integer(Vec<u64>),
    Real(Vec<f64>),
}

impl Counts {
    pub fn len(&self) -> usize {
        match self {
            Counts::Integer(c) => c.len(),
            Counts::Real(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Counts::Integer(c) => c.iter().map(|&v| v as f64).collect(),
            Counts::Real(c) => c.clone(),
        }
    }
}

/// Binned data with acquisition metadata.
///
/// The axis unit is seconds for time histograms and nanometres for spectra.
/// `n1_cps`/`n2_cps` are the mean count rates of the start and stop channels
/// (for TCSPC: detector and sync).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub kind: HistogramKind,
    pub bin_width: f64,
    /// Left edge of the first bin.
    pub origin: f64,
    pub counts: Counts,
    pub duration_s: f64,
    pub n1_cps: f64,
    pub n2_cps: f64,
}

impl Histogram {
    pub fn new(kind: HistogramKind, bin_width: f64, origin: f64, counts: Counts) -> Self {
        Histogram {
            kind,
            bin_width,
            origin,
            counts,
            duration_s: 0.0,
            n1_cps: 0.0,
            n2_cps: 0.0,
        }
    }

    /// Attaches acquisition metadata.
    pub fn with_acquisition(mut self, duration_s: f64, n1_cps: f64, n2_cps: f64) -> Self {
        self.duration_s = duration_s;
        self.n1_cps = n1_cps;
        self.n2_cps = n2_cps;
        self
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_left(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.bin_width
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.origin + (k as f64 + 0.5) * self.bin_width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.bin_center(k)).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.counts.to_f64()
    }

    pub fn integer_counts(&self) -> Option<&[u64]> {
        match &self.counts {
            Counts::Integer(c) => Some(c),
            Counts::Real(_) => None,
        }
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    /// Normalizes a coincidence histogram with its own metadata.
    pub fn normalized_g2(&self) -> Result<Histogram> {
        normalize_g2(self, self.n1_cps, self.n2_cps, self.bin_width, self.duration_s)
    }
}

/// Symmetric lag binning in exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagBins {
    pub bin_fs: u64,
    pub window_ps: u64,
    /// Bins on each side of zero; every bin lies inside the window.
    pub half_bins: u64,
}

impl LagBins {
    pub fn new(bin_width_s: f64, window_s: f64) -> Result<Self> {
        if !(bin_width_s.is_finite() && bin_width_s > 0.0) {
            return Err(Error::Precondition(format!("bin width must be > 0, got {bin_width_s}")));
        }
        let bin_fs = (bin_width_s * 1e15).round() as u64;
        let window_ps = (window_s * 1e12).round() as u64;
        if bin_fs == 0 {
            return Err(Error::Precondition("bin width is below 1 fs".into()));
        }
        if window_ps * FS_PER_PS as u64 <= bin_fs {
            return Err(Error::Precondition(format!(
                "window ({window_s} s) must exceed the bin width ({bin_width_s} s)"
            )));
        }
        Ok(LagBins {
            bin_fs,
            window_ps,
            half_bins: window_ps * FS_PER_PS as u64 / bin_fs,
        })
    }

    pub fn n_bins(&self) -> usize {
        2 * self.half_bins as usize
    }

    pub fn bin_width_s(&self) -> f64 {
        self.bin_fs as f64 * 1e-15
    }

    pub fn origin_s(&self) -> f64 {
        -(self.half_bins as f64) * self.bin_width_s()
    }

    /// Bin holding lag `dt_ps`, if it is within the window and the binned range.
    #[inline]
    pub fn index(&self, dt_ps: i64) -> Option<usize> {
        if dt_ps.unsigned_abs() > self.window_ps {
            return None;
        }
        let k = (dt_ps * FS_PER_PS).div_euclid(self.bin_fs as i64);
        let h = self.half_bins as i64;
        (-h..h).contains(&k).then(|| (k + h) as usize)
    }

    fn histogram(&self, counts: Vec<u64>) -> Histogram {
        Histogram::new(
            HistogramKind::Coincidence,
            self.bin_width_s(),
            self.origin_s(),
            Counts::Integer(counts),
        )
    }
}

fn check_sorted(ch: &[u64], name: &str) -> Result<()> {
    match ch.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(Error::Precondition(format!(
            "{name} is not sorted (record {} precedes record {})",
            i + 1,
            i
        ))),
        None => Ok(()),
    }
}

/// Counts pairs `(t₁, t₂)` by lag bin with a two-pointer sweep. Cost is
/// O(N·w̄) with w̄ the mean number of channel-2 events per window.
pub fn coincidence_histogram(
    ch1: &[u64],
    ch2: &[u64],
    bin_width_s: f64,
    window_s: f64,
) -> Result<Histogram> {
    let bins = LagBins::new(bin_width_s, window_s)?;
    check_sorted(ch1, "channel 1")?;
    check_sorted(ch2, "channel 2")?;
    let mut counts = vec![0u64; bins.n_bins()];
    sweep(ch1, ch2, &bins, &mut counts);
    Ok(bins.histogram(counts))
}

/// Same result as [`coincidence_histogram`], with channel 1 split into chunks
/// correlated in parallel against the shared channel 2.
pub fn coincidence_histogram_par(
    ch1: &[u64],
    ch2: &[u64],
    bin_width_s: f64,
    window_s: f64,
) -> Result<Histogram> {
    let bins = LagBins::new(bin_width_s, window_s)?;
    check_sorted(ch1, "channel 1")?;
    check_sorted(ch2, "channel 2")?;
    let chunk = (ch1.len() / (4 * rayon::current_num_threads()).max(1)).max(4096);
    let counts = ch1
        .par_chunks(chunk)
        .map(|part| {
            let mut c = vec![0u64; bins.n_bins()];
            sweep(part, ch2, &bins, &mut c);
            c
        })
        .reduce(
            || vec![0u64; bins.n_bins()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(bins.histogram(counts))
}

fn sweep(ch1: &[u64], ch2: &[u64], bins: &LagBins, counts: &mut [u64]) {
    let Some(&first) = ch1.first() else { return };
    let mut lo = ch2.partition_point(|&t| t < first.saturating_sub(bins.window_ps));
    for &t1 in ch1 {
        let start = t1.saturating_sub(bins.window_ps);
        while lo < ch2.len() && ch2[lo] < start {
            lo += 1;
        }
        let stop = t1.saturating_add(bins.window_ps);
        for &t2 in ch2[lo..].iter().take_while(|&&t2| t2 <= stop) {
            if let Some(i) = bins.index(t2 as i64 - t1 as i64) {
                counts[i] += 1;
            }
        }
    }
}

/// O(N₁·N₂) enumeration of every pair. Test oracle for the sweep.
pub fn brute_force_pairs(
    ch1: &[u64],
    ch2: &[u64],
    bin_width_s: f64,
    window_s: f64,
) -> Result<Histogram> {
    let bins = LagBins::new(bin_width_s, window_s)?;
    let mut counts = vec![0u64; bins.n_bins()];
    for &t1 in ch1 {
        for &t2 in ch2 {
            if let Some(i) = bins.index(t2 as i64 - t1 as i64) {
                counts[i] += 1;
            }
        }
    }
    Ok(bins.histogram(counts))
}

/// `C_N(τ) = c(τ) / (N₁·N₂·ω·T)` with rates in counts/s, ω and T in seconds.
pub fn normalize_g2(h: &Histogram, n1_cps: f64, n2_cps: f64, bin_width_s: f64, duration_s: f64) -> Result<Histogram> {
    if h.kind != HistogramKind::Coincidence {
        return Err(Error::Precondition(format!(
            "g2 normalization needs a coincidence histogram, got {}",
            h.kind
        )));
    }
    let denom = n1_cps * n2_cps * bin_width_s * duration_s;
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Domain(format!(
            "normalization denominator N1·N2·ω·T = {denom} (N1={n1_cps}, N2={n2_cps}, ω={bin_width_s}, T={duration_s})"
        )));
    }
    let values = h.values().into_iter().map(|c| c / denom).collect();
    Ok(Histogram {
        counts: Counts::Real(values),
        duration_s,
        n1_cps,
        n2_cps,
        ..h.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcspcHistogram {
    pub histogram: Histogram,
    /// Photons with no preceding sync, or none within one period.
    pub discarded: u64,
}

/// Start-stop TCSPC: each photon is binned by its delay from the most recent
/// sync. Delays are in `[0, period)`.
pub fn tcspc_histogram(photons: &[u64], syncs: &[u64], period_s: f64, bin_s: f64) -> Result<TcspcHistogram> {
    if !(bin_s.is_finite() && bin_s > 0.0 && period_s.is_finite() && bin_s <= period_s) {
        return Err(Error::Precondition(format!(
            "need 0 < bin ({bin_s} s) <= period ({period_s} s)"
        )));
    }
    check_sorted(photons, "photon channel")?;
    check_sorted(syncs, "sync channel")?;
    let bin_fs = (bin_s * 1e15).round() as u64;
    let period_ps = (period_s * 1e12).round() as u64;
    let n_bins = (period_ps * FS_PER_PS as u64).div_ceil(bin_fs) as usize;
    let mut counts = vec![0u64; n_bins];
    let mut discarded = 0;
    let mut j = 0usize;
    for &t in photons {
        while j + 1 < syncs.len() && syncs[j + 1] <= t {
            j += 1;
        }
        match syncs.get(j) {
            Some(&s) if s <= t && t - s < period_ps => {
                counts[((t - s) * FS_PER_PS as u64 / bin_fs) as usize] += 1;
            }
            _ => discarded += 1,
        }
    }
    Ok(TcspcHistogram {
        histogram: Histogram::new(HistogramKind::Tcspc, bin_fs as f64 * 1e-15, 0.0, Counts::Integer(counts)),
        discarded,
    })
}
