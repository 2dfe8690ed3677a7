//! Peak lists, unit-width m/z binning, intensity transforms and cosine
//! similarity.
//!
//! The processing order is fixed: bin, then transform, then normalize.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Number of unit-width m/z bins; bin `b` covers `[b, b + 1)`.
pub const NUM_BINS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub mz: f64,
    pub intensity: f64,
}

/// A validated, non-empty list of centroided peaks.
#[derive(Clone, Debug, PartialEq)]
pub struct PeakList {
    peaks: Vec<Peak>,
}

impl PeakList {
    pub fn new(peaks: Vec<Peak>) -> Result<Self> {
        if peaks.is_empty() {
            return Err(Error::Spectrum("peak list is empty".into()));
        }
        for p in &peaks {
            if !(p.mz > 0.0) || !p.mz.is_finite() {
                return Err(Error::Spectrum(format!("m/z must be positive, got {}", p.mz)));
            }
            if !(p.intensity >= 0.0) || !p.intensity.is_finite() {
                return Err(Error::Spectrum(format!(
                    "intensity must be non-negative, got {}",
                    p.intensity
                )));
            }
        }
        Ok(PeakList { peaks })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        PeakList::new(
            pairs
                .iter()
                .map(|&(mz, intensity)| Peak { mz, intensity })
                .collect(),
        )
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transform {
    Raw,
    /// `ln(1 + x)`, so that empty bins stay zero.
    Log,
    Sqrt,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Raw => x,
            Transform::Log => x.ln_1p(),
            Transform::Sqrt => x.sqrt(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Raw => "raw",
            Transform::Log => "log",
            Transform::Sqrt => "sqrt",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Transform::Raw),
            "log" => Ok(Transform::Log),
            "sqrt" => Ok(Transform::Sqrt),
            other => Err(Error::Config(format!("unknown transform `{other}`"))),
        }
    }
}

/// A 1000-bin intensity vector tagged with its processing state.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedSpectrum {
    intensities: Vec<f64>,
    transform: Transform,
    normalized: bool,
}

impl BinnedSpectrum {
    pub fn new(intensities: Vec<f64>, transform: Transform, normalized: bool) -> Result<Self> {
        if intensities.len() != NUM_BINS {
            return Err(Error::Spectrum(format!(
                "expected {NUM_BINS} bins, got {}",
                intensities.len()
            )));
        }
        if let Some(bad) = intensities.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Spectrum(format!("bin intensity {bad} is not a finite non-negative value")));
        }
        Ok(BinnedSpectrum {
            intensities,
            transform,
            normalized,
        })
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn into_intensities(self) -> Vec<f64> {
        self.intensities
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.intensities.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_all_zero(&self) -> bool {
        self.intensities.iter().all(|&v| v == 0.0)
    }

    /// Multiplies every bin by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Spectrum(format!("scale factor must be positive, got {factor}")));
        }
        BinnedSpectrum::new(
            self.intensities.iter().map(|v| v * factor).collect(),
            self.transform,
            false,
        )
    }
}

/// Bins a peak list by `floor(mz)`, keeping the maximum intensity per bin.
///
/// Returns the spectrum and the number of peaks dropped for falling at or
/// beyond m/z 1000.
pub fn bin_peaks(peaks: &PeakList) -> Result<(BinnedSpectrum, usize)> {
    let mut bins = vec![0.0; NUM_BINS];
    let mut dropped = 0;
    for p in peaks.peaks() {
        let b = p.mz.floor() as usize;
        if b >= NUM_BINS {
            dropped += 1;
            continue;
        }
        bins[b] = f64::max(bins[b], p.intensity);
    }
    if dropped == peaks.len() {
        return Err(Error::Spectrum(format!(
            "all {dropped} peaks lie outside m/z [0, {NUM_BINS})"
        )));
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} peak(s) at m/z >= {NUM_BINS}");
    }
    Ok((BinnedSpectrum::new(bins, Transform::Raw, false)?, dropped))
}

/// Applies the log or square-root transform to a raw spectrum.
pub fn transform(spec: &BinnedSpectrum, kind: Transform) -> Result<BinnedSpectrum> {
    if spec.transform != Transform::Raw || spec.normalized {
        return Err(Error::Spectrum(format!(
            "spectrum is already {}{}; transforms apply to raw spectra only",
            spec.transform,
            if spec.normalized { " and normalized" } else { "" }
        )));
    }
    if kind == Transform::Raw {
        return Err(Error::Spectrum("target transform must be log or sqrt".into()));
    }
    BinnedSpectrum::new(
        spec.intensities.iter().map(|&v| kind.apply(v)).collect(),
        kind,
        false,
    )
}

/// Scales to unit Euclidean norm.
pub fn normalize(spec: &BinnedSpectrum) -> Result<BinnedSpectrum> {
    let norm = spec.norm();
    if norm == 0.0 {
        return Err(Error::Spectrum("cannot normalize an all-zero spectrum".into()));
    }
    Ok(BinnedSpectrum {
        intensities: spec.intensities.iter().map(|v| v / norm).collect(),
        transform: spec.transform,
        normalized: true,
    })
}

/// Bins, transforms and normalizes a peak list into a training target.
pub fn prepare_target(peaks: &PeakList, kind: Transform) -> Result<BinnedSpectrum> {
    let (raw, _) = bin_peaks(peaks)?;
    let t = if kind == Transform::Raw { raw } else { transform(&raw, kind)? };
    normalize(&t)
}

pub fn cosine_similarity(a: &BinnedSpectrum, b: &BinnedSpectrum) -> Result<f64> {
    if a.transform != b.transform {
        return Err(Error::Spectrum(format!(
            "cannot compare a {} spectrum with a {} spectrum",
            a.transform, b.transform
        )));
    }
    cosine(&a.intensities, &b.intensities)
}

/// Cosine of two non-negative vectors.
pub(crate) fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (
        a.iter().map(|v| v * v).sum::<f64>().sqrt(),
        b.iter().map(|v| v * v).sum::<f64>().sqrt(),
    );
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Spectrum("cosine similarity of an all-zero spectrum".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec_from(values: &[(usize, f64)]) -> BinnedSpectrum {
        let mut v = vec![0.0; NUM_BINS];
        for &(i, x) in values {
            v[i] = x;
        }
        BinnedSpectrum::new(v, Transform::Raw, false).unwrap()
    }

    #[test]
    fn binning_keeps_maximum() {
        let (s, dropped) = bin_peaks(&PeakList::from_pairs(&[(123.4, 50.0), (123.7, 80.0)]).unwrap()).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(s.intensities()[123], 80.0);
        assert_eq!(s.intensities().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn binning_edges() {
        let (s, _) = bin_peaks(&PeakList::from_pairs(&[(0.5, 7.0)]).unwrap()).unwrap();
        assert_eq!(s.intensities()[0], 7.0);
        let (s, dropped) = bin_peaks(&PeakList::from_pairs(&[(1000.2, 9.0), (10.0, 1.0)]).unwrap()).unwrap();
        assert_eq!(s.intensities()[10], 1.0);
        assert_eq!(dropped, 1);
        assert!(bin_peaks(&PeakList::from_pairs(&[(1000.0, 9.0)]).unwrap()).is_err());
        assert!(PeakList::from_pairs(&[]).is_err());
        assert!(PeakList::from_pairs(&[(0.0, 1.0)]).is_err());
        assert!(PeakList::from_pairs(&[(1.0, -1.0)]).is_err());
    }

    #[test]
    fn transforms() {
        let zeros = spec_from(&[]);
        for k in [Transform::Log, Transform::Sqrt] {
            assert!(transform(&zeros, k).unwrap().is_all_zero());
        }
        let s = spec_from(&[(5, 100.0)]);
        assert_eq!(transform(&s, Transform::Sqrt).unwrap().intensities()[5], 10.0);
        let l = transform(&s, Transform::Log).unwrap();
        assert!((l.intensities()[5] - 4.6151).abs() < 1e-4);
        assert!((l.intensities()[5] - 101f64.ln()).abs() < 1e-12);
        assert!(transform(&l, Transform::Log).is_err());
        assert!(transform(&normalize(&s).unwrap(), Transform::Sqrt).is_err());
    }

    #[test]
    fn normalization() {
        let one_hot = spec_from(&[(17, 1.0)]);
        assert_eq!(normalize(&one_hot).unwrap().intensities(), one_hot.intensities());
        let n = normalize(&spec_from(&[(0, 3.0), (1, 4.0)])).unwrap();
        assert_eq!(&n.intensities()[..3], &[0.6, 0.8, 0.0]);
        assert!(n.is_normalized());
        assert!(normalize(&spec_from(&[])).is_err());
    }

    #[test]
    fn cosine_examples() {
        let a = spec_from(&[(1, 2.0), (40, 3.0)]);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = spec_from(&[(2, 2.0)]);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
        let c = spec_from(&[(0, 1.0), (1, 1.0)]);
        let d = spec_from(&[(0, 1.0)]);
        assert!((cosine_similarity(&c, &d).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(cosine_similarity(&a, &spec_from(&[])).is_err());
        let t = transform(&a, Transform::Log).unwrap();
        assert!(cosine_similarity(&a, &t).is_err());
    }

    fn arb_spectrum() -> impl Strategy<Value = BinnedSpectrum> {
        proptest::collection::vec((0usize..NUM_BINS, 0.01f64..1e4), 1..40).prop_map(|pairs| spec_from(&pairs))
    }

    proptest! {
        #[test]
        fn normalized_norm_is_one(s in arb_spectrum()) {
            prop_assert!((normalize(&s).unwrap().norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(a in arb_spectrum(), b in arb_spectrum(), c in 1e-3f64..1e3) {
            let ab = cosine_similarity(&a, &b).unwrap();
            prop_assert!((ab - cosine_similarity(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((ab - cosine_similarity(&a, &b.scaled(c).unwrap()).unwrap()).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn binning_ignores_peak_order(mut pairs in proptest::collection::vec((0.1f64..999.9, 0.0f64..100.0), 1..30)) {
            let forward = bin_peaks(&PeakList::from_pairs(&pairs).unwrap()).unwrap();
            pairs.reverse();
            let backward = bin_peaks(&PeakList::from_pairs(&pairs).unwrap()).unwrap();
            prop_assert_eq!(forward, backward);
        }

        #[test]
        fn transforms_are_monotone(x in 0.0f64..1e6, y in 0.0f64..1e6) {
            for k in [Transform::Log, Transform::Sqrt] {
                if x < y {
                    prop_assert!(k.apply(x) <= k.apply(y));
                }
            }
        }
    }
}
