//! Observation types: snapshot size samples and dividing-cell pairs.

use crate::error::{Error, Result};

/// Sizes of cells observed at one instant, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSample(Vec<f64>);

impl SizeSample {
    pub fn new(mut sizes: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&bad) = sizes.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::Domain { what: "cell size", value: bad });
        }
        sizes.sort_by(f64::total_cmp);
        Ok(Self(sizes))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Unbiased sample standard deviation (0 for a single observation).
    pub fn std_dev(&self) -> f64 {
        let n = self.0.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.0.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

/// One dividing cell: increment accumulated since birth and size at division.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DividingCell {
    pub increment: f64,
    pub size: f64,
}

/// Increment-and-size pairs of dividing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DividingSample(Vec<DividingCell>);

impl DividingSample {
    pub fn new(cells: Vec<DividingCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptySample);
        }
        for c in &cells {
            check_dividing(c).map_err(|m| Error::Sampling(m.to_string()))?;
        }
        Ok(Self(cells))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cells(&self) -> &[DividingCell] {
        &self.0
    }
}

pub(crate) fn check_dividing(c: &DividingCell) -> std::result::Result<(), &'static str> {
    if !(c.size > 0.0 && c.size.is_finite()) {
        return Err("size must be positive");
    }
    if !(c.increment >= 0.0 && c.increment.is_finite()) {
        return Err("increment must be nonnegative");
    }
    if c.increment > c.size {
        return Err("increment exceeds size");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_are_sorted_and_validated() {
        let s = SizeSample::new(vec![1.0, 2.0, 1.5]).unwrap();
        assert_eq!(s.values(), &[1.0, 1.5, 2.0]);
        assert!(matches!(SizeSample::new(vec![]), Err(Error::EmptySample)));
        assert!(SizeSample::new(vec![1.0, -1.0]).is_err());
        assert!(SizeSample::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn dividing_pairs_are_validated() {
        let ok = DividingCell { increment: 0.5, size: 1.2 };
        assert!(DividingSample::new(vec![ok]).is_ok());
        let bad = DividingCell { increment: 2.0, size: 1.0 };
        assert!(DividingSample::new(vec![bad]).is_err());
        assert!(DividingSample::new(vec![]).is_err());
    }
}
