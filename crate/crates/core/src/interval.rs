use crate::{Error, Result};

/// Closed interval of observable values whose probability is being estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetInterval {
    y_min: f64,
    y_max: f64,
}

impl TargetInterval {
    /// Requires `y_min < y_max`, both finite. A zero-width interval carries
    /// zero probability and is rejected rather than silently estimated.
    pub fn new(y_min: f64, y_max: f64) -> Result<Self> {
        if !(y_min.is_finite() && y_max.is_finite() && y_min < y_max) {
            return Err(Error::EmptyInterval { lo: y_min, hi: y_max });
        }
        Ok(Self { y_min, y_max })
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.y_min + self.y_max)
    }

    pub fn width(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, y: f64) -> bool {
        self.y_min <= y && y <= self.y_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_unordered() {
        assert!(TargetInterval::new(1.0, 1.0).is_err());
        assert!(TargetInterval::new(2.0, 1.0).is_err());
        assert!(TargetInterval::new(f64::NAN, 1.0).is_err());
        assert!(TargetInterval::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn midpoint_and_width() {
        let y = TargetInterval::new(1.0, 2.0).unwrap();
        assert_eq!(y.mid(), 1.5);
        assert_eq!(y.width(), 1.0);
        assert!(y.contains(1.0) && y.contains(2.0) && !y.contains(2.0000001));
    }
}
