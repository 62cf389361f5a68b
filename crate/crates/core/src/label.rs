use crate::error::{Error, Result};

/// Sum-to-one tolerance for label rows.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// A probability vector over classes. Stored in double precision so that
/// long recursive fusion chains stay on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn one_hot(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "class {class} out of range for {num_classes} classes"
            )));
        }
        let mut p = vec![0.0; num_classes];
        p[class] = 1.0;
        Ok(SoftLabel(p))
    }

    /// Validates that `probs` lies on the simplex.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let label = SoftLabel(probs);
        label.check()?;
        Ok(label)
    }

    pub fn check(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidArgument("empty label".into()));
        }
        if let Some(v) = self.0.iter().find(|v| !(0.0..=1.0 + SIMPLEX_TOLERANCE).contains(*v)) {
            return Err(Error::InvalidArgument(format!("label entry {v} outside [0, 1]")));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidArgument(format!("label sums to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    /// `weight·other + (1 − weight)·self`
    pub fn fuse(&self, other: &SoftLabel, weight: f64) -> Result<SoftLabel> {
        if other.num_classes() != self.num_classes() {
            return Err(Error::shape(
                "label fusion",
                &[self.num_classes()],
                &[other.num_classes()],
            ));
        }
        Ok(SoftLabel(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&cur, &hist)| weight * hist + (1.0 - weight) * cur)
                .collect(),
        ))
    }

    pub fn argmax(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }

    /// Number of entries strictly above `threshold`.
    pub fn support_above(&self, threshold: f64) -> usize {
        self.0.iter().filter(|&&v| v > threshold).count()
    }
}

pub fn one_hot_batch(classes: &[usize], num_classes: usize) -> Result<Vec<SoftLabel>> {
    classes
        .iter()
        .map(|&c| SoftLabel::one_hot(c, num_classes))
        .collect()
}
