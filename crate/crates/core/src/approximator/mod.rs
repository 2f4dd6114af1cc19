//! Small feed-forward approximators with hand-written reverse-mode gradients.

mod heads;
mod mlp;
mod optim;
mod policy;

pub use heads::{Categorical, DiagGaussian, PolicyDistribution, LOG_STD_MAX, LOG_STD_MIN};
pub use mlp::{Mlp, MlpTape};
pub use optim::{adam_step, clip_global_norm, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use policy::{Action, HeadKind, Policy, PolicyTape};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name and shape of one parameter tensor inside a flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamShape {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

fn layout_numel(layout: &[ParamShape]) -> usize {
    layout.iter().map(ParamShape::numel).sum()
}

/// Flattened weights plus their layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    layout: Vec<ParamShape>,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(layout: Vec<ParamShape>) -> Self {
        let n = layout_numel(&layout);
        Self {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(layout: Vec<ParamShape>, values: Vec<f64>) -> Result<Self> {
        let n = layout_numel(&layout);
        if n != values.len() {
            return Err(Error::Shape(format!(
                "layout holds {n} elements but {} values were given",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "parameter {bad} is not finite"
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &[ParamShape] {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values of the named tensor.
    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let mut offset = 0;
        for p in &self.layout {
            let n = p.numel();
            if p.name == name {
                return Some(&self.values[offset..offset + n]);
            }
            offset += n;
        }
        None
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let mut offset = 0;
        for p in &self.layout {
            let n = p.numel();
            if p.name == name {
                return Some(&mut self.values[offset..offset + n]);
            }
            offset += n;
        }
        None
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            layout: self.layout.clone(),
            values: self.values.clone(),
        }
    }
}

/// Gradient buffer sharing a [`ParameterVector`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAccumulator {
    layout: Vec<ParamShape>,
    values: Vec<f64>,
}

impl GradientAccumulator {
    pub fn zeros_like(params: &ParameterVector) -> Self {
        Self {
            layout: params.layout.clone(),
            values: vec![0.0; params.len()],
        }
    }

    pub fn from_values(layout: Vec<ParamShape>, values: Vec<f64>) -> Result<Self> {
        if layout_numel(&layout) != values.len() {
            return Err(Error::Shape("gradient values do not match layout".into()));
        }
        Ok(Self { layout, values })
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn layout(&self) -> &[ParamShape] {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|g| g.is_finite())
    }

    pub(crate) fn check_matches(&self, params: &ParameterVector) -> Result<()> {
        if self.layout != params.layout {
            return Err(Error::Shape("gradient layout differs from parameter layout".into()));
        }
        Ok(())
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint: layout descriptors plus flat values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub layout: Vec<ParamShape>,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn into_parameters(self) -> Result<ParameterVector> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Io(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        ParameterVector::from_values(self.layout, self.values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout() -> Vec<ParamShape> {
        vec![
            ParamShape::new("w", vec![2, 3]),
            ParamShape::new("b", vec![2]),
        ]
    }

    #[test]
    fn layout_count_enforced() {
        assert!(ParameterVector::from_values(layout(), vec![0.0; 7]).is_err());
        assert!(ParameterVector::from_values(layout(), vec![0.0; 8]).is_ok());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(ParameterVector::from_values(layout(), v).is_err());
    }

    #[test]
    fn named_tensor_access() {
        let p = ParameterVector::from_values(layout(), (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(p.tensor("b").unwrap(), &[6.0, 7.0]);
        assert_eq!(p.tensor("w").unwrap().len(), 6);
        assert!(p.tensor("missing").is_none());
    }

    #[test]
    fn checkpoint_rejects_other_versions() {
        let mut c = ParameterVector::zeros(layout()).to_checkpoint();
        c.format_version = 99;
        assert!(c.into_parameters().is_err());
    }

    proptest! {
        #[test]
        fn checkpoint_round_trips_bit_exactly(values in proptest::collection::vec(-1e300f64..1e300, 8)) {
            let p = ParameterVector::from_values(layout(), values).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.json");
            p.to_checkpoint().save(&path).unwrap();
            let back = Checkpoint::load(&path).unwrap().into_parameters().unwrap();
            let same = p.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
            prop_assert_eq!(p.layout(), back.layout());
        }
    }
}
