use serde::{Deserialize, Serialize};

/// A point `w` of the parameter space `R^N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FamilyParams {
    w: Vec<f64>,
}

impl FamilyParams {
    pub fn new(w: Vec<f64>) -> Self {
        Self { w }
    }

    pub fn zeros(n: usize) -> Self {
        Self { w: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for FamilyParams {
    fn from(w: Vec<f64>) -> Self {
        Self::new(w)
    }
}
