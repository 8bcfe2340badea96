use serde::{Deserialize, Serialize};

/// A named, shaped buffer of parameters belonging to one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            name: name.into(),
            shape,
            data,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::new(name, shape, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Concatenate tensor buffers into one flat vector.
pub fn flatten(tensors: &[ParamTensor]) -> Vec<f64> {
    tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
}

/// Inverse of [`flatten`]: split a flat vector into tensors shaped like `like`.
pub fn unflatten(flat: &[f64], like: &[ParamTensor]) -> Vec<ParamTensor> {
    let mut offset = 0;
    like.iter()
        .map(|t| {
            let data = flat[offset..offset + t.len()].to_vec();
            offset += t.len();
            ParamTensor::new(t.name.clone(), t.shape.clone(), data)
        })
        .collect()
}
