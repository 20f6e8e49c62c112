use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Frame count and frame size of a sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub const DESK: Dims = Dims {
        frames: 8,
        height: 16,
        width: 16,
    };

    pub fn new(frames: usize, height: usize, width: usize) -> Self {
        Self { frames, height, width }
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn numel(&self) -> usize {
        self.frames * self.frame_len()
    }

    pub fn as_vec(&self) -> Vec<usize> {
        vec![self.frames, self.height, self.width]
    }
}

impl Default for Dims {
    fn default() -> Self {
        Self::DESK
    }
}

/// Optional tags carried alongside a sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_label: Option<u8>,
    /// Designated target identity of a protected probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_identity: Option<String>,
    /// Location of the sequence a protected probe was derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_path: Option<String>,
}

/// `frames x height x width` grid of intensities in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct SilhouetteSequence<S = f64> {
    dims: Dims,
    data: Vec<S>,
    pub meta: SequenceMeta,
}

impl<S: Scalar> SilhouetteSequence<S> {
    pub fn new(dims: Dims, data: Vec<S>) -> Result<Self> {
        if dims.frames == 0 || dims.height == 0 || dims.width == 0 {
            return Err(Error::InvalidInput(format!(
                "sequence dimensions must be positive, got {:?}",
                dims.as_vec()
            )));
        }
        if data.len() != dims.numel() {
            return Err(Error::Dimension {
                expected: dims.as_vec(),
                got: vec![data.len()],
            });
        }
        if let Some(i) = data
            .iter()
            .position(|v| !(v.is_finite() && *v >= S::zero() && *v <= S::one()))
        {
            return Err(Error::InvalidInput(format!(
                "intensity {} at flat index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            dims,
            data,
            meta: SequenceMeta::default(),
        })
    }

    pub fn from_frames(frames: &[Vec<S>], height: usize, width: usize) -> Result<Self> {
        let dims = Dims::new(frames.len(), height, width);
        if let Some(f) = frames.iter().find(|f| f.len() != height * width) {
            return Err(Error::Dimension {
                expected: vec![height, width],
                got: vec![f.len()],
            });
        }
        Self::new(dims, frames.concat())
    }

    pub fn filled(dims: Dims, value: S) -> Result<Self> {
        Self::new(dims, vec![value; dims.numel()])
    }

    pub fn with_meta(mut self, meta: SequenceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn frame(&self, index: usize) -> &[S] {
        let n = self.dims.frame_len();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks(self.dims.frame_len())
    }

    pub fn get(&self, frame: usize, row: usize, col: usize) -> S {
        self.data[(frame * self.dims.height + row) * self.dims.width + col]
    }

    /// Flat tensor view (length `L*H*W`).
    pub fn to_tensor(&self) -> Tensor<S> {
        Tensor::from_parts(vec![self.data.len()], self.data.clone())
    }

    /// Rebuilds a sequence from a flat tensor, keeping `meta`.
    pub fn from_tensor(dims: Dims, tensor: &Tensor<S>, meta: SequenceMeta) -> Result<Self> {
        Ok(Self::new(dims, tensor.data().to_vec())?.with_meta(meta))
    }

    /// Elementwise map; the result must stay in [0, 1].
    pub(crate) fn map_values(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == S::zero() || v == S::one())
    }

    pub fn cast<T: Scalar>(&self) -> SilhouetteSequence<T> {
        SilhouetteSequence {
            dims: self.dims,
            data: self.data.iter().map(|v| T::lit(v.as_f64())).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn check_dims(&self, expected: Dims) -> Result<()> {
        if self.dims != expected {
            return Err(Error::Dimension {
                expected: expected.as_vec(),
                got: self.dims.as_vec(),
            });
        }
        Ok(())
    }
}
