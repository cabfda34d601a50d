//! Self-describing binary model container: versioned magic string, JSON
//! hyperparameter header, then named row-major f64 tensors. Byte-for-byte
//! deterministic given the same model state.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::{NnError, ParamVisit, Tensor};

pub const MAGIC: &[u8; 8] = b"BTRCKPT1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: String,
    hyper: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: String,
    pub hyper: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_model<M: ParamVisit + ?Sized>(
        kind: &str,
        hyper: serde_json::Value,
        model: &mut M,
    ) -> Self {
        let mut tensors = Vec::new();
        model.visit_params("", &mut |name, value, _| {
            tensors.push((name.to_string(), value.clone()));
        });
        Checkpoint { kind: kind.to_string(), hyper, tensors }
    }

    /// Writes tensor values back into `model`; names and shapes must match
    /// the model's parameter walk exactly.
    pub fn apply_to<M: ParamVisit + ?Sized>(&self, model: &mut M) -> Result<(), NnError> {
        let mut idx = 0;
        let mut err = None;
        model.visit_params("", &mut |name, value, _| {
            if err.is_some() {
                return;
            }
            let Some((saved_name, saved)) = self.tensors.get(idx) else {
                err = Some(format!("checkpoint has only {} tensors", idx));
                return;
            };
            if saved_name != name {
                err = Some(format!("tensor {idx} is {saved_name:?}, model expects {name:?}"));
                return;
            }
            if saved.shape() != value.shape() {
                err = Some(format!(
                    "tensor {name:?} shape {:?} does not match model {:?}",
                    saved.shape(),
                    value.shape()
                ));
                return;
            }
            *value = saved.clone();
            idx += 1;
        });
        if let Some(msg) = err {
            return Err(NnError::Checkpoint(msg));
        }
        if idx != self.tensors.len() {
            return Err(NnError::Checkpoint(format!(
                "checkpoint has {} tensors, model consumed {idx}",
                self.tensors.len()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        let header = serde_json::to_vec(&Header {
            kind: self.kind.clone(),
            hyper: self.hyper.clone(),
        })
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, tensor) in &self.tensors {
            let name_bytes = name.as_bytes();
            buf.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
            buf.extend_from_slice(name_bytes);
            buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
            for &dim in tensor.shape() {
                buf.extend_from_slice(&(dim as u64).to_le_bytes());
            }
            for &v in tensor.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let mut file = fs::File::open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;

        let take = |cursor: &mut usize, n: usize| -> Result<&[u8], NnError> {
            if *cursor + n > bytes.len() {
                return Err(NnError::Checkpoint("truncated checkpoint".into()));
            }
            let s = &bytes[*cursor..*cursor + n];
            *cursor += n;
            Ok(s)
        };
        let take_u32 = |cursor: &mut usize| -> Result<u32, NnError> {
            let s = take(cursor, 4)?;
            Ok(u32::from_le_bytes(s.try_into().unwrap()))
        };

        if take(&mut cursor, 8)? != MAGIC {
            return Err(NnError::Checkpoint("bad magic string".into()));
        }
        let header_len = take_u32(&mut cursor)? as usize;
        let header: Header = serde_json::from_slice(take(&mut cursor, header_len)?)
            .map_err(|e| NnError::Checkpoint(format!("bad header: {e}")))?;
        let n_tensors = take_u32(&mut cursor)? as usize;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name_len = take_u32(&mut cursor)? as usize;
            let name = String::from_utf8(take(&mut cursor, name_len)?.to_vec())
                .map_err(|e| NnError::Checkpoint(format!("bad tensor name: {e}")))?;
            let ndim = take_u32(&mut cursor)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let s = take(&mut cursor, 8)?;
                shape.push(u64::from_le_bytes(s.try_into().unwrap()) as usize);
            }
            let numel: usize = shape.iter().product();
            let raw = take(&mut cursor, numel * 8)?;
            let data: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name, Tensor::from_vec(&shape, data)));
        }
        if cursor != bytes.len() {
            return Err(NnError::Checkpoint("trailing bytes after tensors".into()));
        }
        Ok(Checkpoint { kind: header.kind, hyper: header.hyper, tensors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::{Activation, Dense};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut layer = Dense::new(3, 2, Activation::Tanh, &mut rng);
        let ckpt = Checkpoint::from_model(
            "dense-test",
            serde_json::json!({"in": 3, "out": 2}),
            &mut layer,
        );
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        ckpt.save(&p1).unwrap();
        ckpt.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let loaded = Checkpoint::load(&p1).unwrap();
        assert_eq!(loaded.kind, "dense-test");
        let mut rng2 = ChaCha20Rng::seed_from_u64(99);
        let mut other = Dense::new(3, 2, Activation::Tanh, &mut rng2);
        loaded.apply_to(&mut other).unwrap();
        assert_eq!(other.w, layer.w);
        assert_eq!(other.b, layer.b);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut layer = Dense::new(3, 2, Activation::Tanh, &mut rng);
        let ckpt = Checkpoint::from_model("dense-test", serde_json::json!({}), &mut layer);
        let mut wrong = Dense::new(4, 2, Activation::Tanh, &mut rng);
        assert!(ckpt.apply_to(&mut wrong).is_err());
    }
}
