//! Named parameter store and gradient buffers.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::tensor::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub trainable: bool,
}

/// Insertion-ordered parameters with name lookup.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    params: Vec<Param<T>>,
    index: BTreeMap<String, ParamId>,
}

/// Initializer for a new parameter.
pub enum Init {
    Zeros,
    /// Uniform on `±bound`.
    Uniform(f64),
    Value(Vec<f64>),
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn add<R: Rng + ?Sized>(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut R) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        let n: usize = shape.iter().product();
        let data = match init {
            Init::Zeros => vec![T::ZERO; n],
            Init::Uniform(b) => (0..n).map(|_| T::from_f64(rng.random_range(-b..=b))).collect(),
            Init::Value(v) => {
                assert_eq!(v.len(), n);
                v.into_iter().map(T::from_f64).collect()
            }
        };
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name: name.into(),
            shape: shape.to_vec(),
            data,
            trainable: true,
        });
        self.index.insert(name.into(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Mark every parameter whose name starts with `prefix`.
    pub fn set_trainable(&mut self, prefix: &str, trainable: bool) {
        for p in &mut self.params {
            if p.name.starts_with(prefix) {
                p.trainable = trainable;
            }
        }
    }

    pub fn set_all_trainable(&mut self, trainable: bool) {
        for p in &mut self.params {
            p.trainable = trainable;
        }
    }

    pub fn convert<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                    trainable: p.trainable,
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Overwrite values from `(name, shape, data)` triples; every parameter
    /// must be covered exactly.
    pub fn load(&mut self, tensors: &[(String, Vec<usize>, Vec<T>)]) -> Result<()> {
        if tensors.len() != self.params.len() {
            return Err(Error::ParamMismatch(alloc::format!(
                "expected {} tensors, found {}",
                self.params.len(),
                tensors.len()
            )));
        }
        for (name, shape, data) in tensors {
            let id = self
                .id(name)
                .ok_or_else(|| Error::ParamMismatch(alloc::format!("unknown tensor {name}")))?;
            let p = &mut self.params[id.0];
            if &p.shape != shape || p.data.len() != data.len() {
                return Err(Error::ParamMismatch(alloc::format!("shape of {name}")));
            }
            p.data.clone_from(data);
        }
        Ok(())
    }

    /// Copy values of every `from_prefix*` parameter into the matching
    /// `to_prefix*` parameter.
    pub fn copy_prefix(&mut self, from_prefix: &str, to_prefix: &str) -> usize {
        let mut copied = 0;
        for i in 0..self.params.len() {
            let Some(rest) = self.params[i].name.strip_prefix(from_prefix) else {
                continue;
            };
            let target = alloc::format!("{to_prefix}{rest}");
            if let Some(j) = self.id(&target) {
                if self.params[j.0].shape == self.params[i].shape {
                    let src = self.params[i].data.clone();
                    self.params[j.0].data = src;
                    copied += 1;
                }
            }
        }
        copied
    }
}

/// Gradient buffers parallel to a [`ParamSet`]; frozen parameters get an
/// empty buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub bufs: Vec<Vec<T>>,
}

impl<T: Real> Grads<T> {
    pub fn zeros_for(params: &ParamSet<T>) -> Self {
        Self {
            bufs: params
                .params
                .iter()
                .map(|p| if p.trainable { vec![T::ZERO; p.data.len()] } else { Vec::new() })
                .collect(),
        }
    }

    pub fn buf_mut(&mut self, id: ParamId) -> Option<&mut [T]> {
        let b = &mut self.bufs[id.0];
        if b.is_empty() {
            None
        } else {
            Some(b)
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for b in &mut self.bufs {
            for x in b {
                *x *= s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.bufs.iter().flatten().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn add_lookup_copy() {
        let mut rng = stream(0, Stream::Init);
        let mut ps = ParamSet::<f32>::new();
        let a = ps.add("enc.w", &[2, 3], Init::Uniform(1.0), &mut rng);
        ps.add("ctrl.w", &[2, 3], Init::Zeros, &mut rng);
        ps.add("ctrl.zero", &[2], Init::Zeros, &mut rng);
        assert_eq!(ps.id("enc.w"), Some(a));
        assert_eq!(ps.copy_prefix("enc.", "ctrl."), 1);
        assert_eq!(ps.get(ps.id("ctrl.w").unwrap()).data, ps.get(a).data);
        ps.set_trainable("enc.", false);
        let g = Grads::zeros_for(&ps);
        assert!(g.bufs[0].is_empty() && g.bufs[1].len() == 6);
        assert_eq!(ps.scalar_count(), 14);
    }
}
