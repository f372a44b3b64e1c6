//! Classifier persistence in the weight container. Every `f64` is stored
//! bit-exactly as two `f32` bit patterns (low word first), so a reloaded
//! model scores identically.

use std::path::Path;

use super::linear::LinearModel;
use super::tree::{TreeModel, TreeNode};
use super::{FeatureVector, Scheme};
use crate::container::{Tensor, WeightFile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Tree(TreeModel),
}

impl Model {
    pub fn scheme(&self) -> Scheme {
        match self {
            Model::Linear(m) => m.scheme,
            Model::Tree(m) => m.scheme,
        }
    }
}

/// Higher is more attack-like: the linear decision value, or the tree's
/// leaf attack fraction.
pub fn score(model: &Model, f: &FeatureVector) -> Result<f64> {
    match model {
        Model::Linear(m) => m.score(f),
        Model::Tree(m) => m.score(f),
    }
}

fn tag(name: String) -> Tensor {
    Tensor::new(name, vec![0], Vec::new()).expect("empty tag tensor")
}

fn f64_tensor(name: &str, rows: usize, cols: usize, values: &[f64]) -> Tensor {
    let data = values
        .iter()
        .flat_map(|v| {
            let bits = v.to_bits();
            [
                f32::from_bits(bits as u32),
                f32::from_bits((bits >> 32) as u32),
            ]
        })
        .collect();
    Tensor::new(name.to_string(), vec![rows as u32, cols as u32, 2], data)
        .expect("consistent f64 tensor")
}

fn read_f64(wf: &WeightFile, name: &str, cols: usize) -> Result<Vec<f64>> {
    let t = wf
        .get(name)
        .ok_or_else(|| Error::Container(format!("model lacks tensor `{name}`")))?;
    if t.dims.len() != 3 || t.dims[1] as usize != cols || t.dims[2] != 2 {
        return Err(Error::Container(format!(
            "tensor `{name}` has dims {:?}",
            t.dims
        )));
    }
    Ok(t.data
        .chunks_exact(2)
        .map(|p| f64::from_bits(p[0].to_bits() as u64 | ((p[1].to_bits() as u64) << 32)))
        .collect())
}

fn flatten(node: &TreeNode, rows: &mut Vec<f64>) {
    match node {
        TreeNode::Leaf { attack, total } => {
            rows.extend([0.0, 0.0, 0.0, *attack as f64, *total as f64])
        }
        TreeNode::Split {
            feature,
            threshold,
            attack,
            total,
            left,
            right,
        } => {
            rows.extend([
                1.0,
                *feature as f64,
                *threshold,
                *attack as f64,
                *total as f64,
            ]);
            flatten(left, rows);
            flatten(right, rows);
        }
    }
}

fn unflatten(rows: &mut std::slice::ChunksExact<'_, f64>, n_features: usize) -> Result<TreeNode> {
    let r = rows
        .next()
        .ok_or_else(|| Error::Container("truncated tree".into()))?;
    let count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Container(format!("bad count {v} in tree")))
        }
    };
    let (attack, total) = (count(r[3])?, count(r[4])?);
    match r[0] {
        0.0 => Ok(TreeNode::Leaf { attack, total }),
        1.0 => {
            let feature = count(r[1])?;
            if feature >= n_features || !r[2].is_finite() {
                return Err(Error::Container("bad split in tree".into()));
            }
            let left = Box::new(unflatten(rows, n_features)?);
            let right = Box::new(unflatten(rows, n_features)?);
            Ok(TreeNode::Split {
                feature,
                threshold: r[2],
                attack,
                total,
                left,
                right,
            })
        }
        k => Err(Error::Container(format!("bad node kind {k}"))),
    }
}

pub fn model_to_weight_file(model: &Model) -> WeightFile {
    let mut tensors = vec![tag(format!("scheme:{}", model.scheme()))];
    match model {
        Model::Linear(m) => {
            let d = m.weights.len();
            tensors.push(tag("model:linear".into()));
            tensors.push(f64_tensor("mean", d, 1, &m.mean));
            tensors.push(f64_tensor("scale", d, 1, &m.scale));
            tensors.push(f64_tensor("weights", d, 1, &m.weights));
            tensors.push(f64_tensor("bias", 1, 1, &[m.bias]));
        }
        Model::Tree(m) => {
            let mut rows = Vec::new();
            flatten(&m.root, &mut rows);
            tensors.push(tag("model:tree".into()));
            tensors.push(f64_tensor("nodes", rows.len() / 5, 5, &rows));
            tensors.push(f64_tensor("pruned", 1, 1, &[m.pruned as u8 as f64]));
        }
    }
    WeightFile::new(tensors)
}

pub fn model_from_weight_file(wf: &WeightFile) -> Result<Model> {
    let scheme: Scheme = wf
        .tensors
        .iter()
        .find_map(|t| t.name.strip_prefix("scheme:"))
        .ok_or_else(|| Error::Container("model lacks a scheme tag".into()))?
        .parse()?;
    let d = scheme.len();
    if wf.get("model:linear").is_some() {
        let (mean, scale, weights) = (
            read_f64(wf, "mean", 1)?,
            read_f64(wf, "scale", 1)?,
            read_f64(wf, "weights", 1)?,
        );
        let bias = read_f64(wf, "bias", 1)?;
        if mean.len() != d || scale.len() != d || weights.len() != d || bias.len() != 1 {
            return Err(Error::Container(format!(
                "linear model does not match {scheme}"
            )));
        }
        Ok(Model::Linear(LinearModel {
            scheme,
            mean,
            scale,
            weights,
            bias: bias[0],
        }))
    } else if wf.get("model:tree").is_some() {
        let nodes = read_f64(wf, "nodes", 5)?;
        let mut rows = nodes.chunks_exact(5);
        let root = unflatten(&mut rows, d)?;
        if rows.next().is_some() {
            return Err(Error::Container("trailing tree nodes".into()));
        }
        let pruned = read_f64(wf, "pruned", 1)?.first().copied() == Some(1.0);
        Ok(Model::Tree(TreeModel {
            scheme,
            root,
            pruned,
        }))
    } else {
        Err(Error::Container("unknown model kind".into()))
    }
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    model_to_weight_file(model).save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    model_from_weight_file(&WeightFile::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{
        train_linear, train_tree, LabeledSample, LinearConfig, TreeConfig, Variant,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..80)
            .map(|_| {
                let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let variant = if v[0] + v[1] > 0.0 {
                    Variant::Improved
                } else {
                    Variant::Genuine
                };
                LabeledSample::new(FeatureVector::new(Scheme::EdgeFeat, v).unwrap(), variant)
            })
            .collect()
    }

    #[test]
    fn both_kinds_round_trip_exactly() {
        let train = data(1);
        let val = data(2);
        let dir = tempfile::tempdir().unwrap();
        let models = [
            Model::Linear(train_linear(&train, &LinearConfig::default()).unwrap()),
            Model::Tree(train_tree(&train, &TreeConfig::default(), &val).unwrap()),
            Model::Tree(train_tree(&train, &TreeConfig::default(), &[]).unwrap()),
        ];
        for (i, m) in models.iter().enumerate() {
            let path = dir.path().join(format!("m{i}.cnwt"));
            save_model(m, &path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(&back, m);
            for s in &val {
                assert_eq!(
                    score(&back, &s.features).unwrap(),
                    score(m, &s.features).unwrap()
                );
            }
        }
    }

    #[test]
    fn missing_parts_rejected() {
        let m = Model::Linear(train_linear(&data(3), &LinearConfig::default()).unwrap());
        let mut wf = model_to_weight_file(&m);
        wf.tensors.retain(|t| t.name != "bias");
        assert!(model_from_weight_file(&wf).is_err());
        let mut wf = model_to_weight_file(&m);
        wf.tensors.remove(0);
        assert!(model_from_weight_file(&wf).is_err());
    }
}
