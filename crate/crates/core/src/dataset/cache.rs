//! Binary cache of per-frame clip features.
//!
//! Little-endian layout: magic `MIBF`, `u32` version, `u32` joints,
//! `u32` frames, `f64` fps, `u32` columns, then `frames × columns` `f32`
//! values, frame-major. Columns follow the velocity input layout with root
//! channels in world coordinates.

use std::io::{Read, Write};
use std::path::Path;

use crate::motion::{finite_velocities, local_to_root_space};
use crate::tensor::Matrix;

use super::clip::AnimationClip;
use super::features::FeatureLayout;
use super::DatasetError;

pub const CACHE_MAGIC: &[u8; 4] = b"MIBF";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub joints: usize,
    pub fps: f64,
    pub features: Matrix<f32>,
}

impl FeatureCache {
    pub fn from_clip(clip: &AnimationClip) -> Result<Self, DatasetError> {
        let poses = clip
            .frames
            .iter()
            .map(|p| local_to_root_space(&clip.skeleton, p))
            .collect::<Result<Vec<_>, _>>()?;
        let vel = finite_velocities(&poses, clip.fps)?;
        let layout = FeatureLayout::new(clip.joint_count(), true);
        let mut m = Matrix::zeros(poses.len(), layout.d_in());
        for (r, (p, v)) in poses.iter().zip(&vel).enumerate() {
            let row = layout.input_row_public(p, v);
            for (dst, src) in m.row_mut(r).iter_mut().zip(row) {
                *dst = src as f32;
            }
        }
        Ok(Self {
            joints: clip.joint_count(),
            fps: clip.fps,
            features: m,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(28 + 4 * self.features.len());
        b.extend(CACHE_MAGIC);
        b.extend(CACHE_VERSION.to_le_bytes());
        b.extend((self.joints as u32).to_le_bytes());
        b.extend((self.features.rows() as u32).to_le_bytes());
        b.extend(self.fps.to_le_bytes());
        b.extend((self.features.cols() as u32).to_le_bytes());
        for v in self.features.as_slice() {
            b.extend(v.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, DatasetError> {
        let bad = |m: &str| DatasetError::Cache(m.into());
        if b.len() < 28 || &b[..4] != CACHE_MAGIC {
            return Err(bad("not a feature cache"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as usize;
        if u32_at(4) != CACHE_VERSION as usize {
            return Err(DatasetError::Cache(format!("version {}, expected {CACHE_VERSION}", u32_at(4))));
        }
        let joints = u32_at(8);
        let rows = u32_at(12);
        let fps = f64::from_le_bytes(b[16..24].try_into().unwrap());
        let cols = u32_at(24);
        if cols != FeatureLayout::new(joints, true).d_in() {
            return Err(DatasetError::Cache(format!("{cols} columns for {joints} joints")));
        }
        let body = &b[28..];
        if body.len() != rows * cols * 4 {
            return Err(bad("payload length does not match header"));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            joints,
            fps,
            features: Matrix::from_vec(rows, cols, data),
        })
    }
}

pub fn write_feature_cache(path: &Path, cache: &FeatureCache) -> Result<(), DatasetError> {
    std::fs::File::create(path)?.write_all(&cache.to_bytes())?;
    Ok(())
}

pub fn read_feature_cache(path: &Path) -> Result<FeatureCache, DatasetError> {
    let mut b = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut b)?;
    FeatureCache::from_bytes(&b)
}
