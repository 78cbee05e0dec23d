use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::seed;
use crate::tn::{IMAGE_LEN, IMAGE_SIDE};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Images in `[0, 1]` (row-major 28×28) with binary labels
/// (`0` = normal, `1` = pneumonia).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledBatch {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl LabeledBatch {
    pub fn new(images: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self, PipelineError> {
        let b = Self { images, labels };
        b.validate()?;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.images.len() != self.labels.len() {
            return Err(PipelineError::Data(format!(
                "{} images but {} labels",
                self.images.len(),
                self.labels.len()
            )));
        }
        if let Some(i) = self.images.iter().position(|im| im.len() != IMAGE_LEN) {
            return Err(PipelineError::Data(format!("image {i} is not {IMAGE_SIDE}x{IMAGE_SIDE}")));
        }
        if let Some(i) = self
            .images
            .iter()
            .position(|im| im.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(PipelineError::Data(format!("image {i} has pixels outside [0, 1]")));
        }
        if let Some(i) = self.labels.iter().position(|&l| l > 1) {
            return Err(PipelineError::Data(format!("label {i} is {} (expected 0 or 1)", self.labels[i])));
        }
        Ok(())
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32, PipelineError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| PipelineError::Idx(format!("truncated {what} at offset {offset}")))
}

fn parse_images(bytes: &[u8]) -> Result<Vec<Vec<f64>>, PipelineError> {
    let magic = be_u32(bytes, 0, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(PipelineError::Idx(format!(
            "bad image magic 0x{magic:08x} at offset 0 (expected 0x{IDX_IMAGES_MAGIC:08x})"
        )));
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(PipelineError::Idx(format!(
            "images are {rows}x{cols}, expected {IMAGE_SIDE}x{IMAGE_SIDE} (offset 8)"
        )));
    }
    let body = &bytes[16..];
    if body.len() != count * IMAGE_LEN {
        return Err(PipelineError::Idx(format!(
            "image data has {} bytes after offset 16, expected {}",
            body.len(),
            count * IMAGE_LEN
        )));
    }
    Ok(body
        .chunks_exact(IMAGE_LEN)
        .map(|im| im.iter().map(|&p| p as f64 / 255.0).collect())
        .collect())
}

fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, PipelineError> {
    let magic = be_u32(bytes, 0, "label magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(PipelineError::Idx(format!(
            "bad label magic 0x{magic:08x} at offset 0 (expected 0x{IDX_LABELS_MAGIC:08x})"
        )));
    }
    let count = be_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(PipelineError::Idx(format!(
            "label data has {} bytes after offset 8, expected {count}",
            body.len()
        )));
    }
    Ok(body.to_vec())
}

/// Reads an IDX image file and its label file.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<LabeledBatch, PipelineError> {
    let imgs = parse_images(&fs::read(images)?)?;
    let lbls = parse_labels(&fs::read(labels)?)?;
    if imgs.len() != lbls.len() {
        return Err(PipelineError::Idx(format!(
            "{} images but {} labels",
            imgs.len(),
            lbls.len()
        )));
    }
    LabeledBatch::new(imgs, lbls)
}

pub fn idx_bytes(batch: &LabeledBatch) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + batch.len() * IMAGE_LEN);
    for v in [IDX_IMAGES_MAGIC, batch.len() as u32, IMAGE_SIDE as u32, IMAGE_SIDE as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    for im in &batch.images {
        img.extend(im.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    let mut lbl = Vec::with_capacity(8 + batch.len());
    lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(batch.len() as u32).to_be_bytes());
    lbl.extend_from_slice(&batch.labels);
    (img, lbl)
}

/// Writes pixels quantized to `round(255·p)`.
pub fn write_idx(batch: &LabeledBatch, images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<(), PipelineError> {
    let (img, lbl) = idx_bytes(batch);
    fs::write(images, img)?;
    fs::write(labels, lbl)?;
    Ok(())
}

/// Synthetic two-class geometry: a Gaussian blob in the upper half (class 0)
/// or lower half (class 1) plus clipped pixel noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassGeometry {
    pub blob_sigma: f64,
    pub amplitude: f64,
    /// Uniform jitter of the blob center, in pixels.
    pub center_jitter: f64,
    pub noise_std: f64,
}

impl Default for ClassGeometry {
    fn default() -> Self {
        Self {
            blob_sigma: 4.0,
            amplitude: 0.8,
            center_jitter: 3.0,
            noise_std: 0.05,
        }
    }
}

/// Sample `i` has label `i mod 2`.
pub fn synth_data(n_samples: usize, seed: u64, geometry: &ClassGeometry) -> LabeledBatch {
    let mut rng = seed::rng(seed::derive_named(seed, "synth"));
    let noise = Normal::new(0.0, geometry.noise_std.max(0.0)).expect("finite std");
    let mut images = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let label = (i % 2) as u8;
        let j = geometry.center_jitter;
        let jitter = |rng: &mut rand_chacha::ChaCha20Rng| if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
        let cy = if label == 0 { 7.0 } else { 21.0 } + jitter(&mut rng);
        let cx = 14.0 + jitter(&mut rng);
        let s2 = 2.0 * geometry.blob_sigma * geometry.blob_sigma;
        let mut im = Vec::with_capacity(IMAGE_LEN);
        for r in 0..IMAGE_SIDE {
            for c in 0..IMAGE_SIDE {
                let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                let v = geometry.amplitude * (-d2 / s2).exp() + rng.sample(noise);
                im.push(v.clamp(0.0, 1.0));
            }
        }
        images.push(im);
        labels.push(label);
    }
    LabeledBatch { images, labels }
}

/// Label-stratified round-robin: class-0 samples are dealt to clients
/// `0, 1, …` and class-1 samples continue from where class 0 stopped.
pub fn partition_stratified(labels: &[u8], n_clients: usize) -> Vec<usize> {
    let mut owner = vec![0; labels.len()];
    let mut next = 0usize;
    for class in [0u8, 1] {
        for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l == class) {
            owner[i] = next % n_clients;
            next += 1;
        }
    }
    owner
}

/// Per-class deterministic hold-out of about `fraction` of each class,
/// at least one sample per class with two or more members.
pub fn stratified_split(labels: &[u8], fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut keep = Vec::new();
    let mut held = Vec::new();
    for class in [0u8, 1] {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut chosen = vec![false; members.len()];
        for j in 0..members.len() {
            chosen[j] = ((j + 1) as f64 * fraction).floor() > (j as f64 * fraction).floor();
        }
        if members.len() >= 2 && !chosen.iter().any(|&c| c) {
            *chosen.last_mut().unwrap() = true;
        }
        for (m, c) in members.iter().zip(chosen) {
            if c {
                held.push(*m);
            } else {
                keep.push(*m);
            }
        }
    }
    keep.sort_unstable();
    held.sort_unstable();
    (keep, held)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_deterministic_and_balanced() {
        let g = ClassGeometry::default();
        let a = synth_data(10, 3, &g);
        assert_eq!(a, synth_data(10, 3, &g));
        assert_ne!(a, synth_data(10, 4, &g));
        assert_eq!(a.class_counts(), [5, 5]);
        a.validate().unwrap();
        let half = IMAGE_LEN / 2;
        for (im, &l) in a.images.iter().zip(&a.labels) {
            let upper: f64 = im[..half].iter().sum();
            let lower: f64 = im[half..].iter().sum();
            if l == 0 {
                assert!(upper > lower);
            } else {
                assert!(lower > upper);
            }
        }
    }

    #[test]
    fn idx_saturated_pixel_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        let white = LabeledBatch::new(vec![vec![1.0; IMAGE_LEN]], vec![1]).unwrap();
        write_idx(&white, &ip, &lp).unwrap();
        assert_eq!(load_idx(&ip, &lp).unwrap(), white);

        let synth = synth_data(6, 1, &ClassGeometry::default());
        let quantized = LabeledBatch {
            images: synth
                .images
                .iter()
                .map(|im| im.iter().map(|p| (p * 255.0).round() / 255.0).collect())
                .collect(),
            labels: synth.labels.clone(),
        };
        write_idx(&synth, &ip, &lp).unwrap();
        assert_eq!(load_idx(&ip, &lp).unwrap(), quantized);
    }

    #[test]
    fn idx_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        let b = synth_data(2, 1, &ClassGeometry::default());
        let (mut img, lbl) = idx_bytes(&b);
        img[3] = 0x01;
        fs::write(&ip, &img).unwrap();
        fs::write(&lp, &lbl).unwrap();
        let err = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(err.contains("offset 0"), "{err}");

        let (img, _) = idx_bytes(&b);
        fs::write(&ip, &img[..img.len() - 1]).unwrap();
        assert!(load_idx(&ip, &lp).is_err());

        let (img, _) = idx_bytes(&b);
        let (_, lbl3) = idx_bytes(&synth_data(3, 1, &ClassGeometry::default()));
        fs::write(&ip, &img).unwrap();
        fs::write(&lp, &lbl3).unwrap();
        assert!(load_idx(&ip, &lp).unwrap_err().to_string().contains("2 images but 3 labels"));
    }

    #[test]
    fn stratified_partition_is_proportional() {
        let labels: Vec<u8> = (0..103).map(|i| u8::from(i % 3 == 0)).collect();
        let owner = partition_stratified(&labels, 16);
        for class in [0u8, 1] {
            let total = labels.iter().filter(|&&l| l == class).count() as f64;
            for c in 0..16 {
                let got = owner
                    .iter()
                    .zip(&labels)
                    .filter(|(&o, &l)| o == c && l == class)
                    .count() as f64;
                assert!((got - total / 16.0).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn split_keeps_both_classes() {
        let labels: Vec<u8> = (0..32).map(|i| (i % 2) as u8).collect();
        let (keep, held) = stratified_split(&labels, 0.2);
        assert_eq!(keep.len() + held.len(), 32);
        assert!(held.iter().any(|&i| labels[i] == 0) && held.iter().any(|&i| labels[i] == 1));
        assert_eq!(held.len(), 6);
    }
}
