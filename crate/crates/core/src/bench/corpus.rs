//! Procedural single-channel test images: one geometric shape per class on a
//! class-specific background, with small random shifts, level changes and a
//! smooth low-frequency field.

use crate::error::{Error, Result};
use crate::prior::GmmPrior;
use crate::tensor::{SeededRng, Tensor};

pub const CORPUS_CLASSES: usize = 6;

#[derive(Debug, Clone, Copy)]
enum Shape {
    Disk,
    Square,
    HBar,
    VBar,
    Ring,
    Cross,
}

const SHAPES: [Shape; CORPUS_CLASSES] = [Shape::Disk, Shape::Square, Shape::HBar, Shape::VBar, Shape::Ring, Shape::Cross];

fn inside(shape: Shape, dy: f64, dx: f64, scale: f64) -> bool {
    let r = (dy * dy + dx * dx).sqrt();
    match shape {
        Shape::Disk => r <= 0.25 * scale,
        Shape::Square => dy.abs() <= 0.22 * scale && dx.abs() <= 0.22 * scale,
        Shape::HBar => dy.abs() <= 0.1 * scale && dx.abs() <= 0.35 * scale,
        Shape::VBar => dx.abs() <= 0.1 * scale && dy.abs() <= 0.35 * scale,
        Shape::Ring => r <= 0.32 * scale && r >= 0.18 * scale,
        Shape::Cross => (dy.abs() <= 0.07 * scale || dx.abs() <= 0.07 * scale) && r <= 0.35 * scale,
    }
}

/// One image of class `label` with side `size`, shape `[1, size, size]`,
/// values clipped to `[0, 1]`.
pub fn synthetic_image(label: usize, size: usize, rng: &mut SeededRng) -> Result<Tensor> {
    if label >= CORPUS_CLASSES {
        return Err(Error::param(format!("class {label} out of range")));
    }
    if size < 8 {
        return Err(Error::param("synthetic images need a side of at least 8"));
    }
    let shape = SHAPES[label];
    let bg = 0.15 + 0.06 * label as f64 + 0.03 * (2.0 * rng.next_uniform() - 1.0);
    let fg = 0.85 - 0.05 * label as f64 + 0.03 * (2.0 * rng.next_uniform() - 1.0);
    let shift_y = rng.next_index(3) as f64 - 1.0;
    let shift_x = rng.next_index(3) as f64 - 1.0;
    let (fy, fx) = (rng.next_uniform() * 2.0 * std::f64::consts::PI, rng.next_uniform() * 2.0 * std::f64::consts::PI);
    let amp = 0.02;
    let s = size as f64;
    let c = (s - 1.0) / 2.0;
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (dy, dx) = (i as f64 - c - shift_y, j as f64 - c - shift_x);
            let base = if inside(shape, dy, dx, s) { fg } else { bg };
            let field = amp * (2.0 * std::f64::consts::PI * i as f64 / s + fy).sin() * (2.0 * std::f64::consts::PI * j as f64 / s + fx).cos();
            data.push((base + field).clamp(0.0, 1.0));
        }
    }
    Tensor::from_vec(data, &[1, size, size])
}

/// `n` images cycling through the classes, with their labels.
pub fn synthetic_corpus(n: usize, size: usize, seed: u64) -> Result<(Vec<Tensor>, Vec<usize>)> {
    let mut rng = SeededRng::new(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % CORPUS_CLASSES;
        images.push(synthetic_image(label, size, &mut rng)?);
        labels.push(label);
    }
    Ok((images, labels))
}

/// Per-class diagonal Gaussian mixture fitted on a fresh draw of
/// `per_class` images per class.
pub fn fit_corpus_gmm(per_class: usize, size: usize, seed: u64, var_floor: f64) -> Result<GmmPrior> {
    if per_class < 2 {
        return Err(Error::param("need at least two images per class"));
    }
    let (images, labels) = synthetic_corpus(per_class * CORPUS_CLASSES, size, seed)?;
    GmmPrior::from_labeled_samples(&images, &labels, var_floor)
}
