//! Synthetic reference/target scenes with known parts.
//!
//! Each scene has `parts` latent object parts and `background_textures`
//! background bands, every one with its own unit feature center. Cells carry
//! their center plus isotropic Gaussian noise. The object is a rectangle split
//! into a near-square grid of part blocks; the target copy of the rectangle is
//! shifted and rescaled independently of the reference one.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{BinaryMask, FeatureMap};
use crate::seed::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub parts: usize,
    /// Reference object size `[rows, cols]` in grid cells.
    pub object: [usize; 2],
    /// Per-component standard deviation of the feature noise.
    pub noise: f64,
    pub background_textures: usize,
    /// Moves both object copies to random positions and rescales the target.
    pub layout_shift: bool,
    /// Target object scale is drawn from `[1 - jitter, 1 + jitter]`.
    pub scale_jitter: f64,
    /// Image pixels per grid cell.
    pub stride: usize,
    pub seed: RngSeed,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            height: 24,
            width: 24,
            dim: 32,
            parts: 4,
            object: [10, 10],
            noise: 0.08,
            background_textures: 3,
            layout_shift: true,
            scale_jitter: 0.25,
            stride: 1,
            seed: RngSeed(0),
        }
    }
}

/// Generated scene. Part labels are per grid cell, `None` for background.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub reference: FeatureMap,
    pub reference_mask: BinaryMask,
    pub target: FeatureMap,
    pub target_mask: BinaryMask,
    pub reference_parts: Vec<Option<usize>>,
    pub target_parts: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy)]
struct Placement {
    top: usize,
    left: usize,
    rows: usize,
    cols: usize,
}

impl SceneSpec {
    /// Block grid `(rows, cols)` the object is split into.
    fn part_grid(&self) -> (usize, usize) {
        let cols = (self.parts as f64).sqrt().ceil() as usize;
        (self.parts.div_ceil(cols), cols)
    }

    pub fn validate(&self) -> Result<()> {
        let infeasible = |m: String| Err(Error::SpecInfeasible(m));
        if self.parts == 0 {
            return infeasible("part count must be at least 1".into());
        }
        if self.height == 0 || self.width == 0 || self.dim == 0 || self.stride == 0 {
            return infeasible("grid, dim and stride must be positive".into());
        }
        if self.background_textures == 0 {
            return infeasible("at least one background texture is required".into());
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return infeasible(format!(
                "noise {} must be finite and non-negative",
                self.noise
            ));
        }
        if !(self.scale_jitter.is_finite() && (0.0..1.0).contains(&self.scale_jitter)) {
            return infeasible(format!(
                "scale jitter {} must lie in [0, 1)",
                self.scale_jitter
            ));
        }
        let (pr, pc) = self.part_grid();
        let [oh, ow] = self.object;
        if oh < pr || ow < pc {
            return infeasible(format!(
                "object {oh}x{ow} cannot hold {} disjoint parts ({pr}x{pc} blocks)",
                self.parts
            ));
        }
        if oh >= self.height || ow >= self.width {
            return infeasible(format!(
                "object {oh}x{ow} leaves no background in a {}x{} grid",
                self.height, self.width
            ));
        }
        Ok(())
    }
}

fn unit_centers(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let orthogonal = count <= dim;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if orthogonal {
            for u in &out {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            v.iter_mut().for_each(|a| *a /= n);
            out.push(v);
        }
    }
    out
}

fn place(rng: &mut ChaCha8Rng, spec: &SceneSpec, rows: usize, cols: usize) -> Placement {
    let (top, left) = if spec.layout_shift {
        (
            rng.random_range(0..=spec.height - rows),
            rng.random_range(0..=spec.width - cols),
        )
    } else {
        ((spec.height - rows) / 2, (spec.width - cols) / 2)
    };
    Placement {
        top,
        left,
        rows,
        cols,
    }
}

fn labels(spec: &SceneSpec, p: Placement) -> Vec<Option<usize>> {
    let (pr, pc) = spec.part_grid();
    let mut out = vec![None; spec.height * spec.width];
    for r in 0..p.rows {
        for c in 0..p.cols {
            let block = (r * pr / p.rows) * pc + c * pc / p.cols;
            out[(p.top + r) * spec.width + p.left + c] = Some(block.min(spec.parts - 1));
        }
    }
    out
}

fn render(
    rng: &mut ChaCha8Rng,
    spec: &SceneSpec,
    labels: &[Option<usize>],
    parts: &[Vec<f64>],
    textures: &[Vec<f64>],
) -> Result<(FeatureMap, BinaryMask)> {
    let mut data = Vec::with_capacity(labels.len() * spec.dim);
    let mut mask = BinaryMask::zeros(spec.height, spec.width);
    for (i, label) in labels.iter().enumerate() {
        let row = i / spec.width;
        let center = match label {
            Some(k) => {
                mask.set(row, i % spec.width, true);
                &parts[*k]
            }
            None => &textures[row * textures.len() / spec.height],
        };
        for &x in center {
            let e: f64 = StandardNormal.sample(rng);
            data.push((x + spec.noise * e) as f32);
        }
    }
    let map = FeatureMap::with_unit_stride(spec.height, spec.width, spec.dim, data)?
        .with_image_size(spec.height * spec.stride, spec.width * spec.stride)?;
    Ok((map, mask))
}

/// Deterministic in `spec` (including its seed).
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = spec.seed.rng();
    let centers = unit_centers(&mut rng, spec.parts + spec.background_textures, spec.dim);
    let (parts, textures) = centers.split_at(spec.parts);

    let [oh, ow] = spec.object;
    let (pr, pc) = spec.part_grid();
    let reference_place = place(&mut rng, spec, oh, ow);
    let (th, tw) = if spec.layout_shift {
        let s = rng.random_range(1.0 - spec.scale_jitter..=1.0 + spec.scale_jitter);
        let scaled =
            |n: usize, lo: usize, hi: usize| ((n as f64 * s).round() as usize).clamp(lo, hi);
        (
            scaled(oh, pr, spec.height - 1),
            scaled(ow, pc, spec.width - 1),
        )
    } else {
        (oh, ow)
    };
    let target_place = place(&mut rng, spec, th, tw);

    let reference_parts = labels(spec, reference_place);
    let target_parts = labels(spec, target_place);
    let (reference, reference_mask) = render(&mut rng, spec, &reference_parts, parts, textures)?;
    let (target, target_mask) = render(&mut rng, spec, &target_parts, parts, textures)?;
    Ok(Scene {
        reference,
        reference_mask,
        target,
        target_mask,
        reference_parts,
        target_parts,
    })
}
