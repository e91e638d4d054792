use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::volume::Grid2;

use super::TopoConfig;

/// Ground-truth values below this count as annotation pixels.
pub const ANNOTATION_LEVEL: f64 = 0.5;

/// Per-pixel region labels: 0 marks the dilated annotation, `1..=region_count`
/// the background regions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl RegionLabeling {
    /// Wraps an arbitrary labeling. Labels must cover `1..=k` without holes;
    /// regions need not be connected.
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::shape(width * height, labels.len()));
        }
        let k = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        if let Some(missing) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Validation(format!(
                "region labels are not contiguous: label {} is unused",
                missing + 1
            )));
        }
        Ok(RegionLabeling {
            width,
            height,
            labels,
            sizes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, u: usize, v: usize) -> u32 {
        self.labels[u + self.width * v]
    }

    pub fn region_count(&self) -> usize {
        self.sizes.len()
    }

    /// Pixel count of region `k` (1-based).
    pub fn region_size(&self, k: u32) -> usize {
        self.sizes[k as usize - 1]
    }

    pub fn is_annotation(&self, u: usize, v: usize) -> bool {
        self.label(u, v) == 0
    }
}

/// Dilates the annotation of `gt2d` by a disc and labels the remaining
/// pixels by 4-connected components, numbered in raster order.
pub fn label_regions(gt2d: &Grid2, cfg: &TopoConfig) -> RegionLabeling {
    let (w, h) = gt2d.shape();
    let r = cfg.dilation_radius as isize;
    let disc: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dv| (-r..=r).map(move |du| (du, dv)))
        .filter(|(du, dv)| du * du + dv * dv <= r * r)
        .collect();

    let mut dilated = vec![false; w * h];
    for v in 0..h {
        for u in 0..w {
            if gt2d.get(u, v) >= ANNOTATION_LEVEL {
                continue;
            }
            for &(du, dv) in &disc {
                let (uu, vv) = (u as isize + du, v as isize + dv);
                if uu >= 0 && vv >= 0 && (uu as usize) < w && (vv as usize) < h {
                    dilated[uu as usize + w * vv as usize] = true;
                }
            }
        }
    }

    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if dilated[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (u, v) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !dilated[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            };
            if u > 0 {
                visit(i - 1);
            }
            if u + 1 < w {
                visit(i + 1);
            }
            if v > 0 {
                visit(i - w);
            }
            if v + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
    }

    RegionLabeling {
        width: w,
        height: h,
        labels,
        sizes,
    }
}

/// True when, in every window, distinct background regions are separated by
/// zero-valued pixels, i.e. no 4-connected path of positive pixels joins two
/// of them. For non-negative maps this holds exactly when
/// `topo_loss(gt2d, gt2d)` has no connectivity term.
///
/// Dilation alone can split a window without a zero-valued separator, for
/// instance when a dilated point touches two window borders.
pub fn zero_separated(gt2d: &Grid2, cfg: &TopoConfig) -> bool {
    let (w, h) = gt2d.shape();
    super::tiles(w, h, cfg.window)
        .into_iter()
        .all(|((u0, v0), (tw, th))| {
            let win = gt2d.crop(u0, v0, tw, th);
            let lab = label_regions(&win, cfg);
            let positive =
                Grid2::from_fn(tw, th, |u, v| if win.get(u, v) > 0.0 { 1.0 } else { 0.0 });
            // components of the positive pixels, via the labeler with no dilation
            let raw = label_regions(
                &positive,
                &TopoConfig {
                    dilation_radius: 0,
                    ..*cfg
                },
            );
            let mut owner = vec![0u32; lab.region_count()];
            lab.labels().iter().zip(raw.labels()).all(|(&r, &c)| {
                if r == 0 {
                    return true;
                }
                let slot = &mut owner[r as usize - 1];
                if *slot == 0 {
                    *slot = c;
                }
                *slot == c
            }) && {
                let mut used: Vec<u32> = owner.clone();
                used.sort_unstable();
                used.dedup();
                used.len() == owner.len()
            }
        })
}
