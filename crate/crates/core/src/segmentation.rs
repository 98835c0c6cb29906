//! Spectrogram segmentation: box smoothing, the max/median threshold,
//! 8-connected component labeling, size filtering and mirroring of masks
//! onto the full frequency axis.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TfmdError};

/// Box-filtered magnitudes over the non-negative-frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSpectrogram {
    pub values: Array2<f64>,
    pub kernel_rows: usize,
    pub kernel_cols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub bits: Array2<bool>,
}

impl BinaryMask {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMask {
            bits: Array2::from_elem((rows, cols), false),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.bits.dim()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dim() == other.dim() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    pub fn is_disjoint(&self, other: &BinaryMask) -> bool {
        self.dim() == other.dim() && self.bits.iter().zip(&other.bits).all(|(a, b)| !(a & b))
    }

    /// Bitwise OR of `masks`; all must share a shape. `None` for an empty slice.
    pub fn union(masks: &[BinaryMask]) -> Option<BinaryMask> {
        let (first, rest) = masks.split_first()?;
        let mut bits = first.bits.clone();
        for m in rest {
            bits.zip_mut_with(&m.bits, |a, b| *a |= *b);
        }
        Some(BinaryMask { bits })
    }
}

/// Component labels (0 = background; 1..=n_components otherwise).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComponents {
    pub labels: Array2<u32>,
    pub n_components: usize,
    /// `pixel_counts[i]` is the size of label `i + 1`.
    pub pixel_counts: Vec<usize>,
}

impl LabeledComponents {
    pub fn component_mask(&self, label: u32) -> BinaryMask {
        BinaryMask {
            bits: self.labels.mapv(|l| l == label),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Absolute minimum component size in pixels.
    pub p_abs: usize,
    /// Minimum size as a fraction of the grid area.
    pub p_rel: f64,
    /// Threshold divisor; larger values give a lower threshold.
    pub c_thresh: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            p_abs: 10,
            p_rel: 0.005,
            c_thresh: 2.0,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_rel.is_finite() && (0.0..1.0).contains(&self.p_rel)) {
            return Err(TfmdError::invalid(format!(
                "p_rel must lie in [0, 1), got {}",
                self.p_rel
            )));
        }
        if !(self.c_thresh.is_finite() && self.c_thresh > 0.0) {
            return Err(TfmdError::invalid(format!(
                "c_thresh must be positive, got {}",
                self.c_thresh
            )));
        }
        Ok(())
    }

    /// `max(p_abs, floor(p_rel * grid_cells))`.
    pub fn size_threshold(&self, grid_cells: usize) -> usize {
        self.p_abs
            .max((self.p_rel * grid_cells as f64).floor() as usize)
    }
}

/// Mean over the `rows x cols` neighborhood of each cell, truncated at the
/// borders and normalized by the number of in-bounds cells.
pub fn smooth(magnitudes: &Array2<f64>, rows: usize, cols: usize) -> Result<SmoothedSpectrogram> {
    if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
        return Err(TfmdError::invalid(format!(
            "smoothing kernel must have odd dimensions, got {rows}x{cols}"
        )));
    }
    if magnitudes.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(TfmdError::invalid(
            "magnitudes must be finite and non-negative",
        ));
    }
    let (h, w) = magnitudes.dim();
    let (ru, rv) = (rows / 2, cols / 2);
    let mut values = Array2::<f64>::zeros((h, w));
    for i in 0..h {
        let (i0, i1) = (i.saturating_sub(ru), (i + ru).min(h.saturating_sub(1)));
        for j in 0..w {
            let (j0, j1) = (j.saturating_sub(rv), (j + rv).min(w.saturating_sub(1)));
            let mut sum = 0.0;
            for a in i0..=i1 {
                for b in j0..=j1 {
                    sum += magnitudes[[a, b]];
                }
            }
            values[[i, j]] = sum / ((i1 - i0 + 1) * (j1 - j0 + 1)) as f64;
        }
    }
    Ok(SmoothedSpectrogram {
        values,
        kernel_rows: rows,
        kernel_cols: cols,
    })
}

/// Median of `values`; the mean of the two middle order statistics for an
/// even count.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if values.len() % 2 == 1 {
        Some(upper)
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((below + upper) / 2.0)
    }
}

/// `sqrt(max * median / c_thresh)` over all cells. An all-zero spectrogram
/// yields 0, which produces an empty mask.
pub fn adaptive_threshold(s: &SmoothedSpectrogram, c_thresh: f64) -> Result<f64> {
    if !(c_thresh.is_finite() && c_thresh > 0.0) {
        return Err(TfmdError::invalid(format!(
            "c_thresh must be positive, got {c_thresh}"
        )));
    }
    let flat: Vec<f64> = s.values.iter().copied().collect();
    let med = median(&flat).ok_or_else(|| TfmdError::invalid("empty spectrogram"))?;
    let max = flat.iter().copied().fold(0.0, f64::max);
    Ok((max * med / c_thresh).sqrt())
}

/// Cells strictly above `tau`.
pub fn initial_mask(s: &SmoothedSpectrogram, tau: f64) -> BinaryMask {
    BinaryMask {
        bits: s.values.mapv(|v| v > tau),
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // Slot 0 is the background and never merged.
        DisjointSet { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass 8-connected labeling. Final labels are numbered by the first
/// pixel of each component in row-major order.
pub fn label_components(mask: &BinaryMask) -> LabeledComponents {
    let (h, w) = mask.dim();
    let mut provisional = Array2::<u32>::zeros((h, w));
    let mut sets = DisjointSet::new();

    for i in 0..h {
        for j in 0..w {
            if !mask.bits[[i, j]] {
                continue;
            }
            let mut neighbors = [0u32; 4];
            if j > 0 {
                neighbors[0] = provisional[[i, j - 1]];
            }
            if i > 0 {
                if j > 0 {
                    neighbors[1] = provisional[[i - 1, j - 1]];
                }
                neighbors[2] = provisional[[i - 1, j]];
                if j + 1 < w {
                    neighbors[3] = provisional[[i - 1, j + 1]];
                }
            }
            let label = match neighbors.iter().copied().filter(|l| *l != 0).min() {
                Some(l) => {
                    for n in neighbors.iter().copied().filter(|l| *l != 0) {
                        sets.union(l, n);
                    }
                    l
                }
                None => sets.make(),
            };
            provisional[[i, j]] = label;
        }
    }

    let mut remap = vec![0u32; sets.parent.len()];
    let mut pixel_counts = Vec::new();
    let mut labels = Array2::<u32>::zeros((h, w));
    for (p, out) in provisional.iter().zip(labels.iter_mut()) {
        if *p == 0 {
            continue;
        }
        let root = sets.find(*p) as usize;
        if remap[root] == 0 {
            pixel_counts.push(0);
            remap[root] = pixel_counts.len() as u32;
        }
        let l = remap[root];
        pixel_counts[(l - 1) as usize] += 1;
        *out = l;
    }

    LabeledComponents {
        labels,
        n_components: pixel_counts.len(),
        pixel_counts,
    }
}

/// Labels that pass the size filter, ordered by descending size with ties
/// broken by the smaller label.
pub fn retained_labels(
    lc: &LabeledComponents,
    params: &FilterParams,
    grid_cells: usize,
) -> Vec<u32> {
    let threshold = params.size_threshold(grid_cells);
    let mut kept: Vec<(u32, usize)> = lc
        .pixel_counts
        .iter()
        .enumerate()
        .filter(|(_, &size)| size >= threshold)
        .map(|(i, &size)| (i as u32 + 1, size))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    kept.into_iter().map(|(l, _)| l).collect()
}

/// One mask per retained component, in [`retained_labels`] order.
pub fn filter_by_size(
    lc: &LabeledComponents,
    params: &FilterParams,
    grid_cells: usize,
) -> Vec<BinaryMask> {
    retained_labels(lc, params, grid_cells)
        .into_iter()
        .map(|l| lc.component_mask(l))
        .collect()
}

/// Mirrors a non-negative-frequency mask around the DC row onto the full
/// `fft_size`-row grid. For even sizes the `-fs/2` row has no counterpart
/// and stays zero.
pub fn extend_symmetric(mask: &BinaryMask, fft_size: usize) -> Result<BinaryMask> {
    let n_pos = fft_size.div_ceil(2);
    let (rows, cols) = mask.dim();
    if rows != n_pos {
        return Err(TfmdError::invalid(format!(
            "mask has {rows} rows, expected {n_pos} for FFT size {fft_size}"
        )));
    }
    let dc = fft_size / 2;
    let mut bits = Array2::from_elem((fft_size, cols), false);
    for r in 0..fft_size {
        let src = r.abs_diff(dc);
        if src < n_pos {
            bits.row_mut(r).assign(&mask.bits.row(src));
        }
    }
    Ok(BinaryMask { bits })
}
