use crate::error::{Error, Result};

/// Per-pixel iris (1) / non-iris (0) labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!("mask must be non-empty, got {width}x{height}")));
        }
        if labels.len() != width * height {
            return Err(Error::Validation(format!(
                "mask {width}x{height} needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Validation(format!("mask label {bad} is not 0 or 1")));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Self {
        assert!(label <= 1);
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y) as u8);
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    /// Builds a mask from rows of labels; every row must have equal length.
    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Validation("ragged mask rows".into()));
        }
        Self::new(width, height, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: bool) {
        self.labels[y * self.width + x] = label as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|&l| 1 - l).collect(),
        }
    }

    /// Tight `(x_min, y_min, x_max, y_max)` box around the 1-pixels,
    /// max-exclusive. `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) == 1 {
                    bounds = Some(match bounds {
                        None => (x, y, x + 1, y + 1),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
                    });
                }
            }
        }
        bounds
    }

    /// Copies the window `[x0, x0 + w) x [y0, y0 + h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "mask crop out of bounds");
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y) == 1)
    }

    /// Places `self` at `(x0, y0)` on an all-zero canvas of the given size.
    pub fn paste_into(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        assert!(x0 + self.width <= width && y0 + self.height <= height, "mask paste out of bounds");
        let mut out = Self::zeros(width, height);
        for y in 0..self.height {
            let src = &self.labels[y * self.width..(y + 1) * self.width];
            let start = (y0 + y) * width + x0;
            out.labels[start..start + self.width].copy_from_slice(src);
        }
        out
    }

    /// Intersection over union of the 1-pixels; 1 when both are empty.
    pub fn iou(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims(), "iou of differently sized masks");
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            inter += (a & b) as usize;
            union += (a | b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}
