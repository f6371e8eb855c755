//! Column-major run-length encoded binary masks.
//!
//! Runs alternate background/foreground and always start with background, so
//! a mask whose first pixel is foreground begins with a zero-length run. The
//! representation is kept canonical (no interior zero runs, no trailing zero
//! runs) so structural equality is mask equality.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum MaskError {
    #[error("mask size mismatch: {a:?} vs {b:?}")]
    SizeMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("run lengths sum to {sum}, expected {expected}")]
    CountSum { sum: u64, expected: u64 },
    #[error("invalid RLE string: {0}")]
    Parse(String),
    #[error("pixel buffer has {got} entries, expected {expected}")]
    BufferLength { got: usize, expected: usize },
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RleRecord", into = "RleRecord")]
pub struct Rle {
    height: u32,
    width: u32,
    counts: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RleRecord {
    size: [u32; 2],
    counts: String,
}

impl TryFrom<RleRecord> for Rle {
    type Error = MaskError;
    fn try_from(r: RleRecord) -> Result<Self, Self::Error> {
        Rle::parse(r.size[0], r.size[1], &r.counts)
    }
}

impl From<Rle> for RleRecord {
    fn from(r: Rle) -> Self {
        RleRecord {
            size: [r.height, r.width],
            counts: r.counts_string(),
        }
    }
}

impl fmt::Debug for Rle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Rle({}x{}, area={}, runs={:?})",
            self.height,
            self.width,
            self.area(),
            self.counts
        )
    }
}

impl Rle {
    /// Builds a mask from raw run lengths, validating the total.
    pub fn new(height: u32, width: u32, counts: Vec<u32>) -> Result<Self, MaskError> {
        let expected = u64::from(height) * u64::from(width);
        let sum: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if sum != expected {
            return Err(MaskError::CountSum { sum, expected });
        }
        Ok(Self {
            height,
            width,
            counts: canonicalize(counts),
        })
    }

    pub fn empty(height: u32, width: u32) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            counts: if n == 0 { Vec::new() } else { vec![n] },
        }
    }

    /// Parses the space-separated decimal run string used in mask JSONL.
    pub fn parse(height: u32, width: u32, s: &str) -> Result<Self, MaskError> {
        let counts = s
            .split_whitespace()
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|e| MaskError::Parse(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(height, width, counts)
    }

    pub fn counts_string(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&c.to_string());
        }
        out
    }

    /// Encodes a column-major pixel buffer (`index = col * height + row`).
    pub fn encode(height: u32, width: u32, pixels: &[bool]) -> Result<Self, MaskError> {
        let expected = height as usize * width as usize;
        if pixels.len() != expected {
            return Err(MaskError::BufferLength {
                got: pixels.len(),
                expected,
            });
        }
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &p in pixels {
            if p != current {
                counts.push(run);
                run = 0;
                current = p;
            }
            run += 1;
        }
        if expected > 0 {
            counts.push(run);
        }
        Ok(Self {
            height,
            width,
            counts: canonicalize(counts),
        })
    }

    /// Builds a mask from a predicate over `(row, col)`.
    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(height as usize * width as usize);
        for col in 0..width {
            for row in 0..height {
                pixels.push(f(row, col));
            }
        }
        Self::encode(height, width, &pixels).expect("buffer sized from dimensions")
    }

    /// Axis-aligned filled rectangle `[row0, row1) x [col0, col1)`, clipped.
    pub fn rect(height: u32, width: u32, row0: u32, col0: u32, row1: u32, col1: u32) -> Self {
        Self::from_fn(height, width, |r, c| r >= row0 && r < row1 && c >= col0 && c < col1)
    }

    /// Column-major pixel buffer.
    pub fn decode(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.pixel_count());
        let mut fg = false;
        for &c in &self.counts {
            out.extend(std::iter::repeat_n(fg, c as usize));
            fg = !fg;
        }
        out
    }

    pub fn size(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn pixel_count(&self) -> usize {
        self.height as usize * self.width as usize
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// Foreground runs as half-open column-major index ranges.
    pub fn foreground_runs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.counts.iter().enumerate().filter_map(move |(i, &c)| {
            let start = pos;
            pos += u64::from(c);
            (i % 2 == 1 && c > 0).then_some((start, pos))
        })
    }

    /// Iterates foreground pixels as `(row, col)`.
    pub fn foreground_pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let h = u64::from(self.height.max(1));
        self.foreground_runs()
            .flat_map(move |(s, e)| (s..e).map(move |i| ((i % h) as u32, (i / h) as u32)))
    }

    fn check_size(&self, other: &Rle) -> Result<(), MaskError> {
        if self.size() != other.size() {
            return Err(MaskError::SizeMismatch {
                a: self.size(),
                b: other.size(),
            });
        }
        Ok(())
    }

    /// |a ∩ b| computed by merging the two run lists.
    pub fn intersection_area(&self, other: &Rle) -> Result<u64, MaskError> {
        self.check_size(other)?;
        let mut a = self.foreground_runs().peekable();
        let mut b = other.foreground_runs().peekable();
        let mut total = 0u64;
        while let (Some(&(a0, a1)), Some(&(b0, b1))) = (a.peek(), b.peek()) {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                total += hi - lo;
            }
            if a1 <= b1 {
                a.next();
            } else {
                b.next();
            }
        }
        Ok(total)
    }

    pub fn union_area(&self, other: &Rle) -> Result<u64, MaskError> {
        let inter = self.intersection_area(other)?;
        Ok(self.area() + other.area() - inter)
    }

    /// Pixelwise OR.
    pub fn union(&self, other: &Rle) -> Result<Rle, MaskError> {
        self.check_size(other)?;
        let a = self.decode();
        let b = other.decode();
        let px: Vec<bool> = a.iter().zip(&b).map(|(x, y)| *x || *y).collect();
        Rle::encode(self.height, self.width, &px)
    }

    /// Mean `(row, col)` of foreground pixels; `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let area = self.area();
        if area == 0 {
            return None;
        }
        let (mut sr, mut sc) = (0f64, 0f64);
        for (r, c) in self.foreground_pixels() {
            sr += f64::from(r);
            sc += f64::from(c);
        }
        Some((sr / area as f64, sc / area as f64))
    }
}

/// Intersection over union; two empty masks score 0 so that an empty
/// detection can never trigger an identity merge.
pub fn mask_iou(a: &Rle, b: &Rle) -> Result<f64, MaskError> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

fn canonicalize(counts: Vec<u32>) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::with_capacity(counts.len());
    for (i, c) in counts.into_iter().enumerate() {
        if i == 0 {
            out.push(c);
            continue;
        }
        if c == 0 {
            // Zero run: the next run continues the previous state.
            out.push(0);
            continue;
        }
        if out.len() >= 2 && *out.last().unwrap() == 0 {
            out.pop();
            *out.last_mut().unwrap() += c;
        } else {
            out.push(c);
        }
    }
    while out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    out
}
