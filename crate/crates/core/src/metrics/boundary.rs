//! Contour accuracy between a predicted and a reference mask.

use crate::fusion::Rle;

/// Boundary tolerance as a fraction of the image diagonal.
pub const BOUNDARY_TOLERANCE: f64 = 0.008;

pub fn tolerance_px(height: u32, width: u32) -> f64 {
    (BOUNDARY_TOLERANCE * f64::from(height).hypot(f64::from(width))).ceil()
}

/// Row-major boundary map: foreground pixels with a 4-neighbour that is
/// background or outside the image.
pub fn boundary_map(mask: &Rle) -> Vec<bool> {
    let (h, w) = (mask.height() as usize, mask.width() as usize);
    let mut fg = vec![false; h * w];
    for (r, c) in mask.foreground_pixels() {
        fg[r as usize * w + c as usize] = true;
    }
    let at = |r: isize, c: isize| r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && fg[r as usize * w + c as usize];
    let mut out = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            if fg[r * w + c] {
                let (ri, ci) = (r as isize, c as isize);
                out[r * w + c] = !(at(ri - 1, ci) && at(ri + 1, ci) && at(ri, ci - 1) && at(ri, ci + 1));
            }
        }
    }
    out
}

/// 1-D squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let mut started = false;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        if !started {
            v[0] = q;
            started = true;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if !started {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance from each pixel to the nearest set pixel.
pub fn squared_distance_transform(set: &[bool], height: usize, width: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = set.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let mut col_in = vec![0f64; height];
    let mut col_out = vec![0f64; height];
    for c in 0..width {
        for r in 0..height {
            col_in[r] = grid[r * width + c];
        }
        edt_1d(&col_in, &mut col_out);
        for r in 0..height {
            grid[r * width + c] = col_out[r];
        }
    }
    let mut row_out = vec![0f64; width];
    for r in 0..height {
        edt_1d(&grid[r * width..(r + 1) * width], &mut row_out);
        grid[r * width..(r + 1) * width].copy_from_slice(&row_out);
    }
    grid
}

/// Contour F-measure: a boundary pixel counts as matched when the other
/// contour passes within the tolerance radius.
pub fn frame_boundary_f(pred: &Rle, gt: &Rle) -> f64 {
    let (h, w) = (gt.height() as usize, gt.width() as usize);
    let pb = boundary_map(pred);
    let gb = boundary_map(gt);
    let np = pb.iter().filter(|&&b| b).count();
    let ng = gb.iter().filter(|&&b| b).count();
    match (np, ng) {
        (0, 0) => return 1.0,
        (0, _) | (_, 0) => return 0.0,
        _ => {}
    }
    let tol2 = tolerance_px(gt.height(), gt.width()).powi(2);
    let dg = squared_distance_transform(&gb, h, w);
    let dp = squared_distance_transform(&pb, h, w);
    let pm = pb.iter().zip(&dg).filter(|(&b, &d)| b && d <= tol2).count();
    let gm = gb.iter().zip(&dp).filter(|(&b, &d)| b && d <= tol2).count();
    let precision = pm as f64 / np as f64;
    let recall = gm as f64 / ng as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}
