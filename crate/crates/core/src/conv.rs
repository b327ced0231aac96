//! Discrete cross-correlations `out[x] = sum_y k(y - x) w[y]` on a grid.
//!
//! Kernels are functions of the integer cell offset `y - x`, so the result for
//! a translated measure is bit-identical.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::grid::{line_starts, GridSpec};

/// Above this many pair evaluations the FFT route is used.
const DIRECT_LIMIT: f64 = 4e7;

/// One-dimensional kernel table: `values[t]` is the kernel at offset `lo + t`.
#[derive(Clone, Debug)]
pub(crate) struct AxisKernel {
    pub lo: i64,
    pub values: Vec<f64>,
}

/// Separable correlation, one axis at a time.
pub(crate) fn correlate_separable(grid: &GridSpec, w: &[f64], kernels: &[AxisKernel]) -> Vec<f64> {
    let strides = grid.strides();
    let mut cur = w.to_vec();
    for (a, k) in kernels.iter().enumerate() {
        let n = grid.shape[a] as i64;
        let s = strides[a];
        let starts = line_starts(grid, a);
        let lines: Vec<(usize, Vec<f64>)> = starts
            .par_iter()
            .map(|&start| {
                let mut out = vec![0.0; n as usize];
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (t, kv) in k.values.iter().enumerate() {
                        let j = i as i64 + k.lo + t as i64;
                        if j >= 0 && j < n {
                            acc += kv * cur[start + j as usize * s];
                        }
                    }
                    *o = acc;
                }
                (start, out)
            })
            .collect();
        let mut next = vec![0.0; cur.len()];
        for (start, out) in lines {
            for (i, v) in out.into_iter().enumerate() {
                next[start + i * s] = v;
            }
        }
        cur = next;
    }
    cur
}

/// General correlation with a kernel of the cell offset.
pub(crate) fn correlate<K>(grid: &GridSpec, w: &[f64], kernel: K) -> Vec<f64>
where
    K: Fn(&[i64]) -> f64 + Sync,
{
    let d = grid.dim;
    let kshape: Vec<usize> = grid.shape.iter().map(|&n| 2 * n - 1).collect();
    let kgrid = GridSpec {
        dim: d,
        spacing: grid.spacing,
        origin: vec![0.0; d],
        shape: kshape.clone(),
    };
    let table: Vec<f64> = (0..kgrid.len())
        .into_par_iter()
        .map(|flat| {
            let idx = kgrid.unflatten(flat);
            let off: Vec<i64> = (0..d).map(|a| idx[a] as i64 - (grid.shape[a] as i64 - 1)).collect();
            kernel(&off)
        })
        .collect();
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] != 0.0).collect();
    let work = grid.len() as f64 * support.len() as f64;
    if work <= DIRECT_LIMIT {
        correlate_direct(grid, w, &support, &table, &kgrid)
    } else {
        correlate_fft(grid, w, &table, &kgrid)
    }
}

fn correlate_direct(grid: &GridSpec, w: &[f64], support: &[usize], table: &[f64], kgrid: &GridSpec) -> Vec<f64> {
    let d = grid.dim;
    let sup_idx: Vec<Vec<usize>> = support.iter().map(|&f| grid.unflatten(f)).collect();
    (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let xi = grid.unflatten(x);
            let mut acc = 0.0;
            let mut k = [0usize; 3];
            for (yflat, yi) in support.iter().zip(&sup_idx) {
                for a in 0..d {
                    k[a] = yi[a] + grid.shape[a] - 1 - xi[a];
                }
                acc += table[kgrid.flatten(&k[..d])] * w[*yflat];
            }
            acc
        })
        .collect()
}

fn correlate_fft(grid: &GridSpec, w: &[f64], table: &[f64], kgrid: &GridSpec) -> Vec<f64> {
    let d = grid.dim;
    let pshape: Vec<usize> = grid.shape.iter().map(|&n| 2 * n).collect();
    let pgrid = GridSpec {
        dim: d,
        spacing: grid.spacing,
        origin: vec![0.0; d],
        shape: pshape.clone(),
    };
    let plen = pgrid.len();
    let mut a = vec![Complex::new(0.0, 0.0); plen];
    for (flat, &v) in w.iter().enumerate() {
        if v != 0.0 {
            let idx = grid.unflatten(flat);
            a[pgrid.flatten(&idx)] = Complex::new(v, 0.0);
        }
    }
    // Reversed kernel: krev[z] = k(-z), stored at z mod P.
    let mut b = vec![Complex::new(0.0, 0.0); plen];
    for (flat, &v) in table.iter().enumerate() {
        let idx = kgrid.unflatten(flat);
        let pos: Vec<usize> = (0..d)
            .map(|ax| {
                let off = idx[ax] as i64 - (grid.shape[ax] as i64 - 1);
                (-off).rem_euclid(pshape[ax] as i64) as usize
            })
            .collect();
        b[pgrid.flatten(&pos)] = Complex::new(v, 0.0);
    }
    fft_nd(&pgrid, &mut a, false);
    fft_nd(&pgrid, &mut b, false);
    a.par_iter_mut().zip(b.par_iter()).for_each(|(x, y)| *x *= y);
    fft_nd(&pgrid, &mut a, true);
    let scale = 1.0 / plen as f64;
    (0..grid.len())
        .map(|flat| {
            let idx = grid.unflatten(flat);
            a[pgrid.flatten(&idx)].re * scale
        })
        .collect()
}

fn fft_nd(g: &GridSpec, data: &mut [Complex<f64>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let strides = g.strides();
    for ax in 0..g.dim {
        let n = g.shape[ax];
        let s = strides[ax];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let starts = line_starts(g, ax);
        let lines: Vec<Vec<Complex<f64>>> = starts
            .par_iter()
            .map(|&start| {
                let mut buf: Vec<Complex<f64>> = (0..n).map(|i| data[start + i * s]).collect();
                fft.process(&mut buf);
                buf
            })
            .collect();
        for (start, buf) in starts.iter().zip(lines) {
            for (i, v) in buf.into_iter().enumerate() {
                data[start + i * s] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let g = GridSpec::centered(2, 6, 0.5).unwrap();
        let w: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 13) as f64 / 1000.0).collect();
        let kern = |o: &[i64]| 1.0 / (1.0 + (o[0] * o[0] + o[1] * o[1]) as f64).sqrt();
        let kgrid = GridSpec {
            dim: 2,
            spacing: 0.5,
            origin: vec![0.0; 2],
            shape: vec![25, 25],
        };
        let table: Vec<f64> = (0..kgrid.len())
            .map(|f| {
                let i = kgrid.unflatten(f);
                kern(&[i[0] as i64 - 12, i[1] as i64 - 12])
            })
            .collect();
        let support: Vec<usize> = (0..w.len()).collect();
        let direct = correlate_direct(&g, &w, &support, &table, &kgrid);
        let fft = correlate_fft(&g, &w, &table, &kgrid);
        for (a, b) in direct.iter().zip(&fft) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_kernel_orientation() {
        // out[x] = sum_y k(y - x) w[y] with k nonzero only at offset +1.
        let g = GridSpec::centered(1, 3, 1.0).unwrap();
        let mut w = vec![0.0; 7];
        w[4] = 1.0;
        let out = correlate(&g, &w, |o| if o[0] == 1 { 1.0 } else { 0.0 });
        assert_eq!(out[3], 1.0);
        let kgrid = GridSpec {
            dim: 1,
            spacing: 1.0,
            origin: vec![0.0],
            shape: vec![13],
        };
        let table: Vec<f64> = (0..13).map(|i| if i == 7 { 1.0 } else { 0.0 }).collect();
        let out = correlate_fft(&g, &w, &table, &kgrid);
        assert!((out[3] - 1.0).abs() < 1e-12);
        assert!(out[5].abs() < 1e-12);
    }
}
