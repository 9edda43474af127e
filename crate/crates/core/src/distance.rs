//! Exact squared Euclidean distance transform (lower envelope of parabolas).

use rayon::prelude::*;

/// Squared distance from every voxel to the nearest `true` voxel, with per-axis
/// step lengths `step` (1.0 for voxel units, spacing for millimetres).
///
/// Voxels with no `true` voxel anywhere get `f64::INFINITY`.
pub fn squared_distance(mask: &[bool], dims: [usize; 3], step: [f64; 3]) -> Vec<f64> {
    let mut d: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let [nx, ny, nz] = dims;
    let slab = nx * ny;

    // x and y passes stay inside one z slab.
    d.par_chunks_mut(slab).for_each(|plane| {
        let mut line = Vec::new();
        let mut scratch = Scratch::default();
        for j in 0..ny {
            line.clear();
            line.extend_from_slice(&plane[j * nx..(j + 1) * nx]);
            transform_line(&mut line, step[0], &mut scratch);
            plane[j * nx..(j + 1) * nx].copy_from_slice(&line);
        }
        for i in 0..nx {
            line.clear();
            line.extend((0..ny).map(|j| plane[i + nx * j]));
            transform_line(&mut line, step[1], &mut scratch);
            for (j, v) in line.iter().enumerate() {
                plane[i + nx * j] = *v;
            }
        }
    });

    // z pass: one column per (i, j), gathered in parallel then scattered back.
    let columns: Vec<Vec<f64>> = (0..slab)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, ij| {
            let mut line: Vec<f64> = (0..nz).map(|k| d[ij + slab * k]).collect();
            transform_line(&mut line, step[2], scratch);
            line
        })
        .collect();
    for (ij, col) in columns.into_iter().enumerate() {
        for (k, v) in col.into_iter().enumerate() {
            d[ij + slab * k] = v;
        }
    }
    d
}

#[derive(Default)]
struct Scratch {
    v: Vec<usize>,
    z: Vec<f64>,
    f: Vec<f64>,
}

/// In-place 1D transform: `f(p) <- min_q f(q) + (w (p - q))^2`.
fn transform_line(f: &mut [f64], w: f64, s: &mut Scratch) {
    let n = f.len();
    let w2 = w * w;
    s.v.clear();
    s.z.clear();
    s.f.clear();
    s.f.extend_from_slice(f);
    let src = &s.f;

    for q in (0..n).filter(|&q| src[q].is_finite()) {
        let qf = q as f64;
        loop {
            match s.v.last() {
                None => {
                    s.v.push(q);
                    s.z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let pf = p as f64;
                    let x = ((src[q] + w2 * qf * qf) - (src[p] + w2 * pf * pf)) / (2.0 * w2 * (qf - pf));
                    if x <= *s.z.last().expect("z tracks v") {
                        s.v.pop();
                        s.z.pop();
                    } else {
                        s.v.push(q);
                        s.z.push(x);
                        break;
                    }
                }
            }
        }
    }
    if s.v.is_empty() {
        return;
    }
    let mut k = 0;
    for (p, out) in f.iter_mut().enumerate() {
        let pf = p as f64;
        while k + 1 < s.v.len() && s.z[k + 1] < pf {
            k += 1;
        }
        let q = s.v[k];
        let dq = pf - q as f64;
        *out = w2 * dq * dq + src[q];
    }
}
