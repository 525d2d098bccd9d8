//! Brute-force and quadrature oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use nodal_core::FrequencySet;
use rayon::prelude::*;

/// Dense table from lattice vectors in `[−R, R]^d` to point indices.
pub struct DenseIndex {
    d: usize,
    radius: i64,
    side: usize,
    slots: Vec<i32>,
}

impl DenseIndex {
    pub fn new(set: &FrequencySet) -> Self {
        let d = set.d();
        let radius = set.radius();
        let side = (2 * radius + 1) as usize;
        let mut idx = Self {
            d,
            radius,
            side,
            slots: vec![-1; side.pow(d as u32)],
        };
        for (i, p) in set.points().enumerate() {
            let k = idx.slot(p).expect("point inside its own box");
            idx.slots[k] = i as i32;
        }
        idx
    }

    fn slot(&self, v: &[i64]) -> Option<usize> {
        let mut k = 0usize;
        for &c in v {
            if c.abs() > self.radius {
                return None;
            }
            k = k * self.side + (c + self.radius) as usize;
        }
        Some(k)
    }

    pub fn find(&self, v: &[i64]) -> Option<usize> {
        debug_assert_eq!(v.len(), self.d);
        self.slot(v).and_then(|k| usize::try_from(self.slots[k]).ok())
    }
}

/// Brute-force `|C(4)|` with each tuple classified as `D″`, `D′` or `X(4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BruteC4 {
    pub total: u64,
    pub d_sym: u64,
    pub d_diag: u64,
    pub x4: u64,
}

/// Every ordered `(i, j, k)` fixes the fourth point, so this visits all of
/// `E⁴` that can possibly sum to zero.
pub fn brute_c4(set: &FrequencySet) -> BruteC4 {
    let n = set.n();
    let d = set.d();
    let index = DenseIndex::new(set);
    let anti = |i: usize| n - 1 - i;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = BruteC4::default();
            let mut v = vec![0i64; d];
            for j in 0..n {
                for k in 0..n {
                    for a in 0..d {
                        v[a] = -(set.point(i)[a] + set.point(j)[a] + set.point(k)[a]);
                    }
                    let Some(l) = index.find(&v) else { continue };
                    acc.total += 1;
                    let t = [i, j, k, l];
                    let pair = [i, anti(i)];
                    if t.iter().all(|x| pair.contains(x)) {
                        acc.d_diag += 1;
                    } else if (i == anti(j) && k == anti(l))
                        || (i == anti(k) && j == anti(l))
                        || (i == anti(l) && j == anti(k))
                    {
                        acc.d_sym += 1;
                    } else {
                        acc.x4 += 1;
                    }
                }
            }
            acc
        })
        .reduce(BruteC4::default, |a, b| BruteC4 {
            total: a.total + b.total,
            d_sym: a.d_sym + b.d_sym,
            d_diag: a.d_diag + b.d_diag,
            x4: a.x4 + b.x4,
        })
}

/// Brute-force `|C(6)|`: five free points and a lookup for the sixth.
pub fn brute_c6(set: &FrequencySet) -> u64 {
    let n = set.n();
    let d = set.d();
    let index = DenseIndex::new(set);
    let pts: Vec<&[i64]> = set.points().collect();
    (0..n)
        .into_par_iter()
        .map(|i1| {
            let mut count = 0u64;
            let mut s2 = vec![0i64; d];
            let mut s3 = vec![0i64; d];
            let mut s4 = vec![0i64; d];
            let mut v = vec![0i64; d];
            for i2 in 0..n {
                for a in 0..d {
                    s2[a] = pts[i1][a] + pts[i2][a];
                }
                for i3 in 0..n {
                    for a in 0..d {
                        s3[a] = s2[a] + pts[i3][a];
                    }
                    for i4 in 0..n {
                        for a in 0..d {
                            s4[a] = s3[a] + pts[i4][a];
                        }
                        for p5 in &pts {
                            for a in 0..d {
                                v[a] = -(s4[a] + p5[a]);
                            }
                            if index.find(&v).is_some() {
                                count += 1;
                            }
                        }
                    }
                }
            }
            count
        })
        .sum()
}

/// Trapezoid averages of the sixteen integrands over a `grid^4`-style tensor
/// grid on `T^d`, in the order of `IntegralTag::ALL`, un-normalised.
///
/// `r`, `D`, `H` are built from an integer phase table, so the oracle shares
/// no evaluation code with the library. The rule is exact for trigonometric
/// polynomials whose frequencies stay below `grid` in every coordinate.
pub fn torus_quadrature(set: &FrequencySet, grid: usize) -> [f64; 16] {
    let d = set.d();
    let n = set.n() as f64;
    let g = grid as i64;
    let cos_table: Vec<f64> = (0..grid).map(|k| (2.0 * PI * k as f64 / grid as f64).cos()).collect();
    let sin_table: Vec<f64> = (0..grid).map(|k| (2.0 * PI * k as f64 / grid as f64).sin()).collect();
    let pts: Vec<Vec<i64>> = set.points().map(|p| p.to_vec()).collect();
    let total = grid.pow(d as u32);

    let sums = (0..total)
        .into_par_iter()
        .fold(
            || [0.0f64; 16],
            |mut acc, node| {
                let mut rest = node;
                let k: Vec<i64> = (0..d)
                    .map(|_| {
                        let c = (rest % grid) as i64;
                        rest /= grid;
                        c
                    })
                    .collect();
                let mut r = 0.0;
                let mut dv = vec![0.0; d];
                let mut h = vec![vec![0.0; d]; d];
                for mu in &pts {
                    let phase = mu.iter().zip(&k).map(|(a, b)| a * b).sum::<i64>().rem_euclid(g) as usize;
                    let (c, s) = (cos_table[phase], sin_table[phase]);
                    r += c;
                    for a in 0..d {
                        dv[a] -= s * mu[a] as f64;
                        for b in 0..d {
                            h[a][b] -= c * (mu[a] * mu[b]) as f64;
                        }
                    }
                }
                r /= n;
                dv.iter_mut().for_each(|x| *x *= 2.0 * PI / n);
                h.iter_mut().flatten().for_each(|x| *x *= 4.0 * PI * PI / n);

                let mat = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
                    (0..d)
                        .map(|i| (0..d).map(|j| (0..d).map(|l| a[i][l] * b[l][j]).sum()).collect())
                        .collect()
                };
                let trace = |a: &Vec<Vec<f64>>| (0..d).map(|i| a[i][i]).sum::<f64>();
                let quad = |a: &Vec<Vec<f64>>| {
                    (0..d)
                        .map(|i| (0..d).map(|j| dv[i] * a[i][j] * dv[j]).sum::<f64>())
                        .sum::<f64>()
                };
                let h2 = mat(&h, &h);
                let h4 = mat(&h2, &h2);
                let h6 = mat(&h4, &h2);
                let dd: f64 = dv.iter().map(|x| x * x).sum();
                let tr_h2 = trace(&h2);
                let dhd = quad(&h);
                let dh2d = quad(&h2);
                let r2 = r * r;

                let values = [
                    r2,
                    dd,
                    tr_h2,
                    r2 * r2,
                    dd * dd,
                    r2 * dd,
                    r2 * tr_h2,
                    trace(&h4),
                    tr_h2 * tr_h2,
                    dd * tr_h2,
                    r * dhd,
                    dh2d,
                    dd * dd * dd,
                    r2 * r2 * dd,
                    trace(&h6),
                    r * dd * dhd,
                ];
                for (a, v) in acc.iter_mut().zip(values) {
                    *a += v;
                }
                acc
            },
        )
        .reduce(
            || [0.0f64; 16],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    sums.map(|s| s / total as f64)
}
