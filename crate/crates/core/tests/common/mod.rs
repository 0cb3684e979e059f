//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use s2haar::framelet::P;
use s2haar::metrics::SplitMix64;
use s2haar::partition::{patch_count, ParamRect, Partition};
use s2haar::solver::Mask;
use s2haar::SphericalSignal;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Area of a parameter rectangle by composite Gauss–Legendre quadrature of
/// the cap-map area density `(1 + u² + v²)^(−3/2)`.
pub fn quadrature_area(rect: &ParamRect) -> f64 {
    let rule = gauss_legendre(12);
    let panels = 8;
    let (du, dv) = (
        (rect.u_hi - rect.u_lo) / panels as f64,
        (rect.v_hi - rect.v_lo) / panels as f64,
    );
    let mut total = 0.0;
    for i in 0..panels {
        for j in 0..panels {
            let (u0, v0) = (rect.u_lo + i as f64 * du, rect.v_lo + j as f64 * dv);
            for &(xa, wa) in &rule {
                for &(xb, wb) in &rule {
                    let u = u0 + 0.5 * du * (xa + 1.0);
                    let v = v0 + 0.5 * dv * (xb + 1.0);
                    total += wa * wb * (1.0 + u * u + v * v).powf(-1.5);
                }
            }
        }
    }
    total * 0.25 * du * dv
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// Minimum of `‖F x‖₁` over level-1 signals agreeing with `g` on the
/// observed set, for a depth-1 transform.
///
/// The problem splits into one sibling group per face. On each group the
/// objective is a convex piecewise-linear function of the `k` unknowns
/// whose pieces have full column rank, so its minimum is attained where
/// `k` independent rows of `P·v` vanish. Every such vertex is enumerated.
pub fn l1_oracle(g: &[f64], mask: &Mask) -> f64 {
    assert_eq!(g.len(), 24);
    let mut total = 0.0;
    for face in 0..6 {
        let idx: Vec<usize> = (4 * face..4 * face + 4).collect();
        let unknown: Vec<usize> = (0..4).filter(|&c| !mask.is_observed(idx[c])).collect();
        let fixed: Vec<f64> = (0..4)
            .map(|c| {
                if mask.is_observed(idx[c]) {
                    g[idx[c]]
                } else {
                    0.0
                }
            })
            .collect();
        let eval = |v: &[f64]| -> f64 {
            P.iter()
                .map(|row| row.iter().zip(v).map(|(p, x)| p * x).sum::<f64>().abs())
                .sum()
        };
        if unknown.is_empty() {
            total += eval(&fixed);
            continue;
        }
        let k = unknown.len();
        let mut best = f64::INFINITY;
        for rows in subsets(7, k) {
            let a: Vec<Vec<f64>> = rows
                .iter()
                .map(|&r| unknown.iter().map(|&c| P[r][c]).collect())
                .collect();
            let b: Vec<f64> = rows
                .iter()
                .map(|&r| -P[r].iter().zip(&fixed).map(|(p, x)| p * x).sum::<f64>())
                .collect();
            if let Some(t) = solve(a, b) {
                let mut v = fixed.clone();
                for (&c, &val) in unknown.iter().zip(&t) {
                    v[c] = val;
                }
                best = best.min(eval(&v));
            }
        }
        total += best;
    }
    total
}

/// Sum of a constant and three low-order real spherical harmonics
/// (degrees 1, 2, 2) at the leaf centers, within `[0, 255]`.
pub fn smooth_signal(partition: &Partition) -> SphericalSignal {
    let values = partition
        .centers()
        .iter()
        .map(|&[x, y, z]| 128.0 + 60.0 * z + 45.0 * (x * x - y * y) + 35.0 * x * z)
        .collect();
    SphericalSignal::from_values(partition.level(), values).unwrap()
}

pub fn random_signal(level: u32, rng: &mut SplitMix64) -> SphericalSignal {
    let values = (0..patch_count(level))
        .map(|_| 255.0 * rng.next_f64())
        .collect();
    SphericalSignal::from_values(level, values).unwrap()
}

pub fn random_mask(level: u32, ratio: f64, rng: &mut SplitMix64) -> Mask {
    let flags = (0..patch_count(level))
        .map(|_| rng.next_f64() > ratio)
        .collect();
    Mask::new(level, flags).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
