//! Cell quadrature for trilinear grids.
//!
//! Each cell is integrated with a tensor Gauss–Legendre rule. Cells near the
//! evaluation point are bisected until they are small compared with their
//! distance, and a box that contains the point is cut at it into octant boxes
//! that are integrated with the Duffy map, which absorbs the kernel
//! singularity into the `s²` Jacobian.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;

use super::density::GridDensity;
use crate::quadrature::Integral;
use crate::{Mat3, Vec3};

/// Gauss points per axis and opening ratio (box size / distance) per level.
pub(crate) const LEVELS: [(usize, f64); 6] = [(2, 1.0), (3, 0.7), (4, 0.5), (5, 0.35), (6, 0.25), (8, 0.18)];

const MAX_DEPTH: usize = 24;

fn gl01(n: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(n).unwrap())
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

#[derive(Clone, Copy)]
struct Cell {
    lo: Vec3,
    hi: Vec3,
}

impl Cell {
    fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }

    fn distance(&self, x: &Vec3) -> f64 {
        Vec3::from_fn(|a, _| (self.lo[a] - x[a]).max(x[a] - self.hi[a]).max(0.0)).norm()
    }

    fn size(&self) -> f64 {
        (self.hi - self.lo).max()
    }

    /// Sub-boxes obtained by cutting at `p` (clamped), dropping empty ones.
    fn split_at(&self, p: &Vec3) -> Vec<Cell> {
        let mut out = Vec::with_capacity(8);
        for corner in 0..8 {
            let o = [corner >> 2 & 1, corner >> 1 & 1, corner & 1];
            let lo = Vec3::from_fn(|a, _| if o[a] == 0 { self.lo[a] } else { p[a] });
            let hi = Vec3::from_fn(|a, _| if o[a] == 0 { p[a] } else { self.hi[a] });
            if (0..3).all(|a| hi[a] > lo[a]) {
                out.push(Cell { lo, hi });
            }
        }
        out
    }
}

fn cells(g: &GridDensity) -> Vec<Cell> {
    let lo = g.lower();
    let h = Vec3::from(g.spacing);
    let mut out = Vec::new();
    for i in 0..g.dims[0] - 1 {
        for j in 0..g.dims[1] - 1 {
            for k in 0..g.dims[2] - 1 {
                let a = lo + Vec3::new(i as f64, j as f64, k as f64).component_mul(&h);
                out.push(Cell { lo: a, hi: a + h });
            }
        }
    }
    out
}

fn tensor<const K: usize>(c: &Cell, rule: &[(f64, f64)], acc: &mut Integral<K>, f: &impl Fn(&Vec3) -> [f64; K]) {
    let e = c.hi - c.lo;
    let vol = e.x * e.y * e.z;
    for &(u, wu) in rule {
        for &(v, wv) in rule {
            for &(w, ww) in rule {
                let y = c.lo + Vec3::new(u * e.x, v * e.y, w * e.z);
                let wt = vol * wu * wv * ww;
                let val = f(&y);
                for k in 0..K {
                    acc.value[k] += wt * val[k];
                    acc.magnitude[k] += (wt * val[k]).abs();
                }
                acc.nodes += 1;
            }
        }
    }
}

/// Box with `x` at one corner: three Duffy pyramids, one per dominant axis.
fn duffy<const K: usize>(c: &Cell, x: &Vec3, rule: &[(f64, f64)], acc: &mut Integral<K>, f: &impl Fn(&Vec3) -> [f64; K]) {
    let far = Vec3::from_fn(|a, _| if (c.lo[a] - x[a]).abs() < (c.hi[a] - x[a]).abs() { c.hi[a] } else { c.lo[a] });
    let e = far - x;
    let vol = (e.x * e.y * e.z).abs();
    for p in 0..3 {
        let (q, r) = ((p + 1) % 3, (p + 2) % 3);
        for &(s, ws) in rule {
            for &(a, wa) in rule {
                for &(b, wb) in rule {
                    let mut u = Vec3::zeros();
                    u[p] = s;
                    u[q] = s * a;
                    u[r] = s * b;
                    let y = x + e.component_mul(&u);
                    let wt = vol * s * s * ws * wa * wb;
                    let val = f(&y);
                    for k in 0..K {
                        acc.value[k] += wt * val[k];
                        acc.magnitude[k] += (wt * val[k]).abs();
                    }
                    acc.nodes += 1;
                }
            }
        }
    }
}

fn refine<const K: usize>(
    c: &Cell,
    x: &Vec3,
    level: (usize, f64),
    rule: &[(f64, f64)],
    depth: usize,
    acc: &mut Integral<K>,
    f: &impl Fn(&Vec3) -> [f64; K],
) {
    if c.contains(x) {
        for sub in c.split_at(x) {
            duffy(&sub, x, rule, acc, f);
        }
        return;
    }
    if depth >= MAX_DEPTH || c.size() <= level.1 * c.distance(x) {
        tensor(c, rule, acc, f);
        return;
    }
    for sub in c.split_at(&(0.5 * (c.lo + c.hi))) {
        refine(&sub, x, level, rule, depth + 1, acc, f);
    }
}

/// `∫ f(y) dy` over the grid box, refined towards the singular point `x`
/// when one is given. `f` is evaluated only inside cells.
pub(crate) fn integrate<const K: usize, F>(g: &GridDensity, x: Option<&Vec3>, level: usize, f: F) -> Integral<K>
where
    F: Fn(&Vec3) -> [f64; K] + Sync,
{
    let lv = LEVELS[level];
    let rule = gl01(lv.0);
    let parts: Vec<Integral<K>> = cells(g)
        .par_iter()
        .map(|c| {
            let mut acc = Integral::<K>::zero();
            match x {
                Some(x) => refine(c, x, lv, &rule, 0, &mut acc, &f),
                None => tensor(c, &rule, &mut acc, &f),
            }
            acc
        })
        .collect();
    let mut total = Integral::<K>::zero();
    for p in &parts {
        total.add(p);
    }
    total
}

/// `∂ᵢ∂ⱼ ∫_box |x − y|⁻¹ dy` in closed form, with the ball-exclusion
/// principal value inside. `None` when `x` lies on a face plane of the box.
pub(crate) fn prism_hessian(x: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<Mat3> {
    let mut h = Mat3::zeros();
    for corner in 0..8 {
        let o = [corner >> 2 & 1, corner >> 1 & 1, corner & 1];
        let u = Vec3::from_fn(|a, _| if o[a] == 1 { hi[a] } else { lo[a] } - x[a]);
        if u.iter().any(|v| *v == 0.0) {
            return None;
        }
        let sign = -if o.iter().sum::<usize>() % 2 == 1 { -1.0 } else { 1.0 };
        let r = u.norm();
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            h[(i, i)] -= sign * (u[j] * u[k] / (u[i] * r)).atan();
            let off = sign * (u[k] + r).ln();
            h[(j, k)] += off;
            h[(k, j)] += off;
        }
    }
    Some(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn prism_hessian_trace_and_far_field() {
        let (lo, hi) = (Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let inside = prism_hessian(&Vec3::new(0.1, 0.2, -0.3), &lo, &hi).unwrap();
        assert!((inside.trace() + 4.0 * PI).abs() < 1e-12);
        let centre = prism_hessian(&Vec3::new(1e-9, 1e-9, 1e-9), &lo, &hi).unwrap();
        assert!((centre - Mat3::identity() * (-4.0 * PI / 3.0)).norm() < 1e-6);
        let x = Vec3::new(20.0, 0.0, 0.0);
        let far = prism_hessian(&x, &lo, &hi).unwrap();
        let point = (3.0 * x * x.transpose() - Mat3::identity() * 400.0) / 20f64.powi(5);
        assert!((far - point).norm() < 1e-8, "{far}");
        assert!(prism_hessian(&Vec3::new(0.5, 0.0, 0.1), &lo, &hi).is_none());
    }

    #[test]
    fn duffy_absorbs_inverse_distance() {
        // ∫ over the unit cube of 1/|y| from its corner
        let g = GridDensity { dims: [2; 3], spacing: [1.0; 3], origin: [0.0; 3], values: vec![1.0; 8], sidecar: None };
        let x = Vec3::zeros();
        let v = integrate::<1, _>(&g, Some(&x), 5, |y| [1.0 / y.norm()]);
        let want = 1.190_038_681_989_776_5;
        assert!((v.value[0] - want).abs() < 1e-9, "{}", v.value[0]);
    }
}
