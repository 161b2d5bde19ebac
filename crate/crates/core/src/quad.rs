//! Numerical integration: adaptive Gauss-Kronrod for vector integrands and
//! composite Gauss-Legendre rules.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights at the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, kron: &mut [f64], gauss: &mut [f64], buf: &mut [f64]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    kron.iter_mut().for_each(|v| *v = 0.0);
    gauss.iter_mut().for_each(|v| *v = 0.0);
    for (k, (&x, &w)) in XGK.iter().zip(&WGK).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for s in nodes {
            f(c + s * h * x, buf);
            for (j, v) in buf.iter().enumerate() {
                kron[j] += w * v;
                if k % 2 == 1 {
                    gauss[j] += WG[k / 2] * v;
                }
            }
        }
    }
    kron.iter_mut().for_each(|v| *v *= h);
    gauss.iter_mut().for_each(|v| *v *= h);
}

/// Integrates the `dim`-valued function `f` over `[a, b]` to absolute
/// tolerance `atol` (max-norm over components).
///
/// The interval is first cut into `panels` equal pieces; pieces whose
/// Kronrod/Gauss discrepancy exceeds their share of the tolerance are
/// bisected.
pub fn integrate<F: FnMut(f64, &mut [f64])>(mut f: F, a: f64, b: f64, dim: usize, atol: f64, panels: usize) -> Vec<f64> {
    let total = b - a;
    let mut result = vec![0.0; dim];
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    let panels = panels.max(1);
    let mut stack: Vec<(f64, f64)> = (0..panels)
        .rev()
        .map(|i| (a + total * i as f64 / panels as f64, a + total * (i + 1) as f64 / panels as f64))
        .collect();
    while let Some((lo, hi)) = stack.pop() {
        gk15(&mut f, lo, hi, &mut kron, &mut gauss, &mut buf);
        let err = kron.iter().zip(&gauss).map(|(k, g)| (k - g).abs()).fold(0.0, f64::max);
        let width = hi - lo;
        if err <= atol * width / total || width <= 1e-9 * total {
            result.iter_mut().zip(&kron).for_each(|(r, k)| *r += k);
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    result
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (pm, pm1) = if m == 1 { (x, 1.0) } else { (p1, p0) };
            dp = mf * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if m == 1 {
            return (vec![0.0], vec![2.0]);
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule with `panels` pieces of `m` nodes on `[a, b]`.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(m);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * m);
    let mut weights = Vec::with_capacity(panels * m);
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * width;
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(c + 0.5 * width * x);
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_bump_integrates_to_one() {
        let v = integrate(
            |x, out| {
                let z = (x - 0.3) / 0.2;
                out[0] = (-0.5 * z * z).exp() / (0.2 * (2.0 * core::f64::consts::PI).sqrt());
                out[1] = x * out[0];
            },
            -5.0,
            5.0,
            2,
            1e-12,
            4,
        );
        assert!((v[0] - 1.0).abs() < 1e-11);
        assert!((v[1] - 0.3).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        let (x, w) = composite_gauss_legendre(0.0, 3.0, 7, 4);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((s - 9.0).abs() < 1e-12);
    }
}
