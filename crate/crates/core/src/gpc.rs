//! Orthonormal chaos basis for a scalar uniform random input.
//!
//! The basis is the shifted Legendre family on the support `[a, b]`,
//! normalized so that `E_z[psi_h psi_k] = delta_hk` under the uniform
//! density. Quadrature is Gauss-Legendre mapped to the support with weights
//! that sum to one, so every weighted sum below is an expectation over `z`.
//!
//! Basis values at the quadrature nodes are tabulated at construction; the
//! particle kernels only ever touch the `K x (M+1)` tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial family of the chaos basis. Only uniform inputs are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LegendreUniform,
}

#[derive(Debug, Clone)]
pub struct GpcBasis {
    order: usize,
    support: (f64, f64),
    family: Family,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `psi[k * terms + h] = psi_h(z_k)`
    psi: Vec<f64>,
    /// `wpsi[k * terms + h] = w_k * psi_h(z_k)`
    wpsi: Vec<f64>,
}

impl GpcBasis {
    /// Builds the basis of degree `order` with `node_count` Gauss nodes.
    pub fn new(order: usize, support: (f64, f64), node_count: usize) -> Result<Self> {
        let (a, b) = support;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::Config(format!(
                "degenerate support [{a}, {b}] for the chaos basis"
            )));
        }
        if node_count < order + 1 {
            return Err(Error::Config(format!(
                "quadrature needs at least order+1 = {} nodes, got {node_count}",
                order + 1
            )));
        }

        let (ref_nodes, ref_weights) = gauss_legendre(node_count);
        let half = 0.5 * (b - a);
        let nodes: Vec<f64> = ref_nodes.iter().map(|s| a + half * (s + 1.0)).collect();
        let raw: Vec<f64> = ref_weights.iter().map(|w| 0.5 * w).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();

        let terms = order + 1;
        let mut psi = vec![0.0; node_count * terms];
        let mut wpsi = vec![0.0; node_count * terms];
        let mut row = vec![0.0; terms];
        for k in 0..node_count {
            legendre_orthonormal(order, to_reference(nodes[k], support), &mut row);
            for h in 0..terms {
                psi[k * terms + h] = row[h];
                wpsi[k * terms + h] = weights[k] * row[h];
            }
        }

        Ok(Self {
            order,
            support,
            family: Family::LegendreUniform,
            nodes,
            weights,
            psi,
            wpsi,
        })
    }

    /// Builds the basis with the default rule of `2 (order + 1)` nodes.
    pub fn with_default_nodes(order: usize, support: (f64, f64)) -> Result<Self> {
        Self::new(order, support, default_node_count(order))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of chaos coefficients, `order + 1`.
    pub fn terms(&self) -> usize {
        self.order + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Basis values `psi_h(z_k)` for all `h` at node `k`.
    #[inline]
    pub fn node_row(&self, k: usize) -> &[f64] {
        let t = self.terms();
        &self.psi[k * t..(k + 1) * t]
    }

    /// Projection weights `w_k psi_h(z_k)` for all `h` at node `k`.
    #[inline]
    pub fn projection_row(&self, k: usize) -> &[f64] {
        let t = self.terms();
        &self.wpsi[k * t..(k + 1) * t]
    }

    /// `psi_h(z)`.
    pub fn eval(&self, h: usize, z: f64) -> Result<f64> {
        if h > self.order {
            return Err(Error::Usage(format!(
                "basis index {h} exceeds order {}",
                self.order
            )));
        }
        let mut row = vec![0.0; h + 1];
        legendre_orthonormal(h, to_reference(z, self.support), &mut row);
        Ok(row[h])
    }

    /// Fills `out[h] = psi_h(z)` for `h = 0..=order`.
    pub fn eval_all(&self, z: f64, out: &mut [f64]) {
        legendre_orthonormal(self.order, to_reference(z, self.support), out);
    }

    /// Value of the expansion with coefficients `coeffs` at an arbitrary `z`.
    pub fn eval_expansion(&self, coeffs: &[f64], z: f64) -> f64 {
        let mut row = vec![0.0; self.terms()];
        self.eval_all(z, &mut row);
        dot(coeffs, &row)
    }

    /// Evaluates a coefficient slice at every node into `out` (length `K`).
    #[inline]
    pub fn eval_nodes_into(&self, coeffs: &[f64], out: &mut [f64]) {
        let t = self.terms();
        for (k, o) in out.iter_mut().enumerate() {
            *o = dot(coeffs, &self.psi[k * t..(k + 1) * t]);
        }
    }

    /// Projects node values onto the basis into `out` (length `M+1`).
    #[inline]
    pub fn project_into(&self, values: &[f64], out: &mut [f64]) {
        let t = self.terms();
        out.iter_mut().for_each(|c| *c = 0.0);
        for (k, &val) in values.iter().enumerate() {
            let row = &self.wpsi[k * t..(k + 1) * t];
            for (c, &wp) in out.iter_mut().zip(row) {
                *c += wp * val;
            }
        }
    }

    pub fn eval_at_nodes(&self, vec: &ChaosVector) -> Result<Vec<f64>> {
        if vec.coeffs.len() != self.terms() {
            return Err(Error::Usage(format!(
                "chaos vector has {} coefficients, basis expects {}",
                vec.coeffs.len(),
                self.terms()
            )));
        }
        let mut out = vec![0.0; self.node_count()];
        self.eval_nodes_into(&vec.coeffs, &mut out);
        Ok(out)
    }

    pub fn project(&self, node_values: &[f64]) -> Result<ChaosVector> {
        if node_values.len() != self.node_count() {
            return Err(Error::Usage(format!(
                "{} node values supplied for a {}-node rule",
                node_values.len(),
                self.node_count()
            )));
        }
        let mut coeffs = vec![0.0; self.terms()];
        self.project_into(node_values, &mut coeffs);
        Ok(ChaosVector { coeffs })
    }

    /// Quadrature expectation `sum_k w_k f_k` of node values.
    pub fn expectation(&self, node_values: &[f64]) -> f64 {
        dot(&self.weights, node_values)
    }

    /// Quadrature mean and variance of node values; the variance is
    /// accumulated as a sum of weighted squared deviations.
    pub fn node_mean_variance(&self, node_values: &[f64]) -> (f64, f64) {
        let mean = self.expectation(node_values);
        let var = self
            .weights
            .iter()
            .zip(node_values)
            .map(|(w, f)| w * (f - mean) * (f - mean))
            .sum();
        (mean, var)
    }
}

/// Default quadrature size for a basis of degree `order`.
pub fn default_node_count(order: usize) -> usize {
    2 * (order + 1)
}

/// Coefficients of a single chaos-expanded scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosVector {
    pub coeffs: Vec<f64>,
}

impl ChaosVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// A z-independent value `c` in a basis with `terms` coefficients.
    pub fn constant(c: f64, terms: usize) -> Self {
        let mut coeffs = vec![0.0; terms];
        coeffs[0] = c;
        Self { coeffs }
    }

    pub fn mean_variance(&self) -> (f64, f64) {
        mean_variance(&self.coeffs)
    }
}

/// Mean and variance over `z` read off the coefficients of an orthonormal expansion.
pub fn mean_variance(coeffs: &[f64]) -> (f64, f64) {
    let mean = coeffs.first().copied().unwrap_or(0.0);
    let var = coeffs.iter().skip(1).map(|c| c * c).sum();
    (mean, var)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
fn to_reference(z: f64, (a, b): (f64, f64)) -> f64 {
    (2.0 * z - a - b) / (b - a)
}

/// `out[h] = sqrt(2h+1) P_h(s)` for `h = 0..=order`, by the three-term recurrence.
fn legendre_orthonormal(order: usize, s: f64, out: &mut [f64]) {
    let mut p_prev = 1.0;
    out[0] = 1.0;
    if order == 0 {
        return;
    }
    let mut p = s;
    out[1] = 3f64.sqrt() * p;
    for n in 1..order {
        let nf = n as f64;
        let p_next = ((2.0 * nf + 1.0) * s * p - nf * p_prev) / (nf + 1.0);
        p_prev = p;
        p = p_next;
        out[n + 1] = (2.0 * (nf + 1.0) + 1.0).sqrt() * p;
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            let dp = nf * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        let dp = nf * (x * p - p_prev) / (x * x - 1.0);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `(P_n(x), P_{n-1}(x))`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gram-Schmidt on monomials under the uniform density on [0, 1], using
    /// exact moments E[z^n] = 1/(n+1). Returns monomial coefficients of each
    /// orthonormal polynomial.
    fn gram_schmidt_oracle(order: usize) -> Vec<Vec<f64>> {
        let inner = |p: &[f64], q: &[f64]| -> f64 {
            let mut s = 0.0;
            for (i, a) in p.iter().enumerate() {
                for (j, b) in q.iter().enumerate() {
                    s += a * b / (i + j + 1) as f64;
                }
            }
            s
        };
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for n in 0..=order {
            let mut p = vec![0.0; order + 1];
            p[n] = 1.0;
            for q in &basis {
                let c = inner(&p, q);
                for (pi, qi) in p.iter_mut().zip(q) {
                    *pi -= c * qi;
                }
            }
            let norm = inner(&p, &p).sqrt();
            p.iter_mut().for_each(|c| *c /= norm);
            basis.push(p);
        }
        basis
    }

    fn horner(p: &[f64], z: f64) -> f64 {
        p.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    #[test]
    fn constant_basis_midpoint_rule() {
        let b = GpcBasis::new(0, (0.0, 1.0), 1).unwrap();
        assert_eq!(b.nodes(), &[0.5]);
        assert_eq!(b.weights(), &[1.0]);
        assert_eq!(b.eval(0, 0.123).unwrap(), 1.0);
        assert_eq!(b.node_row(0), &[1.0]);
        assert_eq!(b.projection_row(0), &[1.0]);
    }

    #[test]
    fn second_order_values_match_gram_schmidt() {
        let b = GpcBasis::new(2, (0.0, 1.0), 4).unwrap();
        let oracle = gram_schmidt_oracle(2);
        // Gram-Schmidt fixes signs by a positive leading coefficient, as does Legendre.
        for z in [0.0, 0.13, 0.5, 0.77, 1.0] {
            for h in 0..=2 {
                let got = b.eval(h, z).unwrap();
                assert!((got - horner(&oracle[h], z)).abs() < 1e-12, "h={h} z={z}");
            }
        }
        assert!((b.eval(1, 1.0).unwrap() - 1.732_050_807_568_877_2).abs() < 1e-12);
        assert!((b.eval(2, 0.5).unwrap() + 1.118_033_988_749_895).abs() < 1e-12);
        assert!((b.eval(2, 1.0).unwrap() - 2.236_067_977_499_79).abs() < 1e-12);
        assert_eq!(b.eval(1, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn two_point_rule_closed_form() {
        let b = GpcBasis::new(1, (0.0, 1.0), 2).unwrap();
        let off = 0.5 / 3f64.sqrt();
        assert!((b.nodes()[0] - (0.5 - off)).abs() < 1e-15);
        assert!((b.nodes()[1] - (0.5 + off)).abs() < 1e-15);
        assert!((b.weights()[0] - 0.5).abs() < 1e-15);
        assert!((b.weights()[1] - 0.5).abs() < 1e-15);
        let z2: Vec<f64> = b.nodes().iter().map(|z| z * z).collect();
        assert!((b.expectation(&z2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(GpcBasis::new(3, (0.0, 1.0), 3), Err(Error::Config(_))));
        assert!(matches!(GpcBasis::new(1, (1.0, 1.0), 4), Err(Error::Config(_))));
        assert!(matches!(GpcBasis::new(1, (2.0, 1.0), 4), Err(Error::Config(_))));
        let b = GpcBasis::new(2, (0.0, 1.0), 6).unwrap();
        assert!(matches!(b.eval(3, 0.5), Err(Error::Usage(_))));
        assert!(matches!(b.project(&[1.0; 5]), Err(Error::Usage(_))));
        assert!(matches!(
            b.eval_at_nodes(&ChaosVector::new(vec![1.0, 2.0])),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn weights_sum_to_one_and_gram_is_identity() {
        for (m, k) in [(0, 1), (1, 2), (3, 8), (5, 12), (8, 9), (12, 26), (30, 62)] {
            let b = GpcBasis::new(m, (0.0, 1.0), k).unwrap();
            let s: f64 = b.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            assert!(b.weights().iter().all(|&w| w > 0.0));
            for h in 0..=m {
                for l in 0..=m {
                    let g: f64 = (0..k)
                        .map(|q| b.weights()[q] * b.node_row(q)[h] * b.node_row(q)[l])
                        .sum();
                    let want = if h == l { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-10, "M={m} K={k} ({h},{l}) -> {g}");
                }
            }
        }
    }

    #[test]
    fn quadrature_exact_to_degree_2k_minus_1() {
        for k in 1..=20 {
            let b = GpcBasis::new(0, (0.0, 1.0), k).unwrap();
            for n in 0..2 * k {
                let vals: Vec<f64> = b.nodes().iter().map(|z| z.powi(n as i32)).collect();
                let exact = 1.0 / (n as f64 + 1.0);
                let rel = (b.expectation(&vals) - exact).abs() / exact;
                assert!(rel < 1e-12, "K={k} degree {n}: rel {rel}");
            }
        }
    }

    #[test]
    fn shifted_support_maps_nodes() {
        let b = GpcBasis::new(2, (-1.0, 3.0), 6).unwrap();
        assert!(b.nodes().iter().all(|&z| z > -1.0 && z < 3.0));
        // E[z] = 1 and E[z^2] = (27 + 1) / 12 for z ~ U(-1, 3)
        let z1: Vec<f64> = b.nodes().to_vec();
        let z2: Vec<f64> = b.nodes().iter().map(|z| z * z).collect();
        assert!((b.expectation(&z1) - 1.0).abs() < 1e-14);
        assert!((b.expectation(&z2) - 28.0 / 12.0).abs() < 1e-13);
    }

    #[test]
    fn evaluation_and_projection_examples() {
        let b = GpcBasis::new(3, (0.0, 1.0), 8).unwrap();
        let c = b.eval_at_nodes(&ChaosVector::constant(2.5, 4)).unwrap();
        assert!(c.iter().all(|&v| v == 2.5));

        let lin = b
            .eval_at_nodes(&ChaosVector::new(vec![0.0, 1.0, 0.0, 0.0]))
            .unwrap();
        for (v, z) in lin.iter().zip(b.nodes()) {
            assert!((v - 3f64.sqrt() * (2.0 * z - 1.0)).abs() < 1e-14);
        }

        let p = b.project(&[4.0; 8]).unwrap();
        assert!((p.coeffs[0] - 4.0).abs() < 1e-14);
        assert!(p.coeffs[1..].iter().all(|c| c.abs() < 1e-14));

        let psi1: Vec<f64> = (0..8).map(|k| b.node_row(k)[1]).collect();
        let p1 = b.project(&psi1).unwrap();
        for (h, c) in p1.coeffs.iter().enumerate() {
            let want = if h == 1 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_of_z_squared_matches_symbolic_expansion() {
        // z^2 = 1/3 + (1/(2 sqrt 3)) psi_1 + (1/(6 sqrt 5)) psi_2 on [0, 1]
        let b = GpcBasis::new(2, (0.0, 1.0), 4).unwrap();
        let z2: Vec<f64> = b.nodes().iter().map(|z| z * z).collect();
        let c = b.project(&z2).unwrap().coeffs;
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((c[1] - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-14);
        assert!((c[2] - 1.0 / (6.0 * 5f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn mean_variance_examples() {
        assert_eq!(mean_variance(&[5.0, 0.0, 0.0]), (5.0, 0.0));
        assert_eq!(mean_variance(&[0.0, 1.0, 0.0]), (0.0, 1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn projection_round_trip(coeffs in proptest::collection::vec(-10.0f64..10.0, 1..10),
                                     extra in 0usize..8) {
                let m = coeffs.len() - 1;
                let b = GpcBasis::new(m, (0.0, 1.0), m + 1 + extra).unwrap();
                let v = ChaosVector::new(coeffs.clone());
                let back = b.project(&b.eval_at_nodes(&v).unwrap()).unwrap();
                for (x, y) in back.coeffs.iter().zip(&coeffs) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }

            #[test]
            fn variance_matches_quadrature(coeffs in proptest::collection::vec(-3.0f64..3.0, 1..9),
                                           extra in 0usize..6) {
                let m = coeffs.len() - 1;
                let b = GpcBasis::new(m, (0.0, 1.0), m + 1 + extra).unwrap();
                let nodes = b.eval_at_nodes(&ChaosVector::new(coeffs.clone())).unwrap();
                let (qm, qv) = b.node_mean_variance(&nodes);
                let (cm, cv) = mean_variance(&coeffs);
                prop_assert!((qm - cm).abs() < 1e-10);
                prop_assert!((qv - cv).abs() < 1e-10);
            }
        }
    }
}
