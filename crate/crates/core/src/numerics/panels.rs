//! Cumulative integration on geometrically graded Gauss–Legendre panels.
//!
//! Used for the fixed-point (successive substitution) solves near `r = 0`,
//! where integrands behave like non-integer powers of `r`. Panels
//! `[r₁·2^{-(j+1)}, r₁·2^{-j}]` keep every power law smooth on each panel,
//! and the innermost sliver `[0, e₀]` is closed with a fitted power law.

/// Legendre polynomial `P_k(x)` and its derivative, by recurrence.
fn legendre(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let kf = k as f64;
    let dp = kf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes (increasing) and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(m, z);
        x[m - 1 - i] = z;
        w[m - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[derive(Debug, Clone)]
pub struct GradedPanels {
    edges: Vec<f64>,
    nodes: Vec<f64>,
    m: usize,
    weights: Vec<f64>,
    // partial[i][j] = ∫_{-1}^{ξ_i} L_j(ξ) dξ on the reference panel
    partial: Vec<Vec<f64>>,
}

impl GradedPanels {
    /// `levels` dyadic panels ending at `r1`, each carrying `m` nodes.
    pub fn new(r1: f64, levels: usize, m: usize) -> Self {
        let (xi, w) = gauss_legendre(m);
        let mut partial = vec![vec![0.0; m]; m];
        for (j, &xj) in xi.iter().enumerate() {
            // Lagrange basis L_j expanded in Legendre polynomials (exact by GL orthogonality)
            let coeffs: Vec<f64> = (0..m)
                .map(|k| w[j] * legendre(k, xj).0 * (2.0 * k as f64 + 1.0) / 2.0)
                .collect();
            for (i, &x) in xi.iter().enumerate() {
                let mut s = coeffs[0] * (x + 1.0);
                for (k, c) in coeffs.iter().enumerate().skip(1) {
                    let (pk1, _) = legendre(k + 1, x);
                    let (pkm1, _) = legendre(k - 1, x);
                    s += c * (pk1 - pkm1) / (2.0 * k as f64 + 1.0);
                }
                partial[i][j] = s;
            }
        }
        let edges: Vec<f64> = (0..=levels).map(|j| r1 * 0.5f64.powi((levels - j) as i32)).collect();
        let mut nodes = Vec::with_capacity(levels * m);
        for win in edges.windows(2) {
            let (a, b) = (win[0], win[1]);
            for &x in &xi {
                nodes.push(0.5 * (a + b) + 0.5 * (b - a) * x);
            }
        }
        Self {
            edges,
            nodes,
            m,
            weights: w,
            partial,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Panel edges, innermost first; the last edge is `r1`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.m
    }

    /// Cumulative integral `∫_0^x g` at every node and every edge, given `g`
    /// sampled at the nodes.
    pub fn cumulative(&self, g: &[f64]) -> Cumulative {
        assert_eq!(g.len(), self.nodes.len());
        let m = self.m;
        let mut at_nodes = vec![0.0; g.len()];
        let mut at_edges = vec![0.0; self.edges.len()];
        at_edges[0] = self.inner_sliver(g);
        for p in 0..self.panels() {
            let (a, b) = (self.edges[p], self.edges[p + 1]);
            let half = 0.5 * (b - a);
            let vals = &g[p * m..(p + 1) * m];
            for i in 0..m {
                let s: f64 = self.partial[i].iter().zip(vals).map(|(c, v)| c * v).sum();
                at_nodes[p * m + i] = at_edges[p] + half * s;
            }
            let full: f64 = self.weights.iter().zip(vals).map(|(w, v)| w * v).sum();
            at_edges[p + 1] = at_edges[p] + half * full;
        }
        Cumulative { at_nodes, at_edges }
    }

    // ∫_0^{e0} g, with g continued as a power law fitted on the first panel
    fn inner_sliver(&self, g: &[f64]) -> f64 {
        let m = self.m;
        let (xa, xb) = (self.nodes[0], self.nodes[m - 1]);
        let (ga, gb) = (g[0], g[m - 1]);
        let e0 = self.edges[0];
        if ga == 0.0 || gb == 0.0 || ga.signum() != gb.signum() {
            return 0.5 * e0 * ga;
        }
        let gamma = (gb / ga).ln() / (xb / xa).ln();
        if gamma <= -1.0 {
            // not integrable at 0 under the fit; the sliver is left out
            return 0.0;
        }
        ga * (e0 / xa).powf(gamma) * e0 / (gamma + 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct Cumulative {
    pub at_nodes: Vec<f64>,
    pub at_edges: Vec<f64>,
}

impl Cumulative {
    pub fn total(&self) -> f64 {
        *self.at_edges.last().unwrap()
    }
}
