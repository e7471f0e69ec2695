use nalgebra::DMatrix;

use super::sparse::CsrMatrix;
use super::NetError;

/// Weighted hypergraph. Every hyperedge is a non-empty vertex set with a
/// strictly positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    vertex_count: usize,
    edges: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    /// `|V| x |E|` membership matrix `H`.
    pub matrix: CsrMatrix,
    /// Weighted vertex degrees `d(v) = sum_e w(e) H(v, e)`.
    pub vertex_degrees: Vec<f64>,
    /// Edge cardinalities `delta(e) = sum_v H(v, e)`.
    pub edge_degrees: Vec<f64>,
}

/// Options for handling vertices with zero degree.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LaplacianOptions {
    /// When set, isolated vertices get this degree instead of an error.
    pub pseudo_degree: Option<f64>,
}

impl LaplacianOptions {
    pub const PSEUDO_DEGREE: f64 = 1e-12;

    pub fn with_pseudo_degree() -> Self {
        Self {
            pseudo_degree: Some(Self::PSEUDO_DEGREE),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypergraphLaplacian {
    /// `D_v^{-1/2} H W D_e^{-1} H^T D_v^{-1/2}`
    pub theta: CsrMatrix,
    /// `I - theta`
    pub delta: CsrMatrix,
    /// Degrees used for normalization (after pseudo-degree substitution).
    pub degrees: Vec<f64>,
}

impl Hypergraph {
    pub fn new(vertex_count: usize, edges: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self, NetError> {
        if edges.len() != weights.len() {
            return Err(NetError::DimensionMismatch {
                expected: edges.len(),
                got: weights.len(),
            });
        }
        for e in &edges {
            if e.is_empty() {
                return Err(NetError::EmptyHyperedge);
            }
            if let Some(&v) = e.iter().find(|&&v| v >= vertex_count) {
                return Err(NetError::NodeOutOfRange {
                    node: v,
                    count: vertex_count,
                });
            }
        }
        if let Some(&w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(NetError::InvalidWeight(w));
        }
        let edges = edges
            .into_iter()
            .map(|mut e| {
                e.sort_unstable();
                e.dedup();
                e
            })
            .collect();
        Ok(Self {
            vertex_count,
            edges,
            weights,
        })
    }

    pub fn unit(vertex_count: usize, edges: Vec<Vec<usize>>) -> Result<Self, NetError> {
        let w = vec![1.0; edges.len()];
        Self::new(vertex_count, edges, w)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn degrees_checked(&self, opts: LaplacianOptions) -> Result<Vec<f64>, NetError> {
        let inc = build_incidence(self);
        inc.vertex_degrees
            .iter()
            .enumerate()
            .map(|(v, &d)| {
                if d > 0.0 {
                    Ok(d)
                } else {
                    opts.pseudo_degree.ok_or(NetError::IsolatedVertex(v))
                }
            })
            .collect()
    }
}

pub fn build_incidence(h: &Hypergraph) -> Incidence {
    let mut t = Vec::new();
    let mut vertex_degrees = vec![0.0; h.vertex_count];
    let mut edge_degrees = Vec::with_capacity(h.edges.len());
    for (e, (members, &w)) in h.edges.iter().zip(&h.weights).enumerate() {
        for &v in members {
            t.push((v, e, 1.0));
            vertex_degrees[v] += w;
        }
        edge_degrees.push(members.len() as f64);
    }
    Incidence {
        matrix: CsrMatrix::from_triplets(h.vertex_count, h.edges.len(), &t),
        vertex_degrees,
        edge_degrees,
    }
}

pub fn hypergraph_laplacian(h: &Hypergraph, opts: LaplacianOptions) -> Result<HypergraphLaplacian, NetError> {
    let degrees = h.degrees_checked(opts)?;
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut t = Vec::new();
    for (members, &w) in h.edges.iter().zip(&h.weights) {
        let scale = w / members.len() as f64;
        for &u in members {
            for &v in members {
                t.push((u, v, scale * (inv_sqrt[u] * inv_sqrt[v])));
            }
        }
    }
    let n = h.vertex_count;
    let theta = CsrMatrix::from_triplets(n, n, &t);
    let mut dt: Vec<_> = theta.iter().map(|(r, c, v)| (r, c, -v)).collect();
    dt.extend((0..n).map(|i| (i, i, 1.0)));
    Ok(HypergraphLaplacian {
        theta,
        delta: CsrMatrix::from_triplets(n, n, &dt),
        degrees,
    })
}

/// Smoothness functional summed edge by edge over ordered vertex pairs:
/// `1/2 sum_e sum_{u,v in e} w(e)/delta(e) (f(u)/sqrt d(u) - f(v)/sqrt d(v))^2`.
pub fn regularizer_omega(h: &Hypergraph, f: &[f64], opts: LaplacianOptions) -> Result<f64, NetError> {
    if f.len() != h.vertex_count {
        return Err(NetError::DimensionMismatch {
            expected: h.vertex_count,
            got: f.len(),
        });
    }
    let degrees = h.degrees_checked(opts)?;
    let g: Vec<f64> = f.iter().zip(&degrees).map(|(x, d)| x / d.sqrt()).collect();
    let mut total = 0.0;
    for (members, &w) in h.edges.iter().zip(&h.weights) {
        let scale = w / members.len() as f64;
        for &u in members {
            for &v in members {
                let diff = g[u] - g[v];
                total += scale * diff * diff;
            }
        }
    }
    Ok(0.5 * total)
}

/// `f^T delta f`.
pub fn quadratic_form(delta: &CsrMatrix, f: &[f64]) -> f64 {
    delta.mul_vec(f).iter().zip(f).map(|(a, b)| a * b).sum()
}

/// Smallest eigenvalue of a symmetric matrix via dense decomposition.
pub fn min_eigenvalue(m: &CsrMatrix) -> f64 {
    let dense: DMatrix<f64> = m.to_dense();
    dense
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn incidence_of_two_edge_example() {
        let h = Hypergraph::unit(3, vec![vec![0, 1], vec![0, 1, 2]]).unwrap();
        let inc = build_incidence(&h);
        let dense = inc.matrix.to_dense();
        assert_eq!(dense, DMatrix::from_row_slice(3, 2, &[1., 1., 1., 1., 0., 1.]));
        assert_eq!(inc.vertex_degrees, vec![2.0, 2.0, 1.0]);
        assert_eq!(inc.edge_degrees, vec![2.0, 3.0]);
    }

    #[test]
    fn single_vertex_no_edges() {
        let h = Hypergraph::unit(1, vec![]).unwrap();
        let inc = build_incidence(&h);
        assert_eq!(inc.matrix.cols(), 0);
        assert_eq!(inc.matrix.rows(), 1);
        assert_eq!(inc.vertex_degrees, vec![0.0]);
    }

    #[test]
    fn empty_hyperedge_rejected() {
        assert_eq!(Hypergraph::unit(2, vec![vec![]]), Err(NetError::EmptyHyperedge));
    }

    #[test]
    fn pair_laplacian() {
        let h = Hypergraph::unit(2, vec![vec![0, 1]]).unwrap();
        let lap = hypergraph_laplacian(&h, LaplacianOptions::default()).unwrap();
        let t = lap.theta.to_dense();
        let d = lap.delta.to_dense();
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(t[(r, c)], 0.5, epsilon = 1e-15);
                let expect = if r == c { 0.5 } else { -0.5 };
                assert_abs_diff_eq!(d[(r, c)], expect, epsilon = 1e-15);
            }
        }
        let mut ev: Vec<f64> = d.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn omega_vanishes_on_sqrt_degree() {
        let h = Hypergraph::new(4, vec![vec![0, 1, 2], vec![2, 3]], vec![2.0, 0.5]).unwrap();
        let d = build_incidence(&h).vertex_degrees;
        let f: Vec<f64> = d.iter().map(|x| 3.7 * x.sqrt()).collect();
        let o = regularizer_omega(&h, &f, LaplacianOptions::default()).unwrap();
        assert_abs_diff_eq!(o, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn omega_single_edge_matches_quadratic_form() {
        let h = Hypergraph::unit(2, vec![vec![0, 1]]).unwrap();
        let lap = hypergraph_laplacian(&h, LaplacianOptions::default()).unwrap();
        let f = [1.0, 0.0];
        let o = regularizer_omega(&h, &f, LaplacianOptions::default()).unwrap();
        assert_abs_diff_eq!(o, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(quadratic_form(&lap.delta, &f), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn isolated_vertex_needs_pseudo_degree() {
        let h = Hypergraph::unit(3, vec![vec![0, 1]]).unwrap();
        assert_eq!(
            hypergraph_laplacian(&h, LaplacianOptions::default()).unwrap_err(),
            NetError::IsolatedVertex(2)
        );
        let lap = hypergraph_laplacian(&h, LaplacianOptions::with_pseudo_degree()).unwrap();
        assert_eq!(lap.delta.get(2, 2), 1.0);
        assert!(regularizer_omega(&h, &[1.0, 0.0, 0.0], LaplacianOptions::default()).is_err());
    }

    #[test]
    fn omega_dimension_mismatch() {
        let h = Hypergraph::unit(2, vec![vec![0, 1]]).unwrap();
        assert!(matches!(
            regularizer_omega(&h, &[1.0], LaplacianOptions::default()),
            Err(NetError::DimensionMismatch { .. })
        ));
    }
}
