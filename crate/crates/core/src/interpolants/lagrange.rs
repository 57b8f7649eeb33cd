/// Lagrange polynomials on the equispaced nodes `l/k`, `l = 0..=k`.
///
/// Values use the second barycentric form; derivatives the product rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Lagrange1d {
    k: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(k: usize) -> Self {
        assert!((1..=10).contains(&k), "degree must be in 1..=10");
        let nodes: Vec<f64> = (0..=k).map(|l| l as f64 / k as f64).collect();
        let weights = (0..=k)
            .map(|j| {
                let prod: f64 = (0..=k).filter(|&m| m != j).map(|m| nodes[j] - nodes[m]).product();
                1.0 / prod
            })
            .collect();
        Self { k, nodes, weights }
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// All `k+1` basis values at `t`.
    pub fn values(&self, t: f64) -> Vec<f64> {
        if let Some(hit) = self.nodes.iter().position(|&x| x == t) {
            let mut out = vec![0.0; self.k + 1];
            out[hit] = 1.0;
            return out;
        }
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w / (t - x))
            .collect();
        let denom: f64 = terms.iter().sum();
        terms.into_iter().map(|v| v / denom).collect()
    }

    /// All `k+1` basis derivatives at `t`.
    pub fn derivatives(&self, t: f64) -> Vec<f64> {
        (0..=self.k)
            .map(|j| {
                (0..=self.k)
                    .filter(|&r| r != j)
                    .map(|r| {
                        let rest: f64 = (0..=self.k)
                            .filter(|&m| m != j && m != r)
                            .map(|m| (t - self.nodes[m]) / (self.nodes[j] - self.nodes[m]))
                            .product();
                        rest / (self.nodes[j] - self.nodes[r])
                    })
                    .sum()
            })
            .collect()
    }
}
