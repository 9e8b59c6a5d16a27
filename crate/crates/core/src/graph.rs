//! Gaussian processes on directed acyclic graphs.
//!
//! The joint density factorizes as a product of univariate conditionals
//! `p(f_j | f_{P_j})`, where `P_j` are the graph predecessors of node `j`. With
//! complete predecessor sets the factorization is exact; keeping only the `q`
//! nearest predecessors gives the usual nearest-neighbor approximation at
//! `O(n q^3)` cost.
//!
//! Node order is the input order and is never changed here. The quality of a
//! nearest-neighbor graph depends on that order; see [`lexicographic_order`].

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dense::{factorize_with_jitter, DEFAULT_JITTER, HALF_LN_2PI};
use crate::error::{ensure_finite, ensure_len, invalid, GpError, Result};
use crate::kernels::{Kernel, KernelFamily};

/// Edges as parallel rows of 1-based node labels: `parents[i] -> children[i]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    pub parents: Vec<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    parent: usize,
    child: usize,
}

impl EdgeList {
    pub fn new(parents: Vec<usize>, children: Vec<usize>) -> Result<Self> {
        if parents.len() != children.len() {
            return Err(GpError::Graph(format!(
                "edge rows differ in length: {} parents, {} children",
                parents.len(),
                children.len()
            )));
        }
        Ok(Self { parents, children })
    }

    /// Edge list from 0-based predecessor lists.
    pub fn from_predecessors(predecessors: &[Vec<usize>]) -> Self {
        let mut edges = Self::default();
        for (j, preds) in predecessors.iter().enumerate() {
            for &p in preds {
                edges.parents.push(p + 1);
                edges.children.push(j + 1);
            }
        }
        edges
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Reads the two-column `parent,child` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["parent", "child"] {
            return Err(invalid(format!(
                "edge list header must be \"parent,child\", got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut edges = Self::default();
        for record in rdr.deserialize() {
            let EdgeRecord { parent, child } = record?;
            edges.parents.push(parent);
            edges.children.push(child);
        }
        Ok(edges)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["parent", "child"])?;
        for (&parent, &child) in self.parents.iter().zip(&self.children) {
            wtr.write_record([parent.to_string(), child.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Converts an edge list into 0-based predecessor lists, keeping input order.
pub fn parse_edge_list(raw: &EdgeList, n: usize) -> Result<Vec<Vec<usize>>> {
    if raw.parents.len() != raw.children.len() {
        return Err(GpError::Graph("edge rows differ in length".into()));
    }
    let mut preds = vec![Vec::new(); n];
    for (i, (&parent, &child)) in raw.parents.iter().zip(&raw.children).enumerate() {
        let edge = format!("edge {} ({parent} -> {child})", i + 1);
        if parent == 0 || child == 0 || parent > n || child > n {
            return Err(GpError::Graph(format!("{edge}: labels must lie in 1..={n}")));
        }
        if parent == child {
            return Err(GpError::Graph(format!("{edge}: self-edge")));
        }
        if parent > child {
            return Err(GpError::Graph(format!(
                "{edge}: predecessor label exceeds successor label"
            )));
        }
        let list: &mut Vec<usize> = &mut preds[child - 1];
        if list.contains(&(parent - 1)) {
            return Err(GpError::Graph(format!("{edge}: duplicate edge")));
        }
        list.push(parent - 1);
    }
    Ok(preds)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Connects every node to at most `q` of its nearest predecessors in input order.
///
/// Distances are Euclidean; ties go to the lower index. Within each node the
/// predecessors are listed nearest first.
pub fn nearest_neighbor_graph(locations: &[Vec<f64>], q: usize) -> Result<EdgeList> {
    if locations.is_empty() {
        return Err(invalid("at least one location is required"));
    }
    check_locations(locations)?;
    let mut edges = EdgeList::default();
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for j in 1..locations.len() {
        let k = q.min(j);
        if k == 0 {
            continue;
        }
        candidates.clear();
        candidates.extend((0..j).map(|i| (squared_distance(&locations[i], &locations[j]), i)));
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < j {
            candidates.select_nth_unstable_by(k - 1, by_distance);
        }
        let nearest = &mut candidates[..k];
        nearest.sort_by(by_distance);
        for &(_, i) in nearest.iter() {
            edges.parents.push(i + 1);
            edges.children.push(j + 1);
        }
    }
    Ok(edges)
}

/// Permutation that sorts locations lexicographically by coordinate.
///
/// Never applied implicitly; reorder locations and data with it before building a
/// graph if a coordinate-sorted order is wanted.
pub fn lexicographic_order(locations: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..locations.len()).collect();
    order.sort_by(|&a, &b| {
        locations[a]
            .iter()
            .zip(&locations[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn check_locations(locations: &[Vec<f64>]) -> Result<()> {
    let p = locations[0].len();
    for (i, x) in locations.iter().enumerate() {
        if x.len() != p {
            return Err(invalid(format!("location {i} has dimension {} instead of {p}", x.len())));
        }
        ensure_finite(x, "location")?;
    }
    Ok(())
}

/// GP whose joint density factorizes along a DAG over its nodes.
#[derive(Debug, Clone)]
pub struct DagGp {
    locations: Vec<Vec<f64>>,
    predecessors: Vec<Vec<usize>>,
    kernel: Kernel,
}

impl DagGp {
    /// `predecessors` are 0-based and must point to earlier nodes only.
    pub fn new(locations: Vec<Vec<f64>>, predecessors: Vec<Vec<usize>>, kernel: Kernel) -> Result<Self> {
        if locations.is_empty() {
            return Err(invalid("at least one node is required"));
        }
        check_locations(&locations)?;
        if predecessors.len() != locations.len() {
            return Err(invalid(format!(
                "{} predecessor lists for {} nodes",
                predecessors.len(),
                locations.len()
            )));
        }
        for (j, preds) in predecessors.iter().enumerate() {
            for (a, &p) in preds.iter().enumerate() {
                if p >= j {
                    return Err(GpError::Graph(format!(
                        "node {} lists predecessor {} which does not precede it",
                        j + 1,
                        p + 1
                    )));
                }
                if preds[..a].contains(&p) {
                    return Err(GpError::Graph(format!("node {} lists predecessor {} twice", j + 1, p + 1)));
                }
            }
        }
        match kernel.family() {
            KernelFamily::SquaredExponential => {}
            KernelFamily::Matern { nu } if (nu - 1.5).abs() < 1e-12 || (nu - 2.5).abs() < 1e-12 => {}
            KernelFamily::Matern { nu } => {
                return Err(GpError::UnsupportedParameter(format!(
                    "graph GPs support squared exponential and Matern 3/2 or 5/2 kernels, got nu = {nu}"
                )))
            }
        }
        Ok(Self {
            locations,
            predecessors,
            kernel,
        })
    }

    pub fn from_edges(locations: Vec<Vec<f64>>, edges: &EdgeList, kernel: Kernel) -> Result<Self> {
        let preds = parse_edge_list(edges, locations.len())?;
        Self::new(locations, preds, kernel)
    }

    /// Graph in which every node depends on all earlier nodes; exact for any order.
    pub fn complete(locations: Vec<Vec<f64>>, kernel: Kernel) -> Result<Self> {
        let preds = (0..locations.len()).map(|j| (0..j).collect()).collect();
        Self::new(locations, preds, kernel)
    }

    pub fn nearest_neighbors(locations: Vec<Vec<f64>>, q: usize, kernel: Kernel) -> Result<Self> {
        let edges = nearest_neighbor_graph(&locations, q)?;
        Self::from_edges(locations, &edges, kernel)
    }

    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn predecessors(&self) -> &[Vec<usize>] {
        &self.predecessors
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Largest predecessor set size.
    pub fn max_in_degree(&self) -> usize {
        self.predecessors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edges(&self) -> EdgeList {
        EdgeList::from_predecessors(&self.predecessors)
    }

    /// Regression weights and conditional standard deviations of every node.
    ///
    /// The diagonal jitter follows the dense policy so that complete graphs
    /// reproduce the dense density.
    pub fn conditionals(&self) -> Result<GraphConditionals> {
        let var = self.kernel.variance();
        let base_jitter = DEFAULT_JITTER * var;
        let n = self.n();
        let mut weights = Vec::with_capacity(n);
        let mut sds = Vec::with_capacity(n);
        for (j, preds) in self.predecessors.iter().enumerate() {
            let xj = &self.locations[j];
            if preds.is_empty() {
                weights.push(Vec::new());
                sds.push((var + base_jitter).sqrt());
                continue;
            }
            let m = preds.len();
            let kpp = DMatrix::from_fn(m, m, |a, b| {
                if a == b {
                    var
                } else {
                    self.kernel.cov(&self.locations[preds[a]], &self.locations[preds[b]])
                }
            });
            let kp = DVector::from_iterator(m, preds.iter().map(|&p| self.kernel.cov(&self.locations[p], xj)));
            let (l, jitter) = factorize_with_jitter(&kpp, var).ok_or(GpError::Factorization {
                node: Some(j),
                jitter: crate::dense::MAX_JITTER * var,
            })?;
            let mut w = kp.clone();
            l.solve_lower_triangular_mut(&mut w);
            let explained = w.norm_squared();
            l.tr_solve_lower_triangular_mut(&mut w);
            let v = var + jitter - explained;
            if !(v > 0.0) {
                return Err(GpError::Factorization { node: Some(j), jitter });
            }
            weights.push(w.data.into());
            sds.push(v.sqrt());
        }
        Ok(GraphConditionals {
            predecessors: self.predecessors.clone(),
            weights,
            sds,
        })
    }
}

/// Precomputed per-node conditionals `f_j | f_P ~ N(mu_j + w_j . (f_P - mu_P), sd_j^2)`.
#[derive(Debug, Clone)]
pub struct GraphConditionals {
    predecessors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
    sds: Vec<f64>,
}

impl GraphConditionals {
    pub fn n(&self) -> usize {
        self.sds.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Conditional standard deviations.
    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    fn check(&self, v: &[f64], loc: &[f64], what: &str) -> Result<()> {
        ensure_len(v, self.n(), what)?;
        ensure_len(loc, self.n(), "loc")?;
        ensure_finite(v, what)?;
        ensure_finite(loc, "loc")
    }

    fn conditional_mean(&self, j: usize, f: &[f64], loc: &[f64]) -> f64 {
        let mut m = loc[j];
        for (&p, &w) in self.predecessors[j].iter().zip(&self.weights[j]) {
            m += w * (f[p] - loc[p]);
        }
        m
    }

    pub fn whiten(&self, f: &[f64], loc: &[f64]) -> Result<Vec<f64>> {
        self.check(f, loc, "f")?;
        Ok(self.whiten_unchecked(f, loc))
    }

    fn whiten_unchecked(&self, f: &[f64], loc: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|j| (f[j] - self.conditional_mean(j, f, loc)) / self.sds[j])
            .collect()
    }

    /// Sum of `log sd_j`, the log Jacobian of the whitening map.
    pub fn log_det_sd(&self) -> f64 {
        self.sds.iter().map(|s| s.ln()).sum()
    }

    pub fn lpdf(&self, f: &[f64], loc: &[f64]) -> Result<f64> {
        let z = self.whiten(f, loc)?;
        Ok(crate::dense::std_normal_lpdf(&z) - self.log_det_sd())
    }

    pub fn lpdf_grad(&self, f: &[f64], loc: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z = self.whiten(f, loc)?;
        let lp = -(self.n() as f64) * HALF_LN_2PI - 0.5 * z.iter().map(|v| v * v).sum::<f64>() - self.log_det_sd();
        let a: Vec<f64> = z.iter().zip(&self.sds).map(|(r, s)| r / s).collect();
        let mut grad: Vec<f64> = a.iter().map(|v| -v).collect();
        for j in 0..self.n() {
            for (&p, &w) in self.predecessors[j].iter().zip(&self.weights[j]) {
                grad[p] += w * a[j];
            }
        }
        Ok((lp, grad))
    }

    /// Sequential conditioning: `f_j = m_j(f_P) + sd_j z_j`.
    pub fn inv_transform(&self, z: &[f64], loc: &[f64]) -> Result<Vec<f64>> {
        self.check(z, loc, "z")?;
        let mut f = vec![0.0; self.n()];
        for j in 0..self.n() {
            f[j] = self.conditional_mean(j, &f, loc) + self.sds[j] * z[j];
        }
        Ok(f)
    }

    /// Pulls a gradient with respect to `f` back through [`Self::inv_transform`].
    pub fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        ensure_len(g, self.n(), "cotangent")?;
        let mut u = g.to_vec();
        for j in (0..self.n()).rev() {
            let uj = u[j];
            for (&p, &w) in self.predecessors[j].iter().zip(&self.weights[j]) {
                u[p] += w * uj;
            }
        }
        Ok(u.iter().zip(&self.sds).map(|(a, s)| a * s).collect())
    }
}

pub fn graph_lpdf(f: &[f64], loc: &[f64], dag: &DagGp) -> Result<f64> {
    dag.conditionals()?.lpdf(f, loc)
}

pub fn graph_lpdf_grad_f(f: &[f64], loc: &[f64], dag: &DagGp) -> Result<Vec<f64>> {
    dag.conditionals()?.lpdf_grad(f, loc).map(|(_, g)| g)
}

pub fn graph_inv_transform(z: &[f64], loc: &[f64], dag: &DagGp) -> Result<Vec<f64>> {
    dag.conditionals()?.inv_transform(z, loc)
}

pub fn graph_whiten(f: &[f64], loc: &[f64], dag: &DagGp) -> Result<Vec<f64>> {
    dag.conditionals()?.whiten(f, loc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::CholeskyGp;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64]).collect()
    }

    #[test]
    fn parses_line_graph() {
        let edges = EdgeList::new(vec![1, 2, 3], vec![2, 3, 4]).unwrap();
        let preds = parse_edge_list(&edges, 4).unwrap();
        assert_eq!(preds, vec![vec![], vec![0], vec![1], vec![2]]);
        assert_eq!(parse_edge_list(&EdgeList::default(), 3).unwrap(), vec![Vec::<usize>::new(); 3]);
    }

    #[test]
    fn rejects_bad_edges() {
        let cases = [
            (vec![2], vec![1], "exceeds"),
            (vec![1], vec![1], "self-edge"),
            (vec![0], vec![1], "1..="),
            (vec![1], vec![5], "1..="),
            (vec![1, 1], vec![2, 2], "duplicate"),
        ];
        for (p, c, msg) in cases {
            let err = parse_edge_list(&EdgeList::new(p, c).unwrap(), 4).unwrap_err().to_string();
            assert!(err.contains(msg), "{err}");
            assert!(err.contains("edge"), "{err}");
        }
        assert!(EdgeList::new(vec![1], vec![]).is_err());
    }

    #[test]
    fn dag_gp_validates_predecessors() {
        let k = Kernel::squared_exponential(1.0, 1.0).unwrap();
        assert!(DagGp::new(line(3), vec![vec![], vec![1], vec![]], k.clone()).is_err());
        assert!(DagGp::new(line(3), vec![vec![], vec![0], vec![0, 0]], k.clone()).is_err());
        assert!(DagGp::new(line(3), vec![vec![]; 2], k).is_err());
        let laplace = Kernel::matern(0.5, 1.0, 1.0).unwrap();
        assert!(DagGp::complete(line(3), laplace).is_err());
    }

    #[test]
    fn nearest_neighbor_examples() {
        let edges = nearest_neighbor_graph(&line(4), 1).unwrap();
        assert_eq!(edges, EdgeList::new(vec![1, 2, 3], vec![2, 3, 4]).unwrap());
        assert!(nearest_neighbor_graph(&line(4), 0).unwrap().is_empty());

        // Ties go to the lower index: node 3 at 1.0 is equidistant from 0.0 and 2.0.
        let pts = vec![vec![0.0], vec![2.0], vec![1.0]];
        let edges = nearest_neighbor_graph(&pts, 1).unwrap();
        assert_eq!(edges, EdgeList::new(vec![1, 1], vec![2, 3]).unwrap());
    }

    #[test]
    fn nearest_neighbors_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random(), rng.random()]).collect();
        let preds = parse_edge_list(&nearest_neighbor_graph(&pts, 3).unwrap(), 20).unwrap();
        for j in 0..20 {
            let mut all: Vec<(f64, usize)> = (0..j).map(|i| (squared_distance(&pts[i], &pts[j]), i)).collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all.iter().take(3).map(|x| x.1).collect();
            assert_eq!(preds[j], want, "node {j}");
        }
    }

    #[test]
    fn lexicographic_order_sorts() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(lexicographic_order(&pts), vec![2, 1, 0, 3]);
    }

    #[test]
    fn single_and_independent_nodes() {
        let k = Kernel::squared_exponential(1.0, 1.0).unwrap();
        let dag = DagGp::new(vec![vec![0.0]], vec![vec![]], k.clone()).unwrap();
        let want = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * 0.49;
        assert_relative_eq!(graph_lpdf(&[0.7], &[0.0], &dag).unwrap(), want, max_relative = 1e-7);

        let dag = DagGp::new(line(3), vec![vec![]; 3], k).unwrap();
        assert_relative_eq!(
            graph_lpdf(&[0.0; 3], &[0.0; 3], &dag).unwrap(),
            -1.5 * (2.0 * std::f64::consts::PI).ln(),
            max_relative = 1e-7
        );

        let k2 = Kernel::squared_exponential(2.0, 1.0).unwrap();
        let dag = DagGp::new(vec![vec![0.0]], vec![vec![]], k2).unwrap();
        let f = graph_inv_transform(&[1.5], &[0.0], &dag).unwrap();
        assert_relative_eq!(f[0], 3.0, max_relative = 1e-7);
    }

    #[test]
    fn zero_noise_gives_mean() {
        let k = Kernel::matern(2.5, 1.3, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random::<f64>() * 5.0]).collect();
        let loc: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let dag = DagGp::nearest_neighbors(pts, 3, k).unwrap();
        let f = graph_inv_transform(&[0.0; 10], &loc, &dag).unwrap();
        for (a, b) in f.iter().zip(&loc) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn complete_graph_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = Kernel::squared_exponential(1.2, 0.9).unwrap();
        let pts: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random::<f64>() * 4.0]).collect();
        let loc: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = CholeskyGp::from_kernel(&k, &pts, loc.clone()).unwrap();
        let dag = DagGp::complete(pts, k).unwrap();
        let z: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = dense.inv_transform(&z).unwrap();
        let (g, d) = (graph_lpdf(&f, &loc, &dag).unwrap(), dense.lpdf(&f).unwrap());
        assert!((g - d).abs() < 1e-8, "{g} vs {d}");
    }

    #[test]
    fn duplicate_locations_are_handled_by_jitter() {
        let k = Kernel::squared_exponential(1.0, 1.0).unwrap();
        let pts = vec![vec![0.0], vec![0.0], vec![1.0]];
        let dag = DagGp::complete(pts, k).unwrap();
        assert!(graph_lpdf(&[0.1, 0.1, 0.3], &[0.0; 3], &dag).unwrap().is_finite());
    }

    #[test]
    fn edge_csv_round_trip() {
        let edges = EdgeList::new(vec![1, 2, 3], vec![2, 3, 4]).unwrap();
        let mut buf = Vec::new();
        edges.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "parent,child\n1,2\n2,3\n3,4\n");
        assert_eq!(EdgeList::read_csv(buf.as_slice()).unwrap(), edges);
        assert!(EdgeList::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
