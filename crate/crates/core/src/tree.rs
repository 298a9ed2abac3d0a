//! Regular metric trees described by their generating sequences.
//!
//! A regular tree is fixed by the branching numbers `b_n` (edges leaving each
//! vertex of generation `n`, with `b_0 = 1` at the root) and the radii `ρ_n`
//! at which generation-`n` vertices sit. Everything the solvers need (the
//! branching function β, volumes, explicit expansions) derives from these two
//! sequences. Sequences are either a finite explicit prefix or the constant
//! `(b, r)` generator of a homogeneous tree; asking for an index beyond a
//! finite prefix is an error, never an extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of edges an explicit expansion may allocate.
pub const DEFAULT_EDGE_BUDGET: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
enum Generators {
    Homogeneous { b: u32, r: f64 },
    Prefix { b: Vec<u32>, rho: Vec<f64> },
}

/// A validated regular metric tree.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularTree {
    gens: Generators,
    h0: bool,
}

/// Serializable tree description.
///
/// Exactly one of `homogeneous` or the pair `b_seq`/`rho_seq` must be set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneous: Option<HomogeneousSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_seq: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_seq: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogeneousSpec {
    pub b: u32,
    pub r: f64,
}

impl TreeSpec {
    pub fn homogeneous(b: u32, r: f64) -> Self {
        TreeSpec {
            homogeneous: Some(HomogeneousSpec { b, r }),
            b_seq: None,
            rho_seq: None,
        }
    }

    pub fn build(&self) -> Result<RegularTree> {
        match (&self.homogeneous, &self.b_seq, &self.rho_seq) {
            (Some(h), None, None) => RegularTree::homogeneous(h.b, h.r),
            (None, Some(b), Some(rho)) => RegularTree::new(b.clone(), rho.clone()),
            (Some(_), _, _) => Err(Error::Config(
                "tree: `homogeneous` cannot be combined with `b_seq`/`rho_seq`".into(),
            )),
            (None, _, _) => Err(Error::Config(
                "tree: either `homogeneous` or both `b_seq` and `rho_seq` are required".into(),
            )),
        }
    }
}

impl RegularTree {
    /// Homogeneous tree with branching `b ≥ 2` and edge length `r > 0`.
    pub fn homogeneous(b: u32, r: f64) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidTree(format!(
                "branching number b = {b} must be ≥ 2"
            )));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidTree(format!(
                "edge length r = {r} must be positive"
            )));
        }
        Ok(RegularTree {
            gens: Generators::Homogeneous { b, r },
            h0: true,
        })
    }

    /// Tree from explicit prefixes `(b_0, b_1, …)` and `(ρ_0 = 0, ρ_1, …)`.
    pub fn new(b_seq: Vec<u32>, rho_seq: Vec<f64>) -> Result<Self> {
        match b_seq.first() {
            None => return Err(Error::InvalidTree("b_seq is empty".into())),
            Some(&b0) if b0 != 1 => {
                return Err(Error::InvalidTree(format!("b_0 must be 1, got {b0}")))
            }
            _ => {}
        }
        if let Some((n, &bn)) = b_seq.iter().enumerate().skip(1).find(|(_, &b)| b < 2) {
            return Err(Error::InvalidTree(format!("b_{n} = {bn} must be ≥ 2")));
        }
        if rho_seq.len() < 2 {
            return Err(Error::InvalidTree(
                "rho_seq needs at least ρ_0 and ρ_1".into(),
            ));
        }
        if rho_seq[0] != 0.0 {
            return Err(Error::InvalidTree(format!(
                "ρ_0 must be 0, got {}",
                rho_seq[0]
            )));
        }
        for n in 1..rho_seq.len() {
            if !(rho_seq[n].is_finite() && rho_seq[n] > rho_seq[n - 1]) {
                return Err(Error::InvalidTree(format!(
                    "rho_seq must be strictly increasing: ρ_{} = {} after ρ_{} = {}",
                    n,
                    rho_seq[n],
                    n - 1,
                    rho_seq[n - 1]
                )));
            }
        }
        let b_monotone = b_seq.windows(2).all(|w| w[0] <= w[1]);
        let gaps: Vec<f64> = rho_seq.windows(2).map(|w| w[1] - w[0]).collect();
        let gaps_monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
        Ok(RegularTree {
            gens: Generators::Prefix {
                b: b_seq,
                rho: rho_seq,
            },
            h0: b_monotone && gaps_monotone,
        })
    }

    pub fn to_spec(&self) -> TreeSpec {
        match &self.gens {
            Generators::Homogeneous { b, r } => TreeSpec::homogeneous(*b, *r),
            Generators::Prefix { b, rho } => TreeSpec {
                homogeneous: None,
                b_seq: Some(b.clone()),
                rho_seq: Some(rho.clone()),
            },
        }
    }

    /// `(b, r)` when the tree is homogeneous.
    pub fn homogeneous_params(&self) -> Option<(u32, f64)> {
        match self.gens {
            Generators::Homogeneous { b, r } => Some((b, r)),
            Generators::Prefix { .. } => None,
        }
    }

    /// H0-(ii): `b_n` nondecreasing and gaps `ρ_n − ρ_{n−1}` nonincreasing
    /// over the known prefix.
    pub fn h0(&self) -> bool {
        self.h0
    }

    /// Number of intervals `I_n = (ρ_{n−1}, ρ_n]` fully described, `None` if unbounded.
    pub fn intervals_available(&self) -> Option<usize> {
        match &self.gens {
            Generators::Homogeneous { .. } => None,
            Generators::Prefix { b, rho } => Some((rho.len() - 1).min(b.len())),
        }
    }

    fn exhausted(needed: usize, available: usize) -> Error {
        Error::PrefixExhausted { needed, available }
    }

    /// Branching number `b_n`.
    pub fn b(&self, n: usize) -> Result<u32> {
        match &self.gens {
            Generators::Homogeneous { b, .. } => Ok(if n == 0 { 1 } else { *b }),
            Generators::Prefix { b, .. } => b
                .get(n)
                .copied()
                .ok_or_else(|| Self::exhausted(n, b.len() - 1)),
        }
    }

    /// Radius `ρ_n` of generation-`n` vertices.
    pub fn rho(&self, n: usize) -> Result<f64> {
        match &self.gens {
            Generators::Homogeneous { r, .. } => Ok(n as f64 * r),
            Generators::Prefix { rho, .. } => rho
                .get(n)
                .copied()
                .ok_or_else(|| Self::exhausted(n, rho.len() - 1)),
        }
    }

    /// Edge length of generation `n`, `ρ_n − ρ_{n−1}` (`n ≥ 1`).
    pub fn gap(&self, n: usize) -> Result<f64> {
        assert!(n >= 1, "gap index starts at 1");
        match &self.gens {
            Generators::Homogeneous { r, .. } => Ok(*r),
            Generators::Prefix { .. } => Ok(self.rho(n)? - self.rho(n - 1)?),
        }
    }

    /// `A_n = b_0 b_1 ⋯ b_n`.
    pub fn product(&self, n: usize) -> Result<f64> {
        match &self.gens {
            Generators::Homogeneous { b, .. } => Ok((*b as f64).powi(n as i32)),
            Generators::Prefix { .. } => {
                let mut acc = 1.0;
                for k in 0..=n {
                    acc *= self.b(k)? as f64;
                }
                Ok(acc)
            }
        }
    }

    /// Value of β on the open interval `I_n`, i.e. `A_{n−1}`.
    pub fn beta_on_interval(&self, n: usize) -> Result<f64> {
        assert!(n >= 1, "interval index starts at 1");
        self.product(n - 1)
    }

    /// Index `n ≥ 1` with `ρ ∈ (ρ_{n−1}, ρ_n]`, for `ρ > 0`.
    pub fn interval_of(&self, rho: f64) -> Result<usize> {
        if !(rho > 0.0) {
            return Err(Error::OutOfRange(format!(
                "interval_of needs ρ > 0, got {rho}"
            )));
        }
        match &self.gens {
            Generators::Homogeneous { r, .. } => {
                let mut n = ((rho / r).ceil() as usize).max(1);
                while (n as f64) * r < rho {
                    n += 1;
                }
                while n > 1 && ((n - 1) as f64) * r >= rho {
                    n -= 1;
                }
                Ok(n)
            }
            Generators::Prefix { .. } => {
                let avail = self.intervals_available().unwrap_or(0);
                let last = self.rho(avail)?;
                if rho > last {
                    return Err(Self::exhausted(avail + 1, avail));
                }
                let Generators::Prefix { rho: seq, .. } = &self.gens else {
                    unreachable!()
                };
                Ok(seq[..=avail].partition_point(|&x| x < rho))
            }
        }
    }

    /// Branching function `β(ρ) = card{x : ρ(x) = ρ}`, left-continuous.
    ///
    /// Returned as `f64`: the count exceeds `u64` after ~64 generations of a
    /// binary tree but stays exact in floating point for power-of-two products.
    pub fn branching(&self, rho: f64) -> Result<f64> {
        if rho < 0.0 {
            return Err(Error::OutOfRange(format!("β needs ρ ≥ 0, got {rho}")));
        }
        if rho == 0.0 {
            return Ok(1.0);
        }
        let n = self.interval_of(rho)?;
        self.beta_on_interval(n)
    }

    /// Volume of the ball `B(O, R)`, `∫_0^R β dρ`, summed exactly interval by interval.
    pub fn volume(&self, radius: f64) -> Result<f64> {
        if radius < 0.0 {
            return Err(Error::OutOfRange(format!(
                "volume needs R ≥ 0, got {radius}"
            )));
        }
        let mut total = 0.0;
        let mut n = 1;
        loop {
            let lo = self.rho(n - 1)?;
            if lo >= radius {
                break;
            }
            if let Some(avail) = self.intervals_available() {
                if n > avail {
                    return Err(Self::exhausted(n, avail));
                }
            }
            let hi = self.rho(n)?.min(radius);
            total += self.beta_on_interval(n)? * (hi - lo);
            n += 1;
        }
        Ok(total)
    }

    /// Explicit rooted tree up to generation `generations`, numbered breadth-first.
    pub fn expand(&self, generations: usize, edge_budget: usize) -> Result<TreeExpansion> {
        if generations == 0 {
            return Err(Error::OutOfRange("expansion needs G ≥ 1".into()));
        }
        // need b_0..b_{G-1} and ρ_0..ρ_G
        self.rho(generations)?;
        self.b(generations - 1)?;
        let mut edge_count = 0.0;
        for g in 1..=generations {
            edge_count += self.product(g - 1)?;
        }
        if edge_count > edge_budget as f64 {
            return Err(Error::Budget(format!(
                "expansion to generation {generations} needs {edge_count} edges, budget is {edge_budget}"
            )));
        }
        let mut vertices = vec![Vertex {
            id: 0,
            generation: 0,
            rho: 0.0,
            parent_edge: None,
            child_edges: Vec::new(),
        }];
        let mut edges = Vec::with_capacity(edge_count as usize);
        let mut frontier = vec![0usize];
        for g in 0..generations {
            let children = self.b(g)? as usize;
            let rho_child = self.rho(g + 1)?;
            let length = self.gap(g + 1)?;
            let mut next = Vec::with_capacity(frontier.len() * children);
            for &parent in &frontier {
                for _ in 0..children {
                    let vid = vertices.len();
                    let eid = edges.len();
                    edges.push(Edge {
                        id: eid,
                        parent,
                        child: vid,
                        length,
                        generation: g + 1,
                    });
                    vertices.push(Vertex {
                        id: vid,
                        generation: g + 1,
                        rho: rho_child,
                        parent_edge: Some(eid),
                        child_edges: Vec::new(),
                    });
                    vertices[parent].child_edges.push(eid);
                    next.push(vid);
                }
            }
            frontier = next;
        }
        Ok(TreeExpansion {
            generations,
            vertices,
            edges,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Vertex {
    pub id: usize,
    pub generation: usize,
    pub rho: f64,
    pub parent_edge: Option<usize>,
    pub child_edges: Vec<usize>,
}

/// Edge oriented away from the root; `generation` is that of its child vertex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub id: usize,
    pub parent: usize,
    pub child: usize,
    pub length: f64,
    pub generation: usize,
}

/// Truncated explicit tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeExpansion {
    pub generations: usize,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl TreeExpansion {
    /// `d_v^+`: edges toward the root.
    pub fn in_degree(&self, v: usize) -> usize {
        usize::from(self.vertices[v].parent_edge.is_some())
    }

    /// `d_v^-`: edges away from the root.
    pub fn out_degree(&self, v: usize) -> usize {
        self.vertices[v].child_edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.in_degree(v) + self.out_degree(v)
    }
}
