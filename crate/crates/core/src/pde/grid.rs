//! Cell-centred finite-volume grids on the weighted half-line and on
//! explicitly expanded trees.
//!
//! Both grids are stored as a rooted tree of nodes: cells carry mass, and on
//! the full tree each interior vertex is an extra massless node whose value is
//! fixed algebraically by the Kirchhoff balance. On the half-line the node
//! tree is a path rooted at the cell touching the origin.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::tridiag::SymTridiag;
use crate::tree::{RegularTree, TreeExpansion};

pub(crate) const NO_PARENT: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    HalfLine,
    FullTree,
}

/// Condition imposed at the truncation radius.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    #[default]
    Dirichlet0,
    Neumann,
}

#[derive(Clone, Debug)]
pub struct Grid {
    mode: GridMode,
    bc: BoundaryCondition,
    cells_per_edge: usize,
    generations: usize,
    centers: Vec<f64>,
    widths: Vec<f64>,
    weights: Vec<f64>,
    mass: Vec<f64>,
    generation: Vec<usize>,
    radial_index: Vec<usize>,
    segments: Vec<Range<usize>>,
    breakpoints: Vec<f64>,
    domain_end: f64,
    // node tree: cells are nodes 0..n_cells, vertices follow
    parent: Vec<usize>,
    conductance: Vec<f64>,
    boundary: Vec<f64>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
}

fn check_cells_per_edge(cpe: usize) -> Result<()> {
    if cpe < 4 || !cpe.is_multiple_of(2) {
        return Err(Error::OutOfRange(format!(
            "cells_per_edge must be even and ≥ 4, got {cpe}"
        )));
    }
    Ok(())
}

fn bfs_order(children: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(children.len());
    order.push(root);
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        order.extend(children[v].iter().copied());
    }
    order
}

/// Radial grid on `(0, ρ_N)` with cell mass `β·Δρ`.
pub fn make_grid_half_line(
    tree: &RegularTree,
    generations: usize,
    cells_per_edge: usize,
    bc: BoundaryCondition,
) -> Result<Grid> {
    if generations == 0 {
        return Err(Error::OutOfRange("half-line grid needs N_gen ≥ 1".into()));
    }
    check_cells_per_edge(cells_per_edge)?;
    let n = generations * cells_per_edge;
    let mut centers = Vec::with_capacity(n);
    let mut widths = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut generation = Vec::with_capacity(n);
    let mut segments = Vec::with_capacity(generations);
    let mut breakpoints = Vec::with_capacity(generations);
    for g in 1..=generations {
        let lo = tree.rho(g - 1)?;
        let hi = tree.rho(g)?;
        let beta = tree.beta_on_interval(g)?;
        let h = (hi - lo) / cells_per_edge as f64;
        // conductances scale like β/h and must stay finite
        if !(beta / h < 1e300) {
            return Err(Error::OutOfRange(format!(
                "β = {beta:e} on generation {g} leaves floating-point range; use fewer generations"
            )));
        }
        let start = centers.len();
        for j in 0..cells_per_edge {
            centers.push(lo + (j as f64 + 0.5) * h);
            widths.push(h);
            weights.push(beta);
            generation.push(g);
        }
        segments.push(start..centers.len());
        breakpoints.push(hi);
    }
    let mass: Vec<f64> = weights.iter().zip(&widths).map(|(b, h)| b * h).collect();
    let mut parent = vec![NO_PARENT; n];
    let mut conductance = vec![0.0; n];
    for i in 1..n {
        parent[i] = i - 1;
        conductance[i] =
            1.0 / (0.5 * widths[i - 1] / weights[i - 1] + 0.5 * widths[i] / weights[i]);
    }
    let mut boundary = vec![0.0; n];
    if bc == BoundaryCondition::Dirichlet0 {
        boundary[n - 1] = weights[n - 1] / (0.5 * widths[n - 1]);
    }
    let mut children = vec![Vec::new(); n];
    for i in 1..n {
        children[i - 1].push(i);
    }
    let domain_end = *breakpoints.last().unwrap();
    breakpoints.pop();
    Ok(Grid {
        mode: GridMode::HalfLine,
        bc,
        cells_per_edge,
        generations,
        radial_index: (0..n).collect(),
        centers,
        widths,
        weights,
        mass,
        generation,
        segments,
        breakpoints,
        domain_end,
        parent,
        conductance,
        boundary,
        order: (0..n).collect(),
        children,
    })
}

/// Grid on every edge of an expanded tree, unit weights, Kirchhoff vertices.
pub fn make_grid_full_tree(
    expansion: &TreeExpansion,
    cells_per_edge: usize,
    bc: BoundaryCondition,
) -> Result<Grid> {
    check_cells_per_edge(cells_per_edge)?;
    let n_edges = expansion.edges.len();
    let n_cells = n_edges * cells_per_edge;
    let mut centers = Vec::with_capacity(n_cells);
    let mut widths = Vec::with_capacity(n_cells);
    let mut generation = Vec::with_capacity(n_cells);
    let mut radial_index = Vec::with_capacity(n_cells);
    let mut segments = Vec::with_capacity(n_edges);
    for edge in &expansion.edges {
        let lo = expansion.vertices[edge.parent].rho;
        let h = edge.length / cells_per_edge as f64;
        let start = centers.len();
        for j in 0..cells_per_edge {
            centers.push(lo + (j as f64 + 0.5) * h);
            widths.push(h);
            generation.push(edge.generation);
            radial_index.push((edge.generation - 1) * cells_per_edge + j);
        }
        segments.push(start..centers.len());
    }

    // vertex nodes for interior vertices (neither root nor truncation leaves)
    let mut vertex_node = vec![NO_PARENT; expansion.vertices.len()];
    let mut n_nodes = n_cells;
    for v in &expansion.vertices {
        if v.parent_edge.is_some() && !v.child_edges.is_empty() {
            vertex_node[v.id] = n_nodes;
            n_nodes += 1;
        }
    }
    let mut parent = vec![NO_PARENT; n_nodes];
    let mut conductance = vec![0.0; n_nodes];
    let mut boundary = vec![0.0; n_nodes];
    for edge in &expansion.edges {
        let cells = segments[edge.id].clone();
        let h = widths[cells.start];
        for i in cells.start + 1..cells.end {
            parent[i] = i - 1;
            conductance[i] = 1.0 / h;
        }
        let up = vertex_node[edge.parent];
        if up != NO_PARENT {
            parent[cells.start] = up;
            conductance[cells.start] = 2.0 / h;
        }
        let down = vertex_node[edge.child];
        if down != NO_PARENT {
            parent[down] = cells.end - 1;
            conductance[down] = 2.0 / h;
        } else if bc == BoundaryCondition::Dirichlet0 && edge.generation == expansion.generations {
            boundary[cells.end - 1] = 2.0 / h;
        }
    }
    let mut children = vec![Vec::new(); n_nodes];
    for (i, &p) in parent.iter().enumerate() {
        if p != NO_PARENT {
            children[p].push(i);
        }
    }
    let order = bfs_order(&children, 0);
    if order.len() != n_nodes {
        return Err(Error::Numerical("tree grid is not connected".into()));
    }
    let mut breakpoints: Vec<f64> = Vec::new();
    for g in 1..expansion.generations {
        if let Some(v) = expansion.vertices.iter().find(|v| v.generation == g) {
            breakpoints.push(v.rho);
        }
    }
    let domain_end = expansion.vertices.iter().map(|v| v.rho).fold(0.0, f64::max);
    Ok(Grid {
        mode: GridMode::FullTree,
        bc,
        cells_per_edge,
        generations: expansion.generations,
        weights: vec![1.0; n_cells],
        mass: widths.clone(),
        centers,
        widths,
        generation,
        radial_index,
        segments,
        breakpoints,
        domain_end,
        parent,
        conductance,
        boundary,
        children,
        order,
    })
}

impl Grid {
    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }

    pub fn cells_per_edge(&self) -> usize {
        self.cells_per_edge
    }

    pub fn generations(&self) -> usize {
        self.generations
    }

    /// Distance from the root of each cell centre.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// β on the half-line, 1 on the full tree.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn generation_of(&self, cell: usize) -> usize {
        self.generation[cell]
    }

    /// Index of the half-line cell at the same radial position.
    pub fn radial_index(&self, cell: usize) -> usize {
        self.radial_index[cell]
    }

    /// Cell ranges per interval (half-line) or per edge (full tree).
    pub fn segments(&self) -> &[Range<usize>] {
        &self.segments
    }

    /// Interior faces lying on `ρ_1, …, ρ_{N−1}`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub(crate) fn node_count(&self) -> usize {
        self.parent.len()
    }

    /// Half-line face transmissivity between cells `i` and `i + 1`.
    pub fn transmissivity(&self, i: usize) -> f64 {
        assert_eq!(self.mode, GridMode::HalfLine);
        self.conductance[i + 1]
    }

    /// Conductance from the last cell(s) to the zero boundary value.
    pub fn boundary_conductance(&self, cell: usize) -> f64 {
        self.boundary[cell]
    }

    /// Values at all nodes: cells as given, vertices from the Kirchhoff balance.
    fn node_values(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n_cells();
        let mut all = Vec::with_capacity(self.node_count());
        all.extend_from_slice(u);
        for v in n..self.node_count() {
            let mut num = self.conductance[v] * u[self.parent[v]];
            let mut den = self.conductance[v];
            for &c in &self.children[v] {
                num += self.conductance[c] * u[c];
                den += self.conductance[c];
            }
            all.push(num / den);
        }
        all
    }

    /// `K u`: integrated outflow from each cell (positive semidefinite stiffness).
    pub fn stiffness_apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n_cells());
        let vals = self.node_values(u);
        let n = self.n_cells();
        let mut out: Vec<f64> = (0..n).map(|i| self.boundary[i] * u[i]).collect();
        for node in 0..self.node_count() {
            let p = self.parent[node];
            if p == NO_PARENT {
                continue;
            }
            let flux = self.conductance[node] * (vals[node] - vals[p]);
            if node < n {
                out[node] += flux;
            }
            if p < n {
                out[p] -= flux;
            }
        }
        out
    }

    /// Discrete `(β z_ρ)_ρ` integrated over each cell, i.e. `−K u`.
    pub fn flux_divergence(&self, u: &[f64]) -> Vec<f64> {
        self.stiffness_apply(u).into_iter().map(|x| -x).collect()
    }

    /// Stiffness matrix of a half-line grid.
    pub fn stiffness_tridiag(&self) -> SymTridiag {
        assert_eq!(self.mode, GridMode::HalfLine);
        let n = self.n_cells();
        let mut diag = self.boundary[..n].to_vec();
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for i in 1..n {
            let c = self.conductance[i];
            diag[i - 1] += c;
            diag[i] += c;
            off.push(-c);
        }
        SymTridiag::new(diag, off)
    }

    /// Checks positivity of all couplings and masses (M-matrix structure of `M + sK`).
    pub fn check_m_matrix(&self) -> Result<()> {
        for node in 0..self.node_count() {
            if self.parent[node] != NO_PARENT && !(self.conductance[node] > 0.0) {
                return Err(Error::Numerical(format!(
                    "non-positive coupling at node {node}"
                )));
            }
            if !(self.boundary[node] >= 0.0) {
                return Err(Error::Numerical(format!(
                    "negative boundary coupling at {node}"
                )));
            }
        }
        if self.mass.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Numerical("non-positive cell mass".into()));
        }
        Ok(())
    }

    /// Sample a radial function at the cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.centers.iter().map(|&x| f(x)).collect()
    }

    /// `Σ m_i u_i`.
    pub fn weighted_mass(&self, u: &[f64]) -> f64 {
        self.mass.iter().zip(u).map(|(m, x)| m * x).sum()
    }

    /// `(Σ m_i u_i²)^{1/2}`.
    pub fn weighted_l2(&self, u: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(u)
            .map(|(m, x)| m * x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Factorized `M + s K` for repeated solves.
#[derive(Clone, Debug)]
pub(crate) enum ShiftedSystem {
    Path(SymTridiag),
    Tree { pivots: Vec<f64>, s: f64 },
}

impl ShiftedSystem {
    pub(crate) fn new(grid: &Grid, s: f64) -> Result<Self> {
        match grid.mode {
            GridMode::HalfLine => {
                let k = grid.stiffness_tridiag();
                let diag = k
                    .diag
                    .iter()
                    .zip(&grid.mass)
                    .map(|(d, m)| m + s * d)
                    .collect();
                let off = k.off.iter().map(|o| s * o).collect();
                Ok(ShiftedSystem::Path(SymTridiag::new(diag, off)))
            }
            GridMode::FullTree => {
                let n = grid.n_cells();
                let nodes = grid.node_count();
                let mut diag = vec![0.0; nodes];
                for i in 0..nodes {
                    let m = if i < n { grid.mass[i] } else { 0.0 };
                    diag[i] = m + s * grid.boundary[i];
                }
                for i in 0..nodes {
                    let p = grid.parent[i];
                    if p != NO_PARENT {
                        diag[i] += s * grid.conductance[i];
                        diag[p] += s * grid.conductance[i];
                    }
                }
                // leaf-to-root elimination
                for &i in grid.order.iter().rev() {
                    if !(diag[i] > 0.0) {
                        return Err(Error::Numerical(format!("non-positive pivot at node {i}")));
                    }
                    let p = grid.parent[i];
                    if p != NO_PARENT {
                        let a = s * grid.conductance[i];
                        diag[p] -= a * a / diag[i];
                    }
                }
                Ok(ShiftedSystem::Tree { pivots: diag, s })
            }
        }
    }

    pub(crate) fn solve(&self, grid: &Grid, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            ShiftedSystem::Path(a) => a.solve_shifted(0.0, rhs),
            ShiftedSystem::Tree { pivots, s } => {
                let n = grid.n_cells();
                let mut y = vec![0.0; grid.node_count()];
                y[..n].copy_from_slice(rhs);
                for &i in grid.order.iter().rev() {
                    let p = grid.parent[i];
                    if p != NO_PARENT {
                        y[p] += s * grid.conductance[i] * y[i] / pivots[i];
                    }
                }
                let mut x = vec![0.0; grid.node_count()];
                for &i in &grid.order {
                    let p = grid.parent[i];
                    let coupled = if p == NO_PARENT {
                        0.0
                    } else {
                        s * grid.conductance[i] * x[p]
                    };
                    x[i] = (y[i] + coupled) / pivots[i];
                }
                x.truncate(n);
                Ok(x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::DEFAULT_EDGE_BUDGET;

    #[test]
    fn half_line_alignment() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let g = make_grid_half_line(&t, 3, 4, BoundaryCondition::Dirichlet0).unwrap();
        assert_eq!(g.n_cells(), 12);
        assert_eq!(g.breakpoints(), &[1.0, 2.0]);
        assert_eq!(g.domain_end(), 3.0);
        assert_eq!(g.weights()[3], 1.0);
        assert_eq!(g.weights()[4], 2.0);
        assert!(make_grid_half_line(&t, 3, 5, BoundaryCondition::Neumann).is_err());
        assert!(make_grid_half_line(&t, 3, 2, BoundaryCondition::Neumann).is_err());
        g.check_m_matrix().unwrap();
    }

    #[test]
    fn constant_field_is_steady() {
        let t = RegularTree::new(vec![1, 2, 3, 3], vec![0.0, 1.0, 1.7, 2.2]).unwrap();
        let g = make_grid_half_line(&t, 3, 6, BoundaryCondition::Neumann).unwrap();
        for r in g.flux_divergence(&vec![0.7; g.n_cells()]) {
            assert!(r.abs() < 1e-13);
        }
    }

    #[test]
    fn interface_flux_balance() {
        // two cells straddling ρ_1 with β⁺ = 2β⁻; hand-computed oracle
        // z = s(ρ − ρ_1) on the left and z = (s/2)(ρ − ρ_1) on the right carries
        // the same flux β z_ρ on both sides, so the face flux must equal β⁻ s.
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let g = make_grid_half_line(&t, 2, 4, BoundaryCondition::Neumann).unwrap();
        let s = 0.8;
        let u = g.sample(|x| {
            if x <= 1.0 {
                s * (x - 1.0)
            } else {
                0.5 * s * (x - 1.0)
            }
        });
        let i = 3;
        let h = 0.25;
        let expected_t = 1.0 / (0.5 * h / 1.0 + 0.5 * h / 2.0);
        assert!((g.transmissivity(i) - expected_t).abs() < 1e-14);
        let flux = g.transmissivity(i) * (u[i + 1] - u[i]);
        assert!((flux - 1.0 * s).abs() < 1e-13);
        // interior cells on either side see no net flux
        let div = g.flux_divergence(&u);
        for &k in &[2usize, 3, 4, 5] {
            assert!(div[k].abs() < 1e-13, "cell {k}: {}", div[k]);
        }
    }

    #[test]
    fn full_tree_counts() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let e = t.expand(3, DEFAULT_EDGE_BUDGET).unwrap();
        let g = make_grid_full_tree(&e, 4, BoundaryCondition::Dirichlet0).unwrap();
        assert_eq!(e.edges.len(), 7);
        assert_eq!(g.n_cells(), 28);
        assert_eq!(g.breakpoints(), &[1.0, 2.0]);
        g.check_m_matrix().unwrap();
    }

    #[test]
    fn single_edge_tree_matches_interval() {
        let t = RegularTree::homogeneous(3, 1.5).unwrap();
        let e = t.expand(1, 10).unwrap();
        let full = make_grid_full_tree(&e, 8, BoundaryCondition::Dirichlet0).unwrap();
        let half = make_grid_half_line(&t, 1, 8, BoundaryCondition::Dirichlet0).unwrap();
        let u: Vec<f64> = (0..8).map(|i| ((i * 7 % 5) as f64) / 5.0).collect();
        let a = full.stiffness_apply(&u);
        let b = half.stiffness_apply(&u);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn tree_elimination_solves() {
        let t = RegularTree::homogeneous(3, 1.0).unwrap();
        let e = t.expand(3, DEFAULT_EDGE_BUDGET).unwrap();
        let g = make_grid_full_tree(&e, 4, BoundaryCondition::Dirichlet0).unwrap();
        let sys = ShiftedSystem::new(&g, 0.3).unwrap();
        let x: Vec<f64> = (0..g.n_cells()).map(|i| (i as f64 * 0.37).sin()).collect();
        let kx = g.stiffness_apply(&x);
        let rhs: Vec<f64> = (0..g.n_cells())
            .map(|i| g.mass()[i] * x[i] + 0.3 * kx[i])
            .collect();
        let y = sys.solve(&g, &rhs).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
