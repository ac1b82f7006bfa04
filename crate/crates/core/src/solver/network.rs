//! Generic linear network solver.
//!
//! Unknowns are the branch currents plus, when gates are present, the common
//! potential `V0` of the superconducting islands. Each node contributes a
//! current law; each fundamental loop of a spanning tree contributes the
//! linearized quantization condition
//!
//! ```text
//! Σ sᵢ Lᵢ Iᵢ = (m + Θ₀/2π) Φ₀ + w Φ_ext
//! ```
//!
//! with `sᵢ = ±1` the orientation of branch `i` along the loop and `w` the
//! loop's flux weight. The system is factorized once and solved for unit
//! sources, so every current is stored as an affine function of
//! `(I_in, V_g, Φ_ext, q)` where `q = (m + Θ₀/2π) Φ₀`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::circuit::{DeviceConfig, Drive, GateSpec, Theta0Policy};

// Matrices whose condition number exceeds this are treated as singular.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct LoopEquation {
    /// `(branch position, orientation sign)`.
    pub terms: Vec<(usize, f64)>,
    pub flux_weight: f64,
}

/// Solved internal currents at one drive.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchState {
    pub currents: Vec<f64>,
    pub gate_currents: Vec<f64>,
    /// One winding number per fundamental loop.
    pub fluxons: Vec<i64>,
    /// `(π/2)·sign(Iᵢ) + (2π/Φ₀) Lᵢ Iᵢ`.
    pub fulton_phases: Vec<f64>,
}

/// Affine solution of a device network.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub(crate) config: DeviceConfig,
    pub(crate) edges: Vec<(usize, usize)>,
    pub(crate) loops: Vec<LoopEquation>,
    pub(crate) theta0: Vec<f64>,
    // Row-major coefficient tables, one row per branch (or gate).
    pub(crate) c_in: Vec<f64>,
    pub(crate) c_vg: Vec<f64>,
    pub(crate) c_phi: Vec<f64>,
    pub(crate) c_q: Vec<f64>,
    pub(crate) g_in: Vec<f64>,
    pub(crate) g_vg: Vec<f64>,
}

struct Solved {
    // columns: I_in, V_g.., Φ, q..
    x: DMatrix<f64>,
    n_branches: usize,
}

impl LinearModel {
    pub fn new(config: &DeviceConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let topo = config.topology();
        let n_b = config.branches.len();
        let n_g = config.gates.len();

        let (forest, components) = spanning_forest(topo.nodes, &topo.edges);
        if components > 1 {
            return Err(SolverError::Singular {
                equations: "Kirchhoff current laws",
                detail: format!("network splits into {components} disconnected parts"),
            });
        }
        let mut loops = fundamental_loops(&topo.edges, &forest);
        for (k, lp) in loops.iter_mut().enumerate() {
            lp.flux_weight = topo.loop_flux_weights.get(k).copied().unwrap_or(1.0);
        }
        if loops.is_empty() {
            return Err(SolverError::Singular {
                equations: "loop quantization",
                detail: "network has no superconducting loop".into(),
            });
        }

        let solved = solve_network(config, &topo.edges, topo.input, topo.output, &loops, true)?;
        let n_l = loops.len();
        let cols = 1 + n_g + 1 + n_l;
        debug_assert_eq!(solved.x.ncols(), cols);

        let mut c_in = vec![0.0; n_b];
        let mut c_vg = vec![0.0; n_b * n_g];
        let mut c_phi = vec![0.0; n_b];
        let mut c_q = vec![0.0; n_b * n_l];
        for i in 0..n_b {
            c_in[i] = solved.x[(i, 0)];
            for j in 0..n_g {
                c_vg[i * n_g + j] = solved.x[(i, 1 + j)];
            }
            c_phi[i] = solved.x[(i, 1 + n_g)];
            for k in 0..n_l {
                c_q[i * n_l + k] = solved.x[(i, 2 + n_g + k)];
            }
        }
        let mut g_in = vec![0.0; n_g];
        let mut g_vg = vec![0.0; n_g * n_g];
        if n_g > 0 {
            // I_gk = (V_gk - V0) / R_gk
            let v0 = solved.n_branches;
            for (k, gate) in config.gates.iter().enumerate() {
                g_in[k] = -solved.x[(v0, 0)] / gate.r_gate;
                for j in 0..n_g {
                    let own = if j == k { 1.0 } else { 0.0 };
                    g_vg[k * n_g + j] = (own - solved.x[(v0, 1 + j)]) / gate.r_gate;
                }
            }
        }

        let theta0 = match config.theta0 {
            Theta0Policy::Explicit(t) => vec![t; n_l],
            Theta0Policy::Auto => {
                let reference = solve_network(config, &topo.edges, topo.input, topo.output, &loops, false)?;
                loops
                    .iter()
                    .map(|lp| {
                        lp.terms
                            .iter()
                            .map(|&(b, s)| s * PI / 2.0 * sign(reference.x[(b, 0)], 1e-12))
                            .sum()
                    })
                    .collect()
            }
        };

        Ok(Self {
            config: config.clone(),
            edges: topo.edges,
            loops,
            theta0,
            c_in,
            c_vg,
            c_phi,
            c_q,
            g_in,
            g_vg,
        })
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn n_branches(&self) -> usize {
        self.config.branches.len()
    }

    pub fn n_gates(&self) -> usize {
        self.config.gates.len()
    }

    pub fn loops(&self) -> &[LoopEquation] {
        &self.loops
    }

    /// Resolved Θ₀ for every loop.
    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn phi0(&self) -> f64 {
        self.config.phi0
    }

    /// `q = (m + Θ₀/2π) Φ₀` for loop `k`.
    pub fn fluxon_term(&self, k: usize, m: i64) -> f64 {
        (m as f64 + self.theta0[k] / (2.0 * PI)) * self.phi0()
    }

    pub(crate) fn gates(&self) -> &[GateSpec] {
        &self.config.gates
    }

    /// Gates whose attachment node is an endpoint of branch `i` (0-based).
    pub fn adjacent_gates(&self, i: usize) -> Vec<usize> {
        let (a, b) = self.edges[i];
        self.config
            .gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.node == a || g.node == b)
            .map(|(k, _)| k)
            .collect()
    }

    /// Gate currents at the given input current and gate voltages.
    pub fn gate_currents(&self, i_in: f64, v_gate: &[f64]) -> Vec<f64> {
        let n_g = self.n_gates();
        (0..n_g)
            .map(|k| {
                self.g_in[k] * i_in + (0..n_g).map(|j| self.g_vg[k * n_g + j] * v_gate[j]).sum::<f64>()
            })
            .collect()
    }

    fn check_drive(&self, drive: &Drive, m: &[i64]) -> Result<(), SolverError> {
        if drive.v_gate.len() != self.n_gates() {
            return Err(SolverError::GateVoltages {
                expected: self.n_gates(),
                got: drive.v_gate.len(),
            });
        }
        if m.len() != self.loops.len() {
            return Err(SolverError::FluxonCount {
                expected: self.loops.len(),
                got: m.len(),
            });
        }
        if !drive.is_finite() {
            return Err(SolverError::NonFiniteDrive);
        }
        Ok(())
    }

    /// Internal currents for the given drive and winding numbers.
    pub fn state(&self, drive: &Drive, m: &[i64]) -> Result<BranchState, SolverError> {
        self.check_drive(drive, m)?;
        let n_b = self.n_branches();
        let n_g = self.n_gates();
        let n_l = self.loops.len();
        let q: Vec<f64> = (0..n_l).map(|k| self.fluxon_term(k, m[k])).collect();
        let currents: Vec<f64> = (0..n_b)
            .map(|i| {
                self.c_in[i] * drive.i_in
                    + (0..n_g).map(|j| self.c_vg[i * n_g + j] * drive.v_gate[j]).sum::<f64>()
                    + self.c_phi[i] * drive.phi_ext
                    + (0..n_l).map(|k| self.c_q[i * n_l + k] * q[k]).sum::<f64>()
            })
            .collect();
        let phi0 = self.phi0();
        let fulton_phases = currents
            .iter()
            .zip(&self.config.branches)
            .map(|(&c, b)| PI / 2.0 * sign(c, 0.0) + 2.0 * PI / phi0 * b.inductance * c)
            .collect();
        Ok(BranchState {
            gate_currents: self.gate_currents(drive.i_in, &drive.v_gate),
            currents,
            fluxons: m.to_vec(),
            fulton_phases,
        })
    }

    /// Largest current-law residual relative to `max |Iᵢ|`, and largest
    /// quantization residual in radians.
    pub fn residuals(&self, state: &BranchState, drive: &Drive) -> (f64, f64) {
        let topo = self.config.topology();
        let mut inj = vec![0.0; topo.nodes];
        inj[topo.input] += drive.i_in;
        if self.n_gates() == 0 {
            inj[topo.output] -= drive.i_in;
        } else {
            let i_out = drive.i_in + state.gate_currents.iter().sum::<f64>();
            inj[topo.output] -= i_out;
            for (g, ig) in self.config.gates.iter().zip(&state.gate_currents) {
                inj[g.node] += ig;
            }
        }
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            inj[a] -= state.currents[i];
            inj[b] += state.currents[i];
        }
        let scale = state.currents.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
        let kcl = inj.iter().fold(0.0f64, |m, r| m.max(r.abs())) / scale;

        let phi0 = self.phi0();
        let quant = self
            .loops
            .iter()
            .enumerate()
            .map(|(k, lp)| {
                let flux: f64 = lp
                    .terms
                    .iter()
                    .map(|&(b, s)| s * self.config.branches[b].inductance * state.currents[b])
                    .sum();
                let rhs = self.fluxon_term(k, state.fluxons[k]) + lp.flux_weight * drive.phi_ext;
                (2.0 * PI / phi0 * (flux - rhs)).abs()
            })
            .fold(0.0f64, f64::max);
        (kcl, quant)
    }
}

/// Assemble and solve the network for any device topology.
pub fn internal_currents_generic(config: &DeviceConfig, drive: &Drive, m: &[i64]) -> Result<BranchState, SolverError> {
    LinearModel::new(config)?.state(drive, m)
}

fn sign(x: f64, tol: f64) -> f64 {
    if x > tol {
        1.0
    } else if x < -tol {
        -1.0
    } else {
        0.0
    }
}

fn solve_network(
    config: &DeviceConfig,
    edges: &[(usize, usize)],
    input: usize,
    output: usize,
    loops: &[LoopEquation],
    include_gates: bool,
) -> Result<Solved, SolverError> {
    let n_nodes = 1 + edges.iter().flat_map(|&(a, b)| [a, b]).max().unwrap_or(0);
    let n_nodes = n_nodes.max(config.topology().nodes);
    let n_b = edges.len();
    let gates: &[GateSpec] = if include_gates { &config.gates } else { &[] };
    let gated = !gates.is_empty();
    let n_unknowns = n_b + usize::from(gated);
    let n_g = config.gates.len();
    let n_l = loops.len();
    let n_cols = 1 + n_g + 1 + n_l;

    // Gated networks keep every node equation (their sum fixes V0); ungated
    // ones drop the last node, which is implied by the others.
    let kcl_rows = if gated { n_nodes } else { n_nodes - 1 };
    let n_rows = kcl_rows + n_l;
    if n_rows != n_unknowns {
        return Err(SolverError::Singular {
            equations: if kcl_rows + n_l < n_unknowns { "loop quantization" } else { "Kirchhoff current laws" },
            detail: format!("{n_rows} equations for {n_unknowns} unknowns"),
        });
    }

    let r_out = gates.first().map_or(1.0, |g| g.r_out);
    // V0 column is scaled by R_out so every column is O(1).
    let mut a = DMatrix::<f64>::zeros(n_rows, n_unknowns);
    let mut rhs = DMatrix::<f64>::zeros(n_rows, n_cols);
    for node in 0..kcl_rows {
        for (j, &(from, to)) in edges.iter().enumerate() {
            if from == node {
                a[(node, j)] += 1.0;
            }
            if to == node {
                a[(node, j)] -= 1.0;
            }
        }
        if node == input {
            rhs[(node, 0)] += 1.0;
        }
        if gated {
            let mut conductance = 0.0;
            for (k, g) in gates.iter().enumerate() {
                if g.node == node {
                    conductance += 1.0 / g.r_gate;
                    rhs[(node, 1 + k)] += 1.0 / g.r_gate;
                }
            }
            if node == output {
                conductance += 1.0 / r_out;
            }
            a[(node, n_b)] = conductance * r_out;
        } else if node == output {
            rhs[(node, 0)] -= 1.0;
        }
    }
    for (k, lp) in loops.iter().enumerate() {
        let row = kcl_rows + k;
        let l_scale = lp
            .terms
            .iter()
            .map(|&(b, _)| config.branches[b].inductance)
            .fold(0.0f64, f64::max);
        for &(b, s) in &lp.terms {
            a[(row, b)] += s * config.branches[b].inductance / l_scale;
        }
        rhs[(row, 1 + n_g)] = lp.flux_weight / l_scale;
        rhs[(row, 2 + n_g + k)] = 1.0 / l_scale;
    }

    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        let kcl = a.rows(0, kcl_rows).into_owned();
        let kcl_rank = kcl.svd(false, false).rank(smax * 1e-12);
        let equations = if kcl_rank < kcl_rows { "Kirchhoff current laws" } else { "loop quantization" };
        return Err(SolverError::Singular {
            equations,
            detail: format!("condition number {:.3e}", smax / smin),
        });
    }
    let lu = a.lu();
    let mut x = DMatrix::<f64>::zeros(n_unknowns, n_cols);
    for c in 0..n_cols {
        let col: DVector<f64> = rhs.column(c).into_owned();
        let sol = lu.solve(&col).ok_or(SolverError::Singular {
            equations: "loop quantization",
            detail: "LU factorization failed".into(),
        })?;
        x.set_column(c, &sol);
    }
    if gated {
        for c in 0..n_cols {
            x[(n_b, c)] *= r_out;
        }
    }
    Ok(Solved { x, n_branches: n_b })
}

// BFS spanning forest; returns (parent edge per node, component count).
fn spanning_forest(n_nodes: usize, edges: &[(usize, usize)]) -> (Vec<Option<(usize, usize)>>, usize) {
    let mut adj = vec![Vec::new(); n_nodes];
    for (k, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((k, b));
        adj[b].push((k, a));
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n_nodes];
    let mut seen = vec![false; n_nodes];
    let mut components = 0;
    for root in 0..n_nodes {
        if seen[root] {
            continue;
        }
        components += 1;
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(k, v) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((k, u));
                    queue.push_back(v);
                }
            }
        }
    }
    (parent, components)
}

fn fundamental_loops(edges: &[(usize, usize)], parent: &[Option<(usize, usize)>]) -> Vec<LoopEquation> {
    let tree: Vec<bool> = {
        let mut t = vec![false; edges.len()];
        for (k, _) in parent.iter().flatten() {
            t[*k] = true;
        }
        t
    };
    let path_to_root = |mut n: usize| {
        let mut p = vec![n];
        while let Some((_, up)) = parent[n] {
            n = up;
            p.push(n);
        }
        p
    };
    // orientation of edge k when walked from u to v
    let orient = |k: usize, u: usize| if edges[k].0 == u { 1.0 } else { -1.0 };

    let mut loops = Vec::new();
    for (k, &(a, b)) in edges.iter().enumerate() {
        if tree[k] {
            continue;
        }
        // walk a -> b along the chord, then b -> a through the tree
        let mut terms = vec![(k, 1.0)];
        let pb = path_to_root(b);
        let pa = path_to_root(a);
        let lca = *pb.iter().find(|n| pa.contains(n)).expect("connected");
        let mut n = b;
        while n != lca {
            let (e, up) = parent[n].unwrap();
            terms.push((e, orient(e, n)));
            n = up;
        }
        let mut down = Vec::new();
        let mut n = a;
        while n != lca {
            let (e, up) = parent[n].unwrap();
            // walked from up to n
            down.push((e, orient(e, up)));
            n = up;
        }
        terms.extend(down.into_iter().rev());
        terms.sort_by_key(|t| t.0);
        loops.push(LoopEquation { terms, flux_weight: 1.0 });
    }
    loops
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{GateSpec, Topology};

    #[test]
    fn ring_loop_is_fully_forward() {
        let c = DeviceConfig::normalized_ring(&[1.0, 2.0, 3.0], &[1.0; 3]);
        let model = LinearModel::new(&c).unwrap();
        assert_eq!(model.loops().len(), 1);
        assert_eq!(model.loops()[0].terms, vec![(0, 1.0), (1, 1.0), (2, 1.0)]);
    }

    #[test]
    fn auto_theta0_from_reference_signs() {
        let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3])
            .with_gate(GateSpec::wide(1, 1.0, 0.57, 5.0))
            .with_theta0(Theta0Policy::Auto);
        let model = LinearModel::new(&c).unwrap();
        // I1, I2 forward, I3 backward
        assert!((model.theta0()[0] - PI / 2.0).abs() < 1e-15);

        let squid = DeviceConfig::normalized_ring(&[1.0, 1.0], &[1.0; 2]).with_theta0(Theta0Policy::Auto);
        assert_eq!(LinearModel::new(&squid).unwrap().theta0()[0], 0.0);
    }

    #[test]
    fn equal_inductances_half_flux_quantum() {
        // gate voltage chosen so that I_g = 0 at I_in = 0
        let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 1.0], &[1.0; 3]).with_gate(GateSpec::wide(1, 1.0, 0.57, 5.0));
        let s = internal_currents_generic(&c, &Drive::new(0.0, &[0.0], 0.5), &[0]).unwrap();
        for i in &s.currents {
            assert!((i - 1.0 / 6.0).abs() < 1e-14, "{i}");
        }
        assert!(s.gate_currents[0].abs() < 1e-15);
    }

    #[test]
    fn disconnected_network_names_current_laws() {
        let mut c = DeviceConfig::normalized_ring(&[1.0; 4], &[1.0; 4]);
        c.topology = Some(Topology {
            nodes: 4,
            edges: vec![(0, 1), (1, 0), (2, 3), (3, 2)],
            input: 0,
            output: 1,
            loop_flux_weights: vec![],
        });
        match LinearModel::new(&c) {
            Err(SolverError::Singular { equations, .. }) => assert_eq!(equations, "Kirchhoff current laws"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tree_network_has_no_loop() {
        let mut c = DeviceConfig::normalized_ring(&[1.0; 2], &[1.0; 2]);
        c.topology = Some(Topology {
            nodes: 3,
            edges: vec![(0, 1), (1, 2)],
            input: 0,
            output: 2,
            loop_flux_weights: vec![],
        });
        match LinearModel::new(&c) {
            Err(SolverError::Singular { equations, .. }) => assert_eq!(equations, "loop quantization"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_loop_network_residuals() {
        // two loops sharing branch 3: 0->1->2->0 and 0->2 parallel path
        let mut c = DeviceConfig::normalized_ring(&[1.0, 1.5, 2.0, 0.7, 1.2], &[1.0; 5])
            .with_gate(GateSpec::narrow(1, 1.0, 0.5, 3.0, 0.3));
        c.topology = Some(Topology {
            nodes: 4,
            edges: vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)],
            input: 0,
            output: 2,
            loop_flux_weights: vec![1.0, 0.5],
        });
        let model = LinearModel::new(&c).unwrap();
        assert_eq!(model.loops().len(), 2);
        let d = Drive::new(0.4, &[0.9], 0.37);
        let s = model.state(&d, &[1, -2]).unwrap();
        let (kcl, q) = model.residuals(&s, &d);
        assert!(kcl < 1e-12 && q < 1e-12, "{kcl} {q}");
    }
}
