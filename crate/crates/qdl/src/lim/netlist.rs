//! Element types and the netlist container.

use std::sync::Arc;

use thiserror::Error;

use crate::qss::InputId;

/// Index of a state atom; assigned sequentially as elements are added, so
/// insertion order fixes the state ordering of the assembled system.
pub type StateId = usize;

/// What kind of state an atom carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// Node voltage (V).
    NodeVoltage,
    /// Branch current (A).
    BranchCurrent,
    /// Auxiliary device state (flux, speed, controller state, ...).
    Aux,
}

/// A value that is either a constant or an externally controlled input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Signal {
    Const(f64),
    Input(InputId),
}

impl Signal {
    #[inline]
    pub fn value(&self, inputs: &[f64]) -> f64 {
        match *self {
            Signal::Const(v) => v,
            Signal::Input(k) => inputs[k],
        }
    }

    pub fn input(&self) -> Option<InputId> {
        match *self {
            Signal::Const(_) => None,
            Signal::Input(k) => Some(k),
        }
    }
}

impl Default for Signal {
    fn default() -> Self {
        Signal::Const(0.0)
    }
}

/// Reference to a voltage seen by an element port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    /// The reference node, v = 0, carries no atom.
    Ground,
    /// A latency node (its voltage is the referenced state atom).
    Node(StateId),
    /// An ideal voltage-source node (externally controlled, no atom).
    Source(usize),
    /// An explicitly declared open connection point with no latency.
    /// Only valid while wiring; any element still attached to one at
    /// assembly time is a validation error.
    Open(usize),
}

/// Additive nonlinear source term with an explicit dependency set.
///
/// For a node the value is a current into the node (A); for a branch a
/// voltage rise around the loop (V); for an auxiliary state the full rate.
#[derive(Clone)]
pub struct ExtraSource {
    pub deps: Vec<StateId>,
    pub inputs: Vec<InputId>,
    pub f: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl ExtraSource {
    pub fn new(
        deps: Vec<StateId>,
        inputs: Vec<InputId>,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            deps,
            inputs,
            f: Arc::new(f),
        }
    }
}

impl std::fmt::Debug for ExtraSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtraSource")
            .field("deps", &self.deps)
            .field("inputs", &self.inputs)
            .finish()
    }
}

/// Capacitive node with dependent sources.
#[derive(Debug, Clone)]
pub struct LimNode {
    pub label: String,
    /// Capacitance (F, > 0); fictitious latency where none exists physically.
    pub c: f64,
    /// Shunt conductance (S).
    pub g: f64,
    /// Independent current injection (A).
    pub h: Signal,
    /// Voltage-controlled current sources: (controlling node, coefficient in S).
    pub vccs: Vec<(NodeRef, f64)>,
    /// Current-controlled current sources: (controlling branch state, dimensionless).
    pub cccs: Vec<(StateId, f64)>,
    pub extra: Option<ExtraSource>,
    /// Quantum of the node-voltage atom.
    pub quantum: f64,
}

/// Inductive branch with dependent sources, oriented `from -> to`.
#[derive(Debug, Clone)]
pub struct LimBranch {
    pub label: String,
    pub from: NodeRef,
    pub to: NodeRef,
    /// Series inductance (H, > 0).
    pub l: f64,
    /// Series resistance (Ω).
    pub r: f64,
    /// Independent series voltage (V).
    pub e: Signal,
    /// Gain applied to the endpoint voltage difference; Const(1.0) for a
    /// plain branch. An input-backed gain scales the branch admittance,
    /// which is how proportional load steps are applied at run time.
    pub gain: Signal,
    /// Voltage-controlled voltage sources: (controlling node, dimensionless).
    pub vcvs: Vec<(NodeRef, f64)>,
    /// Current-controlled voltage sources: (controlling branch state, Ω).
    pub ccvs: Vec<(StateId, f64)>,
    pub extra: Option<ExtraSource>,
    /// Quantum of the branch-current atom.
    pub quantum: f64,
}

/// Externally controlled ideal voltage-source node.
#[derive(Debug, Clone)]
pub struct IdealVoltageNode {
    pub label: String,
    pub v: Signal,
}

/// Externally controlled ideal current-source branch.
#[derive(Debug, Clone)]
pub struct IdealCurrentBranch {
    pub label: String,
    pub from: NodeRef,
    pub to: NodeRef,
    pub i: Signal,
}

/// Auxiliary first-order state with an arbitrary rate closure.
#[derive(Debug, Clone)]
pub struct AuxState {
    pub label: String,
    pub rate: ExtraSource,
    pub quantum: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetlistError {
    #[error("dangling port: {element} references undefined connection point")]
    DanglingPort { element: String },

    #[error("parallel ideal voltage nodes: node '{label}' declared more than once")]
    ParallelIdealVoltage { label: String },

    #[error("series ideal current branches: '{a}' and '{b}' joined at a latency-free point")]
    SeriesIdealCurrent { a: String, b: String },

    #[error("unresolved controlling reference in '{element}'")]
    UnresolvedControlling { element: String },

    #[error("element '{element}': {what} must be positive")]
    NonPositive { element: String, what: &'static str },

    #[error("branch '{element}' endpoints must be distinct")]
    DegenerateBranch { element: String },

    #[error("duplicate state label '{0}'")]
    DuplicateLabel(String),

    #[error("input {0} out of range")]
    BadInput(usize),

    #[error("singular ac/dc coupling at phase angle {phi} rad")]
    SingularCoupling { phi: f64 },
}

/// A network under construction. State ids are assigned on insertion.
#[derive(Debug, Clone, Default)]
pub struct Netlist {
    states: Vec<StateKind>,
    pub(crate) nodes: Vec<(StateId, LimNode)>,
    pub(crate) branches: Vec<(StateId, LimBranch)>,
    pub(crate) aux: Vec<(StateId, AuxState)>,
    pub(crate) sources_v: Vec<IdealVoltageNode>,
    pub(crate) sources_i: Vec<IdealCurrentBranch>,
    pub(crate) input_names: Vec<String>,
    pub(crate) input_values: Vec<f64>,
    open_points: usize,
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a named external input slot with its default value.
    pub fn input(&mut self, name: impl Into<String>, default: f64) -> InputId {
        self.input_names.push(name.into());
        self.input_values.push(default);
        self.input_values.len() - 1
    }

    pub fn input_id(&self, name: &str) -> Option<InputId> {
        self.input_names.iter().position(|n| n == name)
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn set_input_default(&mut self, id: InputId, v: f64) {
        self.input_values[id] = v;
    }

    pub fn add_node(&mut self, node: LimNode) -> StateId {
        let id = self.states.len();
        self.states.push(StateKind::NodeVoltage);
        self.nodes.push((id, node));
        id
    }

    pub fn add_branch(&mut self, branch: LimBranch) -> StateId {
        let id = self.states.len();
        self.states.push(StateKind::BranchCurrent);
        self.branches.push((id, branch));
        id
    }

    pub fn add_aux(&mut self, aux: AuxState) -> StateId {
        let id = self.states.len();
        self.states.push(StateKind::Aux);
        self.aux.push((id, aux));
        id
    }

    /// Declares an ideal voltage-source node. Re-declaring a label is the
    /// parallel-voltage-source error caught at validation.
    pub fn add_ideal_voltage(&mut self, src: IdealVoltageNode) -> NodeRef {
        self.sources_v.push(src);
        NodeRef::Source(self.sources_v.len() - 1)
    }

    pub fn add_ideal_current(&mut self, src: IdealCurrentBranch) {
        self.sources_i.push(src);
    }

    /// Declares a latency-free connection point. Useful only for expressing
    /// wiring mistakes in validation fixtures; any element still referencing
    /// one at assembly is rejected.
    pub fn open_point(&mut self) -> NodeRef {
        self.open_points += 1;
        NodeRef::Open(self.open_points - 1)
    }

    /// Mutable access to a node for merging contributions (capacitance,
    /// shunt, cross-coupling sources) from devices attached after creation.
    ///
    /// Panics if `id` is not a node state.
    pub fn node_mut(&mut self, id: StateId) -> &mut LimNode {
        &mut self
            .nodes
            .iter_mut()
            .find(|(nid, _)| *nid == id)
            .expect("state id is not a node")
            .1
    }

    /// Mutable access to a branch, for wiring cross couplings that need
    /// both atoms to exist first. Panics if `id` is not a branch state.
    pub fn branch_mut(&mut self, id: StateId) -> &mut LimBranch {
        &mut self
            .branches
            .iter_mut()
            .find(|(bid, _)| *bid == id)
            .expect("state id is not a branch")
            .1
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_kind(&self, id: StateId) -> Option<StateKind> {
        self.states.get(id).copied()
    }

    pub(crate) fn kinds(&self) -> &[StateKind] {
        &self.states
    }

    pub(crate) fn n_open_points(&self) -> usize {
        self.open_points
    }
}

/// dv/dt of a node per the nodal KCL form: independent injection, shunt
/// conductance, dependent-source currents, and incident branch currents
/// (signed positive into the node), divided by the node capacitance.
#[inline]
pub fn node_rate(
    c: f64,
    g: f64,
    h: f64,
    v: f64,
    dependent_currents: f64,
    injected_branch_currents: f64,
) -> f64 {
    (h - g * v + dependent_currents + injected_branch_currents) / c
}

/// di/dt of a branch per the loop KVL form: endpoint voltage difference
/// (scaled by the drive gain), series voltage, resistive drop, and
/// dependent-source voltages, divided by the branch inductance.
#[inline]
pub fn branch_rate(
    l: f64,
    r: f64,
    e: f64,
    gain: f64,
    v_from: f64,
    v_to: f64,
    i: f64,
    dependent_voltages: f64,
) -> f64 {
    (gain * (v_from - v_to) + e - r * i + dependent_voltages) / l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_rate_single_injection() {
        // All other inputs zero, H = 1, C = 2.
        assert_eq!(node_rate(2.0, 0.0, 1.0, 0.0, 0.0, 0.0), 0.5);
    }

    #[test]
    fn node_rate_shunt_and_branch() {
        // v = 1, G = 0.1, one branch injecting 0.3 A, C = 1.
        let r = node_rate(1.0, 0.1, 0.0, 1.0, 0.0, 0.3);
        assert!((r - 0.2).abs() < 1e-15);
    }

    #[test]
    fn branch_rate_dead_branch() {
        assert_eq!(branch_rate(0.1, 0.5, 0.0, 1.0, 2.0, 2.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn branch_rate_hand_arithmetic() {
        // dv = 1, R = 0.5, i = 1, L = 0.1.
        let r = branch_rate(0.1, 0.5, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0);
        assert!((r - 5.0).abs() < 1e-12);
    }
}
