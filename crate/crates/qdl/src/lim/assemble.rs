//! Netlist validation and closure assembly.

use std::collections::HashMap;
use std::sync::Arc;

use crate::qss::{DerivativeClosure, InputId, QdlSystem};

use super::netlist::{
    branch_rate, node_rate, ExtraSource, Netlist, NetlistError, NodeRef, Signal, StateId,
    StateKind,
};

/// Assembled system: closures, dependency graph, labels, quanta, and the
/// named input bank, ready for both the event engine and the dense solver.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub system: QdlSystem,
    pub kinds: Vec<StateKind>,
    pub input_names: Vec<String>,
}

impl Assembly {
    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn state_index(&self, label: &str) -> Option<StateId> {
        self.system.labels.iter().position(|l| l == label)
    }

    pub fn input_index(&self, name: &str) -> Option<InputId> {
        self.input_names.iter().position(|n| n == name)
    }
}

/// Compensated accumulator (two-sum with fma product correction).
///
/// Node KCL sums cancel tens of amperes down to residuals near zero and
/// divide by microfarad-scale latencies; plain accumulation leaves a
/// rounding floor above the equilibrium tolerance, so node rates use an
/// exact-product compensated sum.
#[derive(Clone, Copy, Default)]
struct Acc {
    s: f64,
    c: f64,
}

impl Acc {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        let e = if self.s.abs() >= x.abs() {
            (self.s - t) + x
        } else {
            (x - t) + self.s
        };
        self.s = t;
        self.c += e;
    }

    #[inline]
    fn add_prod(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add(p);
        self.c += e;
    }

    #[inline]
    fn value(self) -> f64 {
        self.s + self.c
    }
}

/// Resolved voltage reference.
#[derive(Debug, Clone, Copy)]
enum VRef {
    Zero,
    State(StateId),
    Const(f64),
    Input(InputId),
}

impl VRef {
    #[inline]
    fn value(&self, state: &[f64], inputs: &[f64]) -> f64 {
        match *self {
            VRef::Zero => 0.0,
            VRef::State(s) => state[s],
            VRef::Const(v) => v,
            VRef::Input(k) => inputs[k],
        }
    }

    fn state(&self) -> Option<StateId> {
        match *self {
            VRef::State(s) => Some(s),
            _ => None,
        }
    }

    fn input(&self) -> Option<InputId> {
        match *self {
            VRef::Input(k) => Some(k),
            _ => None,
        }
    }
}

struct Resolver<'a> {
    net: &'a Netlist,
}

impl<'a> Resolver<'a> {
    fn voltage(&self, r: NodeRef, element: &str) -> Result<VRef, NetlistError> {
        match r {
            NodeRef::Ground => Ok(VRef::Zero),
            NodeRef::Node(id) => match self.net.state_kind(id) {
                Some(StateKind::NodeVoltage) => Ok(VRef::State(id)),
                _ => Err(NetlistError::DanglingPort {
                    element: element.to_string(),
                }),
            },
            NodeRef::Source(k) => match self.net.sources_v.get(k) {
                Some(src) => Ok(match src.v {
                    Signal::Const(v) => VRef::Const(v),
                    Signal::Input(i) => VRef::Input(i),
                }),
                None => Err(NetlistError::DanglingPort {
                    element: element.to_string(),
                }),
            },
            NodeRef::Open(_) => Err(NetlistError::DanglingPort {
                element: element.to_string(),
            }),
        }
    }

    fn controlling_voltage(&self, r: NodeRef, element: &str) -> Result<VRef, NetlistError> {
        self.voltage(r, element)
            .map_err(|_| NetlistError::UnresolvedControlling {
                element: element.to_string(),
            })
    }

    fn controlling_current(&self, id: StateId, element: &str) -> Result<StateId, NetlistError> {
        match self.net.state_kind(id) {
            Some(StateKind::BranchCurrent) => Ok(id),
            _ => Err(NetlistError::UnresolvedControlling {
                element: element.to_string(),
            }),
        }
    }

    fn check_input(&self, s: Signal) -> Result<(), NetlistError> {
        if let Signal::Input(k) = s {
            if k >= self.net.input_values.len() {
                return Err(NetlistError::BadInput(k));
            }
        }
        Ok(())
    }
}

fn validate_topology(net: &Netlist) -> Result<(), NetlistError> {
    // Duplicate state labels.
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let labels = net
        .nodes
        .iter()
        .map(|(_, n)| n.label.as_str())
        .chain(net.branches.iter().map(|(_, b)| b.label.as_str()))
        .chain(net.aux.iter().map(|(_, a)| a.label.as_str()));
    for l in labels {
        if seen.insert(l, ()).is_some() {
            return Err(NetlistError::DuplicateLabel(l.to_string()));
        }
    }

    // Two ideal voltage nodes with the same label model the same physical
    // point: that is a parallel connection of ideal sources.
    let mut vlabels: HashMap<&str, ()> = HashMap::new();
    for src in &net.sources_v {
        if vlabels.insert(src.label.as_str(), ()).is_some() {
            return Err(NetlistError::ParallelIdealVoltage {
                label: src.label.clone(),
            });
        }
    }

    // Open connection points carry no latency. Two ideal current branches
    // meeting at one leave its KCL unsatisfiable; anything else touching an
    // open point is an unfinished wiring job.
    let mut open_refs: Vec<Vec<(&str, bool)>> = vec![Vec::new(); net.n_open_points()];
    let branch_ends = net
        .branches
        .iter()
        .flat_map(|(_, b)| [(b.from, b.label.as_str(), false), (b.to, b.label.as_str(), false)]);
    let source_ends = net
        .sources_i
        .iter()
        .flat_map(|s| [(s.from, s.label.as_str(), true), (s.to, s.label.as_str(), true)]);
    for (r, label, is_current_src) in branch_ends.chain(source_ends) {
        if let NodeRef::Open(k) = r {
            open_refs[k].push((label, is_current_src));
        }
    }
    for refs in &open_refs {
        if refs.len() >= 2 && refs.iter().all(|&(_, cur)| cur) {
            return Err(NetlistError::SeriesIdealCurrent {
                a: refs[0].0.to_string(),
                b: refs[1].0.to_string(),
            });
        }
        if let Some(&(label, _)) = refs.first() {
            return Err(NetlistError::DanglingPort {
                element: label.to_string(),
            });
        }
    }
    Ok(())
}

/// Validates the netlist and produces one derivative closure per state.
///
/// Branch currents are signed positive into their `to` node and negative
/// out of their `from` node, so the two endpoint KCL sums see each current
/// with exactly opposite signs.
pub fn assemble(net: &Netlist) -> Result<Assembly, NetlistError> {
    validate_topology(net)?;
    let res = Resolver { net };
    let n = net.n_states();

    // Incidence: per node-voltage state, the incident branch currents and
    // ideal source currents with orientation signs.
    let mut incidence: Vec<Vec<(StateId, f64)>> = vec![Vec::new(); n];
    let mut src_currents: Vec<Vec<(Signal, f64)>> = vec![Vec::new(); n];
    for (bid, b) in &net.branches {
        if b.from == b.to {
            return Err(NetlistError::DegenerateBranch {
                element: b.label.clone(),
            });
        }
        for (r, sign) in [(b.from, -1.0), (b.to, 1.0)] {
            res.voltage(r, &b.label)?;
            if let NodeRef::Node(node) = r {
                incidence[node].push((*bid, sign));
            }
        }
    }
    for s in &net.sources_i {
        if s.from == s.to {
            return Err(NetlistError::DegenerateBranch {
                element: s.label.clone(),
            });
        }
        res.check_input(s.i)?;
        for (r, sign) in [(s.from, -1.0), (s.to, 1.0)] {
            res.voltage(r, &s.label)?;
            if let NodeRef::Node(node) = r {
                src_currents[node].push((s.i, sign));
            }
        }
    }

    let mut closures: Vec<Option<DerivativeClosure>> = vec![None; n];
    let mut labels: Vec<String> = vec![String::new(); n];
    let mut quanta: Vec<f64> = vec![0.0; n];
    let mut kinds: Vec<StateKind> = net.kinds().to_vec();

    for (id, node) in &net.nodes {
        let id = *id;
        if node.c <= 0.0 {
            return Err(NetlistError::NonPositive {
                element: node.label.clone(),
                what: "capacitance",
            });
        }
        if node.quantum <= 0.0 {
            return Err(NetlistError::NonPositive {
                element: node.label.clone(),
                what: "quantum",
            });
        }
        res.check_input(node.h)?;

        let mut deps: Vec<StateId> = Vec::new();
        let mut input_deps: Vec<InputId> = Vec::new();
        if node.g != 0.0 {
            deps.push(id);
        }
        if let Some(k) = node.h.input() {
            input_deps.push(k);
        }

        // Linear dependent currents and folded constants.
        let mut lin: Vec<(StateId, f64)> = Vec::new();
        let mut lin_u: Vec<(InputId, f64)> = Vec::new();
        let mut konst = 0.0;
        for &(r, coeff) in &node.vccs {
            match res.controlling_voltage(r, &node.label)? {
                VRef::Zero => {}
                VRef::State(s) => lin.push((s, coeff)),
                VRef::Const(v) => konst += coeff * v,
                VRef::Input(k) => lin_u.push((k, coeff)),
            }
        }
        for &(s, coeff) in &node.cccs {
            lin.push((res.controlling_current(s, &node.label)?, coeff));
        }
        deps.extend(lin.iter().map(|&(s, _)| s));
        input_deps.extend(lin_u.iter().map(|&(k, _)| k));

        let inc = incidence[id].clone();
        deps.extend(inc.iter().map(|&(s, _)| s));
        let src = src_currents[id].clone();
        input_deps.extend(src.iter().filter_map(|&(s, _)| s.input()));

        if let Some(x) = &node.extra {
            deps.extend_from_slice(&x.deps);
            input_deps.extend_from_slice(&x.inputs);
        }

        let c = node.c;
        let g = node.g;
        let h = node.h;
        let extra: Option<ExtraSource> = node.extra.clone();
        let eval = Arc::new(move |state: &[f64], inputs: &[f64]| -> f64 {
            let mut acc = Acc::default();
            acc.add(konst);
            acc.add(h.value(inputs));
            acc.add_prod(-g, state[id]);
            for &(s, coeff) in &lin {
                acc.add_prod(coeff, state[s]);
            }
            for &(k, coeff) in &lin_u {
                acc.add_prod(coeff, inputs[k]);
            }
            if let Some(x) = &extra {
                acc.add((x.f)(state, inputs));
            }
            for &(b, sign) in &inc {
                acc.add_prod(sign, state[b]);
            }
            for &(sig, sign) in &src {
                acc.add_prod(sign, sig.value(inputs));
            }
            acc.value() / c
        });
        closures[id] = Some(DerivativeClosure::new(deps, input_deps, eval));
        labels[id] = node.label.clone();
        quanta[id] = node.quantum;
        kinds[id] = StateKind::NodeVoltage;
    }

    for (id, b) in &net.branches {
        let id = *id;
        if b.l <= 0.0 {
            return Err(NetlistError::NonPositive {
                element: b.label.clone(),
                what: "inductance",
            });
        }
        if b.quantum <= 0.0 {
            return Err(NetlistError::NonPositive {
                element: b.label.clone(),
                what: "quantum",
            });
        }
        res.check_input(b.e)?;
        res.check_input(b.gain)?;

        let vf = res.voltage(b.from, &b.label)?;
        let vt = res.voltage(b.to, &b.label)?;

        let mut deps: Vec<StateId> = Vec::new();
        let mut input_deps: Vec<InputId> = Vec::new();
        if b.r != 0.0 {
            deps.push(id);
        }
        deps.extend(vf.state());
        deps.extend(vt.state());
        input_deps.extend(vf.input());
        input_deps.extend(vt.input());
        input_deps.extend(b.e.input());
        input_deps.extend(b.gain.input());

        let mut lin: Vec<(StateId, f64)> = Vec::new();
        let mut lin_u: Vec<(InputId, f64)> = Vec::new();
        let mut konst = 0.0;
        for &(r, coeff) in &b.vcvs {
            match res.controlling_voltage(r, &b.label)? {
                VRef::Zero => {}
                VRef::State(s) => lin.push((s, coeff)),
                VRef::Const(v) => konst += coeff * v,
                VRef::Input(k) => lin_u.push((k, coeff)),
            }
        }
        for &(s, coeff) in &b.ccvs {
            lin.push((res.controlling_current(s, &b.label)?, coeff));
        }
        deps.extend(lin.iter().map(|&(s, _)| s));
        input_deps.extend(lin_u.iter().map(|&(k, _)| k));
        if let Some(x) = &b.extra {
            deps.extend_from_slice(&x.deps);
            input_deps.extend_from_slice(&x.inputs);
        }

        let l = b.l;
        let r_series = b.r;
        let e = b.e;
        let gain = b.gain;
        let extra = b.extra.clone();
        let eval = Arc::new(move |state: &[f64], inputs: &[f64]| -> f64 {
            let mut dep = konst;
            for &(s, coeff) in &lin {
                dep += coeff * state[s];
            }
            for &(k, coeff) in &lin_u {
                dep += coeff * inputs[k];
            }
            if let Some(x) = &extra {
                dep += (x.f)(state, inputs);
            }
            branch_rate(
                l,
                r_series,
                e.value(inputs),
                gain.value(inputs),
                vf.value(state, inputs),
                vt.value(state, inputs),
                state[id],
                dep,
            )
        });
        closures[id] = Some(DerivativeClosure::new(deps, input_deps, eval));
        labels[id] = b.label.clone();
        quanta[id] = b.quantum;
        kinds[id] = StateKind::BranchCurrent;
    }

    for (id, a) in &net.aux {
        let id = *id;
        if a.quantum <= 0.0 {
            return Err(NetlistError::NonPositive {
                element: a.label.clone(),
                what: "quantum",
            });
        }
        for &d in &a.rate.deps {
            if d >= n {
                return Err(NetlistError::UnresolvedControlling {
                    element: a.label.clone(),
                });
            }
        }
        let f = a.rate.f.clone();
        let eval = Arc::new(move |state: &[f64], inputs: &[f64]| -> f64 { f(state, inputs) });
        closures[id] = Some(DerivativeClosure::new(
            a.rate.deps.clone(),
            a.rate.inputs.clone(),
            eval,
        ));
        labels[id] = a.label.clone();
        quanta[id] = a.quantum;
        kinds[id] = StateKind::Aux;
    }

    let closures: Vec<DerivativeClosure> = closures
        .into_iter()
        .map(|c| c.expect("every state id has exactly one element"))
        .collect();
    let system = QdlSystem::new(closures, labels, quanta, net.input_values.clone());
    Ok(Assembly {
        system,
        kinds,
        input_names: net.input_names.clone(),
    })
}
