//! Deterministic event queue keyed on (time, atom id).

use std::collections::BTreeSet;

use super::AtomId;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    t: f64,
    id: AtomId,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Times are finite and non-NaN by construction; ties break on the
        // ascending atom id so pop order is fully deterministic.
        self.t
            .total_cmp(&other.t)
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered collection of scheduled internal events with reschedule support.
///
/// An atom has at most one pending event; scheduling again replaces the old
/// entry. Infinite times mean "not scheduled" and are not stored.
#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    set: BTreeSet<Key>,
    scheduled: Vec<Option<f64>>,
}

impl EventQueue {
    pub fn new(n_atoms: usize) -> Self {
        Self {
            set: BTreeSet::new(),
            scheduled: vec![None; n_atoms],
        }
    }

    /// Schedules (or reschedules) atom `id` at time `t`.
    pub fn schedule(&mut self, id: AtomId, t: f64) {
        assert!(!t.is_nan(), "event time must not be NaN (atom {id})");
        if let Some(old) = self.scheduled[id].take() {
            self.set.remove(&Key { t: old, id });
        }
        if t.is_finite() {
            self.set.insert(Key { t, id });
            self.scheduled[id] = Some(t);
        }
    }

    /// Earliest pending event, if any.
    pub fn peek(&self) -> Option<(f64, AtomId)> {
        self.set.first().map(|k| (k.t, k.id))
    }

    /// Removes and returns the earliest pending event.
    pub fn pop(&mut self) -> Option<(f64, AtomId)> {
        let k = self.set.pop_first()?;
        self.scheduled[k.id] = None;
        Some((k.t, k.id))
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reschedule_replaces_entry() {
        let mut q = EventQueue::new(2);
        q.schedule(0, 5.0);
        q.schedule(1, 2.0);
        q.schedule(0, 1.0);
        assert_eq!(q.pop(), Some((1.0, 0)));
        assert_eq!(q.pop(), Some((2.0, 1)));
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn infinite_time_unschedules() {
        let mut q = EventQueue::new(1);
        q.schedule(0, 1.0);
        q.schedule(0, f64::INFINITY);
        assert!(q.is_empty());
    }

    #[test]
    fn ties_break_on_atom_id() {
        let mut q = EventQueue::new(3);
        q.schedule(2, 1.0);
        q.schedule(0, 1.0);
        q.schedule(1, 1.0);
        assert_eq!(q.pop(), Some((1.0, 0)));
        assert_eq!(q.pop(), Some((1.0, 1)));
        assert_eq!(q.pop(), Some((1.0, 2)));
    }

    proptest! {
        #[test]
        fn pop_order_is_nondecreasing(ops in proptest::collection::vec((0usize..16, 0.0f64..100.0), 1..200)) {
            let mut q = EventQueue::new(16);
            for (id, t) in ops {
                q.schedule(id, t);
            }
            let mut last: Option<(f64, usize)> = None;
            while let Some((t, id)) = q.pop() {
                if let Some((lt, lid)) = last {
                    prop_assert!(t > lt || (t == lt && id > lid));
                }
                last = Some((t, id));
            }
        }
    }
}
