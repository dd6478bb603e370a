//! Time-stamped simulation records.

use crate::scalar::Real;

/// A sampled trajectory: states, inputs, outputs, and optional storage and
/// consensus-metric values at strictly increasing times.
///
/// All sequences share one length, and every sample satisfies the
/// reconstruction identity `y = ỹ + D·u` by construction (the integrators
/// compute outputs that way).
#[derive(Debug, Clone, Default)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub inputs: Vec<Vec<T>>,
    pub outputs: Vec<Vec<T>>,
    pub aux_outputs: Vec<Vec<T>>,
    pub storage_values: Option<Vec<T>>,
    pub consensus_values: Option<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn with_capacity(n: usize, storage: bool, consensus: bool) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            inputs: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
            aux_outputs: Vec::with_capacity(n),
            storage_values: storage.then(|| Vec::with_capacity(n)),
            consensus_values: consensus.then(|| Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("empty trajectory")
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().expect("empty trajectory")
    }

    /// Checks the structural invariants: shared lengths and strictly
    /// increasing times. Panics with a descriptive message on violation;
    /// used by tests and debug assertions.
    pub fn assert_consistent(&self) {
        let n = self.times.len();
        assert_eq!(self.states.len(), n, "states length");
        assert_eq!(self.inputs.len(), n, "inputs length");
        assert_eq!(self.outputs.len(), n, "outputs length");
        assert_eq!(self.aux_outputs.len(), n, "aux_outputs length");
        if let Some(s) = &self.storage_values {
            assert_eq!(s.len(), n, "storage_values length");
        }
        if let Some(c) = &self.consensus_values {
            assert_eq!(c.len(), n, "consensus_values length");
        }
        for w in self.times.windows(2) {
            assert!(w[0] < w[1], "times must be strictly increasing");
        }
    }
}
