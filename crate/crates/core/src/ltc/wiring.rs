//! Sparse layered wiring: sensory → inter → command → motor, with recurrent
//! command connections. Layer sizes are auto-allocated from a total unit
//! count; random connectivity is repaired until the structural invariants
//! hold.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::stage_rng;

use super::LtcError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Sensory,
    Inter,
    Command,
    Motor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Synapse {
    /// Global neuron id of the source.
    pub src: usize,
    /// Global neuron id of the destination (never sensory).
    pub dst: usize,
    /// Fixed sign carried by the wiring, +1 or -1.
    pub polarity: i8,
}

/// Neuron ids are assigned in blocks: sensory, inter, command, motor.
/// State is kept for non-sensory neurons only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WiringDiagram {
    pub n_sensory: usize,
    pub n_inter: usize,
    pub n_command: usize,
    pub n_motor: usize,
    pub synapses: Vec<Synapse>,
}

impl WiringDiagram {
    pub fn total_neurons(&self) -> usize {
        self.n_sensory + self.n_inter + self.n_command + self.n_motor
    }

    /// Number of stateful (non-sensory) neurons.
    pub fn state_size(&self) -> usize {
        self.n_inter + self.n_command + self.n_motor
    }

    pub fn inter_range(&self) -> std::ops::Range<usize> {
        self.n_sensory..self.n_sensory + self.n_inter
    }

    pub fn command_range(&self) -> std::ops::Range<usize> {
        let s = self.n_sensory + self.n_inter;
        s..s + self.n_command
    }

    pub fn motor_range(&self) -> std::ops::Range<usize> {
        let s = self.n_sensory + self.n_inter + self.n_command;
        s..s + self.n_motor
    }

    pub fn layer_of(&self, id: usize) -> Layer {
        if id < self.n_sensory {
            Layer::Sensory
        } else if id < self.n_sensory + self.n_inter {
            Layer::Inter
        } else if id < self.n_sensory + self.n_inter + self.n_command {
            Layer::Command
        } else {
            Layer::Motor
        }
    }

    /// State index of a non-sensory neuron.
    pub fn state_index(&self, id: usize) -> usize {
        debug_assert!(id >= self.n_sensory);
        id - self.n_sensory
    }

    /// Structural invariants: legal edge types, legal polarities, minimum
    /// degrees, and a directed path from every sensory neuron to a motor.
    pub fn validate(&self) -> Result<(), LtcError> {
        if self.n_sensory == 0 || self.n_inter == 0 || self.n_command == 0 || self.n_motor == 0 {
            return Err(LtcError::BadWiring {
                message: format!(
                    "every layer needs neurons: sensory={} inter={} command={} motor={}",
                    self.n_sensory, self.n_inter, self.n_command, self.n_motor
                ),
            });
        }
        let mut incoming = vec![0usize; self.total_neurons()];
        let mut outgoing = vec![0usize; self.total_neurons()];
        for syn in &self.synapses {
            if syn.polarity != 1 && syn.polarity != -1 {
                return Err(LtcError::BadWiring {
                    message: format!("polarity {} on {}->{}", syn.polarity, syn.src, syn.dst),
                });
            }
            let legal = matches!(
                (self.layer_of(syn.src), self.layer_of(syn.dst)),
                (Layer::Sensory, Layer::Inter)
                    | (Layer::Inter, Layer::Command)
                    | (Layer::Command, Layer::Command)
                    | (Layer::Command, Layer::Motor)
            );
            if !legal {
                return Err(LtcError::BadWiring {
                    message: format!("illegal edge {} -> {}", syn.src, syn.dst),
                });
            }
            incoming[syn.dst] += 1;
            outgoing[syn.src] += 1;
        }
        for id in self.n_sensory..self.total_neurons() {
            if incoming[id] == 0 {
                return Err(LtcError::BadWiring {
                    message: format!("neuron {id} has no incoming synapse"),
                });
            }
        }
        for id in 0..self.n_sensory {
            if outgoing[id] == 0 {
                return Err(LtcError::BadWiring {
                    message: format!("sensory neuron {id} has no outgoing synapse"),
                });
            }
        }
        // reachability: walk backwards from the motors
        let reach = self.reaches_motor();
        for id in 0..self.n_sensory {
            if !reach[id] {
                return Err(LtcError::BadWiring {
                    message: format!("sensory neuron {id} cannot reach a motor neuron"),
                });
            }
        }
        Ok(())
    }

    /// For each neuron, whether a directed path to some motor neuron exists.
    fn reaches_motor(&self) -> Vec<bool> {
        let mut reach = vec![false; self.total_neurons()];
        for id in self.motor_range() {
            reach[id] = true;
        }
        // fixpoint over reversed edges; the graph is tiny
        loop {
            let mut changed = false;
            for syn in &self.synapses {
                if reach[syn.dst] && !reach[syn.src] {
                    reach[syn.src] = true;
                    changed = true;
                }
            }
            if !changed {
                return reach;
            }
        }
    }
}

/// Sparsity defaults for the auto-allocated wiring.
#[derive(Debug, Clone, Copy)]
pub struct SparsityConfig {
    /// Inter neurons fed by each sensory neuron.
    pub sensory_fanout: usize,
    /// Fraction of command neurons fed by each inter neuron.
    pub inter_command_fraction: f64,
    /// Recurrent targets per command neuron.
    pub recurrent_fanout: usize,
    /// Command sources per motor neuron.
    pub motor_fanin: usize,
}

impl Default for SparsityConfig {
    fn default() -> Self {
        SparsityConfig {
            sensory_fanout: 4,
            inter_command_fraction: 0.5,
            recurrent_fanout: 4,
            motor_fanin: 6,
        }
    }
}

/// `k` distinct values from `range`, in sampled order.
fn sample_distinct(rng: &mut ChaCha8Rng, range: std::ops::Range<usize>, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = range.collect();
    let k = k.min(pool.len());
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

fn polarity(rng: &mut ChaCha8Rng) -> i8 {
    if rng.gen_bool(0.5) {
        1
    } else {
        -1
    }
}

/// Allocate layers from a total unit count and wire them sparsely at random,
/// then repair until [`WiringDiagram::validate`] holds. Deterministic under
/// `seed`. Command neurons take 40% of the non-motor units (at least one);
/// the rest become inter neurons.
pub fn auto_ncp_wire(
    n_sensory: usize,
    n_units: usize,
    n_motor: usize,
    seed: u64,
    sparsity: &SparsityConfig,
) -> Result<WiringDiagram, LtcError> {
    if n_sensory == 0 {
        return Err(LtcError::BadWiring {
            message: "need at least one sensory neuron".into(),
        });
    }
    if n_motor == 0 || n_units < n_motor + 2 {
        return Err(LtcError::TooFewUnits { n_units, n_motor });
    }
    let n_command = (((n_units - n_motor) as f64 * 0.4) as usize).max(1);
    let n_inter = n_units - n_motor - n_command;
    if n_inter == 0 {
        return Err(LtcError::TooFewUnits { n_units, n_motor });
    }

    let mut wiring = WiringDiagram {
        n_sensory,
        n_inter,
        n_command,
        n_motor,
        synapses: Vec::new(),
    };
    let mut rng = stage_rng(seed, "ncp-wire");

    let inter = wiring.inter_range();
    let command = wiring.command_range();
    let motor = wiring.motor_range();

    for src in 0..n_sensory {
        for dst in sample_distinct(&mut rng, inter.clone(), sparsity.sensory_fanout.max(1)) {
            let polarity = polarity(&mut rng);
            wiring.synapses.push(Synapse { src, dst, polarity });
        }
    }

    let command_fanout = ((n_command as f64 * sparsity.inter_command_fraction).round() as usize)
        .clamp(1, n_command);
    for src in inter.clone() {
        for dst in sample_distinct(&mut rng, command.clone(), command_fanout) {
            let polarity = polarity(&mut rng);
            wiring.synapses.push(Synapse { src, dst, polarity });
        }
    }

    for src in command.clone() {
        for dst in sample_distinct(&mut rng, command.clone(), sparsity.recurrent_fanout.max(1)) {
            let polarity = polarity(&mut rng);
            wiring.synapses.push(Synapse { src, dst, polarity });
        }
    }

    for dst in motor.clone() {
        for src in sample_distinct(&mut rng, command.clone(), sparsity.motor_fanin.max(1)) {
            let polarity = polarity(&mut rng);
            wiring.synapses.push(Synapse { src, dst, polarity });
        }
    }

    repair(&mut wiring, &mut rng);

    wiring.synapses.sort();
    wiring.synapses.dedup_by_key(|s| (s.src, s.dst));

    wiring.validate()?;
    Ok(wiring)
}

/// Add the minimum edges needed for the invariants: in-degrees, sensory
/// out-degrees, and command-to-motor reachability.
fn repair(wiring: &mut WiringDiagram, rng: &mut ChaCha8Rng) {
    let inter = wiring.inter_range();
    let command = wiring.command_range();
    let motor = wiring.motor_range();

    let mut incoming = vec![0usize; wiring.total_neurons()];
    let mut outgoing = vec![0usize; wiring.total_neurons()];
    for syn in &wiring.synapses {
        incoming[syn.dst] += 1;
        outgoing[syn.src] += 1;
    }

    let mut extra = Vec::new();
    for id in 0..wiring.n_sensory {
        if outgoing[id] == 0 {
            let dst = inter.start + rng.gen_range(0..wiring.n_inter);
            extra.push(Synapse {
                src: id,
                dst,
                polarity: polarity(rng),
            });
            incoming[dst] += 1;
        }
    }
    for id in inter.clone() {
        if incoming[id] == 0 {
            let src = rng.gen_range(0..wiring.n_sensory);
            extra.push(Synapse {
                src,
                dst: id,
                polarity: polarity(rng),
            });
        }
    }
    for id in command.clone() {
        if incoming[id] == 0 {
            let src = inter.start + rng.gen_range(0..wiring.n_inter);
            extra.push(Synapse {
                src,
                dst: id,
                polarity: polarity(rng),
            });
        }
    }
    for id in motor.clone() {
        if incoming[id] == 0 {
            let src = command.start + rng.gen_range(0..wiring.n_command);
            extra.push(Synapse {
                src,
                dst: id,
                polarity: polarity(rng),
            });
        }
    }
    wiring.synapses.append(&mut extra);

    // every command must reach a motor; give stranded ones a direct edge
    let reach = wiring.reaches_motor();
    let mut extra = Vec::new();
    for id in command {
        if !reach[id] {
            let dst = motor.start + rng.gen_range(0..wiring.n_motor);
            extra.push(Synapse {
                src: id,
                dst,
                polarity: polarity(rng),
            });
        }
    }
    wiring.synapses.append(&mut extra);
}
