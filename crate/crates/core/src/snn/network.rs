//! Discrete-time leaky integrate-and-fire network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub threshold: f64,
    /// Fraction of the potential lost per timestep.
    pub leak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub pre: usize,
    pub post: usize,
    pub weight: f64,
    /// Timesteps between a spike at `pre` and its arrival at `post`.
    pub delay: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingNetwork {
    pub neurons: Vec<Neuron>,
    pub connections: Vec<Connection>,
    /// Input neurons fire only from the encoded spike trains.
    pub inputs: Vec<usize>,
    /// One neuron per class, in class order.
    pub outputs: Vec<usize>,
    pub w_min: f64,
    pub w_max: f64,
}

impl SpikingNetwork {
    pub fn validate(&self) -> Result<()> {
        let n = self.neurons.len();
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(self.w_min < self.w_max) {
            return bad(format!("weight bounds [{}, {}] are empty", self.w_min, self.w_max));
        }
        if self.outputs.is_empty() || self.inputs.is_empty() {
            return bad("network needs input and output neurons".into());
        }
        let mut role = vec![0u8; n];
        for (set, tag) in [(&self.inputs, 1u8), (&self.outputs, 2u8)] {
            for &i in set {
                if i >= n {
                    return bad(format!("neuron index {i} out of range"));
                }
                if role[i] != 0 {
                    return bad(format!("neuron {i} listed twice in the input/output sets"));
                }
                role[i] = tag;
            }
        }
        for (i, nr) in self.neurons.iter().enumerate() {
            if !(nr.threshold > 0.0 && nr.threshold.is_finite()) || !(0.0..=1.0).contains(&nr.leak) {
                return bad(format!("neuron {i} has threshold {} and leak {}", nr.threshold, nr.leak));
            }
        }
        for (k, c) in self.connections.iter().enumerate() {
            if c.pre >= n || c.post >= n {
                return bad(format!("connection {k} refers to a missing neuron"));
            }
            if c.pre == c.post {
                return bad(format!("connection {k} is a self-loop on neuron {}", c.pre));
            }
            if role[c.post] == 1 {
                return bad(format!("connection {k} targets input neuron {}", c.post));
            }
            if !(self.w_min..=self.w_max).contains(&c.weight) {
                return bad(format!("connection {k} weight {} outside [{}, {}]", c.weight, self.w_min, self.w_max));
            }
            if c.delay < 1 {
                return bad(format!("connection {k} has zero delay"));
            }
        }
        if let Some(o) = self.unreachable_output() {
            return bad(format!("output neuron {o} has no path from any input"));
        }
        Ok(())
    }

    /// First output neuron with no connection path from an input.
    pub fn unreachable_output(&self) -> Option<usize> {
        let n = self.neurons.len();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = self.inputs.iter().copied().filter(|&i| i < n).collect();
        for &i in &stack {
            seen[i] = true;
        }
        while let Some(u) = stack.pop() {
            for c in self.connections.iter().filter(|c| c.pre == u && c.post < n) {
                if !seen[c.post] {
                    seen[c.post] = true;
                    stack.push(c.post);
                }
            }
        }
        self.outputs.iter().copied().find(|&o| o >= n || !seen[o])
    }

    pub fn compile(&self) -> CompiledNetwork {
        CompiledNetwork::new(self)
    }

    /// Output spike counts for one encoded instance.
    pub fn simulate(&self, spikes: &[Vec<u32>], window: u32) -> Vec<u32> {
        self.compile().simulate(spikes, window)
    }

    pub fn classify(&self, spikes: &[Vec<u32>], window: u32) -> usize {
        argmax(&self.simulate(spikes, window))
    }
}

/// Index of the largest count, lowest index on ties.
pub fn argmax(counts: &[u32]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// Evenly spaced rate code: a feature `f` in [0, 1] becomes
/// `floor(f * window * max_rate)` spikes at times `floor(k * window / count)`.
pub fn encode(features: &[f64], window: u32, max_rate: f64) -> Vec<Vec<u32>> {
    features
        .iter()
        .map(|&f| {
            // guard against 0.9999999 * 20 style truncation
            let count = (f.clamp(0.0, 1.0) * f64::from(window) * max_rate + 1e-9).floor() as u64;
            (0..count).map(|k| (k * u64::from(window) / count) as u32).collect()
        })
        .collect()
}

/// Per-step record of a traced simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Potentials at the end of each step (after any reset).
    pub potentials: Vec<Vec<f64>>,
    /// `(step, neuron)` for every spike, in order.
    pub spikes: Vec<(u32, usize)>,
}

/// Adjacency-list form of a network for repeated simulation.
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    decay: Vec<f64>,
    threshold: Vec<f64>,
    is_input: Vec<bool>,
    inputs: Vec<usize>,
    out_slot: Vec<Option<usize>>,
    output_count: usize,
    fanout: Vec<Vec<(usize, f64, u32)>>,
    ring_len: usize,
}

impl CompiledNetwork {
    fn new(net: &SpikingNetwork) -> Self {
        let n = net.neurons.len();
        let mut fanout = vec![Vec::new(); n];
        let mut max_delay = 1;
        for c in &net.connections {
            fanout[c.pre].push((c.post, c.weight, c.delay));
            max_delay = max_delay.max(c.delay);
        }
        let mut is_input = vec![false; n];
        for &i in &net.inputs {
            is_input[i] = true;
        }
        let mut out_slot = vec![None; n];
        for (k, &o) in net.outputs.iter().enumerate() {
            out_slot[o] = Some(k);
        }
        CompiledNetwork {
            decay: net.neurons.iter().map(|nr| 1.0 - nr.leak).collect(),
            threshold: net.neurons.iter().map(|nr| nr.threshold).collect(),
            is_input,
            inputs: net.inputs.clone(),
            out_slot,
            output_count: net.outputs.len(),
            fanout,
            ring_len: max_delay as usize + 1,
        }
    }

    pub fn simulate(&self, spikes: &[Vec<u32>], window: u32) -> Vec<u32> {
        self.run(spikes, window, |_, _, _| {})
    }

    pub fn classify(&self, spikes: &[Vec<u32>], window: u32) -> usize {
        argmax(&self.simulate(spikes, window))
    }

    pub fn simulate_traced(&self, spikes: &[Vec<u32>], window: u32) -> (Vec<u32>, Trace) {
        let mut trace = Trace { potentials: Vec::new(), spikes: Vec::new() };
        let counts = self.run(spikes, window, |t, v, fired| {
            trace.potentials.push(v.to_vec());
            trace.spikes.extend(fired.iter().map(|&i| (t, i)));
        });
        (counts, trace)
    }

    /// `spikes[j]` holds the ascending spike times of `inputs[j]`.
    fn run<F: FnMut(u32, &[f64], &[usize])>(&self, spikes: &[Vec<u32>], window: u32, mut observe: F) -> Vec<u32> {
        let n = self.decay.len();
        let mut v = vec![0.0; n];
        let mut ring = vec![0.0; self.ring_len * n];
        let mut cursor = vec![0usize; self.inputs.len()];
        let mut fired = Vec::with_capacity(n);
        let mut counts = vec![0u32; self.output_count];
        for t in 0..window {
            let slot = (t as usize % self.ring_len) * n;
            fired.clear();
            for (j, &i) in self.inputs.iter().enumerate() {
                let train = spikes.get(j).map(Vec::as_slice).unwrap_or(&[]);
                let mut hit = false;
                while cursor[j] < train.len() && train[cursor[j]] <= t {
                    hit |= train[cursor[j]] == t;
                    cursor[j] += 1;
                }
                if hit {
                    fired.push(i);
                }
            }
            for i in 0..n {
                let arriving = std::mem::take(&mut ring[slot + i]);
                if self.is_input[i] {
                    continue;
                }
                v[i] = v[i] * self.decay[i] + arriving;
                if v[i] >= self.threshold[i] {
                    v[i] = 0.0;
                    fired.push(i);
                }
            }
            for &i in &fired {
                if let Some(k) = self.out_slot[i] {
                    counts[k] += 1;
                }
                for &(post, w, d) in &self.fanout[i] {
                    let s = ((t + d) as usize % self.ring_len) * n;
                    ring[s + post] += w;
                }
            }
            observe(t, &v, &fired);
        }
        counts
    }
}
