//! Elitist neuroevolution of small spiking classifiers.
//!
//! Each generation keeps the top quarter of the population and refills the
//! rest with mutated copies of elites picked by binary tournament. Every
//! individual draws from its own ChaCha8 stream keyed by
//! `(seed, generation, slot)`, so the run does not depend on how fitness
//! evaluation is scheduled.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::network::{encode, CompiledNetwork, Connection, Neuron, SpikingNetwork};
use crate::error::{Error, Result};
use crate::parallel::run_indexed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub population: usize,
    /// Generations including the initial random one.
    pub generations: usize,
    pub mutation_rate: f64,
    pub seed: u64,
    pub sim_window: u32,
    /// Spikes per timestep at feature value 1.
    pub max_rate: f64,
    pub hidden_neurons: usize,
    /// Initial weights are uniform within this fraction of the weight range
    /// around its midpoint.
    pub init_weight_spread: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            population: 64,
            generations: 200,
            mutation_rate: 0.1,
            seed: 0,
            sim_window: 100,
            max_rate: 0.2,
            hidden_neurons: 4,
            init_weight_spread: 1.0,
            w_min: -1.0,
            w_max: 1.0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::invalid(format!("population must be at least 4, got {}", self.population)));
        }
        if self.generations < 1 {
            return Err(Error::invalid("generations must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::invalid(format!("mutation_rate must be in [0, 1], got {}", self.mutation_rate)));
        }
        if self.sim_window == 0 || !(self.max_rate > 0.0 && self.max_rate <= 1.0) {
            return Err(Error::invalid("sim_window must be positive and max_rate in (0, 1]"));
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::invalid(format!("empty weight range [{}, {}]", self.w_min, self.w_max)));
        }
        if !(self.init_weight_spread > 0.0 && self.init_weight_spread <= 1.0) {
            return Err(Error::invalid("init_weight_spread must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Rate-coded instances, ready for repeated simulation.
#[derive(Debug, Clone)]
pub struct EncodedSet {
    pub spikes: Vec<Vec<Vec<u32>>>,
    pub labels: Vec<usize>,
    pub window: u32,
    pub max_rate: f64,
}

impl EncodedSet {
    pub fn new(data: &Dataset, indices: &[usize], window: u32, max_rate: f64) -> Self {
        EncodedSet {
            spikes: indices.iter().map(|&i| encode(&data.features[i], window, max_rate)).collect(),
            labels: indices.iter().map(|&i| data.labels[i]).collect(),
            window,
            max_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Classification accuracy plus a mean spike-count margin used to break
/// ties between equally accurate networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fitness {
    pub accuracy: f64,
    pub margin: f64,
}

impl Fitness {
    fn cmp(&self, other: &Fitness) -> Ordering {
        self.accuracy.total_cmp(&other.accuracy).then(self.margin.total_cmp(&other.margin))
    }
}

pub fn evaluate(net: &CompiledNetwork, set: &EncodedSet) -> Fitness {
    if set.is_empty() {
        return Fitness { accuracy: 0.0, margin: 0.0 };
    }
    let scale = f64::from(set.window) * set.max_rate;
    let (mut hits, mut margin) = (0usize, 0.0);
    for (spikes, &label) in set.spikes.iter().zip(&set.labels) {
        let counts = net.simulate(spikes, set.window);
        if super::network::argmax(&counts) == label {
            hits += 1;
        }
        let own = f64::from(counts[label]);
        let rival = counts.iter().enumerate().filter(|&(k, _)| k != label).map(|(_, &c)| c).max().unwrap_or(0);
        margin += ((own - f64::from(rival)) / scale).clamp(-1.0, 1.0);
    }
    Fitness { accuracy: hits as f64 / set.len() as f64, margin: margin / set.len() as f64 }
}

pub fn accuracy(net: &SpikingNetwork, set: &EncodedSet) -> f64 {
    evaluate(&net.compile(), set).accuracy
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveResult {
    pub network: SpikingNetwork,
    pub fitness: Fitness,
    /// Best-so-far training accuracy after each generation.
    pub history: Vec<f64>,
}

fn individual_rng(seed: u64, generation: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | slot as u64);
    rng
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random network: inputs first, then one output per class, then hidden
/// neurons. Every output is guaranteed a direct input connection if the
/// random wiring left it unreachable.
pub fn random_network(inputs: usize, classes: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> SpikingNetwork {
    let hidden = cfg.hidden_neurons;
    let total = inputs + classes + hidden;
    let mut neurons = vec![Neuron { threshold: 1.0, leak: 0.0 }; inputs];
    for _ in inputs..total {
        neurons.push(Neuron { threshold: rng.random_range(0.5..3.0), leak: rng.random_range(0.0..0.1) });
    }
    let outputs: Vec<usize> = (inputs..inputs + classes).collect();
    let hidden_ids: Vec<usize> = (inputs + classes..total).collect();
    let mid = 0.5 * (cfg.w_min + cfg.w_max);
    let half = 0.5 * (cfg.w_max - cfg.w_min) * cfg.init_weight_spread;
    let weight = |rng: &mut ChaCha8Rng| rng.random_range(mid - half..=mid + half);
    let mut connections = Vec::new();
    for i in 0..inputs {
        for &o in &outputs {
            if rng.random_bool(0.6) {
                connections.push(Connection { pre: i, post: o, weight: weight(rng), delay: 1 });
            }
        }
        for &h in &hidden_ids {
            if rng.random_bool(0.3) {
                connections.push(Connection { pre: i, post: h, weight: weight(rng), delay: 1 });
            }
        }
    }
    for &h in &hidden_ids {
        for &o in &outputs {
            if rng.random_bool(0.5) {
                connections.push(Connection { pre: h, post: o, weight: weight(rng), delay: rng.random_range(1..=2) });
            }
        }
    }
    let mut net = SpikingNetwork {
        neurons,
        connections,
        inputs: (0..inputs).collect(),
        outputs,
        w_min: cfg.w_min,
        w_max: cfg.w_max,
    };
    while let Some(o) = net.unreachable_output() {
        let pre = rng.random_range(0..inputs);
        net.connections.push(Connection { pre, post: o, weight: weight(rng), delay: 1 });
    }
    net
}

/// Mutated copy of `parent`. Structural changes that would disconnect an
/// output are dropped.
pub fn mutate(parent: &SpikingNetwork, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> SpikingNetwork {
    let rate = cfg.mutation_rate;
    let span = cfg.w_max - cfg.w_min;
    let mut net = parent.clone();
    for c in &mut net.connections {
        if rng.random_bool(rate) {
            c.weight = (c.weight + 0.15 * span * gauss(rng)).clamp(cfg.w_min, cfg.w_max);
        }
    }
    let first_free = net.inputs.len();
    for nr in &mut net.neurons[first_free..] {
        if rng.random_bool(rate) {
            nr.threshold = (nr.threshold * (0.2 * gauss(rng)).exp()).clamp(0.05, 20.0);
        }
        if rng.random_bool(rate) {
            nr.leak = (nr.leak + 0.05 * gauss(rng)).clamp(0.0, 1.0);
        }
    }
    let n = net.neurons.len();
    if rng.random_bool(rate) && n > first_free {
        let pre = rng.random_range(0..n);
        let post = rng.random_range(first_free..n);
        if pre != post && !net.connections.iter().any(|c| c.pre == pre && c.post == post) {
            let weight = rng.random_range(cfg.w_min..=cfg.w_max);
            net.connections.push(Connection { pre, post, weight, delay: rng.random_range(1..=2) });
        }
    }
    if rng.random_bool(rate) && !net.connections.is_empty() {
        let k = rng.random_range(0..net.connections.len());
        let removed = net.connections.remove(k);
        if net.unreachable_output().is_some() {
            net.connections.insert(k, removed);
        }
    }
    net
}

/// Train on `data.train`.
pub fn evolve(data: &Dataset, cfg: &TrainConfig) -> Result<EvolveResult> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let train = EncodedSet::new(data, &data.train, cfg.sim_window, cfg.max_rate);
    let (inputs, classes) = (data.feature_count(), data.class_count());
    let score = |nets: &[SpikingNetwork]| {
        run_indexed(cfg.workers, nets.len(), |k| evaluate(&nets[k as usize].compile(), &train))
    };

    let mut population: Vec<SpikingNetwork> = (0..cfg.population)
        .map(|slot| random_network(inputs, classes, cfg, &mut individual_rng(cfg.seed, 0, slot)))
        .collect();
    let mut fitness = score(&population)?;
    let elite_count = cfg.population.div_ceil(4);

    let mut best = (population[0].clone(), fitness[0]);
    let mut history = Vec::with_capacity(cfg.generations);
    for generation in 0..cfg.generations {
        if generation > 0 {
            let children: Vec<SpikingNetwork> = (elite_count..cfg.population)
                .map(|slot| {
                    let mut rng = individual_rng(cfg.seed, generation, slot);
                    let a = rng.random_range(0..elite_count);
                    let b = rng.random_range(0..elite_count);
                    let parent = if fitness[b].cmp(&fitness[a]) == Ordering::Greater { b } else { a };
                    mutate(&population[parent], cfg, &mut rng)
                })
                .collect();
            let child_fitness = score(&children)?;
            population.truncate(elite_count);
            fitness.truncate(elite_count);
            population.extend(children);
            fitness.extend(child_fitness);
        }
        // rank, keeping slot order among equals
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[b].cmp(&fitness[a]).then(a.cmp(&b)));
        population = order.iter().map(|&k| population[k].clone()).collect();
        fitness = order.iter().map(|&k| fitness[k]).collect();
        if fitness[0].cmp(&best.1) == Ordering::Greater || generation == 0 {
            best = (population[0].clone(), fitness[0]);
        }
        history.push(best.1.accuracy);
    }
    Ok(EvolveResult { network: best.0, fitness: best.1, history })
}
